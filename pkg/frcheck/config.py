"""
Configuration for frcheck runs: sampling defaults, output locations,
logging and the INI run-config loader
"""

import configparser
import logging
import os
import re
import sys
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

import numpy as np

from frcheck.errors import ConfigError
from frcheck.rationals import parse_rational

# Sampling defaults (overridden by the [sampling] section)
SAMPLING_DEFAULTS = {
    "base_samples": 65536,
    "batch_size": 16384,
    "doublings": 3,
    "scale": 1.0,
    "workers": 4,
    "inner_samples": 4096,
    "cauchy_tolerance": 0.1,
    "tail_index_threshold": 1.1,
}

# Apex heights r for scaling fits; slopes are fitted against log g(R) = 2 log r
R_GRID = (1.0, 2.0, 4.0, 8.0)

# Output locations
OUTPUT_DIR_ENV = "FRCHECK_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "reports"
OUTPUT_FORMATS = ["json", "csv"]

# Exit-code contract of the command line
EXIT_CODES = {
    "pass": 0,
    "failed": 1,
    "range_gate": 2,
    "parse": 3,
    "divergence": 4,
}

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

logger = logging.getLogger('config')


def setup_logging(level="INFO", log_file=None):
    """Configure root logging: diagnostics to stderr, optionally to a file as well"""
    handlers = [logging.StreamHandler(sys.stderr)]
    if log_file:
        os.makedirs(os.path.dirname(os.path.abspath(log_file)), exist_ok=True)
        handlers.append(logging.FileHandler(log_file))

    logging.basicConfig(
        level=getattr(logging, str(level).upper(), logging.INFO),
        format=LOG_FORMAT,
        handlers=handlers,
        force=True,
    )


def entropy_seed():
    """Draw a fresh 64-bit seed from OS entropy"""
    return int(np.random.SeedSequence().generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class SamplingConfig:
    """
    Monte Carlo sampling block.

    Args:
        seed: master seed; every batch, grid point and probe derives a child seed from it
        base_samples: samples at the first step of the doubling schedule
        batch_size: samples per batch; must divide base_samples
        doublings: number of doublings after the first step (3 gives N, 2N, 4N, 8N)
        scale: proposal scale for the heavy-tailed sampler
        workers: thread-pool size
        inner_samples: size of the shared inner cloud of the nested mixed-norm estimator
        cauchy_tolerance: relative tolerance of the doubling Cauchy criterion
        tail_index_threshold: Hill tail index below which an integrand is flagged
            as infinite-mean; None disables the check
    """
    seed: int
    base_samples: int = SAMPLING_DEFAULTS["base_samples"]
    batch_size: int = SAMPLING_DEFAULTS["batch_size"]
    doublings: int = SAMPLING_DEFAULTS["doublings"]
    scale: float = SAMPLING_DEFAULTS["scale"]
    workers: int = SAMPLING_DEFAULTS["workers"]
    inner_samples: int = SAMPLING_DEFAULTS["inner_samples"]
    cauchy_tolerance: float = SAMPLING_DEFAULTS["cauchy_tolerance"]
    tail_index_threshold: Optional[float] = SAMPLING_DEFAULTS["tail_index_threshold"]

    def __post_init__(self):
        if self.base_samples < 1 or self.batch_size < 1:
            raise ValueError("base_samples and batch_size must be positive")
        if self.base_samples % self.batch_size:
            raise ValueError(
                f"batch_size {self.batch_size} must divide base_samples {self.base_samples}"
            )
        if self.doublings < 0:
            raise ValueError("doublings must be non-negative")
        if not self.scale > 0:
            raise ValueError("scale must be positive")
        if self.workers < 1 or self.inner_samples < 2:
            raise ValueError("workers must be positive and inner_samples at least 2")
        if not self.cauchy_tolerance > 0:
            raise ValueError("cauchy_tolerance must be positive")

    @property
    def total_samples(self):
        return self.base_samples * 2 ** self.doublings

    def with_seed(self, seed):
        return replace(self, seed=int(seed))

    def to_dict(self):
        return {
            "seed": self.seed,
            "base_samples": self.base_samples,
            "batch_size": self.batch_size,
            "doublings": self.doublings,
            "scale": self.scale,
            "workers": self.workers,
            "inner_samples": self.inner_samples,
            "cauchy_tolerance": self.cauchy_tolerance,
            "tail_index_threshold": self.tail_index_threshold,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(**data)


_RATIONAL_SECTIONS = {
    "params": {"a", "b", "c"},
    "spaces": {"p", "q", "alpha", "beta"},
    "testfn": {"l", "s"},
    "pairing": {"l", "s"},
    "lemma21": {"l", "r", "s"},
    "remark21": {"s", "l"},
    "scaling": {"blowup_epsilon"},
}


@dataclass
class RunConfig:
    """Parsed run configuration; rationals are kept exact"""
    path: Optional[str]
    sections: Dict[str, Dict[str, str]]
    sampling: SamplingConfig
    seed_recorded: bool
    output_path: Optional[str] = None
    output_format: str = "json"
    _lines: List[str] = field(default_factory=list, repr=False)

    def section(self, name):
        return self.sections.get(name, {})

    def has(self, section, key):
        return key in self.sections.get(section, {})

    def get(self, section, key, default=None):
        return self.sections.get(section, {}).get(key, default)

    def _locate(self, section, key):
        """Line/column (1-based) of a key inside the config text"""
        current = None
        for lineno, line in enumerate(self._lines, start=1):
            stripped = line.strip()
            if stripped.startswith("[") and stripped.endswith("]"):
                current = stripped[1:-1].strip()
                continue
            if current == section:
                match = re.match(r"\s*(\w+)\s*[=:]\s*", line)
                if match and match.group(1) == key:
                    return lineno, match.end() + 1
        return 0, 0

    def rational(self, section, key, default=None):
        raw = self.get(section, key)
        if raw is None:
            if default is None:
                raise self.error(section, key, f"missing key '{key}' in [{section}]")
            return Fraction(default)
        try:
            return parse_rational(raw)
        except ValueError as e:
            raise self.error(section, key, str(e))

    def rational_pair(self, section, key, allow_absent=False):
        raw = self.get(section, key)
        if raw is None:
            raise self.error(section, key, f"missing key '{key}' in [{section}]")
        parts = [part.strip() for part in raw.split(",")]
        if len(parts) != 2:
            raise self.error(section, key, f"expected two comma-separated rationals, got '{raw}'")
        values = []
        for part in parts:
            if allow_absent and part.lower() in ("-", "none", "absent"):
                values.append(None)
                continue
            try:
                values.append(parse_rational(part))
            except ValueError as e:
                raise self.error(section, key, str(e))
        return tuple(values)

    def real(self, section, key, default=None):
        raw = self.get(section, key)
        if raw is None:
            return default
        try:
            return float(raw)
        except ValueError:
            raise self.error(section, key, f"expected a real number, got '{raw}'")

    def real_list(self, section, key, default=None):
        raw = self.get(section, key)
        if raw is None:
            return default
        try:
            return [float(part) for part in raw.split(",") if part.strip()]
        except ValueError:
            raise self.error(section, key, f"expected comma-separated reals, got '{raw}'")

    def integer(self, section, key, default=None):
        raw = self.get(section, key)
        if raw is None:
            return default
        try:
            return int(raw)
        except ValueError:
            raise self.error(section, key, f"expected an integer, got '{raw}'")

    def error(self, section, key, message):
        line, column = self._locate(section, key)
        return ConfigError(message, path=self.path, line=line, column=column)

    def canonical(self):
        """Config content used for the report-name hash (seed included)"""
        data = {name: dict(sorted(values.items())) for name, values in sorted(self.sections.items())}
        data["sampling"] = self.sampling.to_dict()
        return data


def _sampling_from_section(values, lines, path):
    kwargs = {}
    casts = {
        "seed": int,
        "base_samples": int,
        "batch_size": int,
        "doublings": int,
        "scale": float,
        "workers": int,
        "inner_samples": int,
        "cauchy_tolerance": float,
    }
    for key, raw in values.items():
        if key == "tail_index_threshold":
            kwargs[key] = None if raw.strip().lower() in ("none", "off", "") else float(raw)
            continue
        if key not in casts:
            raise ConfigError(f"unknown sampling key '{key}'", path=path)
        try:
            kwargs[key] = casts[key](raw)
        except ValueError:
            raise ConfigError(f"bad value for sampling key '{key}': '{raw}'", path=path)

    recorded = "seed" in kwargs
    if not recorded:
        kwargs["seed"] = entropy_seed()
        logger.info(f"No seed configured, drew {kwargs['seed']} from entropy")
    try:
        return SamplingConfig(**kwargs), recorded
    except ValueError as e:
        raise ConfigError(str(e), path=path)


def load_run_config(path=None, text=None):
    """
    Load a run configuration.

    Args:
        path: INI file to read
        text: INI content (used instead of path when given)

    Returns:
        RunConfig with parsed sampling block and raw string sections
    """
    if text is None:
        if path is None:
            raise ConfigError("either a config path or config text is required")
        try:
            with open(path, 'r') as f:
                text = f.read()
        except OSError as e:
            raise ConfigError(f"cannot read config: {e}", path=path)

    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text, source=path or "<config>")
    except configparser.ParsingError as e:
        line = e.errors[0][0] if e.errors else 0
        raise ConfigError(f"malformed config: {e.message.splitlines()[0]}", path=path, line=line, column=1)
    except configparser.Error as e:
        line = getattr(e, "lineno", 0) or 0
        raise ConfigError(f"malformed config: {e}", path=path, line=line, column=1)

    sections = {name: dict(parser.items(name)) for name in parser.sections()}
    lines = text.splitlines()
    sampling, recorded = _sampling_from_section(sections.get("sampling", {}), lines, path)
    output = sections.get("output", {})
    output_format = output.get("format", "json").strip().lower()
    if output_format not in OUTPUT_FORMATS:
        raise ConfigError(f"unknown output format '{output_format}'", path=path)

    config = RunConfig(
        path=path,
        sections=sections,
        sampling=sampling,
        seed_recorded=recorded,
        output_path=output.get("path"),
        output_format=output_format,
        _lines=lines,
    )

    # Theorem parameters must parse exactly; check eagerly so errors carry positions
    for section, keys in _RATIONAL_SECTIONS.items():
        for key in keys & set(config.section(section)):
            raw = config.get(section, key)
            for part in raw.split(","):
                part = part.strip()
                if part.lower() in ("-", "none", "absent"):
                    continue
                try:
                    parse_rational(part)
                except ValueError as e:
                    raise config.error(section, key, str(e))
    if config.has("params", "n"):
        config.integer("params", "n")

    return config


def resolve_output_dir(config=None, override=None):
    """Output directory: explicit override, then [output] path, then the environment, then the default"""
    if override:
        return override
    if config is not None and config.output_path:
        return config.output_path
    return os.environ.get(OUTPUT_DIR_ENV, DEFAULT_OUTPUT_DIR)


def parse_probe_lines(raw, n) -> List[Tuple[np.ndarray, ...]]:
    """
    Parse probe lines of the form "re ; im ; re ; im" (comma-separated components)
    into tuples of real vectors of length n
    """
    probes = []
    for line in raw.strip().splitlines():
        line = line.strip()
        if not line:
            continue
        chunks = [chunk.strip() for chunk in line.split(";")]
        if len(chunks) != 4:
            raise ValueError(f"probe line needs four ';'-separated vectors: '{line}'")
        vectors = []
        for chunk in chunks:
            values = np.array([float(v) for v in chunk.split(",")], dtype=float)
            if values.shape != (n,):
                raise ValueError(f"probe vector '{chunk}' does not have {n} components")
            vectors.append(values)
        probes.append(tuple(vectors))
    return probes
