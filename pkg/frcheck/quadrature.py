"""
Monte Carlo quadrature over the tube domain.

Samples come from the heavy-tailed proposal in frcheck.geometry. Every run
follows a doubling schedule N, 2N, 4N, ... over nested prefixes of one
seeded stream; batches run in a thread pool and are reduced in index order,
so results do not depend on the worker count.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Union

import numpy as np

from frcheck.geometry import g_values, sample_tube, truncated_box_mask
from frcheck.kernels import ForelliRudinKernel

logger = logging.getLogger('quadrature')

# Elements per chunk of the nested mixed-norm evaluation
CHUNK_ELEMENTS = 1 << 22

# A doubling jump inside this many combined standard errors is sampling noise
JUMP_SIGMAS = 4.0

Number = Union[float, complex]


def _encode(value):
    if isinstance(value, complex) and not isinstance(value, float):
        return {"re": float(value.real), "im": float(value.imag)}
    return float(value)


def _decode(value):
    if isinstance(value, dict):
        return complex(value["re"], value["im"])
    return float(value)


@dataclass
class McEstimate:
    """
    A Monte Carlo value with its standard error.

    Args:
        value: the estimate (real or complex)
        stderr: standard error; inf when it cannot be estimated
        n_samples: samples behind the estimate
        seed: seed of the stream
        diverged: set when the convergence checks fail
        history: estimates at each step of the doubling schedule
        tail_index: Hill estimate of the tail index of |weighted values|
        inner_samples: inner sample count of a nested estimator
    """
    value: Number
    stderr: float
    n_samples: int
    seed: int
    diverged: bool = False
    history: List[Number] = field(default_factory=list)
    tail_index: Optional[float] = None
    inner_samples: Optional[int] = None

    @classmethod
    def exact(cls, value, seed=0):
        return cls(value=value, stderr=0.0, n_samples=0, seed=seed)

    @property
    def relative_error(self):
        magnitude = abs(self.value)
        return float("inf") if magnitude == 0 else self.stderr / magnitude

    def merge(self, other):
        """Pool two estimates of the same integral from independent streams"""
        total = self.n_samples + other.n_samples
        value = (self.n_samples * self.value + other.n_samples * other.value) / total
        stderr = np.hypot(self.n_samples * self.stderr, other.n_samples * other.stderr) / total
        return McEstimate(
            value=value,
            stderr=float(stderr),
            n_samples=total,
            seed=self.seed,
            diverged=self.diverged or other.diverged,
            tail_index=_min_optional(self.tail_index, other.tail_index),
        )

    def scaled(self, factor):
        return replace(
            self,
            value=self.value * factor,
            stderr=self.stderr * abs(factor),
            history=[h * factor for h in self.history],
        )

    def modulus(self):
        return replace(self, value=abs(self.value), history=[abs(h) for h in self.history])

    def conjugate(self):
        return replace(self, value=np.conj(self.value), history=[np.conj(h) for h in self.history])

    def power(self, exponent):
        """value^exponent with the delta-method error"""
        exponent = float(exponent)
        value = self.value
        if value == 0:
            stderr = self.stderr ** exponent if exponent > 0 else float("inf")
            return replace(self, value=0.0 if exponent > 0 else float("inf"), stderr=stderr, history=[])
        result = value ** exponent
        stderr = abs(exponent) * abs(value) ** (exponent - 1) * self.stderr
        return replace(self, value=result, stderr=float(stderr), history=[h ** exponent for h in self.history])

    def product(self, other):
        """Product of two independent estimates"""
        value = self.value * other.value
        stderr = np.hypot(abs(other.value) * self.stderr, abs(self.value) * other.stderr)
        history = []
        if len(self.history) == len(other.history):
            history = [first * second for first, second in zip(self.history, other.history)]
        return McEstimate(
            value=value,
            stderr=float(stderr),
            n_samples=self.n_samples + other.n_samples,
            seed=self.seed,
            diverged=self.diverged or other.diverged,
            history=history,
            tail_index=_min_optional(self.tail_index, other.tail_index),
            inner_samples=self.inner_samples or other.inner_samples,
        )

    def to_dict(self):
        return {
            "value": _encode(self.value),
            "stderr": float(self.stderr),
            "n_samples": int(self.n_samples),
            "seed": int(self.seed),
            "diverged": bool(self.diverged),
            "history": [_encode(h) for h in self.history],
            "tail_index": None if self.tail_index is None else float(self.tail_index),
            "inner_samples": self.inner_samples,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            value=_decode(data["value"]),
            stderr=float(data["stderr"]),
            n_samples=int(data["n_samples"]),
            seed=int(data["seed"]),
            diverged=bool(data["diverged"]),
            history=[_decode(h) for h in data.get("history", [])],
            tail_index=data.get("tail_index"),
            inner_samples=data.get("inner_samples"),
        )


def _min_optional(a, b):
    values = [v for v in (a, b) if v is not None]
    return min(values) if values else None


def spawn_seeds(seed, count):
    """Independent 64-bit child seeds of a master seed"""
    children = np.random.SeedSequence(int(seed)).spawn(count)
    return [int(child.generate_state(1, dtype=np.uint64)[0]) for child in children]


def hill_tail_index(values, k=None):
    """
    Hill estimate of the tail index of |values| over the top k order statistics.
    Returns inf when the tail is bounded or there are too few nonzero values.
    """
    magnitudes = np.abs(np.asarray(values))
    magnitudes = magnitudes[np.isfinite(magnitudes) & (magnitudes > 0)]
    if k is None:
        k = max(10, int(np.sqrt(len(magnitudes))))
    if len(magnitudes) <= k:
        return float("inf")
    top = np.sort(np.partition(magnitudes, len(magnitudes) - k - 1)[len(magnitudes) - k - 1:])
    mean_log = float(np.mean(np.log(top[1:] / top[0])))
    return float("inf") if mean_log <= 0 else 1.0 / mean_log


def _stderr(stream):
    count = len(stream)
    if count < 2:
        return float("inf")
    if np.iscomplexobj(stream):
        variance = np.var(stream.real, ddof=1) + np.var(stream.imag, ddof=1)
    else:
        variance = np.var(stream, ddof=1)
    return float(np.sqrt(variance / count))


def summarize_stream(stream, checkpoints, seed, config, label="integral", noise=None):
    """
    Estimate from a stream of weighted values, with the divergence checks:
    relative Cauchy differences across the checkpoints, the Hill tail
    index, and finiteness.

    With noise set (an extra error shared by every checkpoint), a jump that
    exceeds the relative tolerance still passes when it lies within
    JUMP_SIGMAS combined standard errors of the earlier checkpoint.
    """
    stream = np.asarray(stream)
    count = len(stream)
    if not np.all(np.isfinite(stream)):
        logger.warning(f"{label}: non-finite weighted values (seed {seed})")
        return McEstimate(
            value=complex(np.nan, np.nan) if np.iscomplexobj(stream) else float("nan"),
            stderr=float("inf"),
            n_samples=count,
            seed=seed,
            diverged=True,
        )

    cumulative = np.cumsum(stream)
    history = [cumulative[m - 1] / m for m in checkpoints]
    history = [complex(h) if np.iscomplexobj(stream) else float(h) for h in history]

    diverged = False
    for reached, previous, current in zip(checkpoints, history, history[1:]):
        jump = abs(current - previous)
        scale = max(abs(previous), abs(current))
        if scale > 0 and jump / scale >= config.cauchy_tolerance:
            if noise is not None and jump <= JUMP_SIGMAS * np.hypot(_stderr(stream[:reached]), noise):
                logger.info(f"{label}: doubling jump {jump:.3g} is within the sampling error (seed {seed})")
                continue
            diverged = True
            logger.warning(
                f"{label}: doubling estimates {previous:.6g} -> {current:.6g} "
                f"exceed relative tolerance {config.cauchy_tolerance} (seed {seed})"
            )
            break

    tail_index = hill_tail_index(stream)
    if config.tail_index_threshold is not None and tail_index < config.tail_index_threshold:
        diverged = True
        logger.warning(f"{label}: tail index {tail_index:.3f} below {config.tail_index_threshold} (seed {seed})")

    return McEstimate(
        value=history[-1],
        stderr=_stderr(stream),
        n_samples=count,
        seed=seed,
        diverged=diverged,
        history=history,
        tail_index=tail_index,
    )


def doubling_checkpoints(config):
    return [config.base_samples * 2 ** k for k in range(config.doublings + 1)]


def run_stream(draw: Callable[[int], np.ndarray], config, label="integral"):
    """
    Run draw(batch_seed) -> weighted values over all batches of the doubling
    schedule and summarise the concatenated stream.
    """
    total = config.total_samples
    n_batches = total // config.batch_size
    seeds = spawn_seeds(config.seed, n_batches)
    logger.info(f"{label}: {total} samples in {n_batches} batches on {config.workers} workers (seed {config.seed})")

    if config.workers == 1:
        batches = [draw(seed) for seed in seeds]
    else:
        with ThreadPoolExecutor(max_workers=config.workers) as executor:
            batches = list(executor.map(draw, seeds))

    stream = np.concatenate(batches)
    return summarize_stream(stream, doubling_checkpoints(config), config.seed, config, label)


def integrate_tube(integrand, n, config, scale=None, box=None, label="integral"):
    """
    Importance-sampled integral of integrand over the tube domain.

    Args:
        integrand: vectorised function of an (N, n) complex array, returning (N,) values
        n: dimension
        config: SamplingConfig
        scale: proposal scale (defaults to config.scale)
        box: keyword arguments of truncated_box_mask to integrate over a
            truncated region instead of the whole domain
        label: name used in log messages
    """
    scale = config.scale if scale is None else scale

    def draw(seed):
        batch = sample_tube(n, scale, config.batch_size, seed)
        Z = batch.z
        values = np.asarray(integrand(Z))
        if box is not None:
            values = values * truncated_box_mask(Z, **box)
        return values * batch.weights

    return run_stream(draw, config, label)


def integrate_pairs(integrand, n, config, scale=None, box=None, label="pair integral"):
    """Joint integral over (z, u) in the product of two tube domains"""
    scale = config.scale if scale is None else scale

    def draw(seed):
        first_seed, second_seed = spawn_seeds(seed, 2)
        first = sample_tube(n, scale, config.batch_size, first_seed)
        second = sample_tube(n, scale, config.batch_size, second_seed)
        Z, U = first.z, second.z
        values = np.asarray(integrand(Z, U))
        if box is not None:
            values = values * truncated_box_mask(Z, **box) * truncated_box_mask(U, **box)
        return values * first.weights * second.weights

    return run_stream(draw, config, label)


@dataclass(frozen=True)
class MixedNormSpec:
    """Selects the (exponent, weight) pairs of the source or target space"""
    spaces: object
    which: str = "source"

    def __post_init__(self):
        if self.which not in ("source", "target"):
            raise ValueError(f"which must be 'source' or 'target', got {self.which!r}")

    @property
    def exponents(self):
        return self.spaces.p if self.which == "source" else self.spaces.q

    @property
    def weights(self):
        return self.spaces.alpha if self.which == "source" else self.spaces.beta


@dataclass(frozen=True)
class SeparableFunction:
    """f(z, w) = first(z) * second(w)"""
    first: Callable
    second: Callable

    def factor(self, index):
        return self.first if index == 1 else self.second

    def __call__(self, Z, W):
        return self.first(Z) * self.second(W)


def single_norm(fn, p, alpha, n, config, scale=None, label="norm"):
    """(int |fn|^p g^alpha dV)^(1/p)"""
    p, alpha = float(p), float(alpha)

    def integrand(Z):
        return np.abs(fn(Z)) ** p * g_values(Z.imag) ** alpha

    return integrate_tube(integrand, n, config, scale=scale, label=label).power(1.0 / p)


def mixed_norm(f, spec, n, config, inner_samples=None, scale=None):
    """
    Nested estimator of the mixed norm of f(z, w).

    The outer variable w runs over the full doubling schedule. One shared inner
    cloud of inner_samples points (config.inner_samples by default) serves
    every outer point; f must broadcast over leading axes. The reported error
    adds the outer sampling error and the (fully correlated) inner error, and
    the doubling check counts that inner error as noise.
    """
    p1, p2 = (float(v) for v in spec.exponents)
    alpha1, alpha2 = (float(v) for v in spec.weights)
    scale = config.scale if scale is None else scale
    n_outer = config.total_samples
    n_inner = inner_samples or config.inner_samples
    outer_seed, inner_seed = spawn_seeds(config.seed, 2)
    outer = sample_tube(n, scale, n_outer, outer_seed)
    inner = sample_tube(n, scale, n_inner, inner_seed)
    logger.info(f"mixed norm: {n_outer} outer x {n_inner} inner samples (seed {config.seed})")

    Z_in = inner.z
    inner_weights = g_values(inner.im) ** alpha1 * inner.weights
    W_out = outer.z
    rows = max(1, CHUNK_ELEMENTS // n_inner)
    starts = list(range(0, n_outer, rows))

    def inner_means(start):
        W = W_out[start:start + rows]
        values = np.abs(f(Z_in[np.newaxis, :, :], W[:, np.newaxis, :])) ** p1 * inner_weights
        return values.mean(axis=1), values.std(axis=1, ddof=1) / np.sqrt(n_inner)

    with ThreadPoolExecutor(max_workers=config.workers) as executor:
        chunks = list(executor.map(inner_means, starts))
    means = np.concatenate([chunk[0] for chunk in chunks])
    errors = np.concatenate([chunk[1] for chunk in chunks])

    ratio = p2 / p1
    outer_weights = g_values(outer.im) ** alpha2 * outer.weights
    stream = means ** ratio * outer_weights
    with np.errstate(divide="ignore", invalid="ignore"):
        sensitivity = np.where(means > 0, ratio * means ** (ratio - 1), 0.0)
    inner_error = float(np.mean(sensitivity * errors * outer_weights))

    estimate = summarize_stream(
        stream, doubling_checkpoints(config), config.seed, config, label="mixed norm", noise=inner_error
    )
    estimate = replace(
        estimate,
        stderr=float(np.hypot(estimate.stderr, inner_error)),
        inner_samples=n_inner,
    )
    return estimate.power(1.0 / p2)


def mixed_norm_separable(g, h, spec, n, config, scale=None):
    """Mixed norm of g(z) h(w) as the product of two single-factor norms"""
    p1, p2 = spec.exponents
    alpha1, alpha2 = spec.weights
    first_seed, second_seed = spawn_seeds(config.seed, 2)
    first = single_norm(g, p1, alpha1, n, config.with_seed(first_seed), scale=scale, label="norm factor 1")
    second = single_norm(h, p2, alpha2, n, config.with_seed(second_seed), scale=scale, label="norm factor 2")
    return first.product(second)


def apply_factor(params, factor, fn, at, config, scale=None):
    """g(Im z)^a int g(Im u)^b fn(u) / Q(z - conj u)^c dV(u) at the point z = at"""
    kernel = ForelliRudinKernel(params, factor)
    z = np.asarray(at.z if hasattr(at, "z") else at, dtype=complex)[np.newaxis, :]

    def integrand(U):
        return kernel.holomorphic(z, U) * fn(U)

    estimate = integrate_tube(integrand, params.n, config, scale=scale, label=f"operator factor {factor}")
    return estimate.scaled(float(kernel.weight(z)[0]))


def apply_operator_T(params, f, at, config, scale=None):
    """
    Tf at the point pair at = (z, w) for a separable f, as the product of the
    two single-factor operator integrals.
    """
    seeds = spawn_seeds(config.seed, 2)
    values = [
        apply_factor(params, factor, f.factor(factor), at[factor - 1], config.with_seed(seeds[factor - 1]), scale)
        for factor in (1, 2)
    ]
    return values[0].product(values[1])
