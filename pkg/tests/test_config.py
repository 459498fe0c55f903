from fractions import Fraction

import numpy as np
import pytest

from frcheck.config import (
    DEFAULT_OUTPUT_DIR,
    OUTPUT_DIR_ENV,
    SamplingConfig,
    load_run_config,
    parse_probe_lines,
    resolve_output_dir,
)
from frcheck.errors import ConfigError
from frcheck.rationals import as_fraction, conjugate, format_rational, inverse_conjugate, parse_rational

BASE_CONFIG = """[params]
n = 2
a = 1, 1
b = 1, 1
c = 4, 4

[spaces]
p = 2, 2
q = 2, 2
alpha = 0, 0
beta = 0, 0

[sampling]
seed = 7
base_samples = 4096
batch_size = 1024
"""


@pytest.mark.parametrize("text,expected", [
    ("3", Fraction(3)),
    ("-1/2", Fraction(-1, 2)),
    (" 2/4 ", Fraction(1, 2)),
    ("+5/3", Fraction(5, 3)),
])
def test_parse_rational(text, expected):
    assert parse_rational(text) == expected


@pytest.mark.parametrize("text", ["1.5", "1e3", "a/b", "1/0", ""])
def test_parse_rational_rejects(text):
    with pytest.raises(ValueError):
        parse_rational(text)


def test_floats_are_not_exact_parameters():
    with pytest.raises(TypeError):
        as_fraction(0.5)


def test_format_rational():
    assert format_rational(Fraction(-3, 6)) == "-1/2"
    assert format_rational(2) == "2/1"
    assert format_rational(None) is None


def test_conjugate():
    assert conjugate(2) == 2
    assert conjugate(Fraction(3, 2)) == 3
    assert conjugate(1) is None
    assert inverse_conjugate(1) == 0
    assert inverse_conjugate(4) == Fraction(3, 4)
    with pytest.raises(ValueError):
        conjugate(Fraction(1, 2))


def test_sampling_config_validation():
    with pytest.raises(ValueError):
        SamplingConfig(seed=1, base_samples=1000, batch_size=300)
    with pytest.raises(ValueError):
        SamplingConfig(seed=1, scale=0.0)
    with pytest.raises(ValueError):
        SamplingConfig(seed=1, inner_samples=1)
    config = SamplingConfig(seed=1, base_samples=4096, batch_size=1024, doublings=3)
    assert config.total_samples == 4096 * 8
    assert SamplingConfig.from_dict(config.to_dict()) == config


def test_load_run_config(write_config):
    config = load_run_config(write_config(BASE_CONFIG))
    assert config.sampling.seed == 7
    assert config.seed_recorded
    assert config.rational_pair("params", "c") == (Fraction(4), Fraction(4))
    assert config.integer("params", "n") == 2
    assert config.output_format == "json"


def test_float_literal_reports_position(write_config):
    text = BASE_CONFIG.replace("a = 1, 1", "a = 1.5, 1")
    with pytest.raises(ConfigError) as info:
        load_run_config(write_config(text))
    assert info.value.line == 3
    assert info.value.column == 5
    assert ":3:5:" in str(info.value)


def test_missing_seed_is_drawn_and_flagged():
    text = BASE_CONFIG.replace("seed = 7\n", "")
    config = load_run_config(text=text)
    assert not config.seed_recorded
    assert 0 <= config.sampling.seed < 2 ** 64


def test_unknown_sampling_key():
    with pytest.raises(ConfigError):
        load_run_config(text=BASE_CONFIG + "samples = 10\n")


def test_absent_numerators():
    config = load_run_config(text=BASE_CONFIG + "\n[testfn]\nl = 1, -\ns = 3, 3\n")
    assert config.rational_pair("testfn", "l", allow_absent=True) == (Fraction(1), None)


def test_pairing_section_is_exact():
    config = load_run_config(text=BASE_CONFIG + "\n[pairing]\nl = 1, 1\ns = 7/2, 3\nR = 2\n")
    assert config.rational_pair("pairing", "s") == (Fraction(7, 2), Fraction(3))
    with pytest.raises(ConfigError):
        load_run_config(text=BASE_CONFIG + "\n[pairing]\nl = 1, 1\ns = 3.5, 3\n")


def test_resolve_output_dir(monkeypatch):
    monkeypatch.delenv(OUTPUT_DIR_ENV, raising=False)
    assert resolve_output_dir() == DEFAULT_OUTPUT_DIR
    monkeypatch.setenv(OUTPUT_DIR_ENV, "/tmp/frcheck-env")
    assert resolve_output_dir() == "/tmp/frcheck-env"
    config = load_run_config(text=BASE_CONFIG + "\n[output]\npath = out\n")
    assert resolve_output_dir(config) == "out"
    assert resolve_output_dir(config, "cli") == "cli"


def test_parse_probe_lines():
    probes = parse_probe_lines("0, 0 ; 0, 1 ; 1, 0 ; 0, 3\n", 2)
    assert len(probes) == 1
    np.testing.assert_array_equal(probes[0][3], [0.0, 3.0])
    with pytest.raises(ValueError):
        parse_probe_lines("0, 0 ; 0, 1", 2)
