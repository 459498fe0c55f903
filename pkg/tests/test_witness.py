import json
from dataclasses import replace
from fractions import Fraction

import numpy as np
import pytest

from frcheck.errors import RangeGateError
from frcheck.geometry import TRUNCATED_BOX_VOLUME
from frcheck.kernels import FRParams, SpaceSpec
from frcheck.witness import (
    Infeasible,
    SchurReport,
    SchurSide,
    SchurWitness,
    schur_lhs_check,
    schur_probe_check,
    source_side_integral,
    variant_for,
    witness_from_dict,
    witness_solve,
)

F = Fraction

PROBES = [
    (np.array([0j, 1j]), np.array([0j, 1j])),
    (np.array([0j, 2j]), np.array([0j, 2j])),
    (np.array([1 + 0j, 1j]), np.array([0j, 1j])),
]


def _spaces(p, q=(2, 2), alpha=(0, 0), beta=(0, 0)):
    return SpaceSpec(p=p, q=q, alpha=alpha, beta=beta)


def test_worked_example(worked_params, worked_spaces):
    witness = witness_solve(worked_params, worked_spaces)
    assert witness.variant == "L22"
    assert witness.tau == (2, 2)
    assert witness.r == (F(-1, 4), F(-1, 4))
    assert witness.s == (F(-1, 4), F(-1, 4))
    assert witness.gamma == (F(1, 2), F(1, 2))
    assert witness.delta == (F(1, 2), F(1, 2))
    assert witness.failed_identities(worked_params, worked_spaces) == []


def test_l1_example_both_factors():
    params = FRParams(n=2, a=(2, 2), b=(1, 1), c=(4, 4))
    spaces = _spaces(p=(1, 1))
    witness = witness_solve(params, spaces)
    assert witness.variant == "L23"
    assert witness.tau == (1, 1)
    assert witness.s == (F(1, 8), F(1, 8))
    assert witness.gamma == (F(3, 8), F(3, 8))
    assert witness.delta == (F(5, 8), F(5, 8))
    assert witness.r == (F(-1, 4), F(-1, 4))
    assert witness.l1_factor(1) and witness.l1_factor(2)


@pytest.mark.parametrize("p,a,variant,l1_index", [
    ((1, 2), (2, 1), "L25", 0),
    ((2, 1), (1, 2), "L24", 1),
])
def test_one_sided_examples(p, a, variant, l1_index):
    params = FRParams(n=2, a=a, b=(1, 1), c=(4, 4))
    spaces = _spaces(p=p)
    witness = witness_solve(params, spaces)
    assert witness.variant == variant
    other = 1 - l1_index
    assert witness.gamma[l1_index] == F(3, 8)
    assert witness.s[l1_index] == F(1, 8)
    assert witness.gamma[other] == F(1, 2)
    assert witness.s[other] == F(-1, 4)
    assert witness.failed_identities(params, spaces) == []


def test_boundary_b_is_infeasible():
    params = FRParams(n=2, a=(1, 1), b=(F(-1, 2), 1), c=(F(5, 2), 4))
    result = witness_solve(params, _spaces(p=(2, 2)))
    assert isinstance(result, Infeasible)
    assert result.factor == 1
    assert result.interval == (F(-1, 4), F(-1, 4))
    assert "empty" in result.reason


def test_failed_sufficient_conditions_are_infeasible():
    # c = (2, 2) solves the c-equation for a = b = 0 but misses c > 3n/2
    params = FRParams(n=2, a=(0, 0), b=(0, 0), c=(2, 2))
    result = witness_solve(params, _spaces(p=(2, 2)))
    assert isinstance(result, Infeasible)
    assert "c1 > 3n/2" in result.failed


def test_variant_must_match_p(worked_params, worked_spaces):
    with pytest.raises(RangeGateError):
        witness_solve(worked_params, worked_spaces, "L23")
    with pytest.raises(ValueError):
        witness_solve(worked_params, worked_spaces, "L99")
    assert variant_for(_spaces(p=(1, 3), q=(3, 3))) == "L25"


def test_range_gate_propagates(worked_params):
    with pytest.raises(RangeGateError):
        witness_solve(worked_params, _spaces(p=(3, 3), q=(2, 2)))


def test_witness_round_trip(worked_params, worked_spaces):
    witness = witness_solve(worked_params, worked_spaces)
    data = json.loads(json.dumps(witness.to_dict()))
    assert data["gamma"] == ["1/2", "1/2"]
    assert witness_from_dict(data) == witness
    infeasible = Infeasible(variant="L22", reason="empty", factor=1, interval=(F(-1, 4), F(-1, 4)))
    assert witness_from_dict(json.loads(json.dumps(infeasible.to_dict()))) == infeasible


def _random_spaces(rng):
    p = tuple(F(int(rng.integers(5, 13)), 4) for _ in range(2))
    q = tuple(max(p) + F(int(rng.integers(0, 9)), 4) for _ in range(2))
    alpha = tuple(F(int(rng.integers(-3, 9)), 4) for _ in range(2))
    beta = tuple(F(int(rng.integers(-3, 9)), 4) for _ in range(2))
    return SpaceSpec(p=p, q=q, alpha=alpha, beta=beta)


def _c_value(n, a, b, p, q, alpha, beta):
    return n + a + b + (n + beta) / q - (n + alpha) / p


def _sufficient_case(rng):
    while True:
        n = int(rng.integers(2, 5))
        spaces = _random_spaces(rng)
        a, b, c = [], [], []
        for i in range(2):
            p, q, alpha, beta = spaces.p[i], spaces.q[i], spaces.alpha[i], spaces.beta[i]
            a_low = -(beta + 1) / q
            b_low = (alpha + 1) / p - 1
            a.append(a_low + F(int(rng.integers(1, 17)), 4))
            b.append(b_low + F(int(rng.integers(1, 17)), 4))
            c.append(_c_value(n, a[i], b[i], p, q, alpha, beta))
        if min(c) > F(3 * n, 2):
            return FRParams(n=n, a=tuple(a), b=tuple(b), c=tuple(c)), spaces


def test_sufficient_corpus_always_has_a_witness():
    rng = np.random.default_rng(1729)
    for _ in range(100):
        params, spaces = _sufficient_case(rng)
        witness = witness_solve(params, spaces)
        assert isinstance(witness, SchurWitness), witness
        assert witness.failed_identities(params, spaces) == []


def test_boundary_corpus_is_infeasible():
    rng = np.random.default_rng(4104)
    for _ in range(100):
        params, spaces = _sufficient_case(rng)
        p, alpha = spaces.p[0], spaces.alpha[0]
        b1 = (alpha + 1) / p - 1
        b = (b1, params.b[1])
        c1 = _c_value(params.n, params.a[0], b1, p, spaces.q[0], alpha, spaces.beta[0])
        boundary = FRParams(n=params.n, a=params.a, b=b, c=(c1, params.c[1]))
        result = witness_solve(boundary, spaces)
        assert isinstance(result, Infeasible)
        assert result.factor == 1


def test_box_integral_matches_grid_volume(sampling):
    # Every exponent zero: the p-side integrand is the indicator of the box
    params = FRParams(n=2, a=(0, 0), b=(0, 0), c=(0, 0))
    witness = SchurWitness(
        r=(0, 0), s=(0, 0), gamma=(0, 0), delta=(1, 1), tau=(1, 1), variant="L22"
    )
    estimate = source_side_integral(
        witness, params, _spaces(p=(2, 2)), 1, PROBES[0][0], 2, sampling, box={}
    )
    assert not estimate.diverged
    assert abs(estimate.value - TRUNCATED_BOX_VOLUME) < 4 * estimate.stderr


def test_probe_check_needs_two_probes(worked_params, worked_spaces, quick_sampling):
    witness = witness_solve(worked_params, worked_spaces)
    with pytest.raises(ValueError):
        schur_probe_check(witness, worked_params, worked_spaces, PROBES[:1], SchurSide.P_SIDE, quick_sampling)


def test_schur_check_reports_positive_ratio(worked_params, worked_spaces, quick_sampling):
    witness = witness_solve(worked_params, worked_spaces)
    lenient = replace(quick_sampling, cauchy_tolerance=10.0, tail_index_threshold=None)
    check = schur_lhs_check(witness, worked_params, worked_spaces, PROBES[0], "q-side", lenient)
    assert check.side is SchurSide.Q_SIDE
    assert check.rhs == pytest.approx(1.0)
    assert check.ratio.value > 0
    assert not check.uses_sup


@pytest.mark.slow
@pytest.mark.parametrize("side", [SchurSide.P_SIDE, SchurSide.Q_SIDE])
def test_worked_example_is_stable_across_probes(worked_params, worked_spaces, sampling, side):
    witness = witness_solve(worked_params, worked_spaces)
    report = schur_probe_check(witness, worked_params, worked_spaces, PROBES, side, sampling)
    assert report.stable, report.offending
    assert SchurReport.from_dict(json.loads(json.dumps(report.to_dict()))).stable


@pytest.mark.slow
def test_l1_supremum_is_stable_across_probes(sampling):
    params = FRParams(n=2, a=(2, 2), b=(1, 1), c=(4, 4))
    spaces = _spaces(p=(1, 1))
    witness = witness_solve(params, spaces)
    report = schur_probe_check(witness, params, spaces, PROBES, SchurSide.P_SIDE, sampling)
    assert all(check.uses_sup for check in report.checks)
    assert report.stable, report.offending
