import json
import os
from fractions import Fraction

import numpy as np
import pytest

from frcheck.conditions import (
    T2_NOTE,
    T4II_NOTE,
    TheoremVerdict,
    applicable_theorems,
    evaluate_theorem,
    sufficient_theorem,
    thm1_necessary,
    thm2_sufficient,
    thm3_conditions,
    thm4_conditions,
    thm5_conditions,
)
from frcheck.errors import RangeGateError
from frcheck.kernels import FRParams, SpaceSpec, adjoint_params

DATA_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "data")

P_SHAPES = {
    "T1-necessary": (2, 2),
    "T2-sufficient": (2, 2),
    "T3i": (1, 2),
    "T3ii": (1, 2),
    "T4i": (2, 1),
    "T4ii": (2, 1),
    "T5i": (1, 1),
    "T5ii": (1, 1),
}


def _spaces(p=(2, 2), q=(2, 2), alpha=(0, 0), beta=(0, 0)):
    return SpaceSpec(p=p, q=q, alpha=alpha, beta=beta)


def _texts(verdict):
    return [clause.text for clause in verdict.clauses]


def _failed(verdict):
    return [clause.text for clause in verdict.failed]


def test_clause_lists_match_golden_file():
    with open(os.path.join(DATA_DIR, "theorem_clauses.json")) as f:
        golden = json.load(f)
    params = FRParams(n=2, a=(1, 1), b=(1, 1), c=(4, 4))
    for theorem, p in P_SHAPES.items():
        verdict = evaluate_theorem(theorem, params, _spaces(p=p))
        assert _texts(verdict) == golden[theorem], theorem


def test_theorem1_holds():
    params = FRParams(n=2, a=(0, 0), b=(0, 0), c=(2, 2))
    verdict = thm1_necessary(params, _spaces())
    assert verdict.holds
    assert len(verdict.clauses) == 6


def test_theorem1_a_clause_boundary():
    params = FRParams(n=2, a=(Fraction(-1, 2), 0), b=(0, 0), c=(2, 2))
    verdict = thm1_necessary(params, _spaces())
    assert not verdict.holds
    assert "-q1*a1 < beta1 + 1" in _failed(verdict)


def test_theorem1_perturbed_c():
    params = FRParams(n=2, a=(0, 0), b=(0, 0), c=(2, Fraction(5, 2)))
    verdict = thm1_necessary(params, _spaces())
    assert _failed(verdict) == ["c2 = n + a2 + b2 + (n+beta2)/q2 - (n+alpha2)/p2"]


def test_theorem1_range_gate():
    params = FRParams(n=2, a=(0, 0), b=(0, 0), c=(2, 2))
    with pytest.raises(RangeGateError):
        thm1_necessary(params, _spaces(q=(1, 1)))
    with pytest.raises(RangeGateError):
        thm1_necessary(params, _spaces(p=(3, 2), q=(2, 4)))


def test_theorem2(worked_params, worked_spaces):
    verdict = thm2_sufficient(worked_params, worked_spaces)
    assert verdict.holds
    assert T2_NOTE in verdict.notes
    assert thm1_necessary(worked_params, worked_spaces).holds


def test_theorem2_needs_large_c():
    params = FRParams(n=2, a=(0, 0), b=(0, 0), c=(2, 2))
    verdict = thm2_sufficient(params, _spaces())
    assert _failed(verdict) == ["c1 > 3n/2", "c2 > 3n/2"]


def test_theorem3():
    params = FRParams(n=2, a=(1, 1), b=(1, 1), c=(3, 4))
    spaces = _spaces(p=(1, 2))
    assert thm3_conditions(params, spaces, "i").holds
    part_ii = thm3_conditions(params, spaces, "ii")
    assert _failed(part_ii) == ["c1 > 3n/2"]


def test_theorem3_alpha_equals_b():
    params = FRParams(n=2, a=(1, 1), b=(1, 1), c=(3, 4))
    verdict = thm3_conditions(params, _spaces(p=(1, 2), alpha=(1, 0)), "i")
    assert "alpha1 < b1" in _failed(verdict)


def test_theorem3_gate():
    params = FRParams(n=2, a=(1, 1), b=(1, 1), c=(3, 4))
    with pytest.raises(RangeGateError):
        thm3_conditions(params, _spaces(p=(2, 2)), "i")
    with pytest.raises(ValueError):
        thm3_conditions(params, _spaces(p=(1, 2)), "iii")


def test_theorem4_mirrors_theorem3():
    params = FRParams(n=2, a=(1, 1), b=(1, 1), c=(4, 3))
    spaces = _spaces(p=(2, 1))
    assert thm4_conditions(params, spaces, "i").holds
    part_ii = thm4_conditions(params, spaces, "ii")
    assert _failed(part_ii) == ["c2 > 3n/2"]
    assert T4II_NOTE in part_ii.notes
    mirrored = thm4_conditions(params, _spaces(p=(2, 1), alpha=(0, 1)), "i")
    assert "alpha2 < b2" in _failed(mirrored)


def test_theorem5():
    params = FRParams(n=2, a=(2, 2), b=(1, 1), c=(4, 4))
    spaces = _spaces(p=(1, 1))
    assert thm5_conditions(params, spaces, "i").holds
    assert thm5_conditions(params, spaces, "ii").holds


def test_theorem5_failures():
    spaces = _spaces(p=(1, 1))
    params = FRParams(n=2, a=(-1, 2), b=(1, 1), c=(2, 4))
    assert "-q1*a1 < beta1 + 1" in _failed(thm5_conditions(params, spaces, "i"))
    params = FRParams(n=2, a=(2, 2), b=(0, 1), c=(3, 4))
    assert "alpha1 < b1" in _failed(thm5_conditions(params, spaces, "i"))


def test_verdicts_ignore_rational_representation():
    first = FRParams(n=2, a=("1/2", 1), b=(1, 1), c=("7/2", 4))
    second = FRParams(n=2, a=("2/4", "3/3"), b=("4/4", 1), c=("14/4", "8/2"))
    assert thm1_necessary(first, _spaces()).to_dict() == thm1_necessary(second, _spaces()).to_dict()


def test_verdict_round_trip(worked_params, worked_spaces):
    verdict = thm2_sufficient(worked_params, worked_spaces)
    data = json.loads(json.dumps(verdict.to_dict()))
    assert TheoremVerdict.from_dict(data) == verdict
    assert data["clauses"][0]["lhs"] == "4/1"


def test_applicable_theorems():
    assert applicable_theorems(_spaces(p=(2, 3), q=(3, 3))) == ["T1-necessary", "T2-sufficient"]
    assert applicable_theorems(_spaces(p=(1, 2))) == ["T3i", "T3ii"]
    assert applicable_theorems(_spaces(p=(2, 1))) == ["T4i", "T4ii"]
    assert sufficient_theorem(_spaces(p=(1, 1))) == "T5ii"
    with pytest.raises(ValueError):
        evaluate_theorem("T6", FRParams(n=2, a=(0, 0), b=(0, 0), c=(2, 2)), _spaces())


def _random_rational(rng, low, high, denominator=4):
    return Fraction(int(rng.integers(low * denominator, high * denominator + 1)), denominator)


def _random_case(rng):
    n = int(rng.integers(2, 5))
    p = tuple(Fraction(int(rng.integers(5, 13)), 4) for _ in range(2))
    q = tuple(max(p) + Fraction(int(rng.integers(0, 9)), 4) for _ in range(2))
    alpha = tuple(_random_rational(rng, 0, 2) - Fraction(1, 2) for _ in range(2))
    beta = tuple(_random_rational(rng, 0, 2) - Fraction(1, 2) for _ in range(2))
    spaces = SpaceSpec(p=p, q=q, alpha=alpha, beta=beta)
    a = tuple(_random_rational(rng, -1, 3) for _ in range(2))
    b = tuple(_random_rational(rng, -1, 3) for _ in range(2))
    # Half of the cases sit exactly on the c-equation
    if rng.random() < 0.5:
        c = tuple(n + a[i] + b[i] + (n + beta[i]) / q[i] - (n + alpha[i]) / p[i] for i in range(2))
    else:
        c = tuple(_random_rational(rng, 0, 8) for _ in range(2))
    return FRParams(n=n, a=a, b=b, c=c), spaces


def test_sufficient_set_inside_necessary_set():
    rng = np.random.default_rng(20240601)
    sufficient = 0
    for _ in range(10000):
        params, spaces = _random_case(rng)
        if thm2_sufficient(params, spaces).holds:
            sufficient += 1
            assert thm1_necessary(params, spaces).holds
    assert sufficient > 0


def test_b_clause_matches_adjoint_form():
    rng = np.random.default_rng(7)
    for _ in range(2000):
        params, spaces = _random_case(rng)
        adjoint = adjoint_params(params, spaces)
        for i in range(2):
            p_conj = spaces.p_conj[i]
            direct = spaces.alpha[i] + 1 < spaces.p[i] * (params.b[i] + 1)
            via_adjoint = -p_conj * adjoint.params.a[i] < spaces.alpha[i] + 1
            assert direct == via_adjoint


def _direct_clauses(params, spaces):
    """T1 clauses evaluated straight from the inequalities, in golden-file order"""
    n = params.n
    a, b, c = params.a, params.b, params.c
    p, q, alpha, beta = spaces.p, spaces.q, spaces.alpha, spaces.beta
    holds = []
    for i in range(2):
        holds.append(-q[i] * a[i] < beta[i] + 1)
        holds.append(alpha[i] + 1 < p[i] * (b[i] + 1))
    for i in range(2):
        holds.append(c[i] == n + a[i] + b[i] + (n + beta[i]) / q[i] - (n + alpha[i]) / p[i])
    return holds


@pytest.mark.parametrize("case", range(40))
def test_verdicts_match_direct_evaluation(case):
    params, spaces = _random_case(np.random.default_rng(9000 + case))
    expected = _direct_clauses(params, spaces)
    necessary = thm1_necessary(params, spaces)
    assert [clause.holds for clause in necessary.clauses] == expected
    large_c = [params.c[i] > Fraction(3 * params.n, 2) for i in range(2)]
    sufficient = thm2_sufficient(params, spaces)
    assert [clause.holds for clause in sufficient.clauses] == large_c + expected
    assert sufficient.holds == (all(large_c) and all(expected))
