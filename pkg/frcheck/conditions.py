"""
Exact boundedness conditions for the two-parameter operators.

Each theorem is evaluated clause by clause in rational arithmetic. A theorem
is only asked inside its hypothesis range; outside it a RangeGateError is
raised instead of a false verdict.
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Tuple

from frcheck.errors import RangeGateError
from frcheck.rationals import format_rational, parse_rational

logger = logging.getLogger('conditions')

THEOREM_IDS = ("T1-necessary", "T2-sufficient", "T3i", "T3ii", "T4i", "T4ii", "T5i", "T5ii")

T2_NOTE = (
    "T2-sufficient c-equation evaluated with a_i in the second slot, "
    "matching T1-necessary and the witness construction"
)
T4II_NOTE = (
    "T4ii c2-equation evaluated in the T4i form "
    "c_2 = a_2 + b_2 - alpha_2 + (n+beta_2)/q_2"
)

_warned = set()


def _warn_once(key, message):
    if key not in _warned:
        _warned.add(key)
        logger.warning(message)


@dataclass(frozen=True)
class Clause:
    text: str
    holds: bool
    lhs: Fraction
    rhs: Fraction
    relation: str

    def to_dict(self):
        return {
            "text": self.text,
            "holds": self.holds,
            "lhs": format_rational(self.lhs),
            "rhs": format_rational(self.rhs),
            "relation": self.relation,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            text=data["text"],
            holds=data["holds"],
            lhs=parse_rational(data["lhs"]),
            rhs=parse_rational(data["rhs"]),
            relation=data["relation"],
        )


def _clause(text, lhs, relation, rhs):
    lhs, rhs = Fraction(lhs), Fraction(rhs)
    holds = {"<": lhs < rhs, ">": lhs > rhs, "=": lhs == rhs}[relation]
    return Clause(text=text, holds=holds, lhs=lhs, rhs=rhs, relation=relation)


@dataclass(frozen=True)
class TheoremVerdict:
    theorem: str
    clauses: Tuple[Clause, ...]
    notes: Tuple[str, ...] = field(default_factory=tuple)

    @property
    def holds(self):
        return all(clause.holds for clause in self.clauses)

    @property
    def failed(self) -> List[Clause]:
        return [clause for clause in self.clauses if not clause.holds]

    def to_dict(self):
        return {
            "theorem": self.theorem,
            "holds": self.holds,
            "clauses": [clause.to_dict() for clause in self.clauses],
            "notes": list(self.notes),
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            theorem=data["theorem"],
            clauses=tuple(Clause.from_dict(c) for c in data["clauses"]),
            notes=tuple(data.get("notes", [])),
        )


# Clause builders, one per displayed relation; i is the factor index (1 or 2)

def _a_clause(params, spaces, i):
    q, a, beta = spaces.q[i - 1], params.a[i - 1], spaces.beta[i - 1]
    return _clause(f"-q{i}*a{i} < beta{i} + 1", -q * a, "<", beta + 1)


def _b_clause(params, spaces, i):
    p, b, alpha = spaces.p[i - 1], params.b[i - 1], spaces.alpha[i - 1]
    return _clause(f"alpha{i} + 1 < p{i}*(b{i} + 1)", alpha + 1, "<", p * (b + 1))


def _b_clause_l1(params, spaces, i):
    return _clause(f"alpha{i} < b{i}", spaces.alpha[i - 1], "<", params.b[i - 1])


def _c_equation(params, spaces, i):
    n = params.n
    a, b, c = params.a[i - 1], params.b[i - 1], params.c[i - 1]
    p, q = spaces.p[i - 1], spaces.q[i - 1]
    alpha, beta = spaces.alpha[i - 1], spaces.beta[i - 1]
    return _clause(
        f"c{i} = n + a{i} + b{i} + (n+beta{i})/q{i} - (n+alpha{i})/p{i}",
        c, "=", n + a + b + (n + beta) / q - (n + alpha) / p,
    )


def _c_equation_l1(params, spaces, i):
    n = params.n
    a, b, c = params.a[i - 1], params.b[i - 1], params.c[i - 1]
    q, alpha, beta = spaces.q[i - 1], spaces.alpha[i - 1], spaces.beta[i - 1]
    return _clause(
        f"c{i} = a{i} + b{i} - alpha{i} + (n+beta{i})/q{i}",
        c, "=", a + b - alpha + (n + beta) / q,
    )


def _c_large(params, i):
    return _clause(f"c{i} > 3n/2", params.c[i - 1], ">", Fraction(3 * params.n, 2))


def theorem1_value(params, spaces, factor):
    """The c-value forced by the T1-necessary equation for one factor"""
    return _c_equation(params, spaces, factor).rhs


def theorem_c_value(params, spaces, factor):
    """The c-value forced by the equation of whichever theorem family fits p"""
    if spaces.p[factor - 1] == 1:
        return _c_equation_l1(params, spaces, factor).rhs
    return _c_equation(params, spaces, factor).rhs


# Hypothesis ranges

def _gate_interior(spaces, theorem):
    p_minus, p_plus, q_minus = min(spaces.p), max(spaces.p), min(spaces.q)
    if not (1 < p_minus <= p_plus <= q_minus):
        raise RangeGateError(
            f"{theorem} needs 1 < p_- <= p_+ <= q_- < inf; "
            f"got p = ({format_rational(spaces.p[0])}, {format_rational(spaces.p[1])}), "
            f"q = ({format_rational(spaces.q[0])}, {format_rational(spaces.q[1])})"
        )


def _gate_one_sided(spaces, theorem, l1_factor):
    other = 2 if l1_factor == 1 else 1
    p_l1, p_other, q_minus = spaces.p[l1_factor - 1], spaces.p[other - 1], min(spaces.q)
    if not (p_l1 == 1 and 1 < p_other <= q_minus):
        raise RangeGateError(
            f"{theorem} needs p{l1_factor} = 1 and 1 < p{other} <= q_- < inf; "
            f"got p{l1_factor} = {format_rational(p_l1)}, p{other} = {format_rational(p_other)}, "
            f"q_- = {format_rational(q_minus)}"
        )


def _gate_l1(spaces, theorem):
    if spaces.p != (1, 1):
        raise RangeGateError(
            f"{theorem} needs p = (1, 1); got p = ({format_rational(spaces.p[0])}, {format_rational(spaces.p[1])})"
        )


def _check_part(part):
    if part not in ("i", "ii"):
        raise ValueError(f"part must be 'i' or 'ii', got {part!r}")


# Theorems

def thm1_necessary(params, spaces):
    _gate_interior(spaces, "T1-necessary")
    clauses = []
    for i in (1, 2):
        clauses += [_a_clause(params, spaces, i), _b_clause(params, spaces, i)]
    clauses += [_c_equation(params, spaces, i) for i in (1, 2)]
    return TheoremVerdict(theorem="T1-necessary", clauses=tuple(clauses))


def thm2_sufficient(params, spaces):
    _gate_interior(spaces, "T2-sufficient")
    _warn_once("T2", T2_NOTE)
    clauses = [_c_large(params, i) for i in (1, 2)]
    for i in (1, 2):
        clauses += [_a_clause(params, spaces, i), _b_clause(params, spaces, i)]
    clauses += [_c_equation(params, spaces, i) for i in (1, 2)]
    return TheoremVerdict(theorem="T2-sufficient", clauses=tuple(clauses), notes=(T2_NOTE,))


def thm3_conditions(params, spaces, part):
    """p = (1, p2): first factor L1-type, second factor T1-type"""
    _check_part(part)
    _gate_one_sided(spaces, f"T3{part}", l1_factor=1)
    clauses = [_c_large(params, i) for i in (1, 2)] if part == "ii" else []
    clauses += [
        _a_clause(params, spaces, 1),
        _a_clause(params, spaces, 2),
        _b_clause_l1(params, spaces, 1),
        _c_equation_l1(params, spaces, 1),
        _b_clause(params, spaces, 2),
        _c_equation(params, spaces, 2),
    ]
    return TheoremVerdict(theorem=f"T3{part}", clauses=tuple(clauses))


def thm4_conditions(params, spaces, part):
    """p = (p1, 1): mirror image of T3"""
    _check_part(part)
    _gate_one_sided(spaces, f"T4{part}", l1_factor=2)
    clauses = [_c_large(params, i) for i in (1, 2)] if part == "ii" else []
    clauses += [
        _b_clause(params, spaces, 1),
        _c_equation(params, spaces, 1),
        _a_clause(params, spaces, 1),
        _a_clause(params, spaces, 2),
        _b_clause_l1(params, spaces, 2),
        _c_equation_l1(params, spaces, 2),
    ]
    notes = ()
    if part == "ii":
        _warn_once("T4ii", T4II_NOTE)
        notes = (T4II_NOTE,)
    return TheoremVerdict(theorem=f"T4{part}", clauses=tuple(clauses), notes=notes)


def thm5_conditions(params, spaces, part):
    """p = (1, 1): both factors L1-type"""
    _check_part(part)
    _gate_l1(spaces, f"T5{part}")
    clauses = [_c_large(params, i) for i in (1, 2)] if part == "ii" else []
    for i in (1, 2):
        clauses += [_a_clause(params, spaces, i), _b_clause_l1(params, spaces, i)]
    clauses += [_c_equation_l1(params, spaces, i) for i in (1, 2)]
    return TheoremVerdict(theorem=f"T5{part}", clauses=tuple(clauses))


_DISPATCH = {
    "T1-necessary": thm1_necessary,
    "T2-sufficient": thm2_sufficient,
    "T3i": lambda params, spaces: thm3_conditions(params, spaces, "i"),
    "T3ii": lambda params, spaces: thm3_conditions(params, spaces, "ii"),
    "T4i": lambda params, spaces: thm4_conditions(params, spaces, "i"),
    "T4ii": lambda params, spaces: thm4_conditions(params, spaces, "ii"),
    "T5i": lambda params, spaces: thm5_conditions(params, spaces, "i"),
    "T5ii": lambda params, spaces: thm5_conditions(params, spaces, "ii"),
}


def evaluate_theorem(theorem, params, spaces):
    if theorem not in _DISPATCH:
        raise ValueError(f"unknown theorem '{theorem}'; expected one of {', '.join(THEOREM_IDS)}")
    return _DISPATCH[theorem](params, spaces)


def applicable_theorems(spaces):
    """Theorem ids whose family matches the shape of p (range gates still apply)"""
    p1_is_one, p2_is_one = spaces.p[0] == 1, spaces.p[1] == 1
    if p1_is_one and p2_is_one:
        return ["T5i", "T5ii"]
    if p1_is_one:
        return ["T3i", "T3ii"]
    if p2_is_one:
        return ["T4i", "T4ii"]
    return ["T1-necessary", "T2-sufficient"]


def sufficient_theorem(spaces):
    """The sufficient-condition theorem id for the shape of p"""
    return applicable_theorems(spaces)[1]
