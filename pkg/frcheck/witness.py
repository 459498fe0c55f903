"""
Schur-test witnesses for the sufficient boundedness conditions.

witness_solve picks the auxiliary exponents (r, s, gamma, delta, tau) in
exact arithmetic; schur_lhs_check and schur_probe_check estimate both sides
of the Schur inequalities at probe points by Monte Carlo.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction
from itertools import combinations
from typing import List, Optional, Tuple

import numpy as np

from frcheck.conditions import evaluate_theorem
from frcheck.errors import DivergenceSuspected, RangeGateError
from frcheck.geometry import TubePoint, g_values, q_values, sample_tube
from frcheck.quadrature import McEstimate, integrate_tube, spawn_seeds
from frcheck.rationals import conjugate, format_pair, format_rational, parse_pair

logger = logging.getLogger('witness')

WITNESS_VARIANTS = ("L22", "L23", "L24", "L25")

# Which factors are L1-type (p_i = 1) for each variant
_L1_FACTORS = {
    "L22": (False, False),
    "L23": (True, True),
    "L24": (False, True),
    "L25": (True, False),
}

# Sufficient verdict that must hold before a witness is returned
_GATE = {
    "L22": "T2-sufficient",
    "L23": "T5ii",
    "L24": "T4ii",
    "L25": "T3ii",
}

# Relative slack on M when one side is a sample-cloud supremum
SUP_TOLERANCE = 0.1


def variant_for(spaces):
    """Witness variant matching the shape of p"""
    shape = (spaces.p[0] == 1, spaces.p[1] == 1)
    for variant, l1 in _L1_FACTORS.items():
        if l1 == shape:
            return variant


@dataclass(frozen=True)
class Infeasible:
    """
    No witness exists for the given data.

    Args:
        variant: requested witness variant
        reason: human-readable cause
        factor: factor whose s-interval is empty, if any
        interval: the (lower, upper) endpoints of the empty s-interval
        failed: clause texts of the sufficient verdict that do not hold
    """
    variant: str
    reason: str
    factor: Optional[int] = None
    interval: Optional[Tuple[Fraction, Fraction]] = None
    failed: Tuple[str, ...] = field(default_factory=tuple)

    def to_dict(self):
        return {
            "feasible": False,
            "variant": self.variant,
            "reason": self.reason,
            "factor": self.factor,
            "interval": None if self.interval is None else format_pair(self.interval),
            "failed": list(self.failed),
        }

    @classmethod
    def from_dict(cls, data):
        interval = data.get("interval")
        return cls(
            variant=data["variant"],
            reason=data["reason"],
            factor=data.get("factor"),
            interval=None if interval is None else parse_pair(interval),
            failed=tuple(data.get("failed", [])),
        )


def witness_from_dict(data):
    """SchurWitness or Infeasible, whichever the payload describes"""
    if data.get("feasible", True):
        return SchurWitness.from_dict(data)
    return Infeasible.from_dict(data)


@dataclass(frozen=True)
class SchurWitness:
    """
    Auxiliary exponents of the Schur test, one entry per factor.

    h1(u, eta) = g(Im u)^s1 g(Im eta)^s2 and h2(z, w) = g(Im z)^r1 g(Im w)^r2.
    """
    r: Tuple[Fraction, Fraction]
    s: Tuple[Fraction, Fraction]
    gamma: Tuple[Fraction, Fraction]
    delta: Tuple[Fraction, Fraction]
    tau: Tuple[Fraction, Fraction]
    variant: str

    def __post_init__(self):
        if self.variant not in WITNESS_VARIANTS:
            raise ValueError(f"unknown witness variant '{self.variant}'")

    def l1_factor(self, factor):
        return _L1_FACTORS[self.variant][factor - 1]

    def h1(self, U, H):
        U, H = np.asarray(U, dtype=complex), np.asarray(H, dtype=complex)
        return g_values(U.imag) ** float(self.s[0]) * g_values(H.imag) ** float(self.s[1])

    def h2(self, Z, W):
        Z, W = np.asarray(Z, dtype=complex), np.asarray(W, dtype=complex)
        return g_values(Z.imag) ** float(self.r[0]) * g_values(W.imag) ** float(self.r[1])

    def identities(self, params, spaces) -> List[Tuple[str, bool]]:
        """Every exact identity and inequality the witness must satisfy"""
        checks = []
        n = params.n
        for i in (1, 2):
            k = i - 1
            a, b, c = params.a[k], params.b[k], params.c[k]
            p, q = spaces.p[k], spaces.q[k]
            alpha, beta = spaces.alpha[k], spaces.beta[k]
            r, s, gamma, delta, tau = self.r[k], self.s[k], self.gamma[k], self.delta[k], self.tau[k]
            inv_pc = 1 - 1 / p

            checks += [
                (f"gamma{i} + delta{i} = 1", gamma + delta == 1),
                (f"-(1+beta{i})/q{i} < r{i} < 0", -(1 + beta) / q < r < 0),
                (f"tau{i} > 0", tau > 0),
                (f"tau{i} = c{i} - a{i} - b{i} + alpha{i}", tau == c - a - b + alpha),
                (f"tau{i} = (n+alpha{i})/p{i}' + (n+beta{i})/q{i}", tau == (n + alpha) * inv_pc + (n + beta) / q),
                (f"gamma{i}*tau{i} + r{i} - s{i} = (n+alpha{i})/p{i}'", gamma * tau + r - s == (n + alpha) * inv_pc),
                (f"delta{i}*tau{i} + s{i} - r{i} = (n+beta{i})/q{i}", delta * tau + s - r == (n + beta) / q),
            ]
            if p > 1:
                pc = conjugate(p)
                checks += [
                    (
                        f"(b{i}-alpha{i})*gamma{i}*p{i}' + s{i}*p{i}' + alpha{i} > -1",
                        (b - alpha) * gamma * pc + s * pc + alpha > -1,
                    ),
                    (
                        f"n + (a{i}+b{i}-alpha{i})*gamma{i}*p{i}' + s{i}*p{i}' + alpha{i} - c{i}*gamma{i}*p{i}' = r{i}*p{i}'",
                        n + (a + b - alpha) * gamma * pc + s * pc + alpha - c * gamma * pc == r * pc,
                    ),
                ]
            else:
                checks += [
                    (f"(b{i}-alpha{i})*gamma{i} + s{i} > 0", (b - alpha) * gamma + s > 0),
                    (
                        f"(a{i}+b{i}-alpha{i}-c{i})*gamma{i} + s{i} = r{i}",
                        (a + b - alpha - c) * gamma + s == r,
                    ),
                ]
            checks += [
                (f"r{i}*q{i} + beta{i} > -1", r * q + beta > -1),
                (
                    f"n + r{i}*q{i} + beta{i} - c{i}*delta{i}*q{i} = s{i}*q{i} - (a{i}+b{i}-alpha{i})*delta{i}*q{i}",
                    n + r * q + beta - c * delta * q == s * q - (a + b - alpha) * delta * q,
                ),
                (f"s{i} < (b{i}-alpha{i})*delta{i}", s < (b - alpha) * delta),
            ]
        return checks

    def failed_identities(self, params, spaces):
        return [name for name, holds in self.identities(params, spaces) if not holds]

    def to_dict(self):
        return {
            "feasible": True,
            "variant": self.variant,
            "r": format_pair(self.r),
            "s": format_pair(self.s),
            "gamma": format_pair(self.gamma),
            "delta": format_pair(self.delta),
            "tau": format_pair(self.tau),
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            r=parse_pair(data["r"]),
            s=parse_pair(data["s"]),
            gamma=parse_pair(data["gamma"]),
            delta=parse_pair(data["delta"]),
            tau=parse_pair(data["tau"]),
            variant=data["variant"],
        )


def _solve_factor(params, spaces, factor):
    """
    Exponents of one factor, or the empty interval (lower, upper) as a tuple.

    Solves -tau(1+alpha)/p' - k(n+alpha)/p' < tau*s + k(s - r) < k(n+beta)/q
    with k = b - alpha, r the midpoint of (-(1+beta)/q, 0).
    """
    i = factor - 1
    n = params.n
    a, b, c = params.a[i], params.b[i], params.c[i]
    p, q = spaces.p[i], spaces.q[i]
    alpha, beta = spaces.alpha[i], spaces.beta[i]

    inv_pc = 1 - 1 / p
    tau = c - a - b + alpha
    k = b - alpha
    r = -(1 + beta) / (2 * q)
    lower = -tau * (1 + alpha) * inv_pc - k * (n + alpha) * inv_pc
    upper = k * (n + beta) / q

    if tau <= 0:
        return None, f"tau{factor} = {format_rational(tau)} is not positive", None
    if tau + k <= 0:
        return None, f"tau{factor} + b{factor} - alpha{factor} = {format_rational(tau + k)} is not positive", None

    s_low = (lower + k * r) / (tau + k)
    s_high = (upper + k * r) / (tau + k)
    if lower >= upper:
        return None, (
            f"s{factor}-interval ({format_rational(s_low)}, {format_rational(s_high)}) is empty"
        ), (s_low, s_high)

    s = (s_low + s_high) / 2
    gamma = ((n + alpha) * inv_pc + s - r) / tau
    delta = ((n + beta) / q + r - s) / tau
    return (r, s, gamma, delta, tau), None, (s_low, s_high)


def witness_solve(params, spaces, variant=None):
    """
    Construct the Schur witness for the sufficient theorem matching p.

    Args:
        params: operator exponents
        spaces: mixed-norm data
        variant: L22, L23, L24 or L25; defaults to the variant matching p

    Returns:
        SchurWitness, or Infeasible when an s-interval is empty or the
        sufficient conditions fail

    Raises:
        RangeGateError: the variant does not match p, or the exponents fall
            outside the theorem's hypothesis range
    """
    expected = variant_for(spaces)
    variant = variant or expected
    if variant not in WITNESS_VARIANTS:
        raise ValueError(f"unknown witness variant '{variant}'")
    if variant != expected:
        raise RangeGateError(f"variant {variant} does not fit p = {format_pair(spaces.p)}; expected {expected}")

    verdict = evaluate_theorem(_GATE[variant], params, spaces)

    solved = []
    for factor in (1, 2):
        values, reason, interval = _solve_factor(params, spaces, factor)
        if values is None:
            logger.info(f"{variant}: {reason}")
            return Infeasible(variant=variant, reason=reason, factor=factor, interval=interval,
                              failed=tuple(c.text for c in verdict.failed))
        solved.append(values)

    if not verdict.holds:
        failed = tuple(clause.text for clause in verdict.failed)
        return Infeasible(variant=variant, reason=f"{verdict.theorem} does not hold: {'; '.join(failed)}",
                          failed=failed)

    r, s, gamma, delta, tau = (tuple(values[j] for values in solved) for j in range(5))
    witness = SchurWitness(r=r, s=s, gamma=gamma, delta=delta, tau=tau, variant=variant)
    broken = witness.failed_identities(params, spaces)
    if broken:
        # Only reachable through an inconsistency between the chain and the verdict
        logger.error(f"{variant}: witness identities fail: {broken}")
        return Infeasible(variant=variant, reason=f"witness identities fail: {'; '.join(broken)}",
                          failed=tuple(broken))
    logger.info(f"{variant}: witness r = {format_pair(r)}, s = {format_pair(s)}")
    return witness


class SchurSide(Enum):
    """p-side: integrals (or suprema) over the source variables; q-side: over the target variables"""
    P_SIDE = "p-side"
    Q_SIDE = "q-side"


@dataclass
class SchurCheck:
    """
    Both sides of one Schur inequality at one probe.

    Args:
        side: which inequality
        probe: the probe pair as complex vectors
        lhs: Monte Carlo estimate of the left side
        rhs: h(probe) raised to the inequality's exponent
        uses_sup: True when a factor is a sample-cloud supremum
    """
    side: SchurSide
    probe: Tuple[np.ndarray, np.ndarray]
    lhs: McEstimate
    rhs: float
    uses_sup: bool = False

    @property
    def ratio(self):
        """Empirical M at this probe"""
        return self.lhs.scaled(1.0 / self.rhs)

    def to_dict(self):
        return {
            "side": self.side.value,
            "probe": [[{"re": float(v.real), "im": float(v.imag)} for v in point] for point in self.probe],
            "lhs": self.lhs.to_dict(),
            "rhs": float(self.rhs),
            "ratio": self.ratio.to_dict(),
            "uses_sup": self.uses_sup,
        }

    @classmethod
    def from_dict(cls, data):
        probe = tuple(np.array([complex(v["re"], v["im"]) for v in point]) for point in data["probe"])
        return cls(
            side=SchurSide(data["side"]),
            probe=probe,
            lhs=McEstimate.from_dict(data["lhs"]),
            rhs=float(data["rhs"]),
            uses_sup=bool(data["uses_sup"]),
        )


def _schur_kernel(params, spaces, factor, Z, U):
    """g(Im z)^a g(Im u)^(b - alpha) / |Q(z - conj u)|^c"""
    i = factor - 1
    a, b, c = float(params.a[i]), float(params.b[i]), float(params.c[i])
    alpha = float(spaces.alpha[i])
    Z, U = np.asarray(Z, dtype=complex), np.asarray(U, dtype=complex)
    return (
        g_values(Z.imag) ** a
        * g_values(U.imag) ** (b - alpha)
        * np.abs(q_values(Z - np.conj(U))) ** (-c)
    )


def _as_vector(point):
    if isinstance(point, TubePoint):
        return point.z
    return np.asarray(point, dtype=complex)


def source_side_integral(witness, params, spaces, factor, at, exponent, config, box=None):
    """int K(z, u)^(gamma e) g(Im u)^(s e + alpha) dV(u) at z = at"""
    i = factor - 1
    gamma, s, alpha = float(witness.gamma[i]), float(witness.s[i]), float(spaces.alpha[i])
    exponent = float(exponent)
    z = _as_vector(at)[np.newaxis, :]

    def integrand(U):
        return (
            _schur_kernel(params, spaces, factor, z, U) ** (gamma * exponent)
            * g_values(U.imag) ** (s * exponent + alpha)
        )

    return integrate_tube(integrand, params.n, config, box=box, label=f"p-side factor {factor}")


def source_side_sup(witness, params, spaces, factor, at, config):
    """Largest K(z, u)^gamma g(Im u)^s over a sample cloud, z = at"""
    i = factor - 1
    gamma, s = float(witness.gamma[i]), float(witness.s[i])
    z = _as_vector(at)[np.newaxis, :]
    cloud = sample_tube(params.n, config.scale, config.base_samples, config.seed)
    values = _schur_kernel(params, spaces, factor, z, cloud.z) ** gamma * g_values(cloud.im) ** s
    return McEstimate(value=float(np.max(values)), stderr=0.0, n_samples=len(cloud), seed=config.seed)


def target_side_integral(witness, params, spaces, factor, at, config, box=None):
    """int K(z, u)^(delta q) g(Im z)^(r q + beta) dV(z) at u = at"""
    i = factor - 1
    delta, r = float(witness.delta[i]), float(witness.r[i])
    q, beta = float(spaces.q[i]), float(spaces.beta[i])
    u = _as_vector(at)[np.newaxis, :]

    def integrand(Z):
        return _schur_kernel(params, spaces, factor, Z, u) ** (delta * q) * g_values(Z.imag) ** (r * q + beta)

    return integrate_tube(integrand, params.n, config, box=box, label=f"q-side factor {factor}")


def schur_lhs_check(witness, params, spaces, probe, side, config, box=None):
    """
    Estimate the left side of a Schur inequality at a probe pair and return
    it with the right side h(probe)^exponent; their ratio is the empirical M.

    Raises:
        DivergenceSuspected: an integral failed the convergence checks
    """
    side = SchurSide(side)
    first, second = (_as_vector(point) for point in probe)
    seeds = spawn_seeds(config.seed, 2)
    configs = [config.with_seed(seed) for seed in seeds]
    uses_sup = False

    if side is SchurSide.P_SIDE:
        p_conj = [conjugate(p) for p in spaces.p]
        # h2 enters at p2' if finite, else at p1', else at power 1
        rhs_exponent = next((float(v) for v in (p_conj[1], p_conj[0]) if v is not None), 1.0)
        parts = []
        for factor, point in ((1, first), (2, second)):
            k = factor - 1
            if witness.l1_factor(factor):
                uses_sup = True
                sup = source_side_sup(witness, params, spaces, factor, point, configs[k])
                # The supremum enters at the power of the other factor's p'
                other = p_conj[1 - k]
                parts.append(sup if other is None else sup.power(float(other)))
            else:
                integral = source_side_integral(
                    witness, params, spaces, factor, point, p_conj[k], configs[k], box=box
                )
                if factor == 1 and p_conj[1] is not None:
                    integral = integral.power(float(p_conj[1] / p_conj[0]))
                parts.append(integral)
        lhs = parts[0].product(parts[1])
        rhs = float(witness.h2(first, second)) ** rhs_exponent
    else:
        q1, q2 = spaces.q
        j1 = target_side_integral(witness, params, spaces, 1, first, configs[0], box=box)
        j2 = target_side_integral(witness, params, spaces, 2, second, configs[1], box=box)
        lhs = j1.power(float(q2 / q1)).product(j2)
        rhs = float(witness.h1(first, second)) ** float(q2)

    if lhs.diverged:
        raise DivergenceSuspected(f"{side.value} integral at probe diverged (seed {config.seed})", lhs)
    return SchurCheck(side=side, probe=(first, second), lhs=lhs, rhs=rhs, uses_sup=uses_sup)


@dataclass
class SchurReport:
    """M-stability of one Schur inequality across probes"""
    witness: SchurWitness
    side: SchurSide
    checks: List[SchurCheck]
    stable: bool
    offending: List[Tuple[int, int]] = field(default_factory=list)

    def to_dict(self):
        return {
            "witness": self.witness.to_dict(),
            "side": self.side.value,
            "stable": self.stable,
            "offending": [list(pair) for pair in self.offending],
            "checks": [check.to_dict() for check in self.checks],
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            witness=SchurWitness.from_dict(data["witness"]),
            side=SchurSide(data["side"]),
            checks=[SchurCheck.from_dict(check) for check in data["checks"]],
            stable=bool(data["stable"]),
            offending=[tuple(pair) for pair in data.get("offending", [])],
        )


def _stable_pair(first, second, uses_sup):
    m1, m2 = first.ratio, second.ratio
    allowance = 3.0 * np.hypot(m1.stderr, m2.stderr)
    if uses_sup:
        allowance += SUP_TOLERANCE * max(abs(m1.value), abs(m2.value))
    return abs(m1.value - m2.value) <= allowance


def schur_probe_check(witness, params, spaces, probes, side, config):
    """
    Run schur_lhs_check at every probe (each with its own child seed) and
    test that the empirical M agrees across probes within 3 standard errors.
    """
    if len(probes) < 2:
        raise ValueError("stability across probes needs at least two probes")
    side = SchurSide(side)
    seeds = spawn_seeds(config.seed, len(probes))
    inner = replace(config, workers=1)

    def run(index):
        return schur_lhs_check(witness, params, spaces, probes[index], side, inner.with_seed(seeds[index]))

    with ThreadPoolExecutor(max_workers=config.workers) as executor:
        checks = list(executor.map(run, range(len(probes))))

    offending = [
        (i, j) for i, j in combinations(range(len(checks)), 2)
        if not _stable_pair(checks[i], checks[j], checks[i].uses_sup or checks[j].uses_sup)
    ]
    for i, j in offending:
        logger.warning(
            f"{side.value}: M differs between probes {i} and {j}: "
            f"{checks[i].ratio.value:.6g} vs {checks[j].ratio.value:.6g}"
        )
    return SchurReport(witness=witness, side=side, checks=checks, stable=not offending, offending=offending)
