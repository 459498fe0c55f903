"""
Exponent calculus for the Bergman-type integrals over the tube domain.

Every validity check runs in exact rational arithmetic. Predicted exponents
are powers of g(R) = r^2 for the apex R = (0', r), or powers of Q(z - conj xi).
"""

from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Tuple

from frcheck.errors import VariantMismatch
from frcheck.rationals import as_fraction, format_rational, parse_rational

VARIANTS = ("both-factors", "first-only", "second-only", "none")

# Which factors carry a g-numerator for each test-function variant
_NUMERATOR = {
    "both-factors": (True, True),
    "first-only": (True, False),
    "second-only": (False, True),
    "none": (False, False),
}


@dataclass(frozen=True)
class PowerLawPrediction:
    """
    Args:
        valid: whether every precondition holds
        exponent: predicted exponent, present only when valid
        reason: failed preconditions joined for display
        failed: the failed preconditions
        nominal: value of the exponent formula whether or not it applies
    """
    valid: bool
    exponent: Optional[Fraction] = None
    reason: str = ""
    failed: Tuple[str, ...] = field(default_factory=tuple)
    nominal: Optional[Fraction] = None

    def __post_init__(self):
        if not self.valid and self.exponent is not None:
            raise ValueError("an invalid prediction carries no exponent")
        if self.valid and self.exponent is None:
            raise ValueError("a valid prediction needs an exponent")

    def to_dict(self):
        return {
            "valid": self.valid,
            "exponent": format_rational(self.exponent),
            "reason": self.reason,
            "failed": list(self.failed),
            "nominal": format_rational(self.nominal),
        }

    @classmethod
    def from_dict(cls, data):
        exponent = data.get("exponent")
        nominal = data.get("nominal")
        return cls(
            valid=data["valid"],
            exponent=parse_rational(exponent) if exponent is not None else None,
            reason=data.get("reason", ""),
            failed=tuple(data.get("failed", [])),
            nominal=parse_rational(nominal) if nominal is not None else None,
        )


def _prediction(conditions, exponent):
    """conditions: list of (text, holds)"""
    failed = tuple(text for text, holds in conditions if not holds)
    if failed:
        return PowerLawPrediction(valid=False, reason="; ".join(failed), failed=failed, nominal=exponent)
    return PowerLawPrediction(valid=True, exponent=exponent, nominal=exponent)


def lemma21_predict(n, l, r, s):
    """
    Validity and exponent of int g(Im u)^l / (Q(z - conj u)^r Q(u - conj xi)^s) dV(u),
    which is a constant times Q(z - conj xi)^(n - r - s + l).
    """
    if n < 2:
        raise ValueError(f"dimension must be >= 2, got {n}")
    l, r, s = as_fraction(l), as_fraction(r), as_fraction(s)
    half = Fraction(n - 1, 2)
    conditions = [
        (f"r > (n-1)/2 fails: r = {r}", r > half),
        (f"s > (n-1)/2 fails: s = {s}", s > half),
        (f"l > -1 fails: l = {l}", l > -1),
        (f"r + s - l > 3n/2 - 1 fails: {r + s - l} <= {Fraction(3 * n, 2) - 1}", r + s - l > Fraction(3 * n, 2) - 1),
    ]
    return _prediction(conditions, n - r - s + l)


def remark21_predict(n, s, l):
    """
    J_{s,l}(z) = int g(Im u)^l / |Q(z - conj u)|^s dV(u) is a constant times
    g(Im z)^(n - s + l) when valid, and infinite otherwise.
    """
    if n < 2:
        raise ValueError(f"dimension must be >= 2, got {n}")
    s, l = as_fraction(s), as_fraction(l)
    bound = 1 - Fraction(3 * n, 2)
    conditions = [
        (f"l > -1 fails: l = {l}", l > -1),
        (f"l - s < 1 - 3n/2 fails: {l - s} >= {bound}", l - s < bound),
    ]
    return _prediction(conditions, n - s + l)


@dataclass(frozen=True)
class TestFnSpec:
    """
    Test function g(Im z)^l1 g(Im w)^l2 / (Q(z + iR)^s1 Q(w + iR)^s2).

    Args:
        l: numerator exponents; None where the variant omits the numerator
        s: denominator exponents
        R: apex height r of the shift point R = (0', r)
        variant: one of VARIANTS
    """
    __test__ = False

    l: Tuple[Optional[Fraction], Optional[Fraction]]
    s: Tuple[Fraction, Fraction]
    R: float
    variant: str = "both-factors"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown test-function variant '{self.variant}'")
        l = tuple(None if v is None else as_fraction(v) for v in self.l)
        s = tuple(as_fraction(v) for v in self.s)
        if len(l) != 2 or len(s) != 2:
            raise ValueError("test functions have exactly two factors")
        if any(v <= 0 for v in s):
            raise ValueError(f"denominator exponents must be positive, got {s}")
        if not float(self.R) > 0:
            raise ValueError(f"apex height must be positive, got {self.R}")
        present = tuple(v is not None for v in l)
        if present != _NUMERATOR[self.variant]:
            raise VariantMismatch(
                f"variant '{self.variant}' expects numerators at {_NUMERATOR[self.variant]}, got {present}"
            )
        object.__setattr__(self, "l", l)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "R", float(self.R))

    def has_numerator(self, factor):
        return self.l[factor - 1] is not None

    def l_value(self, factor):
        """Numerator exponent, counting an absent numerator as 0"""
        value = self.l[factor - 1]
        return Fraction(0) if value is None else value

    def at_height(self, R):
        return TestFnSpec(l=self.l, s=self.s, R=R, variant=self.variant)

    def to_dict(self):
        return {
            "l": [format_rational(v) for v in self.l],
            "s": [format_rational(v) for v in self.s],
            "R": self.R,
            "variant": self.variant,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            l=tuple(None if v is None else parse_rational(v) for v in data["l"]),
            s=tuple(parse_rational(v) for v in data["s"]),
            R=data["R"],
            variant=data["variant"],
        )


def _factor_check(factor):
    if factor not in (1, 2):
        raise ValueError(f"factor must be 1 or 2, got {factor}")
    return factor - 1


def membership_conditions(spec, spaces, factor, n, b=None, c=None) -> List[Tuple[str, bool]]:
    """
    Conditions under which one factor of the test function lies in the source
    space. The -1-b and 3n/2-1-c+b alternatives join the maxima only when the
    operator exponents are given.
    """
    i = _factor_check(factor)
    l, s = spec.l_value(factor), spec.s[i]
    p, alpha = spaces.p[i], spaces.alpha[i]

    s_floor = max(Fraction(n, 2) - 1, Fraction(n - 1) / p)
    l_options = [-(1 + alpha) / p]
    gap_options = [(alpha - 1) / p + Fraction(3 * n, 2) / p]
    if b is not None:
        l_options.append(-1 - b)
    if b is not None and c is not None:
        gap_options.append(Fraction(3 * n, 2) - 1 - c + b)
    l_floor, gap_floor = max(l_options), max(gap_options)

    return [
        (f"s{factor} > max(n/2 - 1, (n-1)/p{factor}): {s} vs {s_floor}", s > s_floor),
        (f"l{factor} > max(-(1+alpha{factor})/p{factor}, -1-b{factor}): {l} vs {l_floor}", l > l_floor),
        (
            f"s{factor} - l{factor} > max((alpha{factor}-1)/p{factor} + 3n/(2p{factor}), 3n/2 - 1 - c{factor} + b{factor}): "
            f"{s - l} vs {gap_floor}",
            s - l > gap_floor,
        ),
    ]


def testfn_norm_exponent(spec, spaces, factor, params):
    """
    Exponent of g(R) in the source norm of the test function, per factor:
    l - s + (n + alpha)/p, with l = 0 when the factor has no numerator.

    params is either the operator's FRParams (full membership conditions) or
    just the dimension n (conditions of the norm integral alone).
    """
    i = _factor_check(factor)
    if isinstance(params, int):
        n, b, c = params, None, None
    else:
        n, b, c = params.n, params.b[i], params.c[i]
    l, s = spec.l_value(factor), spec.s[i]
    p, alpha = spaces.p[i], spaces.alpha[i]
    conditions = membership_conditions(spec, spaces, factor, n, b, c)
    return _prediction(conditions, l - s + (n + alpha) / p)


def image_kappa(spec, params, factor):
    """Exponent of Q(z + iR) in the image of the test function"""
    i = _factor_check(factor)
    return params.c[i] + spec.s[i] - params.n - params.b[i] - spec.l_value(factor)


def image_norm_exponent(spec, params, spaces, factor):
    """
    Exponent of g(R) in the target norm of T f_R, per factor:
    a + b - c + l - s + n + (n + beta)/q.
    """
    i = _factor_check(factor)
    n = params.n
    a, b, c = params.a[i], params.b[i], params.c[i]
    l, s = spec.l_value(factor), spec.s[i]
    q, beta = spaces.q[i], spaces.beta[i]

    inner = lemma21_predict(n, b + l, c, s)
    conditions = [(f"operator integral: {text}", False) for text in inner.failed]
    conditions += [
        (f"q{factor}*a{factor} + beta{factor} > -1: {q * a + beta}", q * a + beta > -1),
        (
            f"q{factor}*(c{factor} - b{factor} - a{factor} - n + s{factor} - l{factor}) - beta{factor} > 3n/2 - 1: "
            f"{q * (c - b - a - n + s - l) - beta}",
            q * (c - b - a - n + s - l) - beta > Fraction(3 * n, 2) - 1,
        ),
    ]
    return _prediction(conditions, a + b - c + l - s + n + (n + beta) / q)


def _total(predictions):
    failed = tuple(text for prediction in predictions for text in prediction.failed)
    nominal = sum(prediction.nominal for prediction in predictions)
    if failed:
        return PowerLawPrediction(valid=False, reason="; ".join(failed), failed=failed, nominal=nominal)
    return PowerLawPrediction(valid=True, exponent=nominal, nominal=nominal)


def testfn_total_exponent(spec, params, spaces):
    return _total([testfn_norm_exponent(spec, spaces, factor, params) for factor in (1, 2)])


def image_total_exponent(spec, params, spaces):
    return _total([image_norm_exponent(spec, params, spaces, factor) for factor in (1, 2)])
