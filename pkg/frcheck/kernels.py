"""
Forelli-Rudin kernels on the tube domain, principal-branch powers and
the adjoint parameter transform
"""

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Tuple

import numpy as np

from frcheck.errors import BranchCutError
from frcheck.geometry import TubePoint, g_values, q_values
from frcheck.rationals import as_fraction, as_pair, conjugate, format_pair, parse_pair

Pair = Tuple[Fraction, Fraction]


@dataclass(frozen=True)
class FRParams:
    """Exponent triple (a, b, c) and dimension n of one operator pair (T, S)"""
    n: int
    a: Pair
    b: Pair
    c: Pair

    def __post_init__(self):
        if isinstance(self.n, bool) or int(self.n) != self.n or self.n < 2:
            raise ValueError(f"dimension must be an integer >= 2, got {self.n}")
        object.__setattr__(self, "n", int(self.n))
        for name in ("a", "b", "c"):
            object.__setattr__(self, name, as_pair(getattr(self, name)))

    def with_c(self, factor, value):
        c = list(self.c)
        c[factor - 1] = as_fraction(value)
        return FRParams(self.n, self.a, self.b, tuple(c))

    def to_dict(self):
        return {"n": self.n, "a": format_pair(self.a), "b": format_pair(self.b), "c": format_pair(self.c)}

    @classmethod
    def from_dict(cls, data):
        return cls(n=data["n"], a=parse_pair(data["a"]), b=parse_pair(data["b"]), c=parse_pair(data["c"]))


@dataclass(frozen=True)
class SpaceSpec:
    """Mixed-norm data: source exponents/weights (p, alpha), target (q, beta)"""
    p: Pair
    q: Pair
    alpha: Pair
    beta: Pair

    def __post_init__(self):
        for name in ("p", "q", "alpha", "beta"):
            object.__setattr__(self, name, as_pair(getattr(self, name)))
        for name in ("p", "q"):
            for value in getattr(self, name):
                if value < 1:
                    raise ValueError(f"{name} entries must lie in [1, inf), got {value}")
        for name in ("alpha", "beta"):
            for value in getattr(self, name):
                if value <= -1:
                    raise ValueError(f"{name} entries must exceed -1, got {value}")

    @property
    def p_conj(self) -> Tuple[Optional[Fraction], Optional[Fraction]]:
        return tuple(conjugate(p) for p in self.p)

    @property
    def q_conj(self) -> Tuple[Optional[Fraction], Optional[Fraction]]:
        return tuple(conjugate(q) for q in self.q)

    @property
    def inv_p_conj(self):
        return tuple(1 - 1 / p for p in self.p)

    def to_dict(self):
        return {
            "p": format_pair(self.p),
            "q": format_pair(self.q),
            "alpha": format_pair(self.alpha),
            "beta": format_pair(self.beta),
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            p=parse_pair(data["p"]),
            q=parse_pair(data["q"]),
            alpha=parse_pair(data["alpha"]),
            beta=parse_pair(data["beta"]),
        )


@dataclass(frozen=True)
class AdjointPair:
    """Parameters of T* and, when all conjugates are finite, its spaces"""
    params: FRParams
    spaces: Optional[SpaceSpec]

    def to_dict(self):
        return {
            "params": self.params.to_dict(),
            "spaces": self.spaces.to_dict() if self.spaces is not None else None,
        }


def _on_cut(base):
    return (np.imag(base) == 0) & (np.real(base) <= 0)


def cpow(base, exponent):
    """Principal power exp(exponent * Log base), Arg in (-pi, pi)"""
    base = complex(base)
    if _on_cut(base):
        raise BranchCutError(f"base {base} lies on the closed negative real axis")
    return complex(np.exp(float(exponent) * np.log(base)))


def cpow_array(base, exponent):
    """Vectorised principal power; any base on (-inf, 0] is an error"""
    base = np.asarray(base, dtype=complex)
    bad = _on_cut(base)
    if np.any(bad):
        raise BranchCutError(f"{int(np.sum(bad))} bases lie on the closed negative real axis")
    return np.exp(float(exponent) * np.log(base))


def branch_margin(Z, U):
    """Smallest distance pi - |Arg Q(z - conj u)| over paired rows"""
    values = q_values(np.asarray(Z, dtype=complex) - np.conj(np.asarray(U, dtype=complex)))
    return float(np.min(np.pi - np.abs(np.angle(values))))


class ForelliRudinKernel:
    """
    One factor of the product kernel.

    Args:
        params: operator exponents
        factor: 1 or 2
    """

    def __init__(self, params, factor):
        if factor not in (1, 2):
            raise ValueError(f"factor must be 1 or 2, got {factor}")
        self.params = params
        self.factor = factor
        self.a = float(params.a[factor - 1])
        self.b = float(params.b[factor - 1])
        self.c = float(params.c[factor - 1])

    def denominator(self, Z, U):
        return q_values(np.asarray(Z, dtype=complex) - np.conj(np.asarray(U, dtype=complex)))

    def holomorphic(self, Z, U):
        """g(Im u)^b / Q(z - conj u)^c"""
        U = np.asarray(U, dtype=complex)
        return g_values(U.imag) ** self.b * cpow_array(self.denominator(Z, U), -self.c)

    def modulus(self, Z, U):
        """g(Im u)^b / |Q(z - conj u)|^c"""
        U = np.asarray(U, dtype=complex)
        return g_values(U.imag) ** self.b * np.abs(self.denominator(Z, U)) ** (-self.c)

    def weight(self, Z):
        """The outer factor g(Im z)^a applied by the operator"""
        return g_values(np.asarray(Z, dtype=complex).imag) ** self.a


def _as_z(point):
    return point.z if isinstance(point, TubePoint) else np.asarray(point, dtype=complex)


def kernel_T(z, u, factor, params):
    return complex(ForelliRudinKernel(params, factor).holomorphic(_as_z(z), _as_z(u)))


def kernel_S(z, u, factor, params):
    return float(ForelliRudinKernel(params, factor).modulus(_as_z(z), _as_z(u)))


def adjoint_params(params, spaces):
    """
    Parameters of T*: a* = b - alpha, b* = a + beta, c* = c. T* maps the
    conjugate target space (q', beta) into the conjugate source space (p', alpha).
    """
    adjoint = FRParams(
        n=params.n,
        a=tuple(b - alpha for b, alpha in zip(params.b, spaces.alpha)),
        b=tuple(a + beta for a, beta in zip(params.a, spaces.beta)),
        c=params.c,
    )
    p_conj, q_conj = spaces.p_conj, spaces.q_conj
    if any(value is None for value in p_conj + q_conj):
        adjoint_spaces = None
    else:
        adjoint_spaces = SpaceSpec(p=q_conj, q=p_conj, alpha=spaces.beta, beta=spaces.alpha)
    return AdjointPair(params=adjoint, spaces=adjoint_spaces)


class ShiftedPower:
    """
    g(Im z)^l / Q(z + iR)^s with R = (0', r); l may be None (no numerator).
    With modulus=True the denominator is |Q(z + iR)|^s.
    """

    def __init__(self, n, l, s, r, modulus=False):
        if not r > 0:
            raise ValueError(f"apex height must be positive, got {r}")
        self.n = n
        self.l = None if l is None else float(l)
        self.s = float(s)
        self.r = float(r)
        self.modulus = modulus
        self.shift = np.zeros(n, dtype=complex)
        self.shift[-1] = 1j * self.r

    def denominator(self, Z):
        return q_values(np.asarray(Z, dtype=complex) + self.shift)

    def __call__(self, Z):
        Z = np.asarray(Z, dtype=complex)
        if self.modulus:
            value = np.abs(self.denominator(Z)) ** (-self.s)
        else:
            value = cpow_array(self.denominator(Z), -self.s)
        if self.l is not None:
            value = value * g_values(Z.imag) ** self.l
        return value
