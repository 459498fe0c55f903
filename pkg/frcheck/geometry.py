"""
Geometry of the forward light cone and the tube domain over it.

Points are stored as float64 numpy vectors. The weight g(y) = y_n^2 - |y'|^2
and the holomorphic form Q(z) = z_1^2 + ... + z_{n-1}^2 - z_n^2 satisfy
Q(i y) = g(y). Sampling uses a heavy-tailed proposal whose reciprocal
density is returned as the importance weight.
"""

from dataclasses import dataclass, field
from typing import List

import numpy as np
from scipy.stats import multivariate_t

PROPOSAL_ID = "cauchy-logpareto-v1"

# Log-scale law of t = y_n - |y'|: flat body on [-LOG_BODY, LOG_BODY], exponential tails
LOG_BODY = 3.0
LOWER_TAIL_RATE = 0.5
UPPER_TAIL_RATE = 1.0
MIXTURE = (0.6, 0.2, 0.2)  # body, lower tail, upper tail

# Truncated region {g(y) < 1, |x| < 1, y_n < 2} for n = 2
TRUNCATED_Y_AREA = 4.0 - (2.0 * np.sqrt(3.0) - np.log(2.0 + np.sqrt(3.0)))
TRUNCATED_BOX_VOLUME = np.pi * TRUNCATED_Y_AREA

_EPS = np.finfo(float).eps


def g_values(Y):
    """g(y) = y_n^2 - |y'|^2 along the last axis"""
    Y = np.asarray(Y, dtype=float)
    return Y[..., -1] ** 2 - np.sum(Y[..., :-1] ** 2, axis=-1)


def q_values(Z):
    """Q(z) = sum_{k<n} z_k^2 - z_n^2 along the last axis"""
    Z = np.asarray(Z, dtype=complex)
    return np.sum(Z[..., :-1] ** 2, axis=-1) - Z[..., -1] ** 2


def cone_mask(Y):
    Y = np.asarray(Y, dtype=float)
    return Y[..., -1] > np.linalg.norm(Y[..., :-1], axis=-1)


def in_cone(y):
    """True iff y_n > |y'| strictly"""
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or y.shape[0] < 2:
        raise ValueError(f"cone membership needs a vector with n >= 2 components, got shape {y.shape}")
    return bool(cone_mask(y))


@dataclass(frozen=True)
class ConePoint:
    """A point y = (y', y_n) of the open forward light cone"""
    coords: np.ndarray

    def __post_init__(self):
        coords = np.array(self.coords, dtype=float)
        if coords.ndim != 1 or coords.shape[0] < 2:
            raise ValueError(f"cone points need n >= 2 components, got shape {coords.shape}")
        if not np.all(np.isfinite(coords)):
            raise ValueError("cone point has non-finite coordinates")
        if not in_cone(coords):
            raise ValueError(f"{coords.tolist()} is not inside the open light cone")
        coords.setflags(write=False)
        object.__setattr__(self, "coords", coords)

    @property
    def n(self):
        return self.coords.shape[0]

    @property
    def g(self):
        return float(g_values(self.coords))

    def __eq__(self, other):
        return isinstance(other, ConePoint) and np.array_equal(self.coords, other.coords)

    def __hash__(self):
        return hash(self.coords.tobytes())


@dataclass(frozen=True)
class TubePoint:
    """A point z = x + i y of the tube domain over the light cone"""
    re: np.ndarray
    im: ConePoint

    def __post_init__(self):
        im = self.im if isinstance(self.im, ConePoint) else ConePoint(self.im)
        re = np.array(self.re, dtype=float)
        if re.shape != im.coords.shape:
            raise ValueError(f"real part has shape {re.shape}, imaginary part {im.coords.shape}")
        if not np.all(np.isfinite(re)):
            raise ValueError("tube point has non-finite real part")
        re.setflags(write=False)
        object.__setattr__(self, "re", re)
        object.__setattr__(self, "im", im)

        # Construction self-test: Q(i y) reproduces g(y)
        g = im.g
        q = q_values(1j * im.coords)
        if abs(q - g) > 8 * _EPS * max(1.0, abs(g), float(np.sum(im.coords ** 2))):
            raise ValueError(f"Q(iy) = {q} disagrees with g(y) = {g}")

    @classmethod
    def from_complex(cls, z):
        z = np.asarray(z, dtype=complex)
        return cls(re=z.real, im=ConePoint(z.imag))

    @property
    def n(self):
        return self.im.n

    @property
    def z(self):
        return self.re + 1j * self.im.coords

    def __eq__(self, other):
        return isinstance(other, TubePoint) and np.array_equal(self.z, other.z)

    def __hash__(self):
        return hash(self.z.tobytes())


def g_form(y):
    """g(y) for a ConePoint; strictly positive by construction"""
    if not isinstance(y, ConePoint):
        y = ConePoint(y)
    return y.g


def q_form(z):
    """Q(z) for any complex vector (or TubePoint)"""
    if isinstance(z, TubePoint):
        z = z.z
    z = np.asarray(z, dtype=complex)
    if z.ndim != 1:
        raise ValueError(f"q_form expects a single vector, got shape {z.shape}")
    return complex(q_values(z))


def apex(n, r):
    """The shift point R = (0', r) as a real vector"""
    if not r > 0:
        raise ValueError(f"apex height must be positive, got {r}")
    point = np.zeros(n)
    point[-1] = float(r)
    return point


def _shift_log_density(u):
    """Log-density of the log-scale variable u"""
    body, lower, upper = MIXTURE
    return np.where(
        u < -LOG_BODY,
        np.log(lower * LOWER_TAIL_RATE) + LOWER_TAIL_RATE * (u + LOG_BODY),
        np.where(
            u > LOG_BODY,
            np.log(upper * UPPER_TAIL_RATE) - UPPER_TAIL_RATE * (u - LOG_BODY),
            np.log(body / (2.0 * LOG_BODY)),
        ),
    )


def _sample_shift_log(rng, count):
    component = rng.choice(3, size=count, p=MIXTURE)
    body = rng.uniform(-LOG_BODY, LOG_BODY, size=count)
    lower = -LOG_BODY - rng.exponential(1.0 / LOWER_TAIL_RATE, size=count)
    upper = LOG_BODY + rng.exponential(1.0 / UPPER_TAIL_RATE, size=count)
    return np.choose(component, [body, lower, upper])


def _cauchy(dim, scale):
    return multivariate_t(loc=np.zeros(dim), shape=np.eye(dim) * scale ** 2, df=1)


def _cauchy_draw(law, dim, count, rng):
    return np.asarray(law.rvs(size=count, random_state=rng), dtype=float).reshape(count, dim)


def _cauchy_logpdf(law, points):
    return np.atleast_1d(law.logpdf(points)).reshape(points.shape[0])


@dataclass
class SampleBatch:
    """
    Importance-sampled points of the tube domain.

    Args:
        re: (N, n) real parts
        im: (N, n) imaginary parts, all inside the open cone
        weights: (N,) reciprocal proposal densities
        seed: 64-bit seed the batch was drawn from
        proposal: identifier of the sampling law
        scale: proposal scale
    """
    re: np.ndarray
    im: np.ndarray
    weights: np.ndarray
    seed: int
    proposal: str = PROPOSAL_ID
    scale: float = 1.0
    _points: List[TubePoint] = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if not (len(self.re) == len(self.im) == len(self.weights)):
            raise ValueError("points and weights must have equal length")
        if not np.all(np.isfinite(self.weights) & (self.weights > 0)):
            raise ValueError("sample weights must be finite and strictly positive")

    def __len__(self):
        return len(self.weights)

    @property
    def n(self):
        return self.re.shape[1]

    @property
    def z(self):
        return self.re + 1j * self.im

    @property
    def points(self):
        if self._points is None:
            self._points = [TubePoint(re=x, im=ConePoint(y)) for x, y in zip(self.re, self.im)]
        return self._points


def sample_tube(n, scale, count, seed, proposal=PROPOSAL_ID):
    """
    Draw `count` points of the tube domain from the heavy-tailed proposal.

    The real part and y' are multivariate Cauchy with the given scale;
    t = y_n - |y'| is scale * e^u with u log-uniform in the body and
    exponential in both tails. The map (y', t) -> y has unit Jacobian.
    """
    if n < 2:
        raise ValueError(f"tube domains need n >= 2, got {n}")
    if count < 1:
        raise ValueError(f"sample count must be positive, got {count}")
    if not scale > 0:
        raise ValueError(f"proposal scale must be positive, got {scale}")
    if proposal != PROPOSAL_ID:
        raise ValueError(f"unknown proposal '{proposal}'")

    rng = np.random.default_rng(int(seed))
    x_law = _cauchy(n, scale)
    yp_law = _cauchy(n - 1, scale)

    x = _cauchy_draw(x_law, n, count, rng)
    y_prime = _cauchy_draw(yp_law, n - 1, count, rng)
    u = _sample_shift_log(rng, count)
    t = scale * np.exp(u)

    radius = np.linalg.norm(y_prime, axis=1)
    y = np.empty((count, n))
    y[:, :-1] = y_prime
    # Rounding can put y_n onto |y'| when t is tiny relative to |y'|
    y[:, -1] = np.maximum(radius + t, np.nextafter(radius, np.inf))

    # log q_t(t) = log f(u) - log t
    log_density = (
        _cauchy_logpdf(x_law, x)
        + _cauchy_logpdf(yp_law, y_prime)
        + _shift_log_density(u)
        - np.log(t)
    )
    weights = np.exp(-log_density)

    return SampleBatch(re=x, im=y, weights=weights, seed=int(seed), proposal=proposal, scale=float(scale))


def truncated_box_mask(Z, g_max=1.0, x_radius=1.0, yn_max=2.0):
    """Indicator of {g(Im z) < g_max, |Re z| < x_radius, Im z_n < yn_max}"""
    Z = np.asarray(Z, dtype=complex)
    Y = Z.imag
    return (
        (g_values(Y) < g_max)
        & (np.linalg.norm(Z.real, axis=-1) < x_radius)
        & (Y[..., -1] < yn_max)
        & cone_mask(Y)
    )


def grid_volume(n=2, g_max=1.0, x_radius=1.0, yn_max=2.0, resolution=2000):
    """
    Volume of the truncated region by the midpoint rule.

    The region is a product of a ball in x and a truncated cone slab in y,
    so each factor is integrated on its own grid.
    """
    if n != 2:
        raise ValueError("the grid oracle is implemented for n = 2 only")

    h = 2.0 * x_radius / resolution
    centres = -x_radius + h * (np.arange(resolution) + 0.5)
    X1, X2 = np.meshgrid(centres, centres, indexing="ij")
    x_area = np.count_nonzero(X1 ** 2 + X2 ** 2 < x_radius ** 2) * h * h

    hy1 = 2.0 * yn_max / resolution
    hyn = yn_max / resolution
    y1 = -yn_max + hy1 * (np.arange(resolution) + 0.5)
    yn = hyn * (np.arange(resolution) + 0.5)
    Y1, YN = np.meshgrid(y1, yn, indexing="ij")
    inside = (YN > np.abs(Y1)) & (YN ** 2 - Y1 ** 2 < g_max) & (YN < yn_max)
    y_area = np.count_nonzero(inside) * hy1 * hyn

    return float(x_area * y_area)
