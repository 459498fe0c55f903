"""
End-to-end experiments: power-law scaling of test-function norms and their
images, blow-up probes off the c-equation, the adjoint duality check and
the proportionality checks for the Bergman-type integrals.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from itertools import combinations
from typing import List

import numpy as np
import pandas as pd

from frcheck.closed_forms import (
    PowerLawPrediction,
    image_kappa,
    image_total_exponent,
    lemma21_predict,
    remark21_predict,
    testfn_total_exponent,
)
from frcheck.conditions import theorem_c_value
from frcheck.errors import ConstancyFailure, MembershipError
from frcheck.geometry import g_values, q_values
from frcheck.kernels import ForelliRudinKernel, ShiftedPower, adjoint_params, cpow, cpow_array
from frcheck.quadrature import (
    McEstimate,
    apply_factor,
    integrate_pairs,
    integrate_tube,
    single_norm,
    spawn_seeds,
)
from frcheck.rationals import format_rational, parse_rational

logger = logging.getLogger('experiments')

MIN_GRID_POINTS = 4

# Slope errors below this count as converged when checking the doubling path
SLOPE_NOISE_FLOOR = 0.02


def fit_slope(x, y):
    """Least-squares line through (x, y); returns (slope, intercept, max abs residual)"""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    slope, intercept = np.polyfit(x, y, 1)
    residual = float(np.max(np.abs(y - (slope * x + intercept))))
    return float(slope), float(intercept), residual


@dataclass
class ScalingReport:
    """
    Power-law fit of a norm against g(R) = r^2 over a grid of apex heights.

    Args:
        label: which quantity was fitted (source, image or ratio)
        R_grid: apex heights r
        log_g: log g(R) = 2 log r
        log_norms: log of the estimated norms
        fitted_slope: least-squares slope of log_norms against log_g
        predicted_slope: exact exponent from the closed forms
        residual: max abs deviation of the points from the fitted line
        seed: master seed of the run
        estimates: per-point Monte Carlo estimates
    """
    label: str
    R_grid: List[float]
    log_g: List[float]
    log_norms: List[float]
    fitted_slope: float
    predicted_slope: Fraction
    residual: float
    seed: int
    estimates: List[McEstimate] = field(default_factory=list)

    @property
    def slope_error(self):
        return abs(self.fitted_slope - float(self.predicted_slope))

    @property
    def diverged(self):
        return any(estimate.diverged for estimate in self.estimates)

    def doubling_slopes(self):
        """Fitted slope at each step of the doubling schedule"""
        if not self.estimates:
            return []
        depth = min(len(estimate.history) for estimate in self.estimates)
        slopes = []
        for step in range(depth):
            magnitudes = [abs(estimate.history[step]) for estimate in self.estimates]
            if min(magnitudes) <= 0 or not all(np.isfinite(magnitudes)):
                return slopes
            slopes.append(fit_slope(self.log_g, np.log(magnitudes))[0])
        return slopes

    def converging(self, floor=SLOPE_NOISE_FLOOR):
        """
        |fitted - predicted| shrinks along the doubling schedule, allowing one
        step that grows; steps that stay below floor count as shrinking.
        """
        errors = [abs(slope - float(self.predicted_slope)) for slope in self.doubling_slopes()]
        growing = [
            step for step, (before, after) in enumerate(zip(errors, errors[1:]))
            if after > before and after >= floor
        ]
        return len(growing) <= 1

    def to_frame(self):
        """One row per grid point"""
        intercept = float(np.mean(self.log_norms)) - self.fitted_slope * float(np.mean(self.log_g))
        return pd.DataFrame({
            "label": self.label,
            "R": self.R_grid,
            "log_g": self.log_g,
            "norm": [float(np.real(e.value)) for e in self.estimates],
            "stderr": [e.stderr for e in self.estimates],
            "log_norm": self.log_norms,
            "fitted_log_norm": [self.fitted_slope * x + intercept for x in self.log_g],
            "diverged": [e.diverged for e in self.estimates],
        })

    def to_dict(self):
        return {
            "label": self.label,
            "R_grid": list(self.R_grid),
            "log_g": list(self.log_g),
            "log_norms": list(self.log_norms),
            "fitted_slope": self.fitted_slope,
            "predicted_slope": format_rational(self.predicted_slope),
            "residual": self.residual,
            "seed": self.seed,
            "doubling_slopes": self.doubling_slopes(),
            "estimates": [estimate.to_dict() for estimate in self.estimates],
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            label=data["label"],
            R_grid=list(data["R_grid"]),
            log_g=list(data["log_g"]),
            log_norms=list(data["log_norms"]),
            fitted_slope=data["fitted_slope"],
            predicted_slope=parse_rational(data["predicted_slope"]),
            residual=data["residual"],
            seed=data["seed"],
            estimates=[McEstimate.from_dict(e) for e in data.get("estimates", [])],
        )


def _check_grid(R_grid):
    grid = [float(r) for r in R_grid]
    if len(grid) < MIN_GRID_POINTS:
        raise ValueError(f"R grid needs at least {MIN_GRID_POINTS} points, got {len(grid)}")
    if any(r <= 0 for r in grid):
        raise ValueError("R grid entries must be positive")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("R grid must be strictly increasing")
    return grid


def _report(label, grid, estimates, predicted, seed):
    log_g = [2.0 * np.log(r) for r in grid]
    log_norms = [float(np.log(abs(e.value))) if abs(e.value) > 0 else float("-inf") for e in estimates]
    if all(np.isfinite(log_norms)):
        slope, _, residual = fit_slope(log_g, log_norms)
    else:
        slope, residual = float("nan"), float("inf")
    logger.info(f"{label}: fitted slope {slope:.4f}, predicted {format_rational(predicted)}")
    return ScalingReport(
        label=label,
        R_grid=grid,
        log_g=log_g,
        log_norms=log_norms,
        fitted_slope=slope,
        predicted_slope=predicted,
        residual=residual,
        seed=seed,
        estimates=list(estimates),
    )


def _point_norms(spec, params, spaces, r, config):
    """Source and image norms of the test function at apex height r"""
    n = params.n
    scale = r * config.scale
    seeds = iter(spawn_seeds(config.seed, 6))
    source_parts, image_parts = [], []
    for factor in (1, 2):
        i = factor - 1
        l, s = spec.l[i], spec.s[i]
        p, alpha = spaces.p[i], spaces.alpha[i]
        q, beta = spaces.q[i], spaces.beta[i]

        modulus = ShiftedPower(n, l, s, r, modulus=True)
        source_parts.append(
            single_norm(modulus, p, alpha, n, config.with_seed(next(seeds)), scale=scale,
                        label=f"source norm factor {factor}")
        )

        # T f at z_ref = iR, divided by the closed-form shape there, calibrates the constant
        z_ref = np.zeros(n, dtype=complex)
        z_ref[-1] = 1j * r
        value = apply_factor(params, factor, ShiftedPower(n, l, s, r), z_ref, config.with_seed(next(seeds)),
                             scale=scale)
        kappa = float(image_kappa(spec, params, factor))
        a = float(params.a[i])
        shape_ref = r ** (2 * a) / (4 * r * r) ** kappa
        shape = ShiftedPower(n, params.a[i], kappa, r, modulus=True)
        shape_norm = single_norm(shape, q, beta, n, config.with_seed(next(seeds)), scale=scale,
                                 label=f"image shape norm factor {factor}")
        image_parts.append(value.modulus().scaled(1.0 / shape_ref).product(shape_norm))

    return source_parts[0].product(source_parts[1]), image_parts[0].product(image_parts[1])


def run_scaling(spec, params, spaces, R_grid, config):
    """
    Fit the norms of f_R and T f_R against g(R) over R_grid.

    Returns:
        (source report, image report)

    Raises:
        MembershipError: the test function or its image is outside the spaces
    """
    grid = _check_grid(R_grid)
    source_prediction = testfn_total_exponent(spec, params, spaces)
    image_prediction = image_total_exponent(spec, params, spaces)
    if not source_prediction.valid:
        raise MembershipError(f"test function is not in the source space: {source_prediction.reason}")
    if not image_prediction.valid:
        raise MembershipError(f"image of the test function is not in the target space: {image_prediction.reason}")

    seeds = spawn_seeds(config.seed, len(grid))
    inner = replace(config, workers=1)
    logger.info(f"Scaling run over R = {grid} (seed {config.seed})")

    def run(index):
        point_spec = spec.at_height(grid[index])
        return _point_norms(point_spec, params, spaces, grid[index], inner.with_seed(seeds[index]))

    with ThreadPoolExecutor(max_workers=config.workers) as executor:
        results = list(executor.map(run, range(len(grid))))

    source = _report("source", grid, [res[0] for res in results], source_prediction.exponent, config.seed)
    image = _report("image", grid, [res[1] for res in results], image_prediction.exponent, config.seed)
    return source, image


def run_blowup_probe(params, spaces, spec, factor, epsilon, R_grid, config):
    """
    Move c_factor off its theorem value by epsilon and fit the ratio
    ||T f_R|| / ||f_R||; its predicted slope is image minus source exponent.
    """
    epsilon = Fraction(epsilon)
    shifted = params.with_c(factor, theorem_c_value(params, spaces, factor) + epsilon)
    logger.info(f"Blow-up probe: c{factor} = {format_rational(shifted.c[factor - 1])} (offset {format_rational(epsilon)})")
    source, image = run_scaling(spec, shifted, spaces, R_grid, config)
    ratios = [img.product(src.power(-1)) for src, img in zip(source.estimates, image.estimates)]
    predicted = image.predicted_slope - source.predicted_slope
    return _report("ratio", source.R_grid, ratios, predicted, config.seed)


@dataclass
class DualityReport:
    """
    Args:
        probes: sample pairs behind each side
        lhs: estimate of int g conj(T f) dV_beta
        rhs: estimate of int conj(f) T* g dV_alpha
        agree: both sides agree within 3 combined standard errors
    """
    probes: int
    lhs: McEstimate
    rhs: McEstimate
    agree: bool

    @property
    def diverged(self):
        return self.lhs.diverged or self.rhs.diverged

    def to_dict(self):
        return {
            "probes": self.probes,
            "lhs": self.lhs.to_dict(),
            "rhs": self.rhs.to_dict(),
            "agree": self.agree,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            probes=data["probes"],
            lhs=McEstimate.from_dict(data["lhs"]),
            rhs=McEstimate.from_dict(data["rhs"]),
            agree=data["agree"],
        )


def _within(first, second, sigmas=3.0):
    return abs(first.value - second.value) <= sigmas * np.hypot(first.stderr, second.stderr)


def boundary_order(params, spaces, f, g, factor):
    """
    Power of g(Im) that the pairing integrand of one factor carries against
    the kernel's g(Im z + Im u)^(-c), or None unless both factors are
    ShiftedPower. Since |Q(x + iy)| >= g(y), a non-negative order keeps the
    integrand bounded up to the boundary of the cone.
    """
    f_i, g_i = f.factor(factor), g.factor(factor)
    if not (isinstance(f_i, ShiftedPower) and isinstance(g_i, ShiftedPower)):
        return None
    i = factor - 1
    order = params.a[i] + params.b[i] + spaces.beta[i] - params.c[i]
    return float(order) + (f_i.l or 0.0) + (g_i.l or 0.0)


def run_duality(params, spaces, f, g, config, box=None):
    """
    Compare <g, T f> under dV_beta with <T* g, f> under dV_alpha, factor by factor.

    Test functions with g(Im)^l numerators that make boundary_order
    non-negative give a bounded pair integrand; without them the weighted
    values are heavy-tailed and the pairing is mostly noise.

    Args:
        f, g: SeparableFunction test functions
        box: truncated_box_mask arguments for oracle runs
    """
    adjoint = adjoint_params(params, spaces).params
    lhs_seed, rhs_seed = spawn_seeds(config.seed, 2)
    lhs_seeds, rhs_seeds = spawn_seeds(lhs_seed, 2), spawn_seeds(rhs_seed, 2)
    lhs_parts, rhs_parts = [], []

    for factor in (1, 2):
        i = factor - 1
        kernel = ForelliRudinKernel(params, factor)
        adjoint_kernel = ForelliRudinKernel(adjoint, factor)
        alpha, beta = float(spaces.alpha[i]), float(spaces.beta[i])
        f_i, g_i = f.factor(factor), g.factor(factor)
        order = boundary_order(params, spaces, f, g, factor)
        if box is None and order is not None and order < 0:
            logger.warning(
                f"duality factor {factor}: pair integrand is unbounded at the cone boundary "
                f"(order {order:g}); expect heavy-tailed weighted values"
            )

        def lhs_integrand(Z, U, kernel=kernel, f_i=f_i, g_i=g_i, beta=beta):
            # Z runs over the source variable, U over the target variable
            tf = kernel.weight(U) * kernel.holomorphic(U, Z) * f_i(Z)
            return g_i(U) * np.conj(tf) * g_values(U.imag) ** beta

        def rhs_integrand(Z, U, kernel=adjoint_kernel, f_i=f_i, g_i=g_i, alpha=alpha):
            tg = kernel.weight(Z) * kernel.holomorphic(Z, U) * g_i(U)
            return np.conj(f_i(Z)) * tg * g_values(Z.imag) ** alpha

        lhs_parts.append(integrate_pairs(lhs_integrand, params.n, config.with_seed(lhs_seeds[i]), box=box,
                                         label=f"duality lhs factor {factor}"))
        rhs_parts.append(integrate_pairs(rhs_integrand, params.n, config.with_seed(rhs_seeds[i]), box=box,
                                         label=f"duality rhs factor {factor}"))

    lhs = lhs_parts[0].product(lhs_parts[1])
    rhs = rhs_parts[0].product(rhs_parts[1])
    agree = bool(_within(lhs, rhs)) and not (lhs.diverged or rhs.diverged)
    logger.info(f"Duality: lhs {lhs.value:.6g} +- {lhs.stderr:.2g}, rhs {rhs.value:.6g} +- {rhs.stderr:.2g}")
    return DualityReport(probes=config.total_samples, lhs=lhs, rhs=rhs, agree=agree)


@dataclass
class Lemma21Report:
    """
    Proportionality of int g^l / (Q(z - conj u)^r Q(u - conj xi)^s) dV(u)
    to Q(z - conj xi)^(n - r - s + l) across probe pairs.
    """
    n: int
    l: Fraction
    r: Fraction
    s: Fraction
    prediction: PowerLawPrediction
    estimates: List[McEstimate]
    ratios: List[McEstimate]
    offending: List[tuple] = field(default_factory=list)
    passed: bool = False

    @property
    def diverged(self):
        return any(estimate.diverged for estimate in self.estimates)

    def to_dict(self):
        return {
            "n": self.n,
            "l": format_rational(self.l),
            "r": format_rational(self.r),
            "s": format_rational(self.s),
            "prediction": self.prediction.to_dict(),
            "estimates": [e.to_dict() for e in self.estimates],
            "ratios": [e.to_dict() for e in self.ratios],
            "offending": [list(pair) for pair in self.offending],
            "passed": self.passed,
            "diverged": self.diverged,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            n=data["n"],
            l=parse_rational(data["l"]),
            r=parse_rational(data["r"]),
            s=parse_rational(data["s"]),
            prediction=PowerLawPrediction.from_dict(data["prediction"]),
            estimates=[McEstimate.from_dict(e) for e in data["estimates"]],
            ratios=[McEstimate.from_dict(e) for e in data["ratios"]],
            offending=[tuple(pair) for pair in data.get("offending", [])],
            passed=data["passed"],
        )


def _probe_vector(point):
    return np.asarray(point.z if hasattr(point, "z") else point, dtype=complex)


def verify_lemma21(n, l, r, s, probes, config, strict=False):
    """
    Check that the integral over u divided by Q(z - conj xi)^(n - r - s + l)
    is the same constant at every probe pair (z, xi).

    With invalid exponents the check instead passes iff divergence is detected.

    Raises:
        ValueError: fewer than two distinct values of Q(z - conj xi)
        ConstancyFailure: strict mode and some pair of ratios disagrees
    """
    prediction = lemma21_predict(n, l, r, s)
    pairs = [(_probe_vector(z), _probe_vector(xi)) for z, xi in probes]
    anchors = [complex(q_values(z - np.conj(xi))) for z, xi in pairs]
    if len({np.round(q, 12) for q in anchors}) < 2:
        raise ValueError("constancy needs at least two distinct values of Q(z - conj xi)")

    l_f, r_f, s_f = float(l), float(r), float(s)
    seeds = spawn_seeds(config.seed, len(pairs))
    inner = replace(config, workers=1)

    def run(index):
        z, xi = pairs[index]
        z_row, xi_row = z[np.newaxis, :], xi[np.newaxis, :]

        def integrand(U):
            return (
                g_values(U.imag) ** l_f
                * cpow_array(q_values(z_row - np.conj(U)), -r_f)
                * cpow_array(q_values(U - np.conj(xi_row)), -s_f)
            )

        return integrate_tube(integrand, n, inner.with_seed(seeds[index]), label=f"proportionality probe {index}")

    with ThreadPoolExecutor(max_workers=config.workers) as executor:
        estimates = list(executor.map(run, range(len(pairs))))

    exponent = float(prediction.nominal)
    ratios = [estimate.scaled(1.0 / cpow(q, exponent)) for estimate, q in zip(estimates, anchors)]
    offending = [(i, j) for i, j in combinations(range(len(ratios)), 2) if not _within(ratios[i], ratios[j])]
    diverged = any(estimate.diverged for estimate in estimates)

    if prediction.valid:
        passed = not offending and not diverged
    else:
        logger.info(f"Invalid exponents ({prediction.reason}); expecting divergence")
        passed = diverged

    report = Lemma21Report(
        n=n, l=Fraction(l), r=Fraction(r), s=Fraction(s), prediction=prediction,
        estimates=estimates, ratios=ratios, offending=offending, passed=passed,
    )
    if strict and prediction.valid and offending:
        raise ConstancyFailure(f"ratios differ at probe pairs {offending}", offending)
    return report


@dataclass
class Remark21Report:
    """g(Im z)^(n - s + l) scaling of J_{s,l} at z = (0', i h) over several heights h"""
    n: int
    s: Fraction
    l: Fraction
    prediction: PowerLawPrediction
    heights: List[float]
    estimates: List[McEstimate]
    ratios: List[McEstimate]
    expected: List[float]
    passed: bool = False

    @property
    def diverged(self):
        return any(estimate.diverged for estimate in self.estimates)

    def to_dict(self):
        return {
            "n": self.n,
            "s": format_rational(self.s),
            "l": format_rational(self.l),
            "prediction": self.prediction.to_dict(),
            "heights": list(self.heights),
            "estimates": [e.to_dict() for e in self.estimates],
            "ratios": [e.to_dict() for e in self.ratios],
            "expected": list(self.expected),
            "passed": self.passed,
            "diverged": self.diverged,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            n=data["n"],
            s=parse_rational(data["s"]),
            l=parse_rational(data["l"]),
            prediction=PowerLawPrediction.from_dict(data["prediction"]),
            heights=list(data["heights"]),
            estimates=[McEstimate.from_dict(e) for e in data["estimates"]],
            ratios=[McEstimate.from_dict(e) for e in data["ratios"]],
            expected=list(data["expected"]),
            passed=data["passed"],
        )


def verify_remark21(n, s, l, heights, config):
    """
    Estimate J_{s,l}(z) = int g(Im u)^l / |Q(z - conj u)|^s dV(u) at z = (0', i h)
    and compare consecutive ratios with (h2^2 / h1^2)^(n - s + l).

    With invalid exponents the check passes iff divergence is detected.
    """
    heights = [float(h) for h in heights]
    if len(heights) < 2 or any(h <= 0 for h in heights):
        raise ValueError("at least two positive heights are required")
    prediction = remark21_predict(n, s, l)
    s_f, l_f = float(s), float(l)
    seeds = spawn_seeds(config.seed, len(heights))
    inner = replace(config, workers=1)

    def run(index):
        h = heights[index]
        z = np.zeros((1, n), dtype=complex)
        z[0, -1] = 1j * h

        def integrand(U):
            return g_values(U.imag) ** l_f * np.abs(q_values(z - np.conj(U))) ** (-s_f)

        return integrate_tube(integrand, n, inner.with_seed(seeds[index]), scale=h * config.scale,
                              label=f"J at height {h:g}")

    with ThreadPoolExecutor(max_workers=config.workers) as executor:
        estimates = list(executor.map(run, range(len(heights))))

    exponent = float(prediction.nominal)
    ratios = [second.product(first.power(-1)) for first, second in zip(estimates, estimates[1:])]
    expected = [(h2 * h2 / (h1 * h1)) ** exponent for h1, h2 in zip(heights, heights[1:])]
    diverged = any(estimate.diverged for estimate in estimates)

    if prediction.valid:
        matches = [
            abs(ratio.value - target) <= 3.0 * ratio.stderr for ratio, target in zip(ratios, expected)
        ]
        passed = all(matches) and not diverged
    else:
        logger.info(f"Invalid exponents ({prediction.reason}); expecting divergence")
        passed = diverged

    return Remark21Report(
        n=n, s=Fraction(s), l=Fraction(l), prediction=prediction, heights=heights,
        estimates=estimates, ratios=ratios, expected=expected, passed=passed,
    )
