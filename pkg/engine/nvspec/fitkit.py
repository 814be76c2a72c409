"""Nonlinear least squares and weighted statistics used by every analysis path."""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.optimize import least_squares

from .constants import FIT_MAX_ITERATIONS, FIT_XTOL, GAUSSIAN_FWHM_FACTOR
from .errors import InputError, InsufficientDataError, NoSignalError
from .specfun import gaussian_pdf, olivero_fwhm, voigt_profile

logger = logging.getLogger(__name__)

Model = Callable[..., NDArray[np.float64]]


@dataclass(frozen=True, slots=True)
class WeightedValue:
    """A value with its variance (squared units of ``value``)."""

    value: float
    variance: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.value):
            raise InputError(f"weighted value must be finite, got {self.value}")
        if not (self.variance > 0 and math.isfinite(self.variance)):
            raise InputError(f"variance must be finite and > 0, got {self.variance}")

    @classmethod
    def from_stderr(cls, value: float, stderr: float) -> WeightedValue:
        return cls(value, stderr * stderr)

    @property
    def stderr(self) -> float:
        return math.sqrt(self.variance)

    def scaled(self, factor: float) -> WeightedValue:
        return WeightedValue(self.value * factor, self.variance * factor * factor)


@dataclass(slots=True)
class FitResult:
    """Outcome of a least-squares fit.

    ``params`` and ``stderrs`` are keyed by parameter name in model order;
    ``residual_norm`` is the sum of squared residuals in data units.
    """

    params: dict[str, float]
    stderrs: dict[str, float]
    covariance: NDArray[np.float64]
    residual_norm: float
    n_points: int
    converged: bool
    covariance_valid: bool = True
    message: str = ""
    at_bound: tuple[str, ...] = ()
    history: list[float] = field(default_factory=list)

    def __getitem__(self, name: str) -> float:
        return self.params[name]

    @property
    def names(self) -> list[str]:
        return list(self.params)

    @property
    def rmse(self) -> float:
        if self.n_points == 0:
            return math.nan
        return math.sqrt(self.residual_norm / self.n_points)

    @property
    def accepted_history(self) -> NDArray[np.float64]:
        """Best residual norm reached after each recorded evaluation."""
        if not self.history:
            return np.empty(0)
        return np.minimum.accumulate(np.asarray(self.history, dtype=float))

    def weighted(self, name: str) -> WeightedValue:
        return WeightedValue(self.params[name], self.stderrs[name] ** 2)

    def as_dict(self) -> dict[str, Any]:
        return {
            "params": dict(self.params),
            "stderrs": dict(self.stderrs),
            "residual_norm": self.residual_norm,
            "n_points": self.n_points,
            "converged": self.converged,
            "covariance_valid": self.covariance_valid,
            "message": self.message,
        }


def _as_series(x: ArrayLike, y: ArrayLike) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    xs = np.asarray(x, dtype=float).ravel()
    ys = np.asarray(y, dtype=float).ravel()
    if xs.shape != ys.shape:
        raise InputError(f"x and y lengths differ ({xs.size} vs {ys.size})")
    if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
        raise InputError("fit data contains NaN or infinite values")
    return xs, ys


def _failed_result(init: Mapping[str, float], n_points: int, message: str) -> FitResult:
    p = len(init)
    return FitResult(
        params=dict(init),
        stderrs={name: math.nan for name in init},
        covariance=np.full((p, p), np.nan),
        residual_norm=math.inf,
        n_points=n_points,
        converged=False,
        covariance_valid=False,
        message=message,
    )


def fit_least_squares(
    model: Model,
    x: ArrayLike,
    y: ArrayLike,
    init: Mapping[str, float],
    bounds: Mapping[str, tuple[float, float]] | None = None,
    *,
    scales: Mapping[str, float] | None = None,
    record_history: bool = False,
) -> FitResult:
    """Minimize sum((y - model(x, *theta))**2) from ``init``.

    The search runs in rescaled coordinates (parameters divided by ``scales``,
    data divided by max|y|) so parameters in W or Hz behave like O(1) numbers.
    Bounds are enforced by projection inside a trust-region reflective solver.

    Args:
        model: callable ``model(x, *theta)`` returning an array shaped like ``x``.
        x: independent variable.
        y: observations.
        init: initial values keyed by parameter name, in model argument order.
        bounds: optional ``(low, high)`` per parameter; missing names are unbounded.
        scales: typical magnitude per parameter; defaults to ``|init|`` or 1.
        record_history: keep the residual norm of every model evaluation.

    Returns:
        A FitResult; singular Jacobians give ``converged=False`` and an invalid covariance.

    Raises:
        InputError: on NaN data or mismatched lengths.
        InsufficientDataError: with fewer points than parameters.
    """
    xs, ys = _as_series(x, y)
    names = list(init)
    n, p = xs.size, len(names)
    if n < p:
        raise InsufficientDataError(f"{n} points cannot constrain {p} parameters")

    theta0 = np.array([float(init[name]) for name in names])
    lower = np.full(p, -np.inf)
    upper = np.full(p, np.inf)
    for i, name in enumerate(names):
        if bounds and name in bounds:
            lower[i], upper[i] = bounds[name]
    theta0 = np.clip(theta0, lower, upper)

    scale = np.ones(p)
    for i, name in enumerate(names):
        given = scales.get(name) if scales else None
        if given is not None and given > 0:
            scale[i] = given
        elif theta0[i] != 0:
            scale[i] = abs(theta0[i])
    y_scale = float(np.max(np.abs(ys))) or 1.0

    history: list[float] = []

    def residuals(u: NDArray[np.float64]) -> NDArray[np.float64]:
        r = (model(xs, *(u * scale)) - ys) / y_scale
        if record_history:
            history.append(float(r @ r) * y_scale * y_scale)
        return r

    try:
        solution = least_squares(
            residuals,
            theta0 / scale,
            jac="3-point",
            bounds=(lower / scale, upper / scale),
            method="trf",
            xtol=FIT_XTOL,
            ftol=1e-12,
            gtol=1e-12,
            max_nfev=FIT_MAX_ITERATIONS,
        )
    except (ValueError, FloatingPointError, ZeroDivisionError) as exc:
        logger.debug(f"Least-squares solver rejected the problem: {exc}")
        return _failed_result(init, n, str(exc))

    theta = solution.x * scale
    residual_norm = 2.0 * float(solution.cost) * y_scale * y_scale
    params = {name: float(v) for name, v in zip(names, theta, strict=True)}

    # Parameters resting on a bound with a vanishing Jacobian column are held fixed.
    jac = np.asarray(solution.jac, dtype=float)
    column_norms = np.linalg.norm(jac, axis=0)
    u_lower, u_upper = lower / scale, upper / scale
    near_bound = (solution.x - u_lower <= 1e-3) | (u_upper - solution.x <= 1e-3)
    flat = column_norms <= 1e-8 * (float(np.max(column_norms)) if p else 0.0)
    pinned = (solution.active_mask != 0) | (near_bound & flat)
    at_bound = tuple(name for name, flag in zip(names, pinned, strict=True) if flag)
    free = np.flatnonzero(~pinned)

    converged = bool(solution.status > 0)
    rank = 0
    covariance = np.zeros((p, p))
    if free.size:
        _, singular_values, vt = np.linalg.svd(jac[:, free], full_matrices=False)
        threshold = np.finfo(float).eps * max(jac.shape) * singular_values[0]
        rank = int(np.sum(singular_values > threshold))

    if rank < free.size:
        covariance = np.full((p, p), np.nan)
        covariance_valid = False
        converged = False
        message = f"singular normal matrix (rank {rank} < {free.size})"
    else:
        dof = n - free.size
        s2 = 2.0 * float(solution.cost) / dof if dof > 0 else 0.0
        if free.size:
            inverse_normal = (vt.T / singular_values**2) @ vt
            block = s2 * inverse_normal * np.outer(scale[free], scale[free])
            covariance[np.ix_(free, free)] = 0.5 * (block + block.T)
        covariance_valid = bool(np.all(np.isfinite(covariance)))
        message = str(solution.message)

    diag = np.diag(covariance)
    stderrs = {
        name: float(math.sqrt(v)) if covariance_valid and v >= 0 else math.nan
        for name, v in zip(names, diag, strict=True)
    }
    logger.debug(
        f"Fit finished: status={solution.status} nfev={solution.nfev} "
        f"cost={residual_norm:.4g} rank={rank}/{p}"
    )
    return FitResult(
        params=params,
        stderrs=stderrs,
        covariance=covariance,
        residual_norm=residual_norm,
        n_points=n,
        converged=converged,
        covariance_valid=covariance_valid,
        message=message,
        at_bound=at_bound,
        history=history,
    )


def saturation_model(power: ArrayLike, i_sat: float, p_sat: float) -> NDArray[np.float64]:
    power = np.asarray(power, dtype=float)
    return i_sat * power / (power + p_sat)


def power_broadening_model(power: ArrayLike, gamma_0: float, p_sat: float) -> NDArray[np.float64]:
    return gamma_0 * np.sqrt(1.0 + np.asarray(power, dtype=float) / p_sat)


def _p_sat_floor(powers: NDArray[np.float64]) -> float:
    """Smallest admissible saturation power; the models are 0/0 at p_sat = 0."""
    scale = float(np.max(np.abs(powers))) if powers.size else 0.0
    return max(1e-6 * scale, float(np.finfo(float).tiny))


def power_law_model(x: ArrayLike, b: float, a: float, x_0: float = 0.0) -> NDArray[np.float64]:
    return b * np.power(np.asarray(x, dtype=float) - x_0, a)


def exponential_decay_model(x: ArrayLike, y0: float, rate: float) -> NDArray[np.float64]:
    return y0 * np.exp(-rate * np.asarray(x, dtype=float))


def fit_saturation(powers: ArrayLike, intensities: ArrayLike) -> FitResult:
    """Fit I = I_sat * P / (P + P_sat) to background-subtracted intensities.

    Raises:
        NoSignalError: if every intensity is zero.
    """
    p, i = _as_series(powers, intensities)
    if np.unique(p).size < 3:
        raise InsufficientDataError("saturation fit needs at least 3 distinct powers")
    if not np.any(i != 0):
        raise NoSignalError("all intensities are zero")
    positive = p[p > 0]
    floor = _p_sat_floor(p)
    p_sat0 = max(float(np.median(positive)) if positive.size else 1.0, 10.0 * floor)
    i_sat0 = 2.0 * float(np.max(i))
    return fit_least_squares(
        saturation_model,
        p,
        i,
        {"i_sat": i_sat0, "p_sat": p_sat0},
        {"i_sat": (0.0, np.inf), "p_sat": (floor, np.inf)},
    )


def fit_power_broadening(powers: ArrayLike, fwhms: ArrayLike) -> FitResult:
    """Fit gamma = gamma_0 * sqrt(1 + P / P_sat)."""
    p, g = _as_series(powers, fwhms)
    if p.size < 3:
        raise InsufficientDataError("power broadening fit needs at least 3 points")
    if np.any(g <= 0):
        raise InputError("linewidths must be > 0")
    positive = p[p > 0]
    floor = _p_sat_floor(p)
    p_sat0 = max(float(np.median(positive)) if positive.size else 1.0, 10.0 * floor)
    return fit_least_squares(
        power_broadening_model,
        p,
        g,
        {"gamma_0": float(np.min(g)), "p_sat": p_sat0},
        {"gamma_0": (0.0, np.inf), "p_sat": (floor, np.inf)},
    )


def fit_power_law(x: ArrayLike, y: ArrayLike, with_offset: bool = True) -> FitResult:
    """Fit f(x) = b * (x - x_0)**a, keeping x_0 < min(x).

    Initial values come from a log-log line when every y is positive, otherwise
    from a linear guess. Without offset, x_0 is pinned to 0 and reported with
    zero error.
    """
    xs, ys = _as_series(x, y)
    n_params = 3 if with_offset else 2
    if xs.size < n_params:
        raise InsufficientDataError(f"power-law fit needs at least {n_params} points")
    span = float(np.ptp(xs)) or 1.0
    x_min = float(np.min(xs))
    if with_offset:
        x0_init = 0.0 if x_min > 0 else x_min - 0.1 * span
    else:
        if x_min < 0:
            raise InputError("power law without offset needs x >= 0")
        x0_init = 0.0

    shifted = xs - x0_init
    usable = shifted > 0
    if np.all(ys > 0) and np.count_nonzero(usable) >= 2:
        slope, intercept = np.polyfit(np.log(shifted[usable]), np.log(ys[usable]), 1)
        a0, b0 = float(slope), float(math.exp(intercept))
    else:
        a0, b0 = 1.0, float(np.ptp(ys) / span) or 1.0

    if with_offset:
        upper_x0 = x_min - 1e-9 * span
        result = fit_least_squares(
            power_law_model,
            xs,
            ys,
            {"b": b0, "a": a0, "x_0": min(x0_init, upper_x0)},
            {"x_0": (-np.inf, upper_x0)},
            scales={"x_0": span},
        )
        return result

    def model(xv: NDArray[np.float64], b: float, a: float) -> NDArray[np.float64]:
        return power_law_model(xv, b, a, 0.0)

    result = fit_least_squares(model, xs, ys, {"b": b0, "a": a0})
    result.params["x_0"] = 0.0
    result.stderrs["x_0"] = 0.0
    cov = np.zeros((3, 3))
    cov[:2, :2] = result.covariance
    result.covariance = cov
    return result


def fit_exponential_decay(x: ArrayLike, y: ArrayLike) -> FitResult:
    """Fit y = y0 * exp(-rate * x) to positive data."""
    xs, ys = _as_series(x, y)
    if xs.size < 3:
        raise InsufficientDataError("exponential fit needs at least 3 points")
    if np.any(ys <= 0):
        raise InputError("exponential decay fit needs y > 0")
    slope, intercept = np.polyfit(xs, np.log(ys), 1)
    span = float(np.ptp(xs)) or 1.0
    return fit_least_squares(
        exponential_decay_model,
        xs,
        ys,
        {"y0": float(math.exp(intercept)), "rate": float(-slope)},
        scales={"rate": max(abs(float(slope)), 1.0 / span)},
    )


def _peak_guess(xs: NDArray[np.float64], ys: NDArray[np.float64]) -> tuple[float, float, float]:
    """Return (center, peak, fwhm) guesses from the highest bin and its half-maximum run."""
    order = np.argsort(xs)
    xs, ys = xs[order], ys[order]
    i_max = int(np.argmax(ys))
    peak = float(ys[i_max])
    pitch = float(np.median(np.diff(xs))) if xs.size > 1 else 1.0
    above = int(np.count_nonzero(ys >= peak / 2.0))
    return float(xs[i_max]), peak, max(above, 1) * pitch


def fit_voigt(x: ArrayLike, y: ArrayLike, tie_widths: bool = False) -> FitResult:
    """Fit a Voigt line (amplitude, center, sigma, gamma) to a spectrum.

    Starts at the highest bin with the empirical half-maximum width split
    equally between the Gaussian and Lorentzian parts. With ``tie_widths``
    sigma and gamma are one parameter; the result still reports both.
    A line at least as wide as the spectrum is reported as not converged.
    """
    xs, ys = _as_series(x, y)
    names = ("amplitude", "center", "sigma", "gamma")
    span = float(np.ptp(xs)) if xs.size > 1 else 1.0
    if xs.size < (3 if tie_widths else 4) or float(np.max(ys, initial=0.0)) <= 0:
        return _failed_result(dict.fromkeys(names, math.nan), int(xs.size), "no signal to fit")

    center0, peak, fwhm0 = _peak_guess(xs, ys)
    sigma0 = (fwhm0 / 2.0) / GAUSSIAN_FWHM_FACTOR
    gamma0 = (fwhm0 / 2.0) / 2.0
    floor = 1e-6 * fwhm0
    width_bounds = (0.0, 10.0 * span)
    common_bounds = {
        "amplitude": (0.0, np.inf),
        "center": (float(np.min(xs)) - span, float(np.max(xs)) + span),
    }

    if tie_widths:

        def tied(xv: NDArray[np.float64], amplitude: float, center: float, width: float):
            w = max(width, floor)
            return voigt_profile(xv, amplitude, center, w, w)

        width0 = 0.5 * (sigma0 + gamma0)
        fit = fit_least_squares(
            tied,
            xs,
            ys,
            {"amplitude": peak * fwhm0, "center": center0, "width": width0},
            {**common_bounds, "width": width_bounds},
            scales={"center": span, "width": width0},
        )
        expand = np.array([[1, 0, 0], [0, 1, 0], [0, 0, 1], [0, 0, 1]], dtype=float)
        width = fit.params.pop("width")
        width_err = fit.stderrs.pop("width")
        fit.params.update(sigma=width, gamma=width)
        fit.stderrs.update(sigma=width_err, gamma=width_err)
        fit.covariance = expand @ fit.covariance @ expand.T
        fit.at_bound = tuple("sigma" if b == "width" else b for b in fit.at_bound)
    else:

        def untied(
            xv: NDArray[np.float64], amplitude: float, center: float, sigma: float, gamma: float
        ):
            return voigt_profile(xv, amplitude, center, max(sigma, floor), gamma)

        fit = fit_least_squares(
            untied,
            xs,
            ys,
            {"amplitude": peak * fwhm0, "center": center0, "sigma": sigma0, "gamma": gamma0},
            {**common_bounds, "sigma": width_bounds, "gamma": width_bounds},
            scales={"center": span, "sigma": sigma0, "gamma": gamma0},
        )

    if fit.converged and olivero_fwhm(fit.params["sigma"], fit.params["gamma"]) >= span:
        fit.converged = False
        fit.message = "fitted line is at least as wide as the spectrum"
    return fit


def fit_gaussian(x: ArrayLike, y: ArrayLike) -> FitResult:
    """Fit an area-normalized Gaussian (amplitude, center, sigma) to a spectrum."""
    xs, ys = _as_series(x, y)
    names = ("amplitude", "center", "sigma")
    if xs.size < 3 or float(np.max(ys, initial=0.0)) <= 0:
        return _failed_result(dict.fromkeys(names, math.nan), int(xs.size), "no signal to fit")
    center0, peak, fwhm0 = _peak_guess(xs, ys)
    span = float(np.ptp(xs))
    sigma0 = fwhm0 / GAUSSIAN_FWHM_FACTOR
    floor = 1e-6 * fwhm0

    def model(xv: NDArray[np.float64], amplitude: float, center: float, sigma: float):
        return gaussian_pdf(xv, amplitude, center, max(sigma, floor))

    fit = fit_least_squares(
        model,
        xs,
        ys,
        {"amplitude": peak * sigma0 * math.sqrt(2.0 * math.pi), "center": center0, "sigma": sigma0},
        {
            "amplitude": (0.0, np.inf),
            "center": (float(np.min(xs)) - span, float(np.max(xs)) + span),
            "sigma": (0.0, 10.0 * span),
        },
        scales={"center": span, "sigma": sigma0},
    )
    if fit.converged and GAUSSIAN_FWHM_FACTOR * fit.params["sigma"] >= span:
        fit.converged = False
        fit.message = "fitted line is at least as wide as the spectrum"
    return fit


def inverse_variance_mean(values: Iterable[WeightedValue]) -> WeightedValue:
    """Inverse-variance weighted mean of ``values``.

    Raises:
        InsufficientDataError: if ``values`` is empty.
    """
    items: Sequence[WeightedValue] = list(values)
    if not items:
        raise InsufficientDataError("inverse-variance mean of an empty collection")
    v = np.array([item.value for item in items])
    w = 1.0 / np.array([item.variance for item in items])
    total = float(np.sum(w))
    return WeightedValue(float(np.sum(w * v) / total), 1.0 / total)
