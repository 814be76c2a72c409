"""Line-shape primitives: Faddeeva function, Voigt/Gaussian/Lorentzian profiles and FWHMs."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.optimize import bisect
from scipy.special import wofz

from .constants import (
    GAUSSIAN_FWHM_FACTOR,
    LORENTZ_BRANCH_RATIO,
    OLIVERO_A,
    OLIVERO_B,
    TIED_VOIGT_FWHM_FACTOR,
)
from .errors import DegenerateProfileError, DomainError, InputError, ModeMismatchError

SQRT_2 = math.sqrt(2.0)
SQRT_2PI = math.sqrt(2.0 * math.pi)


class FwhmMode(str, Enum):
    """Convention used to turn Voigt widths into a full width at half maximum."""

    LMFIT = "lmfit_3p6013"
    OLIVERO = "olivero"
    NUMERIC = "numeric"


@dataclass(frozen=True, slots=True)
class VoigtParams:
    """Voigt line: area ``amplitude``, ``center`` and widths in Hz."""

    amplitude: float
    center: float
    sigma: float
    gamma: float

    def __post_init__(self) -> None:
        values = (self.amplitude, self.center, self.sigma, self.gamma)
        if not all(math.isfinite(v) for v in values):
            raise InputError(f"Voigt parameters must be finite, got {values}")
        if self.sigma < 0 or self.gamma < 0:
            raise InputError(f"Voigt widths must be >= 0, got {self.sigma}, {self.gamma}")
        if self.sigma == 0 and self.gamma == 0:
            raise DegenerateProfileError("sigma = gamma = 0 describes a delta function, not a line")

    @property
    def is_tied(self) -> bool:
        return math.isclose(self.sigma, self.gamma, rel_tol=1e-9)

    def as_dict(self) -> dict[str, float]:
        return {
            "amplitude": self.amplitude,
            "center": self.center,
            "sigma": self.sigma,
            "gamma": self.gamma,
        }


def faddeeva(z: Any) -> Any:
    """Return w(z) = exp(-z**2) erfc(-iz) for a complex scalar or array.

    Raises:
        DomainError: if any input is NaN or infinite.
    """
    values = np.asarray(z, dtype=complex)
    if not np.all(np.isfinite(values)):
        raise DomainError("faddeeva is only defined for finite arguments")
    result = wofz(values)
    if result.ndim == 0:
        return complex(result)
    return result


def gaussian_pdf(
    x: ArrayLike, amplitude: float, center: float, sigma: float
) -> NDArray[np.float64]:
    """Area-normalized Gaussian scaled by ``amplitude``."""
    if sigma <= 0:
        raise DegenerateProfileError("Gaussian sigma must be > 0")
    u = (np.asarray(x, dtype=float) - center) / sigma
    return amplitude * np.exp(-0.5 * u * u) / (sigma * SQRT_2PI)


def lorentzian_pdf(
    x: ArrayLike, amplitude: float, center: float, gamma: float
) -> NDArray[np.float64]:
    """Area-normalized Lorentzian with half width ``gamma`` scaled by ``amplitude``."""
    if gamma <= 0:
        raise DegenerateProfileError("Lorentzian gamma must be > 0")
    d = np.asarray(x, dtype=float) - center
    return amplitude * (gamma / math.pi) / (d * d + gamma * gamma)


def voigt_profile(
    x: ArrayLike, amplitude: float, center: float, sigma: float, gamma: float
) -> NDArray[np.float64]:
    """Unvalidated Voigt evaluation used inside fit models.

    Falls back to the Lorentzian limit when ``sigma`` is below ``1e-6 * gamma``.
    """
    xs = np.asarray(x, dtype=float)
    if sigma < LORENTZ_BRANCH_RATIO * gamma:
        return lorentzian_pdf(xs, amplitude, center, gamma)
    if gamma == 0:
        return gaussian_pdf(xs, amplitude, center, sigma)
    z = (xs - center + 1j * gamma) / (sigma * SQRT_2)
    return amplitude * wofz(z).real / (sigma * SQRT_2PI)


def voigt_pdf(x: ArrayLike, p: VoigtParams) -> Any:
    """Voigt density of ``p`` at ``x`` (scalar in, scalar out)."""
    values = voigt_profile(x, p.amplitude, p.center, p.sigma, p.gamma)
    if np.ndim(x) == 0:
        return float(values)
    return values


def olivero_fwhm(sigma: float, gamma: float) -> float:
    f_l = 2.0 * gamma
    f_g = GAUSSIAN_FWHM_FACTOR * sigma
    return OLIVERO_A * f_l + math.sqrt(OLIVERO_B * f_l * f_l + f_g * f_g)


def _numeric_fwhm(p: VoigtParams) -> float:
    shape = VoigtParams(1.0, 0.0, p.sigma, p.gamma)
    half = voigt_pdf(0.0, shape) / 2.0

    def excess(d: float) -> float:
        return voigt_pdf(d, shape) - half

    hi = max(olivero_fwhm(p.sigma, p.gamma), 1e-300)
    while excess(hi) > 0:
        hi *= 2.0
    lo = hi / 4.0
    while excess(lo) < 0:
        lo /= 2.0
    root = bisect(excess, lo, hi, xtol=1e-15 * hi, rtol=1e-12, maxiter=500)
    return 2.0 * float(root)


def voigt_fwhm(p: VoigtParams, mode: FwhmMode | str = FwhmMode.OLIVERO) -> float:
    """Full width at half maximum of ``p`` under the chosen convention.

    Raises:
        ModeMismatchError: if the tied-width 3.6013 rule is requested for sigma != gamma.
    """
    mode = FwhmMode(mode)
    if mode is FwhmMode.LMFIT:
        if not p.is_tied:
            raise ModeMismatchError(
                f"the 3.6013*sigma rule needs gamma == sigma (got sigma={p.sigma}, gamma={p.gamma})"
            )
        return TIED_VOIGT_FWHM_FACTOR * p.sigma
    if mode is FwhmMode.OLIVERO:
        return olivero_fwhm(p.sigma, p.gamma)
    return _numeric_fwhm(p)


def voigt_fwhm_stderr(sigma: float, gamma: float, covariance: ArrayLike) -> float:
    """Standard error of the Olivero FWHM given the (sigma, gamma) covariance."""
    cov = np.asarray(covariance, dtype=float).reshape(2, 2)
    f_l = 2.0 * gamma
    f_g = GAUSSIAN_FWHM_FACTOR * sigma
    root = math.sqrt(OLIVERO_B * f_l * f_l + f_g * f_g)
    if root == 0:
        return math.nan
    d_sigma = GAUSSIAN_FWHM_FACTOR * f_g / root
    d_gamma = 2.0 * (OLIVERO_A + OLIVERO_B * f_l / root)
    grad = np.array([d_sigma, d_gamma])
    variance = float(grad @ cov @ grad)
    return math.sqrt(variance) if variance >= 0 else math.nan
