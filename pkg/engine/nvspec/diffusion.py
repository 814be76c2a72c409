"""Stochastic models of spectral diffusion.

Trajectories follow omega(t + tau) = omega(t) + sigma * Z * sqrt(tau) with
standard-normal Z, or the exact discretization of an Ornstein-Uhlenbeck process.
Frequencies are in Hz, sigma in Hz/sqrt(s).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import pandas as pd
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field
from scipy import signal, stats

from .constants import DEFAULT_BIN_WIDTH, ENSEMBLE_HALF_WIDTH_IN_LINES, MHZ
from .errors import InputError, InsufficientDataError
from .fitkit import fit_voigt
from .parallel import ordered_map, stream
from .ple import Trajectory
from .specfun import lorentzian_pdf, olivero_fwhm

logger = logging.getLogger(__name__)

Seed = int | np.random.Generator


class WienerSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    sigma: float = Field(ge=0, description="Hz/sqrt(s)")
    tau: float = Field(gt=0, description="s")
    n_steps: int = Field(ge=1)
    omega0: float = Field(default=0.0, description="initial frequency, Hz")
    readout_error: float = Field(default=1.0, gt=0, description="center uncertainty, Hz")


class IntensityCoupling(BaseModel):
    model_config = ConfigDict(frozen=True)

    eta: float = Field(ge=0, description="Hz^2 s per W")
    excitation_power: float = Field(ge=0, description="W")


@dataclass(frozen=True, slots=True)
class IntensityDiffusion:
    sdr: float
    sigma: float
    reference_ratio: float | None = None


@dataclass(frozen=True, slots=True)
class DistributionCheck:
    statistic: float
    pvalue: float
    n_increments: int

    def rejects(self, alpha: float = 0.01) -> bool:
        return self.pvalue < alpha


@dataclass(slots=True)
class EnsembleWidth:
    """Per-time mean and spread of the fitted FWHM over independent ensembles."""

    times: NDArray[np.float64]
    mean_fwhm: NDArray[np.float64]
    std_fwhm: NDArray[np.float64]
    n_ok: NDArray[np.int64]
    n_ensembles: int

    @property
    def n_dropped(self) -> int:
        return int(self.n_ensembles * self.times.size - self.n_ok.sum())


def _rng(seed: Seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def _as_trajectory(spec: WienerSpec, omega: NDArray[np.float64]) -> Trajectory:
    times = spec.tau * np.arange(omega.size, dtype=float)
    return Trajectory(times, omega, spec.readout_error**2, spec.tau)


def wiener_trajectory(spec: WienerSpec, seed: Seed) -> Trajectory:
    """``spec.n_steps`` Wiener increments starting at ``omega0`` (n_steps + 1 points)."""
    z = _rng(seed).standard_normal(spec.n_steps)
    steps = spec.sigma * math.sqrt(spec.tau) * z
    omega = spec.omega0 + np.concatenate([[0.0], np.cumsum(steps)])
    return _as_trajectory(spec, omega)


def ou_trajectory(spec: WienerSpec, reversion_rate: float, seed: Seed) -> Trajectory:
    """Ornstein-Uhlenbeck trajectory reverting to ``omega0``; rate 0 gives the Wiener path."""
    if reversion_rate < 0:
        raise InputError("reversion rate must be >= 0")
    if reversion_rate == 0:
        return wiener_trajectory(spec, seed)
    z = _rng(seed).standard_normal(spec.n_steps)
    decay = math.exp(-reversion_rate * spec.tau)
    stationary = -math.expm1(-2.0 * reversion_rate * spec.tau) / (2.0 * reversion_rate)
    step_std = spec.sigma * math.sqrt(stationary)
    deviation = signal.lfilter([step_std], [1.0, -decay], z)
    omega = spec.omega0 + np.concatenate([[0.0], deviation])
    return _as_trajectory(spec, omega)


def sdr_analytic(sigma: float, tau: float) -> float:
    """Mean |d omega| / tau of a Wiener process: sigma * sqrt(2 / (pi * tau))."""
    if tau <= 0:
        raise InputError(f"time step must be > 0, got {tau}")
    if sigma < 0:
        raise InputError(f"sigma must be >= 0, got {sigma}")
    return sigma * math.sqrt(2.0 / (math.pi * tau))


def sdr_from_intensity(
    c: IntensityCoupling, tau: float, reference_sdr: float | None = None
) -> IntensityDiffusion:
    """SDR for sigma = sqrt(eta * I); optionally the ratio to a reference SDR."""
    sigma = math.sqrt(c.eta * c.excitation_power)
    sdr = sdr_analytic(sigma, tau)
    ratio = sdr / reference_sdr if reference_sdr else None
    if ratio is not None:
        logger.info(f"SDR from intensity {sdr / MHZ:.3f} MHz/s is {ratio:.4f} of the reference")
    return IntensityDiffusion(sdr=sdr, sigma=sigma, reference_ratio=ratio)


def sdr_distribution_check(traj: Trajectory, sigma: float, tau: float) -> DistributionCheck:
    """Kolmogorov-Smirnov test of increments / tau against N(0, sigma / sqrt(tau)).

    Raises:
        InsufficientDataError: with fewer than 100 increments.
    """
    increments = np.diff(traj.centers)
    if increments.size < 100:
        raise InsufficientDataError(f"need at least 100 increments, got {increments.size}")
    if sigma <= 0 or tau <= 0:
        raise InputError("sigma and tau must be > 0 for the distribution check")
    result = stats.kstest(increments / tau, "norm", args=(0.0, sigma / math.sqrt(tau)))
    return DistributionCheck(float(result.statistic), float(result.pvalue), int(increments.size))


def lorentzian_ensemble_spectrum(
    centers: NDArray[np.float64], line_fwhm: float, bin_width: float = DEFAULT_BIN_WIDTH
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Sum of unit Lorentzians at ``centers`` on a grid around their mean.

    The window is +-25 line widths, widened by half the spread of the centers.
    """
    mean = float(np.mean(centers))
    half = ENSEMBLE_HALF_WIDTH_IN_LINES * line_fwhm + 0.5 * float(np.ptp(centers))
    n = int(math.ceil(half / bin_width))
    grid = mean + bin_width * np.arange(-n, n + 1)
    spectrum = lorentzian_pdf(grid[:, None], 1.0, centers[None, :], 0.5 * line_fwhm).sum(axis=1)
    return grid, spectrum


def _ensemble_widths(job: tuple[WienerSpec, int, float, int, int]) -> NDArray[np.float64]:
    spec, n_lines, line_fwhm, master_seed, ensemble = job
    omegas = np.vstack(
        [
            wiener_trajectory(spec, stream(master_seed, ensemble, line)).centers
            for line in range(n_lines)
        ]
    )
    widths = np.full(omegas.shape[1], np.nan)
    for t in range(omegas.shape[1]):
        grid, spectrum = lorentzian_ensemble_spectrum(omegas[:, t], line_fwhm)
        fit = fit_voigt(grid, spectrum)
        if fit.converged:
            widths[t] = olivero_fwhm(fit.params["sigma"], fit.params["gamma"])
    return widths


def ensemble_inhomogeneous(
    spec: WienerSpec,
    n_lines: int = 14,
    line_fwhm: float = 60 * MHZ,
    n_ensembles: int = 10,
    *,
    master_seed: int = 0,
    threads: int | None = None,
) -> EnsembleWidth:
    """Inhomogeneous FWHM of ``n_lines`` diffusing Lorentzians versus time.

    Every ensemble draws each line's trajectory from stream (master_seed, ensemble, line);
    failed fits are dropped and counted in ``n_ok``.
    """
    if n_lines < 2:
        raise InputError("an ensemble needs at least two lines")
    if n_ensembles < 1:
        raise InputError("need at least one ensemble")
    jobs = [(spec, n_lines, line_fwhm, master_seed, e) for e in range(n_ensembles)]
    widths = np.vstack(ordered_map(_ensemble_widths, jobs, threads))
    ok = np.isfinite(widths)
    n_ok = ok.sum(axis=0)
    with np.errstate(invalid="ignore"):
        mean = np.where(n_ok > 0, np.nansum(widths, axis=0) / np.maximum(n_ok, 1), np.nan)
        squared = np.nansum((widths - mean) ** 2, axis=0)
        std = np.where(n_ok > 1, np.sqrt(squared / np.maximum(n_ok - 1, 1)), 0.0)
    dropped = int(widths.size - ok.sum())
    if dropped:
        logger.warning(f"{dropped} ensemble fits failed and were dropped")
    return EnsembleWidth(
        times=spec.tau * np.arange(widths.shape[1], dtype=float),
        mean_fwhm=mean,
        std_fwhm=std,
        n_ok=n_ok.astype(np.int64),
        n_ensembles=n_ensembles,
    )


def trajectory_table(traj: Trajectory) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "step": np.arange(len(traj)),
            "t_s": traj.times,
            "omega_MHz": traj.centers / MHZ,
        }
    )


def ensemble_table(result: EnsembleWidth) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "t_s": result.times,
            "mean_fwhm_MHz": result.mean_fwhm / MHZ,
            "std_fwhm_MHz": result.std_fwhm / MHZ,
            "n_ok": result.n_ok,
        }
    )
