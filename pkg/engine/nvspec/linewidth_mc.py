"""Monte Carlo estimate of the homogeneous linewidth from low-count scan ensembles.

Synthetic scans are generated for candidate (gamma, N), fitted with the same
Voigt machinery as measured scans, and their FWHM histograms are compared with
the observed one through a chi-square statistic.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .constants import (
    CI99_DELTA_CHI2,
    DEFAULT_BIN_WIDTH,
    MHZ,
    MIN_EXPECTED_PER_BIN,
    MIN_SPAN_IN_GAMMAS,
    UNDERFLOW_BIN_CAP,
)
from .errors import BinMismatchError, EmptyEnsembleError, InputError
from .parallel import chunk_ranges, ordered_map, stream
from .ple import LineScan, ScanDirection, ScanFilterPolicy, fit_scan

logger = logging.getLogger(__name__)

_CHUNK = 64


class ScanGenSpec(BaseModel):
    """Generator settings for synthetic scans. Frequencies in Hz."""

    model_config = ConfigDict(frozen=True)

    true_gamma: float = Field(gt=0, description="Cauchy half width, Hz")
    mean_photons: float = Field(ge=0, description="expected signal detections per scan")
    noise_mean: float = Field(default=0.0, ge=0, description="expected background events per scan")
    span: float = Field(gt=0, description="scan window, Hz")
    bin_width: float = Field(default=DEFAULT_BIN_WIDTH, gt=0)
    n_iterations: int = Field(default=1000, ge=1)
    scan_speed: float = Field(default=50e9, gt=0, description="Hz/s, scan metadata only")

    @model_validator(mode="after")
    def _tails_fit_in_span(self) -> ScanGenSpec:
        if self.span < MIN_SPAN_IN_GAMMAS * self.true_gamma:
            raise ValueError(
                f"span {self.span / MHZ:.3f} MHz is below {MIN_SPAN_IN_GAMMAS:g} gamma"
            )
        if self.span < self.bin_width:
            raise ValueError("span must hold at least one bin")
        return self

    def at(self, gamma: float, photons: float, min_iterations: int = 0) -> ScanGenSpec:
        """Copy for a grid point, widening the span to 20 gamma when needed."""
        return self.model_copy(
            update={
                "true_gamma": gamma,
                "mean_photons": photons,
                "span": max(self.span, MIN_SPAN_IN_GAMMAS * gamma),
                "n_iterations": max(self.n_iterations, min_iterations),
            }
        )


@dataclass(slots=True)
class LinewidthHistogram:
    """Histogram of fitted FWHMs (Hz).

    ``edges`` start at 0 and end at +inf; the first bin collects every FWHM
    up to ``underflow_bin_cap``. ``values`` keeps the raw FWHMs so the
    histogram can be re-binned; ``fit_errors``, when present, holds the fit
    standard error of each of them.
    """

    edges: NDArray[np.float64]
    occurrences: NDArray[np.float64]
    values: NDArray[np.float64] = field(default_factory=lambda: np.empty(0))
    underflow_bin_cap: float = UNDERFLOW_BIN_CAP
    fit_errors: NDArray[np.float64] = field(default_factory=lambda: np.empty(0))

    def __post_init__(self) -> None:
        self.edges = np.asarray(self.edges, dtype=float)
        self.occurrences = np.asarray(self.occurrences, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        self.fit_errors = np.asarray(self.fit_errors, dtype=float)
        if self.fit_errors.size and self.fit_errors.shape != self.values.shape:
            raise InputError("fit errors must match the raw linewidth values one to one")
        if self.edges.ndim != 1 or self.edges.size < 2 or np.any(np.diff(self.edges) <= 0):
            raise InputError("histogram edges must be strictly increasing with at least one bin")
        if self.occurrences.shape != (self.edges.size - 1,):
            raise InputError("histogram needs one occurrence count per bin")
        if np.any(self.occurrences < 0):
            raise InputError("histogram occurrences must be >= 0")

    @classmethod
    def from_values(
        cls,
        values: ArrayLike,
        edges: ArrayLike | None = None,
        *,
        underflow_bin_cap: float = UNDERFLOW_BIN_CAP,
        bin_width: float = DEFAULT_BIN_WIDTH,
        fit_errors: ArrayLike | None = None,
    ) -> LinewidthHistogram:
        data = np.asarray(values, dtype=float)
        finite = np.isfinite(data)
        errors = np.empty(0) if fit_errors is None else np.asarray(fit_errors, dtype=float)
        if errors.size:
            if errors.shape != data.shape:
                raise InputError("fit errors must match the raw linewidth values one to one")
            errors = errors[finite]
        data = data[finite]
        if edges is None:
            edges = fine_edges(data, underflow_bin_cap, bin_width)
        edges = np.asarray(edges, dtype=float)
        occurrences, _ = np.histogram(data, bins=edges)
        return cls(edges, occurrences.astype(float), data, underflow_bin_cap, errors)

    @property
    def total(self) -> float:
        return float(self.occurrences.sum())

    def rebinned(self, edges: ArrayLike) -> LinewidthHistogram:
        if self.values.size == 0 and self.total > 0:
            raise InputError("re-binning needs the raw linewidth values")
        return LinewidthHistogram.from_values(
            self.values,
            edges,
            underflow_bin_cap=self.underflow_bin_cap,
            fit_errors=self.fit_errors if self.fit_errors.size else None,
        )

    def scaled_to(self, total: float) -> LinewidthHistogram:
        """Copy whose occurrences sum to ``total`` (expected counts)."""
        factor = total / self.total if self.total > 0 else 0.0
        return LinewidthHistogram(
            self.edges,
            self.occurrences * factor,
            self.values,
            self.underflow_bin_cap,
            self.fit_errors,
        )

    def mode_center(self) -> float:
        """Center of the fullest finite bin of the fine binning of the raw values."""
        fine = LinewidthHistogram.from_values(
            self.values, fine_edges(self.values, 0.0, DEFAULT_BIN_WIDTH)
        )
        i = int(np.argmax(fine.occurrences[:-1])) if fine.occurrences.size > 1 else 0
        return float(0.5 * (fine.edges[i] + fine.edges[i + 1]))


@dataclass(slots=True)
class LinewidthEstimate:
    """Best grid point, 99% interval on gamma and the full chi-square surface."""

    gamma_best: float
    n_best: float
    ci99: tuple[float, float]
    s_min: float
    s_grid: NDArray[np.float64]
    gamma_grid: NDArray[np.float64]
    n_grid: NDArray[np.float64]
    boundary_warning: bool
    master_seed: int
    n_observed: int

    def as_dict(self) -> dict[str, Any]:
        return {
            "gamma_best_MHz": self.gamma_best / MHZ,
            "n_best": self.n_best,
            "ci99_MHz": [self.ci99[0] / MHZ, self.ci99[1] / MHZ],
            "s_min": self.s_min,
            "boundary_warning": self.boundary_warning,
            "n_observed": self.n_observed,
            "grid_spec": {
                "gamma_MHz": (self.gamma_grid / MHZ).tolist(),
                "n": self.n_grid.tolist(),
            },
            "master_seed": self.master_seed,
        }


def default_gamma_grid() -> NDArray[np.float64]:
    """10 to 100 MHz in 1 MHz steps."""
    return np.arange(10, 101, dtype=float) * MHZ


def default_n_grid() -> NDArray[np.float64]:
    return np.arange(5, 101, dtype=float)


def fine_edges(values: ArrayLike, underflow_cap: float, bin_width: float) -> NDArray[np.float64]:
    """Underflow bin [0, cap], uniform ``bin_width`` bins past it, open last bin."""
    data = np.asarray(values, dtype=float)
    top = float(np.max(data)) if data.size else underflow_cap
    edges = [0.0] if underflow_cap <= 0 else [0.0, underflow_cap]
    n_uniform = max(0, int(math.ceil((top - edges[-1]) / bin_width)))
    edges.extend(edges[-1] + bin_width * np.arange(1, n_uniform + 1))
    edges.append(math.inf)
    return np.asarray(edges, dtype=float)


def adaptive_edges(
    expected: LinewidthHistogram,
    n_observed: float,
    *,
    min_expected: float = MIN_EXPECTED_PER_BIN,
    bin_width: float = DEFAULT_BIN_WIDTH,
) -> NDArray[np.float64]:
    """Merge fine linewidth bins left to right until each holds ``min_expected`` counts.

    Expected counts are the simulated histogram scaled to ``n_observed``. A short
    remainder at the right end joins the previous bin.
    """
    fine = expected.rebinned(fine_edges(expected.values, expected.underflow_bin_cap, bin_width))
    counts = fine.scaled_to(n_observed).occurrences
    edges = [0.0]
    accumulated = 0.0
    for i, count in enumerate(counts):
        accumulated += count
        if accumulated >= min_expected and i < counts.size - 1:
            edges.append(float(fine.edges[i + 1]))
            accumulated = 0.0
    if len(edges) > 1 and accumulated < min_expected:
        edges.pop()
    edges.append(math.inf)
    return np.asarray(edges, dtype=float)


def generate_scan(
    spec: ScanGenSpec,
    seed: int | np.random.Generator,
    *,
    scan_id: int = 0,
    t_start: float = 0.0,
) -> LineScan:
    """Draw one synthetic scan.

    An odd number of bins is centered on the line so the line center is a bin
    center. Signal photons follow a Cauchy distribution truncated to the window,
    background events are uniform.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    n_bins = int(spec.span // spec.bin_width)
    if n_bins % 2 == 0:
        n_bins -= 1
    half = 0.5 * n_bins * spec.bin_width
    edges = np.linspace(-half, half, n_bins + 1)

    n_signal = rng.poisson(spec.mean_photons)
    limit = math.atan(half / spec.true_gamma)
    signal = spec.true_gamma * np.tan(rng.uniform(-limit, limit, size=n_signal))
    n_noise = rng.poisson(spec.noise_mean)
    noise = rng.uniform(-half, half, size=n_noise)

    counts, _ = np.histogram(np.concatenate([signal, noise]), bins=edges)
    return LineScan(
        bin_centers=0.5 * (edges[:-1] + edges[1:]),
        counts=counts,
        scan_speed=spec.scan_speed,
        power=0.0,
        direction=ScanDirection.UP,
        t_start=t_start,
        scan_id=scan_id,
        bin_width=spec.bin_width,
    )


def _simulate_chunk(
    job: tuple[ScanGenSpec, ScanFilterPolicy, int, tuple[int, ...], int, int],
) -> list[tuple[float, float]]:
    spec, policy, master_seed, key, start, stop = job
    fits: list[tuple[float, float]] = []
    for iteration in range(start, stop):
        scan = generate_scan(spec, stream(master_seed, *key, iteration), scan_id=iteration)
        if scan.counts.max(initial=0) < policy.min_photons_per_bin_for_fit:
            continue
        result = fit_scan(scan)
        if result.usable and result.fwhm is not None:
            fits.append((result.fwhm.value, result.fwhm.stderr))
    return fits


def simulate_fits(
    spec: ScanGenSpec,
    policy: ScanFilterPolicy | None = None,
    master_seed: int = 0,
    *,
    key: Sequence[int] = (),
    threads: int | None = 1,
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """FWHMs and their fit standard errors for every retained, usable synthetic scan."""
    policy = policy or ScanFilterPolicy()
    jobs = [
        (spec, policy, master_seed, tuple(key), start, stop)
        for start, stop in chunk_ranges(spec.n_iterations, _CHUNK)
    ]
    chunks = ordered_map(_simulate_chunk, jobs, threads)
    pairs = np.asarray([pair for chunk in chunks for pair in chunk], dtype=float).reshape(-1, 2)
    return pairs[:, 0], pairs[:, 1]


def simulate_fwhms(
    spec: ScanGenSpec,
    policy: ScanFilterPolicy | None = None,
    master_seed: int = 0,
    *,
    key: Sequence[int] = (),
    threads: int | None = 1,
) -> NDArray[np.float64]:
    """FWHMs of every retained, usable synthetic scan, in iteration order."""
    return simulate_fits(spec, policy, master_seed, key=key, threads=threads)[0]


def simulate_linewidth_histogram(
    spec: ScanGenSpec,
    policy: ScanFilterPolicy | None = None,
    master_seed: int = 0,
    *,
    key: Sequence[int] = (),
    threads: int | None = 1,
    underflow_bin_cap: float = UNDERFLOW_BIN_CAP,
) -> LinewidthHistogram:
    """Generate, filter and fit ``spec.n_iterations`` scans and histogram the FWHMs.

    Iteration ``i`` draws from the stream (master_seed, *key, i).

    Raises:
        EmptyEnsembleError: if no iteration survives the filter and the fit.
    """
    values, errors = simulate_fits(spec, policy, master_seed, key=key, threads=threads)
    if values.size == 0:
        raise EmptyEnsembleError(
            f"all {spec.n_iterations} scans rejected at gamma={spec.true_gamma / MHZ:.3f} MHz, "
            f"N={spec.mean_photons:g}"
        )
    logger.debug(
        f"gamma={spec.true_gamma / MHZ:.2f} MHz N={spec.mean_photons:g}: "
        f"{values.size}/{spec.n_iterations} scans retained"
    )
    return LinewidthHistogram.from_values(
        values, underflow_bin_cap=underflow_bin_cap, bin_width=spec.bin_width, fit_errors=errors
    )


def chi2_statistic(observed: LinewidthHistogram, expected: LinewidthHistogram) -> float:
    """S = sum((O - E)**2 / E) over bins shared by both histograms.

    Raises:
        BinMismatchError: if the edges differ.
        InputError: if an expected count is not positive.
    """
    if observed.edges.shape != expected.edges.shape or not np.array_equal(
        observed.edges, expected.edges
    ):
        raise BinMismatchError("observed and expected histograms use different bins")
    e = expected.occurrences
    if np.any(e <= 0):
        raise InputError("expected counts must be > 0 in every compared bin")
    o = observed.occurrences
    return float(np.sum((o - e) ** 2 / e))


def _grid_point(
    job: tuple[ScanGenSpec, ScanFilterPolicy, int, tuple[int, int], NDArray[np.float64], float],
) -> float:
    spec, policy, master_seed, key, observed_values, underflow_cap = job
    try:
        simulated = simulate_linewidth_histogram(
            spec, policy, master_seed, key=key, threads=1, underflow_bin_cap=underflow_cap
        )
    except EmptyEnsembleError as exc:
        logger.warning(f"{exc}; grid point scored as infinite")
        return math.inf
    n_observed = float(observed_values.size)
    edges = adaptive_edges(simulated, n_observed, bin_width=spec.bin_width)
    expected = simulated.rebinned(edges).scaled_to(n_observed)
    observed = LinewidthHistogram.from_values(
        observed_values, edges, underflow_bin_cap=underflow_cap
    )
    return chi2_statistic(observed, expected)


def estimate_linewidth(
    observed: LinewidthHistogram,
    gamma_grid: ArrayLike | None,
    n_grid: ArrayLike | None,
    spec_template: ScanGenSpec,
    policy: ScanFilterPolicy | None = None,
    *,
    master_seed: int = 0,
    threads: int | None = None,
) -> LinewidthEstimate:
    """Grid search of (gamma, N) minimizing the chi-square between histograms.

    The 99% interval is the hull of gamma values with S <= S_min + 9.21 over the
    joint grid. Each grid point simulates at least as many scans as were observed.
    """
    policy = policy or ScanFilterPolicy()
    gammas = default_gamma_grid() if gamma_grid is None else np.asarray(gamma_grid, dtype=float)
    photons = default_n_grid() if n_grid is None else np.asarray(n_grid, dtype=float)
    if gammas.size == 0 or photons.size == 0:
        raise InputError("gamma and N grids must be non-empty")
    if observed.values.size == 0:
        raise InputError("observed histogram carries no linewidths")
    n_observed = int(observed.values.size)

    jobs = []
    for i, gamma in enumerate(gammas):
        for j, n in enumerate(photons):
            spec = spec_template.at(float(gamma), float(n), n_observed)
            key = (i, j)
            cap = observed.underflow_bin_cap
            jobs.append((spec, policy, master_seed, key, observed.values, cap))
    logger.info(f"Scanning {gammas.size} x {photons.size} grid points against {n_observed} scans")
    s_grid = np.asarray(ordered_map(_grid_point, jobs, threads), dtype=float).reshape(
        gammas.size, photons.size
    )
    if not np.any(np.isfinite(s_grid)):
        raise EmptyEnsembleError("every grid point produced an empty ensemble")

    i_best, j_best = np.unravel_index(int(np.argmin(s_grid)), s_grid.shape)
    s_min = float(s_grid[i_best, j_best])
    inside = np.any(s_grid <= s_min + CI99_DELTA_CHI2, axis=1)
    ci99 = (float(gammas[inside].min()), float(gammas[inside].max()))
    boundary = (gammas.size > 1 and i_best in (0, gammas.size - 1)) or (
        photons.size > 1 and j_best in (0, photons.size - 1)
    )
    if boundary:
        logger.warning("Chi-square minimum lies on the grid boundary; widen the grid")
    logger.info(
        f"Best gamma {gammas[i_best] / MHZ:.2f} MHz, N {photons[j_best]:g}, S_min {s_min:.3f}, "
        f"99% interval [{ci99[0] / MHZ:.2f}, {ci99[1] / MHZ:.2f}] MHz"
    )
    return LinewidthEstimate(
        gamma_best=float(gammas[i_best]),
        n_best=float(photons[j_best]),
        ci99=ci99,
        s_min=s_min,
        s_grid=s_grid,
        gamma_grid=gammas,
        n_grid=photons,
        boundary_warning=bool(boundary),
        master_seed=master_seed,
        n_observed=n_observed,
    )
