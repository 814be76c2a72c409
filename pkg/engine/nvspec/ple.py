"""PLE line scans: ingestion, binning, per-scan fits and spectral-diffusion analysis."""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from enum import Enum
from functools import partial
from pathlib import Path
from typing import Any, TypeVar

import numpy as np
import pandas as pd
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, ConfigDict, Field

from .constants import (
    DEFAULT_BIN_WIDTH,
    DEFAULT_JUMP_THRESHOLD,
    GAUSSIAN_FWHM_FACTOR,
    GHZ,
    LOW_COUNT_PHOTONS,
    MHZ,
    MIN_PHOTONS_IN_SOME_BIN,
    MIN_PHOTONS_PER_BIN_FOR_FIT,
    NW,
    TIED_VOIGT_FWHM_FACTOR,
)
from .errors import InputError, InsufficientDataError, ScanFormatError
from .fitkit import FitResult, WeightedValue, fit_gaussian, fit_voigt, inverse_variance_mean
from .parallel import ordered_map
from .specfun import FwhmMode, VoigtParams, olivero_fwhm, voigt_fwhm, voigt_fwhm_stderr

logger = logging.getLogger(__name__)

K = TypeVar("K")

SCAN_COLUMNS: tuple[str, ...] = (
    "scan_id",
    "t_start_s",
    "direction",
    "power_nW",
    "scan_speed_GHz_per_s",
    "bin_center_MHz",
    "counts",
)
_SCAN_METADATA = ("t_start_s", "direction", "power_nW", "scan_speed_GHz_per_s")
_UNIFORM_PITCH_RTOL = 1e-6


class ScanDirection(str, Enum):
    UP = "up"
    DOWN = "down"


class SdrMode(str, Enum):
    """How consecutive center differences enter the diffusion rate."""

    ABSOLUTE = "absolute"
    SIGNED = "signed"


class ProfileKind(str, Enum):
    GAUSSIAN = "gaussian"
    VOIGT = "voigt"


class ScanFilterPolicy(BaseModel):
    """Photon thresholds and binning applied to every scan."""

    model_config = ConfigDict(frozen=True)

    min_photons_in_some_bin: int = Field(default=MIN_PHOTONS_IN_SOME_BIN, ge=1)
    min_photons_per_bin_for_fit: int = Field(default=MIN_PHOTONS_PER_BIN_FOR_FIT, ge=1)
    bin_width: float = Field(default=DEFAULT_BIN_WIDTH, gt=0, description="Hz")


@dataclass(frozen=True, slots=True)
class LineScan:
    """One binned PLE sweep. Frequencies in Hz, power in W, speed in Hz/s."""

    bin_centers: NDArray[np.float64]
    counts: NDArray[np.int64]
    scan_speed: float
    power: float
    direction: ScanDirection
    t_start: float
    scan_id: int
    bin_width: float = math.nan

    def __post_init__(self) -> None:
        centers = np.asarray(self.bin_centers, dtype=float).ravel()
        raw_counts = np.asarray(self.counts).ravel()
        if centers.size == 0 or centers.shape != raw_counts.shape:
            raise InputError(f"scan {self.scan_id}: bins and counts must be non-empty and aligned")
        if np.any(raw_counts < 0) or np.any(np.asarray(raw_counts, dtype=float) % 1 != 0):
            raise InputError(f"scan {self.scan_id}: counts must be non-negative integers")
        pitch = self.bin_width
        if centers.size > 1:
            steps = np.diff(centers)
            if np.any(steps <= 0):
                raise InputError(f"scan {self.scan_id}: bin centers must be strictly increasing")
            measured = float(np.mean(steps))
            if np.max(np.abs(steps - measured)) > _UNIFORM_PITCH_RTOL * measured:
                raise InputError(f"scan {self.scan_id}: bins are not uniformly spaced")
            pitch = measured
        if not (pitch > 0):
            raise InputError(f"scan {self.scan_id}: a single-bin scan needs an explicit bin_width")
        if not (self.scan_speed > 0):
            raise InputError(f"scan {self.scan_id}: scan speed must be > 0")
        object.__setattr__(self, "bin_centers", centers)
        object.__setattr__(self, "counts", raw_counts.astype(np.int64))
        object.__setattr__(self, "bin_width", float(pitch))
        object.__setattr__(self, "direction", ScanDirection(self.direction))

    @property
    def n_bins(self) -> int:
        return int(self.bin_centers.size)

    @property
    def left_edge(self) -> float:
        return float(self.bin_centers[0] - 0.5 * self.bin_width)

    @property
    def edges(self) -> NDArray[np.float64]:
        return self.left_edge + self.bin_width * np.arange(self.n_bins + 1)

    @property
    def span(self) -> float:
        return self.n_bins * self.bin_width

    @property
    def duration(self) -> float:
        return self.span / self.scan_speed

    @property
    def total_counts(self) -> int:
        return int(self.counts.sum())

    def with_counts(self, counts: ArrayLike) -> LineScan:
        return LineScan(
            self.bin_centers,
            np.asarray(counts),
            self.scan_speed,
            self.power,
            self.direction,
            self.t_start,
            self.scan_id,
            self.bin_width,
        )


@dataclass(frozen=True, slots=True)
class TrajectoryEntry:
    t: float
    center: WeightedValue
    fwhm: WeightedValue | None
    scan_id: int


@dataclass(slots=True)
class Trajectory:
    """Time-ordered resonance centers (Hz) with variances (Hz^2).

    ``tau`` is the nominal time step between scans in seconds.
    """

    times: NDArray[np.float64]
    centers: NDArray[np.float64]
    variances: NDArray[np.float64]
    tau: float
    fwhms: NDArray[np.float64] | None = None
    fwhm_variances: NDArray[np.float64] | None = None
    scan_ids: NDArray[np.int64] | None = None

    def __post_init__(self) -> None:
        self.times = np.asarray(self.times, dtype=float).ravel()
        self.centers = np.asarray(self.centers, dtype=float).ravel()
        self.variances = np.broadcast_to(
            np.asarray(self.variances, dtype=float), self.centers.shape
        ).copy()
        n = self.centers.size
        if self.times.size != n:
            raise InputError("trajectory times and centers differ in length")
        if n > 1 and np.any(np.diff(self.times) <= 0):
            raise InputError("trajectory times must be strictly increasing")
        if np.any(self.variances <= 0):
            raise InputError("trajectory center variances must be > 0")
        if not (self.tau > 0):
            raise InputError(f"trajectory time step must be > 0, got {self.tau}")
        if self.scan_ids is None:
            self.scan_ids = np.arange(n, dtype=np.int64)
        else:
            self.scan_ids = np.asarray(self.scan_ids, dtype=np.int64).ravel()
        if self.fwhms is not None:
            self.fwhms = np.asarray(self.fwhms, dtype=float).ravel()
            if self.fwhm_variances is not None:
                self.fwhm_variances = np.asarray(self.fwhm_variances, dtype=float).ravel()

    def __len__(self) -> int:
        return int(self.centers.size)

    @classmethod
    def from_entries(cls, entries: Sequence[TrajectoryEntry], tau: float) -> Trajectory:
        has_fwhm = bool(entries) and all(e.fwhm is not None for e in entries)
        return cls(
            times=np.array([e.t for e in entries]),
            centers=np.array([e.center.value for e in entries]),
            variances=np.array([e.center.variance for e in entries]),
            tau=tau,
            fwhms=np.array([e.fwhm.value for e in entries if e.fwhm]) if has_fwhm else None,
            fwhm_variances=(
                np.array([e.fwhm.variance for e in entries if e.fwhm]) if has_fwhm else None
            ),
            scan_ids=np.array([e.scan_id for e in entries], dtype=np.int64),
        )

    @property
    def entries(self) -> list[TrajectoryEntry]:
        out = []
        for i in range(len(self)):
            fwhm = None
            if self.fwhms is not None and self.fwhm_variances is not None:
                fwhm = WeightedValue(float(self.fwhms[i]), float(self.fwhm_variances[i]))
            out.append(
                TrajectoryEntry(
                    t=float(self.times[i]),
                    center=WeightedValue(float(self.centers[i]), float(self.variances[i])),
                    fwhm=fwhm,
                    scan_id=int(self.scan_ids[i]),  # type: ignore[index]
                )
            )
        return out

    def shifted(self, offset: float) -> Trajectory:
        return Trajectory(
            self.times, self.centers + offset, self.variances, self.tau,
            self.fwhms, self.fwhm_variances, self.scan_ids,
        )


@dataclass(slots=True)
class ScanFit:
    """Voigt fit of one scan and the derived center and FWHM."""

    scan_id: int
    t_start: float
    direction: ScanDirection
    total_counts: int
    fit: FitResult
    voigt: VoigtParams | None
    center: WeightedValue | None
    fwhm: WeightedValue | None
    usable: bool
    low_count: bool
    reason: str = ""


@dataclass(slots=True)
class CumulativeWidth:
    """FWHM of the summed spectrum of the first k scans, k = 1..n (NaN where the fit failed)."""

    fwhm: NDArray[np.float64]
    ok: NDArray[np.bool_]
    profile: ProfileKind

    @property
    def n_failed(self) -> int:
        return int(np.count_nonzero(~self.ok))

    def increments(self) -> NDArray[np.float64]:
        """Consecutive changes between successfully fitted entries."""
        return np.diff(self.fwhm[self.ok])


def _first_row(mask: pd.Series) -> int:
    return int(np.flatnonzero(mask.to_numpy())[0])


def _format_error(message: str, row_index: int, path: Path) -> ScanFormatError:
    # header is line 1, first data row is line 2
    return ScanFormatError(message, line=int(row_index) + 2, path=str(path))


def ingest_scans(path: str | Path, policy: ScanFilterPolicy | None = None) -> list[LineScan]:
    """Read scans from a CSV file and re-bin them to ``policy.bin_width``.

    Scans are returned in order of first appearance of their ``scan_id``.

    Raises:
        ScanFormatError: on a malformed row or non-monotone frequencies, with the line number.
    """
    policy = policy or ScanFilterPolicy()
    path = Path(path)
    if not path.is_file():
        raise InputError(f"scan file not found: {path}")
    if not path.read_text(encoding="utf-8").strip():
        logger.info(f"{path} is empty")
        return []
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.EmptyDataError:
        return []
    except pd.errors.ParserError as exc:
        raise ScanFormatError(f"unreadable CSV: {exc}", path=str(path)) from exc

    frame.columns = [c.strip() for c in frame.columns]
    missing = [c for c in SCAN_COLUMNS if c not in frame.columns]
    if missing:
        raise ScanFormatError(f"missing columns {missing}", line=1, path=str(path))
    if frame.empty:
        return []

    numeric: dict[str, pd.Series] = {}
    for column in SCAN_COLUMNS:
        if column == "direction":
            continue
        values = pd.to_numeric(frame[column].str.strip(), errors="coerce")
        bad = values.isna() | ~np.isfinite(values.astype(float))
        if bad.any():
            row = _first_row(bad)
            text = frame[column].iloc[row]
            raise _format_error(f"column {column!r}: {text!r} is not a number", row, path)
        numeric[column] = values.astype(float)

    direction = frame["direction"].str.strip().str.lower()
    bad_direction = ~direction.isin([d.value for d in ScanDirection])
    if bad_direction.any():
        row = _first_row(bad_direction)
        text = frame["direction"].iloc[row]
        raise _format_error(f"direction must be 'up' or 'down', got {text!r}", row, path)
    counts = numeric["counts"]
    bad_counts = (counts < 0) | (counts % 1 != 0)
    if bad_counts.any():
        row = _first_row(bad_counts)
        text = frame["counts"].iloc[row]
        raise _format_error(f"counts must be non-negative integers, got {text!r}", row, path)
    scan_ids = numeric["scan_id"]
    if (scan_ids % 1 != 0).any():
        raise _format_error("scan_id must be an integer", _first_row(scan_ids % 1 != 0), path)

    table = pd.DataFrame(numeric)
    table["direction"] = direction
    scans: list[LineScan] = []
    for scan_id, group in table.groupby("scan_id", sort=False):
        rows = group.index.to_numpy()
        for column in _SCAN_METADATA:
            differs = group[column].to_numpy() != group[column].iloc[0]
            if differs.any():
                message = f"scan {int(scan_id)}: {column} changes within the scan"
                raise _format_error(message, rows[int(np.argmax(differs))], path)
        freqs = group["bin_center_MHz"].to_numpy()
        steps = np.diff(freqs)
        if np.any(steps <= 0):
            row = rows[int(np.argmax(steps <= 0)) + 1]
            raise _format_error(f"scan {int(scan_id)}: non-monotone frequency", row, path)
        try:
            scan = LineScan(
                bin_centers=freqs * MHZ,
                counts=group["counts"].to_numpy().astype(np.int64),
                scan_speed=float(group["scan_speed_GHz_per_s"].iloc[0]) * GHZ,
                power=float(group["power_nW"].iloc[0]) * NW,
                direction=ScanDirection(group["direction"].iloc[0]),
                t_start=float(group["t_start_s"].iloc[0]),
                scan_id=int(scan_id),
                bin_width=math.nan if freqs.size > 1 else policy.bin_width,
            )
        except InputError as exc:
            raise _format_error(str(exc), rows[0], path) from exc
        scans.append(rebin_scan(scan, policy.bin_width))

    logger.info(f"Ingested {len(scans)} scans from {path}")
    return scans


def rebin_scan(scan: LineScan, bin_width: float) -> LineScan:
    """Sum counts into left-closed bins of ``bin_width`` starting at the scan's left edge.

    Scans already at or coarser than ``bin_width`` are returned unchanged. Raw bins
    whose center falls into an incomplete trailing bin are dropped.
    """
    if bin_width <= scan.bin_width * (1.0 + 1e-9):
        return scan
    n_full = int(math.floor(scan.span / bin_width + 1e-9))
    if n_full < 1:
        raise InputError(
            f"scan {scan.scan_id}: span {scan.span / MHZ:.3f} MHz is narrower than one "
            f"{bin_width / MHZ:.3f} MHz bin"
        )
    target = np.floor((scan.bin_centers - scan.left_edge) / bin_width).astype(np.int64)
    keep = target < n_full
    counts = np.zeros(n_full, dtype=np.int64)
    np.add.at(counts, target[keep], scan.counts[keep])
    dropped = int(scan.counts[~keep].sum())
    if dropped:
        logger.warning(f"Scan {scan.scan_id}: dropped {dropped} photons in a partial trailing bin")
    centers = scan.left_edge + (np.arange(n_full) + 0.5) * bin_width
    return LineScan(
        centers,
        counts,
        scan.scan_speed,
        scan.power,
        scan.direction,
        scan.t_start,
        scan.scan_id,
        bin_width,
    )


def accept_scan(scan: LineScan, policy: ScanFilterPolicy | None = None) -> bool:
    """True when some bin holds at least ``min_photons_in_some_bin`` photons."""
    policy = policy or ScanFilterPolicy()
    return bool(scan.counts.max(initial=0) >= policy.min_photons_in_some_bin)


def fit_scan(
    scan: LineScan, tie_widths: bool = False, fwhm_mode: FwhmMode | str | None = None
) -> ScanFit:
    """Fit a Voigt line to one scan and derive its center and FWHM.

    The tied-width fit reports 3.6013 sigma by default, the free fit the Olivero width.
    A fit is unusable when it did not converge, its covariance is invalid, or
    the line is at least as wide as the scan.
    """
    if fwhm_mode is None:
        fwhm_mode = FwhmMode.LMFIT if tie_widths else FwhmMode.OLIVERO
    mode = FwhmMode(fwhm_mode)
    total = scan.total_counts
    low_count = total < LOW_COUNT_PHOTONS
    fit = fit_voigt(scan.bin_centers, scan.counts, tie_widths=tie_widths)

    def unusable(reason: str, voigt: VoigtParams | None = None) -> ScanFit:
        logger.debug(f"Scan {scan.scan_id} unusable: {reason}")
        return ScanFit(
            scan.scan_id, scan.t_start, scan.direction, total, fit, voigt, None, None,
            usable=False, low_count=low_count, reason=reason,
        )

    if not fit.converged:
        return unusable(fit.message or "fit did not converge")
    if not fit.covariance_valid:
        return unusable("invalid covariance")
    try:
        voigt = VoigtParams(fit["amplitude"], fit["center"], fit["sigma"], fit["gamma"])
    except InputError as exc:
        return unusable(str(exc))

    fwhm = voigt_fwhm(voigt, mode)
    if mode is FwhmMode.LMFIT:
        fwhm_err = TIED_VOIGT_FWHM_FACTOR * fit.stderrs["sigma"]
    else:
        fwhm_err = voigt_fwhm_stderr(voigt.sigma, voigt.gamma, fit.covariance[2:4, 2:4])
    center_err = fit.stderrs["center"]
    if fwhm >= scan.span:
        return unusable("line at least as wide as the scan", voigt)
    if not (center_err > 0 and fwhm_err > 0 and math.isfinite(center_err + fwhm_err)):
        return unusable("degenerate parameter errors", voigt)

    return ScanFit(
        scan.scan_id,
        scan.t_start,
        scan.direction,
        total,
        fit,
        voigt,
        WeightedValue.from_stderr(voigt.center, center_err),
        WeightedValue.from_stderr(fwhm, fwhm_err),
        usable=True,
        low_count=low_count,
    )


def fit_scans(
    scans: Sequence[LineScan],
    policy: ScanFilterPolicy | None = None,
    *,
    tie_widths: bool = False,
    threads: int | None = None,
) -> list[ScanFit]:
    """Fit every accepted scan; results come back in input order."""
    policy = policy or ScanFilterPolicy()
    accepted = [scan for scan in scans if accept_scan(scan, policy)]
    rejected = len(scans) - len(accepted)
    if rejected:
        logger.info(f"{rejected} of {len(scans)} scans rejected by the photon threshold")
    fits = ordered_map(partial(fit_scan, tie_widths=tie_widths), accepted, threads)
    logger.info(f"{sum(f.usable for f in fits)} of {len(fits)} accepted scans gave usable fits")
    return fits


def build_trajectory(
    fits: Iterable[ScanFit],
    direction: ScanDirection | str | None = None,
    tau: float | None = None,
) -> Trajectory:
    """Assemble the usable same-direction fits into a trajectory ordered by start time.

    ``direction`` defaults to that of the earliest usable fit; ``tau`` defaults
    to the median spacing of start times.
    """
    usable = sorted((f for f in fits if f.usable), key=lambda f: f.t_start)
    if not usable:
        raise InsufficientDataError("no usable scan fits to build a trajectory from")
    wanted = ScanDirection(direction) if direction else usable[0].direction
    chosen = [f for f in usable if f.direction is wanted]
    if not chosen:
        raise InsufficientDataError(f"no usable {wanted.value} scans")
    times = np.array([f.t_start for f in chosen])
    if tau is None:
        tau = float(np.median(np.diff(times))) if times.size > 1 else 1.0
    entries = [
        TrajectoryEntry(f.t_start, f.center, f.fwhm, f.scan_id)  # type: ignore[arg-type]
        for f in chosen
    ]
    return Trajectory.from_entries(entries, tau)


def spectral_diffusion_rate(
    traj: Trajectory,
    mode: SdrMode | str = SdrMode.ABSOLUTE,
    *,
    use_nominal_tau: bool = False,
) -> WeightedValue:
    """Spectral diffusion rate in Hz/s.

    Consecutive center differences are inverse-variance averaged and divided by
    the mean spacing of the actual scan times (or by ``traj.tau``).

    Raises:
        InsufficientDataError: for trajectories with fewer than two entries.
    """
    if len(traj) < 2:
        raise InsufficientDataError("spectral diffusion rate needs at least two scans")
    diffs = np.diff(traj.centers)
    if SdrMode(mode) is SdrMode.ABSOLUTE:
        diffs = np.abs(diffs)
    variances = traj.variances[1:] + traj.variances[:-1]
    mean_step = inverse_variance_mean(
        WeightedValue(float(d), float(v)) for d, v in zip(diffs, variances, strict=True)
    )
    dt = traj.tau if use_nominal_tau else float(np.mean(np.diff(traj.times)))
    return mean_step.scaled(1.0 / dt)


def characteristic_linewidth(fits: Iterable[ScanFit]) -> WeightedValue:
    """Inverse-variance mean of the single-scan FWHMs of usable fits."""
    return inverse_variance_mean(f.fwhm for f in fits if f.usable and f.fwhm is not None)


def _common_grid(
    scans: Sequence[LineScan],
) -> tuple[NDArray[np.float64], list[NDArray[np.float64]]]:
    """Return bin centers shared by all scans and each scan's counts on them."""
    first = scans[0]
    tolerance = 1e-6 * first.bin_width
    if all(
        s.n_bins == first.n_bins
        and np.allclose(s.bin_centers, first.bin_centers, rtol=0, atol=tolerance)
        for s in scans
    ):
        return first.bin_centers, [s.counts.astype(float) for s in scans]
    pitch = min(s.bin_width for s in scans)
    lo = min(s.left_edge for s in scans)
    hi = max(s.left_edge + s.span for s in scans)
    n = int(math.ceil((hi - lo) / pitch - 1e-9))
    edges = lo + pitch * np.arange(n + 1)
    resampled = []
    for s in scans:
        cumulative = np.concatenate([[0.0], np.cumsum(s.counts, dtype=float)])
        resampled.append(np.diff(np.interp(edges, s.edges, cumulative)))
    return edges[:-1] + 0.5 * pitch, resampled


def cumulative_inhomogeneous(
    traj_scans: Sequence[LineScan],
    profile: ProfileKind | str = ProfileKind.GAUSSIAN,
    upto: int | None = None,
) -> CumulativeWidth:
    """Fit the summed spectrum of scans 1..k for k = 1..upto and collect the FWHMs.

    Scans on different grids are resampled by count-conserving interpolation of
    their cumulative counts. Failed fits are recorded as NaN and the series continues.
    """
    if not traj_scans:
        raise InsufficientDataError("no scans to accumulate")
    profile = ProfileKind(profile)
    upto = len(traj_scans) if upto is None else max(1, min(upto, len(traj_scans)))
    centers, counts = _common_grid(traj_scans[:upto])
    total = np.zeros_like(centers)
    fwhm = np.full(upto, np.nan)
    for k in range(upto):
        total = total + counts[k]
        if profile is ProfileKind.GAUSSIAN:
            fit = fit_gaussian(centers, total)
            width = GAUSSIAN_FWHM_FACTOR * fit.params["sigma"]
        else:
            fit = fit_voigt(centers, total)
            width = olivero_fwhm(fit.params["sigma"], fit.params["gamma"])
        if fit.converged:
            fwhm[k] = width
        else:
            logger.warning(f"Cumulative fit of the first {k + 1} scans failed: {fit.message}")
    return CumulativeWidth(fwhm=fwhm, ok=np.isfinite(fwhm), profile=profile)


def postselect_trajectories(
    trajs: Mapping[K, CumulativeWidth | ArrayLike],
    jump_threshold: float = DEFAULT_JUMP_THRESHOLD,
) -> tuple[dict[K, Any], dict[K, Any]]:
    """Split trajectories into (kept, rejected) by their cumulative-FWHM jumps.

    A trajectory is rejected when any line-to-line increase of its cumulative
    FWHM exceeds ``jump_threshold``.
    """
    kept: dict[K, Any] = {}
    rejected: dict[K, Any] = {}
    for key, series in trajs.items():
        if isinstance(series, CumulativeWidth):
            steps = series.increments()
        else:
            values = np.asarray(series, dtype=float)
            steps = np.diff(values[np.isfinite(values)])
        if steps.size and float(np.max(steps)) > jump_threshold:
            rejected[key] = series
        else:
            kept[key] = series
    logger.info(f"Post-selection kept {len(kept)} of {len(kept) + len(rejected)} trajectories")
    return kept, rejected


def on_resonance_time(linewidth: float, scan_speed: float) -> float:
    """Time per sweep the laser spends within ``linewidth`` of the line."""
    if scan_speed <= 0:
        raise InputError("scan speed must be > 0")
    if linewidth < 0:
        raise InputError("linewidth must be >= 0")
    return linewidth / scan_speed


def duty_cycle(
    linewidth: float,
    scan_speed: float,
    scan_span: float,
    turnaround: float = 0.0,
    directions_used: int = 1,
) -> float:
    """Fraction of the scan cycle spent on resonance."""
    if scan_span <= 0 or turnaround < 0 or directions_used < 1:
        raise InputError("duty cycle needs span > 0, turnaround >= 0 and at least one direction")
    on = on_resonance_time(linewidth, scan_speed)
    cycle = directions_used * (scan_span / scan_speed) + directions_used * turnaround
    return on / cycle


def resonance_dwell_diffusion(dwell: float, sdr: float) -> float:
    """Diffusion accumulated while dwelling on resonance for ``dwell`` seconds at ``sdr`` Hz/s."""
    if dwell < 0 or sdr < 0:
        raise InputError("dwell time and diffusion rate must be >= 0")
    return dwell * sdr


def scan_fit_table(fits: Iterable[ScanFit]) -> pd.DataFrame:
    rows = []
    for f in fits:
        rows.append(
            {
                "scan_id": f.scan_id,
                "center_MHz": f.center.value / MHZ if f.center else math.nan,
                "center_err_MHz": f.center.stderr / MHZ if f.center else math.nan,
                "fwhm_MHz": f.fwhm.value / MHZ if f.fwhm else math.nan,
                "fwhm_err_MHz": f.fwhm.stderr / MHZ if f.fwhm else math.nan,
                "t_start_s": f.t_start,
                "direction": f.direction.value,
                "total_counts": f.total_counts,
                "usable": f.usable,
                "low_count": f.low_count,
            }
        )
    columns = [
        "scan_id", "center_MHz", "center_err_MHz", "fwhm_MHz", "fwhm_err_MHz",
        "t_start_s", "direction", "total_counts", "usable", "low_count",
    ]
    return pd.DataFrame(rows, columns=columns)


def trajectory_summary_table(
    sdr: WeightedValue, traj: Trajectory, mode: SdrMode | str = SdrMode.ABSOLUTE
) -> pd.DataFrame:
    return pd.DataFrame(
        [
            {
                "sdr_MHz_per_s": sdr.value / MHZ,
                "sdr_err": sdr.stderr / MHZ,
                "n_scans": len(traj),
                "mode": SdrMode(mode).value,
                "tau_s": traj.tau,
            }
        ]
    )


def cumulative_table(series: CumulativeWidth) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "k": np.arange(1, series.fwhm.size + 1),
            "fwhm_MHz": series.fwhm / MHZ,
            "ok": series.ok,
        }
    )
