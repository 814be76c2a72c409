"""Monte Carlo model of a fluctuating charge environment around an NV in a nanopillar.

Traps are scattered through the pillar volume and over its lateral surface.
Each realization occupies a random subset of traps with equal numbers of +1 e
and -1 e, and the NV line shifts by the Stark response to their summed field.
Lorentzian lines at those shifts build the inhomogeneous spectrum; differences
between consecutive realizations give a spectral diffusion rate once a time
step is fixed.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np
import pandas as pd
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .constants import (
    ANCHOR_BULK_CHARGES,
    ANCHOR_FWHM,
    ANCHOR_SDR,
    DEFAULT_BIN_WIDTH,
    DEFAULT_HEIGHT,
    DEFAULT_RADIUS,
    DEFAULT_SURFACE_TRAPS,
    MHZ,
    NATURAL_LINEWIDTH,
    TRAPS_PER_PPM_DEFAULT_PILLAR,
)
from .cylfield import (
    PillarGeometry,
    QuadratureSpec,
    StarkBranch,
    StarkCoupling,
    stark_shift,
    to_nv_frame,
    unit_fields,
)
from .errors import (
    CapacityError,
    ConfigurationError,
    FitFailedError,
    InputError,
    NvSpecError,
    RangeError,
)
from .fitkit import fit_voigt
from .parallel import chunk_ranges, ordered_map, stream
from .specfun import lorentzian_pdf, olivero_fwhm, voigt_fwhm_stderr

logger = logging.getLogger(__name__)

_REALIZATION_CHUNK = 256
_SPECTRUM_CHUNK = 1000
_MAD_TO_SIGMA = 1.4826
_WINDOW_SIGMAS = 6.0
_WINDOW_LINES = 20.0

_DEFAULT_VOLUME = math.pi * DEFAULT_RADIUS**2 * DEFAULT_HEIGHT

Seed = int | np.random.Generator


class SweepAxis(str, Enum):
    BULK_CHARGES = "bulk_charges"
    SURFACE_CHARGES = "surface_charges"
    TRAP_DENSITY = "trap_density"
    RADIUS = "radius"


class McRunSpec(BaseModel):
    """Charge counts and spectrum settings for one Monte Carlo run."""

    model_config = ConfigDict(frozen=True)

    n_bulk_charges: int = Field(default=0, ge=0)
    n_surface_charges: int = Field(default=0, ge=0)
    n_realizations: int = Field(default=10000, ge=2)
    line_fwhm: float = Field(default=NATURAL_LINEWIDTH, gt=0, description="Hz")
    include_correction: bool = False
    tau_adhoc: float | None = Field(default=None, gt=0, description="s")
    bin_width: float = Field(default=DEFAULT_BIN_WIDTH, gt=0, description="Hz")

    @model_validator(mode="after")
    def _neutral_counts(self) -> McRunSpec:
        if self.n_bulk_charges % 2 or self.n_surface_charges % 2:
            raise ValueError("charge counts must be even for global neutrality")
        return self

    @property
    def n_charges(self) -> int:
        return self.n_bulk_charges + self.n_surface_charges


@dataclass(slots=True)
class TrapLayout:
    """Trap positions as (rho, phi, z) rows relative to the NV, in m and rad."""

    geometry: PillarGeometry
    bulk: NDArray[np.float64]
    surface: NDArray[np.float64]
    seed: int = 0
    bulk_density_ppm: float = 1.0
    _fields: dict[bool, NDArray[np.float64]] = field(default_factory=dict, repr=False)

    @property
    def n_bulk_traps(self) -> int:
        return int(self.bulk.shape[0])

    @property
    def n_surface_traps(self) -> int:
        return int(self.surface.shape[0])

    @property
    def positions(self) -> NDArray[np.float64]:
        return np.vstack([self.bulk.reshape(-1, 3), self.surface.reshape(-1, 3)])

    def unit_fields(
        self, include_correction: bool = False, quad: QuadratureSpec | None = None
    ) -> NDArray[np.float64]:
        """NV-frame field of +1 e on every trap (bulk first), computed once per flag."""
        if include_correction not in self._fields:
            positions = self.positions
            logger.debug(
                f"Computing unit fields for {positions.shape[0]} traps "
                f"(correction={include_correction})"
            )
            lab = unit_fields(positions, self.geometry, include_correction, quad)
            self._fields[include_correction] = to_nv_frame(lab, self.geometry).reshape(-1, 3)
        return self._fields[include_correction]


@dataclass(frozen=True, slots=True)
class ChargeConfig:
    """Occupied trap indices (into ``TrapLayout.positions``) and their charges."""

    indices: NDArray[np.int64]
    signs: NDArray[np.int64]

    def __post_init__(self) -> None:
        indices = np.asarray(self.indices, dtype=np.int64).ravel()
        signs = np.asarray(self.signs, dtype=np.int64).ravel()
        if indices.shape != signs.shape:
            raise InputError("every occupied trap needs one sign")
        if np.unique(indices).size != indices.size:
            raise InputError("occupied trap indices must be distinct")
        if not np.all(np.abs(signs) == 1):
            raise InputError("trap charges must be +1 or -1")
        if int(signs.sum()) != 0:
            raise InputError("charge configuration must be neutral")
        object.__setattr__(self, "indices", indices)
        object.__setattr__(self, "signs", signs)

    @classmethod
    def empty(cls) -> ChargeConfig:
        return cls(np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64))

    @property
    def n_charges(self) -> int:
        return int(self.indices.size)

    def conjugate(self) -> ChargeConfig:
        return ChargeConfig(self.indices, -self.signs)


@dataclass(slots=True)
class InhomogeneousResult:
    fwhm: float
    fwhm_err: float
    rmse: float
    shifts: NDArray[np.float64]
    n_realizations: int
    params: dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True, slots=True)
class ConvergencePoint:
    n_realizations: int
    fwhm: float
    rmse: float


@dataclass(slots=True)
class SdrResult:
    sdr: float
    shifts_diff: NDArray[np.float64]
    tau: float


@dataclass(frozen=True, slots=True)
class TimestepCalibration:
    tau_adhoc: float
    n_bulk_charges: int
    fwhm: float
    mean_abs_diff: float


@dataclass(frozen=True, slots=True)
class CouplingCalibration:
    coupling: StarkCoupling
    fwhm: float
    factor: float
    iterations: int
    converged: bool


@dataclass(frozen=True, slots=True)
class SweepPoint:
    axis: SweepAxis
    axis_value: float
    n_bulk: int
    n_surface: int
    fwhm: float
    fwhm_err: float
    sdr: float
    rmse: float
    seed: int
    ok: bool


def _rng(seed: Seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def bulk_trap_count(geometry: PillarGeometry, bulk_density_ppm: float) -> int:
    """Traps for ``bulk_density_ppm``, anchored so 1 ppm in the default pillar is 13800."""
    scale = geometry.volume / _DEFAULT_VOLUME
    return int(round(bulk_density_ppm * TRAPS_PER_PPM_DEFAULT_PILLAR * scale))


def build_layout(
    geometry: PillarGeometry | None = None,
    bulk_density_ppm: float = 1.0,
    n_surface: int = DEFAULT_SURFACE_TRAPS,
    seed: int = 0,
) -> TrapLayout:
    """Scatter bulk traps uniformly through the pillar and surface traps over its side."""
    geometry = geometry or PillarGeometry()
    if bulk_density_ppm < 0 or not math.isfinite(bulk_density_ppm):
        raise InputError(f"trap density must be >= 0, got {bulk_density_ppm}")
    if n_surface < 0:
        raise InputError(f"surface trap count must be >= 0, got {n_surface}")
    n_bulk = bulk_trap_count(geometry, bulk_density_ppm)
    R, h = geometry.radius, geometry.height

    rng = stream(seed, 0)
    bulk = np.column_stack(
        [
            R * np.sqrt(rng.uniform(0.0, 1.0, n_bulk)),
            rng.uniform(0.0, 2.0 * math.pi, n_bulk),
            rng.uniform(-h / 2.0, h / 2.0, n_bulk),
        ]
    )
    rng = stream(seed, 1)
    surface = np.column_stack(
        [
            np.full(n_surface, R),
            rng.uniform(0.0, 2.0 * math.pi, n_surface),
            rng.uniform(-h / 2.0, h / 2.0, n_surface),
        ]
    )
    logger.info(f"Placed {n_bulk} bulk and {n_surface} surface traps (seed {seed})")
    return TrapLayout(geometry, bulk, surface, seed, bulk_density_ppm)


def _neutral_signs(n: int) -> NDArray[np.int64]:
    return np.concatenate([np.ones(n // 2, dtype=np.int64), -np.ones(n // 2, dtype=np.int64)])


def sample_config(layout: TrapLayout, spec: McRunSpec, seed: Seed) -> ChargeConfig:
    """Occupy distinct random traps, half positive and half negative, in bulk and on surface.

    Raises:
        CapacityError: if more charges than traps are requested.
    """
    if spec.n_bulk_charges > layout.n_bulk_traps:
        raise CapacityError(
            f"{spec.n_bulk_charges} bulk charges exceed {layout.n_bulk_traps} bulk traps"
        )
    if spec.n_surface_charges > layout.n_surface_traps:
        raise CapacityError(
            f"{spec.n_surface_charges} surface charges exceed "
            f"{layout.n_surface_traps} surface traps"
        )
    if spec.n_charges == 0:
        return ChargeConfig.empty()
    rng = _rng(seed)
    bulk = rng.choice(layout.n_bulk_traps, size=spec.n_bulk_charges, replace=False)
    surface = layout.n_bulk_traps + rng.choice(
        layout.n_surface_traps, size=spec.n_surface_charges, replace=False
    )
    return ChargeConfig(
        np.concatenate([bulk, surface]).astype(np.int64),
        np.concatenate([_neutral_signs(bulk.size), _neutral_signs(surface.size)]),
    )


def config_field(
    config: ChargeConfig, layout: TrapLayout, include_correction: bool = False
) -> NDArray[np.float64]:
    """NV-frame field of ``config``, summed in index order."""
    if config.n_charges == 0:
        return np.zeros(3)
    fields = layout.unit_fields(include_correction)[config.indices]
    return (config.signs[:, None] * fields).sum(axis=0)


def config_shift(
    config: ChargeConfig,
    layout: TrapLayout,
    coupling: StarkCoupling,
    include_correction: bool = False,
) -> float:
    """Minus-branch Stark shift (Hz) of the occupied charges."""
    return float(
        stark_shift(config_field(config, layout, include_correction), coupling, StarkBranch.MINUS)
    )


def _shift_chunk(
    job: tuple[TrapLayout, McRunSpec, StarkCoupling, int, int, int],
) -> NDArray[np.float64]:
    layout, spec, coupling, master_seed, start, stop = job
    fields = np.empty((stop - start, 3))
    for i, r in enumerate(range(start, stop)):
        config = sample_config(layout, spec, stream(master_seed, r))
        fields[i] = config_field(config, layout, spec.include_correction)
    return np.asarray(stark_shift(fields, coupling, StarkBranch.MINUS), dtype=float).reshape(-1)


def realization_shifts(
    layout: TrapLayout,
    spec: McRunSpec,
    coupling: StarkCoupling,
    *,
    master_seed: int = 0,
    threads: int | None = None,
) -> NDArray[np.float64]:
    """Shift of every realization; realization r draws from stream (master_seed, r)."""
    if spec.n_charges == 0:
        return np.zeros(spec.n_realizations)
    layout.unit_fields(spec.include_correction)
    jobs = [
        (layout, spec, coupling, master_seed, start, stop)
        for start, stop in chunk_ranges(spec.n_realizations, _REALIZATION_CHUNK)
    ]
    return np.concatenate(ordered_map(_shift_chunk, jobs, threads))


def shift_spectrum(
    shifts: ArrayLike, line_fwhm: float, bin_width: float = DEFAULT_BIN_WIDTH
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Peak-normalized sum of Lorentzians at ``shifts`` on a grid around their median.

    The half window is max(6 sigma, 20 line widths) with sigma the normal-consistent
    median absolute deviation of the shifts.
    """
    values = np.asarray(shifts, dtype=float)
    center = float(np.median(values))
    sigma = _MAD_TO_SIGMA * float(np.median(np.abs(values - center)))
    half = max(_WINDOW_SIGMAS * sigma, _WINDOW_LINES * line_fwhm)
    n = int(math.ceil(half / bin_width))
    grid = center + bin_width * np.arange(-n, n + 1)
    spectrum = np.zeros_like(grid)
    for start in range(0, values.size, _SPECTRUM_CHUNK):
        chunk = values[start : start + _SPECTRUM_CHUNK]
        spectrum += lorentzian_pdf(grid[:, None], 1.0, chunk[None, :], 0.5 * line_fwhm).sum(axis=1)
    return grid, spectrum / spectrum.max()


def linewidth_from_shifts(
    shifts: ArrayLike, line_fwhm: float, bin_width: float = DEFAULT_BIN_WIDTH
) -> InhomogeneousResult:
    """Voigt FWHM and relative RMSE of the spectrum built from ``shifts``.

    Raises:
        FitFailedError: when the Voigt fit fails; ``details`` carries shift statistics.
    """
    values = np.asarray(shifts, dtype=float)
    if values.size < 2:
        raise InputError("need at least two realizations for a spectrum")
    grid, spectrum = shift_spectrum(values, line_fwhm, bin_width)
    fit = fit_voigt(grid, spectrum)
    if not fit.converged:
        details = {
            "mean": float(values.mean()),
            "std": float(values.std(ddof=1)),
            "median": float(np.median(values)),
            "n_realizations": int(values.size),
        }
        raise FitFailedError(
            f"Voigt fit of the shift spectrum failed: {fit.message}", details=details
        )
    sigma, gamma = fit.params["sigma"], fit.params["gamma"]
    fwhm = olivero_fwhm(sigma, gamma)
    err = voigt_fwhm_stderr(sigma, gamma, fit.covariance[2:4, 2:4])
    return InhomogeneousResult(
        fwhm=fwhm,
        fwhm_err=err,
        rmse=fit.rmse,
        shifts=values,
        n_realizations=int(values.size),
        params=dict(fit.params),
    )


def inhomogeneous_linewidth(
    layout: TrapLayout,
    spec: McRunSpec,
    coupling: StarkCoupling,
    *,
    master_seed: int = 0,
    threads: int | None = None,
) -> InhomogeneousResult:
    """Inhomogeneous FWHM of lifetime-limited lines centered on each realization's shift."""
    shifts = realization_shifts(layout, spec, coupling, master_seed=master_seed, threads=threads)
    result = linewidth_from_shifts(shifts, spec.line_fwhm, spec.bin_width)
    logger.info(
        f"{spec.n_bulk_charges} bulk / {spec.n_surface_charges} surface charges: "
        f"FWHM {result.fwhm / MHZ:.1f} MHz over {spec.n_realizations} realizations"
    )
    return result


def realization_convergence(
    layout: TrapLayout,
    spec: McRunSpec,
    coupling: StarkCoupling,
    checkpoints: Sequence[int],
    *,
    master_seed: int = 0,
    threads: int | None = None,
) -> list[ConvergencePoint]:
    """FWHM and fit RMSE on growing prefixes of one realization stream."""
    counts = [int(c) for c in checkpoints]
    if not counts:
        raise InputError("need at least one checkpoint")
    if counts[0] < 2 or any(b <= a for a, b in zip(counts, counts[1:])):
        raise InputError("checkpoints must be increasing and at least 2")
    run = spec.model_copy(update={"n_realizations": counts[-1]})
    shifts = realization_shifts(layout, run, coupling, master_seed=master_seed, threads=threads)
    points = []
    for n in counts:
        result = linewidth_from_shifts(shifts[:n], spec.line_fwhm, spec.bin_width)
        points.append(ConvergencePoint(n, result.fwhm, result.rmse))
    return points


def sdr_from_shifts(shifts: ArrayLike, tau: float | None) -> SdrResult:
    """Mean absolute shift difference between consecutive realizations divided by ``tau``."""
    if tau is None:
        raise ConfigurationError("SDR needs tau_adhoc; calibrate the time step first")
    if tau <= 0:
        raise InputError(f"time step must be > 0, got {tau}")
    diff = np.diff(np.asarray(shifts, dtype=float))
    return SdrResult(float(np.mean(np.abs(diff))) / tau, diff, tau)


def sdr_between_configs(
    layout: TrapLayout,
    spec: McRunSpec,
    coupling: StarkCoupling,
    *,
    master_seed: int = 0,
    threads: int | None = None,
) -> SdrResult:
    """SDR between consecutive independent configurations.

    Raises:
        ConfigurationError: if ``spec.tau_adhoc`` is not set.
    """
    if spec.tau_adhoc is None:
        raise ConfigurationError("SDR needs tau_adhoc; calibrate the time step first")
    shifts = realization_shifts(layout, spec, coupling, master_seed=master_seed, threads=threads)
    return sdr_from_shifts(shifts, spec.tau_adhoc)


def calibrate_timestep(
    layout: TrapLayout,
    spec: McRunSpec,
    coupling: StarkCoupling,
    target_sdr: float = ANCHOR_SDR,
    target_fwhm: float = ANCHOR_FWHM,
    *,
    master_seed: int = 0,
    threads: int | None = None,
) -> TimestepCalibration:
    """Time step at which the bulk charge count matching ``target_fwhm`` gives ``target_sdr``.

    Bisects over even bulk charge counts; every count uses the same realization
    streams, then divides the mean absolute shift difference by the target SDR.

    Raises:
        RangeError: if the FWHM target is out of reach with the available traps.
    """
    if target_sdr <= 0 or target_fwhm <= 0:
        raise InputError("calibration targets must be > 0")
    if spec.line_fwhm >= target_fwhm:
        raise RangeError("the FWHM target is below the lifetime-limited linewidth")
    base = spec.model_copy(update={"n_surface_charges": 0})

    def evaluate(pairs: int) -> tuple[InhomogeneousResult, NDArray[np.float64]]:
        run = base.model_copy(update={"n_bulk_charges": 2 * pairs})
        shifts = realization_shifts(layout, run, coupling, master_seed=master_seed, threads=threads)
        return linewidth_from_shifts(shifts, run.line_fwhm, run.bin_width), shifts

    lo, hi = 0, layout.n_bulk_traps // 2
    top, _ = evaluate(hi)
    if top.fwhm < target_fwhm:
        raise RangeError(
            f"{2 * hi} bulk charges reach only {top.fwhm / MHZ:.0f} MHz, "
            f"below the {target_fwhm / MHZ:.0f} MHz target"
        )
    while hi - lo > 1:
        mid = (lo + hi) // 2
        result, _ = evaluate(mid)
        if result.fwhm < target_fwhm:
            lo = mid
        else:
            hi = mid
    candidates = [evaluate(p) + (p,) for p in (lo, hi)]
    best, shifts, pairs = min(candidates, key=lambda c: abs(c[0].fwhm - target_fwhm))
    mean_abs = float(np.mean(np.abs(np.diff(shifts))))
    tau = mean_abs / target_sdr
    logger.info(
        f"Time step {tau:.4g} s at {2 * pairs} bulk charges "
        f"(FWHM {best.fwhm / MHZ:.0f} MHz, mean |dshift| {mean_abs / MHZ:.1f} MHz)"
    )
    return TimestepCalibration(tau, 2 * pairs, best.fwhm, mean_abs)


def calibrate_coupling(
    layout: TrapLayout,
    spec: McRunSpec,
    coupling: StarkCoupling,
    target_fwhm: float = ANCHOR_FWHM,
    *,
    master_seed: int = 0,
    threads: int | None = None,
    rtol: float = 1e-3,
    max_iterations: int = 30,
) -> CouplingCalibration:
    """Scale the effective couplings until ``spec`` reproduces ``target_fwhm``.

    Shifts are linear in the couplings, so the realizations are drawn once and
    only rescaled between fixed-point steps.
    """
    if target_fwhm <= spec.line_fwhm:
        raise RangeError("the FWHM target must exceed the lifetime-limited linewidth")
    if spec.n_charges == 0:
        raise RangeError("a run without charges cannot be calibrated")
    shifts = realization_shifts(layout, spec, coupling, master_seed=master_seed, threads=threads)
    if not np.any(shifts):
        raise RangeError("the charge configuration produces no shift to scale")
    factor = 1.0
    fwhm = math.nan
    for iteration in range(1, max_iterations + 1):
        fwhm = linewidth_from_shifts(factor * shifts, spec.line_fwhm, spec.bin_width).fwhm
        if abs(fwhm - target_fwhm) <= rtol * target_fwhm:
            logger.info(f"Coupling scaled by {factor:.5g} after {iteration} steps")
            return CouplingCalibration(coupling.scaled(factor), fwhm, factor, iteration, True)
        factor *= (target_fwhm - spec.line_fwhm) / max(fwhm - spec.line_fwhm, 1e-12 * target_fwhm)
    logger.warning(f"Coupling calibration stopped at FWHM {fwhm / MHZ:.1f} MHz")
    return CouplingCalibration(coupling.scaled(factor), fwhm, factor, max_iterations, False)


def default_calibration_spec(n_realizations: int = 1000) -> McRunSpec:
    return McRunSpec(n_bulk_charges=ANCHOR_BULK_CHARGES, n_realizations=n_realizations)


def _sweep_point(
    axis: SweepAxis,
    value: float,
    layout: TrapLayout,
    spec: McRunSpec,
    coupling: StarkCoupling,
    master_seed: int,
    threads: int | None,
) -> SweepPoint:
    run, point_layout = spec, layout
    if axis is SweepAxis.BULK_CHARGES:
        run = spec.model_copy(update={"n_bulk_charges": int(value)})
    elif axis is SweepAxis.SURFACE_CHARGES:
        run = spec.model_copy(update={"n_surface_charges": int(value)})
    elif axis is SweepAxis.TRAP_DENSITY:
        point_layout = build_layout(
            layout.geometry, float(value), layout.n_surface_traps, layout.seed
        )
    else:
        geometry = layout.geometry.model_copy(update={"radius": float(value)})
        n_surface = int(round(layout.n_surface_traps * value / layout.geometry.radius))
        point_layout = build_layout(geometry, layout.bulk_density_ppm, n_surface, layout.seed)

    fwhm = fwhm_err = rmse = sdr = math.nan
    ok = True
    try:
        shifts = realization_shifts(
            point_layout, run, coupling, master_seed=master_seed, threads=threads
        )
        result = linewidth_from_shifts(shifts, run.line_fwhm, run.bin_width)
        fwhm, fwhm_err, rmse = result.fwhm, result.fwhm_err, result.rmse
        if run.tau_adhoc is not None:
            sdr = sdr_from_shifts(shifts, run.tau_adhoc).sdr
    except NvSpecError as exc:
        logger.warning(f"Sweep point {axis.value}={value:g} failed: {exc}")
        ok = False
    return SweepPoint(
        axis=axis,
        axis_value=float(value),
        n_bulk=run.n_bulk_charges,
        n_surface=run.n_surface_charges,
        fwhm=fwhm,
        fwhm_err=fwhm_err,
        sdr=sdr,
        rmse=rmse,
        seed=master_seed,
        ok=ok,
    )


def sweep(
    layout: TrapLayout,
    axis: SweepAxis | str,
    values: Iterable[float],
    spec: McRunSpec,
    coupling: StarkCoupling,
    *,
    master_seed: int = 0,
    threads: int | None = None,
) -> pd.DataFrame:
    """FWHM (and SDR when ``spec.tau_adhoc`` is set) for each value along ``axis``.

    Radius sweeps keep the bulk ppm and the surface trap areal density; density
    sweeps re-place the bulk traps. Failed points are kept with ``ok`` False.
    """
    axis = SweepAxis(axis)
    points = [
        _sweep_point(axis, v, layout, spec, coupling, master_seed, threads) for v in values
    ]
    return sweep_table(points)


_SWEEP_COLUMNS = [
    "axis_value",
    "n_bulk",
    "n_surface",
    "fwhm_MHz",
    "fwhm_err_MHz",
    "sdr_MHz_per_s",
    "rmse",
    "seed",
    "ok",
]


def sweep_table(points: Iterable[SweepPoint]) -> pd.DataFrame:
    rows = [
        {
            "axis_value": p.axis_value,
            "n_bulk": p.n_bulk,
            "n_surface": p.n_surface,
            "fwhm_MHz": p.fwhm / MHZ,
            "fwhm_err_MHz": p.fwhm_err / MHZ,
            "sdr_MHz_per_s": p.sdr / MHZ,
            "rmse": p.rmse,
            "seed": p.seed,
            "ok": p.ok,
        }
        for p in points
    ]
    return pd.DataFrame(rows, columns=_SWEEP_COLUMNS)


def convergence_table(points: Iterable[ConvergencePoint]) -> pd.DataFrame:
    return pd.DataFrame(
        [
            {"n_realizations": p.n_realizations, "fwhm_MHz": p.fwhm / MHZ, "rmse": p.rmse}
            for p in points
        ],
        columns=["n_realizations", "fwhm_MHz", "rmse"],
    )


def run_manifest(
    spec: McRunSpec,
    layout: TrapLayout,
    coupling: StarkCoupling,
    master_seed: int,
    **extra: Any,
) -> dict[str, Any]:
    """Everything needed to reproduce a charge run."""
    return {
        "spec": spec.model_dump(),
        "geometry": layout.geometry.model_dump(),
        "layout": {
            "seed": layout.seed,
            "bulk_density_ppm": layout.bulk_density_ppm,
            "n_bulk_traps": layout.n_bulk_traps,
            "n_surface_traps": layout.n_surface_traps,
        },
        "coupling": {
            "k_parallel": coupling.k_parallel,
            "k_perp": coupling.k_perp,
            "k_ground": coupling.k_ground,
            "g": coupling.g,
        },
        "master_seed": master_seed,
        **extra,
    }
