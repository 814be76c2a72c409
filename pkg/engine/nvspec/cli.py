"""Command-line entry point: ``nvspec <command> [options]``.

Every command resolves a ``RunConfig`` from defaults, an optional JSON file
(``--config``, which may also be a previous ``manifest.json``) and flags, in
that order, writes its tables and a ``result.json`` into the output directory,
and echoes the resolved configuration into ``manifest.json``.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from collections.abc import Callable, Sequence
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from . import __version__
from .charge_mc import (
    McRunSpec,
    SweepAxis,
    TrapLayout,
    build_layout,
    calibrate_coupling,
    calibrate_timestep,
    linewidth_from_shifts,
    realization_shifts,
    run_manifest,
    sdr_from_shifts,
    sweep,
)
from .config import settings
from .constants import (
    ANCHOR_BULK_CHARGES,
    ANCHOR_FWHM,
    ANCHOR_SDR,
    DEFAULT_STARK_SCALE,
    DEFAULT_SURFACE_TRAPS,
    MHZ,
    NW,
    UNDERFLOW_BIN_CAP,
)
from .cylfield import PillarGeometry, StarkCoupling
from .diffusion import (
    WienerSpec,
    ensemble_inhomogeneous,
    ensemble_table,
    ou_trajectory,
    sdr_analytic,
    trajectory_table,
)
from .errors import ConfigurationError, InputError, NvSpecError
from .fitkit import fit_power_law
from .linewidth_mc import (
    LinewidthHistogram,
    ScanGenSpec,
    estimate_linewidth,
    simulate_linewidth_histogram,
)
from .parallel import close_executor
from .persistence import OutputFormat, write_json, write_manifest, write_table
from .ple import (
    ProfileKind,
    ScanDirection,
    ScanFilterPolicy,
    SdrMode,
    build_trajectory,
    characteristic_linewidth,
    cumulative_inhomogeneous,
    cumulative_table,
    fit_scans,
    ingest_scans,
    scan_fit_table,
    spectral_diffusion_rate,
    trajectory_summary_table,
)
from .protocol import (
    EmitterParams,
    ProtocolTiming,
    asymptotic_rate,
    attempt_rate,
    attempts_until_broadening,
    average_pulse_power,
    cw_ionization_time,
    pi_pulse_power,
    purcell_sweep,
)

logger = logging.getLogger(__name__)

_OBSERVATION_KEY = (1 << 20,)


class PleOptions(BaseModel):
    model_config = ConfigDict(frozen=True)

    input: Path | None = None
    policy: ScanFilterPolicy = ScanFilterPolicy()
    tie_widths: bool = False
    direction: ScanDirection | None = None
    sdr_mode: SdrMode = SdrMode.ABSOLUTE
    use_nominal_tau: bool = False
    profile: ProfileKind = ProfileKind.GAUSSIAN


class LinewidthOptions(BaseModel):
    """Observed linewidths come from ``fits`` (a scan-fit table) or are simulated."""

    model_config = ConfigDict(frozen=True)

    fits: Path | None = None
    observed_gamma: float | None = Field(default=None, gt=0, description="Hz")
    observed_photons: float = Field(default=10.0, ge=0)
    observed_scans: int = Field(default=100, ge=1)
    gamma_grid: list[float] | None = None
    n_grid: list[float] | None = None
    template: ScanGenSpec = ScanGenSpec(
        true_gamma=28 * MHZ, mean_photons=10.0, span=2000 * MHZ, n_iterations=200
    )
    policy: ScanFilterPolicy = ScanFilterPolicy()
    underflow_bin_cap: float = Field(default=UNDERFLOW_BIN_CAP, ge=0)


class WienerOptions(BaseModel):
    model_config = ConfigDict(frozen=True)

    sigma: float = Field(default=46e6, ge=0, description="Hz/sqrt(s)")
    tau: float = Field(default=0.8, gt=0, description="s")
    n_steps: int = Field(default=1000, ge=1)
    omega0: float = 0.0
    reversion_rate: float = Field(default=0.0, ge=0, description="1/s")

    def spec(self) -> WienerSpec:
        return WienerSpec(
            sigma=self.sigma, tau=self.tau, n_steps=self.n_steps, omega0=self.omega0
        )


class EnsembleOptions(BaseModel):
    model_config = ConfigDict(frozen=True)

    sdr: float = Field(default=41 * MHZ, ge=0, description="Hz/s")
    tau: float = Field(default=0.8, gt=0, description="s")
    n_steps: int = Field(default=200, ge=1)
    n_lines: int = Field(default=14, ge=2)
    line_fwhm: float = Field(default=60 * MHZ, gt=0, description="Hz")
    n_ensembles: int = Field(default=10, ge=1)

    def spec(self) -> WienerSpec:
        # invert sdr = sigma * sqrt(2 / (pi * tau))
        sigma = self.sdr * math.sqrt(math.pi * self.tau / 2.0)
        return WienerSpec(sigma=sigma, tau=self.tau, n_steps=self.n_steps)


class ChargeOptions(BaseModel):
    model_config = ConfigDict(frozen=True)

    run: McRunSpec = McRunSpec(n_bulk_charges=ANCHOR_BULK_CHARGES)
    geometry: PillarGeometry = PillarGeometry()
    bulk_density_ppm: float = Field(default=1.0, ge=0)
    n_surface_traps: int = Field(default=DEFAULT_SURFACE_TRAPS, ge=0)
    layout_seed: int = 0
    coupling_scale: float = Field(default=DEFAULT_STARK_SCALE, gt=0, description="g, Hz/(V/m)")
    calibrate: bool = True
    target_fwhm: float = Field(default=ANCHOR_FWHM, gt=0, description="Hz")
    calibrate_timestep: bool = False
    target_sdr: float = Field(default=ANCHOR_SDR, gt=0, description="Hz/s")


class SweepOptions(BaseModel):
    model_config = ConfigDict(frozen=True)

    axis: SweepAxis = SweepAxis.BULK_CHARGES
    values: list[float] = [250, 500, 1000, 2000, 4000]
    n_realizations: int = Field(default=1000, ge=2)


class ProtocolOptions(BaseModel):
    model_config = ConfigDict(frozen=True)

    emitter: EmitterParams = EmitterParams()
    timing: ProtocolTiming = ProtocolTiming()
    purcell_factors: list[float] | None = None
    p_values: list[float] | None = None
    rep_rate: float = Field(default=500e3, ge=0, description="pi-pulse repetition rate, Hz")
    t_ion_ple: float = Field(default=272.7, gt=0, description="s")
    ple_duty: float = Field(default=0.002, gt=0, le=1)


class RunConfig(BaseModel):
    """Fully resolved configuration of one command."""

    model_config = ConfigDict(frozen=True)

    master_seed: int = Field(default_factory=lambda: settings.seed)
    threads: int | None = Field(default_factory=lambda: settings.threads)
    output_dir: Path = Field(default_factory=lambda: settings.output_dir)
    format: OutputFormat = "csv"
    ple: PleOptions = PleOptions()
    linewidth: LinewidthOptions = LinewidthOptions()
    wiener: WienerOptions = WienerOptions()
    ensemble: EnsembleOptions = EnsembleOptions()
    charges: ChargeOptions = ChargeOptions()
    sweep: SweepOptions = SweepOptions()
    protocol: ProtocolOptions = ProtocolOptions()


def _deep_merge(base: dict[str, Any], overrides: dict[str, Any]) -> dict[str, Any]:
    merged = dict(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def _set(target: dict[str, Any], dotted: str, value: Any) -> None:
    """Set ``target[a][b][c] = value`` for ``dotted == "a.b.c"`` unless ``value`` is None."""
    if value is None:
        return
    *parents, leaf = dotted.split(".")
    node = target
    for key in parents:
        node = node.setdefault(key, {})
    node[leaf] = value


def _scaled(value: Any, factor: float) -> Any:
    if value is None:
        return None
    if isinstance(value, list):
        return [v * factor for v in value]
    return value * factor


def load_config_file(path: Path) -> dict[str, Any]:
    """Read a JSON run configuration or the ``config`` block of a manifest."""
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise InputError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path}: a run configuration must be a JSON object")
    if isinstance(data.get("config"), dict):
        data = data["config"]
    return data


def _common_overrides(args: argparse.Namespace) -> dict[str, Any]:
    overrides: dict[str, Any] = {}
    _set(overrides, "master_seed", args.seed)
    _set(overrides, "threads", args.threads)
    _set(overrides, "output_dir", args.output_dir)
    _set(overrides, "format", args.format)
    return overrides


def _ple_overrides(args: argparse.Namespace) -> dict[str, Any]:
    o: dict[str, Any] = {}
    _set(o, "ple.input", args.input)
    _set(o, "ple.policy.bin_width", _scaled(args.bin_width_mhz, MHZ))
    _set(o, "ple.policy.min_photons_in_some_bin", args.min_photons)
    _set(o, "ple.tie_widths", True if args.tie_widths else None)
    _set(o, "ple.direction", args.direction)
    _set(o, "ple.sdr_mode", args.sdr_mode)
    _set(o, "ple.use_nominal_tau", True if args.nominal_tau else None)
    _set(o, "ple.profile", args.profile)
    return o


def _linewidth_overrides(args: argparse.Namespace) -> dict[str, Any]:
    o: dict[str, Any] = {}
    _set(o, "linewidth.fits", args.fits)
    _set(o, "linewidth.observed_gamma", _scaled(args.observed_gamma_mhz, MHZ))
    _set(o, "linewidth.observed_photons", args.observed_photons)
    _set(o, "linewidth.observed_scans", args.observed_scans)
    _set(o, "linewidth.gamma_grid", _scaled(args.gamma_grid_mhz, MHZ))
    _set(o, "linewidth.n_grid", args.n_grid)
    _set(o, "linewidth.template.span", _scaled(args.span_mhz, MHZ))
    _set(o, "linewidth.template.noise_mean", args.noise_mean)
    _set(o, "linewidth.template.n_iterations", args.iterations)
    _set(o, "linewidth.template.bin_width", _scaled(args.bin_width_mhz, MHZ))
    _set(o, "linewidth.policy.bin_width", _scaled(args.bin_width_mhz, MHZ))
    return o


def _wiener_overrides(args: argparse.Namespace) -> dict[str, Any]:
    o: dict[str, Any] = {}
    _set(o, "wiener.sigma", _scaled(args.sigma_mhz, MHZ))
    _set(o, "wiener.tau", args.tau_s)
    _set(o, "wiener.n_steps", args.steps)
    _set(o, "wiener.omega0", _scaled(args.omega0_mhz, MHZ))
    _set(o, "wiener.reversion_rate", args.reversion_rate)
    return o


def _ensemble_overrides(args: argparse.Namespace) -> dict[str, Any]:
    o: dict[str, Any] = {}
    _set(o, "ensemble.sdr", _scaled(args.sdr_mhz_per_s, MHZ))
    _set(o, "ensemble.tau", args.tau_s)
    _set(o, "ensemble.n_steps", args.steps)
    _set(o, "ensemble.n_lines", args.lines)
    _set(o, "ensemble.line_fwhm", _scaled(args.line_fwhm_mhz, MHZ))
    _set(o, "ensemble.n_ensembles", args.ensembles)
    return o


def _charge_overrides(args: argparse.Namespace) -> dict[str, Any]:
    o: dict[str, Any] = {}
    _set(o, "charges.run.n_bulk_charges", args.bulk_charges)
    _set(o, "charges.run.n_surface_charges", args.surface_charges)
    _set(o, "charges.run.n_realizations", args.realizations)
    _set(o, "charges.run.line_fwhm", _scaled(args.line_fwhm_mhz, MHZ))
    _set(o, "charges.run.include_correction", True if args.correction else None)
    _set(o, "charges.run.tau_adhoc", args.tau_s)
    _set(o, "charges.geometry.radius", _scaled(args.radius_nm, 1e-9))
    _set(o, "charges.bulk_density_ppm", args.trap_density_ppm)
    _set(o, "charges.n_surface_traps", args.surface_traps)
    _set(o, "charges.calibrate", False if args.no_calibrate else None)
    _set(o, "charges.target_fwhm", _scaled(args.target_fwhm_mhz, MHZ))
    _set(o, "charges.calibrate_timestep", True if args.calibrate_timestep else None)
    _set(o, "charges.target_sdr", _scaled(args.target_sdr_mhz_per_s, MHZ))
    return o


def _sweep_overrides(args: argparse.Namespace) -> dict[str, Any]:
    o = _charge_overrides(args)
    _set(o, "sweep.axis", args.axis)
    values = args.values
    if values is not None and args.axis == SweepAxis.RADIUS.value:
        values = _scaled(values, 1e-9)
    _set(o, "sweep.values", values)
    _set(o, "sweep.n_realizations", args.realizations)
    return o


def _protocol_overrides(args: argparse.Namespace) -> dict[str, Any]:
    o: dict[str, Any] = {}
    _set(o, "protocol.purcell_factors", args.purcell)
    _set(o, "protocol.p_values", args.p)
    _set(o, "protocol.emitter.natural_linewidth", _scaled(args.natural_linewidth_mhz, MHZ))
    _set(o, "protocol.emitter.saturation_power", _scaled(args.power_nw, NW))
    _set(o, "protocol.timing.t_pi", _scaled(args.t_pi_ns, 1e-9))
    _set(o, "protocol.timing.sdr_pulse", _scaled(args.sdr_mhz_per_s, MHZ))
    _set(o, "protocol.timing.tau_ref", args.tau_s)
    return o


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Defaults < ``--config`` file < command-line flags."""
    data = RunConfig().model_dump(mode="json")
    if args.config is not None:
        data = _deep_merge(data, load_config_file(Path(args.config)))
    overrides = _deep_merge(_common_overrides(args), args.overrides(args))
    return RunConfig.model_validate(_deep_merge(data, overrides))


def _finish(config: RunConfig, command: str, result: dict[str, Any], **extra: Any) -> None:
    out = config.output_dir
    write_json(result, out / "result.json")
    write_manifest(config, out, command=command, version=__version__, **extra)


def cmd_analyze_ple(config: RunConfig) -> None:
    opts = config.ple
    if opts.input is None:
        raise ConfigurationError("analyze-ple needs an input scan file")
    scans = ingest_scans(opts.input, opts.policy)
    if not scans:
        raise InputError(f"no scans in {opts.input}")
    fits = fit_scans(scans, opts.policy, tie_widths=opts.tie_widths, threads=config.threads)
    if not fits:
        raise InputError(f"no scans in {opts.input} pass the photon threshold")
    out, fmt = config.output_dir, config.format
    write_table(scan_fit_table(fits), out, "scan_fits", fmt)

    traj = build_trajectory(fits, opts.direction)
    by_id = {scan.scan_id: scan for scan in scans}
    traj_scans = [by_id[i] for i in traj.scan_ids]
    cumulative = cumulative_inhomogeneous(traj_scans, opts.profile)
    write_table(cumulative_table(cumulative), out, "cumulative_linewidth", fmt)

    result: dict[str, Any] = {
        "n_scans": len(scans),
        "n_fitted": len(fits),
        "n_usable": sum(f.usable for f in fits),
        "n_bins": [scan.n_bins for scan in scans],
        "bin_width_MHz": opts.policy.bin_width / MHZ,
        "direction": traj_scans[0].direction,
    }
    if len(traj) >= 2:
        sdr = spectral_diffusion_rate(traj, opts.sdr_mode, use_nominal_tau=opts.use_nominal_tau)
        write_table(trajectory_summary_table(sdr, traj, opts.sdr_mode), out, "trajectory", fmt)
        result["sdr_MHz_per_s"] = sdr.value / MHZ
        result["sdr_err_MHz_per_s"] = sdr.stderr / MHZ
    else:
        logger.warning("Fewer than two usable scans; no diffusion rate")
    linewidth = characteristic_linewidth(fits)
    result["characteristic_fwhm_MHz"] = linewidth.value / MHZ
    result["characteristic_fwhm_err_MHz"] = linewidth.stderr / MHZ
    _finish(config, "analyze-ple", result)


def _observed_histogram(config: RunConfig) -> LinewidthHistogram:
    opts = config.linewidth
    if opts.fits is not None:
        try:
            table = pd.read_csv(opts.fits)
        except FileNotFoundError as exc:
            raise InputError(f"fit table not found: {opts.fits}") from exc
        if "fwhm_MHz" not in table.columns:
            raise InputError(f"{opts.fits}: missing column fwhm_MHz")
        if "usable" in table.columns:
            table = table[table["usable"].astype(bool)]
        values = table["fwhm_MHz"].to_numpy(dtype=float) * MHZ
        return LinewidthHistogram.from_values(
            values[np.isfinite(values)], underflow_bin_cap=opts.underflow_bin_cap
        )
    if opts.observed_gamma is None:
        raise ConfigurationError("give a fit table or an observed gamma to simulate")
    spec = opts.template.at(opts.observed_gamma, opts.observed_photons).model_copy(
        update={"n_iterations": opts.observed_scans}
    )
    return simulate_linewidth_histogram(
        spec,
        opts.policy,
        config.master_seed,
        key=_OBSERVATION_KEY,
        threads=config.threads,
        underflow_bin_cap=opts.underflow_bin_cap,
    )


def cmd_estimate_linewidth(config: RunConfig) -> None:
    opts = config.linewidth
    observed = _observed_histogram(config)
    estimate = estimate_linewidth(
        observed,
        opts.gamma_grid,
        opts.n_grid,
        opts.template,
        opts.policy,
        master_seed=config.master_seed,
        threads=config.threads,
    )
    grid = pd.DataFrame(
        [
            {"gamma_MHz": g / MHZ, "n": n, "S": float(estimate.s_grid[i, j])}
            for i, g in enumerate(estimate.gamma_grid)
            for j, n in enumerate(estimate.n_grid)
        ],
        columns=["gamma_MHz", "n", "S"],
    )
    write_table(grid, config.output_dir, "chi2_grid", config.format)
    _finish(config, "estimate-linewidth", estimate.as_dict())


def cmd_simulate_wiener(config: RunConfig) -> None:
    opts = config.wiener
    traj = ou_trajectory(opts.spec(), opts.reversion_rate, config.master_seed)
    write_table(trajectory_table(traj), config.output_dir, "trajectory", config.format)
    steps = np.abs(np.diff(traj.centers))
    result = {
        "sdr_empirical_MHz_per_s": float(np.mean(steps)) / opts.tau / MHZ,
        "sdr_analytic_MHz_per_s": sdr_analytic(opts.sigma, opts.tau) / MHZ,
        "n_steps": opts.n_steps,
    }
    _finish(config, "simulate wiener", result)


def cmd_simulate_ensemble(config: RunConfig) -> None:
    opts = config.ensemble
    width = ensemble_inhomogeneous(
        opts.spec(),
        opts.n_lines,
        opts.line_fwhm,
        opts.n_ensembles,
        master_seed=config.master_seed,
        threads=config.threads,
    )
    write_table(ensemble_table(width), config.output_dir, "ensemble", config.format)
    result: dict[str, Any] = {"n_dropped": width.n_dropped, "late_exponent": None}
    late = slice(width.times.size // 2, None)
    t, f = width.times[late], width.mean_fwhm[late]
    ok = np.isfinite(f) & (t > 0)
    if np.count_nonzero(ok) >= 3:
        fit = fit_power_law(t[ok], f[ok], with_offset=False)
        if fit.converged:
            result["late_exponent"] = fit.params["a"]
    _finish(config, "simulate ensemble", result)


def _layout(config: RunConfig) -> TrapLayout:
    opts = config.charges
    return build_layout(
        opts.geometry, opts.bulk_density_ppm, opts.n_surface_traps, opts.layout_seed
    )


def _coupling(config: RunConfig, layout: TrapLayout) -> tuple[StarkCoupling, dict[str, Any]]:
    opts = config.charges
    coupling = StarkCoupling.from_raw(g=opts.coupling_scale)
    notes: dict[str, Any] = {"coupling_calibrated": False}
    if opts.calibrate:
        anchor = opts.run.model_copy(
            update={"n_bulk_charges": ANCHOR_BULK_CHARGES, "n_surface_charges": 0}
        )
        calibration = calibrate_coupling(
            layout,
            anchor,
            coupling,
            opts.target_fwhm,
            master_seed=config.master_seed,
            threads=config.threads,
        )
        coupling = calibration.coupling
        notes = {
            "coupling_calibrated": calibration.converged,
            "coupling_factor": calibration.factor,
        }
    return coupling, notes


def _tau(config: RunConfig, layout: Any, coupling: StarkCoupling) -> tuple[float | None, str]:
    opts = config.charges
    if opts.run.tau_adhoc is not None:
        return opts.run.tau_adhoc, "configured"
    if not opts.calibrate_timestep:
        return None, "none"
    timestep = calibrate_timestep(
        layout,
        opts.run,
        coupling,
        opts.target_sdr,
        opts.target_fwhm,
        master_seed=config.master_seed,
        threads=config.threads,
    )
    # surface-only runs reuse the bulk-calibrated time step
    return timestep.tau_adhoc, f"calibrated at {timestep.n_bulk_charges} bulk charges"


def cmd_simulate_charges(config: RunConfig) -> None:
    opts = config.charges
    layout = _layout(config)
    coupling, notes = _coupling(config, layout)
    tau, tau_source = _tau(config, layout, coupling)
    shifts = realization_shifts(
        layout, opts.run, coupling, master_seed=config.master_seed, threads=config.threads
    )
    result_fit = linewidth_from_shifts(shifts, opts.run.line_fwhm, opts.run.bin_width)
    table = pd.DataFrame({"realization": np.arange(shifts.size), "shift_MHz": shifts / MHZ})
    write_table(table, config.output_dir, "shifts", config.format)
    result: dict[str, Any] = {
        "fwhm_MHz": result_fit.fwhm / MHZ,
        "fwhm_err_MHz": result_fit.fwhm_err / MHZ,
        "rmse": result_fit.rmse,
        "n_realizations": result_fit.n_realizations,
        "tau_adhoc_s": tau,
        "sdr_MHz_per_s": None,
    }
    if tau is not None:
        result["sdr_MHz_per_s"] = sdr_from_shifts(shifts, tau).sdr / MHZ
    manifest = run_manifest(
        opts.run, layout, coupling, config.master_seed, tau_source=tau_source, **notes
    )
    _finish(config, "simulate charges", result, charge_run=manifest)


def cmd_simulate_sweep(config: RunConfig) -> None:
    opts = config.charges
    layout = _layout(config)
    coupling, notes = _coupling(config, layout)
    tau, tau_source = _tau(config, layout, coupling)
    run = opts.run.model_copy(
        update={"n_realizations": config.sweep.n_realizations, "tau_adhoc": tau}
    )
    table = sweep(
        layout,
        config.sweep.axis,
        config.sweep.values,
        run,
        coupling,
        master_seed=config.master_seed,
        threads=config.threads,
    )
    write_table(table, config.output_dir, "sweep", config.format)
    result = {
        "axis": config.sweep.axis,
        "n_points": len(table),
        "n_failed": int((~table["ok"].astype(bool)).sum()) if len(table) else 0,
    }
    manifest = run_manifest(
        run, layout, coupling, config.master_seed, tau_source=tau_source, **notes
    )
    _finish(config, "simulate sweep", result, charge_run=manifest)


def cmd_protocol(config: RunConfig) -> None:
    opts = config.protocol
    factors = opts.purcell_factors or [opts.emitter.purcell]
    ps = opts.p_values or [opts.timing.p_broadening]
    emitter = EmitterParams.model_validate({**opts.emitter.model_dump(), "purcell": factors[0]})
    timing = ProtocolTiming.model_validate({**opts.timing.model_dump(), "p_broadening": ps[0]})

    p_pi = pi_pulse_power(emitter, timing.t_pi)
    budget = attempts_until_broadening(emitter, timing)
    rate = attempt_rate(emitter, timing)
    table = purcell_sweep(emitter, timing, factors, ps)
    write_table(table, config.output_dir, "purcell_sweep", config.format)
    result = {
        "pi_pulse_power_uW": p_pi / 1e-6,
        "average_power_nW": average_pulse_power(p_pi, timing.t_pi, opts.rep_rate) / NW,
        "cw_ionization_time_ms": cw_ionization_time(opts.t_ion_ple, opts.ple_duty) * 1e3,
        "t_p_s": budget.t_p,
        "n_p": budget.n_p,
        "n_p_exact": budget.n_p_exact,
        "n_ion": rate.n_ion,
        "rate_kHz": rate.rate / 1e3,
        "asymptotic_rate_kHz": asymptotic_rate(timing) / 1e3,
        "inputs": {"emitter": emitter, "timing": timing},
    }
    _finish(config, "protocol", result)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="JSON run configuration or manifest.json")
    parser.add_argument("--seed", type=int, help="master seed (default: NVSPEC_SEED or 0)")
    parser.add_argument("--threads", type=int, help="worker processes (default: all CPUs)")
    parser.add_argument("--output-dir", type=Path, help="directory for tables and manifest")
    parser.add_argument("--format", choices=("csv", "json"), help="table format")
    parser.add_argument("--log-level", help="logging level (default: NVSPEC_LOG_LEVEL or INFO)")


def _add_charge_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--bulk-charges", type=int)
    parser.add_argument("--surface-charges", type=int)
    parser.add_argument("--realizations", type=int)
    parser.add_argument("--line-fwhm-mhz", type=float)
    parser.add_argument("--correction", action="store_true", help="add the polarization term")
    parser.add_argument("--tau-s", type=float, help="ad hoc time step between configurations")
    parser.add_argument("--radius-nm", type=float)
    parser.add_argument("--trap-density-ppm", type=float)
    parser.add_argument("--surface-traps", type=int)
    parser.add_argument("--no-calibrate", action="store_true", help="keep the raw coupling")
    parser.add_argument("--target-fwhm-mhz", type=float)
    parser.add_argument("--calibrate-timestep", action="store_true")
    parser.add_argument("--target-sdr-mhz-per-s", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nvspec",
        description="Spectral diffusion analysis and simulation for NV centers in nanopillars.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    ple = commands.add_parser("analyze-ple", help="fit PLE scans and measure diffusion")
    _add_common(ple)
    ple.add_argument("input", type=Path, nargs="?", help="scan CSV file")
    ple.add_argument("--bin-width-mhz", type=float)
    ple.add_argument("--min-photons", type=int, help="photons required in some bin")
    ple.add_argument("--tie-widths", action="store_true")
    ple.add_argument("--direction", choices=[d.value for d in ScanDirection])
    ple.add_argument("--sdr-mode", choices=[m.value for m in SdrMode])
    ple.add_argument("--nominal-tau", action="store_true")
    ple.add_argument("--profile", choices=[p.value for p in ProfileKind])
    ple.set_defaults(handler=cmd_analyze_ple, overrides=_ple_overrides)

    lw = commands.add_parser("estimate-linewidth", help="Monte Carlo linewidth estimate")
    _add_common(lw)
    lw.add_argument("--fits", type=Path, help="scan-fit table with a fwhm_MHz column")
    lw.add_argument("--observed-gamma-mhz", type=float, help="simulate the observation")
    lw.add_argument("--observed-photons", type=float)
    lw.add_argument("--observed-scans", type=int)
    lw.add_argument("--gamma-grid-mhz", type=float, nargs="+")
    lw.add_argument("--n-grid", type=float, nargs="+")
    lw.add_argument("--span-mhz", type=float)
    lw.add_argument("--noise-mean", type=float)
    lw.add_argument("--iterations", type=int, help="synthetic scans per grid point")
    lw.add_argument("--bin-width-mhz", type=float)
    lw.set_defaults(handler=cmd_estimate_linewidth, overrides=_linewidth_overrides)

    sim = commands.add_parser("simulate", help="diffusion and charge-environment simulations")
    kinds = sim.add_subparsers(dest="kind", required=True)

    wiener = kinds.add_parser("wiener", help="single diffusion trajectory")
    _add_common(wiener)
    wiener.add_argument("--sigma-mhz", type=float, help="diffusion strength, MHz/sqrt(s)")
    wiener.add_argument("--tau-s", type=float)
    wiener.add_argument("--steps", type=int)
    wiener.add_argument("--omega0-mhz", type=float)
    wiener.add_argument("--reversion-rate", type=float, help="1/s, 0 for a Wiener process")
    wiener.set_defaults(handler=cmd_simulate_wiener, overrides=_wiener_overrides)

    ensemble = kinds.add_parser("ensemble", help="inhomogeneous width of diffusing lines")
    _add_common(ensemble)
    ensemble.add_argument("--sdr-mhz-per-s", type=float)
    ensemble.add_argument("--tau-s", type=float)
    ensemble.add_argument("--steps", type=int)
    ensemble.add_argument("--lines", type=int)
    ensemble.add_argument("--line-fwhm-mhz", type=float)
    ensemble.add_argument("--ensembles", type=int)
    ensemble.set_defaults(handler=cmd_simulate_ensemble, overrides=_ensemble_overrides)

    charges = kinds.add_parser("charges", help="charge-environment broadening")
    _add_common(charges)
    _add_charge_flags(charges)
    charges.set_defaults(handler=cmd_simulate_charges, overrides=_charge_overrides)

    sweep_cmd = kinds.add_parser("sweep", help="charge-environment parameter sweep")
    _add_common(sweep_cmd)
    _add_charge_flags(sweep_cmd)
    sweep_cmd.add_argument("--axis", choices=[a.value for a in SweepAxis])
    sweep_cmd.add_argument(
        "--values", type=float, nargs="+", help="counts, ppm, or nm for the radius axis"
    )
    sweep_cmd.set_defaults(handler=cmd_simulate_sweep, overrides=_sweep_overrides)

    proto = commands.add_parser("protocol", help="entanglement attempt budget")
    _add_common(proto)
    proto.add_argument("--purcell", type=float, nargs="+")
    proto.add_argument("--p", type=float, nargs="+", help="tolerated broadening fraction")
    proto.add_argument("--natural-linewidth-mhz", type=float)
    proto.add_argument("--power-nw", type=float, help="saturation power")
    proto.add_argument("--t-pi-ns", type=float)
    proto.add_argument("--sdr-mhz-per-s", type=float)
    proto.add_argument("--tau-s", type=float)
    proto.set_defaults(handler=cmd_protocol, overrides=_protocol_overrides)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=(args.log_level or settings.log_level).upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    handler: Callable[[RunConfig], None] = args.handler
    try:
        config = resolve_config(args)
        handler(config)
    except ValidationError as exc:
        print(f"error: invalid configuration\n{exc}", file=sys.stderr)
        return InputError.exit_code
    except NvSpecError as exc:
        logger.debug("command failed", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    finally:
        close_executor()
    return 0


if __name__ == "__main__":
    sys.exit(main())
