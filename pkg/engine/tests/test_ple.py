from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import pytest
from conftest import gaussian_counts, make_scan, scan_rows, write_scan_csv

from nvspec.constants import GAUSSIAN_FWHM_FACTOR
from nvspec.diffusion import WienerSpec, sdr_analytic, wiener_trajectory
from nvspec.errors import InputError, InsufficientDataError, ScanFormatError
from nvspec.fitkit import fit_gaussian
from nvspec.ple import (
    CumulativeWidth,
    ProfileKind,
    ScanDirection,
    ScanFilterPolicy,
    SdrMode,
    Trajectory,
    accept_scan,
    build_trajectory,
    cumulative_inhomogeneous,
    duty_cycle,
    fit_scan,
    fit_scans,
    ingest_scans,
    on_resonance_time,
    postselect_trajectories,
    rebin_scan,
    resonance_dwell_diffusion,
    scan_fit_table,
    spectral_diffusion_rate,
)
from nvspec.specfun import VoigtParams, voigt_fwhm, voigt_pdf

MHZ = 1e6


def _trajectory(centers_mhz: list[float], times: list[float] | None = None) -> Trajectory:
    times = times if times is not None else [2.0 * i for i in range(len(centers_mhz))]
    return Trajectory(times, np.array(centers_mhz) * MHZ, (0.5 * MHZ) ** 2, tau=2.0)


# ingestion


def test_empty_file_gives_no_scans(tmp_path: Path) -> None:
    empty = tmp_path / "empty.csv"
    empty.write_text("", encoding="utf-8")
    header_only = write_scan_csv(tmp_path / "header.csv", [])
    assert ingest_scans(empty) == []
    assert ingest_scans(header_only) == []


def test_missing_file(tmp_path: Path) -> None:
    with pytest.raises(InputError):
        ingest_scans(tmp_path / "nope.csv")


def test_well_formed_scan_keeps_total_counts(tmp_path: Path) -> None:
    counts = [0, 1, 3, 7, 12, 7, 2, 1, 0, 0]
    path = write_scan_csv(tmp_path / "scan.csv", scan_rows(4, 1.5, counts))
    (scan,) = ingest_scans(path)
    assert scan.scan_id == 4
    assert scan.total_counts == sum(counts)
    assert scan.bin_width == pytest.approx(4 * MHZ)
    assert scan.scan_speed == pytest.approx(5.88e9)
    assert scan.power == pytest.approx(5e-9)
    assert scan.direction is ScanDirection.UP


def test_fine_bins_are_summed_in_groups_of_four(tmp_path: Path) -> None:
    counts = [1, 2, 3, 4, 5, 6, 7, 8]
    path = write_scan_csv(tmp_path / "fine.csv", scan_rows(0, 0.0, counts, pitch_mhz=1.0))
    (scan,) = ingest_scans(path)
    assert scan.counts.tolist() == [10, 26]
    np.testing.assert_allclose(scan.bin_centers, [2 * MHZ, 6 * MHZ])


def test_scans_keep_order_of_first_appearance(tmp_path: Path) -> None:
    rows = scan_rows(7, 0.0, [1, 4, 1]) + scan_rows(2, 1.0, [0, 5, 0], direction="down")
    scans = ingest_scans(write_scan_csv(tmp_path / "two.csv", rows))
    assert [s.scan_id for s in scans] == [7, 2]
    assert scans[1].direction is ScanDirection.DOWN


def test_malformed_row_reports_line_number(tmp_path: Path) -> None:
    rows = scan_rows(0, 0.0, [1, 2, 3])
    rows[1][-1] = "many"
    path = write_scan_csv(tmp_path / "bad.csv", rows)
    with pytest.raises(ScanFormatError) as excinfo:
        ingest_scans(path)
    assert excinfo.value.line == 3
    assert ":3:" in str(excinfo.value)


def test_negative_counts_are_a_format_error(tmp_path: Path) -> None:
    rows = scan_rows(0, 0.0, [1, 2, 3])
    rows[2][-1] = -1
    with pytest.raises(ScanFormatError) as excinfo:
        ingest_scans(write_scan_csv(tmp_path / "neg.csv", rows))
    assert excinfo.value.line == 4


def test_non_monotone_frequency_is_a_format_error(tmp_path: Path) -> None:
    rows = scan_rows(0, 0.0, [1, 2, 3, 4])
    rows[2][5], rows[3][5] = rows[3][5], rows[2][5]
    with pytest.raises(ScanFormatError, match="non-monotone"):
        ingest_scans(write_scan_csv(tmp_path / "swap.csv", rows))


def test_missing_column_is_reported_on_header_line(tmp_path: Path) -> None:
    path = tmp_path / "short.csv"
    path.write_text("scan_id,counts\n0,1\n", encoding="utf-8")
    with pytest.raises(ScanFormatError) as excinfo:
        ingest_scans(path)
    assert excinfo.value.line == 1


# binning and acceptance


def test_rebin_conserves_counts_and_drops_partial_bin() -> None:
    scan = make_scan([1, 2, 3, 4, 5, 6, 7, 8, 9], pitch=1 * MHZ)
    coarse = rebin_scan(scan, 4 * MHZ)
    assert coarse.counts.tolist() == [10, 26]
    assert coarse.bin_width == pytest.approx(4 * MHZ)
    even = make_scan(np.arange(12), pitch=1 * MHZ)
    assert rebin_scan(even, 4 * MHZ).total_counts == even.total_counts


def test_scan_validation() -> None:
    with pytest.raises(InputError):
        make_scan([1, -2, 3])
    with pytest.raises(InputError):
        make_scan([1, 2, 3], scan_speed=0.0)


def test_accept_scan_threshold() -> None:
    assert not accept_scan(make_scan([0, 0, 0, 0]))
    assert accept_scan(make_scan([0, 1, 3, 1]))
    assert not accept_scan(make_scan([0, 2, 2, 1]))
    assert accept_scan(make_scan([0, 2, 2, 1]), ScanFilterPolicy(min_photons_in_some_bin=2))


def test_acceptance_is_monotone_in_added_photons() -> None:
    rng = np.random.default_rng(9)
    policy = ScanFilterPolicy()
    for _ in range(50):
        counts = rng.poisson(0.8, 20)
        extra = rng.poisson(0.5, 20)
        if accept_scan(make_scan(counts), policy):
            assert accept_scan(make_scan(counts + extra), policy)


# single-scan fits


def test_fit_scan_recovers_fwhm_of_dense_voigt_scan() -> None:
    truth = VoigtParams(amplitude=1e6 * 4 * MHZ, center=200 * MHZ, sigma=6 * MHZ, gamma=5 * MHZ)
    centers = 4 * MHZ * (np.arange(100) + 0.5)
    counts = np.rint(voigt_pdf(centers, truth)).astype(np.int64)
    result = fit_scan(make_scan(counts))
    assert result.usable
    assert not result.low_count
    assert result.fwhm is not None and result.center is not None
    assert result.fwhm.value == pytest.approx(voigt_fwhm(truth), rel=5e-3)
    assert result.center.value == pytest.approx(200 * MHZ, rel=1e-3)


def test_low_count_scan_is_flagged() -> None:
    counts = np.zeros(40, dtype=int)
    counts[18:23] = [2, 3, 5, 3, 2]
    result = fit_scan(make_scan(counts))
    assert result.total_counts == 15
    assert result.low_count


def test_flat_background_is_not_usable() -> None:
    result = fit_scan(make_scan(np.full(40, 5)))
    assert not result.usable
    assert result.fwhm is None


def test_fit_scans_skips_rejected_scans_and_keeps_order() -> None:
    line = gaussian_counts(60, 120 * MHZ, 10 * MHZ, 2000)
    scans = [
        make_scan(line, scan_id=3),
        make_scan(np.zeros(60, dtype=int), scan_id=4),
        make_scan(line, scan_id=5),
    ]
    fits = fit_scans(scans, threads=1)
    assert [f.scan_id for f in fits] == [3, 5]
    table = scan_fit_table(fits)
    assert list(table.columns[:5]) == [
        "scan_id", "center_MHz", "center_err_MHz", "fwhm_MHz", "fwhm_err_MHz",
    ]
    assert table["usable"].all()


def test_trajectory_uses_one_direction_only() -> None:
    line = gaussian_counts(60, 120 * MHZ, 10 * MHZ, 2000)
    scans = [
        make_scan(line, scan_id=0, t_start=0.0),
        make_scan(line, scan_id=1, t_start=1.0, direction=ScanDirection.DOWN),
        make_scan(line, scan_id=2, t_start=2.0),
    ]
    traj = build_trajectory(fit_scans(scans, threads=1))
    assert traj.scan_ids.tolist() == [0, 2]
    assert traj.tau == pytest.approx(2.0)


# diffusion rate


def test_sdr_of_constant_centers_is_zero() -> None:
    sdr = spectral_diffusion_rate(_trajectory([100.0, 100.0, 100.0, 100.0]))
    assert sdr.value == pytest.approx(0.0, abs=1e-9)


def test_sdr_worked_example() -> None:
    sdr = spectral_diffusion_rate(_trajectory([300.0, 310.0, 304.0]), SdrMode.ABSOLUTE)
    assert sdr.value == pytest.approx(4 * MHZ)


def test_sdr_signed_mode_keeps_drift_direction() -> None:
    sdr = spectral_diffusion_rate(_trajectory([300.0, 310.0, 304.0]), SdrMode.SIGNED)
    assert sdr.value == pytest.approx(1 * MHZ)


def test_sdr_uses_actual_times_unless_nominal_requested() -> None:
    traj = _trajectory([0.0, 8.0, 16.0], times=[0.0, 4.0, 8.0])
    assert spectral_diffusion_rate(traj).value == pytest.approx(2 * MHZ)
    assert spectral_diffusion_rate(traj, use_nominal_tau=True).value == pytest.approx(4 * MHZ)


def test_absolute_sdr_is_offset_and_time_reversal_invariant() -> None:
    rng = np.random.default_rng(4)
    centers = np.cumsum(rng.normal(0, 20, 30))
    traj = _trajectory(list(centers))
    base = spectral_diffusion_rate(traj).value
    assert spectral_diffusion_rate(traj.shifted(3e9)).value == pytest.approx(base, rel=1e-9)
    assert spectral_diffusion_rate(_trajectory(list(centers[::-1]))).value == pytest.approx(
        base, rel=1e-12
    )


def test_sdr_needs_two_scans() -> None:
    with pytest.raises(InsufficientDataError):
        spectral_diffusion_rate(_trajectory([1.0]))


def test_sdr_of_wiener_trajectory_matches_closed_form() -> None:
    spec = WienerSpec(sigma=100 * MHZ, tau=1.0, n_steps=10_000)
    traj = wiener_trajectory(spec, seed=21)
    sdr = spectral_diffusion_rate(traj)
    assert sdr.value == pytest.approx(sdr_analytic(spec.sigma, spec.tau), rel=0.03)


# cumulative linewidth and post-selection


def test_cumulative_first_entry_is_single_scan_width() -> None:
    counts = gaussian_counts(60, 120 * MHZ, 12 * MHZ, 3000)
    scan = make_scan(counts)
    series = cumulative_inhomogeneous([scan, scan])
    single = fit_gaussian(scan.bin_centers, scan.counts)
    assert series.fwhm[0] == pytest.approx(GAUSSIAN_FWHM_FACTOR * single["sigma"], rel=1e-9)


def test_cumulative_width_of_identical_scans_is_constant() -> None:
    scan = make_scan(gaussian_counts(60, 120 * MHZ, 12 * MHZ, 3000))
    series = cumulative_inhomogeneous([scan] * 5, ProfileKind.GAUSSIAN)
    assert series.ok.all()
    np.testing.assert_allclose(series.fwhm, series.fwhm[0], rtol=1e-5)
    voigt = cumulative_inhomogeneous([scan] * 3, ProfileKind.VOIGT)
    np.testing.assert_allclose(voigt.fwhm, voigt.fwhm[0], rtol=1e-3)


def test_cumulative_width_grows_with_a_distant_scan() -> None:
    first = make_scan(gaussian_counts(80, 140 * MHZ, 10 * MHZ, 3000))
    second = make_scan(gaussian_counts(80, 200 * MHZ, 10 * MHZ, 3000))
    series = cumulative_inhomogeneous([first, second], upto=2)
    assert series.fwhm[1] > series.fwhm[0]


def test_cumulative_resamples_shifted_grids() -> None:
    a = make_scan(gaussian_counts(60, 120 * MHZ, 12 * MHZ, 3000))
    b = make_scan(gaussian_counts(60, 120 * MHZ, 12 * MHZ, 3000), start=8 * MHZ)
    series = cumulative_inhomogeneous([a, b])
    assert series.ok.all()


def test_postselection() -> None:
    gentle = np.array([30, 50, 100, 150, 200]) * MHZ
    jump = np.array([30, 330, 340]) * MHZ
    kept, rejected = postselect_trajectories({"gentle": gentle, "jump": jump})
    assert list(kept) == ["gentle"]
    assert list(rejected) == ["jump"]
    kept_all, rejected_none = postselect_trajectories(
        {"gentle": gentle, "jump": jump}, jump_threshold=math.inf
    )
    assert len(kept_all) == 2 and not rejected_none


def test_postselection_accepts_cumulative_series() -> None:
    series = CumulativeWidth(
        np.array([30e6, math.nan, 40e6]), np.array([True, False, True]), ProfileKind.GAUSSIAN
    )
    kept, _ = postselect_trajectories({1: series})
    assert 1 in kept


# duty cycle bookkeeping


def test_duty_cycle_anchors() -> None:
    assert duty_cycle(6e9, 5.88e9, 6e9) == pytest.approx(1.0)
    assert on_resonance_time(29 * MHZ, 5.88e9) == pytest.approx(4.9e-3, abs=0.05e-3)
    duty = duty_cycle(29 * MHZ, 5.88e9, 6e9, turnaround=0.150, directions_used=2)
    assert duty == pytest.approx(0.0021, abs=0.0001)


def test_duty_cycle_rejects_zero_speed() -> None:
    with pytest.raises(InputError):
        duty_cycle(29 * MHZ, 0.0, 6e9)


def test_resonance_dwell_diffusion() -> None:
    assert resonance_dwell_diffusion(4.9e-3, 49 * MHZ) == pytest.approx(0.24 * MHZ, rel=0.01)
    assert resonance_dwell_diffusion(0.0, 49 * MHZ) == 0.0
    assert resonance_dwell_diffusion(1.0, 41 * MHZ) == pytest.approx(41 * MHZ)
