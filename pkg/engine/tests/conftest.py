from __future__ import annotations

from collections.abc import Iterator, Sequence
from pathlib import Path

import numpy as np
import pytest

from nvspec.charge_mc import TrapLayout, build_layout
from nvspec.config import settings
from nvspec.cylfield import StarkCoupling
from nvspec.parallel import close_executor
from nvspec.ple import LineScan, ScanDirection
from nvspec.specfun import gaussian_pdf

SCAN_HEADER = "scan_id,t_start_s,direction,power_nW,scan_speed_GHz_per_s,bin_center_MHz,counts"


@pytest.fixture(autouse=True)
def _serial_settings(monkeypatch: pytest.MonkeyPatch, tmp_path: Path) -> None:
    monkeypatch.setattr(settings, "threads", 1)
    monkeypatch.setattr(settings, "output_dir", tmp_path / "results")


@pytest.fixture(autouse=True, scope="session")
def _shutdown_pool() -> Iterator[None]:
    yield
    close_executor()


def make_scan(
    counts: Sequence[int] | np.ndarray,
    *,
    pitch: float = 4e6,
    start: float = 0.0,
    scan_id: int = 0,
    t_start: float = 0.0,
    direction: ScanDirection = ScanDirection.UP,
    scan_speed: float = 50e9,
) -> LineScan:
    counts = np.asarray(counts)
    centers = start + pitch * (np.arange(counts.size) + 0.5)
    return LineScan(
        bin_centers=centers,
        counts=counts,
        scan_speed=scan_speed,
        power=5e-9,
        direction=direction,
        t_start=t_start,
        scan_id=scan_id,
        bin_width=pitch,
    )


def gaussian_counts(
    n_bins: int, center: float, sigma: float, photons: float, pitch: float = 4e6
) -> np.ndarray:
    """Noiseless Gaussian line sampled at the bin centers of ``make_scan``."""
    centers = pitch * (np.arange(n_bins) + 0.5)
    return np.rint(gaussian_pdf(centers, photons * pitch, center, sigma)).astype(np.int64)


def write_scan_csv(path: Path, rows: Sequence[Sequence[object]]) -> Path:
    lines = [SCAN_HEADER] + [",".join(str(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def scan_rows(
    scan_id: int,
    t_start: float,
    counts: Sequence[int],
    *,
    direction: str = "up",
    pitch_mhz: float = 4.0,
) -> list[list[object]]:
    return [
        [scan_id, t_start, direction, 5.0, 5.88, pitch_mhz * (i + 0.5), int(c)]
        for i, c in enumerate(counts)
    ]


@pytest.fixture
def small_layout() -> TrapLayout:
    # 1380 bulk and 600 surface traps
    return build_layout(bulk_density_ppm=0.1, n_surface=600, seed=3)


@pytest.fixture
def coupling() -> StarkCoupling:
    return StarkCoupling.from_raw()
