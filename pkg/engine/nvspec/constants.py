"""Physical constants and defaults shared across nvspec."""

from __future__ import annotations

import math
from typing import Final

from scipy import constants as _sc

ELEMENTARY_CHARGE: Final[float] = _sc.elementary_charge
EPSILON_0: Final[float] = _sc.epsilon_0

MHZ: Final[float] = 1e6
GHZ: Final[float] = 1e9
NW: Final[float] = 1e-9

# Line-shape conventions
GAUSSIAN_FWHM_FACTOR: Final[float] = 2.0 * math.sqrt(2.0 * math.log(2.0))
TIED_VOIGT_FWHM_FACTOR: Final[float] = 3.6013
OLIVERO_A: Final[float] = 0.5346
OLIVERO_B: Final[float] = 0.2166
LORENTZ_BRANCH_RATIO: Final[float] = 1e-6

# Fitting
FIT_XTOL: Final[float] = 1e-8
FIT_MAX_ITERATIONS: Final[int] = 200

# PLE scans
DEFAULT_BIN_WIDTH: Final[float] = 4 * MHZ
MIN_PHOTONS_IN_SOME_BIN: Final[int] = 3
MIN_PHOTONS_PER_BIN_FOR_FIT: Final[int] = 5
LOW_COUNT_PHOTONS: Final[int] = 20
DEFAULT_JUMP_THRESHOLD: Final[float] = 200 * MHZ

# Monte Carlo linewidth estimator
UNDERFLOW_BIN_CAP: Final[float] = 15 * MHZ
MIN_EXPECTED_PER_BIN: Final[float] = 5.0
CI99_DELTA_CHI2: Final[float] = 9.21
MIN_SPAN_IN_GAMMAS: Final[float] = 20.0

# Diffusion ensembles
ENSEMBLE_HALF_WIDTH_IN_LINES: Final[float] = 25.0

# Pillar and traps
DEFAULT_RADIUS: Final[float] = 125e-9
DEFAULT_HEIGHT: Final[float] = 1.6e-6
DIAMOND_PERMITTIVITY: Final[float] = 5.7
TRAPS_PER_PPM_DEFAULT_PILLAR: Final[int] = 13800
DEFAULT_SURFACE_TRAPS: Final[int] = 6000
KMAX_TIMES_RADIUS: Final[float] = 30.0

# Raw Stark constants; DEFAULT_STARK_SCALE is replaced by calibration
STARK_A: Final[float] = 0.3
STARK_B: Final[float] = 0.3
STARK_C: Final[float] = 0.3
STARK_D: Final[float] = 3.0
DEFAULT_STARK_SCALE: Final[float] = 1.7e3

# Calibration anchors for the bulk charge run
ANCHOR_BULK_CHARGES: Final[int] = 2000
ANCHOR_FWHM: Final[float] = 5 * GHZ
ANCHOR_SDR: Final[float] = 1730 * MHZ

# Entanglement protocol
NATURAL_LINEWIDTH: Final[float] = 14.2 * MHZ
SATURATION_POWER: Final[float] = 5.0 * NW
DEFAULT_PURCELL: Final[float] = 3.0
PI_PULSE_DURATION: Final[float] = 2e-9
PULSE_SEPARATION: Final[float] = 2e-6
T_SPEC_CTRL: Final[float] = 5e-3
T_INIT: Final[float] = 60e-3
T_ION_CW: Final[float] = 0.5454
SDR_PULSED: Final[float] = 640 * MHZ
TAU_REFERENCE: Final[float] = 2.3
P_BROADENING: Final[float] = 0.01
