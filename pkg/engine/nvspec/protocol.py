"""Entanglement-attempt budget for an NV limited by spectral diffusion.

Between re-alignments the line broadens by diffusion during the pulses only.
The budget counts how many pi-pulses fit before the Voigt FWHM grows by a
fraction ``p`` over the homogeneous width, and converts that into an attempt
rate including ionization and re-initialization overheads.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable
from dataclasses import dataclass

import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from .constants import (
    DEFAULT_PURCELL,
    NATURAL_LINEWIDTH,
    OLIVERO_A,
    OLIVERO_B,
    P_BROADENING,
    PI_PULSE_DURATION,
    PULSE_SEPARATION,
    SATURATION_POWER,
    SDR_PULSED,
    T_INIT,
    T_ION_CW,
    T_SPEC_CTRL,
    TAU_REFERENCE,
)
from .errors import BroadeningTooSmallError, InfeasibleParametersError, InputError

logger = logging.getLogger(__name__)

_DIFFUSION_FACTOR = 4.0 * math.pi * math.log(2.0)
# Absorbs the 3e-6 zero-time excess of the Voigt width formula when counting whole pulses.
_COUNT_SLACK = 1e-2


class EmitterParams(BaseModel):
    """Optical emitter; ``lifetime`` defaults to 1 / (2 pi natural_linewidth)."""

    model_config = ConfigDict(frozen=True)

    natural_linewidth: float = Field(default=NATURAL_LINEWIDTH, gt=0, description="Hz")
    lifetime: float | None = Field(default=None, gt=0, description="s")
    saturation_power: float = Field(default=SATURATION_POWER, ge=0, description="W")
    purcell: float = Field(default=DEFAULT_PURCELL, ge=1)

    @property
    def tau_l(self) -> float:
        if self.lifetime is not None:
            return self.lifetime
        return 1.0 / (2.0 * math.pi * self.natural_linewidth)


class ProtocolTiming(BaseModel):
    model_config = ConfigDict(frozen=True)

    t_pi: float = Field(default=PI_PULSE_DURATION, gt=0, description="s")
    pulse_separation: float = Field(default=PULSE_SEPARATION, gt=0, description="s")
    t_spec_ctrl: float = Field(default=T_SPEC_CTRL, gt=0, description="s")
    t_init: float = Field(default=T_INIT, gt=0, description="s")
    t_ion: float = Field(default=T_ION_CW, gt=0, description="s")
    sdr_pulse: float = Field(default=SDR_PULSED, gt=0, description="Hz/s")
    tau_ref: float = Field(default=TAU_REFERENCE, gt=0, description="s")
    p_broadening: float = Field(default=P_BROADENING, gt=0, lt=1)


@dataclass(frozen=True, slots=True)
class BroadeningBudget:
    t_p: float
    n_p: int
    n_p_exact: float


@dataclass(frozen=True, slots=True)
class AttemptRate:
    n_p: int
    n_ion: float
    rate: float


def pi_pulse_power(e: EmitterParams, t_pi: float) -> float:
    """Power for a pi-pulse of length ``t_pi``: 2 (pi tau_l / t_pi)^2 P_sat."""
    if t_pi <= 0:
        raise InputError(f"pulse length must be > 0, got {t_pi}")
    return 2.0 * (math.pi * e.tau_l / t_pi) ** 2 * e.saturation_power


def average_pulse_power(p_pi: float, t_pi: float, rep_rate: float) -> float:
    """Average power of a pulse train.

    Raises:
        InfeasibleParametersError: if pulses overlap (t_pi * rep_rate > 1).
    """
    if p_pi < 0 or t_pi <= 0 or rep_rate < 0:
        raise InputError("pulse power, length and repetition rate must be non-negative")
    duty = t_pi * rep_rate
    if duty > 1:
        raise InfeasibleParametersError(f"pulse duty {duty:g} exceeds 1")
    return p_pi * duty


def cw_ionization_time(t_ion_ple: float, duty: float) -> float:
    """Ionization time under continuous illumination from one measured at ``duty``."""
    if not 0 < duty <= 1:
        raise InputError(f"duty cycle must be in (0, 1], got {duty}")
    if t_ion_ple < 0:
        raise InputError(f"ionization time must be >= 0, got {t_ion_ple}")
    return t_ion_ple * duty


def homogeneous_linewidth(e: EmitterParams) -> float:
    """Purcell-broadened homogeneous FWHM F * gamma_0."""
    return e.purcell * e.natural_linewidth


def inhomogeneous_width(t: float, timing: ProtocolTiming) -> float:
    """Gaussian FWHM after ``t`` seconds of illuminated diffusion."""
    if t < 0:
        raise InputError(f"time must be >= 0, got {t}")
    return math.sqrt(_DIFFUSION_FACTOR * timing.sdr_pulse**2 * timing.tau_ref * t)


def broadened_fwhm(t: float, e: EmitterParams, timing: ProtocolTiming) -> float:
    """Voigt FWHM of the homogeneous line after ``t`` seconds of diffusion.

    At t = 0 this is (OLIVERO_A + sqrt(OLIVERO_B)) times the homogeneous width, 3e-6 above it.
    """
    f_l = homogeneous_linewidth(e)
    f_g = inhomogeneous_width(t, timing)
    return OLIVERO_A * f_l + math.sqrt(OLIVERO_B * f_l**2 + f_g**2)


def attempts_until_broadening(e: EmitterParams, timing: ProtocolTiming) -> BroadeningBudget:
    """Illuminated time and whole pi-pulse count until the line is ``p`` wider.

    Raises:
        BroadeningTooSmallError: if ``p`` is below the feasibility threshold.
    """
    p = timing.p_broadening
    numerator = (1.0 + p - OLIVERO_A) ** 2 - OLIVERO_B
    if numerator <= 0:
        threshold = OLIVERO_A + math.sqrt(OLIVERO_B) - 1.0
        raise BroadeningTooSmallError(
            f"broadening fraction {p:g} is below the feasibility threshold {threshold:.3g}"
        )
    sigma_h = homogeneous_linewidth(e)
    t_p = numerator * sigma_h**2 / (_DIFFUSION_FACTOR * timing.sdr_pulse**2 * timing.tau_ref)
    exact = t_p / timing.t_pi
    return BroadeningBudget(t_p=t_p, n_p=math.floor(exact + _COUNT_SLACK), n_p_exact=exact)


def attempt_rate(e: EmitterParams, timing: ProtocolTiming) -> AttemptRate:
    """Attempts per ionization cycle and per second."""
    budget = attempts_until_broadening(e, timing)
    n_p = budget.n_p
    n_ion = n_p * timing.t_ion / (n_p * timing.pulse_separation + timing.t_spec_ctrl)
    rate = n_ion / (timing.t_ion + timing.t_init)
    return AttemptRate(n_p=n_p, n_ion=n_ion, rate=rate)


def asymptotic_rate(timing: ProtocolTiming) -> float:
    """Rate for unlimited attempts per re-alignment."""
    return (timing.t_ion / timing.pulse_separation) / (timing.t_ion + timing.t_init)


def purcell_sweep(
    e: EmitterParams,
    timing: ProtocolTiming,
    factors: Iterable[float],
    p_values: Iterable[float] | None = None,
) -> pd.DataFrame:
    """Budget and rate for every (Purcell factor, p) pair."""
    ps = [timing.p_broadening] if p_values is None else list(p_values)
    rows = []
    for factor in factors:
        if factor < 1:
            raise InputError(f"Purcell factor must be >= 1, got {factor}")
        emitter = e.model_copy(update={"purcell": float(factor)})
        for p in ps:
            point = timing.model_copy(update={"p_broadening": float(p)})
            budget = attempts_until_broadening(emitter, point)
            rate = attempt_rate(emitter, point)
            rows.append(
                {
                    "purcell": float(factor),
                    "p_percent": 100.0 * float(p),
                    "t_p_s": budget.t_p,
                    "n_p": budget.n_p,
                    "n_ion": rate.n_ion,
                    "rate_kHz": rate.rate / 1e3,
                }
            )
    logger.debug(f"Purcell sweep produced {len(rows)} rows")
    return pd.DataFrame(
        rows, columns=["purcell", "p_percent", "t_p_s", "n_p", "n_ion", "rate_kHz"]
    )
