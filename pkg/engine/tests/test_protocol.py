from __future__ import annotations

import math

import numpy as np
import pytest
from pydantic import ValidationError

from nvspec.constants import OLIVERO_A, OLIVERO_B
from nvspec.errors import BroadeningTooSmallError, InfeasibleParametersError, InputError
from nvspec.protocol import (
    EmitterParams,
    ProtocolTiming,
    asymptotic_rate,
    attempt_rate,
    attempts_until_broadening,
    average_pulse_power,
    broadened_fwhm,
    cw_ionization_time,
    homogeneous_linewidth,
    pi_pulse_power,
    purcell_sweep,
)

MHZ = 1e6
NS = 1e-9


def test_lifetime_follows_the_natural_linewidth() -> None:
    assert EmitterParams().tau_l == pytest.approx(11.2 * NS, rel=1e-3)
    assert EmitterParams(lifetime=12 * NS).tau_l == 12 * NS


def test_pi_pulse_power() -> None:
    e = EmitterParams(lifetime=11.2 * NS)
    assert pi_pulse_power(e, 2 * NS) == pytest.approx(3.1e-6, rel=2e-3)
    assert pi_pulse_power(e, 8 * NS) == pytest.approx(pi_pulse_power(e, 2 * NS) / 16)
    assert pi_pulse_power(EmitterParams(saturation_power=0.0), 2 * NS) == 0.0
    with pytest.raises(InputError):
        pi_pulse_power(e, 0.0)


def test_average_pulse_power() -> None:
    assert average_pulse_power(3.1e-6, 2 * NS, 500e3) == pytest.approx(3.1e-9)
    assert average_pulse_power(3.1e-6, 2 * NS, 0.0) == 0.0
    assert average_pulse_power(3.1e-6, 1e-6, 1e6) == pytest.approx(3.1e-6)
    with pytest.raises(InfeasibleParametersError):
        average_pulse_power(3.1e-6, 1e-6, 2e6)


def test_cw_ionization_time() -> None:
    assert cw_ionization_time(272.7, 0.002) == pytest.approx(0.5454)
    assert cw_ionization_time(2.0, 1.0) == 2.0
    assert cw_ionization_time(2.0, 0.5) == 1.0
    with pytest.raises(InputError):
        cw_ionization_time(2.0, 0.0)


def test_default_budget_gives_about_a_thousand_attempts() -> None:
    budget = attempts_until_broadening(EmitterParams(), ProtocolTiming())
    assert budget.n_p == 1040
    assert budget.n_p_exact == pytest.approx(1040.0, abs=0.01)


def test_attempt_count_only_counts_whole_pulses() -> None:
    for purcell in (1.0, 2.0, 5.0, 7.0):
        budget = attempts_until_broadening(EmitterParams(purcell=purcell), ProtocolTiming())
        assert budget.n_p_exact - 1 < budget.n_p <= budget.n_p_exact + 0.01
    unenhanced = attempts_until_broadening(EmitterParams(purcell=1.0), ProtocolTiming())
    assert unenhanced.n_p_exact == pytest.approx(115.56, abs=0.01)
    assert unenhanced.n_p == 115


def test_budget_scaling() -> None:
    timing = ProtocolTiming()
    base = attempts_until_broadening(EmitterParams(purcell=1.0), timing).t_p
    wider = attempts_until_broadening(EmitterParams(purcell=2.0), timing).t_p
    faster = attempts_until_broadening(
        EmitterParams(purcell=1.0), timing.model_copy(update={"sdr_pulse": 2 * timing.sdr_pulse})
    ).t_p
    assert wider / base == pytest.approx(4.0, rel=1e-12)
    assert faster / base == pytest.approx(0.25, rel=1e-12)


def test_budget_does_not_depend_on_the_frequency_unit() -> None:
    timing = ProtocolTiming()
    in_hz = attempts_until_broadening(EmitterParams(), timing).t_p
    in_mhz = attempts_until_broadening(
        EmitterParams(natural_linewidth=14.2),
        timing.model_copy(update={"sdr_pulse": timing.sdr_pulse / MHZ}),
    ).t_p
    assert in_mhz == pytest.approx(in_hz, rel=1e-12)


def test_line_is_p_wider_after_the_budget() -> None:
    e, timing = EmitterParams(), ProtocolTiming(p_broadening=0.05)
    budget = attempts_until_broadening(e, timing)
    assert broadened_fwhm(budget.t_p, e, timing) == pytest.approx(
        1.05 * homogeneous_linewidth(e), rel=1e-12
    )
    at_start = (OLIVERO_A + math.sqrt(OLIVERO_B)) * homogeneous_linewidth(e)
    assert broadened_fwhm(0.0, e, timing) == pytest.approx(at_start, rel=1e-12)
    assert at_start == pytest.approx(homogeneous_linewidth(e), rel=5e-6)


def test_tiny_broadening_fraction_is_infeasible() -> None:
    with pytest.raises(BroadeningTooSmallError):
        attempts_until_broadening(EmitterParams(), ProtocolTiming(p_broadening=1e-6))
    assert attempts_until_broadening(EmitterParams(), ProtocolTiming(p_broadening=1e-3)).t_p > 0


def test_timing_validation() -> None:
    with pytest.raises(ValidationError):
        ProtocolTiming(p_broadening=1.5)
    with pytest.raises(ValidationError):
        EmitterParams(purcell=0.5)


def test_attempt_rates() -> None:
    timing = ProtocolTiming()
    unenhanced = attempt_rate(EmitterParams(purcell=1.0), timing)
    assert unenhanced.n_p == 115
    assert unenhanced.rate == pytest.approx(19.81e3, rel=1e-3)
    assert asymptotic_rate(timing) == pytest.approx(450.446e3, rel=1e-5)
    enhanced = attempt_rate(EmitterParams(purcell=30.0), timing)
    assert unenhanced.rate < enhanced.rate < asymptotic_rate(timing)
    assert enhanced.rate <= 1.0 / timing.pulse_separation


def test_rate_vanishes_without_ionization_time() -> None:
    e = EmitterParams()
    timings = [ProtocolTiming(t_ion=t_ion) for t_ion in (1e-6, 1e-9, 1e-12)]
    rates = [attempt_rate(e, timing) for timing in timings]
    assert rates[0].rate > rates[1].rate > rates[2].rate > 0.0
    assert rates[2].rate < asymptotic_rate(timings[2])
    assert rates[2].rate / rates[1].rate == pytest.approx(1e-3, rel=1e-3)

    timing, n_p = timings[2], rates[2].n_p
    n_ion = n_p * timing.t_ion / (n_p * timing.pulse_separation + timing.t_spec_ctrl)
    assert rates[2].rate == pytest.approx(n_ion / (timing.t_ion + timing.t_init), rel=1e-12)


def test_purcell_sweep_single_row() -> None:
    e, timing = EmitterParams(), ProtocolTiming()
    table = purcell_sweep(e, timing, [3.0])
    assert len(table) == 1
    row = table.iloc[0]
    assert row["n_p"] == attempts_until_broadening(e, timing).n_p
    assert row["rate_kHz"] == pytest.approx(attempt_rate(e, timing).rate / 1e3)
    assert row["p_percent"] == pytest.approx(1.0)


def test_purcell_sweep_is_monotone_in_purcell_factor() -> None:
    factors = [1.0, 1.5, 2.0, 3.0, 5.0, 10.0, 30.0]
    table = purcell_sweep(EmitterParams(), ProtocolTiming(), factors, p_values=[0.01, 0.05])
    assert len(table) == 2 * len(factors)
    for _, group in table.groupby("p_percent"):
        assert np.all(np.diff(group["rate_kHz"].to_numpy()) >= 0)
        assert np.all(np.diff(group["n_p"].to_numpy()) >= 0)
        ratio = group["t_p_s"].iloc[2] / group["t_p_s"].iloc[0]
        assert ratio == pytest.approx(4.0, rel=1e-12)


def test_purcell_sweep_rejects_factors_below_one() -> None:
    with pytest.raises(InputError):
        purcell_sweep(EmitterParams(), ProtocolTiming(), [0.5])


def test_rate_ceiling_holds_for_every_factor() -> None:
    timing = ProtocolTiming()
    for factor in np.geomspace(1, 1000, 20):
        rate = attempt_rate(EmitterParams(purcell=float(factor)), timing).rate
        assert rate <= 1.0 / timing.pulse_separation
        assert math.isfinite(rate)
