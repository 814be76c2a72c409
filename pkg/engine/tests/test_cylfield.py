from __future__ import annotations

import math

import numpy as np
import pytest

from nvspec.cylfield import (
    PillarGeometry,
    PointCharge,
    QuadratureSpec,
    StarkBranch,
    StarkCoupling,
    correction_integrals,
    coulomb_constant,
    direct_field,
    excited_hamiltonian,
    polarization_correction,
    stark_shift,
    to_nv_frame,
    total_field,
)
from nvspec.errors import DomainError, InputError

NM = 1e-9
GEOM = PillarGeometry()


# direct Coulomb field


def test_direct_field_of_a_charge_on_axis() -> None:
    field = direct_field(PointCharge(1.0, 0.0, 0.0, 10 * NM), GEOM)
    assert field[2] == pytest.approx(-2.526e6, rel=1e-3)
    assert field[2] == pytest.approx(-coulomb_constant(GEOM) / (10 * NM) ** 2, rel=1e-10)
    np.testing.assert_allclose(field[:2], 0.0, atol=1e-6)


def test_opposite_charges_cancel() -> None:
    plus = PointCharge(1.0, 40 * NM, 1.0, -30 * NM)
    total = total_field([plus, plus.conjugate()], GEOM)
    np.testing.assert_allclose(total, 0.0, atol=1e-9)


def test_field_falls_off_as_inverse_square() -> None:
    near = np.linalg.norm(direct_field(PointCharge(1.0, 30 * NM, 0.3, 40 * NM), GEOM))
    far = np.linalg.norm(direct_field(PointCharge(1.0, 60 * NM, 0.3, 80 * NM), GEOM))
    assert near / far == pytest.approx(4.0, rel=1e-12)


def test_charge_at_the_nv_is_singular() -> None:
    with pytest.raises(DomainError):
        direct_field(PointCharge(1.0, 0.0, 0.0, 0.0), GEOM)


def test_point_charge_validation() -> None:
    with pytest.raises(InputError):
        PointCharge(0.0, 10 * NM, 0.0, 0.0)
    with pytest.raises(InputError):
        PointCharge(1.0, -1 * NM, 0.0, 0.0)


def test_total_field_superposition() -> None:
    rng = np.random.default_rng(3)
    charges = [
        PointCharge(float(q), float(r), float(p), float(z))
        for q, r, p, z in zip(
            rng.choice([-1.0, 1.0], 20),
            rng.uniform(5, 120, 20) * NM,
            rng.uniform(0, 2 * math.pi, 20),
            rng.uniform(-300, 300, 20) * NM,
            strict=True,
        )
    ]
    brute = sum(direct_field(c, GEOM) for c in charges)
    np.testing.assert_allclose(total_field(charges, GEOM), brute, rtol=1e-10)
    doubled = [PointCharge(2 * c.q, c.rho, c.phi, c.z) for c in charges]
    np.testing.assert_allclose(
        total_field(doubled, GEOM), 2 * total_field(charges, GEOM), rtol=1e-12
    )
    assert total_field([], GEOM).tolist() == [0.0, 0.0, 0.0]


# polarization correction


def test_no_correction_without_dielectric_contrast() -> None:
    matched = PillarGeometry(eps_inside=5.7, eps_outside=5.7)
    values, error = correction_integrals([[50 * NM, 0.0, 40 * NM]], matched)
    assert values.tolist() == [0.0]
    assert error == 0.0


def test_correction_is_odd_in_z() -> None:
    up = polarization_correction(PointCharge(1.0, 60 * NM, 0.5, 70 * NM), GEOM)
    down = polarization_correction(PointCharge(1.0, 60 * NM, 0.5, -70 * NM), GEOM)
    assert up[:2].tolist() == [0.0, 0.0]
    assert down[2] == pytest.approx(-up[2], rel=1e-6)


def test_correction_decays_far_along_the_axis() -> None:
    R = GEOM.radius
    values, _ = correction_integrals([[0.5 * R, 0.0, 0.4 * R], [0.5 * R, 0.0, 40 * R]], GEOM)
    assert abs(values[1]) < 0.05 * abs(values[0])


def test_correction_is_a_small_enhancement_of_the_direct_field() -> None:
    charge = PointCharge(1.0, 100 * NM, 0.0, 50 * NM)
    direct = direct_field(charge, GEOM)
    correction = polarization_correction(charge, GEOM)
    assert correction[2] / direct[2] > 0.0
    assert np.linalg.norm(correction) / np.linalg.norm(direct) < 0.1


def test_correction_needs_charges_inside_the_pillar() -> None:
    with pytest.raises(InputError):
        polarization_correction(PointCharge(1.0, 1.5 * GEOM.radius, 0.0, 10 * NM), GEOM)


def test_correction_independent_of_panel_size() -> None:
    positions = [[80 * NM, 0.0, 200 * NM]]
    coarse, _ = correction_integrals(positions, GEOM, QuadratureSpec(panel_fraction=0.25))
    fine, _ = correction_integrals(positions, GEOM, QuadratureSpec(panel_fraction=0.125))
    assert fine[0] == pytest.approx(coarse[0], rel=1e-6)


def test_corrected_total_field_adds_only_along_the_axis() -> None:
    charges = [PointCharge(1.0, 50 * NM, 0.2, 60 * NM), PointCharge(-1.0, 90 * NM, 2.0, -20 * NM)]
    plain = total_field(charges, GEOM)
    corrected = total_field(charges, GEOM, include_correction=True)
    np.testing.assert_allclose(corrected[:2], plain[:2], rtol=1e-12)
    expected_z = plain[2] + sum(polarization_correction(c, GEOM)[2] for c in charges)
    assert corrected[2] == pytest.approx(expected_z, rel=1e-6)


# Stark response


def test_stark_shift_branches() -> None:
    k = StarkCoupling(k_parallel=1.0, k_perp=1.0)
    assert stark_shift([1.0, 0.0, 0.0], k) == pytest.approx(-1.0)
    assert stark_shift([1.0, 0.0, 0.0], k, StarkBranch.PLUS) == pytest.approx(1.0)
    field = np.array([3.0, 4.0, 2.0])
    k = StarkCoupling(k_parallel=-2.0, k_perp=0.5)
    total = stark_shift(field, k, "plus") + stark_shift(field, k, "minus")
    assert total == pytest.approx(2 * k.k_parallel * field[2])


def test_stark_shift_is_invariant_under_rotation_about_the_axis() -> None:
    k = StarkCoupling.from_raw()
    field = np.array([2e4, -1e4, 3e4])
    angle = 0.7
    rotated = np.array(
        [
            math.cos(angle) * field[0] - math.sin(angle) * field[1],
            math.sin(angle) * field[0] + math.cos(angle) * field[1],
            field[2],
        ]
    )
    assert stark_shift(rotated, k) == pytest.approx(stark_shift(field, k), rel=1e-12)


def test_stark_shift_vectorizes_and_rejects_nan() -> None:
    k = StarkCoupling.from_raw()
    fields = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    shifts = stark_shift(fields, k)
    np.testing.assert_allclose(shifts, [-k.k_perp, k.k_parallel])
    with pytest.raises(InputError):
        stark_shift([math.nan, 0.0, 0.0], k)


def test_raw_constants_give_effective_couplings() -> None:
    k = StarkCoupling.from_raw(g=2.0, a=0.5, b=0.25, d=3.0)
    assert (k.k_parallel, k.k_perp, k.k_ground) == pytest.approx((-5.5, 1.0, 1.0))
    scaled = k.scaled(3.0)
    assert scaled.k_parallel == pytest.approx(3 * k.k_parallel)
    assert scaled.g == pytest.approx(6.0)


def test_nv_frame_rotation() -> None:
    tilted = PillarGeometry(nv_axis_polar=math.pi / 2)
    np.testing.assert_allclose(to_nv_frame([1.0, 0.0, 0.0], tilted), [0.0, 0.0, 1.0], atol=1e-12)
    assert to_nv_frame([1.0, 2.0, 3.0], GEOM).tolist() == [1.0, 2.0, 3.0]


# excited-state Hamiltonian


def test_hamiltonian_without_field_is_zero() -> None:
    result = excited_hamiltonian([0.0, 0.0, 0.0], StarkCoupling.from_raw())
    assert np.count_nonzero(result.hamiltonian) == 0
    assert result.ground_shift == 0.0


def test_axial_field_shifts_every_level_equally() -> None:
    k = StarkCoupling.from_raw()
    result = excited_hamiltonian([0.0, 0.0, 1e4], k)
    expected = k.g * (k.b + k.d) * 1e4
    np.testing.assert_allclose(np.diag(result.hamiltonian).real, expected, rtol=1e-12)
    np.testing.assert_allclose(result.e_block_eigenvalues, expected, rtol=1e-12)


def test_hamiltonian_matches_closed_form() -> None:
    k = StarkCoupling.from_raw()
    rng = np.random.default_rng(5)
    for _ in range(10):
        field = rng.normal(0, 1e5, 3)
        result = excited_hamiltonian(field, k)
        np.testing.assert_allclose(result.hamiltonian, result.hamiltonian.conj().T, atol=0)
        e_perp = math.hypot(field[0], field[1])
        axial = k.g * (k.d - k.b) * field[2]
        transverse = k.g * k.a * e_perp
        np.testing.assert_allclose(
            result.transition_shifts,
            [axial - transverse, axial + transverse],
            rtol=1e-12,
            atol=1e-12 * (abs(axial) + transverse),
        )


def test_hamiltonian_needs_raw_constants() -> None:
    with pytest.raises(InputError):
        excited_hamiltonian([0.0, 0.0, 1.0], StarkCoupling(k_parallel=1.0, k_perp=1.0))
