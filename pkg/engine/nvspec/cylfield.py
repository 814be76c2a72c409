"""Electrostatics of point charges in a dielectric nanopillar and the NV Stark response.

The NV sits at the origin on the axis of an infinite dielectric cylinder of
radius R0 (permittivity eps_inside) in a medium of eps_outside. Charges are given
in cylindrical coordinates relative to the NV. Fields are in V/m, couplings in
Hz per V/m.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable
from dataclasses import dataclass
from enum import Enum

import numpy as np
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, ConfigDict, Field
from scipy.integrate import quad_vec
from scipy.spatial.transform import Rotation
from scipy.special import i0e, i1e, k0e, k1e

from .constants import (
    DEFAULT_HEIGHT,
    DEFAULT_RADIUS,
    DEFAULT_STARK_SCALE,
    DIAMOND_PERMITTIVITY,
    ELEMENTARY_CHARGE,
    EPSILON_0,
    KMAX_TIMES_RADIUS,
    STARK_A,
    STARK_B,
    STARK_C,
    STARK_D,
)
from .errors import DomainError, InputError, QuadratureError

logger = logging.getLogger(__name__)

_MAX_PANELS = 4000
_BATCH = 2048


class PillarGeometry(BaseModel):
    """Cylinder geometry, permittivities and NV axis orientation (angles in rad)."""

    model_config = ConfigDict(frozen=True)

    radius: float = Field(default=DEFAULT_RADIUS, gt=0, description="m")
    height: float = Field(default=DEFAULT_HEIGHT, gt=0, description="m, trap placement only")
    eps_inside: float = Field(default=DIAMOND_PERMITTIVITY, ge=1)
    eps_outside: float = Field(default=1.0, ge=1)
    nv_axis_polar: float = 0.0
    nv_axis_azimuth: float = 0.0

    @property
    def volume(self) -> float:
        return math.pi * self.radius**2 * self.height

    @property
    def lateral_area(self) -> float:
        return 2.0 * math.pi * self.radius * self.height


class QuadratureSpec(BaseModel):
    """Accuracy of the polarization integral.

    Tolerances apply to the dimensionless integral over s = k * R0; reported
    errors are converted to V/m.
    """

    model_config = ConfigDict(frozen=True)

    epsabs: float = Field(default=1e-10, gt=0)
    epsrel: float = Field(default=1e-8, gt=0)
    limit: int = Field(default=4000, ge=10)
    panel_fraction: float = Field(default=0.25, gt=0, le=1)


@dataclass(frozen=True, slots=True)
class PointCharge:
    """Charge ``q`` in elementary charges at (rho, phi, z) relative to the NV."""

    q: float
    rho: float
    phi: float
    z: float

    def __post_init__(self) -> None:
        if self.q == 0:
            raise InputError("a point charge needs q != 0")
        if self.rho < 0:
            raise InputError("rho must be >= 0")

    @property
    def cartesian(self) -> NDArray[np.float64]:
        return np.array([self.rho * math.cos(self.phi), self.rho * math.sin(self.phi), self.z])

    def conjugate(self) -> PointCharge:
        return PointCharge(-self.q, self.rho, self.phi, self.z)


class StarkBranch(str, Enum):
    PLUS = "plus"
    MINUS = "minus"


@dataclass(frozen=True, slots=True)
class StarkCoupling:
    """Effective couplings (Hz per V/m) and the raw constants they derive from."""

    k_parallel: float
    k_perp: float
    k_ground: float = 0.0
    g: float = math.nan
    a: float = math.nan
    b: float = math.nan
    c: float = math.nan
    d: float = math.nan

    def __post_init__(self) -> None:
        if not all(math.isfinite(v) for v in (self.k_parallel, self.k_perp, self.k_ground)):
            raise InputError("Stark couplings must be finite")

    @classmethod
    def from_raw(
        cls,
        g: float = DEFAULT_STARK_SCALE,
        a: float = STARK_A,
        b: float = STARK_B,
        c: float = STARK_C,
        d: float = STARK_D,
    ) -> StarkCoupling:
        return cls(
            k_parallel=(b - d) * g,
            k_perp=a * g,
            k_ground=2.0 * b * g,
            g=g,
            a=a,
            b=b,
            c=c,
            d=d,
        )

    @property
    def has_raw(self) -> bool:
        return all(math.isfinite(v) for v in (self.g, self.a, self.b, self.d))

    def scaled(self, factor: float) -> StarkCoupling:
        """Every coupling multiplied by ``factor`` (the raw scale g absorbs it)."""
        return StarkCoupling(
            self.k_parallel * factor,
            self.k_perp * factor,
            self.k_ground * factor,
            self.g * factor,
            self.a,
            self.b,
            self.c,
            self.d,
        )


@dataclass(frozen=True, slots=True)
class ExcitedStark:
    hamiltonian: NDArray[np.complex128]
    e_block_eigenvalues: NDArray[np.float64]
    ground_shift: float
    transition_shifts: NDArray[np.float64]


def coulomb_constant(geom: PillarGeometry) -> float:
    """e / (4 pi eps0 eps_inside) in V m."""
    return ELEMENTARY_CHARGE / (4.0 * math.pi * EPSILON_0 * geom.eps_inside)


def _positions(charges: ArrayLike) -> NDArray[np.float64]:
    pos = np.atleast_2d(np.asarray(charges, dtype=float))
    if pos.shape[1] != 3:
        raise InputError("positions must be (rho, phi, z) triples")
    return pos


def _cartesian(pos: NDArray[np.float64]) -> NDArray[np.float64]:
    rho, phi, z = pos[:, 0], pos[:, 1], pos[:, 2]
    return np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])


def direct_fields(positions: ArrayLike, geom: PillarGeometry) -> NDArray[np.float64]:
    """Coulomb field at the NV of a +1 e charge at each (rho, phi, z) row."""
    r = _cartesian(_positions(positions))
    dist = np.linalg.norm(r, axis=1)
    if np.any(dist == 0):
        raise DomainError("a charge at the NV position has a singular field")
    return -coulomb_constant(geom) * r / dist[:, None] ** 3


def direct_field(c: PointCharge, geom: PillarGeometry) -> NDArray[np.float64]:
    """Field at the NV of ``c`` in a homogeneous medium of eps_inside.

    Raises:
        DomainError: for a charge at the origin.
    """
    return c.q * direct_fields([[c.rho, c.phi, c.z]], geom)[0]


def _q0(s: NDArray[np.float64], ratio: float) -> NDArray[np.float64]:
    """q0(k) for s = k R0 and ratio = eps_inside / eps_outside."""
    g0 = -(k0e(s) * i1e(s)) / (k1e(s) * i0e(s))
    return (1.0 - ratio) / (1.0 - g0 * ratio)


def correction_integrals(
    positions: ArrayLike, geom: PillarGeometry, quad: QuadratureSpec | None = None
) -> tuple[NDArray[np.float64], float]:
    """Dimensionless polarization integrals for each (rho, phi, z) row and their error bound.

    J = int_0^{30} s sin(s z/R0) q0(s) K0(s) I0(s rho/R0) / (2 I0(s)) ds, so the
    z field of a +1 e charge is J * e / (4 pi^2 eps0 eps_inside R0^2).
    """
    quad = quad or QuadratureSpec()
    pos = _positions(positions)
    R = geom.radius
    rho, zeta = pos[:, 0] / R, pos[:, 2] / R
    if np.any(rho > 1.0 + 1e-12):
        raise InputError("polarization correction needs charges inside the pillar (rho <= R0)")
    ratio = geom.eps_inside / geom.eps_outside
    if ratio == 1.0 or pos.shape[0] == 0:
        return np.zeros(pos.shape[0]), 0.0

    def integrand(s: float) -> NDArray[np.float64]:
        if s <= 0:
            return np.zeros_like(zeta)
        kernel = (k0e(s) / i0e(s)) * i0e(s * rho) * np.exp(s * rho - 2.0 * s)
        return s * np.sin(s * zeta) * _q0(np.float64(s), ratio) * kernel / 2.0

    s_max = KMAX_TIMES_RADIUS
    z_max = float(np.max(np.abs(zeta)))
    points = None
    if z_max > 0:
        width = quad.panel_fraction * math.pi / z_max
        n_panels = min(_MAX_PANELS, int(math.ceil(s_max / width)))
        if n_panels > 1:
            points = list(np.linspace(0.0, s_max, n_panels + 1)[1:-1])
    value, error, info = quad_vec(
        integrand,
        0.0,
        s_max,
        epsabs=quad.epsabs,
        epsrel=quad.epsrel,
        norm="max",
        limit=quad.limit,
        points=points,
        full_output=True,
    )
    value = np.asarray(value, dtype=float)
    tolerance = max(quad.epsabs, quad.epsrel * float(np.max(np.abs(value), initial=0.0)))
    if info.status != 0 or error > tolerance:
        raise QuadratureError(
            f"polarization integral did not converge (error {error:.3g} > {tolerance:.3g})",
            estimate=float(np.max(np.abs(value), initial=0.0)),
            error=float(error),
        )
    return value, float(error)


def correction_prefactor(geom: PillarGeometry) -> float:
    """e / (4 pi^2 eps0 eps_inside R0^2) in V/m."""
    return ELEMENTARY_CHARGE / (4.0 * math.pi**2 * EPSILON_0 * geom.eps_inside * geom.radius**2)


def polarization_correction(
    c: PointCharge, geom: PillarGeometry, quad: QuadratureSpec | None = None
) -> NDArray[np.float64]:
    """Field at the NV from the polarization of the pillar surface by ``c``.

    Only the axially symmetric term contributes on the axis, so the radial
    components are zero.

    Raises:
        QuadratureError: if the integral misses the requested tolerance.
    """
    values, _ = correction_integrals([[c.rho, c.phi, c.z]], geom, quad)
    return np.array([0.0, 0.0, c.q * correction_prefactor(geom) * float(values[0])])


def unit_fields(
    positions: ArrayLike,
    geom: PillarGeometry,
    include_correction: bool = False,
    quad: QuadratureSpec | None = None,
) -> NDArray[np.float64]:
    """Field at the NV of a +1 e charge at each row, shape (n, 3)."""
    pos = _positions(positions)
    fields = direct_fields(pos, geom)
    if include_correction and pos.shape[0]:
        prefactor = correction_prefactor(geom)
        for start in range(0, pos.shape[0], _BATCH):
            batch = pos[start : start + _BATCH]
            values, _ = correction_integrals(batch, geom, quad)
            fields[start : start + _BATCH, 2] += prefactor * values
    return fields


def total_field(
    charges: Iterable[PointCharge],
    geom: PillarGeometry,
    include_correction: bool = False,
    quad: QuadratureSpec | None = None,
) -> NDArray[np.float64]:
    """Superposed field of ``charges`` at the NV, summed in input order."""
    items = list(charges)
    if not items:
        return np.zeros(3)
    pos = np.array([[c.rho, c.phi, c.z] for c in items])
    q = np.array([c.q for c in items])
    fields = unit_fields(pos, geom, include_correction, quad)
    return (q[:, None] * fields).sum(axis=0)


def nv_rotation(geom: PillarGeometry) -> Rotation:
    """Rotation taking the pillar z axis onto the NV axis."""
    return Rotation.from_euler("yz", [geom.nv_axis_polar, geom.nv_axis_azimuth])


def to_nv_frame(E: ArrayLike, geom: PillarGeometry) -> NDArray[np.float64]:
    """Express lab-frame fields in the NV frame (z along the NV axis)."""
    fields = np.asarray(E, dtype=float)
    if geom.nv_axis_polar == 0.0:
        return fields
    return nv_rotation(geom).inv().apply(fields)


def stark_shift(
    E: ArrayLike, k: StarkCoupling, branch: StarkBranch | str = StarkBranch.MINUS
) -> NDArray[np.float64] | float:
    """k_parallel * E_z +- k_perp * |E_perp| for one field or an (n, 3) array of fields."""
    fields = np.asarray(E, dtype=float)
    if not np.all(np.isfinite(fields)):
        raise InputError("Stark shift needs a finite field")
    e_perp = np.hypot(fields[..., 0], fields[..., 1])
    sign = 1.0 if StarkBranch(branch) is StarkBranch.PLUS else -1.0
    shift = k.k_parallel * fields[..., 2] + sign * k.k_perp * e_perp
    return float(shift) if np.ndim(shift) == 0 else shift


_SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
_SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_I2 = np.eye(2, dtype=complex)


def _coupling_matrix(ex: float, ey: float) -> NDArray[np.complex128]:
    """Transverse coupling in the basis {A1, A2, Ex, Ey, E1, E2}."""
    m = np.zeros((6, 6), dtype=complex)
    outer = ex * _I2 - ey * _SIGMA_Y
    m[0:2, 4:6] = outer
    m[4:6, 0:2] = outer.conj().T
    m[2:4, 2:4] = ex * _SIGMA_Z + ey * _SIGMA_X
    return m


def excited_hamiltonian(E: ArrayLike, k: StarkCoupling) -> ExcitedStark:
    """Excited-state Stark Hamiltonian, Ex/Ey-block eigenvalues and ground shift.

    Subtracting the ground shift 2 g b E_z from the block eigenvalues gives
    transition shifts (d - b) g E_z +- a g |E_perp|, the opposite parallel sign
    to ``stark_shift``; both are reported as computed.
    """
    if not k.has_raw:
        raise InputError("the Hamiltonian needs the raw constants g, a, b, d")
    ex, ey, ez = (float(v) for v in np.asarray(E, dtype=float).reshape(3))
    if not all(math.isfinite(v) for v in (ex, ey, ez)):
        raise InputError("Stark Hamiltonian needs a finite field")
    h = k.g * (k.b + k.d) * ez * np.eye(6, dtype=complex) + k.g * k.a * _coupling_matrix(ex, ey)
    block = np.linalg.eigvalsh(h[2:4, 2:4])
    ground = 2.0 * k.g * k.b * ez
    return ExcitedStark(h, block, ground, block - ground)
