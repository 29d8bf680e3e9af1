"""Length, area and energy of loops; the fields ``J0`` and ``J_eps``; the
linearization of ``J0`` at great circles and its inverse on the complement
of the kernel."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    InvalidBaseError,
    OracleUnavailableError,
    PoleProximityError,
    ProjectionViolationError,
)
from .field import FieldSpec, sphere_mean
from .loops import (
    FrameCoeffs,
    Loop,
    TangentLoopField,
    _wavenumbers,
    dot,
    great_circle,
    is_embedded,
    length_functional,
    spectral_derivative,
)
from .quadrature import gauss_legendre_unit
from .sphere import (
    as_rotation,
    as_unit,
    conformal_area_factor,
    rotation_to,
    stereographic_inverse,
    unit,
)

POLE_CLEARANCE = 1e-3
RADIAL_NODES = 32
KERNEL_GRAM = np.diag([0.5, 0.5, 1.0])


@dataclass(frozen=True)
class EnergyBreakdown:
    length: float
    area: float
    epsilon: float
    energy: float


def _check_pole(p, u: Loop) -> np.ndarray:
    p = as_unit(p)
    gap = float(np.min(np.linalg.norm(u.samples - p, axis=1)))
    if gap <= POLE_CLEARANCE:
        raise PoleProximityError(f"loop passes within {gap:.3g} of the pole")
    return p


# -- area ------------------------------------------------------------------

def area_functional(p, u: Loop, K: FieldSpec, nodes: int = RADIAL_NODES) -> float:
    """Area functional of ``u`` with respect to the pole ``p``.

    Line integral of the primitive ``h(w) (w1 dw2 - w2 dw1)`` of
    ``-K dsigma`` in the stereographic chart from ``p``, where
    ``h(w) = int_0^1 t g(t w) dt`` and ``g`` is ``-K`` times the conformal
    factor.
    """
    p = _check_pole(p, u)
    if u.is_constant or K.is_zero:
        return 0.0
    Q = rotation_to(-p)
    x = u.samples @ Q
    dx = u.d1 @ Q
    denom = 1.0 + x[:, 2:3]
    w = x[:, :2] / denom
    dw = dx[:, :2] / denom - x[:, :2] * dx[:, 2:3] / denom ** 2

    t, wt = gauss_legendre_unit(nodes)
    tw = t[None, :, None] * w[:, None, :]
    g = -K.eval(stereographic_inverse(p, tw)) * conformal_area_factor(tw)
    h = g @ (t * wt)
    return float(np.mean(h * (w[:, 0] * dw[:, 1] - w[:, 1] * dw[:, 0])))


def area_unit_field(p, u: Loop) -> float:
    """Closed form of the area functional for ``K = 1``."""
    p = _check_pole(p, u)
    cross = np.cross(u.samples, u.d1)
    dist2 = np.sum((u.samples - p) ** 2, axis=1)
    return float(2.0 * np.mean((cross @ p) / dist2))


def enclosed_center(u: Loop) -> np.ndarray:
    """Center of the region bounded positively by ``u`` (direction of the mean of ``u x u'``)."""
    return unit(np.mean(np.cross(u.samples, u.d1), axis=0))


def region_integral(u: Loop, K: FieldSpec, nodes: int = RADIAL_NODES) -> float:
    """Integral of ``K`` over the region bounded positively by ``u``.

    Polar coordinates about :func:`enclosed_center`; requires the loop to be
    embedded and star-shaped about that center.
    """
    if not is_embedded(u):
        raise OracleUnavailableError("surface oracle needs an embedded loop")
    c = enclosed_center(u)
    Q = rotation_to(c)
    x = u.samples @ Q
    dx = u.d1 @ Q
    r2 = x[:, 0] ** 2 + x[:, 1] ** 2
    if np.min(r2) < 1e-20:
        raise OracleUnavailableError("loop passes through the polar center")
    dphi = (x[:, 0] * dx[:, 1] - x[:, 1] * dx[:, 0]) / r2
    if np.min(dphi) <= 0.0:
        raise OracleUnavailableError("loop is not star-shaped about its center")
    rho = np.arctan2(np.sqrt(r2), x[:, 2])
    azim = np.arctan2(x[:, 1], x[:, 0])

    t, wt = gauss_legendre_unit(nodes)
    r = rho[:, None] * t[None, :]
    local = np.stack(
        [np.sin(r) * np.cos(azim)[:, None], np.sin(r) * np.sin(azim)[:, None], np.cos(r)],
        axis=-1,
    )
    inner = (K.eval(local @ Q.T) * np.sin(r)) @ wt * rho
    return float(2.0 * np.pi * np.mean(dphi * inner))


def area_surface_oracle(p, u: Loop, K: FieldSpec, sphere_total: float | None = None) -> float:
    """Independent evaluation of the area functional as a weighted enclosed area.

    ``-(1/2pi) int_Omega K`` when ``p`` lies outside the positively bounded
    region ``Omega``; otherwise the complementary region is bounded negatively.
    """
    p = _check_pole(p, u)
    inside = region_integral(u, K)
    if not _contains(u, p):
        return -inside / (2.0 * np.pi)
    total = sphere_mean(K) if sphere_total is None else sphere_total
    return (total - inside) / (2.0 * np.pi)


def _contains(u: Loop, p) -> bool:
    # winding of the loop about p seen from the region center; star-shaped loops only
    c = enclosed_center(u)
    Q = rotation_to(c)
    x = u.samples @ Q
    q = np.asarray(p) @ Q
    rho_p = np.arctan2(np.hypot(q[0], q[1]), q[2])
    azim_p = np.arctan2(q[1], q[0])
    rho = np.arctan2(np.hypot(x[:, 0], x[:, 1]), x[:, 2])
    azim = np.arctan2(x[:, 1], x[:, 0])
    # boundary radius in the direction of p, by periodic linear interpolation
    order = np.argsort(azim)
    a = np.concatenate([azim[order] - 2 * np.pi, azim[order], azim[order] + 2 * np.pi])
    b = np.tile(rho[order], 3)
    return bool(rho_p < np.interp(azim_p, a, b))


# -- energy and its gradient field ---------------------------------------

def energy(p, u: Loop, K: FieldSpec, epsilon: float) -> EnergyBreakdown:
    length = length_functional(u)
    area = area_functional(p, u, K)
    return EnergyBreakdown(length, area, float(epsilon), length + epsilon * area)


def J0(u: Loop) -> np.ndarray:
    """``-u'' - |u'|^2 u``."""
    return -u.d2 - (u.speed ** 2)[:, None] * u.samples


def Jeps(epsilon: float, u: Loop, K: FieldSpec) -> np.ndarray:
    """``J0(u) + eps L(u) K(u) u x u'``."""
    base = J0(u)
    if epsilon == 0.0 or K.is_zero:
        return base
    L = length_functional(u)
    return base + (epsilon * L) * K.eval(u.samples)[:, None] * np.cross(u.samples, u.d1)


# -- linearization at great circles --------------------------------------

def _check_base(R, phi: TangentLoopField, tol: float = 1e-10) -> Loop:
    omega = great_circle(R, phi.base.n)
    if np.max(np.abs(omega.samples - phi.base.samples)) > tol:
        raise InvalidBaseError("field is not based at the great circle of this rotation")
    return omega


def linearized_J0(R, phi: TangentLoopField) -> TangentLoopField:
    """``-phi'' - 2 (omega' . phi') omega - phi`` at ``omega = omega_R``."""
    R = as_rotation(R)
    omega = _check_base(R, phi)
    v = phi.values
    d1 = spectral_derivative(v, 1)
    d2 = spectral_derivative(v, 2)
    out = -d2 - 2.0 * dot(omega.d1, d1)[:, None] * omega.samples - v
    return TangentLoopField(omega, out, tol=1e-8)


def circle_frame(R, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Exact unit frame ``(omega', omega x omega')`` along ``omega_R``."""
    R = as_rotation(R)
    t = 2.0 * np.pi * np.arange(n) / n
    tangent = np.column_stack([-np.sin(t), np.cos(t), np.zeros_like(t)]) @ R.T
    normal = np.broadcast_to(R[:, 2], (n, 3))
    return tangent, normal


def psi(R, values) -> FrameCoeffs:
    """Frame coordinates of a field along ``omega_R``."""
    values = np.asarray(values, dtype=float)
    tangent, normal = circle_frame(R, values.shape[0])
    return FrameCoeffs(dot(values, tangent), dot(values, normal))


def psi_inverse(R, g: FrameCoeffs) -> np.ndarray:
    tangent, normal = circle_frame(R, g.g1.shape[0])
    return g.g1[:, None] * tangent + g.g2[:, None] * normal


def B_operator(g: FrameCoeffs) -> FrameCoeffs:
    """``(-g1'', -g2'' - g2)``: the linearization in frame coordinates."""
    return FrameCoeffs(-spectral_derivative(g.g1, 2), -spectral_derivative(g.g2, 2) - g.g2)


def _invert_symbols(g: FrameCoeffs) -> FrameCoeffs:
    n = g.g1.shape[0]
    k2 = _wavenumbers(n) ** 2
    s1 = np.zeros_like(k2)
    s1[1:] = 1.0 / k2[1:]
    s2 = np.zeros_like(k2)
    mask = k2 != 1.0
    s2[mask] = 1.0 / (k2[mask] - 1.0)
    h1 = np.fft.irfft(np.fft.rfft(g.g1) * s1, n=n)
    h2 = np.fft.irfft(np.fft.rfft(g.g2) * s2, n=n)
    return FrameCoeffs(h1, h2)


@dataclass(frozen=True, eq=False)
class KernelBasis:
    """The fields ``R e_j x omega_R`` spanning the kernel, with their Gram matrix."""

    rotation: np.ndarray
    fields: np.ndarray  # (3, N, 3)
    gram: np.ndarray

    def coefficients(self, values) -> np.ndarray:
        """L2 inner products ``mean(values . field_j)``."""
        return np.einsum("jki,ki->j", self.fields, np.asarray(values, dtype=float)) / self.fields.shape[1]

    def project(self, values) -> np.ndarray:
        """Coordinates of the L2-orthogonal projection onto the kernel span."""
        return np.linalg.solve(self.gram, self.coefficients(values))

    def combine(self, coeffs) -> np.ndarray:
        return np.einsum("j,jki->ki", np.asarray(coeffs, dtype=float), self.fields)


def kernel_basis(R, n: int) -> KernelBasis:
    R = as_rotation(R)
    omega = great_circle(R, n).samples
    fields = np.stack([np.cross(R[:, j], omega) for j in range(3)])
    gram = np.einsum("hki,jki->hj", fields, fields) / n
    return KernelBasis(R, fields, gram)


def solve_linearized(R, rhs, basis: KernelBasis | None = None, tol: float = 1e-8) -> TangentLoopField:
    """Unique kernel-orthogonal ``phi`` with ``J0'(omega_R) phi = rhs``.

    ``rhs`` (a tangent field along ``omega_R`` or an ``(N, 3)`` array) must
    be L2-orthogonal to the kernel.
    """
    R = as_rotation(R)
    values = rhs.values if isinstance(rhs, TangentLoopField) else np.asarray(rhs, dtype=float)
    n = values.shape[0]
    basis = kernel_basis(R, n) if basis is None else basis
    leak = np.max(np.abs(basis.project(values)))
    if leak > tol:
        raise ProjectionViolationError(f"right-hand side has kernel component {leak:.3g}")
    g = _invert_symbols(psi(R, values))
    return TangentLoopField(great_circle(R, n), psi_inverse(R, g))
