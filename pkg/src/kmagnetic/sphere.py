"""Geometry of the unit sphere and of SO(3).

Points of the sphere and rotations are plain numpy arrays (shape ``(3,)`` and
``(3, 3)``); the helpers here validate and normalize them.
"""
from __future__ import annotations

import numpy as np
from scipy.spatial.transform import Rotation

from .errors import InvalidArgumentError, PoleSingularityError

E1 = np.array([1.0, 0.0, 0.0])
E2 = np.array([0.0, 1.0, 0.0])
E3 = np.array([0.0, 0.0, 1.0])
BASIS = (E1, E2, E3)

UNIT_TOL = 1e-12
POLE_CUTOFF = 1e-6

_T1 = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]])
_T2 = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [-1.0, 0.0, 0.0]])
_T3 = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
# half-turn about e1, maps e3 to -e3
_FLIP = np.diag([1.0, -1.0, -1.0])


def unit(v) -> np.ndarray:
    """Return ``v`` normalized to the unit sphere (last axis)."""
    v = np.asarray(v, dtype=float)
    norm = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(norm == 0.0):
        raise InvalidArgumentError("cannot normalize the zero vector")
    return v / norm


def as_unit(v, tol: float = 1e-9) -> np.ndarray:
    """Validate a point of the sphere; tiny deviations are normalized away."""
    v = np.asarray(v, dtype=float)
    if v.shape[-1] != 3:
        raise InvalidArgumentError(f"expected 3-vectors, got shape {v.shape}")
    dev = np.abs(np.linalg.norm(v, axis=-1) - 1.0)
    if np.any(dev > tol):
        raise InvalidArgumentError(f"not a unit vector (|v|-1 = {dev.max():.3g})")
    return unit(v)


def orthonormalize(R) -> np.ndarray:
    """Nearest rotation matrix (polar projection)."""
    U, _, Vt = np.linalg.svd(np.asarray(R, dtype=float))
    Q = U @ Vt
    if np.linalg.det(Q) < 0:
        U[:, -1] *= -1.0
        Q = U @ Vt
    return Q


def as_rotation(R, tol: float = 1e-6) -> np.ndarray:
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3):
        raise InvalidArgumentError(f"rotation must be 3x3, got {R.shape}")
    drift = np.abs(R.T @ R - np.eye(3)).max()
    if drift > tol or np.linalg.det(R) < 0:
        raise InvalidArgumentError(f"not a rotation (|R^tR - I| = {drift:.3g})")
    if drift > UNIT_TOL:
        R = orthonormalize(R)
    return R


def rotation_generators() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """The skew matrices ``T_h`` with ``T_h v = e_h x v``."""
    return _T1.copy(), _T2.copy(), _T3.copy()


def skew(v) -> np.ndarray:
    """Matrix of ``x -> v x x``; ``skew(e_h) == T_h``."""
    x, y, z = np.asarray(v, dtype=float)
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def axis_rotation(h: int, xi) -> np.ndarray:
    """Rotation about ``e_h`` by the unit complex number ``xi``.

    The sign convention is the one whose derivative at ``xi = 1`` (along
    ``i``) is the generator ``T_h``, for all three axes.
    """
    if h not in (1, 2, 3):
        raise InvalidArgumentError(f"axis index must be 1, 2 or 3, got {h}")
    xi = complex(xi)
    if abs(abs(xi) - 1.0) > 1e-9:
        raise InvalidArgumentError(f"|xi| must be 1, got {abs(xi)!r}")
    c, s = xi.real, xi.imag
    if h == 1:
        return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
    if h == 2:
        return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def axis_rotation_angle(h: int, angle: float) -> np.ndarray:
    return axis_rotation(h, np.exp(1j * angle))


def orbit_differential(R, q, h: int) -> np.ndarray:
    """Image of ``R T_h`` under the differential of ``R -> Rq``; tangent at ``Rq``."""
    R = np.asarray(R, dtype=float)
    return np.cross(R[:, h - 1], R @ np.asarray(q, dtype=float))


def north_transport(z) -> np.ndarray:
    """The rotation ``N(z)``: maps ``e3`` to ``z``, equals the identity at ``e3``."""
    z = as_unit(z)
    if np.linalg.norm(z + E3) <= POLE_CUTOFF:
        raise PoleSingularityError("north_transport is singular at -e3; pre-rotate")
    z1, z2, z3 = z
    d = 1.0 + z3
    return np.array(
        [
            [1.0 - z1 * z1 / d, -z1 * z2 / d, z1],
            [-z1 * z2 / d, 1.0 - z2 * z2 / d, z2],
            [-z1, -z2, z3],
        ]
    )


def rotation_to(z) -> np.ndarray:
    """A rotation mapping ``e3`` to ``z``, defined on the whole sphere.

    Uses ``N(z)`` away from the south pole and ``N(-z)`` composed with a
    half-turn near it.
    """
    z = as_unit(z)
    if z[2] > -0.5:
        return north_transport(z)
    return north_transport(-z) @ _FLIP


def chart_rotation(Q, a: float, b: float) -> np.ndarray:
    """``Q exp(a T2 - b T1)``: moves ``Q e3`` by ``a Q e1 + b Q e2`` along a geodesic."""
    step = Rotation.from_rotvec([-b, a, 0.0]).as_matrix()
    return np.asarray(Q) @ step


def geodesic_step(z, v) -> np.ndarray:
    """Exponential map of the sphere at ``z`` applied to tangent ``v``."""
    z = np.asarray(z, dtype=float)
    v = np.asarray(v, dtype=float)
    t = np.linalg.norm(v)
    if t == 0.0:
        return z.copy()
    return np.cos(t) * z + np.sin(t) * (v / t)


def geodesic_distance(p, q) -> float:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    # atan2 form stays accurate for nearly equal or antipodal points
    return float(np.arctan2(np.linalg.norm(np.cross(p, q)), np.dot(p, q)))


def fibonacci_sphere(n: int) -> np.ndarray:
    """Deterministic, nearly uniform lattice of ``n`` points."""
    if n < 1:
        raise InvalidArgumentError("need at least one point")
    i = np.arange(n)
    z = 1.0 - (2.0 * i + 1.0) / n
    r = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    phi = i * np.pi * (3.0 - np.sqrt(5.0))
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


# -- stereographic projection ------------------------------------------------

def _projection_frame(p) -> np.ndarray:
    # rotation Q with Q(-e3) = p, so projecting from p is projecting from -e3 after Q^t
    return rotation_to(-np.asarray(p, dtype=float))


def stereographic(p, q, tol: float = 1e-9) -> np.ndarray:
    """Stereographic projection of ``q`` from the pole ``p`` onto the plane.

    The chart is orientation preserving: with ``p = -e3`` it is
    ``(q1, q2) / (1 + q3)``.  ``q`` may be an array of points.
    """
    p = as_unit(p)
    q = np.asarray(q, dtype=float)
    if np.any(np.linalg.norm(q - p, axis=-1) <= tol):
        raise PoleSingularityError("point coincides with the projection pole")
    x = q @ _projection_frame(p)
    return x[..., :2] / (1.0 + x[..., 2:3])


def stereographic_inverse(p, w) -> np.ndarray:
    p = as_unit(p)
    w = np.asarray(w, dtype=float)
    r2 = np.sum(w * w, axis=-1, keepdims=True)
    x = np.concatenate([2.0 * w, 1.0 - r2], axis=-1) / (1.0 + r2)
    return x @ _projection_frame(p).T


def conformal_area_factor(w) -> np.ndarray:
    """Jacobian determinant ``(2 / (1 + |w|^2))^2`` of the inverse projection."""
    w = np.asarray(w, dtype=float)
    return (2.0 / (1.0 + np.sum(w * w, axis=-1))) ** 2
