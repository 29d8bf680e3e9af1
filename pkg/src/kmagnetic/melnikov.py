"""Hemisphere integrals ``F_K(z)`` of the field, their critical points, and the
diagnostic for fields vanishing on a great circle."""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import least_squares
from scipy.spatial import cKDTree

from .field import FieldSpec, sphere_mean
from .quadrature import cap_rule
from .sphere import as_unit, chart_rotation, fibonacci_sphere, geodesic_distance, rotation_to, unit

DEFAULT_QUAD = (24, 64)
GRADIENT_STEP = 1e-4
HESSIAN_STEP = 1e-3
DEGENERACY_RATIO = 1e-6


def melnikov_value(z, K: FieldSpec, quad: tuple[int, int] = DEFAULT_QUAD) -> float:
    """Integral of ``K`` over the open hemisphere centered at ``z``."""
    m, n = quad
    if m < 16 or n < 32:
        raise ValueError("quadrature needs at least 16 radial and 32 angular nodes")
    pts, w = cap_rule(m, n)
    Q = rotation_to(as_unit(z))
    return float(np.dot(w, K.eval(pts @ Q.T)))


def melnikov_values(points, K: FieldSpec, quad: tuple[int, int] = DEFAULT_QUAD) -> np.ndarray:
    return np.array([melnikov_value(z, K, quad) for z in np.atleast_2d(points)])


def chart_point(Q, a: float, b: float) -> np.ndarray:
    return chart_rotation(Q, a, b)[:, 2]


def chart_gradient(f: Callable[[np.ndarray], float], z, h: float = GRADIENT_STEP) -> np.ndarray:
    """Central-difference gradient of ``f`` in the chart ``(a, b)`` about ``z``."""
    Q = rotation_to(as_unit(z))
    ga = (f(chart_point(Q, h, 0.0)) - f(chart_point(Q, -h, 0.0))) / (2.0 * h)
    gb = (f(chart_point(Q, 0.0, h)) - f(chart_point(Q, 0.0, -h))) / (2.0 * h)
    return np.array([ga, gb])


def chart_hessian(f: Callable[[np.ndarray], float], z, h: float = HESSIAN_STEP,
                  center: float | None = None) -> np.ndarray:
    Q = rotation_to(as_unit(z))
    f0 = f(Q[:, 2]) if center is None else center
    fa = [f(chart_point(Q, s * h, 0.0)) for s in (1, -1)]
    fb = [f(chart_point(Q, 0.0, s * h)) for s in (1, -1)]
    fab = [f(chart_point(Q, s * h, t * h)) for s, t in ((1, 1), (1, -1), (-1, 1), (-1, -1))]
    haa = (fa[0] - 2 * f0 + fa[1]) / h ** 2
    hbb = (fb[0] - 2 * f0 + fb[1]) / h ** 2
    hab = (fab[0] - fab[1] - fab[2] + fab[3]) / (4 * h ** 2)
    return np.array([[haa, hab], [hab, hbb]])


def tangent_from_chart(z, g) -> np.ndarray:
    Q = rotation_to(as_unit(z))
    return g[0] * Q[:, 0] + g[1] * Q[:, 1]


def melnikov_gradient(z, K: FieldSpec, quad: tuple[int, int] = DEFAULT_QUAD,
                      h: float = GRADIENT_STEP) -> np.ndarray:
    """Gradient of ``F_K`` at ``z`` as an ambient tangent vector."""
    return tangent_from_chart(z, chart_gradient(lambda p: melnikov_value(p, K, quad), z, h))


def classify(eigenvalues) -> str:
    lo, hi = np.min(np.abs(eigenvalues)), np.max(np.abs(eigenvalues))
    if hi == 0.0 or lo <= DEGENERACY_RATIO * hi:
        return "degenerate"
    if np.all(eigenvalues > 0):
        return "min"
    if np.all(eigenvalues < 0):
        return "max"
    return "saddle"


@dataclass(frozen=True)
class MelnikovCriticalPoint:
    z: np.ndarray
    value: float
    kind: str
    eigenvalues: np.ndarray
    gradient_norm: float

    @property
    def condition(self) -> float:
        """Hessian conditioning, the reported stability surrogate."""
        ev = np.abs(self.eigenvalues)
        return float(ev.max() / ev.min()) if ev.min() > 0 else float("inf")


@dataclass
class MelnikovReport:
    grid: np.ndarray
    values: np.ndarray
    critical_points: list[MelnikovCriticalPoint] = dc_field(default_factory=list)
    constant_landscape: bool = False
    stability_note: str = (
        "stability is reported as Hessian conditioning; robustness radius is heuristic"
    )


def _walk(f, z, sign: float, max_steps: int = 200, max_step: float = 0.4) -> np.ndarray:
    # first-order ascent (sign=+1) or descent (sign=-1) with a simple step-length control
    val = f(z)
    step = max_step
    for _ in range(max_steps):
        g = chart_gradient(f, z)
        gn = np.linalg.norm(g)
        if gn < 1e-9:
            break
        Q = rotation_to(z)
        while step > 1e-6:
            d = sign * step * g / gn
            cand = chart_point(Q, d[0], d[1])
            cval = f(cand)
            if sign * (cval - val) > 0:
                z, val = cand, cval
                step = min(max_step, 1.5 * step)
                break
            step *= 0.5
        else:
            break
    return z


def _newton(f, z, tol: float = 1e-11, max_iter: int = 30, max_step: float = 0.3):
    """Newton iteration on the chart gradient; converges to critical points of any type."""
    for _ in range(max_iter):
        g = chart_gradient(f, z)
        if np.linalg.norm(g) <= tol:
            return z, True
        H = chart_hessian(f, z)
        try:
            d = -np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            return z, False
        dn = np.linalg.norm(d)
        if not np.isfinite(dn):
            return z, False
        if dn > max_step:
            d *= max_step / dn
        z = chart_point(rotation_to(z), d[0], d[1])
    return z, bool(np.linalg.norm(chart_gradient(f, z)) <= 1e-8)


def find_stable_critical_points(
    K: FieldSpec,
    region: Callable[[np.ndarray], bool] | None = None,
    seeds: Sequence | None = None,
    quad: tuple[int, int] = DEFAULT_QUAD,
    dedupe: float = 1e-3,
) -> MelnikovReport:
    """Multi-start search for critical points of ``F_K``.

    Each seed is followed uphill, downhill, and by Newton on the gradient,
    which also captures saddles.
    """
    seeds = fibonacci_sphere(32) if seeds is None else unit(np.atleast_2d(np.asarray(seeds, float)))
    if region is not None:
        seeds = np.array([s for s in seeds if region(s)]).reshape(-1, 3)

    def f(p):
        return melnikov_value(p, K, quad)

    values = np.array([f(s) for s in seeds])
    report = MelnikovReport(grid=seeds, values=values)
    scale = max(K.scale, 1e-300)
    if len(values) == 0:
        return report
    if np.ptp(values) <= 1e-9 * scale:
        report.constant_landscape = True
        return report

    found: list[MelnikovCriticalPoint] = []
    for s in seeds:
        for start in (_walk(f, s, +1.0), _walk(f, s, -1.0), s):
            z, ok = _newton(f, start)
            if not ok or (region is not None and not region(z)):
                continue
            if any(geodesic_distance(z, c.z) < dedupe for c in found):
                continue
            g = chart_gradient(f, z)
            ev = np.linalg.eigvalsh(chart_hessian(f, z))
            found.append(MelnikovCriticalPoint(z, f(z), classify(ev), ev, float(np.linalg.norm(g))))
    found.sort(key=lambda c: (-c.value, tuple(-c.z)))
    report.critical_points = found
    return report


# -- distinctness diagnostic ---------------------------------------------

@dataclass
class DistinctnessReport:
    candidate_axes: list[np.ndarray]
    pairs: list[tuple[float, float]]
    condition_holds: bool
    scale: float


def _circle_points(Q, count: int) -> np.ndarray:
    t = 2.0 * np.pi * np.arange(count) / count
    return np.column_stack([np.cos(t), np.sin(t), np.zeros_like(t)]) @ Q.T


def distinctness_check(
    K: FieldSpec,
    axes: int | np.ndarray = 500,
    samples: int = 128,
    vanish_tol: float = 1e-8,
    quad: tuple[int, int] = DEFAULT_QUAD,
    pair_tol: float = 1e-6,
) -> DistinctnessReport:
    """Find axes ``w`` whose great circle carries ``K = 0`` and compare ``F_K(+-w)``.

    Grid axes are refined by least squares before the vanishing test, since
    an exactly vanishing circle is generally not on the grid.
    """
    grid = fibonacci_sphere(axes) if np.isscalar(axes) else unit(np.asarray(axes, float))
    scale = K.scale
    if scale == 0.0:
        return DistinctnessReport([], [], True, 0.0)

    def residual_at(Q, ab):
        return K.eval(_circle_points(chart_rotation(Q, ab[0], ab[1]), samples)) / scale

    rms = np.array(
        [np.sqrt(np.mean(K.eval(_circle_points(rotation_to(w), samples)) ** 2)) for w in grid]
    ) / scale
    tree = cKDTree(grid)
    _, nbrs = tree.query(grid, k=min(9, len(grid)))
    local_min = [i for i in range(len(grid)) if rms[i] <= np.min(rms[nbrs[i]])]

    axes_found: list[np.ndarray] = []
    for i in sorted(local_min, key=lambda j: rms[j]):
        Q = rotation_to(grid[i])
        sol = least_squares(lambda ab: residual_at(Q, ab), np.zeros(2),
                            xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=200)
        Qw = chart_rotation(Q, sol.x[0], sol.x[1])
        w = Qw[:, 2]
        if np.max(np.abs(K.eval(_circle_points(Qw, samples)))) > vanish_tol * scale:
            continue
        if any(min(geodesic_distance(w, a), geodesic_distance(-w, a)) < 1e-6 for a in axes_found):
            continue
        # canonical sign: first nonzero coordinate positive
        k = int(np.argmax(np.abs(w) > 1e-9))
        axes_found.append(w if w[k] > 0 else -w)

    pairs = [(melnikov_value(w, K, quad), melnikov_value(-w, K, quad)) for w in axes_found]
    tol = pair_tol * 2.0 * np.pi * scale
    holds = all(abs(a - b) <= tol for a, b in pairs)
    return DistinctnessReport(axes_found, pairs, holds, scale)


def hemisphere_partition_defect(z, K: FieldSpec, quad=DEFAULT_QUAD) -> float:
    """``F(z) + F(-z) - integral of K over the sphere``."""
    z = as_unit(z)
    return melnikov_value(z, K, quad) + melnikov_value(-z, K, quad) - sphere_mean(K, *quad)
