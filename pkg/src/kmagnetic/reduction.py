"""Corrector for perturbed great circles and the reduced energy on the sphere of centers.

For a rotation ``R`` the corrector finds a loop ``u`` near ``omega_R`` and
multipliers ``zeta`` with

* ``J_eps(u) = sum_j zeta_j P_u(R e_j x omega_R)`` (``P_u`` projects onto the
  tangent plane at ``u``), and
* ``mean(u . R e_j x omega_R) = 0`` for ``j = 1, 2, 3``.

``R`` is a critical point of the reduced energy exactly when ``zeta = 0``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import CorrectorDivergenceError, InvalidArgumentError, SearchFailureError
from .field import FieldSpec
from .functionals import (
    Jeps,
    _invert_symbols,
    energy,
    kernel_basis,
    psi,
    psi_inverse,
)
from .loops import Loop, dot, great_circle, length_functional
from .melnikov import DEFAULT_QUAD, chart_point, classify, melnikov_value
from .sphere import as_rotation, as_unit, fibonacci_sphere, geodesic_distance, rotation_to, unit

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ReductionOptions:
    n: int = 256
    tol: float = 1e-10
    max_iters: int = 50
    eps_max: float = 0.5
    solution_tol: float = 1e-8
    stage_step: float = 0.05
    quad: tuple[int, int] = DEFAULT_QUAD
    gradient_step: float = 1e-4
    hessian_step: float = 1e-3
    dedupe: float = 1e-3
    merge_radius: float = 0.1
    flat_tol: float = 1e-9
    max_walk_steps: int = 60


@dataclass(frozen=True, eq=False)
class ReductionState:
    epsilon: float
    rotation: np.ndarray
    center: np.ndarray
    corrected_loop: Loop
    multipliers: np.ndarray
    residual_sup: float
    constraint_sup: float
    gram_eps: np.ndarray
    newton_iters: int

    def to_document(self, loop_path: str | None = None) -> dict:
        return {
            "epsilon": self.epsilon,
            "center": [float(c) for c in self.center],
            "multipliers": [float(c) for c in self.multipliers],
            "residual_sup": self.residual_sup,
            "constraint_sup": self.constraint_sup,
            "newton_iters": self.newton_iters,
            "loop": loop_path,
        }


@dataclass(frozen=True, eq=False)
class ReducedEnergySample:
    z: np.ndarray
    energy: float
    leading: float
    multiplier_norm: float
    state: ReductionState | None = dc_field(default=None, repr=False)


def _project_constraint(u: np.ndarray, basis, sweeps: int = 8) -> np.ndarray:
    # remove the kernel components of u; renormalization reintroduces a
    # second-order remainder, hence the repetition
    for _ in range(sweeps):
        if np.max(np.abs(basis.coefficients(u))) <= 1e-15:
            break
        u = unit(u - basis.combine(basis.project(u)))
    return u


def _residuals(epsilon, u: np.ndarray, zeta, K, basis):
    loop = Loop(u)
    kz = basis.combine(zeta)
    F1 = Jeps(epsilon, loop, K) - (kz - dot(kz, loop.samples)[:, None] * loop.samples)
    F2 = basis.coefficients(loop.samples)
    return loop, F1, F2


def _iterate(epsilon, R, K, opts: ReductionOptions, u0=None, zeta0=None):
    basis = kernel_basis(R, opts.n)
    omega = great_circle(R, opts.n).samples
    u = omega.copy() if u0 is None else _project_constraint(unit(np.asarray(u0, float)), basis)
    zeta = np.zeros(3) if zeta0 is None else np.array(zeta0, dtype=float)
    best = np.inf
    for it in range(opts.max_iters + 1):
        loop, F1, F2 = _residuals(epsilon, u, zeta, K, basis)
        res, con = float(np.max(np.abs(F1))), float(np.max(np.abs(F2)))
        if max(res, con) <= opts.tol:
            return loop, zeta, res, con, it, basis
        if not np.isfinite(res) or res > 1e3 * max(best, opts.tol) or it == opts.max_iters:
            raise CorrectorDivergenceError(
                f"corrector did not converge at eps={epsilon!r} (residual {res:.3g})",
                residual=res, iterations=it,
            )
        best = min(best, res)
        r = F1 - dot(F1, omega)[:, None] * omega
        dz = basis.project(r)
        r = r - basis.combine(dz)
        phi = psi_inverse(R, _invert_symbols(psi(R, r)))
        u = _project_constraint(unit(u - phi), basis)
        zeta = zeta + dz
    raise AssertionError("unreachable")


def _gram_eps(R, u: np.ndarray, omega: np.ndarray) -> np.ndarray:
    left = np.stack([np.cross(R[:, h], u) for h in range(3)])
    right = np.stack([np.cross(R[:, j], omega) for j in range(3)])
    return np.einsum("hki,jki->hj", left, right) / u.shape[0]


def solve_corrector(epsilon: float, R, K: FieldSpec, opts: ReductionOptions = ReductionOptions(),
                    warm: ReductionState | None = None) -> ReductionState:
    """Quasi-Newton corrector with the frozen linearization at ``omega_R``.

    Starts from ``omega_R`` (or from ``warm`` carried over to ``R``); on
    failure, retries by continuation in ``eps`` with steps of at most
    ``opts.stage_step``.
    """
    R = as_rotation(R)
    epsilon = float(epsilon)
    if abs(epsilon) > opts.eps_max:
        raise InvalidArgumentError(f"|eps| = {abs(epsilon)} exceeds eps_max = {opts.eps_max}")
    u0 = zeta0 = None
    if warm is not None and warm.corrected_loop.n == opts.n:
        P = R @ warm.rotation.T
        u0 = warm.corrected_loop.samples @ P.T
        zeta0 = warm.multipliers
    try:
        out = _iterate(epsilon, R, K, opts, u0, zeta0)
    except CorrectorDivergenceError as exc:
        if abs(epsilon) <= opts.stage_step:
            raise
        log.info("staging eps=%g after failure: %s", epsilon, exc)
        out = _staged(epsilon, R, K, opts)
    loop, zeta, res, con, iters, _ = out
    omega = great_circle(R, opts.n).samples
    return ReductionState(
        epsilon=epsilon,
        rotation=R,
        center=R[:, 2].copy(),
        corrected_loop=loop,
        multipliers=zeta,
        residual_sup=res,
        constraint_sup=con,
        gram_eps=_gram_eps(R, loop.samples, omega),
        newton_iters=iters,
    )


def _staged(epsilon, R, K, opts):
    steps = int(np.ceil(abs(epsilon) / opts.stage_step))
    u = zeta = None
    total = 0
    for k in range(1, steps + 1):
        e = epsilon * k / steps
        out = _iterate(e, R, K, opts, u, zeta)
        u, zeta = out[0].samples, out[1]
        total += out[4]
    return out[:4] + (total, out[5])


def criticality_check(state: ReductionState, solution_tol: float = 1e-8) -> tuple[bool, float]:
    norm = float(np.linalg.norm(state.multipliers))
    return norm <= solution_tol, norm


def reduced_energy(epsilon: float, z, K: FieldSpec, opts: ReductionOptions = ReductionOptions(),
                   warm: ReductionState | None = None) -> ReducedEnergySample:
    """Energy of the corrected loop about ``z``, measured with the pole ``-z``.

    The rotation carrying ``e3`` to ``z`` is chosen smoothly away from
    ``-e3`` and by a half-turn composition near it; the value does not
    depend on that choice.
    """
    z = as_unit(z)
    state = solve_corrector(epsilon, rotation_to(z), K, opts, warm)
    E = energy(-z, state.corrected_loop, K, epsilon).energy
    leading = 1.0 - epsilon / (2.0 * np.pi) * melnikov_value(z, K, opts.quad)
    return ReducedEnergySample(z, E, leading, float(np.linalg.norm(state.multipliers)), state)


def analytic_gradient(state: ReductionState, K: FieldSpec) -> np.ndarray:
    """Derivatives ``d E(R T_h)``, ``h = 1, 2, 3``, from the area variation along ``R e_h x u``."""
    u = state.corrected_loop
    R = state.rotation
    flux = K.eval(u.samples)[:, None] * np.cross(u.samples, u.d1)
    return np.array(
        [state.epsilon * np.mean(dot(flux, np.cross(R[:, h], u.samples))) for h in range(3)]
    )


def multiplier_gradient(state: ReductionState) -> np.ndarray:
    """The same derivatives recovered from the multipliers, ``M_eps zeta / L``."""
    return state.gram_eps @ state.multipliers / length_functional(state.corrected_loop)


def to_chart(dR: np.ndarray) -> np.ndarray:
    """Rotation derivatives ``(dE(RT_1), dE(RT_2), .)`` to the gradient in the chart ``(a, b)``."""
    return np.array([dR[1], -dR[0]])


# -- critical points of the reduced energy -----------------------------------

@dataclass(frozen=True, eq=False)
class CriticalPoint:
    z: np.ndarray
    state: ReductionState
    classification: str
    eigenvalues: np.ndarray
    energy: float
    is_solution: bool
    multiplier_norm: float


@dataclass
class CriticalSearchResult:
    epsilon: float
    points: list[CriticalPoint]
    degenerate_landscape: bool
    seed_energies: np.ndarray
    failed_seeds: list[int] = dc_field(default_factory=list)

    def __iter__(self):
        return iter(self.points)

    def __len__(self):
        return len(self.points)


class _Landscape:
    """Reduced energy with warm starts; every evaluation is deterministic."""

    def __init__(self, epsilon, K, opts):
        self.epsilon, self.K, self.opts = epsilon, K, opts
        self.solves = 0

    def sample(self, z, warm=None) -> ReducedEnergySample:
        self.solves += 1
        return reduced_energy(self.epsilon, z, self.K, self.opts, warm)

    def gradient(self, center: ReducedEnergySample, h=None) -> np.ndarray:
        h = self.opts.gradient_step if h is None else h
        Q = center.state.rotation
        vals = [
            self.sample(chart_point(Q, a, b), center.state).energy
            for a, b in ((h, 0.0), (-h, 0.0), (0.0, h), (0.0, -h))
        ]
        return np.array([vals[0] - vals[1], vals[2] - vals[3]]) / (2.0 * h)

    def hessian(self, center: ReducedEnergySample, h=None) -> np.ndarray:
        h = self.opts.hessian_step if h is None else h
        Q = center.state.rotation

        def f(a, b):
            return self.sample(chart_point(Q, a, b), center.state).energy

        f0 = center.energy
        haa = (f(h, 0) - 2 * f0 + f(-h, 0)) / h ** 2
        hbb = (f(0, h) - 2 * f0 + f(0, -h)) / h ** 2
        hab = (f(h, h) - f(h, -h) - f(-h, h) + f(-h, -h)) / (4 * h ** 2)
        return np.array([[haa, hab], [hab, hbb]])


def _walk(land: _Landscape, start: ReducedEnergySample, sign: float, known, kind: str):
    cur = start
    step = 0.4
    for _ in range(land.opts.max_walk_steps):
        if any(c.classification == kind and geodesic_distance(cur.z, c.z) < land.opts.merge_radius
               for c in known):
            return cur, True
        g = land.gradient(cur)
        gn = np.linalg.norm(g)
        if gn < 1e-10:
            break
        Q = cur.state.rotation
        moved = False
        while step > 1e-2:
            d = sign * step * g / gn
            cand = land.sample(chart_point(Q, d[0], d[1]), cur.state)
            if sign * (cand.energy - cur.energy) > 0:
                cur, moved = cand, True
                step = min(0.4, 1.5 * step)
                break
            step *= 0.5
        if not moved:
            break
    return cur, False


def _polish(land: _Landscape, cur: ReducedEnergySample, max_iter: int = 25):
    """Newton on the chart gradient, finished on the multiplier-based gradient."""
    tol = land.opts.solution_tol
    H = None
    for _ in range(max_iter):
        if cur.multiplier_norm <= 0.01 * tol:
            break
        H = land.hessian(cur)
        g = land.gradient(cur)
        if np.linalg.norm(g) < 1e-7:
            # near the point the exact multiplier gradient beats the difference quotient
            g = to_chart(multiplier_gradient(cur.state))
        try:
            d = -np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            break
        dn = np.linalg.norm(d)
        if not np.isfinite(dn):
            break
        if dn > 0.2:
            d *= 0.2 / dn
        cur = land.sample(chart_point(cur.state.rotation, d[0], d[1]), cur.state)
    if H is None:
        H = land.hessian(cur)
    return cur, H


def critical_search(epsilon: float, K: FieldSpec, seeds=None,
                    opts: ReductionOptions = ReductionOptions()) -> CriticalSearchResult:
    """Critical points of the reduced energy by multi-start descent and ascent.

    Runs are processed in seed order; a run stops early when it enters the
    neighborhood of an already known critical point of the type it seeks.
    """
    seeds = fibonacci_sphere(32) if seeds is None else unit(np.atleast_2d(np.asarray(seeds, float)))
    land = _Landscape(float(epsilon), K, opts)
    starts: list[ReducedEnergySample] = []
    failed: list[int] = []
    for i, s in enumerate(seeds):
        try:
            starts.append(land.sample(s))
        except CorrectorDivergenceError:
            failed.append(i)
            starts.append(None)
    energies = np.array([s.energy if s is not None else np.nan for s in starts])
    good = [s for s in starts if s is not None]
    if not good:
        raise SearchFailureError("no seed produced a converged corrector", ) from None
    # flatness needs at least two samples to be observable
    if len(good) > 1 and np.nanmax(energies) - np.nanmin(energies) <= opts.flat_tol:
        rep = good[0]
        ok, norm = criticality_check(rep.state, opts.solution_tol)
        point = CriticalPoint(rep.z, rep.state, "degenerate", np.zeros(2), rep.energy, ok, norm)
        return CriticalSearchResult(float(epsilon), [point], True, energies, failed)

    known: list[CriticalPoint] = []
    for start in starts:
        if start is None:
            continue
        for sign, kind in ((-1.0, "min"), (+1.0, "max")):
            end, merged = _walk(land, start, sign, known, kind)
            if merged:
                continue
            end, H = _polish(land, end)
            if any(geodesic_distance(end.z, c.z) < opts.dedupe for c in known):
                continue
            ev = np.linalg.eigvalsh(H)
            # fresh solve from omega_R so the reported state does not depend on the path
            fresh = solve_corrector(epsilon, end.state.rotation, K, opts)
            ok, norm = criticality_check(fresh, opts.solution_tol)
            E = energy(-end.z, fresh.corrected_loop, K, epsilon).energy
            known.append(CriticalPoint(end.z, fresh, classify(ev), ev, E, ok, norm))
    if not known:
        raise SearchFailureError("no critical point found")
    known.sort(key=lambda c: (c.energy, tuple(c.z)))
    log.info("critical search at eps=%g used %d corrector solves", epsilon, land.solves)
    return CriticalSearchResult(float(epsilon), known, False, energies, failed)
