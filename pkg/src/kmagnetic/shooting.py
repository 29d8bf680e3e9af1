"""Direct integration of the charged-particle motion on the sphere and a
shooting method for its closed orbits, used to cross-check the reduction."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, ShootingFailureError, StabilityError
from .field import FieldSpec
from .loops import Loop, length_functional, phase_align_distance
from .reduction import ReductionState

STEPS_PER_TURN = 2048


@dataclass(frozen=True)
class PhasePoint:
    position: np.ndarray
    velocity: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.position, dtype=float)
        v = np.asarray(self.velocity, dtype=float)
        if x.shape != (3,) or v.shape != (3,):
            raise InvalidArgumentError("phase point needs two 3-vectors")
        if abs(np.linalg.norm(x) - 1.0) > 1e-10 or abs(np.dot(x, v)) > 1e-10 * max(1.0, np.linalg.norm(v)):
            raise InvalidArgumentError("position must be unit and orthogonal to the velocity")
        object.__setattr__(self, "position", x)
        object.__setattr__(self, "velocity", v)

    @property
    def speed(self) -> float:
        return float(np.linalg.norm(self.velocity))


@dataclass(frozen=True, eq=False)
class OrbitResult:
    initial: PhasePoint
    period: float
    samples: Loop
    closure_error: float
    speed_drift: float
    iterations: int


def _rhs(K: FieldSpec, x, v):
    acc = -np.sum(v * v, axis=-1, keepdims=True) * x
    if not K.is_zero:
        acc = acc + np.asarray(K.eval(x))[..., None] * np.cross(x, v)
    return v, acc


def _project(x, v, c):
    x = x / np.linalg.norm(x, axis=-1, keepdims=True)
    v = v - np.sum(v * x, axis=-1, keepdims=True) * x
    return x, c * v / np.linalg.norm(v, axis=-1, keepdims=True)


def _rk4_step(K, x, v, dt):
    k1x, k1v = _rhs(K, x, v)
    k2x, k2v = _rhs(K, x + 0.5 * dt * k1x, v + 0.5 * dt * k1v)
    k3x, k3v = _rhs(K, x + 0.5 * dt * k2x, v + 0.5 * dt * k2v)
    k4x, k4v = _rhs(K, x + dt * k3x, v + dt * k3v)
    x = x + dt / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
    v = v + dt / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
    return x, v


def default_dt(c: float) -> float:
    return (2.0 * np.pi / c) / STEPS_PER_TURN


def _check_dt(c, dt):
    if c <= 0:
        raise InvalidArgumentError("speed must be positive")
    if abs(dt) > 0.01 * 2.0 * np.pi / c:
        raise StabilityError(f"time step {dt:.3g} is too large for speed {c:.3g}")


def integrate_steps(K: FieldSpec, c: float, x, v, dt, steps: int, record_every: int = 0,
                    project: bool = True):
    """Batched RK4: ``x``, ``v`` of shape ``(..., 3)``; ``dt`` scalar or per batch item."""
    x = np.array(x, dtype=float)
    v = np.array(v, dtype=float)
    dt = np.asarray(dt, dtype=float)
    dtb = dt[..., None] if dt.ndim else dt
    rec = []
    for i in range(steps):
        if record_every and i % record_every == 0:
            rec.append(x.copy())
        x, v = _rk4_step(K, x, v, dtb)
        if project:
            x, v = _project(x, v, c)
    return x, v, rec


def integrate(K: FieldSpec, c: float, start: PhasePoint, t_end: float, dt: float | None = None,
              project: bool = True):
    """Trajectory ``(times, positions, velocities)`` of the motion with speed ``c``."""
    dt = default_dt(c) if dt is None else float(dt)
    _check_dt(c, dt)
    if abs(start.speed - c) > 1e-10 * c:
        raise InvalidArgumentError("start velocity must have magnitude c")
    steps = max(1, int(np.ceil(abs(t_end) / abs(dt) - 1e-9)))
    h = t_end / steps
    xs = np.empty((steps + 1, 3))
    vs = np.empty((steps + 1, 3))
    xs[0], vs[0] = start.position, start.velocity
    x, v = start.position, start.velocity
    for i in range(steps):
        x, v = _rk4_step(K, x, v, h)
        if project:
            x, v = _project(x, v, c)
        xs[i + 1], vs[i + 1] = x, v
    return np.linspace(0.0, t_end, steps + 1), xs, vs


@dataclass(frozen=True)
class ShootingOptions:
    tol: float = 1e-8
    max_iters: int = 30
    fd_step: float = 1e-7
    steps_per_turn: int = STEPS_PER_TURN


def _rotate(vec, axis, angle):
    # Rodrigues rotation of vec about the unit axis
    return (vec * np.cos(angle) + np.cross(axis, vec) * np.sin(angle)
            + axis * np.dot(axis, vec) * (1.0 - np.cos(angle)))


def _start(x0, v0, c, alpha, beta):
    t0 = v0 / c
    x = _rotate(x0, t0, alpha)
    v = _rotate(v0, t0, alpha)
    v = _rotate(v, x, beta)
    return x, v


def _closure(x0, v0, xT, vT, c):
    return float(np.linalg.norm(xT - x0) + np.linalg.norm(vT - v0) / c)


def find_periodic(K: FieldSpec, c: float, guess: Loop, opts: ShootingOptions = ShootingOptions(),
                  period_guess: float | None = None) -> OrbitResult:
    """Closed orbit of speed ``c`` near the closed curve ``guess``.

    Unknowns: a transverse rotation ``alpha`` of the start point about the
    start direction, a heading rotation ``beta`` about the start point, and
    the period.  Residuals are the return defect along the start tangent and
    normal and the heading defect.
    """
    guess.require_regular()
    n = guess.n
    x0 = guess.samples[0]
    v0 = c * guess.d1[0] / np.linalg.norm(guess.d1[0])
    T = 2.0 * np.pi * length_functional(guess) / c if period_guess is None else float(period_guess)
    turns = max(1.0, T * c / (2.0 * np.pi))
    steps = int(np.ceil(opts.steps_per_turn * turns / n)) * n
    _check_dt(c, T / steps)

    def shoot(params):
        params = np.atleast_2d(params)
        xs, vs = zip(*(_start(x0, v0, c, a, b) for a, b, _ in params))
        xs, vs = np.array(xs), np.array(vs)
        xT, vT, _ = integrate_steps(K, c, xs, vs, params[:, 2] / steps, steps)
        return xs, vs, xT, vT

    def defect(xs, vs, xT, vT):
        t = vs / c
        nrm = np.cross(xs, t)
        d = xT - xs
        return np.column_stack([np.sum(d * t, 1), np.sum(d * nrm, 1), np.sum((vT - vs) * nrm, 1) / c])

    p = np.array([0.0, 0.0, T])
    h = opts.fd_step
    closure = np.inf
    for it in range(opts.max_iters + 1):
        batch = np.vstack([p, p + [h, 0, 0], p + [0, h, 0], p + [0, 0, h * max(1.0, T)]])
        xs, vs, xT, vT = shoot(batch)
        F = defect(xs, vs, xT, vT)
        closure = _closure(xs[0], vs[0], xT[0], vT[0], c)
        if closure <= opts.tol:
            break
        if it == opts.max_iters or not np.isfinite(closure):
            raise ShootingFailureError(f"shooting did not close (defect {closure:.3g})", defect=closure)
        J = (F[1:] - F[0]).T / np.array([h, h, h * max(1.0, T)])
        step = np.linalg.lstsq(J, -F[0], rcond=1e-10)[0]
        p = p + step
        if p[2] <= 0:
            raise ShootingFailureError("period became non-positive", defect=closure)

    a, b, T = p
    x, v = _start(x0, v0, c, a, b)
    xT, vT, rec = integrate_steps(K, c, x, v, T / steps, steps, record_every=steps // n)
    speed_drift = abs(np.linalg.norm(vT) - c) / c
    return OrbitResult(PhasePoint(x, v), float(T), Loop(np.array(rec)), closure, float(speed_drift), it)


@dataclass(frozen=True)
class CrossValidation:
    epsilon: float
    speed: float
    distance: float
    phase: float
    period: float
    expected_period: float
    period_rel_error: float
    closure_error: float
    orbit: OrbitResult

    def passed(self, distance_tol: float = 1e-5, period_tol: float = 1e-6) -> bool:
        return self.distance <= distance_tol and self.period_rel_error <= period_tol


def cross_validate_loop(loop: Loop, epsilon: float, K: FieldSpec,
                        opts: ShootingOptions = ShootingOptions()) -> CrossValidation:
    """Shoot from a variational solution at the physical speed ``c = 1/eps``.

    At ``eps = 0`` the field drops out and unit speed is used.
    """
    if epsilon == 0.0:
        c, field = 1.0, FieldSpec.zero()
    else:
        c, field = 1.0 / epsilon, K
    if c < 0:
        # negative eps is the same curve traversed by a particle in the field -K
        c, field = -c, FieldSpec.polynomial([(e, -k) for e, k in K.terms], allow_zero=True)
    orbit = find_periodic(field, c, loop, opts)
    expected = 2.0 * np.pi * length_functional(loop) / c
    dist, phase = phase_align_distance(orbit.samples, loop)
    return CrossValidation(
        epsilon=float(epsilon), speed=c, distance=dist, phase=phase, period=orbit.period,
        expected_period=expected, period_rel_error=abs(orbit.period - expected) / expected,
        closure_error=orbit.closure_error, orbit=orbit,
    )


def cross_validate(state: ReductionState, K: FieldSpec,
                   opts: ShootingOptions = ShootingOptions()) -> CrossValidation:
    return cross_validate_loop(state.corrected_loop, state.epsilon, K, opts)
