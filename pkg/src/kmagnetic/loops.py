"""Closed curves on the sphere sampled on a uniform grid, with spectral calculus."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import DegenerateCurveError, InvalidArgumentError, IrregularCurveError
from .sphere import as_rotation, unit

DEFAULT_POINTS = 256
REGULARITY_TOL = 1e-8
EMBED_TOL = 1e-4


def grid(n: int) -> np.ndarray:
    return 2.0 * np.pi * np.arange(n) / n


def check_size(n: int) -> int:
    if n < 32 or n % 2:
        raise InvalidArgumentError(f"loop size must be even and at least 32, got {n}")
    return int(n)


def _wavenumbers(n: int) -> np.ndarray:
    return np.arange(n // 2 + 1, dtype=float)


def spectral_derivative(values, order: int = 1) -> np.ndarray:
    """Periodic derivative along axis 0 of samples on the uniform grid.

    Odd orders drop the Nyquist mode, whose derivative is not real.
    """
    values = np.asarray(values, dtype=float)
    if order < 0:
        raise InvalidArgumentError("derivative order must be non-negative")
    if order == 0:
        return values.copy()
    n = values.shape[0]
    k = _wavenumbers(n)
    symbol = (1j * k) ** order
    if order % 2:
        symbol[-1] = 0.0
    shape = (-1,) + (1,) * (values.ndim - 1)
    coeffs = np.fft.rfft(values, axis=0) * symbol.reshape(shape)
    return np.fft.irfft(coeffs, n=n, axis=0)


def spectral_shift(values, phase: float) -> np.ndarray:
    """Samples of the trigonometric interpolant at ``theta_k + phase``."""
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    shape = (-1,) + (1,) * (values.ndim - 1)
    factor = np.exp(1j * _wavenumbers(n) * phase).reshape(shape)
    # irfft keeps only the real part of the Nyquist coefficient, i.e. the cosine
    return np.fft.irfft(np.fft.rfft(values, axis=0) * factor, n=n, axis=0)


def mean(values) -> np.ndarray:
    """Average over the circle (trapezoid rule on the uniform grid)."""
    return np.mean(np.asarray(values, dtype=float), axis=0)


def dot(a, b) -> np.ndarray:
    return np.einsum("...i,...i->...", a, b)


@dataclass(frozen=True, eq=False)
class Loop:
    """A closed curve ``u`` sampled at ``theta_k = 2 pi k / N``.

    Samples are normalized on construction; derivatives are cached.
    """

    samples: np.ndarray

    def __post_init__(self):
        s = np.array(self.samples, dtype=float)
        if s.ndim != 2 or s.shape[1] != 3:
            raise InvalidArgumentError(f"loop samples must have shape (N, 3), got {s.shape}")
        check_size(s.shape[0])
        if not np.all(np.isfinite(s)):
            raise InvalidArgumentError("loop samples must be finite")
        norms = np.linalg.norm(s, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-6):
            raise InvalidArgumentError("loop samples must lie on the unit sphere")
        s = s / norms[:, None]
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def theta(self) -> np.ndarray:
        return grid(self.n)

    @cached_property
    def d1(self) -> np.ndarray:
        return spectral_derivative(self.samples, 1)

    @cached_property
    def d2(self) -> np.ndarray:
        return spectral_derivative(self.samples, 2)

    @cached_property
    def speed(self) -> np.ndarray:
        return np.linalg.norm(self.d1, axis=1)

    @property
    def is_constant(self) -> bool:
        s = self.samples
        return float(np.max(np.linalg.norm(s - s[0], axis=1))) < 1e-10

    @property
    def is_regular(self) -> bool:
        return bool(np.min(self.speed) > REGULARITY_TOL)

    def require_regular(self) -> None:
        if not self.is_regular:
            raise IrregularCurveError(
                f"curve speed vanishes (min |u'| = {np.min(self.speed):.3g})"
            )

    # -- symmetries --------------------------------------------------------
    def rotate(self, R) -> "Loop":
        return Loop(self.samples @ np.asarray(R, dtype=float).T)

    def shift(self, phase: float) -> "Loop":
        """The reparameterized loop ``theta -> u(theta + phase)``."""
        return Loop(unit(spectral_shift(self.samples, phase)))

    def reversed(self) -> "Loop":
        """``theta -> u(-theta)``, same node set."""
        return Loop(np.roll(self.samples[::-1], 1, axis=0))

    # -- serialization -----------------------------------------------------
    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        buf.write("theta,x,y,z\n")
        for t, (x, y, z) in zip(self.theta, self.samples):
            buf.write(f"{t:.17g},{x:.17g},{y:.17g},{z:.17g}\n")
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, path_or_text, *, is_text: bool = False) -> "Loop":
        text = path_or_text if is_text else Path(path_or_text).read_text()
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or [c.strip() for c in rows[0]] != ["theta", "x", "y", "z"]:
            raise InvalidArgumentError("loop CSV must start with header 'theta,x,y,z'")
        body = [r for r in rows[1:] if r]
        try:
            data = np.array([[float(c) for c in r] for r in body], dtype=float)
        except ValueError as exc:
            raise InvalidArgumentError(f"unparsable loop CSV: {exc}") from exc
        if data.ndim != 2 or data.shape[1] != 4:
            raise InvalidArgumentError("loop CSV rows must have four columns")
        n = data.shape[0]
        check_size(n)
        if np.max(np.abs(data[:, 0] - grid(n))) > 1e-9:
            raise InvalidArgumentError("loop CSV theta column is not the uniform grid")
        return cls(data[:, 1:])


@dataclass(frozen=True, eq=False)
class TangentLoopField:
    """Vectors ``values[k]`` tangent to the sphere at ``base.samples[k]``."""

    base: Loop
    values: np.ndarray
    tol: float = 1e-10

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != self.base.samples.shape:
            raise InvalidArgumentError("field shape does not match its base loop")
        normal = np.max(np.abs(dot(v, self.base.samples)), initial=0.0)
        if normal > self.tol * max(1.0, float(np.max(np.abs(v), initial=0.0))):
            raise InvalidArgumentError(f"field is not tangent to its base (defect {normal:.3g})")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class FrameCoeffs:
    """Coordinates ``(g1, g2)`` of a tangent field in the moving frame."""

    g1: np.ndarray
    g2: np.ndarray

    def __post_init__(self):
        g1 = np.asarray(self.g1, dtype=float)
        g2 = np.asarray(self.g2, dtype=float)
        if g1.shape != g2.shape or g1.ndim != 1:
            raise InvalidArgumentError("frame coefficients must be two arrays of equal length")
        object.__setattr__(self, "g1", g1)
        object.__setattr__(self, "g2", g2)


# -- operations ----------------------------------------------------------

def derivative(u: Loop, order: int = 1) -> np.ndarray:
    if order == 1:
        return u.d1.copy()
    if order == 2:
        return u.d2.copy()
    raise InvalidArgumentError("order must be 1 or 2")


def length_functional(u: Loop) -> float:
    """Root-mean-square speed ``L(u)``."""
    if u.is_constant:
        raise DegenerateCurveError("length functional is undefined on a constant loop")
    return float(np.sqrt(np.mean(u.speed ** 2)))


def geodesic_curvature(u: Loop) -> np.ndarray:
    u.require_regular()
    cross = np.cross(u.samples, u.d1)
    return dot(u.d2, cross) / u.speed ** 3


def great_circle(R, n: int = DEFAULT_POINTS) -> Loop:
    """The equator rotated by ``R``: ``theta -> R (cos theta, sin theta, 0)``."""
    R = as_rotation(R)
    t = grid(check_size(n))
    eq = np.column_stack([np.cos(t), np.sin(t), np.zeros_like(t)])
    return Loop(eq @ R.T)


def latitude_circle(rho: float, n: int = DEFAULT_POINTS, R=None) -> Loop:
    """Circle at colatitude ``rho`` about ``R e3``, counterclockwise about that axis."""
    t = grid(check_size(n))
    pts = np.column_stack(
        [np.sin(rho) * np.cos(t), np.sin(rho) * np.sin(t), np.full_like(t, np.cos(rho))]
    )
    if R is not None:
        pts = pts @ as_rotation(R).T
    return Loop(pts)


def _frame(u: Loop) -> tuple[np.ndarray, np.ndarray]:
    u.require_regular()
    t = u.d1 / u.speed[:, None]
    return t, np.cross(u.samples, t)


def frame_decompose(u: Loop, phi) -> FrameCoeffs:
    """Coordinates of ``phi`` in the unit frame ``(u'/|u'|, u x u'/|u'|)``."""
    values = phi.values if isinstance(phi, TangentLoopField) else np.asarray(phi, dtype=float)
    t, nrm = _frame(u)
    return FrameCoeffs(dot(values, t), dot(values, nrm))


def frame_compose(u: Loop, g: FrameCoeffs) -> TangentLoopField:
    t, nrm = _frame(u)
    return TangentLoopField(u, g.g1[:, None] * t + g.g2[:, None] * nrm)


def phase_align_distance(u: Loop, v: Loop, trials_per_node: int = 4) -> tuple[float, float]:
    """``min_phase max_k |u(theta_k + phase) - v(theta_k)|`` and the minimizing phase.

    Orientation is not quotiented out.
    """
    if u.n != v.n:
        raise InvalidArgumentError("loops must have the same number of samples")
    n = u.n
    coeffs = np.fft.rfft(u.samples, axis=0)
    k = _wavenumbers(n)

    def sup_dist(phases):
        phases = np.atleast_1d(phases)
        shifted = np.fft.irfft(
            coeffs[None, :, :] * np.exp(1j * np.outer(phases, k))[:, :, None], n=n, axis=1
        )
        return np.max(np.linalg.norm(shifted - v.samples[None], axis=2), axis=1)

    m = trials_per_node * n
    trial = 2.0 * np.pi * np.arange(m) / m
    values = np.concatenate([sup_dist(chunk) for chunk in np.array_split(trial, 8)])
    i = int(np.argmin(values))
    h = 2.0 * np.pi / m
    # optimize the offset from the trial node: the bounded method's relative
    # tolerance would otherwise cap the phase accuracy near 1e-8
    res = minimize_scalar(
        lambda s: float(sup_dist(trial[i] + s)[0]),
        bounds=(-h, h),
        method="bounded",
        options={"xatol": 1e-14},
    )
    if res.fun < values[i]:
        best, phase = float(res.fun), trial[i] + float(res.x)
    else:
        best, phase = float(values[i]), trial[i]
    return best, float(np.mod(phase, 2.0 * np.pi))


def min_separation(u: Loop, window: int | None = None) -> float:
    """Smallest distance between samples more than ``window`` nodes apart."""
    n = u.n
    window = n // 16 if window is None else window
    idx = np.arange(n)
    gap = np.abs(idx[:, None] - idx[None, :])
    gap = np.minimum(gap, n - gap)
    diff = u.samples[:, None, :] - u.samples[None, :, :]
    dist = np.linalg.norm(diff, axis=2)
    return float(np.min(dist[gap > window]))


def is_embedded(u: Loop, tol: float = EMBED_TOL) -> bool:
    """Sampled injectivity test: far-apart nodes stay at least ``tol`` apart."""
    u.require_regular()
    return min_separation(u) > tol
