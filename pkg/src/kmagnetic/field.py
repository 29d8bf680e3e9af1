"""The magnetic intensity ``K`` as a polynomial in ambient coordinates."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field as dc_field
from functools import cached_property
from typing import Any, Mapping

import numpy as np

from .errors import ConfigError
from .quadrature import cap_rule
from .sphere import fibonacci_sphere

MAX_DEGREE = 8

PRESETS: dict[str, tuple[tuple[tuple[int, int, int], float], ...]] = {
    "linear_z": (((0, 0, 1), 1.0),),
    "constant_one": (((0, 0, 0), 1.0),),
    "xy_product": (((1, 1, 0), 1.0),),
}


class GaussLawWarning(UserWarning):
    """The field does not integrate to zero over the sphere."""


def _combine(terms) -> tuple[tuple[tuple[int, int, int], float], ...]:
    acc: dict[tuple[int, int, int], float] = {}
    for exps, coef in terms:
        key = tuple(int(e) for e in exps)
        acc[key] = acc.get(key, 0.0) + float(coef)
    return tuple(sorted((k, v) for k, v in acc.items() if v != 0.0))


@dataclass(frozen=True, eq=False)
class FieldSpec:
    """Polynomial ``K(p) = sum coef * p1^a p2^b p3^c`` restricted to the sphere.

    Use :meth:`polynomial`, :meth:`preset` or :meth:`from_document` to build
    one; the zero field must be requested with ``allow_zero=True``.
    """

    terms: tuple[tuple[tuple[int, int, int], float], ...]
    description: str = ""
    allow_zero: bool = False
    _arrays: Any = dc_field(default=None, repr=False)

    def __post_init__(self):
        for exps, coef in self.terms:
            if len(exps) != 3 or any(e < 0 for e in exps):
                raise ConfigError(f"invalid monomial exponents {exps!r}")
            if sum(exps) > MAX_DEGREE:
                raise ConfigError(f"monomial degree {sum(exps)} exceeds {MAX_DEGREE}")
            if not np.isfinite(coef):
                raise ConfigError("non-finite coefficient")
        if not self.terms and not self.allow_zero:
            raise ConfigError("field has no nonzero coefficient (use allow_zero for K = 0)")
        exps = np.array([t[0] for t in self.terms], dtype=int).reshape(-1, 3)
        coefs = np.array([t[1] for t in self.terms], dtype=float)
        object.__setattr__(self, "_arrays", (exps, coefs))

    # -- constructors ------------------------------------------------------
    @classmethod
    def polynomial(cls, terms, description: str = "", allow_zero: bool = False) -> "FieldSpec":
        return cls(_combine(terms), description or "polynomial", allow_zero)

    @classmethod
    def preset(cls, name: str) -> "FieldSpec":
        if name not in PRESETS:
            raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
        return cls(_combine(PRESETS[name]), name)

    @classmethod
    def zero(cls) -> "FieldSpec":
        return cls((), "zero", allow_zero=True)

    @classmethod
    def constant(cls, value: float) -> "FieldSpec":
        return cls.polynomial([((0, 0, 0), value)], f"constant {value!r}", allow_zero=True)

    @classmethod
    def from_document(cls, doc: Mapping) -> "FieldSpec":
        """Parse ``{"type": "polynomial", "terms": [...]}`` or ``{"type": "preset", "name": ...}``."""
        if not isinstance(doc, Mapping):
            raise ConfigError("field must be a mapping")
        kind = doc.get("type")
        if kind == "preset":
            return cls.preset(str(doc.get("name")))
        if kind == "polynomial":
            raw = doc.get("terms")
            if not isinstance(raw, list) or not raw:
                raise ConfigError("polynomial field needs a non-empty 'terms' list")
            terms = []
            for item in raw:
                try:
                    exps = tuple(int(e) for e in item["exps"])
                    coef = float(item["coef"])
                except (KeyError, TypeError, ValueError) as exc:
                    raise ConfigError(f"malformed term {item!r}") from exc
                if len(exps) != 3:
                    raise ConfigError(f"exponents must have length 3: {item!r}")
                terms.append((exps, coef))
            return cls.polynomial(terms, str(doc.get("description", "polynomial")),
                                  allow_zero=bool(doc.get("allow_zero", False)))
        raise ConfigError(f"unknown field type {kind!r}")

    def to_document(self) -> dict:
        return {
            "type": "polynomial",
            "description": self.description,
            "terms": [{"exps": list(e), "coef": c} for e, c in self.terms],
        }

    # -- evaluation --------------------------------------------------------
    @property
    def degree(self) -> int:
        return max((sum(e) for e, _ in self.terms), default=0)

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def __call__(self, p) -> np.ndarray:
        return self.eval(p)

    def eval(self, p) -> np.ndarray:
        """Value at ``p``; ``p`` may be any array of 3-vectors."""
        p = np.asarray(p, dtype=float)
        exps, coefs = self._arrays
        out = np.zeros(p.shape[:-1])
        for (a, b, c), k in zip(exps, coefs):
            out = out + k * p[..., 0] ** a * p[..., 1] ** b * p[..., 2] ** c
        return out if out.ndim else float(out)

    def ambient_gradient(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        exps, coefs = self._arrays
        out = np.zeros(p.shape)
        x, y, z = p[..., 0], p[..., 1], p[..., 2]
        for (a, b, c), k in zip(exps, coefs):
            if a:
                out[..., 0] += k * a * x ** (a - 1) * y ** b * z ** c
            if b:
                out[..., 1] += k * b * x ** a * y ** (b - 1) * z ** c
            if c:
                out[..., 2] += k * c * x ** a * y ** b * z ** (c - 1)
        return out

    def eval_gradient(self, p) -> np.ndarray:
        """Gradient of ``K`` along the sphere (ambient gradient projected on ``T_p``)."""
        p = np.asarray(p, dtype=float)
        g = self.ambient_gradient(p)
        return g - np.sum(g * p, axis=-1, keepdims=True) * p

    def rotated(self, R) -> "FieldSpec":
        """The field ``p -> K(R^t p)``, expanded back into monomials."""
        R = np.asarray(R, dtype=float)
        # coordinate j of R^t p is the linear form sum_i R[i, j] p_i
        linear = [
            {(1, 0, 0): R[0, j], (0, 1, 0): R[1, j], (0, 0, 1): R[2, j]} for j in range(3)
        ]
        total: dict[tuple[int, int, int], float] = {}
        for exps, coef in self.terms:
            poly = {(0, 0, 0): coef}
            for j, e in enumerate(exps):
                for _ in range(e):
                    poly = _poly_mul(poly, linear[j])
            for k, v in poly.items():
                total[k] = total.get(k, 0.0) + v
        # drop round-off terms relative to the largest coefficient
        cmax = max((abs(v) for v in total.values()), default=0.0)
        terms = [(k, v) for k, v in total.items() if abs(v) > 1e-15 * cmax]
        return FieldSpec.polynomial(terms, f"rotated {self.description}", allow_zero=True)

    def plus(self, other: "FieldSpec", weight: float = 1.0) -> "FieldSpec":
        terms = list(self.terms) + [(e, weight * c) for e, c in other.terms]
        return FieldSpec.polynomial(terms, f"{self.description} + {weight!r}*({other.description})",
                                    allow_zero=True)

    @cached_property
    def scale(self) -> float:
        """Estimate of ``max |K|`` on the sphere (dense lattice plus the axes)."""
        if self.is_zero:
            return 0.0
        pts = np.vstack([fibonacci_sphere(4096), np.eye(3), -np.eye(3)])
        return float(np.max(np.abs(self.eval(pts))))


def _poly_mul(a: dict, b: dict) -> dict:
    out: dict = {}
    for ka, va in a.items():
        for kb, vb in b.items():
            if vb == 0.0:
                continue
            k = (ka[0] + kb[0], ka[1] + kb[1], ka[2] + kb[2])
            out[k] = out.get(k, 0.0) + va * vb
    return out


def sphere_mean(K: FieldSpec, m: int = 24, n: int = 64) -> float:
    """Integral of ``K`` over the whole sphere (not divided by the area)."""
    pts, w = cap_rule(m, n)
    upper = np.dot(w, K.eval(pts))
    lower = np.dot(w, K.eval(pts * np.array([1.0, -1.0, -1.0])))
    return float(upper + lower)


def check_gauss_law(K: FieldSpec, rel_tol: float = 1e-6) -> bool:
    """Warn (not raise) when the sphere integral of ``K`` is not zero."""
    total = sphere_mean(K)
    ok = abs(total) <= rel_tol * max(K.scale, np.finfo(float).tiny)
    if not ok:
        warnings.warn(
            f"field {K.description!r} has nonzero total flux {total:.6g}",
            GaussLawWarning,
            stacklevel=2,
        )
    return ok
