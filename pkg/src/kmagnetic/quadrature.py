"""Quadrature rules shared by the field and Melnikov modules."""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import roots_legendre

from .errors import InvalidArgumentError


@lru_cache(maxsize=32)
def gauss_legendre_unit(m: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on ``[0, 1]``."""
    x, w = roots_legendre(m)
    nodes, weights = 0.5 * (x + 1.0), 0.5 * w
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


@lru_cache(maxsize=32)
def cap_rule(m: int = 24, n: int = 64) -> tuple[np.ndarray, np.ndarray]:
    """Product rule on the upper hemisphere ``{x3 >= 0}``.

    Gauss-Legendre in ``cos(colatitude)`` times the trapezoid rule in
    azimuth.  Integrates polynomials of degree ``<= min(2m - 1, n - 1)``
    exactly.  Returns ``(points (m*n, 3), weights (m*n,))``.
    """
    if m < 1 or n < 1:
        raise InvalidArgumentError("quadrature sizes must be positive")
    t, wt = gauss_legendre_unit(m)
    phi = 2.0 * np.pi * np.arange(n) / n
    s = np.sqrt(1.0 - t * t)
    pts = np.stack(
        [
            np.outer(s, np.cos(phi)),
            np.outer(s, np.sin(phi)),
            np.outer(t, np.ones(n)),
        ],
        axis=-1,
    ).reshape(-1, 3)
    weights = np.repeat(wt * (2.0 * np.pi / n), n)
    pts.setflags(write=False)
    weights.setflags(write=False)
    return pts, weights
