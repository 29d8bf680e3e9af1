import numpy as np
import pytest
from hypothesis import settings
from scipy.spatial.transform import Rotation

from kmagnetic.field import FieldSpec

settings.register_profile("default", deadline=None, max_examples=40, derandomize=True)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_rotation(rng) -> np.ndarray:
    return Rotation.random(random_state=int(rng.integers(2**31))).as_matrix()


def random_unit(rng, size=None) -> np.ndarray:
    v = rng.normal(size=(3,) if size is None else (size, 3))
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def random_field(rng, terms: int = 4, max_degree: int = 4) -> FieldSpec:
    out = []
    for _ in range(terms):
        d = int(rng.integers(0, max_degree + 1))
        a = int(rng.integers(0, d + 1))
        b = int(rng.integers(0, d - a + 1))
        out.append(((a, b, d - a - b), float(rng.normal())))
    return FieldSpec.polynomial(out, allow_zero=True)


LINEAR_Z = FieldSpec.preset("linear_z")
CONSTANT_ONE = FieldSpec.preset("constant_one")
XY_PRODUCT = FieldSpec.preset("xy_product")


def star_loop(rng, n: int = 256, R=None) -> "Loop":
    """Random embedded loop, star-shaped about its center: a wobbly latitude circle."""
    from kmagnetic.loops import Loop, grid

    t = grid(n)
    rho = rng.uniform(0.4, 1.4) + sum(
        0.08 / k * rng.normal() * np.cos(k * t + rng.uniform(0, 2 * np.pi)) for k in range(1, 5)
    )
    az = t + sum(0.05 / k * rng.normal() * np.sin(k * t) for k in range(1, 4))
    pts = np.column_stack([np.sin(rho) * np.cos(az), np.sin(rho) * np.sin(az), np.cos(rho)])
    R = random_rotation(rng) if R is None else R
    return Loop(pts @ np.asarray(R).T)


def random_tangent(rng, R, n: int = 256, modes: int = 12):
    """Band-limited tangent field along the great circle of ``R``, as an (n, 3) array."""
    from kmagnetic.functionals import psi_inverse
    from kmagnetic.loops import FrameCoeffs, grid

    t = grid(n)

    def series():
        return sum(rng.normal() / k * np.cos(k * t) + rng.normal() / k * np.sin(k * t)
                   for k in range(1, modes + 1)) + rng.normal()

    return psi_inverse(R, FrameCoeffs(series(), series()))


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
