import numpy as np
import pytest
from hypothesis import given, strategies as st

from kmagnetic.errors import DegenerateCurveError, InvalidArgumentError, IrregularCurveError
from kmagnetic.loops import (
    FrameCoeffs,
    Loop,
    TangentLoopField,
    derivative,
    frame_compose,
    frame_decompose,
    geodesic_curvature,
    great_circle,
    grid,
    is_embedded,
    latitude_circle,
    length_functional,
    phase_align_distance,
    spectral_derivative,
)
from kmagnetic.sphere import axis_rotation_angle, stereographic_inverse, unit

from conftest import random_rotation, random_unit

N = 256
OMEGA = great_circle(np.eye(3), N)


def smooth_loop(rng, n=N, amp=0.3, modes=4, R=None) -> Loop:
    """Perturbed latitude circle with a few Fourier modes in colatitude and azimuth."""
    t = grid(n)
    rho = 1.0 + sum(amp / (k + 1) * rng.normal() * np.cos(k * t + rng.uniform(0, 6)) for k in range(1, modes))
    az = t + sum(0.1 / (k + 1) * rng.normal() * np.sin(k * t) for k in range(1, modes))
    pts = np.column_stack([np.sin(rho) * np.cos(az), np.sin(rho) * np.sin(az), np.cos(rho)])
    return Loop(pts if R is None else pts @ R.T)


def figure_eight(n=N) -> Loop:
    t = grid(n)
    w = 0.8 * np.column_stack([np.sin(t), np.sin(t) * np.cos(t)])
    return Loop(stereographic_inverse(np.array([0.0, 0.0, -1.0]), w))


def test_loop_validation():
    with pytest.raises(InvalidArgumentError):
        Loop(np.ones((31, 3)) / np.sqrt(3))
    with pytest.raises(InvalidArgumentError):
        Loop(np.ones((34, 3)))
    u = Loop(OMEGA.samples * (1 + 1e-9))
    assert np.max(np.abs(np.linalg.norm(u.samples, axis=1) - 1)) <= 1e-15


def test_spectral_derivative_band_limited():
    t = grid(64)
    f = np.cos(3 * t) + 0.5 * np.sin(31 * t)
    assert np.max(np.abs(spectral_derivative(f, 1) - (-3 * np.sin(3 * t) + 15.5 * np.cos(31 * t)))) <= 1e-10
    assert np.max(np.abs(spectral_derivative(f, 2) - (-9 * np.cos(3 * t) - 0.5 * 961 * np.sin(31 * t)))) <= 1e-9


def test_great_circle_derivatives(rng):
    assert np.allclose(OMEGA.samples, np.column_stack([np.cos(grid(N)), np.sin(grid(N)), np.zeros(N)]))
    assert np.max(np.abs(np.linalg.norm(derivative(OMEGA, 1), axis=1) - 1)) <= 1e-12
    for n in (32, 64, 256):
        w = great_circle(random_rotation(rng), n)
        assert np.max(np.abs(derivative(w, 2) + w.samples)) <= 1e-10
        assert np.max(np.abs(np.linalg.norm(w.samples, axis=1) - 1)) <= 1e-15


def test_great_circle_center_orthogonal(rng):
    R = random_rotation(rng)
    assert np.max(np.abs(great_circle(R, N).samples @ R[:, 2])) <= 1e-15


def test_latitude_speed_and_length():
    rho = 0.7
    u = latitude_circle(rho, N)
    assert np.max(np.abs(u.speed - np.sin(rho))) <= 1e-12
    assert length_functional(OMEGA) == pytest.approx(1.0, abs=1e-14)
    assert length_functional(latitude_circle(np.pi / 4, N)) == pytest.approx(np.sin(np.pi / 4), abs=1e-14)


def test_length_invariance(rng):
    u = smooth_loop(rng)
    L = length_functional(u)
    for _ in range(5):
        v = u.rotate(random_rotation(rng)).shift(rng.uniform(0, 2 * np.pi))
        assert abs(length_functional(v) - L) <= 1e-12


def test_length_degenerate():
    with pytest.raises(DegenerateCurveError):
        length_functional(Loop(np.tile([0.0, 0.0, 1.0], (N, 1))))


def test_arclength_bound(rng):
    for u in (smooth_loop(rng), latitude_circle(0.4, N), OMEGA):
        poly = np.sum(np.linalg.norm(np.roll(u.samples, -1, axis=0) - u.samples, axis=1))
        assert poly <= 2 * np.pi * length_functional(u) + 1e-3
    # a latitude circle is a regular polygon in its plane
    w = latitude_circle(0.4, N)
    poly = np.sum(np.linalg.norm(np.roll(w.samples, -1, axis=0) - w.samples, axis=1))
    assert abs(poly - 2 * N * np.sin(0.4) * np.sin(np.pi / N)) <= 1e-12
    assert abs(length_functional(w) - np.sin(0.4)) <= 1e-14


def test_geodesic_curvature_examples():
    assert np.max(np.abs(geodesic_curvature(OMEGA))) <= 1e-12
    rho = 0.6
    lc = latitude_circle(rho, N)
    assert np.max(np.abs(geodesic_curvature(lc) - 1 / np.tan(rho))) <= 1e-10
    assert np.max(np.abs(geodesic_curvature(lc.reversed()) + 1 / np.tan(rho))) <= 1e-10


def test_geodesic_curvature_irregular():
    t = grid(N)
    # speed vanishes at theta = 0 and pi
    pts = unit(np.column_stack([np.cos(np.sin(t) ** 3), np.sin(np.sin(t) ** 3), 0.1 + 0 * t]))
    with pytest.raises(IrregularCurveError):
        geodesic_curvature(Loop(pts))


def test_curvature_invariance(rng):
    u = smooth_loop(rng)
    k = geodesic_curvature(u)
    R = random_rotation(rng)
    shift = 2 * np.pi * 5 / N
    v = u.rotate(R).shift(shift)
    assert np.max(np.abs(geodesic_curvature(v) - np.roll(k, -5))) <= 1e-10


def test_frame_examples():
    g = frame_decompose(OMEGA, OMEGA.d1)
    assert np.allclose(g.g1, 1, atol=1e-12) and np.allclose(g.g2, 0, atol=1e-12)
    g = frame_decompose(OMEGA, np.cross(OMEGA.samples, OMEGA.d1))
    assert np.allclose(g.g1, 0, atol=1e-12) and np.allclose(g.g2, 1, atol=1e-12)


def test_frame_round_trip(rng):
    u = smooth_loop(rng)
    t = grid(N)
    g = FrameCoeffs(np.cos(2 * t) + rng.normal() * np.sin(5 * t), np.sin(t) ** 3)
    phi = frame_compose(u, g)
    back = frame_decompose(u, phi)
    assert np.max(np.abs(back.g1 - g.g1)) <= 1e-10 and np.max(np.abs(back.g2 - g.g2)) <= 1e-10
    again = frame_compose(u, back)
    assert np.max(np.abs(again.values - phi.values)) <= 1e-10


def test_tangent_field_validation():
    with pytest.raises(InvalidArgumentError):
        TangentLoopField(OMEGA, OMEGA.samples)


@given(st.floats(0, 2 * np.pi))
def test_phase_alignment_recovers_shift(phase):
    u = smooth_loop(np.random.default_rng(7))
    d, found = phase_align_distance(u, u.shift(phase))
    assert d <= 1e-8
    assert min(abs(found - phase), 2 * np.pi - abs(found - phase)) <= 1e-7


def test_phase_alignment_circles():
    delta = 0.01
    d, _ = phase_align_distance(OMEGA, latitude_circle(np.pi / 2 - delta, N))
    assert abs(d - delta) <= 0.1 * delta
    d, _ = phase_align_distance(OMEGA, OMEGA.reversed())
    assert d > 1.0


def test_embeddedness():
    assert is_embedded(OMEGA)
    assert is_embedded(latitude_circle(0.1, N))
    assert not is_embedded(figure_eight())


def test_csv_round_trip(tmp_path, rng):
    u = smooth_loop(rng)
    path = tmp_path / "loop.csv"
    u.to_csv(path)
    assert path.read_text().splitlines()[0] == "theta,x,y,z"
    v = Loop.from_csv(path)
    assert np.max(np.abs(u.samples - v.samples)) <= 1e-15
    for bad in ["x,y,z\n1,2,3\n", "theta,x,y,z\n0,1,0\n", "theta,x,y,z\n0,a,0,0\n"]:
        with pytest.raises(InvalidArgumentError):
            Loop.from_csv(bad, is_text=True)


def test_reversal_and_rotation_about_axis():
    xi = 0.9
    shifted = OMEGA.rotate(axis_rotation_angle(3, xi))
    assert np.max(np.abs(shifted.samples - OMEGA.shift(xi).samples)) <= 1e-13
    assert np.allclose(OMEGA.reversed().reversed().samples, OMEGA.samples)
