import numpy as np
import pytest

from kmagnetic.errors import InvalidArgumentError, ShootingFailureError, StabilityError
from kmagnetic.field import FieldSpec
from kmagnetic.loops import Loop, geodesic_curvature, great_circle, latitude_circle, phase_align_distance
from kmagnetic.reduction import reduced_energy, solve_corrector
from kmagnetic.shooting import (
    PhasePoint,
    ShootingOptions,
    cross_validate,
    cross_validate_loop,
    find_periodic,
    integrate,
)
from kmagnetic.sphere import E1, E2, E3, axis_rotation_angle, unit

from conftest import LINEAR_Z, random_rotation

TILTED = FieldSpec.polynomial([((0, 0, 1), 1.0), ((1, 0, 0), 0.5), ((0, 1, 1), 2.0)])
N = 256


def test_phase_point_validation():
    with pytest.raises(InvalidArgumentError):
        PhasePoint(E3, E3)
    with pytest.raises(InvalidArgumentError):
        PhasePoint(2 * E3, E1)
    assert PhasePoint(E3, 2 * E1).speed == 2.0


def test_step_size_guard():
    with pytest.raises(StabilityError):
        integrate(LINEAR_Z, 1.0, PhasePoint(E1, E2), 1.0, dt=0.1)
    with pytest.raises(InvalidArgumentError):
        integrate(LINEAR_Z, 2.0, PhasePoint(E1, E2), 1.0)


def test_zero_field_great_circle():
    c = 3.0
    _, xs, _ = integrate(FieldSpec.zero(), c, PhasePoint(E1, c * E2), 2 * np.pi / c)
    assert np.max(np.abs(xs @ E3)) <= 1e-14
    assert np.linalg.norm(xs[-1] - E1) <= 1e-10


def test_rk4_order():
    x0 = unit(np.array([1.0, 0.2, 0.1]))
    v0 = unit(np.cross(x0, E3))
    start = PhasePoint(x0, v0)
    T = 2.0
    ref = integrate(TILTED, 1.0, start, T, dt=T / 3200, project=False)[1][-1]
    errs = [np.linalg.norm(integrate(TILTED, 1.0, start, T, dt=T / m, project=False)[1][-1] - ref)
            for m in (100, 200)]
    assert 12 < errs[0] / errs[1] < 20


def test_speed_conservation_and_reversibility():
    x0 = unit(np.array([0.3, -0.6, 0.4]))
    v0 = 5.0 * unit(np.cross(x0, E1))
    start = PhasePoint(x0, v0)
    T = 2 * np.pi / 5.0
    _, xs, vs = integrate(TILTED, 5.0, start, T, project=False)
    assert np.max(np.abs(np.linalg.norm(vs, axis=1) - 5.0)) <= 1e-9
    assert np.max(np.abs(np.linalg.norm(xs, axis=1) - 1.0)) <= 1e-9
    end = PhasePoint(unit(xs[-1]), vs[-1] - np.dot(vs[-1], unit(xs[-1])) * unit(xs[-1]))
    c_end = end.speed
    _, back, _ = integrate(TILTED, c_end, end, -T)
    assert np.linalg.norm(back[-1] - x0) <= 1e-8


def test_zero_field_newton_fixes_period():
    # a latitude guess gives the wrong period; Newton has to correct it
    guess = latitude_circle(1.3, N)
    orbit = find_periodic(FieldSpec.zero(), 2.0, guess)
    assert orbit.iterations >= 1
    assert orbit.period == pytest.approx(np.pi, abs=1e-8)
    assert orbit.closure_error <= 1e-8
    assert np.max(np.abs(geodesic_curvature(orbit.samples))) <= 1e-8


def test_constant_field_circle():
    kappa, c = 0.4, 1.0
    rho = np.arctan2(1.0, kappa)
    guess = latitude_circle(rho + 0.02, N)
    orbit = find_periodic(FieldSpec.constant(kappa), c, guess)
    assert orbit.iterations >= 1
    assert orbit.closure_error <= 1e-8
    assert orbit.period == pytest.approx(2 * np.pi * np.sin(rho) / c, rel=1e-8)
    assert np.max(np.abs(geodesic_curvature(orbit.samples) - kappa / c)) <= 1e-8


def test_shooting_failure_reported():
    opts = ShootingOptions(max_iters=0)
    with pytest.raises(ShootingFailureError):
        find_periodic(FieldSpec.zero(), 1.0, latitude_circle(1.0, N), opts)


def test_zero_field_cross_validation(rng):
    omega = great_circle(random_rotation(rng), N)
    cv = cross_validate_loop(omega, 0.0, TILTED)
    assert cv.speed == 1.0
    assert cv.period == pytest.approx(2 * np.pi, abs=1e-8)
    assert cv.distance <= 1e-8 and cv.passed()


def test_cross_validate_linear_field():
    st = reduced_energy(0.1, E3, LINEAR_Z).state
    cv = cross_validate(st, LINEAR_Z)
    assert cv.speed == pytest.approx(10.0)
    assert cv.closure_error <= 1e-8
    assert cv.distance <= 1e-5 and cv.period_rel_error <= 1e-6


def test_cross_validate_negative_epsilon():
    st = reduced_energy(-0.1, -E3, LINEAR_Z).state
    cv = cross_validate(st, LINEAR_Z)
    assert cv.speed == pytest.approx(10.0)
    assert cv.distance <= 1e-5


def test_perturbed_start_returns_to_orbit():
    # start from a rotated copy of a genuine solution so Newton has work to do
    from kmagnetic.reduction import critical_search

    eps = 0.1
    sol = next(c for c in critical_search(eps, TILTED, seeds=np.array([[0.45, 0.0, 0.9]])) if c.is_solution)
    u = sol.state.corrected_loop
    guess = Loop(u.samples @ axis_rotation_angle(1, 2e-3).T)
    orbit = find_periodic(TILTED, 1 / eps, guess)
    assert orbit.iterations >= 1
    assert orbit.closure_error <= 1e-8
    assert phase_align_distance(orbit.samples, u)[0] <= 1e-5
