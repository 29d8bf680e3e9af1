import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from kmagnetic.errors import ConfigError
from kmagnetic.field import FieldSpec, GaussLawWarning, check_gauss_law, sphere_mean
from kmagnetic.sphere import E1, E3

from conftest import CONSTANT_ONE, LINEAR_Z, random_field, random_rotation, random_unit


def test_eval_examples():
    assert LINEAR_Z.eval(E3) == 1.0
    assert LINEAR_Z.eval(np.array([np.cos(1.0), np.sin(1.0), 0.0])) == 0.0
    assert np.all(CONSTANT_ONE.eval(np.random.default_rng(0).normal(size=(7, 3))) == 1.0)


def test_gradient_examples():
    assert np.allclose(LINEAR_Z.eval_gradient(E3), 0.0)
    assert np.allclose(LINEAR_Z.eval_gradient(E1), E3)
    assert np.allclose(CONSTANT_ONE.eval_gradient(E1), 0.0)


def test_gradient_matches_finite_differences(rng):
    for _ in range(10):
        K = random_field(rng, terms=5, max_degree=6)
        p = random_unit(rng)
        g = K.eval_gradient(p)
        assert abs(g @ p) <= 1e-12 * max(1, np.linalg.norm(g))
        t1 = np.cross(p, random_unit(rng))
        t1 /= np.linalg.norm(t1)
        t2 = np.cross(p, t1)
        h = 1e-5
        for t in (t1, t2):
            plus = (p + h * t) / np.linalg.norm(p + h * t)
            minus = (p - h * t) / np.linalg.norm(p - h * t)
            fd = (K.eval(plus) - K.eval(minus)) / (2 * h)
            assert abs(fd - g @ t) <= 1e-6


def test_sphere_mean_examples():
    assert abs(sphere_mean(CONSTANT_ONE) - 4 * np.pi) <= 1e-8
    assert abs(sphere_mean(LINEAR_Z)) <= 1e-10
    assert abs(sphere_mean(FieldSpec.polynomial([((0, 0, 2), 1.0)])) - 4 * np.pi / 3) <= 1e-8


def test_sphere_mean_independent_oracle():
    # adaptive-quadrature value for x^2 z + y/2 - 3/2 x y z^2 + 1/4 (only the constant survives)
    K = FieldSpec.polynomial([((2, 0, 1), 1), ((0, 1, 0), 0.5), ((1, 1, 2), -1.5), ((0, 0, 0), 0.25)])
    assert abs(sphere_mean(K) - 3.141592653589794) <= 1e-12


@given(st.tuples(st.integers(0, 8), st.integers(0, 8), st.integers(0, 8)).filter(
    lambda e: sum(e) <= 8 and sum(e) % 2 == 1))
def test_odd_monomials_have_zero_mean(exps):
    assert abs(sphere_mean(FieldSpec.polynomial([(exps, 1.0)]))) <= 1e-10


def test_rotated_field_is_covariant(rng):
    for _ in range(10):
        K = random_field(rng, terms=4, max_degree=8)
        R = random_rotation(rng)
        KR = K.rotated(R)
        p = random_unit(rng, 20)
        # (K o R^t)(R p) = K(p)
        assert np.max(np.abs(KR.eval(p @ R.T) - K.eval(p))) <= 1e-12 * max(1, K.scale)


def test_documents_and_presets():
    K = FieldSpec.from_document({"type": "polynomial", "terms": [{"exps": [1, 1, 0], "coef": 2.0}]})
    assert K.eval(np.array([0.6, 0.8, 0])) == pytest.approx(0.96)
    assert FieldSpec.from_document({"type": "preset", "name": "xy_product"}).terms == (((1, 1, 0), 1.0),)
    back = FieldSpec.from_document(K.to_document())
    assert back.terms == K.terms
    for bad in [{"type": "preset", "name": "nope"}, {"type": "polynomial", "terms": []},
                {"type": "polynomial", "terms": [{"exps": [9, 0, 0], "coef": 1}]},
                {"type": "polynomial", "terms": [{"exps": [1, 0], "coef": 1}]},
                {"type": "polynomial", "terms": [{"exps": [1, 0, 0], "coef": 0}]},
                {"type": "other"}, "linear_z"]:
        with pytest.raises(ConfigError):
            FieldSpec.from_document(bad)


def test_zero_field_needs_explicit_request():
    with pytest.raises(ConfigError):
        FieldSpec.polynomial([((1, 0, 0), 0.0)])
    assert FieldSpec.zero().is_zero
    assert FieldSpec.zero().eval(E1) == 0.0


def test_gauss_law_warns_but_does_not_raise():
    with pytest.warns(GaussLawWarning):
        assert not check_gauss_law(CONSTANT_ONE)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert check_gauss_law(LINEAR_Z)
