import math

import numpy as np
import pytest

from mixedaffine.errors import DimensionError, NonFiniteError, ValidationError
from mixedaffine.quadrature import ball_volume, build_rule, integrate, sphere_measure


@pytest.mark.parametrize("n, N", [(2, 4), (2, 512), (3, 8), (3, 32)])
def test_weights_sum_to_sphere_measure(n, N):
    rule = build_rule(n, N)
    assert math.isclose(math.fsum(rule.weights), sphere_measure(n), rel_tol=1e-14)
    assert np.all(rule.weights > 0)
    assert np.allclose(np.linalg.norm(rule.nodes, axis=1), 1.0, atol=1e-15)


def test_measures():
    assert sphere_measure(2) == pytest.approx(2 * np.pi)
    assert sphere_measure(3) == pytest.approx(4 * np.pi)
    assert ball_volume(3) == pytest.approx(4 * np.pi / 3)


def test_circle_trigonometric_exactness():
    rule = build_rule(2, 16)
    # cos^2 integrates to pi
    assert integrate(rule, lambda u: u[:, 0] ** 2) == pytest.approx(np.pi, rel=1e-14)
    assert abs(integrate(rule, lambda u: u[:, 0] ** 3 * u[:, 1])) < 1e-14


def test_sphere_polynomial_exactness():
    rule = build_rule(3, 12)
    # |S^2| <x_3^4> = 4 pi / 5
    assert integrate(rule, lambda u: u[:, 2] ** 4) == pytest.approx(4 * np.pi / 5, rel=1e-13)
    assert integrate(rule, lambda u: u[:, 0] ** 2 * u[:, 1] ** 2) == pytest.approx(
        4 * np.pi / 15, rel=1e-13)


def test_rotation_robustness():
    from mixedaffine.bodies import random_rotation
    rule = build_rule(3, 32)
    R = random_rotation(np.random.default_rng(3), 3).matrix

    def g(u):
        return np.exp(u[:, 0] + 0.5 * u[:, 1] * u[:, 2])

    a = integrate(rule, g)
    b = integrate(rule, lambda u: g(u @ R.T))
    assert abs(a - b) / a < rule.tolerance


def test_workers_do_not_change_the_sum():
    rule = build_rule(3, 16)
    g = lambda u: np.cosh(u[:, 0]) + u[:, 2] ** 2  # noqa: E731
    assert integrate(rule, g) == integrate(rule, g, workers=4)


def test_rejections():
    with pytest.raises(ValidationError):
        build_rule(2, 3)
    with pytest.raises(ValidationError):
        build_rule(3, 7)
    with pytest.raises(DimensionError, match="dimension not supported"):
        build_rule(4, 10)


def test_nonfinite_integrand_names_the_node():
    rule = build_rule(2, 8)
    with np.errstate(invalid="ignore"):
        with pytest.raises(NonFiniteError, match="node 3"):
            integrate(rule, lambda u: np.sqrt(u[:, 0]))
