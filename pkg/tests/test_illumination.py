import numpy as np
import pytest

from mixedaffine import bodies as B, illumination as I, scalar as S
from mixedaffine.errors import ConvergenceError, DimensionError, ValidationError

BALL = B.Ball(2)
UNIT = I.constant_weight(BALL)


@pytest.mark.parametrize("d", [1.01, 1.5, 3.0, 10.0])
def test_ball_arc_and_weight(d):
    lo, hi = I.illuminated_arc(BALL, [d, 0.0])
    assert hi == pytest.approx(np.arccos(1 / d), abs=1e-12)
    assert lo == pytest.approx(-np.arccos(1 / d), abs=1e-12)
    assert I.weight_integral(UNIT, [0.0, d]) == pytest.approx(2 * np.arccos(1 / d), abs=1e-11)


def test_interior_and_boundary_points():
    lo, hi = I.illuminated_arc(BALL, [0.2, -0.1])
    assert lo == hi
    assert I.weight_integral(UNIT, [0.2, -0.1]) == 0.0
    lo, hi = I.illuminated_arc(BALL, [0.0, 1.0])
    assert lo == hi and hi == pytest.approx(np.pi / 2, abs=1e-9)
    zero = I.IlluminationProblem(BALL, lambda t: np.zeros(np.shape(t)))
    assert I.weight_integral(zero, [3.0, 1.0]) == 0.0


def test_arc_of_a_general_body_is_where_the_slack_is_positive():
    K = B.random_body(4, 2)
    x = np.array([1.4, 0.6])
    lo, hi = I.illuminated_arc(K, x)
    for t, sign in [(lo - 1e-6, -1), (0.5 * (lo + hi), 1), (hi + 1e-6, -1)]:
        u = np.array([[np.cos(t), np.sin(t)]])
        assert np.sign(x @ u[0] - K.support(u)[0]) == sign


def test_weight_is_monotone_along_rays():
    K = B.random_body(5, 2)
    P = I.constant_weight(K, 1.3)
    v = np.array([np.cos(0.7), np.sin(0.7)])
    W = I.weight_integrals(P, np.linspace(0.5, 3.0, 40)[:, None] * v)
    assert np.all(np.diff(W) >= -1e-13)


@pytest.mark.parametrize("s", [0.1, 0.05, 0.0125])
def test_ball_areas_match_closed_form(s):
    assert I.illumination_body_area(UNIT, s) == pytest.approx(np.pi / np.cos(s / 2) ** 2,
                                                              rel=1e-8)
    rho = I.radial_function(UNIT, s, M=64)
    np.testing.assert_allclose(rho, 1 / np.cos(s / 2), rtol=1e-10)


def test_area_basics():
    K = B.random_body(6, 2)
    P = I.constant_weight(K)
    assert I.illumination_body_area(P, 0) == pytest.approx(B.volume(K, I.build_rule(2, 4096)))
    r1 = I.radial_function(P, 0.05, M=256)
    r2 = I.radial_function(P, 0.1, M=256)
    assert np.all(r2 >= r1)
    assert I.illumination_body_area(P, 0.05, M=256) >= I.illumination_body_area(P, 0, M=256)


def test_ball_limit():
    study = I.geometric_limit_estimate(UNIT)
    assert study.estimate == pytest.approx(2 * np.pi, rel=1e-6)
    assert study.q[0] > study.q[-1] > 2 * np.pi


def test_mixed_weight_limits():
    psi = S.power_conv(1, -1)
    TB = B.LinearImageOfBall(np.diag([1.0, 2.0]))
    P = I.mixed_weight("psi", [psi, psi], [TB, BALL])
    a = I.geometric_limit_estimate(P).estimate
    assert a == pytest.approx(P.reference, rel=0.02)
    b = I.geometric_limit_estimate(P, s0=0.05).estimate
    assert abs(a - b) / a < 0.005


def test_richardson_removes_polynomial_error():
    s = 0.1 * 0.5 ** np.arange(4)
    q = 3.0 + 2 * s - 5 * s ** 2 + s ** 3
    assert I.richardson(q)[-1][0] == pytest.approx(3.0, rel=1e-12)


def test_rejections():
    with pytest.raises(DimensionError):
        I.constant_weight(B.Ball(3))
    with pytest.raises(ValidationError):
        I.IlluminationProblem(BALL, lambda t: -np.ones(np.shape(t)))
    with pytest.raises(ValidationError):
        I.geometric_limit_estimate(UNIT, levels=2)
    with pytest.raises(ValidationError):
        I.mixed_weight("phi_star", [S.power_conc(1, 0.5)] * 2, [BALL, BALL])
    tiny = I.IlluminationProblem(BALL, lambda t: np.full(np.shape(t), 1e-3))
    with pytest.raises(ConvergenceError, match="never reaches"):
        I.radial_function(tiny, 1.0, M=16)


def test_nonconverging_sequence_is_reported():
    wild = I.IlluminationProblem(BALL, lambda t: 1 + 0.9 * np.sign(np.sin(40 * t)))
    with pytest.raises(ConvergenceError) as info:
        I.geometric_limit_estimate(wild, s0=0.4, levels=4, M=256)
    assert "q" in info.value.data
