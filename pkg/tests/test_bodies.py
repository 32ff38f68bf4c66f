import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mixedaffine import bodies as B
from mixedaffine.errors import DimensionError, NotC2PlusError, ValidationError
from mixedaffine.quadrature import build_rule

R2 = build_rule(2, 512)
R3 = build_rule(3, 48)


def fourier_area(c0, cos, sin):
    # (1/2) int (h^2 - h'^2), harmonics starting at k = 2
    k = np.arange(2, 2 + len(cos))
    return np.pi * c0 ** 2 - 0.5 * np.pi * np.sum((k * k - 1) * (np.square(cos) + np.square(sin)))


def test_ball_support_and_curvature():
    U = R3.nodes[:50]
    K = B.Ball(3, 2.0)
    np.testing.assert_allclose(K.support(U), 2.0)
    np.testing.assert_allclose(K.curvature(U), 4.0)
    assert B.volume(B.Ball(2), R2) == pytest.approx(np.pi, rel=1e-10)


def test_linear_image_of_ball_closed_forms():
    T = np.diag([1.0, 2.0])
    K = B.linear_image(B.Ball(2), T)
    U = R2.nodes
    np.testing.assert_allclose(K.support(U), np.linalg.norm(U @ T.T, axis=1))
    h, f = K.evaluate(np.array([[0.0, 1.0]]))
    assert f[0] * h[0] ** 3 == pytest.approx(4.0, rel=1e-12)
    assert B.volume(B.LinearImageOfBall(np.diag([1.5, 0.5])), R2) == pytest.approx(0.75 * np.pi)


def test_identity_map_changes_nothing():
    K = B.random_body(4, 2)
    TK = B.LinearImage(K, np.eye(2))
    np.testing.assert_allclose(TK.support(R2.nodes), K.support(R2.nodes), rtol=1e-14)
    np.testing.assert_allclose(TK.curvature(R2.nodes), K.curvature(R2.nodes), rtol=1e-12)


def test_fourier_area_and_equal_volume_ball():
    K = B.Fourier2D(1.0, [0.1], [0.0])
    assert B.volume(K, R2) == pytest.approx(0.985 * np.pi, rel=1e-12)
    assert B.ball_of_same_volume(K, R2).radius == pytest.approx(np.sqrt(0.985), rel=1e-12)
    rng = np.random.default_rng(11)
    for _ in range(5):
        K = B.random_body(rng, 2)
        assert B.volume(K, R2) == pytest.approx(fourier_area(1.0, K.a, K.b), rel=1e-12)


def test_composition_law():
    rng = np.random.default_rng(2)
    K = B.random_body(rng, 2)
    S_, T = rng.normal(size=(2, 2)), rng.normal(size=(2, 2))
    a = B.linear_image(B.linear_image(K, S_), T)
    b = B.linear_image(K, T @ S_)
    np.testing.assert_allclose(a.support(R2.nodes), b.support(R2.nodes), rtol=1e-10)
    np.testing.assert_allclose(a.curvature(R2.nodes), b.curvature(R2.nodes), rtol=1e-10)


@pytest.mark.parametrize("n, rtol", [(2, 1e-8), (3, 1e-5)])
def test_transformation_law_unimodular(n, rtol):
    rng = np.random.default_rng(5 + n)
    K = B.random_body(rng, n)
    T = B.random_linear_map(rng, n)
    U = (R2 if n == 2 else R3).nodes[::7]
    V = U @ T.inv_t.T
    V /= np.linalg.norm(V, axis=1)[:, None]
    hT, fT = B.linear_image(K, T).evaluate(V)
    h, f = K.evaluate(U)
    # 3D bodies carry a finite-difference Hessian
    np.testing.assert_allclose(fT * hT ** (n + 1), f * h ** (n + 1), rtol=rtol)


def test_volume_scales_with_determinant():
    rng = np.random.default_rng(8)
    K = B.random_body(rng, 2)
    A = rng.normal(size=(2, 2))
    got = B.volume(B.linear_image(K, A), R2)
    assert got == pytest.approx(abs(np.linalg.det(A)) * B.volume(K, R2), rel=1e-8)


def test_polar_closed_forms():
    assert isinstance(B.polar(B.Ball(2, 2.0)), B.Ball)
    assert B.polar(B.Ball(2, 2.0)).radius == 0.5
    P = B.polar(B.LinearImageOfBall(np.diag([1.0, 2.0])))
    np.testing.assert_allclose(P.matrix, np.diag([1.0, 0.5]))


@pytest.mark.parametrize("n", [2, 3])
def test_hug_identity_on_ellipsoids(n):
    rng = np.random.default_rng(40 + n)
    for _ in range(20):
        A = rng.normal(size=(n, n)) + 2 * np.eye(n)
        K = B.LinearImageOfBall(A)
        P = B.polar(K)
        u = rng.normal(size=(1, n))
        u /= np.linalg.norm(u)
        x = K.gradient(u)
        v = x / np.linalg.norm(x)
        hk, fk = K.evaluate(u)
        hp, fp = P.evaluate(v)
        assert (hk ** (n + 1) * fk * hp ** (n + 1) * fp)[0] == pytest.approx(1.0, rel=1e-8)


def test_numeric_polar_agrees_with_closed_form():
    A = np.array([[1.3, 0.4], [-0.2, 0.8]])
    K = B.LinearImageOfBall(A)
    N = B.NumericPolar(K)
    exact = B.polar(K)
    U = R2.nodes[::3]
    np.testing.assert_allclose(N.support(U), exact.support(U), rtol=1e-10)
    np.testing.assert_allclose(N.curvature(U), exact.curvature(U), rtol=1e-8)


def test_radial_polar_relation_and_bipolar():
    K = B.random_body(3, 2)
    P = B.polar(K)
    U = R2.nodes[::4]
    # rho_{K polar}(u) h_K(u) = 1: u / h_K(u) lies on the polar boundary
    X = U / K.support(U)[:, None]
    np.testing.assert_allclose(np.max(X @ K.gradient(R2.nodes).T, axis=1) <= 1 + 1e-12, True)
    PP = B.polar(P)
    np.testing.assert_allclose(PP.support(U), K.support(U), atol=1e-6)


def test_numeric_polar_3d():
    A = np.diag([1.0, 1.5, 0.7])
    N = B.NumericPolar(B.LinearImageOfBall(A))
    U = R3.nodes[::97]
    exact = B.LinearImageOfBall(np.linalg.inv(A).T)
    np.testing.assert_allclose(N.support(U), exact.support(U), rtol=1e-10)
    np.testing.assert_allclose(N.curvature(U), exact.curvature(U), rtol=1e-5)


def test_polar_volume():
    K = B.LinearImageOfBall(np.diag([2.0, 0.5, 1.0]))
    assert B.polar_volume(K, R3) == pytest.approx(4 * np.pi / 3, rel=1e-9)
    E = B.LinearImageOfBall(np.diag([1.5, 0.5]))
    assert B.polar_volume(E, R2) == pytest.approx(np.pi / 0.75, rel=1e-10)


def test_finite_difference_curvature_matches_analytic():
    A = np.array([[1.2, 0.3, 0.0], [0.1, 0.9, 0.2], [0.0, -0.1, 1.1]])
    K = B.LinearImageOfBall(A)
    U = R3.nodes[::53]
    fd = B.ConvexBody.curvature(_Generic(K), U)
    np.testing.assert_allclose(fd, K.curvature(U), rtol=1e-5)


class _Generic(B.ConvexBody):
    """Hides the analytic Hessian so the generic finite-difference path runs."""

    def __init__(self, K):
        self.K, self.n = K, K.n

    def support(self, U):
        return self.K.support(U)

    def gradient(self, U):
        return self.K.gradient(U)


def test_perturbed_ball_derivatives():
    K = B.random_body(9, 3)
    U = R3.nodes[::211]
    g = K.gradient(U)
    np.testing.assert_allclose(np.sum(g * U, axis=1), K.support(U), rtol=1e-12)
    np.testing.assert_allclose(K.curvature(U), B.ConvexBody.curvature(_Generic(K), U), rtol=1e-5)


def test_centroids():
    assert np.allclose(B.centroid(B.Ball(2), R2), 0, atol=1e-14)
    T = B.Translate(B.Ball(2), [0.3, 0.0])
    np.testing.assert_allclose(B.centroid(T, R2), [0.3, 0.0], atol=1e-12)
    sym = B.random_body(5, 2, symmetric=True)
    assert np.linalg.norm(B.centroid(sym, R2)) < 1e-10
    K = B.random_body(6, 2)
    C = B.translate_to_centroid(K, R2)
    assert np.linalg.norm(B.centroid(C, R2)) < 1e-8


def test_random_body_determinism_and_validity():
    a, b = B.random_body(1, 2), B.random_body(1, 2)
    assert a.to_doc() == b.to_doc()
    assert a.convexity_margin >= 0.2
    K3 = B.random_body(1, 3)
    assert K3.convexity_margin >= 0.2 and K3.min_support > 0
    with pytest.raises(ValidationError):
        B.random_body(1, 2, delta_min=0.0)
    with pytest.raises(DimensionError):
        B.random_body(1, 4)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_random_bodies_are_c2_plus(seed):
    K = B.random_body(seed, 2)
    assert np.all(B.curvature_function(K, R2.nodes) > 0)


def test_rejections():
    with pytest.raises(NotC2PlusError):
        B.Fourier2D(1.0, [0.5])
    with pytest.raises(NotC2PlusError):
        B.curvature_function(B.Fourier2D(1.0, [0.5], validate=False), R2.nodes)
    with pytest.raises(ValidationError):
        B.LinearMap(np.zeros((2, 2)))
    with pytest.raises(DimensionError):
        B.linear_image(B.Ball(2), np.eye(3))
    with pytest.raises(ValidationError):
        B.parse_descriptor("cube")


def test_documents_round_trip():
    rng = np.random.default_rng(0)
    for K in [B.Ball(2), B.random_body(rng, 2), B.random_body(rng, 3),
              B.Translate(B.random_body(rng, 2), [0.1, -0.2]),
              B.LinearImageOfBall(np.diag([1.0, 2.0]))]:
        again = B.from_doc(K.to_doc())
        U = (R2 if K.n == 2 else R3).nodes[::5]
        np.testing.assert_array_equal(again.support(U), K.support(U))
    assert isinstance(B.parse_descriptor("polar:timg:1:2"), B.LinearImageOfBall)
    assert isinstance(B.parse_descriptor("ball", 3), B.Ball)
