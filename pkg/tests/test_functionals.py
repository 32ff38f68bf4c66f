import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mixedaffine import bodies as B, functionals as F, scalar as S
from mixedaffine.errors import DimensionError, NonFiniteError, ValidationError
from mixedaffine.quadrature import ball_volume, build_rule

R2 = build_rule(2, 512)
R3 = build_rule(3, 48)
RULES = {2: R2, 3: R3}

# frozen from scipy.integrate.quad of (f/h)^(1/2), h = 1 + 0.1 cos 2t
AS2_FOURIER = 6.282689192775785
# int f h^2 = 2 pi (1 - 0.025) exactly
PSI_FOURIER_BALL = 2 * np.pi * 0.975


def conc_members():
    return st.one_of(
        st.builds(S.power_conc, st.floats(0.2, 5), st.floats(0, 0.95)),
        st.sampled_from(["log1p", "bounded-ratio"]).map(S.named_nonhomogeneous))


def conv_members():
    return st.one_of(
        st.builds(S.power_conv, st.floats(0.2, 5), st.floats(-3, 0)),
        st.just(S.named_nonhomogeneous("exp-conv")))


@settings(max_examples=30, deadline=None)
@given(st.sampled_from([2, 3]), st.sampled_from(F.VARIANTS), st.data())
def test_ball_closed_form(n, variant, data):
    members = conc_members() if variant in (F.PHI, F.PHI_STAR) else conv_members()
    fns = [data.draw(members) for _ in range(n)]
    got = F.mixed(variant, fns, [B.Ball(n)] * n, RULES[n])
    want = np.prod([fn.at_one for fn in fns]) ** (1 / n) * n * ball_volume(n)
    assert got == pytest.approx(want, rel=1e-9)
    assert F.ball_reference(variant, fns, n) == pytest.approx(want, rel=1e-12)


@pytest.mark.parametrize("p", [0.0, 0.5, 1.0, 2.0, 5.0, -1.0, -3.0])
def test_ellipse_lp_closed_form(p):
    A = np.array([[1.4, 0.3], [-0.2, 0.7]])
    got = F.lp_asa(p, B.LinearImageOfBall(A), R2)
    want = abs(np.linalg.det(A)) ** ((2 - p) / (2 + p)) * 2 * np.pi
    assert got == pytest.approx(want, rel=1e-9)


def test_lp_values_match_regime_functionals():
    K = B.random_body(2, 2)
    for p in [0.0, 1.5, -1.0, -3.0]:
        variant, fn = F.lp_regime(p, 2)
        direct = F.lp_asa(p, K, R2)
        if F.is_star(variant):
            via = F.diagonal_asa(fn, B.polar(K), F.PSI, R2)
            assert F.diagonal_asa(fn, K, variant, R2) == pytest.approx(via, rel=1e-9)
        else:
            assert F.diagonal_asa(fn, K, variant, R2) == pytest.approx(direct, rel=1e-12)


def test_lp_excluded_exponent():
    with pytest.raises(ValidationError, match="excluded exponent"):
        F.lp_asa(-2, B.Ball(2), R2)
    with pytest.raises(ValidationError, match="excluded exponent"):
        F.lp_regime(-3, 3)


def test_frozen_fourier_values():
    K = B.Fourier2D(1.0, [0.1])
    assert F.lp_asa(2, K, R2) == pytest.approx(AS2_FOURIER, rel=1e-12)
    psi = S.power_conv(1, -1)
    assert F.mixed(F.PSI, [psi, psi], [K, B.Ball(2)], R2) == pytest.approx(PSI_FOURIER_BALL,
                                                                           rel=1e-12)


def test_counterexample_functional_matches_elliptic_integral():
    from scipy.special import ellipk
    psi = S.power_conv(1, -1)
    TB = B.LinearImageOfBall(np.diag([1.0, 2.0]))
    got = F.mixed(F.PSI, [psi, psi], [TB, B.Ball(2)], build_rule(2, 1024))
    assert got == pytest.approx(8 * ellipk(0.75), rel=1e-12)


def test_mixed_equals_diagonal_and_exchange():
    rng = np.random.default_rng(3)
    K, L = B.random_body(rng, 2), B.random_body(rng, 2)
    f1, f2 = S.power_conc(1.2, 0.3), S.named_nonhomogeneous("log1p")
    assert F.mixed(F.PHI, [f1, f1], [K, K], R2) == pytest.approx(
        F.diagonal_asa(f1, K, F.PHI, R2), rel=1e-14)
    for i in [-1.5, 0.3, 1.0, 3.7]:
        a = F.ith_mixed_asa(F.PHI, i, f1, K, f2, L, R2)
        b = F.ith_mixed_asa(F.PHI, 2 - i, f2, L, f1, K, R2)
        assert a == pytest.approx(b, rel=1e-12)
    assert F.ith_mixed_asa(F.PHI, 1, f1, K, f2, L, R2) == pytest.approx(
        F.mixed(F.PHI, [f1, f2], [K, L], R2), rel=1e-14)


def test_affine_exponent():
    assert F.affine_exponent(F.PHI, [0.5, 0.5]) == 0.0
    assert F.affine_exponent(F.PHI, [0.0, 0.0, 0.0]) == 1.0
    assert F.affine_exponent(F.PSI_STAR, [-1.0, -1.0]) == -3.0


def test_scaling_law_for_homogeneous_members():
    K = B.random_body(7, 2)
    fns = [S.power_conc(1, 0.2), S.power_conc(2, 0.7)]
    T = np.array([[1.5, 0.2], [0.1, 0.9]])
    e = F.affine_exponent(F.PHI, [0.2, 0.7])
    a = F.mixed(F.PHI, fns, [B.linear_image(K, T), B.linear_image(B.Ball(2), T)], R2)
    b = F.mixed(F.PHI, fns, [K, B.Ball(2)], R2)
    assert a == pytest.approx(abs(np.linalg.det(T)) ** e * b, rel=1e-8)


def test_quadrature_consistency_on_analytic_bodies():
    E = B.LinearImageOfBall(np.diag([1.3, 0.8]))
    fns = [S.power_conc(1, 0.4), S.named_nonhomogeneous("bounded-ratio")]
    a = F.mixed(F.PHI, fns, [E, B.Ball(2)], build_rule(2, 512))
    b = F.mixed(F.PHI, fns, [E, B.Ball(2)], build_rule(2, 1024))
    assert abs(a - b) < 1e-9


def test_rejections():
    phi, psi = S.power_conc(1, 0.5), S.power_conv(1, -1)
    with pytest.raises(ValidationError, match="needs a conc"):
        F.mixed(F.PHI, [psi, psi], [B.Ball(2)] * 2, R2)
    with pytest.raises(ValidationError, match="needs 2 pairs"):
        F.FunctionalSpec(F.PHI, [(phi, B.Ball(2))] * 3)
    with pytest.raises(DimensionError):
        F.mixed(F.PHI, [phi, phi], [B.Ball(2), B.Ball(3)], R2)
    with pytest.raises(ValidationError, match="unknown variant"):
        F.normalize_variant("chi")
    assert F.normalize_variant("psi-star") == F.PSI_STAR


def test_nonfinite_term_is_reported_with_its_node():
    bad = S.candidate(S.CONC, lambda t: np.where(t < 0.3, np.nan, np.sqrt(t)))
    E = B.LinearImageOfBall(np.diag([1.0, 2.0]))
    with pytest.raises(NonFiniteError, match="node"):
        F.diagonal_asa(bad, E, F.PHI, R2)
