import math

import numpy as np
import pytest

from mixedaffine import bodies as B, functionals as F, harness as H, scalar as S
from mixedaffine.errors import PreconditionError
from mixedaffine.quadrature import build_rule

R2 = build_rule(2, 512)
BALL = B.Ball(2)
ELL = B.LinearImageOfBall(np.diag([1.5, 0.5]))
SQRT = S.power_conc(1, 0.5)


def fourier(seed, symmetric=False):
    return B.random_body(seed, 2, symmetric=symmetric)


def test_report_orientation_and_status():
    r = H.make_report("x", "a", "<=", 1.0, 2.0, 1e-6)
    assert r.slack == 1.0 and r.passed
    r = H.make_report("x", "a", ">=", 1.0, 2.0, 1e-6)
    assert r.slack == -1.0 and r.status == H.FAIL
    r = H.make_report("x", "a", "==", 1.0, 1.0 + 1e-13, 1e-15)
    assert r.status == H.INFEASIBLE
    r = H.make_report("x", "a", "<=", math.nan, 1.0, 1e-6)
    assert r.status == H.FAIL


def test_affine_invariance_examples():
    rng = np.random.default_rng(1)
    K = fourier(1)
    R = B.random_rotation(rng, 2)
    fns = [S.named_nonhomogeneous("log1p"), SQRT]
    assert H.check_affine_invariance(F.PHI, fns, [K, fourier(2)], R, R2, 1e-9).passed
    assert H.check_affine_invariance(F.PHI, fns, [K, fourier(2)], np.diag([2, 0.5]), R2).passed
    rep = H.check_affine_invariance(F.PHI, [SQRT, SQRT], [K, fourier(2)], 2 * np.eye(2), R2)
    assert rep.passed and "scaling" in rep.name
    with pytest.raises(PreconditionError):
        H.check_affine_invariance(F.PHI, fns, [K, K], 2 * np.eye(2), R2)


def test_affine_invariance_all_variants():
    K, L = fourier(3), fourier(4)
    T = np.array([[1.2, 0.5], [-0.3, 0.7]])
    for variant, fn in [(F.PHI_STAR, S.power_conc(1, 0.2)), (F.PSI, S.power_conv(1, -0.7)),
                        (F.PSI_STAR, S.power_conv(2, -1.3))]:
        assert H.check_affine_invariance(variant, [fn, fn], [K, L], T, R2).passed


def test_alexandrov_fenchel_examples():
    fns = [SQRT, SQRT]
    rep = H.check_alexandrov_fenchel(2, F.PHI, fns, [BALL, BALL], R2)
    assert abs(rep.rel_slack) < 1e-10 and rep.equality_case
    assert H.check_alexandrov_fenchel(2, F.PHI, fns, [fourier(5), BALL], R2).slack >= 0
    phi2 = S.power_conc(1, 0.3)
    K2 = fourier(6)
    rep = H.check_alexandrov_fenchel(2, F.PHI, [S.scaled(phi2, 3), phi2],
                                     [B.dilate(K2, 2), K2], R2)
    assert abs(rep.rel_slack) <= 1e-8 and rep.equality_case
    with pytest.raises(PreconditionError):
        H.check_alexandrov_fenchel(3, F.PHI, fns, [BALL, BALL], R2)


def test_ludwig_examples():
    assert abs(H.check_ludwig_upper(SQRT, BALL, R2).rel_slack) < 1e-12
    rep = H.check_ludwig_upper(SQRT, ELL, R2)
    assert rep.lhs == pytest.approx(2 * np.pi) and rep.rhs == pytest.approx(2 * np.pi)
    assert rep.equality_case
    assert H.check_ludwig_upper(S.named_nonhomogeneous("log1p"), fourier(7), R2).passed
    assert H.check_ludwig_lower(S.power_conv(1, -1), fourier(7, True), R2).passed


def test_santalo_examples():
    fns = [SQRT, S.power_conc(2, 0.3)]
    rep = H.check_santalo(fns, [BALL, BALL], R2, "centered")
    assert abs(rep.rel_slack) < 1e-12
    rep = H.check_santalo(fns, [ELL, B.dilate(ELL, 1.7)], R2, "centered")
    assert abs(rep.rel_slack) < 1e-7 and rep.equality_case
    sym = [fourier(8, True), fourier(9, True)]
    assert H.check_santalo(fns, sym, R2, "centered").passed
    assert H.check_santalo(fns, sym, R2, "general").passed
    with pytest.raises(PreconditionError):
        H.check_santalo([S.named_nonhomogeneous("log1p")] * 2, sym, R2)


def test_isoperimetric_examples():
    rep = H.check_isoperimetric(F.PHI, "ii", [SQRT, SQRT], [B.Ball(2, 1.3)] * 2, R2)
    assert abs(rep.rel_slack) < 1e-12
    rep = H.check_isoperimetric(F.PHI, "ii", [SQRT], [ELL], R2)
    assert rep.lhs == pytest.approx(1.0) and rep.rhs == pytest.approx(1.0)
    centered = [B.translate_to_centroid(fourier(s), R2) for s in (10, 11)]
    for part, fns in [("i", [S.power_conc(1, 0.3), S.named_nonhomogeneous("log1p")]),
                      ("ii", [S.power_conc(1, 0.3)] * 2)]:
        for variant in (F.PHI, F.PHI_STAR):
            assert H.check_isoperimetric(variant, part, fns, centered, R2).passed
    assert H.check_isoperimetric(F.PSI, "i", [S.power_conv(1, -1)], centered[:1], R2).passed
    assert H.check_isoperimetric(F.PSI, "ii", [S.power_conv(1, -1)], centered[:1], R2).passed
    with pytest.raises(PreconditionError, match="centroid"):
        H.check_isoperimetric(F.PHI, "i", [SQRT], [B.Translate(BALL, [0.2, 0])], R2)


def test_ith_interpolation_examples():
    K, L = fourier(12), fourier(13)
    f = S.named_nonhomogeneous("bounded-ratio")
    for i, j, k in [(0.5, -1.0, 3.0), (1.5, 4.0, 0.2)]:
        rep = H.check_ith_interpolation(i, j, k, F.PHI, f, K, f, K, R2)
        assert abs(rep.rel_slack) < 1e-12 and rep.equality_case
    assert H.check_ith_interpolation(1, 0, 2, F.PHI, SQRT, K, f, L, R2).passed
    assert H.check_ith_interpolation(2, 0, 3, F.PHI, SQRT, K, f, L, R2).passed
    assert H.check_ith_interpolation(0, 2, -1, F.PSI, S.power_conv(1, -1), K,
                                     S.power_conv(1, -0.5), L, R2).passed
    with pytest.raises(PreconditionError):
        H.check_ith_interpolation(1, 2, 2, F.PHI, SQRT, K, f, L, R2)
    with pytest.raises(PreconditionError):
        H.check_ith_interpolation(5, 0, 1, F.PHI, SQRT, K, f, L, R2)


def test_ith_extremes_examples():
    for variant, k, fn in [(F.PHI, 3.0, SQRT), (F.PSI, -1.0, S.power_conv(1, -1)),
                           (F.PSI_STAR, -1.0, S.power_conv(1, -1))]:
        reps = H.check_ith_extremes(k, variant, fn, BALL, fn, R2)
        for r in reps:
            if r.status != H.INFO:
                assert abs(r.rel_slack) < 1e-10, r.name
    reps = H.check_ith_extremes(3.0, F.PHI, SQRT, ELL, SQRT, R2)
    ii = [r for r in reps if r.name == "ith-extreme[phi,ii]"][0]
    assert ii.rhs == pytest.approx(1.0) and ii.passed
    K = B.translate_to_centroid(fourier(14), R2)
    reps = H.check_ith_extremes(-1.0, F.PSI, S.power_conv(1, -1), K, S.power_conv(1, -1), R2)
    assert all(r.status in (H.PASS, H.INFO) for r in reps)
    assert any(r.status == H.INFO and "implied-c" in r.name for r in reps)
    with pytest.raises(PreconditionError):
        H.check_ith_extremes(1.0, F.PHI, SQRT, BALL, SQRT, R2)


def test_duality_on_dilates():
    K = fourier(15, True)
    rep = H.check_duality_dilates(F.PSI, [S.power_conv(1, -1)] * 2, K, [0.8, 1.3], R2, 1e-8)
    assert rep.passed
    rep = H.check_duality_dilates(F.PHI, [SQRT, S.power_conc(1, 0.2)], fourier(16), [1.2, 0.9],
                                  R2, 1e-8)
    assert rep.passed


def test_counterexample_claim_does_not_reproduce():
    from scipy.special import ellipk
    lhs, star = H.counterexample_values()
    assert lhs == pytest.approx(8 * ellipk(0.75), rel=1e-12)
    # the polar pair gives the same value, so the ratio is 1
    assert star == pytest.approx(lhs, rel=1e-12)
    rep = H.check_counterexample()
    assert rep.status == H.FAIL and rep.lhs == pytest.approx(1.0)


def test_body_level_invariants():
    K = fourier(17)
    T = B.random_linear_map(np.random.default_rng(0), 2)
    assert H.check_transformation_law(K, T, R2).passed
    assert H.check_volume_law(K, np.array([[1.5, 0.1], [0.2, 0.8]]), R2, 1e-8).passed
    assert H.check_exchange_identity(F.PSI, 0.7, S.power_conv(1, -1), K,
                                     S.named_nonhomogeneous("exp-conv"), BALL, R2).passed
    assert H.check_mixed_diagonal(F.PHI_STAR, SQRT, K, R2).passed


def test_trial_is_deterministic_and_clean():
    a = H.run_trial(7, 0, 2)
    b = H.run_trial(7, 0, 2)
    assert [r.to_dict() for r in a] == [r.to_dict() for r in b]
    assert H.summarize(a)[H.FAIL] == 0


def test_suite_is_independent_of_worker_count():
    a = H.run_property_suite(3, 2, (2,))
    b = H.run_property_suite(3, 2, (2,), workers=2)
    assert [r.to_dict() for r in a] == [r.to_dict() for r in b]


def test_near_flat_bodies_still_pass():
    reps = H.run_property_suite(11, 2, (2,), delta_min=0.01)
    assert H.summarize(reps)[H.FAIL] == 0


def test_generator_failures_are_reported_per_trial():
    reps = H.run_trial(7, 0, 2, delta_min=1.5)
    assert len(reps) == 1 and reps[0].status == H.FAIL and reps[0].name == "random-body"


def test_flattening_sweep_decreases():
    rows = H.flatten_sweep()
    vals = [v for _, _, v in rows]
    assert vals[0] == pytest.approx(2 * np.pi, rel=1e-12)
    assert all(b < a for a, b in zip(vals, vals[1:]))
    areas = [B.volume(H.flattening_family(t), R2) for t, _, _ in rows]
    np.testing.assert_allclose(areas, np.pi, rtol=1e-12)
