"""Executable checks for the identities and inequalities of the theory.

Every check returns an :class:`InequalityReport` (or a list of them).  Slack
is oriented so that ``slack >= 0`` means the claimed relation holds; a check
passes when the relative slack is at least ``-tolerance``.
"""

import functools
import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import bodies as B
from . import functionals as F
from . import scalar as S
from .errors import MixedAffineError, PreconditionError
from .quadrature import ball_volume, build_rule

SCHEMA_VERSION = 1

#: default relative tolerances per dimension (analytic 2D, finite-difference 3D)
DEFAULT_TOL = {2: 1e-6, 3: 1e-4}
#: numerical noise floor per dimension; tolerances below it cannot be met reliably
NOISE_FLOOR = {2: 1e-11, 3: 1e-7}
#: resolutions used by the randomized suite
SUITE_RESOLUTION = {2: 512, 3: 32}
# condition bound for the suite's random maps: strongly eccentric images of
# random 3D bodies need far more nodes than the suite rule has
SUITE_MAP_COND = {2: 8.0, 3: 2.5}
SUITE_DILATES = (0.75, 1.5)

PASS, FAIL, INFEASIBLE, INFO = "pass", "fail", "infeasible", "info"


@dataclass
class InequalityReport:
    name: str
    anchor: str
    relation: str
    lhs: float
    rhs: float
    slack: float
    rel_slack: float
    tolerance: float
    status: str
    equality_case: bool = False
    digest: dict = field(default_factory=dict)
    note: str = ""

    @property
    def passed(self):
        return self.status in (PASS, INFO)

    def to_dict(self):
        return asdict(self)


def make_report(name, anchor, relation, lhs, rhs, tol, n=2, equality_case=False,
                digest=None, note=""):
    """Build a report with oriented slack.

    ``relation`` is ``"<="`` (lhs <= rhs), ``">="`` or ``"=="``.
    """
    lhs, rhs = float(lhs), float(rhs)
    if relation == "<=":
        slack = rhs - lhs
    elif relation == ">=":
        slack = lhs - rhs
    elif relation == "==":
        slack = -abs(lhs - rhs)
    else:
        raise ValueError(f"unknown relation {relation!r}")
    scale = max(abs(lhs), abs(rhs), 1e-300)
    rel = slack / scale
    floor = NOISE_FLOOR.get(n, NOISE_FLOOR[3])
    if not (math.isfinite(lhs) and math.isfinite(rhs)):
        status = FAIL
    elif rel >= -tol:
        status = PASS
    elif tol < floor and rel >= -floor:
        status = INFEASIBLE
    else:
        status = FAIL
    return InequalityReport(name, anchor, relation, lhs, rhs, slack, rel, float(tol), status,
                            bool(equality_case), dict(digest or {}), note)


def info_report(name, anchor, value, digest=None, note=""):
    """Informational record (never a failure): a value with no verified bound."""
    v = float(value)
    return InequalityReport(name, anchor, "info", v, v, 0.0, 0.0, 0.0, INFO, False,
                            dict(digest or {}), note)


def digest_of(**items):
    """Input description plus a short content hash."""
    doc = {k: _jsonable(v) for k, v in items.items()}
    text = json.dumps(doc, sort_keys=True)
    doc["sha256"] = hashlib.sha256(text.encode()).hexdigest()[:16]
    return doc


def _jsonable(v):
    if isinstance(v, B.ConvexBody):
        return v.to_doc()
    if isinstance(v, S.ScalarClassFn):
        return v.to_doc()
    if isinstance(v, B.LinearMap):
        return v.matrix.tolist()
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, np.generic):
        return v.item()
    return v


def default_tol(n):
    return DEFAULT_TOL.get(n, DEFAULT_TOL[3])


# --------------------------------------------------------------------------
# structural predicates for equality cases


def _support_ratio(K, L, rule):
    return K.support(rule.nodes) / L.support(rule.nodes)


def same_body(K, L, rule, rtol=1e-12):
    r = _support_ratio(K, L, rule)
    return bool(np.max(np.abs(r - 1.0)) <= rtol)


def are_dilates(K, L, rule, rtol=1e-12):
    r = _support_ratio(K, L, rule)
    return bool(np.ptp(r) <= rtol * abs(r[0]))


def is_centered_ellipsoid(K):
    return isinstance(K, (B.Ball, B.LinearImageOfBall))


def ellipsoid_dilates(bodies, rule):
    if not all(is_centered_ellipsoid(K) for K in bodies):
        return False
    return all(are_dilates(K, bodies[-1], rule) for K in bodies)


def is_ball(K, rule):
    if isinstance(K, B.Ball):
        return True
    h = K.support(rule.nodes)
    return bool(np.ptp(h) <= 1e-12 * h[0]) and isinstance(K, B.LinearImageOfBall)


def require_homogeneous(fns, what):
    bad = [str(fn) for fn in fns if not fn.homogeneous]
    if bad:
        raise PreconditionError(f"{what} needs homogeneous functions; got {bad}")
    return [fn.degree for fn in fns]


def require_centered(bodies, rule):
    for K in bodies:
        c = B.centroid(K, rule)
        size = float(np.max(K.support(rule.nodes)))
        if np.linalg.norm(c) > 1e-7 * size:
            raise PreconditionError(
                f"body {K.describe()} has centroid {c.tolist()}; apply translate_to_centroid first")


def ball_of_volume(vol, n):
    return B.Ball(n, (vol / ball_volume(n)) ** (1.0 / n))


# --------------------------------------------------------------------------
# checks


def _misses(lhs, rhs, tol):
    return not abs(lhs - rhs) <= tol * max(abs(lhs), abs(rhs), 1e-300)


def _escalate(sides, rule, tol, n):
    """Evaluate ``sides(rule)``; on a miss, retry on doubled rules up to the cap.

    Returns the last pair and its resolution.  A genuine violation survives
    every refinement; truncation error does not.
    """
    N = rule.resolution
    lhs, rhs = sides(rule)
    cap = ESCALATE_MAX_N.get(n, ESCALATE_MAX_N[3])
    if tol < NOISE_FLOOR.get(n, NOISE_FLOOR[3]):
        cap = N  # below the noise floor refinement cannot help
    while _misses(lhs, rhs, tol) and 2 * N <= cap:
        N *= 2
        lhs, rhs = sides(_rule(n, N))
    return (lhs, rhs), N


def check_affine_invariance(variant, fns, bodies, T, rule, tol=None):
    """as(fn_i, T K_i) against as(fn_i, K_i), scaled by |det T|^e when det != +-1."""
    variant = F.normalize_variant(variant)
    n = bodies[0].n
    tol = default_tol(n) if tol is None else tol
    T = B.LinearMap.coerce(T)
    images = [B.linear_image(K, T) for K in bodies]
    det = abs(T.det)
    if abs(det - 1.0) <= 1e-12:
        scale, branch = 1.0, "unimodular"
    else:
        degrees = require_homogeneous(fns, "the scaling branch of affine invariance")
        scale, branch = det ** F.affine_exponent(variant, degrees), "scaling"

    def sides(r):
        return F.mixed(variant, fns, images, r), scale * F.mixed(variant, fns, bodies, r)

    (lhs, rhs), N = _escalate(sides, rule, tol, n)
    return make_report(f"affine-invariance[{variant},{branch}]", "affine:invariant:1", "==",
                       lhs, rhs, tol, n, digest=digest_of(variant=variant, functions=fns,
                                                          bodies=bodies, map=T),
                       note=f"resolution N={N}")


def af_rhs_factors(m, fns, bodies):
    """The m factors on the right of the Alexandrov-Fenchel inequality (0-based lists)."""
    n = len(bodies)
    head = list(zip(fns[:n - m], bodies[:n - m]))
    factors = []
    for i in range(m):
        tail = (fns[n - 1 - i], bodies[n - 1 - i])
        factors.append(head + [tail] * m)
    return factors


def check_alexandrov_fenchel(m, variant, fns, bodies, rule, tol=None):
    """as^m(fn_1, K_1; ...) <= prod_{i<m} as(..., (fn_{n-i}, K_{n-i}) x m)."""
    variant = F.normalize_variant(variant)
    n = bodies[0].n
    if not 1 <= m <= n:
        raise PreconditionError(f"m must lie in 1..{n}, got {m}")
    tol = default_tol(n) if tol is None else tol
    lhs = F.mixed(variant, fns, bodies, rule) ** m
    rhs = 1.0
    for pairs in af_rhs_factors(m, fns, bodies):
        rhs *= F.general_mixed_asa(F.FunctionalSpec(variant, pairs), rule)
    tail_f, tail_K = fns[n - m:], bodies[n - m:]
    prop = all(S.proportional(f, fns[-1]) for f in tail_f)
    cond1 = prop and all(same_body(K, bodies[-1], rule) for K in bodies)
    cond2 = (prop and fns[-1].homogeneous
             and all(are_dilates(K, bodies[-1], rule) for K in tail_K))
    return make_report(f"alexandrov-fenchel[{variant},m={m}]", "inequality:mixed:conc", "<=",
                       lhs, rhs, tol, n, equality_case=(m == 1 or cond1 or cond2),
                       digest=digest_of(variant=variant, m=m, functions=fns, bodies=bodies))


def check_ludwig_upper(fn, K, rule, tol=None):
    """as_phi(K) <= n |K| phi(|K polar| / |K|)."""
    n = K.n
    tol = default_tol(n) if tol is None else tol
    vol, pvol = B.volume(K, rule), B.polar_volume(K, rule)
    lhs = F.diagonal_asa(fn, K, F.PHI, rule)
    rhs = n * vol * float(fn(pvol / vol))
    return make_report("ludwig-upper", "Monika:inequality", "<=", lhs, rhs, tol, n,
                       equality_case=is_centered_ellipsoid(K),
                       digest=digest_of(functions=[fn], bodies=[K]))


def check_ludwig_lower(fn, K, rule, tol=None):
    """as_psi(K) >= n |K| psi(|K polar| / |K|)."""
    n = K.n
    tol = default_tol(n) if tol is None else tol
    vol, pvol = B.volume(K, rule), B.polar_volume(K, rule)
    lhs = F.diagonal_asa(fn, K, F.PSI, rule)
    rhs = n * vol * float(fn(pvol / vol))
    return make_report("ludwig-lower", "ith:mixed:general:k:smaller:0", ">=", lhs, rhs, tol, n,
                       equality_case=is_centered_ellipsoid(K),
                       digest=digest_of(functions=[fn], bodies=[K]))


def check_santalo(fns, bodies, rule, branch="general", tol=None):
    """Santalo-type bound for the mixed phi functional.

    ``general``: as(K_i) as(K_i polar) <= n^2 prod [phi_i(1)^2 |K_i| |K_i polar|]^(1/n).
    ``centered``: bodies are first moved to their centroids and the bound is
    [as(phi_i; B)]^2.
    """
    n = bodies[0].n
    tol = default_tol(n) if tol is None else tol
    require_homogeneous(fns, "the Santalo inequality")
    if branch == "centered":
        bodies = [K if is_centered_ellipsoid(K) else B.translate_to_centroid(K, rule)
                  for K in bodies]
        rhs = F.ball_reference(F.PHI, fns, n) ** 2
    elif branch == "general":
        logs = [2 * math.log(fn.at_one) + math.log(B.volume(K, rule))
                + math.log(B.polar_volume(K, rule)) for fn, K in zip(fns, bodies)]
        rhs = n * n * math.exp(sum(logs) / n)
    else:
        raise ValueError(f"unknown Santalo branch {branch!r}")
    polars = [B.polar(K) for K in bodies]
    lhs = F.mixed(F.PHI, fns, bodies, rule) * F.mixed(F.PHI, fns, polars, rule)
    eq = ellipsoid_dilates(bodies, rule) if branch == "centered" else (
        ellipsoid_dilates(bodies, rule) and all(S.proportional(f, fns[0]) for f in fns))
    return make_report(f"santalo[{branch}]", "Stantalo:phi", "<=", lhs, rhs, tol, n,
                       equality_case=eq, digest=digest_of(functions=fns, bodies=bodies))


def _functional(variant, fns, bodies, rule):
    """Mixed form for n pairs, diagonal form for a single pair."""
    if len(bodies) == 1:
        return F.diagonal_asa(fns[0], bodies[0], variant, rule)
    return F.mixed(variant, fns, bodies, rule)


def check_isoperimetric(variant, part, fns, bodies, rule, tol=None):
    """Affine isoperimetric inequalities for centered bodies.

    ``phi``      (i) as <= as(phi_i, B_{K_i}); (ii) (as/as(B))^n <= prod (|K_i|/|B|)^(1-2r_i)
    ``phi_star`` (i) as* <= as*(phi_i, (B_{K_i polar}) polar); (ii) exponent 2 r_i - 1
    ``psi``      scalar forms: (i) as_psi(K) >= as_psi(B_K); (ii) ratio >= (|K|/|B|)^(1-2r)
    """
    variant = F.normalize_variant(variant)
    n = bodies[0].n
    tol = default_tol(n) if tol is None else tol
    require_centered(bodies, rule)
    vols = [B.volume(K, rule) for K in bodies]
    bvol = ball_volume(n)
    eq = ellipsoid_dilates(bodies, rule)
    dig = digest_of(variant=variant, part=part, functions=fns, bodies=bodies)
    if variant == F.PSI:
        if len(bodies) != 1:
            raise PreconditionError("the psi isoperimetric check takes one body")
        fn, K = fns[0], bodies[0]
        lhs = F.diagonal_asa(fn, K, F.PSI, rule)
        if part == "i":
            rhs = F.diagonal_asa(fn, ball_of_volume(vols[0], n), F.PSI, rule)
            return make_report("isoperimetric[psi,i]", "ith:mixed:general:k:smaller:0", ">=",
                               lhs, rhs, tol, n, equality_case=eq, digest=dig)
        (r,) = require_homogeneous([fn], "part (ii)")
        lhs = lhs / F.ball_reference(F.PSI, [fn], n)
        rhs = (vols[0] / bvol) ** (1 - 2 * r)
        return make_report("isoperimetric[psi,ii]", "affine:isoperimetric:inequality:homo:psi",
                           ">=", lhs, rhs, tol, n, equality_case=eq, digest=dig)

    if variant not in (F.PHI, F.PHI_STAR):
        raise PreconditionError(f"no isoperimetric inequality for variant {variant}")
    star = variant == F.PHI_STAR
    anchor = "affine:isoperimetric:inequality:star" if star else "affine:isoperimetric:inequality"
    value = _functional(variant, fns, bodies, rule)
    if part == "i":
        if star:
            refs = [B.polar(ball_of_volume(B.polar_volume(K, rule), n)) for K in bodies]
        else:
            refs = [ball_of_volume(v, n) for v in vols]
        rhs = _functional(variant, fns, refs, rule)
        return make_report(f"isoperimetric[{variant},i]", anchor, "<=", value, rhs, tol, n,
                           equality_case=eq, digest=dig)
    degrees = require_homogeneous(fns, "part (ii)")
    lhs = (value / F.ball_reference(variant, fns, n)) ** n
    sign = -1.0 if star else 1.0
    rhs = math.prod((v / bvol) ** (sign * (1 - 2 * r)) for v, r in zip(vols, degrees))
    return make_report(f"isoperimetric[{variant},ii]", anchor, "<=", lhs, rhs, tol, n,
                       equality_case=eq, digest=dig)


def _ith_equality(fn1, K, fn2, L, rule):
    prop = S.proportional(fn1, fn2)
    return prop and (same_body(K, L, rule) or (fn1.homogeneous and are_dilates(K, L, rule)))


def check_ith_interpolation(i, j, k, variant, fn1, K, fn2, L, rule, tol=None):
    """Interpolation of i-th mixed functionals.

    With i strictly between j and k: as_i <= as_j^((k-i)/(k-j)) as_k^((i-j)/(k-j)).
    With (i, j) = (0, n), k <= 0 or (i, j) = (n, 0), k >= n the reversed bound
    [as_k]^n >= [as_fn1(K)]^(n-k) [as_fn2(L)]^k is checked instead.
    """
    variant = F.normalize_variant(variant)
    n = K.n
    tol = default_tol(n) if tol is None else tol
    if j == k:
        raise PreconditionError("degenerate interpolation: j == k")
    eq = _ith_equality(fn1, K, fn2, L, rule)
    dig = digest_of(variant=variant, i=i, j=j, k=k, functions=[fn1, fn2], bodies=[K, L])
    a = lambda t: F.ith_mixed_asa(variant, t, fn1, K, fn2, L, rule)  # noqa: E731
    if min(j, k) < i < max(j, k):
        lhs = a(i)
        rhs = a(j) ** ((k - i) / (k - j)) * a(k) ** ((i - j) / (k - j))
        return make_report(f"ith-interpolation[{variant}]", "i:mixed:phi", "<=", lhs, rhs,
                           tol, n, equality_case=eq, digest=dig)
    if (i == 0 and j == n and k <= 0) or (i == n and j == 0 and k >= n):
        lhs = a(k) ** n
        rhs = (F.diagonal_asa(fn1, K, variant, rule) ** (n - k)
               * F.diagonal_asa(fn2, L, variant, rule) ** k)
        anchor = "i:mixed:psi:2" if variant in (F.PSI, F.PSI_STAR) and k <= 0 else "i:mixed:phi:2"
        return make_report(f"ith-reversed[{variant}]", anchor, ">=", lhs, rhs, tol, n,
                           equality_case=eq, digest=dig)
    raise PreconditionError(f"(i, j, k) = ({i}, {j}, {k}) is not an interpolation configuration")


def check_ith_santalo(i, fn1, K, fn2, L, rule, tol=None):
    """as_i(K, L) as_i(K polar, L polar) <= [as_i(B, B)]^2 for centered K, L and 0 <= i <= n."""
    n = K.n
    tol = default_tol(n) if tol is None else tol
    if not 0 <= i <= n:
        raise PreconditionError(f"i must lie in [0, {n}]")
    require_homogeneous([fn1, fn2], "the i-th Santalo inequality")
    require_centered([K, L], rule)
    lhs = (F.ith_mixed_asa(F.PHI, i, fn1, K, fn2, L, rule)
           * F.ith_mixed_asa(F.PHI, i, fn1, B.polar(K), fn2, B.polar(L), rule))
    ball = B.Ball(n)
    rhs = F.ith_mixed_asa(F.PHI, i, fn1, ball, fn2, ball, rule) ** 2
    return make_report("ith-santalo", "i:mixed:phi", "<=", lhs, rhs, tol, n,
                       equality_case=ellipsoid_dilates([K, L], rule),
                       digest=digest_of(i=i, functions=[fn1, fn2], bodies=[K, L]))


def check_ith_isoperimetric(i, part, variant, fn1, K, fn2, L, rule, tol=None):
    """i-th mixed isoperimetric inequalities for centered K, L and 0 <= i <= n.

    ``phi`` (i): as_i(K, L) <= as_i(B_K, B_L).  ``phi`` / ``phi_star`` (ii):
    ratio^n <= (|K|/|B|)^((n-i) e_1) (|L|/|B|)^(i e_2) with e = 1 - 2r (phi)
    or 2r - 1 (phi_star).
    """
    variant = F.normalize_variant(variant)
    n = K.n
    tol = default_tol(n) if tol is None else tol
    if not 0 <= i <= n:
        raise PreconditionError(f"i must lie in [0, {n}]")
    require_centered([K, L], rule)
    vk, vl = B.volume(K, rule), B.volume(L, rule)
    value = F.ith_mixed_asa(variant, i, fn1, K, fn2, L, rule)
    eq = ellipsoid_dilates([K, L], rule)
    dig = digest_of(variant=variant, i=i, part=part, functions=[fn1, fn2], bodies=[K, L])
    if part == "i":
        if variant != F.PHI:
            raise PreconditionError("part (i) is stated for the phi variant")
        rhs = F.ith_mixed_asa(variant, i, fn1, ball_of_volume(vk, n), fn2, ball_of_volume(vl, n),
                              rule)
        return make_report("ith-isoperimetric[phi,i]", "i:mixed:phi", "<=", value, rhs, tol, n,
                           equality_case=eq, digest=dig)
    if variant not in (F.PHI, F.PHI_STAR):
        raise PreconditionError(f"part (ii) is stated for phi and phi_star, not {variant}")
    r1, r2 = require_homogeneous([fn1, fn2], "part (ii)")
    ball = B.Ball(n)
    lhs = (value / F.ith_mixed_asa(variant, i, fn1, ball, fn2, ball, rule)) ** n
    sign = -1.0 if variant == F.PHI_STAR else 1.0
    bv = ball_volume(n)
    rhs = (vk / bv) ** ((n - i) * sign * (1 - 2 * r1)) * (vl / bv) ** (i * sign * (1 - 2 * r2))
    return make_report(f"ith-isoperimetric[{variant},ii]", "i:mixed:phi", "<=", lhs, rhs, tol,
                       n, equality_case=eq, digest=dig)


def check_ith_extremes(k, variant, fn1, K, fn2, rule, tol=None):
    """Bounds for as_k(fn1, K; fn2, B) outside the interpolation band.

    ``phi`` with k >= n, ``psi`` / ``psi_star`` with k <= 0.  Claims that
    involve the unknown inverse Santalo constant c are replaced by their
    computable chains; the implied value of c is reported for information.
    Returns a list of reports.
    """
    variant = F.normalize_variant(variant)
    n = K.n
    tol = default_tol(n) if tol is None else tol
    if variant == F.PHI and k < n:
        raise PreconditionError(f"the phi extreme bounds need k >= n, got k={k}")
    if variant in (F.PSI, F.PSI_STAR) and k > 0:
        raise PreconditionError(f"the psi extreme bounds need k <= 0, got k={k}")
    if variant == F.PHI_STAR:
        raise PreconditionError("no extreme bound is stated for phi_star")
    require_centered([K], rule)
    ball = B.Ball(n)
    bv = ball_volume(n)
    vol = B.volume(K, rule)
    Kp = B.polar(K)
    eq = is_ball(K, rule)
    dig = digest_of(variant=variant, k=k, functions=[fn1, fn2], bodies=[K])
    anchor = {F.PHI: "ith:phi:bigger:n", F.PSI: "ith:mixed:general:k:smaller:0",
              F.PSI_STAR: "ith:mixed:general:k:smaller:0:star"}[variant]
    a = lambda body, t=k: F.ith_mixed_asa(variant, t, fn1, body, fn2, ball, rule)  # noqa: E731
    value = a(K)
    reports = []

    # (i): comparison with the volume-matched reference body
    if variant == F.PSI_STAR:
        ref = B.polar(ball_of_volume(B.polar_volume(K, rule), n))
    else:
        ref = ball_of_volume(vol, n)
    reports.append(make_report(f"ith-extreme[{variant},i]", anchor, ">=", value, a(ref), tol, n,
                               equality_case=eq, digest=dig))

    if not fn1.homogeneous:
        return reports
    r1 = fn1.degree
    base = a(ball)
    if variant in (F.PHI, F.PSI):
        reports.append(make_report(
            f"ith-extreme[{variant},ii]", anchor, ">=", (value / base) ** n,
            (vol / bv) ** ((n - k) * (1 - 2 * r1)), tol, n, equality_case=eq, digest=dig))
    if variant == F.PHI:
        reports.append(make_report(
            "ith-extreme[phi,santalo]", anchor, ">=", value * a(Kp), base ** 2, tol, n,
            equality_case=eq, digest=dig))
        return reports

    # psi and psi_star: computable chains around the constant c
    pvol = B.polar_volume(K, rule)
    d1 = lambda body: F.diagonal_asa(fn1, body, variant, rule)  # noqa: E731
    s_K, s_Kp = d1(K), d1(Kp)
    if variant == F.PSI:
        reports.append(check_ludwig_lower(fn1, K, rule, tol))
        reports.append(check_ludwig_lower(fn1, Kp, rule, tol))
    else:
        # as*_psi(K) / as*_psi(B) >= (|K polar| / |B|)^(1 - 2 r)
        reports.append(make_report(
            "ith-extreme[psi_star,polar-volume]", "psi:santalo:1", ">=",
            s_K / F.ball_reference(variant, [fn1], n), (pvol / bv) ** (1 - 2 * r1), tol, n,
            equality_case=eq, digest=dig))
    reports.append(make_report(
        f"ith-extreme[{variant},product]", anchor, ">=", s_K * s_Kp,
        n * n * vol * pvol * fn1.at_one ** 2, tol, n, equality_case=eq, digest=dig))
    s_B = F.diagonal_asa(fn2, ball, variant, rule)
    prod_k = value * a(Kp)
    reports.append(make_report(
        f"ith-extreme[{variant},k-chain]", anchor, ">=", prod_k,
        (s_K * s_Kp) ** ((n - k) / n) * s_B ** (2 * k / n), tol, n, equality_case=eq,
        digest=dig))
    implied_c = (prod_k / base ** 2) ** (1.0 / (n - k)) if n != k else float("nan")
    reports.append(info_report(
        f"ith-extreme[{variant},implied-c]", anchor, implied_c, digest=dig,
        note="largest c for which the c-dependent bound holds on this input"))
    return reports


@functools.lru_cache(maxsize=8)
def _rule(n, N):
    return build_rule(n, N)


# largest resolution the duality check refines to
DUALITY_MAX_N = {2: 8192, 3: 64}
# identities compared across different node sets are recomputed on doubled
# rules up to this resolution before a miss is reported
ESCALATE_MAX_N = {2: 8192, 3: 128}


def check_duality_dilates(variant, fns, K, lambdas, rule, tol=None, refine=2):
    """as*(fn_i, l_i K) = as(fn_i, (l_i K) polar) through the numeric polar pipeline.

    The polar side is less regular than the body side at the same nodes, so
    both sides start on ``rule`` refined ``refine`` times and are doubled
    until each changes by less than tol / 10 (or the resolution cap is hit).
    """
    variant = F.normalize_variant(variant)
    if F.is_star(variant):
        raise PreconditionError("pass the non-star variant (phi or psi)")
    star = F.PHI_STAR if variant == F.PHI else F.PSI_STAR
    n = K.n
    tol = default_tol(n) if tol is None else tol
    cap = DUALITY_MAX_N.get(n, DUALITY_MAX_N[3])
    N = min(rule.resolution * max(int(refine), 1), max(cap, rule.resolution))
    dil = [B.dilate(K, lam) for lam in lambdas]
    polars = [B.polar(D) for D in dil]

    def sides(N):
        r = _rule(n, N)
        return F.mixed(star, fns, dil, r), F.mixed(variant, fns, polars, r)

    lhs, rhs = sides(N)
    while 2 * N <= cap:
        lhs2, rhs2 = sides(2 * N)
        N *= 2
        settled = (abs(lhs2 - lhs) <= 0.1 * tol * abs(lhs2)
                   and abs(rhs2 - rhs) <= 0.1 * tol * abs(rhs2))
        lhs, rhs = lhs2, rhs2
        if settled:
            break
    if _misses(lhs, rhs, tol) and N < ESCALATE_MAX_N.get(n, ESCALATE_MAX_N[3]):
        (lhs, rhs), N = _escalate(lambda r: sides(r.resolution), _rule(n, N), tol, n)
    anchor = "Duality:psi" if variant == F.PSI else "dual:formula:star"
    return make_report(f"duality-dilates[{variant}]", anchor, "==", lhs, rhs, tol, n,
                       digest=digest_of(variant=variant, functions=fns, bodies=[K],
                                        lambdas=list(lambdas)),
                       note=f"resolution N={N}")


def counterexample_values(rule=None):
    """The planar pair (T B, B), T = diag(1, 2), with psi(t) = 1/t.

    Returns ``(lhs, star)`` = (as_psi(TB, B), as*_psi((TB) polar, B)).
    """
    rule = rule or build_rule(2, 1024)
    psi = S.power_conv(1.0, -1.0)
    TB = B.LinearImageOfBall(np.diag([1.0, 2.0]))
    ball = B.Ball(2)
    lhs = F.mixed(F.PSI, [psi, psi], [TB, ball], rule)
    star = F.mixed(F.PSI_STAR, [psi, psi], [B.polar(TB), ball], rule)
    return lhs, star


def check_counterexample(rule=None, tol=1e-8):
    """Ratio as_psi(TB, B) / as*_psi((TB) polar, B) against the claimed factor 4."""
    lhs, star = counterexample_values(rule)
    return make_report("counterexample-ratio", "Duality:psi", "==", lhs / star, 4.0, tol, 2,
                       digest=digest_of(T=[[1.0, 0.0], [0.0, 2.0]], psi="pv:1.0:-1.0"),
                       note=f"lhs={lhs!r} star={star!r}")


# body-level invariants ---------------------------------------------------


def check_transformation_law(K, T, rule, tol=1e-8):
    """f_TK(v) h_TK^(n+1)(v) = det(T)^2 f_K(u) h_K^(n+1)(u), v = T^-t u / |T^-t u|."""
    T = B.LinearMap.coerce(T)
    n = K.n
    U = rule.nodes[:: max(1, rule.size // 64)]
    V = U @ T.inv_t.T
    V /= np.linalg.norm(V, axis=1)[:, None]
    TK = B.linear_image(K, T)
    hT, fT = TK.evaluate(V)
    h, f = K.evaluate(U)
    lhs = fT * hT ** (n + 1)
    rhs = T.det ** 2 * f * h ** (n + 1)
    k = int(np.argmax(np.abs(lhs - rhs) / rhs))
    return make_report("transformation-law", "Curvature:K:TK:2", "==", lhs[k], rhs[k], tol, n,
                       digest=digest_of(bodies=[K], map=T))


def check_exchange_identity(variant, i, fn1, K, fn2, L, rule, tol=1e-12):
    n = K.n
    lhs = F.ith_mixed_asa(variant, i, fn1, K, fn2, L, rule)
    rhs = F.ith_mixed_asa(variant, n - i, fn2, L, fn1, K, rule)
    return make_report(f"exchange-identity[{F.normalize_variant(variant)}]", "i:mixed:phi", "==",
                       lhs, rhs, tol, n, digest=digest_of(i=i, functions=[fn1, fn2],
                                                          bodies=[K, L]))


def check_mixed_diagonal(variant, fn, K, rule, tol=1e-12):
    n = K.n
    lhs = F.mixed(variant, [fn] * n, [K] * n, rule)
    rhs = F.diagonal_asa(fn, K, variant, rule)
    return make_report(f"mixed-diagonal[{F.normalize_variant(variant)}]", "affine:conc", "==",
                       lhs, rhs, tol, n, digest=digest_of(functions=[fn], bodies=[K]))


def check_volume_law(K, T, rule, tol=None):
    n = K.n
    T = B.LinearMap.coerce(T)
    tol = 1e-8 if tol is None else tol
    lhs = B.volume(B.linear_image(K, T), rule)
    rhs = abs(T.det) * B.volume(K, rule)
    return make_report("volume-law", "affine:invariant:1", "==", lhs, rhs, tol, n,
                       digest=digest_of(bodies=[K], map=T))


# --------------------------------------------------------------------------
# randomized suite


def random_function(rng, kind, homogeneous=None):
    """Random member of Conc (``kind='conc'``) or Conv; sometimes a named member."""
    if homogeneous is None:
        homogeneous = rng.uniform() < 0.75
    c = float(np.round(rng.uniform(0.5, 2.0), 6))
    if kind == S.CONC:
        if homogeneous:
            return S.power_conc(c, float(np.round(rng.uniform(0.0, 0.95), 6)))
        return S.named_nonhomogeneous(["log1p", "bounded-ratio"][rng.integers(2)])
    if homogeneous:
        return S.power_conv(c, float(np.round(rng.uniform(-2.5, 0.0), 6)))
    return S.named_nonhomogeneous("exp-conv")


def _kind(variant):
    return S.CONC if variant in (F.PHI, F.PHI_STAR) else S.CONV


def _random_index_triple(rng, n):
    """(i, j, k) with i strictly between j and k, all in [-2, n + 2]."""
    pts = np.sort(rng.uniform(-2.0, n + 2.0, size=3))
    j, i, k = (float(np.round(p, 6)) for p in pts)
    if rng.uniform() < 0.5:
        j, k = k, j
    return i, j, k


def _guard(name, fn, reports, n, digest):
    try:
        out = fn()
    except MixedAffineError as exc:
        reports.append(InequalityReport(name, "", "error", math.nan, math.nan, math.nan,
                                        math.nan, 0.0, FAIL, False, digest,
                                        f"{type(exc).__name__}: {exc}"))
        return
    if isinstance(out, list):
        reports.extend(out)
    else:
        reports.append(out)


def run_trial(seed, trial, n, tol=None, rule=None, delta_min=0.2, interpolations=2):
    """All checks for one randomized trial in dimension ``n``."""
    tol = default_tol(n) if tol is None else tol
    rule = rule or build_rule(n, SUITE_RESOLUTION[n])
    rng = np.random.default_rng([seed, n, trial])
    base = {"seed": seed, "trial": trial, "dim": n}
    reports = []
    try:
        raw = [B.random_body(rng, n, delta_min=delta_min) for _ in range(n)]
        sym = B.random_body(rng, n, delta_min=delta_min, symmetric=True)
    except MixedAffineError as exc:
        reports.append(InequalityReport("random-body", "", "error", math.nan, math.nan, math.nan,
                                        math.nan, 0.0, FAIL, False, base, str(exc)))
        return reports
    centered = [B.translate_to_centroid(K, rule) for K in raw]
    cond = SUITE_MAP_COND.get(n, SUITE_MAP_COND[3])
    T1 = B.random_linear_map(rng, n, unimodular=True, max_cond=cond)
    T2 = B.random_linear_map(rng, n, unimodular=False, max_cond=cond)

    def run(name, fn):
        _guard(name, fn, reports, n, base)

    for variant in F.VARIANTS:
        kind = _kind(variant)
        fns = [random_function(rng, kind) for _ in range(n)]
        hom = [random_function(rng, kind, homogeneous=True) for _ in range(n)]
        run("affine", lambda: check_affine_invariance(variant, fns, raw, T1, rule, tol))
        run("affine", lambda: check_affine_invariance(variant, hom, raw, T2, rule, tol))
        for m in range(1, n + 1):
            run("af", lambda: check_alexandrov_fenchel(m, variant, fns, raw, rule, tol))
        f1, f2 = random_function(rng, kind), random_function(rng, kind)
        for _ in range(interpolations):
            i, j, k = _random_index_triple(rng, n)
            run("interp", lambda: check_ith_interpolation(i, j, k, variant, f1, raw[0], f2,
                                                          raw[-1], rule, tol))
        k_out = float(np.round(rng.uniform(0.0, 2.0), 6))
        run("reversed", lambda: check_ith_interpolation(n, 0, n + k_out, variant, f1, raw[0],
                                                        f2, raw[-1], rule, tol))
        run("reversed", lambda: check_ith_interpolation(0, n, -k_out, variant, f1, raw[0],
                                                        f2, raw[-1], rule, tol))
        run("exchange", lambda: check_exchange_identity(variant, float(rng.uniform(-1, n + 1)),
                                                        f1, raw[0], f2, raw[-1], rule))
        run("mixed-diagonal", lambda: check_mixed_diagonal(variant, f1, raw[0], rule))

    phi = random_function(rng, S.CONC)
    phi_h = [random_function(rng, S.CONC, homogeneous=True) for _ in range(n)]
    psi = random_function(rng, S.CONV)
    psi_h = random_function(rng, S.CONV, homogeneous=True)
    run("ludwig", lambda: check_ludwig_upper(phi, raw[0], rule, tol))
    run("ludwig", lambda: check_ludwig_lower(psi, raw[0], rule, tol))
    run("santalo", lambda: check_santalo(phi_h, raw, rule, "general", tol))
    run("santalo", lambda: check_santalo(phi_h, raw, rule, "centered", tol))
    phis = [random_function(rng, S.CONC) for _ in range(n)]
    for variant in (F.PHI, F.PHI_STAR):
        run("iso", lambda: check_isoperimetric(variant, "i", phis, centered, rule, tol))
        run("iso", lambda: check_isoperimetric(variant, "ii", phi_h, centered, rule, tol))
    run("iso", lambda: check_isoperimetric(F.PSI, "i", [psi], centered[:1], rule, tol))
    run("iso", lambda: check_isoperimetric(F.PSI, "ii", [psi_h], centered[:1], rule, tol))
    i_mid = float(np.round(rng.uniform(0, n), 6))
    run("ith-santalo", lambda: check_ith_santalo(i_mid, phi_h[0], centered[0], phi_h[-1],
                                                 centered[-1], rule, tol))
    run("ith-iso", lambda: check_ith_isoperimetric(i_mid, "i", F.PHI, phi, centered[0],
                                                   phis[-1], centered[-1], rule, tol))
    for variant in (F.PHI, F.PHI_STAR):
        run("ith-iso", lambda: check_ith_isoperimetric(i_mid, "ii", variant, phi_h[0],
                                                       centered[0], phi_h[-1], centered[-1],
                                                       rule, tol))
    k_hi = n + float(np.round(rng.uniform(0, 2), 6))
    k_lo = -float(np.round(rng.uniform(0, 2), 6))
    run("extremes", lambda: check_ith_extremes(k_hi, F.PHI, phi_h[0], centered[0], phi, rule,
                                               tol))
    run("extremes", lambda: check_ith_extremes(k_lo, F.PSI, psi_h, centered[0], psi, rule, tol))
    run("extremes", lambda: check_ith_extremes(k_lo, F.PSI_STAR, psi_h, centered[0], psi, rule,
                                               tol))
    lambdas = [float(np.round(x, 6)) for x in rng.uniform(*SUITE_DILATES, size=n)]
    run("duality", lambda: check_duality_dilates(F.PSI, [psi] * n, sym, lambdas, rule, tol))
    run("duality", lambda: check_duality_dilates(F.PHI, phi_h, raw[0], lambdas, rule, tol))
    run("transformation", lambda: check_transformation_law(raw[0], T1, rule,
                                                           1e-8 if n == 2 else 1e-5))
    run("volume", lambda: check_volume_law(raw[0], T2, rule, 1e-8 if n == 2 else 1e-5))
    for rep in reports:
        rep.digest = {**base, **rep.digest}
    return reports


def run_property_suite(seed, trials, dims=(2,), tol=None, workers=None, rule_n=None,
                       delta_min=0.2, interpolations=2):
    """Run ``trials`` randomized trials per dimension.

    Trials draw from independent substreams seeded by (seed, dim, trial), so
    the report list is identical for any ``workers`` count.
    """
    if trials < 1:
        raise PreconditionError("trials must be >= 1")
    jobs = [(n, t) for n in dims for t in range(trials)]
    rules = {n: build_rule(n, rule_n or SUITE_RESOLUTION[n]) for n in dims}

    def job(nt):
        n, t = nt
        return run_trial(seed, t, n, tol if tol is not None else default_tol(n), rules[n],
                         delta_min, interpolations)

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(job, jobs))
    else:
        results = [job(nt) for nt in jobs]
    return [rep for chunk in results for rep in chunk]


def summarize(reports):
    counts = {PASS: 0, FAIL: 0, INFEASIBLE: 0, INFO: 0}
    for r in reports:
        counts[r.status] += 1
    return counts


def flattening_family(tau):
    """h_tau(theta) = 1 + tau cos(4 theta) / 15, rescaled to area pi."""
    # area of 1 + a cos(4 theta) is pi (1 - 7.5 a^2)
    a = tau / 15.0
    s = 1.0 / math.sqrt(1.0 - 7.5 * a * a)
    return B.Fourier2D(s, [0.0, 0.0, a * s])


def flatten_sweep(p=2.0, taus=None, rule=None):
    """as_phi (phi = t^(p/(2+p))) along the flattening family; returns rows (tau, delta, value)."""
    rule = rule or build_rule(2, 1024)
    taus = np.linspace(0.0, 0.95, 11) if taus is None else taus
    phi = S.power_conc(1.0, p / (2.0 + p))
    rows = []
    for tau in taus:
        K = flattening_family(float(tau))
        rows.append((float(tau), K.convexity_margin, F.diagonal_asa(phi, K, F.PHI, rule)))
    return rows
