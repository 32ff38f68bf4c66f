"""Illumination surface bodies in the plane.

For a planar C2+ body K and a point x outside K, the part of the boundary
illuminated from x is the arc of normals u(theta) on which
g(theta) = <x, u(theta)> - h_K(theta) > 0.  On that arc g'' = -g - f_K < 0,
so g has a single maximum and the arc endpoints are simple roots.

K^{f,s} collects the points whose illuminated arc carries weight at most s,
where the weight of an arc is int f(theta) f_K(theta) d theta (f_K d theta is
the arc-length element).  Its area excess over K, scaled by 8 / s^2, tends to
the mixed functional that generated f.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import bodies as B
from . import functionals as F
from .errors import ConvergenceError, DimensionError, ValidationError
from .quadrature import build_rule

C2 = 8.0  # c_n = 2 |B^{n-1}|^(2/(n-1)) at n = 2
ARC_TOL = 1e-12
RADIAL_TOL = 1e-13
_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)
_SEARCH = 256


@dataclass(frozen=True, eq=False)
class IlluminationProblem:
    """Base body ``K`` and a weight ``weight(theta)`` on its boundary, indexed by normal angle.

    ``reference`` is the functional the limit should reproduce, when known.
    """

    K: object
    weight: object
    reference: float = None
    label: str = "custom"

    def __post_init__(self):
        if self.K.n != 2:
            raise DimensionError("illumination bodies are implemented for n = 2 only")
        theta = 2 * np.pi * np.arange(1024) / 1024
        w = np.asarray(self.weight(theta), dtype=float)
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValidationError("weight must be finite and nonnegative on the boundary")


def constant_weight(K, c=1.0):
    """Weight ``f = c``; for the unit ball the limit is 2 pi / c^2."""
    c = float(c)
    return IlluminationProblem(K, lambda theta: np.full(np.shape(theta), c), label=f"const:{c!r}")


def mixed_weight(variant, fns, bodies, K=None, rule=None):
    """Weight generated by (fn_i, K_i):  f = f_K^((n-2)/2) prod term_i^((1-n)/(2n)).

    In the plane this is prod term_i^(-1/4), independent of the base body
    ``K`` (default: the unit disc).  ``variant`` is ``phi`` or ``psi``.
    """
    variant = F.normalize_variant(variant)
    if F.is_star(variant):
        raise ValidationError("the illumination weight is defined for phi and psi variants")
    spec = F.FunctionalSpec(variant, list(zip(fns, bodies)))
    if spec.n != 2 or len(spec.pairs) != 2:
        raise DimensionError("illumination bodies are implemented for n = 2 only")
    K = B.Ball(2) if K is None else K

    def weight(theta):
        theta = np.asarray(theta, dtype=float)
        U = B.angles_to_units(theta.reshape(-1))
        logs = np.zeros(len(U))
        for fn, L in spec.pairs:
            h, f = L.evaluate(U)
            with np.errstate(all="ignore"):
                logs += np.log(fn(1.0 / (f * h ** 3)) * h * f)
        return np.exp(-0.25 * logs).reshape(theta.shape)

    ref = F.general_mixed_asa(spec, rule or build_rule(2, 1024))
    return IlluminationProblem(K, weight, reference=ref, label=f"mixed:{variant}")


# --------------------------------------------------------------------------
# arcs


def _g(K, X, theta):
    U = B.angles_to_units(theta)
    h, xb, f = K.local(U)
    xu = np.sum(X * U, axis=1)
    dh = np.sum(xb * B.perp(U), axis=1)
    g = xu - h
    dg = np.sum(X * B.perp(U), axis=1) - dh
    d2g = -xu - f + h
    return g, dg, d2g


def _argmax(K, X):
    """Angle maximizing g for each row of X (grid search, then safeguarded Newton)."""
    grid = 2 * np.pi * np.arange(_SEARCH) / _SEARCH
    Ug = B.angles_to_units(grid)
    G = X @ Ug.T - K.support(Ug)[None, :]
    t = grid[np.argmax(G, axis=1)]
    step_cap = 2 * np.pi / _SEARCH
    for _ in range(60):
        _, dg, d2g = _g(K, X, t)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(d2g < 0, -dg / d2g, np.sign(dg) * step_cap)
        step = np.clip(step, -step_cap, step_cap)
        t = t + step
        if np.all(np.abs(step) < 1e-14):
            break
    return t


def _root(K, X, a, b, tol=ARC_TOL):
    """Root of g on [a, b] with g(a) > 0 > g(b): safeguarded Newton on a shrinking bracket."""
    lo, hi = a.copy(), b.copy()
    t = 0.5 * (lo + hi)
    for _ in range(200):
        g, dg, _ = _g(K, X, t)
        pos = g > 0
        lo = np.where(pos, t, lo)
        hi = np.where(pos, hi, t)
        with np.errstate(divide="ignore", invalid="ignore"):
            nt = t - g / dg
        inside = np.isfinite(nt) & (nt > np.minimum(lo, hi)) & (nt < np.maximum(lo, hi))
        nt = np.where(inside, nt, 0.5 * (lo + hi))
        done = np.abs(hi - lo) < tol
        if np.all(done | (np.abs(nt - t) < tol * 1e-2)):
            t = np.where(done, 0.5 * (lo + hi), nt)
            break
        t = nt
    return t


def illuminated_arcs(K, X):
    """Vectorized arcs ``(lo, hi)`` of normal angles illuminated from each row of ``X``.

    Points in K get the zero-length interval at their maximizing angle.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    t = _argmax(K, X)
    g, _, _ = _g(K, X, t)
    lo, hi = t.copy(), t.copy()
    out = g > 0
    if out.any():
        Xo, to = X[out], t[out]
        hi[out] = _root(K, Xo, to, to + np.pi)
        lo[out] = _root(K, Xo, to, to - np.pi)
    return lo, hi


def illuminated_arc(K, x):
    """Interval ``(theta_minus, theta_plus)`` of illuminated normals; zero length if x is in K."""
    lo, hi = illuminated_arcs(K, np.asarray(x, dtype=float)[None, :])
    return float(lo[0]), float(hi[0])


def weight_integrals(problem, X):
    """int over the illuminated arc of weight * f_K, for each row of X (16-point Gauss-Legendre)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    lo, hi = illuminated_arcs(problem.K, X)
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    theta = mid[:, None] + half[:, None] * _GL_X[None, :]
    U = B.angles_to_units(theta.reshape(-1))
    fk = problem.K.curvature(U).reshape(theta.shape)
    w = np.asarray(problem.weight(theta), dtype=float)
    return half * ((w * fk) @ _GL_W)


def weight_integral(problem, x):
    return float(weight_integrals(problem, np.asarray(x, dtype=float)[None, :])[0])


# --------------------------------------------------------------------------
# areas and the limit


def radial_function(problem, s, M=1024, tol=RADIAL_TOL):
    """Radial function of K^{f,s} at M equally spaced directions."""
    K = problem.K
    alpha = 2 * np.pi * np.arange(M) / M
    V = B.angles_to_units(alpha)
    rho_in = float(np.min(K.support(B.angles_to_units(2 * np.pi * np.arange(4096) / 4096))))
    if s <= 0:
        raise ValidationError("s must be positive (K^{f,0} contains K and its area is |K|)")
    lo = np.full(M, rho_in)
    hi = np.full(M, 2.0 * float(np.max(K.support(V))))
    F_lo = np.full(M, -s)
    F_hi = weight_integrals(problem, hi[:, None] * V) - s
    for _ in range(60):
        short = F_hi <= 0
        if not short.any():
            break
        lo = np.where(short, hi, lo)
        F_lo = np.where(short, F_hi, F_lo)
        hi = np.where(short, 2.0 * hi, hi)
        F_hi = np.where(short, weight_integrals(problem, hi[:, None] * V) - s, F_hi)
    else:
        k = int(np.flatnonzero(F_hi <= 0)[0])
        raise ConvergenceError(f"weight never reaches s={s} along direction {V[k].tolist()}",
                               data={"direction": V[k].tolist()})
    # Illinois-modified regula falsi on F(rho) = W(rho v) - s
    side = np.zeros(M, dtype=int)
    for _ in range(300):
        c = (lo * F_hi - hi * F_lo) / (F_hi - F_lo)
        c = np.where(np.isfinite(c) & (c > lo) & (c < hi), c, 0.5 * (lo + hi))
        Fc = weight_integrals(problem, c[:, None] * V) - s
        left = Fc < 0
        lo = np.where(left, c, lo)
        F_lo = np.where(left, Fc, F_lo)
        hi = np.where(left, hi, c)
        F_hi = np.where(left, F_hi, Fc)
        # halve the stale endpoint's value when the same side moves twice
        F_hi = np.where(left & (side == 1), 0.5 * F_hi, F_hi)
        F_lo = np.where(~left & (side == -1), 0.5 * F_lo, F_lo)
        side = np.where(left, 1, -1)
        if np.all((hi - lo) <= tol * hi) or np.all(Fc == 0):
            break
    else:
        raise ConvergenceError(f"radial solve did not converge for s={s}")
    return 0.5 * (lo + hi)


def illumination_body_area(problem, s, M=1024):
    """|K^{f,s}| by the trapezoid rule on the radial function (s = 0 gives |K|)."""
    if s == 0:
        return B.volume(problem.K, build_rule(2, M))
    rho = radial_function(problem, s, M)
    return 0.5 * math.fsum((rho ** 2).tolist()) * (2 * np.pi / M)


@dataclass
class LimitStudy:
    s: list
    area: list
    q: list
    table: list
    estimate: float
    base_area: float


def richardson(values, ratio=2.0):
    """Richardson table for values at s0 / ratio^k with errors in powers s, s^2, ...

    Returns the list of rows; the last entry of the last row is the estimate.
    """
    rows = [list(map(float, values))]
    for p in range(1, len(values)):
        prev = rows[-1]
        fac = ratio ** p
        rows.append([(fac * prev[k + 1] - prev[k]) / (fac - 1) for k in range(len(prev) - 1)])
    return rows


def geometric_limit_estimate(problem, s0=0.1, levels=4, M=1024):
    """Extrapolate q(s) = 8 (|K^{f,s}| - |K|) / s^2 to s -> 0.

    Raises :class:`ConvergenceError` when successive differences of q do not
    shrink, which signals that s0 is outside the asymptotic regime.
    """
    if levels < 3:
        raise ValidationError("levels must be at least 3")
    base = B.volume(problem.K, build_rule(2, M))
    s_vals = [s0 * 0.5 ** k for k in range(levels)]
    areas = [illumination_body_area(problem, s, M) for s in s_vals]
    q = [C2 * (a - base) / s ** 2 for a, s in zip(areas, s_vals)]
    diffs = np.abs(np.diff(q))
    noise = 1e-8 * abs(q[-1])
    if np.any(diffs[1:] > diffs[:-1] + noise):
        raise ConvergenceError(f"q(s) sequence is not converging: {q}", data={"q": q, "s": s_vals})
    table = richardson(q)
    return LimitStudy(s_vals, areas, q, table, table[-1][0], base)
