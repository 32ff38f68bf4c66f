"""Smooth convex bodies described by their support functions.

Every body exposes, at arrays of unit vectors ``U`` of shape ``(M, n)``:

* ``support(U)``    -- the support function h_K,
* ``gradient(U)``   -- the boundary point with outer normal u (the gradient
  of the 1-homogeneous extension H of h_K),
* ``hessian(U)``    -- the Hessian of H (zero along u),
* ``curvature(U)``  -- the curvature function f_K = det(hess H + u u^T),
  the reciprocal Gauss curvature as a function of the normal.

Bodies are immutable.  Families with closed forms (balls, linear images of
balls, planar Fourier bodies) are evaluated analytically; perturbed balls in
R^3 use a finite-difference Hessian; polars without a closed form are
evaluated by maximizing <u, v>/h_K(v) over the sphere.
"""

import json
import threading
from collections import OrderedDict
from functools import cached_property

import numpy as np

from .errors import (ConvergenceError, DimensionError, NotC2PlusError,
                     ValidationError)
from .quadrature import ball_volume, build_rule, integrate

UNIT_TOL = 1e-10
FD_STEP = 1e-4


def as_units(U, n=None):
    """Return ``U`` as an ``(M, n)`` float array, checking unit norms."""
    U = np.asarray(U, dtype=float)
    if U.ndim == 1:
        U = U[None, :]
    if n is not None and U.shape[1] != n:
        raise DimensionError(f"expected vectors of dimension {n}, got {U.shape[1]}")
    norms = np.linalg.norm(U, axis=1)
    bad = np.flatnonzero(np.abs(norms - 1.0) > UNIT_TOL)
    if bad.size:
        k = bad[0]
        raise ValidationError(f"direction {U[k].tolist()} is not a unit vector (norm {norms[k]!r})")
    return U


def perp(U):
    """Rotate planar vectors by +90 degrees."""
    return np.column_stack([-U[:, 1], U[:, 0]])


def angles_to_units(theta):
    theta = np.asarray(theta, dtype=float)
    return np.stack([np.cos(theta), np.sin(theta)], axis=-1)


def _validation_nodes(n):
    if n == 2:
        return angles_to_units(2 * np.pi * np.arange(2048) / 2048)
    return build_rule(3, 24).nodes


def fd_hessian(H, U, step=FD_STEP):
    """Hessian of a scalar function ``H`` on R^n at the rows of ``U``.

    Central differences at steps ``step`` and ``step/2`` combined by one
    Richardson step (fourth-order accurate).
    """
    U = np.asarray(U, dtype=float)
    M, n = U.shape
    eye = np.eye(n)

    def central(s):
        out = np.empty((M, n, n))
        h0 = H(U)
        for i in range(n):
            ei = s * eye[i]
            out[:, i, i] = (H(U + ei) - 2.0 * h0 + H(U - ei)) / (s * s)
            for j in range(i + 1, n):
                ej = s * eye[j]
                val = (H(U + ei + ej) - H(U + ei - ej) - H(U - ei + ej) + H(U - ei - ej)) / (4 * s * s)
                out[:, i, j] = out[:, j, i] = val
        return out

    return (4.0 * central(step / 2) - central(step)) / 3.0


def curvature_from_hessian(hess, U):
    """f = det(hess H + u u^T): the product of the principal radii of curvature."""
    return np.linalg.det(hess + U[:, :, None] * U[:, None, :])


def tangent_eigenvalues(hess, U):
    """Eigenvalues of hess H restricted to the tangent space at each u."""
    M, n = U.shape
    if n == 2:
        t = perp(U)
        return np.einsum("mi,mij,mj->m", t, hess, t)[:, None]
    # orthonormal tangent frame
    a = np.where(np.abs(U[:, :1]) < 0.9, np.array([[1.0, 0, 0]]), np.array([[0, 1.0, 0]]))
    t1 = a - np.sum(a * U, axis=1)[:, None] * U
    t1 /= np.linalg.norm(t1, axis=1)[:, None]
    t2 = np.cross(U, t1)
    T = np.stack([t1, t2], axis=2)  # (M, 3, 2)
    small = np.einsum("mia,mij,mjb->mab", T, hess, T)
    return np.linalg.eigvalsh(small)


class ConvexBody:
    """Base class; subclasses implement ``support`` and ``gradient`` at least."""

    n = None

    def support(self, U):
        raise NotImplementedError

    def gradient(self, U):
        raise NotImplementedError

    def hessian(self, U):
        """Hessian of H; generic fallback differentiates the (0-homogeneous) gradient."""
        U = np.asarray(U, dtype=float)
        M, n = U.shape
        s = 1e-6
        out = np.empty((M, n, n))

        def grad_at(X):
            return self.gradient(X / np.linalg.norm(X, axis=1)[:, None])

        for j in range(n):
            e = np.zeros(n)
            e[j] = s
            out[:, :, j] = (grad_at(U + e) - grad_at(U - e)) / (2 * s)
        return 0.5 * (out + out.transpose(0, 2, 1))

    def curvature(self, U):
        U = np.asarray(U, dtype=float)
        if self.n == 2:
            t = perp(U)
            return np.einsum("mi,mij,mj->m", t, self.hessian(U), t)
        return curvature_from_hessian(self.hessian(U), U)

    def evaluate(self, U):
        """Return ``(h, f)`` at ``U``."""
        return self.support(U), self.curvature(U)

    def local(self, U):
        """Return ``(h, x, f)``: support, boundary point and curvature."""
        return self.support(U), self.gradient(U), self.curvature(U)

    def to_doc(self):
        raise NotImplementedError

    def describe(self):
        return json.dumps(self.to_doc(), sort_keys=True)

    # validation ---------------------------------------------------------

    @cached_property
    def convexity_margin(self):
        """Smallest principal radius of curvature over the validation grid."""
        U = _validation_nodes(self.n)
        return float(np.min(tangent_eigenvalues(self.hessian(U), U)))

    @cached_property
    def min_support(self):
        return float(np.min(self.support(_validation_nodes(self.n))))

    def validate(self):
        if not self.min_support > 0:
            raise NotC2PlusError(
                f"origin is not interior: min support {self.min_support:.3e} <= 0 for {self.describe()}")
        if not self.convexity_margin > 0:
            raise NotC2PlusError(
                f"body not C2+: smallest radius of curvature {self.convexity_margin:.3e} <= 0 "
                f"for {self.describe()}")
        return self

    def __repr__(self):
        return f"{type(self).__name__}({self.describe()})"


class Ball(ConvexBody):
    """Euclidean ball of radius ``radius`` centred at the origin."""

    def __init__(self, n, radius=1.0):
        if n < 2:
            raise DimensionError(f"dimension must be >= 2, got {n}")
        if not radius > 0:
            raise NotC2PlusError(f"ball radius must be positive, got {radius}")
        self.n = int(n)
        self.radius = float(radius)

    def support(self, U):
        return np.full(len(U), self.radius)

    def gradient(self, U):
        return self.radius * np.asarray(U, dtype=float)

    def hessian(self, U):
        U = np.asarray(U, dtype=float)
        return self.radius * (np.eye(self.n)[None] - U[:, :, None] * U[:, None, :])

    def curvature(self, U):
        return np.full(len(U), self.radius ** (self.n - 1))

    @property
    def convexity_margin(self):
        return self.radius

    @property
    def min_support(self):
        return self.radius

    def to_doc(self):
        if self.radius == 1.0:
            return {"type": "ball", "dim": self.n}
        return {"type": "ball", "dim": self.n, "radius": self.radius}


class LinearMap:
    """Invertible linear map with cached determinant and inverse transpose."""

    def __init__(self, matrix):
        A = np.array(matrix, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValidationError(f"linear map must be square, got shape {A.shape}")
        self.n = A.shape[0]
        self.det = float(np.linalg.det(A))
        scale = float(np.max(np.abs(A))) ** self.n if A.size else 0.0
        if not abs(self.det) > 1e-13 * max(scale, 1e-300):
            raise ValidationError(f"linear map is singular (det={self.det!r})")
        self.inv_t = np.linalg.inv(A).T
        if not np.allclose(A @ self.inv_t.T, np.eye(self.n), atol=1e-12, rtol=0):
            raise ValidationError("linear map is too ill-conditioned to invert to 1e-12")
        A.setflags(write=False)
        self.inv_t.setflags(write=False)
        self.matrix = A

    @classmethod
    def coerce(cls, T):
        return T if isinstance(T, LinearMap) else cls(T)

    def __matmul__(self, other):
        return LinearMap(self.matrix @ LinearMap.coerce(other).matrix)

    def __repr__(self):
        return f"LinearMap({self.matrix.tolist()})"


class LinearImageOfBall(ConvexBody):
    """The ellipsoid ``A B^n_2`` with h(u) = |A^T u|."""

    def __init__(self, A):
        self.map = LinearMap.coerce(A)
        self.n = self.map.n
        A = self.map.matrix
        self._gram = A @ A.T

    @property
    def matrix(self):
        return self.map.matrix

    def support(self, U):
        return np.linalg.norm(np.asarray(U) @ self.matrix, axis=1)

    def gradient(self, U):
        U = np.asarray(U, dtype=float)
        return (U @ self._gram) / self.support(U)[:, None]

    def hessian(self, U):
        U = np.asarray(U, dtype=float)
        h = self.support(U)
        g = U @ self._gram
        return self._gram[None] / h[:, None, None] - g[:, :, None] * g[:, None, :] / (h ** 3)[:, None, None]

    def curvature(self, U):
        return self.map.det ** 2 * self.support(U) ** (-(self.n + 1))

    @cached_property
    def convexity_margin(self):
        U = _validation_nodes(self.n)
        return float(np.min(tangent_eigenvalues(self.hessian(U), U)))

    def to_doc(self):
        return {"type": "linear-image", "matrix": self.matrix.tolist()}


class Fourier2D(ConvexBody):
    """Planar body with h(theta) = c0 + sum_k a_k cos(k theta) + b_k sin(k theta).

    Harmonics start at ``k = 2``: first harmonics are pure translations.
    """

    n = 2

    def __init__(self, c0, cos=(), sin=(), validate=True):
        L = max(len(cos), len(sin))
        self.c0 = float(c0)
        self.a = np.zeros(L)
        self.b = np.zeros(L)
        self.a[:len(cos)] = np.asarray(cos, dtype=float)
        self.b[:len(sin)] = np.asarray(sin, dtype=float)
        self.k = np.arange(2, L + 2, dtype=float)
        for arr in (self.a, self.b):
            arr.setflags(write=False)
        if not self.c0 > 0:
            raise NotC2PlusError(f"c0 must be positive, got {c0}")
        if validate:
            self.validate()

    def _series(self, theta):
        kt = theta[:, None] * self.k[None, :]
        c, s = np.cos(kt), np.sin(kt)
        h = self.c0 + c @ self.a + s @ self.b
        dh = (-s * self.k) @ self.a + (c * self.k) @ self.b
        d2h = (-c * self.k ** 2) @ self.a + (-s * self.k ** 2) @ self.b
        return h, dh, d2h

    def derivatives(self, theta):
        """``(h, h', h'')`` at angles ``theta`` by term-wise differentiation."""
        return self._series(np.atleast_1d(np.asarray(theta, dtype=float)))

    @staticmethod
    def _theta(U):
        U = np.asarray(U, dtype=float)
        return np.arctan2(U[:, 1], U[:, 0])

    def support(self, U):
        return self._series(self._theta(U))[0]

    def gradient(self, U):
        U = np.asarray(U, dtype=float)
        h, dh, _ = self._series(self._theta(U))
        return h[:, None] * U + dh[:, None] * perp(U)

    def curvature(self, U):
        h, _, d2h = self._series(self._theta(U))
        return h + d2h

    def hessian(self, U):
        U = np.asarray(U, dtype=float)
        t = perp(U)
        return self.curvature(U)[:, None, None] * t[:, :, None] * t[:, None, :]

    def local(self, U):
        U = np.asarray(U, dtype=float)
        h, dh, d2h = self._series(self._theta(U))
        return h, h[:, None] * U + dh[:, None] * perp(U), h + d2h

    @cached_property
    def convexity_margin(self):
        theta = 2 * np.pi * np.arange(4096) / 4096
        h, _, d2h = self._series(theta)
        return float(np.min(h + d2h))

    @cached_property
    def min_support(self):
        theta = 2 * np.pi * np.arange(4096) / 4096
        return float(np.min(self._series(theta)[0]))

    def to_doc(self):
        return {"type": "fourier2d", "c0": self.c0, "cos": self.a.tolist(), "sin": self.b.tolist()}


def _monomial_exponents(max_degree=4):
    out = []
    for d in range(2, max_degree + 1, 2):
        for a in range(d + 1):
            for b in range(d + 1 - a):
                out.append((a, b, d - a - b))
    return out


class PerturbedBall3D(ConvexBody):
    """h(u) = 1 + eps * p(u) on S^2 with p an even polynomial of degree <= 4.

    ``poly`` is a list of ``[coef, a, b, c]`` terms for ``coef x^a y^b z^c``
    with ``a + b + c`` even and at most 4.  The curvature function uses a
    finite-difference Hessian of the homogeneous extension
    H(x) = |x| + eps * sum coef * m(x) |x|^(1-d).
    """

    n = 3

    def __init__(self, eps, poly, validate=True):
        self.eps = float(eps)
        terms = []
        for term in poly:
            coef, a, b, c = term
            a, b, c = int(a), int(b), int(c)
            if min(a, b, c) < 0 or (a + b + c) % 2 or a + b + c > 4:
                raise ValidationError(f"monomial exponents {(a, b, c)} must be even total degree <= 4")
            terms.append((float(coef), a, b, c))
        self.terms = tuple(terms)
        self._coef = np.array([t[0] for t in terms])
        self._exp = np.array([t[1:] for t in terms], dtype=int).reshape(-1, 3)
        self._deg = self._exp.sum(axis=1)
        # memoized finite-difference Hessians; values never depend on the cache
        self._memo = OrderedDict()
        self._lock = threading.Lock()
        if validate:
            self.validate()

    def _powers(self, X):
        # (M, 3, 5): X[:, j] ** k for k = 0..4, by repeated multiplication
        P = np.empty(X.shape + (5,))
        P[..., 0] = 1.0
        for k in range(1, 5):
            P[..., k] = P[..., k - 1] * X
        return P

    def _monomials(self, X, P=None):
        # (M, T) values of each monomial
        P = self._powers(X) if P is None else P
        a, b, c = self._exp.T
        return P[:, 0, a] * P[:, 1, b] * P[:, 2, c]

    def poly_values(self, U):
        return self._monomials(np.asarray(U, dtype=float)) @ self._coef

    def extension(self, X):
        """The 1-homogeneous extension H evaluated at arbitrary points of R^3."""
        X = np.asarray(X, dtype=float)
        r = np.linalg.norm(X, axis=1)
        m = self._monomials(X)
        return r + self.eps * (m * r[:, None] ** (1 - self._deg)[None, :]) @ self._coef

    def support(self, U):
        return 1.0 + self.eps * self.poly_values(U)

    def gradient(self, U):
        U = np.asarray(U, dtype=float)
        P = self._powers(U)
        m = self._monomials(U, P)
        idx = [P[:, j, self._exp[:, j]] for j in range(3)]
        grad = np.zeros_like(U)
        for j in range(3):
            e = self._exp[:, j]
            dm = e[None, :] * P[:, j, np.maximum(e - 1, 0)]
            for l in range(3):
                if l != j:
                    dm = dm * idx[l]
            grad[:, j] = dm @ self._coef
        radial = (m * (1 - self._deg)[None, :]) @ self._coef
        return U + self.eps * (grad + radial[:, None] * U)

    def hessian(self, U):
        U = np.ascontiguousarray(U, dtype=float)
        key = (U.shape, U.tobytes())
        with self._lock:
            hit = self._memo.get(key)
            if hit is not None:
                self._memo.move_to_end(key)
                return hit
        out = fd_hessian(self.extension, U)
        out.setflags(write=False)
        with self._lock:
            self._memo[key] = out
            while len(self._memo) > 8:
                self._memo.popitem(last=False)
        return out

    def to_doc(self):
        return {"type": "perturbed-ball3d", "eps": self.eps, "poly": [list(t) for t in self.terms]}


class Translate(ConvexBody):
    """``K + c``: h(u) + <c, u>; the curvature function is unchanged."""

    def __init__(self, body, by, validate=True):
        by = np.array(by, dtype=float)
        if isinstance(body, Translate):
            by = by + body.by
            body = body.body
        if by.shape != (body.n,):
            raise DimensionError(f"translation {by.tolist()} does not match dimension {body.n}")
        by.setflags(write=False)
        self.body, self.by, self.n = body, by, body.n
        if validate and not self.min_support > 0:
            raise NotC2PlusError(f"translation by {by.tolist()} moves the origin out of the body")

    def support(self, U):
        return self.body.support(U) + np.asarray(U) @ self.by

    def gradient(self, U):
        return self.body.gradient(U) + self.by

    def hessian(self, U):
        return self.body.hessian(U)

    def curvature(self, U):
        return self.body.curvature(U)

    def evaluate(self, U):
        h, f = self.body.evaluate(U)
        return h + np.asarray(U) @ self.by, f

    def local(self, U):
        h, x, f = self.body.local(U)
        return h + np.asarray(U) @ self.by, x + self.by, f

    @property
    def convexity_margin(self):
        return self.body.convexity_margin

    def to_doc(self):
        return {"type": "translate", "body": self.body.to_doc(), "by": self.by.tolist()}


class LinearImage(ConvexBody):
    """``T K`` for a general body ``K``: h_{TK}(u) = h_K(T^T u)."""

    def __init__(self, body, T):
        T = LinearMap.coerce(T)
        if T.n != body.n:
            raise DimensionError(f"map of dimension {T.n} applied to body of dimension {body.n}")
        self.body, self.map, self.n = body, T, body.n

    def _pull(self, U):
        W = np.asarray(U, dtype=float) @ self.map.matrix
        r = np.linalg.norm(W, axis=1)
        return W / r[:, None], r

    def support(self, U):
        W, r = self._pull(U)
        return r * self.body.support(W)

    def gradient(self, U):
        W, _ = self._pull(U)
        return self.body.gradient(W) @ self.map.matrix.T

    def hessian(self, U):
        W, r = self._pull(U)
        T = self.map.matrix
        return np.einsum("ij,mjk,lk->mil", T, self.body.hessian(W), T) / r[:, None, None]

    def curvature(self, U):
        W, r = self._pull(U)
        return self.body.curvature(W) * self.map.det ** 2 * r ** (-(self.n + 1))

    def evaluate(self, U):
        W, r = self._pull(U)
        h, f = self.body.evaluate(W)
        return r * h, f * self.map.det ** 2 * r ** (-(self.n + 1))

    def local(self, U):
        W, r = self._pull(U)
        h, x, f = self.body.local(W)
        return r * h, x @ self.map.matrix.T, f * self.map.det ** 2 * r ** (-(self.n + 1))

    @cached_property
    def convexity_margin(self):
        U = _validation_nodes(self.n)
        return float(np.min(tangent_eigenvalues(self.hessian(U), U)))

    def to_doc(self):
        return {"type": "linear-image", "matrix": self.map.matrix.tolist(), "body": self.body.to_doc()}


# --------------------------------------------------------------------------
# polar bodies


def _solve_polar_2d(body, U, tol=1e-13, max_iter=80):
    """Maximize g(t) = log cos(t - theta) - log h(t) for each direction.

    Returns the maximal value of <u, v>/h(v) and the maximizer v.
    """
    theta = np.arctan2(U[:, 1], U[:, 0])
    M = len(theta)
    offsets = np.linspace(-np.pi / 2, np.pi / 2, 65)[1:-1]
    cand = theta[:, None] + offsets[None, :]
    hc = body.support(angles_to_units(cand.reshape(-1))).reshape(M, -1)
    j = np.argmax(np.cos(offsets)[None, :] / hc, axis=1)
    lo = theta + np.where(j > 0, offsets[np.maximum(j - 1, 0)], -np.pi / 2 + 1e-12)
    hi = theta + np.where(j < len(offsets) - 1, offsets[np.minimum(j + 1, len(offsets) - 1)],
                          np.pi / 2 - 1e-12)
    t = cand[np.arange(M), j]
    done = np.zeros(M, dtype=bool)
    for _ in range(max_iter):
        V = angles_to_units(t)
        h, x, f = body.local(V)
        dh = np.sum(x * perp(V), axis=1)
        d2h = f - h
        s = t - theta
        g1 = -np.tan(s) - dh / h
        g2 = -1.0 / np.cos(s) ** 2 - (d2h * h - dh * dh) / (h * h)
        # g1 > 0 left of the maximizer
        lo = np.where(g1 > 0, np.maximum(lo, t), lo)
        hi = np.where(g1 < 0, np.minimum(hi, t), hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = -g1 / g2
        t_new = t + step
        bad = ~np.isfinite(t_new) | (g2 >= 0) | (t_new <= lo) | (t_new >= hi)
        t_new = np.where(bad, 0.5 * (lo + hi), t_new)
        moved = np.abs(t_new - t)
        t = np.where(done, t, t_new)
        done |= (moved < tol) | (hi - lo < tol)
        if done.all():
            break
    if not done.all():
        k = int(np.flatnonzero(~done)[0])
        raise ConvergenceError(
            f"polar maximization did not converge in direction u={U[k].tolist()}",
            data={"direction": U[k].tolist()})
    V = angles_to_units(t)
    value = np.sum(U * V, axis=1) / body.support(V)
    return value, V


def _solve_polar_3d(body, U, tol=1e-13, max_iter=100):
    """Find v with grad H_K(v) parallel to u by damped Newton on the sphere."""
    M = len(U)
    V = U.copy()

    def residual(V):
        return _residual(body, V, U)

    res, x = residual(V)
    active = res > tol
    for _ in range(max_iter):
        if not active.any():
            break
        idx = np.flatnonzero(active)
        Va, Ua, xa = V[idx], U[idx], x[idx]
        Hs = body.hessian(Va)
        A = np.zeros((len(idx), 4, 4))
        A[:, :3, :3] = Hs
        A[:, :3, 3] = -Ua
        A[:, 3, :3] = Va
        rhs = np.zeros((len(idx), 4))
        rhs[:, :3] = -xa
        sol = np.linalg.solve(A, rhs[:, :, None])[:, :, 0]
        dv = sol[:, :3]
        alpha = np.ones(len(idx))
        best_V = Va.copy()
        best_res = res[idx].copy()
        for _ in range(30):
            trial = Va + alpha[:, None] * dv
            trial /= np.linalg.norm(trial, axis=1)[:, None]
            r_trial, _ = _residual(body, trial, Ua)
            improve = r_trial < best_res
            best_V = np.where(improve[:, None], trial, best_V)
            best_res = np.where(improve, r_trial, best_res)
            if improve.all():
                break
            alpha = np.where(improve, alpha, 0.5 * alpha)
        V[idx] = best_V
        res, x = residual(V)
        active = res > tol
    if active.any():
        k = int(np.flatnonzero(active)[0])
        raise ConvergenceError(
            f"polar maximization did not converge in direction u={U[k].tolist()} "
            f"(residual {res[k]:.3e})", data={"direction": U[k].tolist()})
    value = np.sum(U * V, axis=1) / body.support(V)
    return value, V


def _residual(body, V, U):
    """Misalignment of the boundary point at v with the target normal u."""
    x = body.gradient(V)
    xn = x / np.linalg.norm(x, axis=1)[:, None]
    return np.linalg.norm(np.cross(xn, U), axis=1) + np.maximum(0.0, -np.sum(xn * U, axis=1)), x


def polar_solve(body, U):
    """Return ``(value, maximizer)`` of ``<u, v> / h_K(v)`` over unit ``v``.

    ``value`` is h_{K polar}(u), equivalently 1/rho_K(u).
    """
    U = np.asarray(U, dtype=float)
    if body.n == 2:
        return _solve_polar_2d(body, U)
    return _solve_polar_3d(body, U)


class NumericPolar(ConvexBody):
    """Polar of a body without a closed-form polar.

    h_{K polar}(u) = max_v <u, v>/h_K(v); the boundary point of the polar
    with normal u is v/h_K(v) for the maximizer v, and the curvature follows
    from h_K^{n+1}(v) f_K(v) h_{K polar}^{n+1}(u) f_{K polar}(u) = 1.
    Per-direction results are memoized; memoization never changes values.
    """

    _CACHE_SIZE = 16

    def __init__(self, body):
        self.body, self.n = body, body.n
        self._cache = OrderedDict()
        self._lock = threading.Lock()

    def _solve(self, U):
        U = np.ascontiguousarray(U, dtype=float)
        key = (U.shape, U.tobytes())
        with self._lock:
            hit = self._cache.get(key)
            if hit is not None:
                self._cache.move_to_end(key)
                return hit
        value, V = polar_solve(self.body, U)
        hK, fK = self.body.evaluate(V)
        out = (value, V, hK, fK)
        with self._lock:
            self._cache[key] = out
            while len(self._cache) > self._CACHE_SIZE:
                self._cache.popitem(last=False)
        return out

    def support(self, U):
        return self._solve(U)[0]

    def gradient(self, U):
        _, V, hK, _ = self._solve(U)
        return V / hK[:, None]

    def curvature(self, U):
        value, _, hK, fK = self._solve(U)
        m = self.n + 1
        return 1.0 / (value ** m * hK ** m * fK)

    def evaluate(self, U):
        value, _, hK, fK = self._solve(U)
        m = self.n + 1
        return value, 1.0 / (value ** m * hK ** m * fK)

    def local(self, U):
        value, V, hK, fK = self._solve(U)
        m = self.n + 1
        return value, V / hK[:, None], 1.0 / (value ** m * hK ** m * fK)

    def hessian(self, U):
        U = np.asarray(U, dtype=float)
        if self.n == 2:
            t = perp(U)
            return self.curvature(U)[:, None, None] * t[:, :, None] * t[:, None, :]
        return super().hessian(U)

    @property
    def convexity_margin(self):
        # the polar of a C2+ body with the origin inside is C2+
        U = _validation_nodes(self.n)
        if self.n == 2:
            return float(np.min(self.curvature(U)))
        return super().convexity_margin

    def to_doc(self):
        return {"type": "polar", "body": self.body.to_doc()}


# --------------------------------------------------------------------------
# operations


def support(K, u):
    """h_K at a unit vector (or rows of unit vectors)."""
    U = as_units(u, K.n)
    out = K.support(U)
    return float(out[0]) if np.ndim(u) == 1 else out


def curvature_function(K, u):
    """f_K at a unit vector (or rows); raises if not strictly positive."""
    U = as_units(u, K.n)
    out = K.curvature(U)
    bad = np.flatnonzero(~(out > 0))
    if bad.size:
        raise NotC2PlusError(f"body not C2+ at u={U[bad[0]].tolist()} (f={out[bad[0]]!r})")
    return float(out[0]) if np.ndim(u) == 1 else out


def boundary_point(K, u):
    """The point of the boundary with outer normal u (inverse Gauss map)."""
    U = as_units(u, K.n)
    out = K.gradient(U)
    return out[0] if np.ndim(u) == 1 else out


def linear_image(K, T):
    """Return T K, keeping closed forms where they exist."""
    T = LinearMap.coerce(T)
    if T.n != K.n:
        raise DimensionError(f"map of dimension {T.n} applied to body of dimension {K.n}")
    if isinstance(K, Ball):
        return LinearImageOfBall(K.radius * T.matrix)
    if isinstance(K, LinearImageOfBall):
        return LinearImageOfBall(T.matrix @ K.matrix)
    if isinstance(K, Translate):
        return Translate(linear_image(K.body, T), T.matrix @ K.by)
    return LinearImage(K, T)


def dilate(K, lam):
    """``lam * K``."""
    return linear_image(K, float(lam) * np.eye(K.n))


_POLARS = OrderedDict()
_POLARS_LOCK = threading.Lock()


def polar(K):
    """The polar body {y : <x, y> <= 1 for all x in K}.

    Numeric polars are shared per body object, so the dilates and linear
    images of one body reuse the same solved directions.
    """
    if isinstance(K, Ball):
        return Ball(K.n, 1.0 / K.radius)
    if isinstance(K, LinearImageOfBall):
        return LinearImageOfBall(K.map.inv_t)
    if isinstance(K, LinearImage):
        return linear_image(polar(K.body), K.map.inv_t)
    with _POLARS_LOCK:
        hit = _POLARS.get(id(K))
        # the entry keeps K alive, so its id cannot be reused while cached
        if hit is not None and hit[0] is K:
            _POLARS.move_to_end(id(K))
            return hit[1]
        P = NumericPolar(K)
        _POLARS[id(K)] = (K, P)
        while len(_POLARS) > 32:
            _POLARS.popitem(last=False)
        return P


def volume(K, rule):
    """|K| = (1/n) int h_K f_K d sigma."""
    _check_rule(K, rule)
    h, f = K.evaluate(rule.nodes)
    return integrate(rule, lambda _: h * f) / K.n


def polar_volume(K, rule):
    """|K polar| = (1/n) int h_K^{-n} d sigma (radial function of the polar is 1/h_K)."""
    _check_rule(K, rule)
    h = K.support(rule.nodes)
    return integrate(rule, lambda _: h ** (-K.n)) / K.n


def centroid(K, rule):
    """Centroid via the divergence theorem: (1/((n+1)|K|)) int x(u) h f d sigma."""
    _check_rule(K, rule)
    h, x, f = K.local(rule.nodes)
    vol = integrate(rule, lambda _: h * f) / K.n
    return np.array([integrate(rule, lambda _, i=i: x[:, i] * h * f)
                     for i in range(K.n)]) / ((K.n + 1) * vol)


def translate_to_centroid(K, rule):
    """Translate ``K`` so that its centroid is the origin."""
    return Translate(K, -centroid(K, rule))


def ball_of_same_volume(K, rule):
    """Origin-centred ball with the volume of ``K``."""
    return Ball(K.n, (volume(K, rule) / ball_volume(K.n)) ** (1.0 / K.n))


def _check_rule(K, rule):
    if rule.n != K.n:
        raise DimensionError(f"rule of dimension {rule.n} used with body of dimension {K.n}")


# --------------------------------------------------------------------------
# random bodies


def random_body(seed, n, delta_min=0.2, L=6, symmetric=False, max_attempts=1000):
    """Random C2+ body with smallest radius of curvature >= ``delta_min``.

    ``n = 2``: Fourier body with harmonics 2..L, rejection-sampled.
    ``n = 3``: perturbed ball with an even polynomial of degree <= 4
    (always origin-symmetric); ``eps`` is halved until the margin holds.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if not delta_min > 0:
        raise ValidationError(f"delta_min must be positive, got {delta_min}")
    if n == 2:
        if L < 2:
            raise ValidationError("L must be at least 2")
        k = np.arange(2, L + 1)
        keep = (k % 2 == 0) if symmetric else np.ones_like(k, dtype=bool)
        weight = np.where(keep, 1.0 / ((k * k - 1.0) * np.sqrt(k)), 0.0)
        for _ in range(max_attempts):
            a = rng.normal(size=k.size) * weight
            b = rng.normal(size=k.size) * weight
            total = np.sum((k * k - 1.0) * np.hypot(a, b))
            if total == 0:
                continue
            s = rng.uniform(0.1, 1.6) * (1.0 - delta_min) / total
            body = Fourier2D(1.0, a * s, b * s, validate=False)
            if body.convexity_margin >= delta_min and body.min_support > 0:
                return body
        raise ValidationError(
            f"could not draw a body with curvature margin {delta_min} in {max_attempts} attempts; "
            f"try a smaller L")
    if n == 3:
        exps = _monomial_exponents(4)
        coefs = rng.normal(size=len(exps))
        probe = PerturbedBall3D(1.0, [(c, *e) for c, e in zip(coefs, exps)], validate=False)
        peak = float(np.max(np.abs(probe.poly_values(_validation_nodes(3)))))
        coefs = coefs / peak
        eps = rng.uniform(0.05, 0.35)
        for _ in range(40):
            body = PerturbedBall3D(eps, [(c, *e) for c, e in zip(coefs, exps)], validate=False)
            if body.min_support > 0 and body.convexity_margin >= delta_min:
                return body
            eps *= 0.5
        raise ValidationError(f"could not reach curvature margin {delta_min}")
    raise DimensionError(f"dimension not supported: n={n} (supported: 2, 3)")


def random_linear_map(rng, n, unimodular=True, max_cond=8.0):
    """Random invertible map; ``unimodular`` rescales to |det| = 1."""
    for _ in range(1000):
        A = rng.normal(size=(n, n))
        if np.linalg.cond(A) > max_cond:
            continue
        if unimodular:
            A = A / abs(np.linalg.det(A)) ** (1.0 / n)
        return LinearMap(A)
    raise ValidationError("could not draw a well-conditioned map")


def random_rotation(rng, n):
    Q, R = np.linalg.qr(rng.normal(size=(n, n)))
    Q = Q * np.sign(np.diag(R))[None, :]
    if np.linalg.det(Q) < 0:
        Q[:, 0] = -Q[:, 0]
    return LinearMap(Q)


# --------------------------------------------------------------------------
# body description documents


def from_doc(doc, n=None):
    """Build a body from its JSON description."""
    if isinstance(doc, str):
        doc = json.loads(doc)
    if not isinstance(doc, dict) or "type" not in doc:
        raise ValidationError(f"body document must be an object with a 'type': {doc!r}")
    t = doc["type"]
    try:
        if t == "ball":
            dim = int(doc.get("dim", n or 0))
            if dim not in (2, 3):
                raise DimensionError(f"dimension not supported: n={dim} (supported: 2, 3)")
            return Ball(dim, float(doc.get("radius", 1.0)))
        if t == "linear-image":
            A = np.array(doc["matrix"], dtype=float)
            if "body" in doc:
                return linear_image(from_doc(doc["body"], A.shape[0]), A)
            return LinearImageOfBall(A)
        if t == "fourier2d":
            return Fourier2D(doc["c0"], doc.get("cos", []), doc.get("sin", []))
        if t == "perturbed-ball3d":
            return PerturbedBall3D(doc["eps"], doc["poly"])
        if t == "translate":
            return Translate(from_doc(doc["body"], n), doc["by"])
        if t == "polar":
            return polar(from_doc(doc["body"], n))
    except KeyError as exc:
        raise ValidationError(f"body document {doc!r} lacks field {exc}") from None
    raise ValidationError(f"unknown body type {t!r}")


def parse_descriptor(text, n=2):
    """Compact body descriptors: ``ball``, ``ellipse:a:b[:c]``, ``timg:a:b[:c]``
    (both the diagonal image diag(a, b, ...) B), ``polar:<descriptor>``, or a
    JSON document / ``@path`` to one."""
    text = text.strip()
    if text.startswith("@"):
        with open(text[1:]) as fh:
            return from_doc(json.load(fh), n)
    if text.startswith("{"):
        return from_doc(json.loads(text), n)
    if text.startswith("polar:"):
        return polar(parse_descriptor(text[6:], n))
    parts = text.split(":")
    if parts[0] == "ball" and len(parts) == 1:
        if n not in (2, 3):
            raise DimensionError(f"dimension not supported: n={n} (supported: 2, 3)")
        return Ball(n)
    if parts[0] in ("ellipse", "timg") and len(parts) >= 3:
        try:
            diag = [float(p) for p in parts[1:]]
        except ValueError:
            raise ValidationError(f"bad numeric field in body descriptor {text!r}") from None
        if len(diag) != n:
            raise DimensionError(f"descriptor {text!r} has {len(diag)} axes for dimension {n}")
        return LinearImageOfBall(np.diag(diag))
    raise ValidationError(f"unrecognized body descriptor {text!r}")


__all__ = [
    "Ball", "LinearMap", "LinearImageOfBall", "Fourier2D", "PerturbedBall3D", "Translate",
    "LinearImage", "NumericPolar", "support", "curvature_function", "boundary_point",
    "linear_image", "dilate", "polar", "volume", "polar_volume", "centroid",
    "translate_to_centroid", "ball_of_same_volume", "random_body", "random_linear_map",
    "random_rotation", "from_doc", "parse_descriptor", "fd_hessian", "polar_solve",
    "as_units", "angles_to_units",
]

