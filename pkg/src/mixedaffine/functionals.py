"""General mixed affine surface areas and their special cases.

All four families share one shape.  Each (function, body) pair contributes a
positive term at every direction u:

* ``phi`` / ``psi``:            fn(1 / (f h^(n+1))) * h * f
* ``phi_star`` / ``psi_star``:  fn(f h^(n+1)) / h^n

and a functional integrates a weighted geometric mean of such terms over the
sphere.  The mixed functional uses weights 1/n, the i-th mixed functional
uses (n-i)/n and i/n, and the diagonal functional a single term.
"""

import threading
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, NonFiniteError, ValidationError
from .quadrature import ball_volume, integrate
from .scalar import CONC, CONV, power_conc, power_conv

PHI, PSI, PHI_STAR, PSI_STAR = "phi", "psi", "phi_star", "psi_star"
VARIANTS = (PHI, PSI, PHI_STAR, PSI_STAR)
_KIND = {PHI: CONC, PHI_STAR: CONC, PSI: CONV, PSI_STAR: CONV}


def normalize_variant(variant):
    v = str(variant).replace("-", "_")
    if v not in VARIANTS:
        raise ValidationError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    return v


def is_star(variant):
    return variant in (PHI_STAR, PSI_STAR)


def check_kind(variant, fn):
    if fn.kind != _KIND[variant]:
        raise ValidationError(
            f"variant {variant} needs a {_KIND[variant]} function, got a {fn.kind} member")


@dataclass(frozen=True)
class FunctionalSpec:
    """Argument list of a mixed functional: ``n`` pairs (or one for the diagonal form)."""

    variant: str
    pairs: tuple

    def __post_init__(self):
        object.__setattr__(self, "variant", normalize_variant(self.variant))
        object.__setattr__(self, "pairs", tuple(tuple(p) for p in self.pairs))
        if not self.pairs:
            raise ValidationError("a functional needs at least one (function, body) pair")
        dims = {K.n for _, K in self.pairs}
        if len(dims) != 1:
            raise DimensionError(f"bodies of mixed dimensions {sorted(dims)}")
        for fn, _ in self.pairs:
            check_kind(self.variant, fn)
        if len(self.pairs) not in (1, self.n):
            raise ValidationError(
                f"mixed form needs {self.n} pairs in dimension {self.n}, got {len(self.pairs)}")

    @property
    def n(self):
        return self.pairs[0][1].n


class _TermCache:
    """Bounded LRU of term arrays keyed by object identity.

    Entries hold references to their keys' objects, so an id cannot be
    recycled while its entry is alive.  Cached arrays are read-only.
    """

    def __init__(self, size=256):
        self.size = size
        self._data = OrderedDict()
        self._lock = threading.Lock()

    def get(self, variant, fn, K, rule):
        key = (variant, id(fn), id(K), id(rule))
        with self._lock:
            hit = self._data.get(key)
            if hit is not None:
                self._data.move_to_end(key)
                return hit[0]
        vals = _compute_terms(variant, fn, K, rule)
        vals.setflags(write=False)
        with self._lock:
            self._data[key] = (vals, fn, K, rule)
            while len(self._data) > self.size:
                self._data.popitem(last=False)
        return vals

    def clear(self):
        with self._lock:
            self._data.clear()


_CACHE = _TermCache()


def term_values(variant, fn, K, rule):
    """The per-node term of one (function, body) pair (memoized)."""
    return _CACHE.get(normalize_variant(variant), fn, K, rule)


def _compute_terms(variant, fn, K, rule):
    n = K.n
    h, f = K.evaluate(rule.nodes)
    with np.errstate(all="ignore"):
        if is_star(variant):
            out = fn(f * h ** (n + 1)) / h ** n
        else:
            out = fn(1.0 / (f * h ** (n + 1))) * h * f
    return np.asarray(out, dtype=float)


def weighted_functional(variant, terms, rule):
    """Integrate prod_i term_i ** w_i for ``terms`` = [(fn, body, w), ...].

    Term arrays are memoized per (variant, fn, body, rule) object.
    """
    variant = normalize_variant(variant)
    logs = np.zeros(rule.size)
    for fn, K, w in terms:
        if K.n != rule.n:
            raise DimensionError(f"rule of dimension {rule.n} used with body of dimension {K.n}")
        check_kind(variant, fn)
        vals = term_values(variant, fn, K, rule)
        bad = ~(vals > 0) | ~np.isfinite(vals)
        if bad.any():
            k = int(np.flatnonzero(bad)[0])
            raise NonFiniteError(
                f"{variant} term is not a positive finite number at node {k} "
                f"u={rule.nodes[k].tolist()} (value {vals[k]!r})",
                data={"node": k, "u": rule.nodes[k].tolist()})
        if w != 0:
            logs = logs + w * np.log(vals)
    return integrate(rule, lambda _: np.exp(logs))


def general_mixed_asa(spec, rule):
    """as(fn_1, K_1; ...; fn_n, K_n) for the variant of ``spec``."""
    if len(spec.pairs) != spec.n:
        raise ValidationError(f"mixed form needs {spec.n} pairs, got {len(spec.pairs)}")
    w = 1.0 / spec.n
    return weighted_functional(spec.variant, [(fn, K, w) for fn, K in spec.pairs], rule)


def mixed(variant, fns, bodies, rule):
    """Convenience form of :func:`general_mixed_asa`."""
    return general_mixed_asa(FunctionalSpec(variant, list(zip(fns, bodies))), rule)


def diagonal_asa(fn, K, variant, rule):
    """as_fn(K): the mixed functional with all pairs equal to (fn, K)."""
    return weighted_functional(variant, [(fn, K, 1.0)], rule)


def ith_mixed_asa(variant, i, fn1, K, fn2, L, rule):
    """as_i(fn1, K; fn2, L) for any real ``i``."""
    if K.n != L.n:
        raise DimensionError(f"bodies of dimensions {K.n} and {L.n}")
    n = K.n
    return weighted_functional(variant, [(fn1, K, (n - i) / n), (fn2, L, i / n)], rule)


def lp_regime(p, n):
    """Map an L_p exponent to the (variant, function) pair that realizes it."""
    if p == -n:
        raise ValidationError(f"excluded exponent p = -n = {-n}")
    if p >= 0:
        return PHI, power_conc(1.0, p / (n + p))
    if p > -n:
        return PSI, power_conv(1.0, p / (n + p))
    return PSI_STAR, power_conv(1.0, n / (n + p))


def lp_asa(p, K, rule):
    """as_p(K) = int (h^(1-p) f)^(n/(n+p)) d sigma, evaluated directly."""
    n = K.n
    p = float(p)
    if p == -n:
        raise ValidationError(f"excluded exponent p = -n = {-n}")
    h, f = K.evaluate(rule.nodes)
    return integrate(rule, lambda _: (h ** (1.0 - p) * f) ** (n / (n + p)))


def ball_reference(variant, fns, n):
    """[prod fn_i(1)]^(1/len) * n |B^n_2|: the value of every variant on the unit ball."""
    normalize_variant(variant)
    vals = np.array([fn.at_one for fn in fns], dtype=float)
    return float(np.exp(np.mean(np.log(vals)))) * n * ball_volume(n)


def affine_exponent(variant, degrees, weights=None):
    """Exponent e with F(TK_1, ...) = |det T|^e F(K_1, ...) for homogeneous members.

    ``weights`` default to 1/n each (the mixed form).
    """
    degrees = np.asarray(degrees, dtype=float)
    w = np.full(len(degrees), 1.0 / len(degrees)) if weights is None else np.asarray(weights)
    s = float(np.dot(w, degrees))
    total = float(np.sum(w))
    return 2 * s - total if is_star(normalize_variant(variant)) else total - 2 * s
