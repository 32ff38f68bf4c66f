"""Admissible weight functions: the concave class Conc(0,inf) and the convex
class Conv(0,inf).

A concave member is positive on (0, inf), concave, tends to 0 at 0 and is
o(t) at infinity, unless it is a positive constant.  A convex member is
positive, convex, blows up at 0 and tends to 0 at infinity, unless it is a
positive constant.  Asymptotic limits cannot be checked exactly, so
:func:`validate_class` uses finite probes (see :func:`_limit_probe`).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ClassValidationError, ValidationError

CONC = "conc"
CONV = "conv"

# probe grid and thresholds
_LOG_GRID = np.logspace(-8, 8, 161)
_MIDPOINT_TRIPLES = 64
_LIMIT_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class ScalarClassFn:
    """A member of Conc(0,inf) or Conv(0,inf).

    ``func`` is evaluated elementwise on numpy arrays.  ``degree`` is the
    homogeneity degree ``r`` when the member is ``c * t**r``, else ``None``.
    """

    kind: str
    func: object = field(repr=False)
    degree: float = None
    scale: float = None
    doc: dict = None

    def __call__(self, t):
        with np.errstate(over="ignore", divide="ignore"):
            return self.func(np.asarray(t, dtype=float))

    @property
    def at_one(self):
        return float(self(1.0))

    @property
    def value_at_zero(self):
        """Boundary convention: phi(0) = 0, psi(0) = inf (constants keep their value)."""
        if self.degree == 0:
            return self.at_one
        return 0.0 if self.kind == CONC else math.inf

    @property
    def homogeneous(self):
        return self.degree is not None

    def to_doc(self):
        return dict(self.doc)

    def __str__(self):
        return descriptor_string(self)


@dataclass
class Probe:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class ClassReport:
    kind: str
    probes: list

    @property
    def passed(self):
        return all(p.passed for p in self.probes)

    @property
    def failures(self):
        return [p for p in self.probes if not p.passed]


def _is_constant(fn):
    vals = fn(_LOG_GRID)
    return bool(np.all(np.isfinite(vals)) and np.ptp(vals) <= 1e-14 * abs(vals[0]))


def _aitken_limit(values):
    """Limit of a three-term sequence assuming geometric convergence."""
    a, b, c = (float(v) for v in values)
    d1, d2 = b - a, c - b
    if d1 == 0.0 or d2 == 0.0:
        return c
    rho = d2 / d1
    if not 0.0 < rho < 1.0:
        # not converging geometrically; report the last term as the limit
        return c
    return c + d2 * rho / (1.0 - rho)


def _limit_probe(name, seq, scale):
    """Probe that a sequence sampled at t = 1e-4, 1e-6, 1e-8 (or 1e4, 1e6,
    1e8) tends to zero.

    Power laws t**r converge geometrically on that grid, so Aitken
    extrapolation recovers the limit even when the raw value at the last
    point is still far from zero.  For degrees so small that the differences
    drown in rounding, equal decreasing steps of log(seq) are accepted.
    """
    seq = np.asarray(seq, dtype=float)
    if not np.all(np.isfinite(seq)):
        return Probe(name, False, f"non-finite samples {seq.tolist()}")
    limit = _aitken_limit(seq)
    ok = bool(abs(limit) <= _LIMIT_TOL * scale and seq[-1] <= seq[0] * (1 + 1e-12))
    if not ok and np.all(seq > 0):
        # power-law decay with a tiny exponent: equal steps in log space, which
        # Aitken cannot resolve in double precision
        d1, d2 = np.diff(np.log(seq))
        ok = bool(d1 < 0 and d2 < 0 and abs(d2 / d1 - 1.0) < 0.5)
    return Probe(name, ok, f"extrapolated limit {limit:.3e} from samples {seq.tolist()}")


def validate_class(fn, kind=None):
    """Run the class probes for ``fn`` and return a :class:`ClassReport`.

    Probes: positivity on a log grid, midpoint concavity (Conc) or convexity
    (Conv) on 64 log-spaced pairs, the two limit probes, and homogeneity for
    members declaring a degree.  Constant members skip the limit probes.
    """
    kind = kind or fn.kind
    probes = []
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        vals = fn(_LOG_GRID)
        pos = bool(np.all(vals > 0))
        probes.append(Probe("positivity", pos, "" if pos else
                            f"non-positive value at t={_LOG_GRID[np.argmin(vals)]:.3e}"))

        a = np.logspace(-6, 6, _MIDPOINT_TRIPLES)
        b = a * np.logspace(0.3, 2.0, _MIDPOINT_TRIPLES)
        mid = 0.5 * (a + b)
        fa, fb, fm = fn(a), fn(b), fn(mid)
        chord = 0.5 * (fa + fb)
        slack = fm - chord if kind == CONC else chord - fm
        tol = 1e-12 * np.maximum(np.abs(fm), np.abs(chord))
        # overflow near 0 is legitimate for convex members; those pairs are skipped
        finite = np.isfinite(fa) & np.isfinite(fb) & np.isfinite(fm)
        bad = np.flatnonzero(finite & ~(slack >= -tol))
        label = "concavity" if kind == CONC else "convexity"
        if finite.sum() < _MIDPOINT_TRIPLES // 2:
            probes.append(Probe(label, False, f"only {int(finite.sum())} finite probe pairs"))
        elif bad.size:
            k = bad[0]
            probes.append(Probe(label, False,
                                f"{label} probe failed at t-triple ({a[k]:.6g}, {mid[k]:.6g}, {b[k]:.6g})"))
        else:
            probes.append(Probe(label, True))

        constant = _is_constant(fn)
        scale = abs(float(fn(1.0))) or 1.0
        small = np.array([1e-4, 1e-6, 1e-8])
        large = np.array([1e4, 1e6, 1e8])
        if constant:
            probes.append(Probe("limit at 0", True, "constant member"))
            probes.append(Probe("limit at inf", True, "constant member"))
        elif kind == CONC:
            probes.append(_limit_probe("limit at 0", fn(small), scale))
            probes.append(_limit_probe("limit at inf", fn(large) / large, scale))
        else:
            probes.append(_limit_probe("limit at 0", 1.0 / fn(small), 1.0 / scale))
            probes.append(_limit_probe("limit at inf", fn(large), scale))

    if fn.degree is not None:
        lam = np.array([0.25, 3.0, 9.0, 1e3])[:, None]
        t = np.array([1e-3, 0.5, 1.0, 7.0, 1e2])[None, :]
        lhs = fn(lam * t)
        rhs = lam ** fn.degree * fn(t)
        err = float(np.max(np.abs(lhs - rhs) / np.abs(rhs)))
        probes.append(Probe("homogeneity", err <= 1e-12, f"max relative error {err:.2e}"))
    return ClassReport(kind, probes)


def _checked(fn):
    report = validate_class(fn)
    if not report.passed:
        first = report.failures[0]
        raise ClassValidationError(
            f"{fn.kind} member {descriptor_string(fn)} rejected: {first.name}: {first.detail}",
            report,
        )
    return fn


def power_conc(c, r):
    """``phi(t) = c * t**r`` with ``c > 0`` and ``0 <= r < 1``."""
    c, r = float(c), float(r)
    if not c > 0:
        raise ValidationError(f"scale must be positive, got {c}")
    if not 0.0 <= r < 1.0:
        raise ValidationError(f"concave power degree must lie in [0, 1), got {r}")
    doc = {"type": "power-conc", "c": c, "r": r}
    return _checked(ScalarClassFn(CONC, lambda t: c * t ** r, degree=r, scale=c, doc=doc))


def power_conv(c, r):
    """``psi(t) = c * t**r`` with ``c > 0`` and ``r <= 0``."""
    c, r = float(c), float(r)
    if not c > 0:
        raise ValidationError(f"scale must be positive, got {c}")
    if not r <= 0.0:
        raise ValidationError(f"convex power degree must be <= 0, got {r}")
    doc = {"type": "power-conv", "c": c, "r": r}
    return _checked(ScalarClassFn(CONV, lambda t: c * t ** r, degree=r, scale=c, doc=doc))


def lp_degree(p, n):
    """Degree ``p/(n+p)`` of the power member matching L_p for ``p > -n``."""
    return p / (n + p)


def lp_star_degree(p, n):
    """Degree ``n/(n+p)`` of the convex power member matching L_p for ``p < -n``."""
    return n / (n + p)


_NAMED = {
    "log1p": (CONC, np.log1p),
    "bounded-ratio": (CONC, lambda t: t / (1.0 + t)),
    "exp-conv": (CONV, lambda t: np.expm1(1.0 / t)),
}


def named_nonhomogeneous(name):
    """Named non-homogeneous members: ``log1p``, ``bounded-ratio``, ``exp-conv``."""
    try:
        kind, func = _NAMED[name]
    except KeyError:
        raise ValidationError(f"unknown function name {name!r}; known: {sorted(_NAMED)}") from None
    return _checked(ScalarClassFn(kind, func, doc={"type": "named", "name": name}))


def candidate(kind, func, label="candidate"):
    """Wrap an arbitrary callable without validation (for probing)."""
    return ScalarClassFn(kind, func, doc={"type": "candidate", "name": label})


def from_doc(doc):
    """Build a member from its JSON description."""
    if not isinstance(doc, dict) or "type" not in doc:
        raise ValidationError(f"function document must be an object with a 'type': {doc!r}")
    t = doc["type"]
    try:
        if t == "power-conc":
            return power_conc(doc["c"], doc["r"])
        if t == "power-conv":
            return power_conv(doc["c"], doc["r"])
        if t == "named":
            return named_nonhomogeneous(doc["name"])
        if t == "scaled":
            return scaled(from_doc(doc["of"]), doc["factor"])
    except KeyError as exc:
        raise ValidationError(f"function document {doc!r} lacks field {exc}") from None
    raise ValidationError(f"unknown function type {t!r}")


def parse_descriptor(text):
    """Parse the compact form ``pc:c:r``, ``pv:c:r`` or a named member."""
    text = text.strip()
    parts = text.split(":")
    try:
        if parts[0] == "pc" and len(parts) == 3:
            return power_conc(float(parts[1]), float(parts[2]))
        if parts[0] == "pv" and len(parts) == 3:
            return power_conv(float(parts[1]), float(parts[2]))
    except ValueError as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"bad numeric field in function descriptor {text!r}") from None
    if len(parts) == 1:
        return named_nonhomogeneous(text)
    raise ValidationError(f"unrecognized function descriptor {text!r}")


def descriptor_string(fn):
    d = fn.doc or {}
    if d.get("type") == "power-conc":
        return f"pc:{d['c']!r}:{d['r']!r}"
    if d.get("type") == "power-conv":
        return f"pv:{d['c']!r}:{d['r']!r}"
    return str(d.get("name", "?"))


def scaled(fn, lam):
    """``lam * fn``; stays in the same class (used for equality configurations)."""
    lam = float(lam)
    if not lam > 0:
        raise ValidationError("scale factor must be positive")
    d = fn.doc or {}
    if d.get("type") == "power-conc":
        return power_conc(d["c"] * lam, d["r"])
    if d.get("type") == "power-conv":
        return power_conv(d["c"] * lam, d["r"])
    base = fn.func
    doc = {"type": "scaled", "factor": lam, "of": dict(d)}
    return _checked(ScalarClassFn(fn.kind, lambda t: lam * base(t), degree=fn.degree,
                                  scale=None if fn.scale is None else fn.scale * lam, doc=doc))


def proportional(f, g, grid=None, rtol=1e-12):
    """True when ``f = lam * g`` on a log grid for some ``lam > 0``."""
    grid = _LOG_GRID[40:121] if grid is None else grid
    with np.errstate(all="ignore"):
        ratio = f(grid) / g(grid)
    if not np.all(np.isfinite(ratio)):
        return False
    return bool(np.ptp(ratio) <= rtol * abs(ratio[0]))
