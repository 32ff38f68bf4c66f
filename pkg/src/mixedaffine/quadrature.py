"""Deterministic quadrature rules on the circle and the 2-sphere.

``n = 2`` uses the uniform (trapezoid) rule on S^1, which is spectrally
accurate for smooth periodic integrands.  ``n = 3`` uses a product rule:
Gauss-Legendre in the cosine of the polar angle times a uniform rule in
azimuth.  Sums are evaluated with :func:`math.fsum`, so the result of
:func:`integrate` depends only on the rule and the node values, never on
evaluation order or chunking.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, NonFiniteError, ValidationError

SUPPORTED_DIMENSIONS = (2, 3)

#: Default resolutions: 512 points on S^1, 96 x 192 on S^2.
DEFAULT_RESOLUTION = {2: 512, 3: 96}


def sphere_measure(n):
    """Total surface measure of S^{n-1}."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


def ball_volume(n):
    """Volume of the Euclidean unit ball B^n_2."""
    return math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0)


@dataclass(frozen=True, eq=False)
class SphereRule:
    """Nodes and positive weights on S^{n-1}.

    Attributes
    ----------
    n : int
        Ambient dimension.
    nodes : ndarray, shape (M, n)
        Unit vectors.
    weights : ndarray, shape (M,)
        Positive weights summing to |S^{n-1}|.
    resolution : int
        The resolution parameter ``N`` the rule was built from.
    tolerance : float
        Truncation tolerance claimed for entire integrands of moderate
        variation; used as the noise floor of equality checks.
    """

    n: int
    nodes: np.ndarray
    weights: np.ndarray
    resolution: int
    tolerance: float = field(default=1e-12)

    def __post_init__(self):
        self.nodes.setflags(write=False)
        self.weights.setflags(write=False)

    @property
    def size(self):
        return len(self.weights)

    def describe(self):
        return {"n": self.n, "N": self.resolution, "nodes": self.size}


def build_rule(n, N=None):
    """Build the quadrature rule of dimension ``n`` and resolution ``N``.

    For ``n = 2`` the rule has ``N`` equally spaced angles with weight
    ``2*pi/N``.  For ``n = 3`` it has ``N`` Gauss-Legendre nodes in
    ``cos(polar angle)`` and ``2N`` azimuthal angles.
    """
    if n not in SUPPORTED_DIMENSIONS:
        raise DimensionError(f"dimension not supported: n={n} (supported: 2, 3)")
    if N is None:
        N = DEFAULT_RESOLUTION[n]
    N = int(N)
    if n == 2:
        if N < 4:
            raise ValidationError(f"resolution N={N} too small for the circle rule")
        theta = 2.0 * np.pi * np.arange(N) / N
        nodes = np.column_stack([np.cos(theta), np.sin(theta)])
        weights = np.full(N, 2.0 * np.pi / N)
        return SphereRule(2, nodes, weights, N, tolerance=1e-12)

    if N < 8:
        raise ValidationError(f"resolution N={N} too small for the sphere rule (need N >= 8)")
    x, wx = np.polynomial.legendre.leggauss(N)
    n_az = 2 * N
    phi = 2.0 * np.pi * np.arange(n_az) / n_az
    sin_polar = np.sqrt(1.0 - x * x)
    nodes = np.empty((N, n_az, 3))
    nodes[..., 0] = sin_polar[:, None] * np.cos(phi)[None, :]
    nodes[..., 1] = sin_polar[:, None] * np.sin(phi)[None, :]
    nodes[..., 2] = x[:, None]
    nodes = nodes.reshape(-1, 3)
    # renormalize away the last ulp so every node is unit to 1e-15
    nodes /= np.linalg.norm(nodes, axis=1)[:, None]
    weights = np.repeat(wx * (2.0 * np.pi / n_az), n_az)
    return SphereRule(3, nodes, weights, N, tolerance=1e-10)


def _evaluate(g, nodes, workers):
    if not workers or workers <= 1:
        return np.asarray(g(nodes), dtype=float)
    chunks = np.array_split(nodes, workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(lambda c: np.asarray(g(c), dtype=float), chunks))
    return np.concatenate(parts)


def integrate(rule, g, workers=None):
    """Return ``sum_i w_i g(u_i)``.

    ``g`` must accept an ``(M, n)`` array of unit vectors and return ``M``
    values.  With ``workers > 1`` the nodes are split into chunks evaluated
    concurrently; ``g`` must then be free of side effects.  The reduction is
    an exactly rounded sum, so the result does not depend on ``workers``.
    """
    values = _evaluate(g, rule.nodes, workers)
    if values.shape != (rule.size,):
        values = np.broadcast_to(values, (rule.size,))
    bad = ~np.isfinite(values)
    if bad.any():
        k = int(np.flatnonzero(bad)[0])
        raise NonFiniteError(
            f"integrand is not finite at node {k} u={rule.nodes[k].tolist()} "
            f"(value {values[k]!r})",
            data={"node": k, "u": rule.nodes[k].tolist()},
        )
    return math.fsum((rule.weights * values).tolist())


def integrate_values(rule, values):
    """Integrate precomputed node values with the same checks as :func:`integrate`."""
    return integrate(rule, lambda _: values)
