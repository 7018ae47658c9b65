"""Simplex-constrained minimum-norm weight solvers over objective gradients.

Gradients for m objectives are handled as an (m, d) array, one row per
objective. Every solver works on the (m, m) Gram matrix alone, so cost is
independent of the parameter dimension d.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import NumericalError

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 1000


@dataclass(frozen=True)
class SimplexWeights:
    """Simplex weights alpha with the attained squared direction norm."""

    alpha: np.ndarray
    norm_sq: float

    def __post_init__(self):
        a = np.asarray(self.alpha, dtype=float)
        if a.ndim != 1 or a.size < 1:
            raise ValueError("alpha must be a 1-D vector")
        if abs(a.sum() - 1.0) > 1e-9 or a.min() < 0.0:
            raise ValueError(f"alpha must lie on the simplex, got {a!r}")
        if self.norm_sq < 0.0:
            raise ValueError("norm_sq must be non-negative")
        object.__setattr__(self, "alpha", a)


def gram(grads):
    """Gram matrix G[i, j] = <g_i, g_j> of gradient rows.

    Each unordered pair is computed once and mirrored, so the result is
    exactly symmetric.
    """
    g = np.asarray(grads, dtype=float)
    if g.ndim != 2 or g.shape[0] < 1:
        raise ValueError(f"expected an (m, d) gradient array, got shape {g.shape}")
    if not np.isfinite(g).all():
        raise ValueError("gradients contain non-finite entries")
    m = g.shape[0]
    G = np.empty((m, m))
    for i in range(m):
        for j in range(i, m):
            v = float(g[i] @ g[j])
            G[i, j] = v
            G[j, i] = v
    return G


def min_norm_two(G):
    """Closed-form min-norm weights for exactly two objectives.

    alpha = (a, 1-a) with a = clamp((G22 - G12) / (G11 - 2 G12 + G22), 0, 1);
    identical gradients (denominator ~ 0) return the uniform point.
    """
    G = np.asarray(G, dtype=float)
    if G.shape != (2, 2):
        raise ValueError(f"min_norm_two requires a 2x2 Gram matrix, got {G.shape}")
    denom = G[0, 0] - 2.0 * G[0, 1] + G[1, 1]
    if denom <= 1e-18:
        a = 0.5
    else:
        a = float(np.clip((G[1, 1] - G[0, 1]) / denom, 0.0, 1.0))
    norm_sq = a * a * G[0, 0] + 2.0 * a * (1.0 - a) * G[0, 1] + (1.0 - a) ** 2 * G[1, 1]
    return SimplexWeights(np.array([a, 1.0 - a]), max(float(norm_sq), 0.0))


def min_norm_simplex(G, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
    """Min-norm weights over the simplex for m >= 2 objectives.

    Frank-Wolfe (pairwise variant) on the Gram matrix: each step picks the
    vertex minimizing (G alpha)_j and takes a closed-form line-search step,
    shifting mass off the worst active vertex; stops when the duality-gap
    estimate drops to tol or the iteration budget runs out.
    """
    G = np.asarray(G, dtype=float)
    if G.ndim != 2 or G.shape[0] != G.shape[1] or G.shape[0] < 2:
        raise ValueError(f"expected a square Gram matrix with m >= 2, got {G.shape}")
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    if not np.isfinite(G).all():
        raise ValueError("Gram matrix contains non-finite entries")
    alpha, norm_sq, _gap = kernels.fw_min_norm(
        np.ascontiguousarray(G), float(tol), int(max_iter)
    )
    if norm_sq < -tol:
        raise NumericalError(
            f"min-norm value {norm_sq} < -tol; Gram matrix is not PSD"
        )
    return SimplexWeights(alpha, max(float(norm_sq), 0.0))


def is_pareto_stationary(weights, eps):
    """KKT certificate: the min-norm convex combination has norm_sq <= eps."""
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    return weights.norm_sq <= eps
