"""Preference vectors, objective-space partitioning, and constrained weights.

A preference is a unit vector in the plane spanned by the last two
objectives (the standard / clothes-changing pair in the 3-objective
layout). A set of n preferences partitions the objective space into
angular sub-regions; membership and the constrained weight solves below
only ever touch the reduced constraint values c_j = (p_j - p_k) . (L_sc,
L_cc), never d-dimensional vectors.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import NumericalError
from .minnorm import DEFAULT_TOL, SimplexWeights, min_norm_simplex

MIN_ANGLE_GAP = 1e-6


@dataclass(frozen=True)
class PreferenceVector:
    """Unit-norm preference direction with non-negative components."""

    sc: float
    cc: float

    def __post_init__(self):
        if self.sc < 0.0 or self.cc < 0.0:
            raise ValueError(f"preference components must be >= 0, got {self}")
        norm = math.hypot(self.sc, self.cc)
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"preference must have unit norm, got |p| = {norm}")

    @property
    def angle(self):
        return math.atan2(self.cc, self.sc)

    def as_array(self):
        return np.array([self.sc, self.cc])


@dataclass(frozen=True)
class PreferenceSet:
    """Ordered preferences plus the index of the human-selected one.

    chosen_k stays None until a preference is selected; operations that
    need the selection raise until then.
    """

    vectors: tuple
    chosen_k: int | None = None

    def __post_init__(self):
        vecs = tuple(self.vectors)
        if len(vecs) < 2:
            raise ValueError("a preference set needs at least two vectors")
        angles = [v.angle for v in vecs]
        for i in range(1, len(angles)):
            if angles[i] - angles[i - 1] < MIN_ANGLE_GAP:
                raise ValueError(
                    "preference vectors must be distinct and sorted by angle"
                )
        if self.chosen_k is not None and not 0 <= self.chosen_k < len(vecs):
            raise ValueError(f"chosen_k {self.chosen_k} out of range")
        object.__setattr__(self, "vectors", vecs)

    def __len__(self):
        return len(self.vectors)

    def with_chosen(self, k):
        return replace(self, chosen_k=k)

    def require_chosen(self):
        if self.chosen_k is None:
            raise ValueError("no preference selected (chosen_k is unset)")
        return self.chosen_k

    def matrix(self):
        """(n, 2) array of the preference components."""
        return np.array([[v.sc, v.cc] for v in self.vectors])


def make_uniform_preferences(n):
    """n preferences evenly spaced in angle across the positive quadrant."""
    if n < 2:
        raise ValueError("need at least two preference vectors")
    angles = [j * (math.pi / 2.0) / (n - 1) for j in range(n)]
    return PreferenceSet(
        tuple(PreferenceVector(math.cos(a), math.sin(a)) for a in angles)
    )


def _sc_cc(losses):
    L = np.asarray(losses, dtype=float)
    if L.ndim != 1 or L.size < 2:
        raise ValueError("losses must be a vector with at least two objectives")
    if not np.isfinite(L).all():
        raise ValueError("losses contain non-finite entries")
    return L[-2:]


def constraint_values(prefs, losses):
    """Sub-region constraint values c_j = (p_j - p_k) . (L_sc, L_cc).

    c[chosen_k] is exactly zero. Membership in the chosen sub-region means
    every c_j <= 0.
    """
    k = prefs.require_chosen()
    P = prefs.matrix()
    return (P - P[k]) @ _sc_cc(losses)


def in_subregion(c, tol):
    if tol < 0.0:
        raise ValueError("tol must be >= 0")
    return float(np.max(c)) <= tol


def constraint_gradient_coefficients(prefs, j, m=3):
    """Coefficients expressing grad C_j as a combination of objective gradients.

    Returns w with grad C_j = sum_i w[i] grad L_i: zeros except for the last
    two components, which hold p_j - p_k.
    """
    k = prefs.require_chosen()
    if not 0 <= j < len(prefs):
        raise ValueError(f"constraint index {j} out of range")
    if m < 2:
        raise ValueError("need at least two objectives")
    P = prefs.matrix()
    w = np.zeros(m)
    w[-2:] = P[j] - P[k]
    return w


def _active_set(prefs, c):
    k = prefs.require_chosen()
    c = np.asarray(c, dtype=float)
    if c.shape != (len(prefs),):
        raise ValueError("constraint values do not match the preference set")
    return [j for j in range(len(prefs)) if j != k and c[j] >= 0.0]


def projection_weights(G, prefs, c, tol=DEFAULT_TOL):
    """Min-norm weights beta over the gradients of violated constraints.

    Solves the projection-stage problem on the constraint-gradient Gram
    matrix, assembled from the objective Gram matrix G and the constraint
    coefficient vectors. Entries outside the active set are zero.
    """
    G = np.asarray(G, dtype=float)
    m = G.shape[0]
    active = _active_set(prefs, c)
    if not active:
        raise ValueError("projection_weights requires a non-empty active set")
    W = np.stack([constraint_gradient_coefficients(prefs, j, m) for j in active])
    beta = np.zeros(len(prefs))
    if len(active) == 1:
        beta[active[0]] = 1.0
        norm_sq = float(W[0] @ G @ W[0])
    else:
        sol = min_norm_simplex(W @ G @ W.T, tol=tol)
        for idx, j in enumerate(active):
            beta[j] = sol.alpha[idx]
        norm_sq = sol.norm_sq
    return beta, norm_sq


@dataclass(frozen=True)
class CombinedWeights:
    """Objective weights gamma from the joint objective/constraint solve."""

    gamma: np.ndarray
    beta: np.ndarray
    active_set: tuple
    norm_sq: float
    adjusted: bool


def project_to_simplex(v):
    """Euclidean projection onto the probability simplex."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, v.size + 1)
    rho = np.max(np.flatnonzero(u - css / idx > 0.0))
    return np.clip(v - css[rho] / (rho + 1.0), 0.0, None)


def combined_weights(G, prefs, c, tol=DEFAULT_TOL):
    """Joint min-norm over objective gradients and active constraint gradients.

    With an empty active set this reduces exactly to the plain min-norm
    weights. Otherwise the joint simplex solution (alpha, beta) is read off
    and combined into gamma_i = alpha_i + sum_j beta_j (p_j - p_k)_i; if the
    combination leaves the simplex it is Euclidean-projected back and the
    adjustment is flagged.
    """
    G = np.asarray(G, dtype=float)
    m = G.shape[0]
    if m < 2:
        raise ValueError("need at least two objectives")
    if float(np.trace(G)) <= 0.0:
        raise NumericalError("all objective gradients are zero")
    active = _active_set(prefs, c)
    n = len(prefs)
    if not active:
        sol = min_norm_simplex(G, tol=tol)
        return CombinedWeights(
            gamma=sol.alpha,
            beta=np.zeros(n),
            active_set=(),
            norm_sq=sol.norm_sq,
            adjusted=False,
        )
    W = np.stack([constraint_gradient_coefficients(prefs, j, m) for j in active])
    coeffs = np.vstack([np.eye(m), W])
    joint = min_norm_simplex(coeffs @ G @ coeffs.T, tol=tol)
    alpha = joint.alpha[:m]
    beta_active = joint.alpha[m:]
    beta = np.zeros(n)
    for idx, j in enumerate(active):
        beta[j] = beta_active[idx]
    gamma = alpha + W.T @ beta_active
    adjusted = bool(gamma.min() < 0.0 or abs(gamma.sum() - 1.0) > 1e-9)
    if adjusted:
        gamma = project_to_simplex(gamma)
    return CombinedWeights(
        gamma=gamma,
        beta=beta,
        active_set=tuple(active),
        norm_sq=joint.norm_sq,
        adjusted=adjusted,
    )
