"""Hot numeric kernels: numba-compiled with pure-numpy fallbacks.

The backend is chosen once at import time from the ``CCMOO_BACKEND``
environment variable ("numba" or "numpy"). Default is "numba" when numba
imports cleanly, otherwise "numpy". Both paths implement the same
contracts; ``benchmarks/bench_kernels.py`` times them side by side.
"""

import os

import numpy as np


# ---------------------------------------------------------------------------
# Simplex-constrained min-norm (pairwise Frank-Wolfe on the Gram matrix).
# Loop-style so the same source compiles under numba.


def _fw_min_norm_loops(G, tol, max_iter):
    """Minimize a^T G a over the probability simplex.

    Pairwise Frank-Wolfe: each step moves mass from the worst active
    vertex onto the vertex minimizing (G a)_j, with an exact line search.
    Returns (alpha, norm_sq, duality_gap). Linear convergence on PSD G,
    so the default budgets reach solver precision rather than O(1/k).
    """
    m = G.shape[0]
    alpha = np.full(m, 1.0 / m)
    y = G @ alpha
    f = float(alpha @ y)
    gap = np.inf
    for _ in range(max_iter):
        j = 0
        for i in range(1, m):
            if y[i] < y[j]:
                j = i
        gap = 2.0 * (f - y[j])
        if gap <= tol:
            break
        # away vertex: worst active coordinate
        a_idx = -1
        for i in range(m):
            if alpha[i] > 0.0 and (a_idx < 0 or y[i] > y[a_idx]):
                a_idx = i
        if a_idx == j:
            break
        t_max = alpha[a_idx]
        # line search along e_j - e_a: f(t) = f + 2 t (y_j - y_a) + t^2 dGd
        dGd = G[j, j] - 2.0 * G[j, a_idx] + G[a_idx, a_idx]
        dy = y[j] - y[a_idx]
        if dGd <= 1e-18:
            t = t_max if dy < 0.0 else 0.0
        else:
            t = -dy / dGd
            if t < 0.0:
                t = 0.0
            elif t > t_max:
                t = t_max
        if t <= 0.0:
            break
        alpha[j] += t
        alpha[a_idx] -= t
        if alpha[a_idx] < 0.0:
            alpha[a_idx] = 0.0
        s = alpha.sum()
        for i in range(m):
            alpha[i] /= s
        y = G @ alpha
        f = float(alpha @ y)
        gap = 2.0 * (f - y.min())
    return alpha, f, gap


# ---------------------------------------------------------------------------
# Pairwise Euclidean distances between row vectors.


def _pairwise_dist_loops(F):
    n = F.shape[0]
    d = F.shape[1]
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            acc = 0.0
            for k in range(d):
                diff = F[i, k] - F[j, k]
                acc += diff * diff
            v = np.sqrt(acc)
            out[i, j] = v
            out[j, i] = v
    return out


def _pairwise_dist_numpy(F):
    sq = np.sum(F * F, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (F @ F.T)
    np.clip(d2, 0.0, None, out=d2)
    np.fill_diagonal(d2, 0.0)
    return np.sqrt(d2)


# ---------------------------------------------------------------------------
# Batch-hard triplet mining: hardest positive / hardest negative per anchor.
# Returns per-anchor (pos index, neg index, hinge value, anchor validity);
# hinge <= 0 anchors contribute zero loss and zero (sub)gradient.


def _batch_hard_loops(dist, pos_mask, neg_mask, margin):
    n = dist.shape[0]
    pos_idx = np.full(n, -1, dtype=np.int64)
    neg_idx = np.full(n, -1, dtype=np.int64)
    hinge = np.zeros(n)
    valid = np.zeros(n, dtype=np.bool_)
    for a in range(n):
        dp = -1.0
        pi = -1
        dn = np.inf
        ni = -1
        for b in range(n):
            if pos_mask[a, b] and dist[a, b] > dp:
                dp = dist[a, b]
                pi = b
            if neg_mask[a, b] and dist[a, b] < dn:
                dn = dist[a, b]
                ni = b
        if pi >= 0 and ni >= 0:
            valid[a] = True
            pos_idx[a] = pi
            neg_idx[a] = ni
            hinge[a] = dp - dn + margin
    return pos_idx, neg_idx, hinge, valid


def _batch_hard_numpy(dist, pos_mask, neg_mask, margin):
    n = dist.shape[0]
    valid = pos_mask.any(axis=1) & neg_mask.any(axis=1)
    dp = np.where(pos_mask, dist, -np.inf)
    dn = np.where(neg_mask, dist, np.inf)
    pos_idx = np.where(valid, dp.argmax(axis=1), -1).astype(np.int64)
    neg_idx = np.where(valid, dn.argmin(axis=1), -1).astype(np.int64)
    hinge = np.zeros(n)
    hinge[valid] = (
        dist[np.flatnonzero(valid), pos_idx[valid]]
        - dist[np.flatnonzero(valid), neg_idx[valid]]
        + margin
    )
    return pos_idx, neg_idx, hinge, valid


# ---------------------------------------------------------------------------
# Monte Carlo trials for the clothes-changing pair probability: draw k of
# n_clothes*imgs instances without replacement, success when the draw spans
# more than one clothing label.


def _cc_pair_trials_loops(n_clothes, k, imgs, trials, seed):
    np.random.seed(seed)
    n = n_clothes * imgs
    pool = np.arange(n)
    successes = 0
    for _ in range(trials):
        for i in range(k):
            j = i + np.random.randint(0, n - i)
            tmp = pool[i]
            pool[i] = pool[j]
            pool[j] = tmp
        first = pool[0] // imgs
        for i in range(1, k):
            if pool[i] // imgs != first:
                successes += 1
                break
    return successes


def _cc_pair_trials_numpy(n_clothes, k, imgs, trials, seed):
    rng = np.random.default_rng(seed)
    n = n_clothes * imgs
    successes = 0
    chunk = max(1, 4_000_000 // n)
    done = 0
    while done < trials:
        t = min(chunk, trials - done)
        keys = rng.random((t, n))
        idx = np.argpartition(keys, k - 1, axis=1)[:, :k]
        clothes = idx // imgs
        successes += int(np.sum(clothes.max(axis=1) != clothes.min(axis=1)))
        done += t
    return successes


_NUMPY_IMPLS = {
    "fw_min_norm": _fw_min_norm_loops,
    "pairwise_dist": _pairwise_dist_numpy,
    "batch_hard": _batch_hard_numpy,
    "cc_pair_trials": _cc_pair_trials_numpy,
}

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:
    njit = None
    _HAVE_NUMBA = False

if _HAVE_NUMBA:
    _NUMBA_IMPLS = {
        "fw_min_norm": njit(cache=True)(_fw_min_norm_loops),
        "pairwise_dist": njit(cache=True)(_pairwise_dist_loops),
        "batch_hard": njit(cache=True)(_batch_hard_loops),
        "cc_pair_trials": njit(cache=True)(_cc_pair_trials_loops),
    }
else:
    _NUMBA_IMPLS = None

_requested = os.environ.get("CCMOO_BACKEND", "").strip().lower()
if _requested not in ("", "numba", "numpy"):
    raise ValueError(
        f"CCMOO_BACKEND must be 'numba' or 'numpy', got {_requested!r}"
    )
if _requested == "":
    _requested = "numba" if _HAVE_NUMBA else "numpy"
if _requested == "numba" and not _HAVE_NUMBA:
    _requested = "numpy"

BACKEND = _requested


def impls(backend):
    """Implementation table for one backend ("numba" or "numpy")."""
    if backend == "numpy":
        return _NUMPY_IMPLS
    if backend == "numba":
        if _NUMBA_IMPLS is None:
            raise ValueError("numba backend requested but numba is unavailable")
        return _NUMBA_IMPLS
    raise ValueError(f"unknown backend {backend!r}")


def available_backends():
    return ("numpy", "numba") if _HAVE_NUMBA else ("numpy",)


_active = impls(BACKEND)
fw_min_norm = _active["fw_min_norm"]
pairwise_dist = _active["pairwise_dist"]
batch_hard = _active["batch_hard"]
cc_pair_trials = _active["cc_pair_trials"]
