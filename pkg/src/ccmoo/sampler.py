"""PK, same-clothes, and clothes-changing batch samplers.

Also provides the clothes-changing pair probability under PK sampling,
both in closed form and by Monte Carlo.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import kernels

MODES = ("PK", "SC", "CC")


@dataclass(frozen=True)
class SamplerConfig:
    P: int = 8
    K: int = 2
    mode: str = "PK"
    seed: int = 0

    def __post_init__(self):
        if self.P < 2:
            raise ValueError("P must be >= 2")
        if self.K < 2:
            raise ValueError("K must be >= 2")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")


@dataclass
class Batch:
    """P identity groups of K instances each, tagged with the sampler mode."""

    groups: list  # list of lists of Instance
    mode: str
    replacement_used: bool = False

    def instances(self):
        return [inst for group in self.groups for inst in group]


def _choose_identities(table, config, rng):
    ids = table.person_ids()
    if len(ids) < config.P:
        raise ValueError(
            f"table has {len(ids)} identities, sampler needs P = {config.P}"
        )
    return rng.choice(np.array(ids), size=config.P, replace=False)


def _pick(items, k, rng):
    """k uniform picks without replacement, falling back to replacement."""
    if len(items) >= k:
        idx = rng.choice(len(items), size=k, replace=False)
        return [items[i] for i in idx], False
    idx = rng.choice(len(items), size=k, replace=True)
    return [items[i] for i in idx], True


def pk_sample(table, config, rng):
    """Plain PK batch: P identities, K instances each, uniform draws."""
    groups = []
    replaced = False
    for p in _choose_identities(table, config, rng):
        insts = table.instances_of(int(p))
        group, r = _pick(insts, config.K, rng)
        replaced |= r
        groups.append(group)
    return Batch(groups=groups, mode="PK", replacement_used=replaced)


def sc_sample(table, config, rng):
    """Same-clothes batch: per identity one clothing, K instances of it."""
    groups = []
    replaced = False
    for p in _choose_identities(table, config, rng):
        wardrobe = table.wardrobe(int(p))
        c = wardrobe[int(rng.integers(len(wardrobe)))]
        insts = table.instances_of(int(p), c)
        group, r = _pick(insts, config.K, rng)
        replaced |= r
        groups.append(group)
    return Batch(groups=groups, mode="SC", replacement_used=replaced)


def cc_sample(table, config, rng):
    """Clothes-changing batch: per identity K distinct clothes, one instance each.

    An identity whose wardrobe (real plus synthetic) holds fewer than K
    clothing labels is an error; growing the wardrobe via latent clothes
    swaps is the intended fix.
    """
    groups = []
    for p in _choose_identities(table, config, rng):
        wardrobe = table.wardrobe(int(p))
        if len(wardrobe) < config.K:
            raise ValueError(
                f"identity {int(p)} has only {len(wardrobe)} clothing labels, "
                f"CC sampling needs K = {config.K}; add synthetic swaps"
            )
        chosen = rng.choice(np.array(wardrobe), size=config.K, replace=False)
        group = []
        for c in chosen:
            insts = table.instances_of(int(p), int(c))
            group.append(insts[int(rng.integers(len(insts)))])
        groups.append(group)
    return Batch(groups=groups, mode="CC", replacement_used=False)


def cc_pair_probability(n_clothes, k, imgs, method="exact", trials=100_000, seed=0):
    """Probability that K instances drawn from one identity span >= 2 clothes.

    The identity owns n_clothes labels with imgs instances each; the draw is
    uniform without replacement. Exact value by complement counting over
    all-same-clothing draws: 1 - n_clothes * C(imgs, k) / C(n_clothes*imgs, k).
    Returns (probability, standard_error); the exact method reports 0 error.
    """
    if n_clothes < 1 or k < 1 or imgs < 1:
        raise ValueError("n_clothes, k, and imgs must all be >= 1")
    if k > n_clothes * imgs:
        raise ValueError(
            f"cannot draw {k} instances from {n_clothes * imgs} available"
        )
    if method == "exact":
        same = n_clothes * math.comb(imgs, k)
        total = math.comb(n_clothes * imgs, k)
        return 1.0 - same / total, 0.0
    if method == "montecarlo":
        if trials < 1:
            raise ValueError("trials must be >= 1")
        successes = kernels.cc_pair_trials(n_clothes, k, imgs, int(trials), int(seed))
        p = successes / trials
        return p, math.sqrt(p * (1.0 - p) / trials)
    raise ValueError(f"method must be 'exact' or 'montecarlo', got {method!r}")
