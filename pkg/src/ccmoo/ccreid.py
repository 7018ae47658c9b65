"""Desk-scale identity/clothing world with a linear embedding model.

Instances are latent vectors composed of an identity cue, a clothing cue,
and noise. A latent clothes swap replaces the clothing cue while keeping
the identity cue, growing each person's wardrobe with synthetic instances.
The decomposed losses (identity cross-entropy, same-clothes triplet,
clothes-changing triplet) come with hand-derived gradients so the world
plugs into the descent loop as an ordinary multi-objective problem.
"""

import csv
from dataclasses import dataclass

import numpy as np

from . import kernels
from .descent import train
from .metrics import LabeledFeature, evaluate
from .problems import MultiObjectiveProblem
from .sampler import SamplerConfig, cc_sample, sc_sample

SOURCE_REAL = "real"
SOURCE_SYNTHETIC = "synthetic"

DEFAULT_D_FEAT = 16
DEFAULT_MARGIN = 0.3
EPOCH_LENGTH = 10

# seed-stream tags so every consumer of a world seed gets an independent rng
_STREAM_BATCH = 1
_STREAM_AUGMENT = 2
_STREAM_MODEL = 3
_STREAM_TEST = 4


@dataclass(frozen=True)
class WorldConfig:
    num_identities: int = 20
    clothes_per_identity: int = 2
    images_per_clothing: int = 4
    d_latent: int = 32
    id_weight: float = 1.0
    clothes_weight: float = 1.5
    noise_sigma: float = 0.1
    seed: int = 0

    def __post_init__(self):
        for name in ("num_identities", "clothes_per_identity", "images_per_clothing", "d_latent"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.id_weight <= 0.0 or self.clothes_weight <= 0.0:
            raise ValueError("id_weight and clothes_weight must be positive")
        if self.noise_sigma < 0.0:
            raise ValueError("noise_sigma must be >= 0")
        if self.seed < 0:
            raise ValueError("seed must be a non-negative integer")


@dataclass(frozen=True)
class Instance:
    person_id: int
    clothes_id: int
    vector: np.ndarray
    source: str = SOURCE_REAL


class DatasetTable:
    """Instance store indexed by person and by (person, clothing).

    Carries the latent cue stores needed by clothes swaps; tables loaded
    from CSV lack them and reject swaps.
    """

    def __init__(self, config, instances, identity_cues, clothing_cues, clothes_owner):
        self.config = config
        self.instances = list(instances)
        self.identity_cues = dict(identity_cues)
        self.clothing_cues = dict(clothing_cues)
        self.clothes_owner = dict(clothes_owner)
        self._by_person = {}
        self._by_person_clothes = {}
        for inst in self.instances:
            self._by_person.setdefault(inst.person_id, []).append(inst)
            self._by_person_clothes.setdefault(
                (inst.person_id, inst.clothes_id), []
            ).append(inst)

    def person_ids(self):
        return sorted(self._by_person)

    def wardrobe(self, person_id):
        return sorted(c for (p, c) in self._by_person_clothes if p == person_id)

    def instances_of(self, person_id, clothes_id=None):
        if clothes_id is None:
            return self._by_person[person_id]
        return self._by_person_clothes[(person_id, clothes_id)]

    def with_instances(self, extra):
        return DatasetTable(
            self.config,
            self.instances + list(extra),
            self.identity_cues,
            self.clothing_cues,
            self.clothes_owner,
        )

    def __len__(self):
        return len(self.instances)


def _unit_rows(rng, count, dim):
    rows = rng.standard_normal((count, dim))
    return rows / np.linalg.norm(rows, axis=1, keepdims=True)


def generate_world(config):
    """Seeded world: per-person identity cues, per-clothing cues, noisy
    instance vectors id_weight*u_p + clothes_weight*v_c + noise."""
    rng = np.random.default_rng(config.seed)
    P, nc, imgs = config.num_identities, config.clothes_per_identity, config.images_per_clothing
    u = _unit_rows(rng, P, config.d_latent)
    v = _unit_rows(rng, P * nc, config.d_latent)
    identity_cues = {p: u[p] for p in range(P)}
    clothing_cues = {c: v[c] for c in range(P * nc)}
    clothes_owner = {p * nc + j: p for p in range(P) for j in range(nc)}
    instances = []
    for p in range(P):
        for j in range(nc):
            c = p * nc + j
            base = config.id_weight * u[p] + config.clothes_weight * v[c]
            for _ in range(imgs):
                noise = config.noise_sigma * rng.standard_normal(config.d_latent)
                instances.append(Instance(p, c, base + noise, SOURCE_REAL))
    return DatasetTable(config, instances, identity_cues, clothing_cues, clothes_owner)


def latent_clothes_swap(table, instance, donor_clothes_ids, rng):
    """Synthetic clothes-changed copies of one real instance.

    Each donor clothing (owned by another person) yields one synthetic
    instance keeping the identity cue and swapping in the donor's clothing
    cue plus fresh noise.
    """
    if instance.source != SOURCE_REAL:
        raise ValueError("clothes swaps start from real instances")
    if not table.identity_cues:
        raise ValueError("table lacks latent cue stores (loaded from CSV?)")
    cfg = table.config
    u = table.identity_cues[instance.person_id]
    out = []
    for c in donor_clothes_ids:
        if table.clothes_owner.get(c) == instance.person_id:
            raise ValueError(
                f"donor clothing {c} belongs to person {instance.person_id}"
            )
        base = cfg.id_weight * u + cfg.clothes_weight * table.clothing_cues[c]
        noise = cfg.noise_sigma * rng.standard_normal(cfg.d_latent)
        out.append(Instance(instance.person_id, c, base + noise, SOURCE_SYNTHETIC))
    return out


def augment_with_swaps(table, donors_per_clothing, rng):
    """Grow every wardrobe by clothes swaps against other persons' clothes.

    Per identity, donors_per_clothing distinct donor clothes are assigned to
    each real clothing (disjoint across the wardrobe), and every real
    instance is swapped once per donor, so the synthetic volume is
    donors_per_clothing times the real data.
    """
    if donors_per_clothing < 0:
        raise ValueError("donors_per_clothing must be >= 0")
    if donors_per_clothing == 0:
        return table
    nc = table.config.clothes_per_identity
    all_clothes = sorted(table.clothes_owner)
    extra = []
    for p in table.person_ids():
        others = np.array([c for c in all_clothes if table.clothes_owner[c] != p])
        need = nc * donors_per_clothing
        if len(others) < need:
            raise ValueError(
                f"person {p}: {len(others)} donor clothes available, need {need}"
            )
        chosen = rng.choice(others, size=need, replace=False)
        for j, c in enumerate(table.wardrobe(p)):
            donors = [int(x) for x in chosen[j * donors_per_clothing:(j + 1) * donors_per_clothing]]
            for inst in table.instances_of(p, c):
                extra.extend(latent_clothes_swap(table, inst, donors, rng))
    return table.with_instances(extra)


def fresh_instances(table, rng):
    """Same persons, clothes, and cues; freshly drawn noise; real data only.

    Used as a held-out split for retrieval evaluation.
    """
    if not table.identity_cues:
        raise ValueError("table lacks latent cue stores (loaded from CSV?)")
    cfg = table.config
    instances = []
    for c in sorted(table.clothes_owner):
        p = table.clothes_owner[c]
        base = cfg.id_weight * table.identity_cues[p] + cfg.clothes_weight * table.clothing_cues[c]
        for _ in range(cfg.images_per_clothing):
            noise = cfg.noise_sigma * rng.standard_normal(cfg.d_latent)
            instances.append(Instance(p, c, base + noise, SOURCE_REAL))
    return DatasetTable(cfg, instances, table.identity_cues, table.clothing_cues, table.clothes_owner)


# ---------------------------------------------------------------------------
# Embedding model and decomposed losses


@dataclass(frozen=True)
class EmbeddingModel:
    W: np.ndarray  # (d_feat, d_latent)
    classifier: np.ndarray  # (num_identities, d_feat)

    def __post_init__(self):
        W = np.asarray(self.W, dtype=float)
        C = np.asarray(self.classifier, dtype=float)
        if W.ndim != 2 or C.ndim != 2 or C.shape[1] != W.shape[0]:
            raise ValueError("classifier columns must match embedding rows")
        if W.shape[0] < 2:
            raise ValueError("d_feat must be >= 2")
        if not (np.isfinite(W).all() and np.isfinite(C).all()):
            raise ValueError("model parameters must be finite")
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "classifier", C)

    @property
    def d_feat(self):
        return self.W.shape[0]

    @property
    def d_latent(self):
        return self.W.shape[1]

    @property
    def num_params(self):
        return self.W.size + self.classifier.size

    def flatten(self):
        return np.concatenate([self.W.ravel(), self.classifier.ravel()])

    def replace_flat(self, theta):
        theta = np.asarray(theta, dtype=float)
        if theta.size != self.num_params:
            raise ValueError("flat parameter vector has the wrong size")
        W = theta[: self.W.size].reshape(self.W.shape)
        C = theta[self.W.size:].reshape(self.classifier.shape)
        return EmbeddingModel(W, C)


def init_model(config, d_feat=DEFAULT_D_FEAT, seed=0):
    rng = np.random.default_rng(seed)
    W = rng.standard_normal((d_feat, config.d_latent)) / np.sqrt(config.d_latent)
    C = rng.standard_normal((config.num_identities, d_feat)) / np.sqrt(d_feat)
    return EmbeddingModel(W, C)


def _embed_rows(model, X):
    Z = X @ model.W.T
    norms = np.maximum(np.linalg.norm(Z, axis=1), 1e-12)
    return Z / norms[:, None], norms


def embed(model, instance):
    """L2-normalized feature of one instance."""
    F, _ = _embed_rows(model, instance.vector[None, :])
    return F[0]


def _backprop_normalization(G_F, F, norms):
    # f = z / |z|  =>  g_z = (g_f - (g_f . f) f) / |z|
    return (G_F - np.sum(G_F * F, axis=1, keepdims=True) * F) / norms[:, None]


def _id_loss(model, X, labels):
    F, norms = _embed_rows(model, X)
    logits = F @ model.classifier.T
    shift = logits - logits.max(axis=1, keepdims=True)
    lse = np.log(np.sum(np.exp(shift), axis=1)) + logits.max(axis=1)
    B = X.shape[0]
    loss = float(np.mean(lse - logits[np.arange(B), labels]))
    soft = np.exp(logits - lse[:, None])
    soft[np.arange(B), labels] -= 1.0
    G_logits = soft / B
    dC = G_logits.T @ F
    G_F = G_logits @ model.classifier
    dW = _backprop_normalization(G_F, F, norms).T @ X
    return loss, dW, dC


def _triplet_loss(model, X, pid, cid, positives_share_clothes, margin):
    if np.unique(pid).size < 2:
        raise ValueError("triplet batch needs at least two identities")
    F, norms = _embed_rows(model, X)
    D = kernels.pairwise_dist(np.ascontiguousarray(F))
    same_person = pid[:, None] == pid[None, :]
    same_clothes = cid[:, None] == cid[None, :]
    not_self = ~np.eye(len(pid), dtype=bool)
    if positives_share_clothes:
        pos_mask = same_person & same_clothes & not_self
    else:
        pos_mask = same_person & ~same_clothes
    neg_mask = ~same_person
    pos_idx, neg_idx, hinge, valid = kernels.batch_hard(
        D, pos_mask, neg_mask, float(margin)
    )
    n_valid = int(valid.sum())
    if n_valid == 0:
        raise ValueError("no anchor has both a positive and a negative")
    loss = float(np.sum(np.maximum(hinge[valid], 0.0)) / n_valid)
    G_F = np.zeros_like(F)
    active = valid & (hinge > 0.0)
    for a in np.flatnonzero(active):
        p, n = pos_idx[a], neg_idx[a]
        if D[a, p] > 0.0:
            u = (F[a] - F[p]) / D[a, p]
            G_F[a] += u
            G_F[p] -= u
        if D[a, n] > 0.0:
            v = (F[a] - F[n]) / D[a, n]
            G_F[a] -= v
            G_F[n] += v
    G_F /= n_valid
    dW = _backprop_normalization(G_F, F, norms).T @ X
    return loss, dW


def _batch_arrays(batch):
    insts = batch.instances()
    X = np.stack([inst.vector for inst in insts])
    pid = np.array([inst.person_id for inst in insts])
    cid = np.array([inst.clothes_id for inst in insts])
    return X, pid, cid


def objectives_and_gradients(model, id_batch, sc_batch, cc_batch, margin=DEFAULT_MARGIN):
    """Decomposed losses (L_id, L_sc, L_cc) and gradient rows over the
    flattened parameters.

    L_id is softmax cross-entropy over the union identity batch; L_sc and
    L_cc are batch-hard triplet losses whose positives share, respectively
    differ in, clothing. Hinge boundaries contribute zero subgradient.
    """
    if margin <= 0.0:
        raise ValueError("margin must be positive")
    X_id, pid_id, _ = _batch_arrays(id_batch)
    X_sc, pid_sc, cid_sc = _batch_arrays(sc_batch)
    X_cc, pid_cc, cid_cc = _batch_arrays(cc_batch)
    l_id, dW_id, dC_id = _id_loss(model, X_id, pid_id)
    l_sc, dW_sc = _triplet_loss(model, X_sc, pid_sc, cid_sc, True, margin)
    l_cc, dW_cc = _triplet_loss(model, X_cc, pid_cc, cid_cc, False, margin)
    zeros_C = np.zeros_like(model.classifier)
    grads = np.stack(
        [
            np.concatenate([dW_id.ravel(), dC_id.ravel()]),
            np.concatenate([dW_sc.ravel(), zeros_C.ravel()]),
            np.concatenate([dW_cc.ravel(), zeros_C.ravel()]),
        ]
    )
    return np.array([l_id, l_sc, l_cc]), grads


class _BatchSchedule:
    """Fixed batches per epoch of EPOCH_LENGTH iterations, seeded per epoch."""

    def __init__(self, table, sampler_config, seed):
        self.table = table
        self.cfg = sampler_config
        self.seed = seed
        self.epoch = -1
        self.sc_batch = None
        self.cc_batch = None
        self.set_epoch(0)

    def set_epoch(self, epoch):
        if epoch == self.epoch:
            return
        rng = np.random.default_rng((self.seed, _STREAM_BATCH, epoch))
        self.sc_batch = sc_sample(self.table, self.cfg, rng)
        self.cc_batch = cc_sample(self.table, self.cfg, rng)
        self.epoch = epoch

    def id_batch(self):
        from .sampler import Batch

        return Batch(
            groups=self.sc_batch.groups + self.cc_batch.groups, mode="PK"
        )


def as_problem(model, table, sampler_config=None, margin=DEFAULT_MARGIN, seed=0):
    """Expose the world as a 3-objective problem over flattened parameters.

    Batches are fixed within an epoch of EPOCH_LENGTH iterations and
    resampled deterministically per epoch, keeping evaluations and
    gradients consistent for stationarity checks. Construction fails when
    the clothes-changing sampler cannot fill a batch (too few clothing
    labels), signalling that synthesis is needed.
    """
    cfg = sampler_config or SamplerConfig()
    schedule = _BatchSchedule(table, cfg, seed)
    template = model
    cache = {"key": None, "value": None}

    def compute(theta):
        key = (theta.tobytes(), schedule.epoch)
        if cache["key"] != key:
            mdl = template.replace_flat(theta)
            cache["value"] = objectives_and_gradients(
                mdl, schedule.id_batch(), schedule.sc_batch, schedule.cc_batch, margin
            )
            cache["key"] = key
        return cache["value"]

    problem = MultiObjectiveProblem(
        name="ccreid-sim",
        m=3,
        d=template.num_params,
        f=lambda theta: compute(np.asarray(theta, dtype=float))[0],
        jac=lambda theta: compute(np.asarray(theta, dtype=float))[1],
        domain=(-1.0, 1.0),
        front=None,
        on_iteration=lambda it: schedule.set_epoch(it // EPOCH_LENGTH),
    )
    return problem


# ---------------------------------------------------------------------------
# CSV interchange


def save_table_csv(table, path):
    """Instance table with header person_id, clothes_id, source, v0..v{d-1}."""
    dim = table.config.d_latent
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["person_id", "clothes_id", "source"] + [f"v{i}" for i in range(dim)]
        )
        for inst in table.instances:
            writer.writerow(
                [inst.person_id, inst.clothes_id, inst.source]
                + [repr(float(x)) for x in inst.vector]
            )


def load_table_csv(path, config=None):
    """Rebuild a table from CSV; latent cue stores are unavailable, so the
    result supports sampling and evaluation but not clothes swaps."""
    instances = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:3] != ["person_id", "clothes_id", "source"]:
            raise ValueError(f"unexpected table CSV header in {path}")
        for row in reader:
            instances.append(
                Instance(
                    person_id=int(row[0]),
                    clothes_id=int(row[1]),
                    source=row[2],
                    vector=np.array([float(x) for x in row[3:]]),
                )
            )
    if not instances:
        raise ValueError(f"table CSV {path} holds no rows")
    if config is None:
        d = instances[0].vector.size
        persons = {inst.person_id for inst in instances}
        config = WorldConfig(num_identities=len(persons), d_latent=d)
    owner = {}
    for inst in instances:
        if inst.source == SOURCE_REAL:
            owner.setdefault(inst.clothes_id, inst.person_id)
    return DatasetTable(config, instances, {}, {}, owner)


def extract_features(model, table):
    """Embed every instance; uids are table row indices."""
    X = np.stack([inst.vector for inst in table.instances])
    F, _ = _embed_rows(model, X)
    return [
        LabeledFeature(
            feature=F[i],
            person_id=inst.person_id,
            clothes_id=inst.clothes_id,
            source=inst.source,
            uid=i,
        )
        for i, inst in enumerate(table.instances)
    ]


def query_gallery_split(features):
    """First instance of every (person, clothing) pair queries the rest."""
    seen = set()
    queries, gallery = [], []
    for lf in features:
        key = (lf.person_id, lf.clothes_id)
        if key not in seen:
            seen.add(key)
            queries.append(lf)
        else:
            gallery.append(lf)
    if not gallery:
        raise ValueError("not enough instances to form a gallery")
    return queries, gallery


def run_training_experiment(
    world_config,
    mode,
    optimizer_config,
    sampler_config=None,
    synthesis=0,
    d_feat=DEFAULT_D_FEAT,
    margin=DEFAULT_MARGIN,
):
    """Full pipeline: world, optional synthesis, training, retrieval eval.

    Evaluation embeds a fresh-noise redraw of the real-world structure and
    scores all three protocols. Fully deterministic in world_config.seed.
    """
    seed = world_config.seed
    table = generate_world(world_config)
    if synthesis:
        table = augment_with_swaps(
            table, synthesis, np.random.default_rng((seed, _STREAM_AUGMENT))
        )
    model0 = init_model(world_config, d_feat, seed=(seed, _STREAM_MODEL))
    problem = as_problem(model0, table, sampler_config, margin, seed=seed)
    trace = train(problem, mode, optimizer_config, model0.flatten())
    model = model0.replace_flat(trace.final_parameters)
    test_table = fresh_instances(table, np.random.default_rng((seed, _STREAM_TEST)))
    features = extract_features(model, test_table)
    queries, gallery = query_gallery_split(features)
    evaluation = {
        proto: evaluate(queries, gallery, proto).to_json()
        for proto in ("general", "cc", "sc")
    }
    return {
        "world": {
            "identities": world_config.num_identities,
            "instances": len(table),
            "synthesis": synthesis,
        },
        "training": {
            "reason": trace.reason,
            "iterations": len(trace.records),
            "final_objectives": [float(x) for x in trace.final_objectives],
        },
        "evaluation": evaluation,
    }, trace, model
