"""Retrieval evaluation under the general / CC / SC protocols, plus
Pareto dominance utilities and the clothes-swap success rate."""

import csv
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

PROTOCOLS = ("general", "cc", "sc")


@dataclass(frozen=True)
class LabeledFeature:
    """Unit-norm feature vector with identity and clothing labels.

    uid identifies the underlying instance so a query present in the
    gallery can be excluded from its own ranking; None means the feature
    never matches a gallery entry as "itself".
    """

    feature: np.ndarray
    person_id: int
    clothes_id: int
    source: str = "real"
    uid: Optional[int] = None

    def __post_init__(self):
        f = np.asarray(self.feature, dtype=float)
        if f.ndim != 1:
            raise ValueError("feature must be a 1-D vector")
        norm = float(np.linalg.norm(f))
        if abs(norm - 1.0) > 1e-6:
            raise ValueError(f"feature must be unit norm, got |f| = {norm}")
        object.__setattr__(self, "feature", f)


@dataclass
class EvalResult:
    map: float
    top1: float
    per_query_ap: list
    num_valid_queries: int

    def to_json(self):
        return {
            "map": float(self.map),
            "top1": float(self.top1),
            "num_valid_queries": int(self.num_valid_queries),
            "per_query_ap": [float(x) for x in self.per_query_ap],
        }

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, sort_keys=True)
            fh.write("\n")


def _gallery_arrays(gallery):
    if not gallery:
        raise ValueError("gallery must be non-empty")
    F = np.stack([g.feature for g in gallery])
    pid = np.array([g.person_id for g in gallery])
    cid = np.array([g.clothes_id for g in gallery])
    uid = np.array([-1 if g.uid is None else g.uid for g in gallery])
    return F, pid, cid, uid


def rank_gallery(query, gallery):
    """Gallery indices by ascending distance to the query, ties by index."""
    F, _, _, _ = _gallery_arrays(gallery)
    if F.shape[1] != query.feature.size:
        raise ValueError("query and gallery feature dimensions differ")
    dist = np.linalg.norm(F - query.feature[None, :], axis=1)
    return np.argsort(dist, kind="stable")


def protocol_mask(query, gallery, protocol):
    """(valid, positive) boolean masks over the gallery for one query.

    general: everything but the query instance itself is valid; positives
    share the person. cc: same-person same-clothes entries are removed and
    positives are same person, different clothes. sc: same-person
    different-clothes entries are removed and positives are same person,
    same clothes (minus the query instance).
    """
    if protocol not in PROTOCOLS:
        raise ValueError(f"protocol must be one of {PROTOCOLS}, got {protocol!r}")
    _, pid, cid, uid = _gallery_arrays(gallery)
    same_person = pid == query.person_id
    same_clothes = same_person & (cid == query.clothes_id)
    diff_clothes = same_person & (cid != query.clothes_id)
    is_self = (
        np.zeros_like(same_person)
        if query.uid is None
        else uid == query.uid
    )
    if protocol == "general":
        valid = ~is_self
        positive = same_person & valid
    elif protocol == "cc":
        valid = ~same_clothes
        positive = diff_clothes & valid
    else:  # sc
        valid = ~diff_clothes & ~is_self
        positive = same_clothes & valid
    return valid, positive


def evaluate(queries, gallery, protocol):
    """mAP and top-1 over all queries with at least one valid positive.

    Positive-free queries are excluded from both aggregates (and from
    num_valid_queries) rather than contributing NaN.
    """
    if not queries:
        raise ValueError("queries must be non-empty")
    F, _, _, _ = _gallery_arrays(gallery)
    per_query_ap = []
    top1_hits = 0
    for q in queries:
        if q.feature.size != F.shape[1]:
            raise ValueError("query and gallery feature dimensions differ")
        valid, positive = protocol_mask(q, gallery, protocol)
        if not positive.any():
            continue
        vidx = np.flatnonzero(valid)
        dist = np.linalg.norm(F[vidx] - q.feature[None, :], axis=1)
        order = np.argsort(dist, kind="stable")
        pos_sorted = positive[vidx][order]
        ranks = np.flatnonzero(pos_sorted) + 1
        precisions = np.arange(1, ranks.size + 1) / ranks
        per_query_ap.append(float(precisions.mean()))
        top1_hits += int(pos_sorted[0])
    n = len(per_query_ap)
    if n == 0:
        return EvalResult(map=0.0, top1=0.0, per_query_ap=[], num_valid_queries=0)
    return EvalResult(
        map=float(np.mean(per_query_ap)),
        top1=top1_hits / n,
        per_query_ap=per_query_ap,
        num_valid_queries=n,
    )


def ccsr(triples):
    """Clothes-swap success rate over (synthetic, original, clothing-source)
    feature triples: success when the synthetic feature sits strictly closer
    to the clothing source than to the original wearer; ties count as
    failure."""
    if not triples:
        raise ValueError("ccsr needs at least one feature triple")
    successes = 0
    for f_syn, f_orig, f_src in triples:
        for f in (f_syn, f_orig, f_src):
            if abs(np.linalg.norm(f) - 1.0) > 1e-6:
                raise ValueError("ccsr features must be unit norm")
        d_src = float(np.linalg.norm(f_syn - f_src))
        d_orig = float(np.linalg.norm(f_syn - f_orig))
        successes += int(d_src < d_orig)
    return successes / len(triples)


def dominates(a, b):
    """True when a is no worse than b everywhere and strictly better once."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError("objective vectors must have equal length")
    return bool(np.all(a <= b) and np.any(a < b))


def pareto_front(points):
    """Indices of non-dominated points (duplicates are all retained)."""
    pts = [np.asarray(p, dtype=float) for p in points]
    front = []
    for i, p in enumerate(pts):
        if not any(dominates(q, p) for j, q in enumerate(pts) if j != i):
            front.append(i)
    return front


def save_features_csv(features, path):
    """Feature table with header person_id, clothes_id, source, f0..f{k-1}."""
    if not features:
        raise ValueError("no features to save")
    dim = features[0].feature.size
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["person_id", "clothes_id", "source"] + [f"f{i}" for i in range(dim)]
        )
        for lf in features:
            writer.writerow(
                [lf.person_id, lf.clothes_id, lf.source]
                + [repr(float(x)) for x in lf.feature]
            )


def load_features_csv(path, uid_offset=0):
    """Load a feature CSV; uids are row indices shifted by uid_offset."""
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:3] != ["person_id", "clothes_id", "source"]:
            raise ValueError(f"unexpected feature CSV header in {path}")
        for i, row in enumerate(reader):
            out.append(
                LabeledFeature(
                    feature=np.array([float(x) for x in row[3:]]),
                    person_id=int(row[0]),
                    clothes_id=int(row[1]),
                    source=row[2],
                    uid=uid_offset + i,
                )
            )
    if not out:
        raise ValueError(f"feature CSV {path} holds no rows")
    return out
