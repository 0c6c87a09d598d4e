"""Rank-based comparison machinery.

Importance scores from different estimators live on incomparable scales,
so every cross-method comparison happens on rank scores: a concept's
position in the descending-score list divided by K.  Ties are broken by
byte-wise ascending name so rankings are total orders.  Raw scores are
retained for inspection only.

All rank-difference metrics are computed in integer arithmetic with one
final division, so independent re-evaluations agree exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


@dataclass
class RankedExplanation:
    concept_names: list[str]
    raw_scores: np.ndarray   # K floats, aligned with concept_names
    rank_scores: np.ndarray  # K values, position / K
    positions: np.ndarray    # K ints, position of each concept in the ranking

    @property
    def n_concepts(self) -> int:
        return len(self.concept_names)

    def ordered_names(self) -> list[str]:
        order = np.argsort(self.positions)
        return [self.concept_names[i] for i in order]


def to_ranked(concept_names, raw_scores) -> RankedExplanation:
    """Rank concepts by descending raw score, ties by ascending name bytes."""
    names = list(concept_names)
    scores = np.asarray(raw_scores, dtype=np.float64)
    if len(names) != scores.shape[0]:
        raise ValidationError("names and scores length mismatch")
    if not np.isfinite(scores).all():
        raise ValidationError("raw scores must be finite")
    k = len(names)
    order = sorted(range(k), key=lambda i: (-scores[i], names[i].encode("utf-8")))
    positions = np.empty(k, dtype=np.int64)
    for pos, idx in enumerate(order):
        positions[idx] = pos
    return RankedExplanation(
        concept_names=names,
        raw_scores=scores,
        rank_scores=positions / k,
        positions=positions,
    )


def _position_map(r: RankedExplanation) -> dict[str, int]:
    return {name: int(p) for name, p in zip(r.concept_names, r.positions)}


def _require_same_names(r1: RankedExplanation, r2: RankedExplanation) -> None:
    if set(r1.concept_names) != set(r2.concept_names):
        raise ValidationError("explanations cover different concept sets")


def topk_abs_diff(r1: RankedExplanation, r2: RankedExplanation, k: int) -> float:
    """Mean |rank difference| over the k top-ranked concepts of r1."""
    _require_same_names(r1, r2)
    k = min(k, r1.n_concepts)
    if k < 1:
        raise ValidationError("k must be at least 1")
    pos2 = _position_map(r2)
    top = r1.ordered_names()[:k]
    total = sum(abs(_position_map(r1)[name] - pos2[name]) for name in top)
    return total / (k * r1.n_concepts)


def _count_inversions(seq: list[int]) -> int:
    """Merge-sort inversion count; O(n log n)."""
    if len(seq) < 2:
        return 0
    mid = len(seq) // 2
    left, right = seq[:mid], seq[mid:]
    count = _count_inversions(left) + _count_inversions(right)
    merged = []
    i = j = 0
    while i < len(left) and j < len(right):
        if left[i] <= right[j]:
            merged.append(left[i])
            i += 1
        else:
            merged.append(right[j])
            j += 1
            count += len(left) - i
    seq[:] = merged + left[i:] + right[j:]
    return count


def kendall_tau_distance(
    r1: RankedExplanation, r2: RankedExplanation, restrict=None
) -> float:
    """Discordant pairs / C(n, 2) over an optional restricted concept set."""
    if restrict is None:
        _require_same_names(r1, r2)
        names = set(r1.concept_names)
    else:
        names = set(restrict) & set(r1.concept_names) & set(r2.concept_names)
    n = len(names)
    if n < 2:
        return 0.0
    pos1, pos2 = _position_map(r1), _position_map(r2)
    by_first = sorted(names, key=lambda nm: pos1[nm])
    seq = [pos2[nm] for nm in by_first]
    discordant = _count_inversions(seq)
    return discordant / (n * (n - 1) // 2)


def jaccard_topk(u1, u2, k: int) -> float:
    """Jaccard similarity of the top-k index sets of two score vectors.

    Top-k is by descending value, ties broken by ascending index.
    """
    u1 = np.asarray(u1, dtype=np.float64)
    u2 = np.asarray(u2, dtype=np.float64)
    if u1.shape != u2.shape:
        raise ValidationError("vectors must have equal length")
    k = min(k, u1.shape[0])
    if k < 1:
        raise ValidationError("k must be at least 1")

    def topset(u):
        order = sorted(range(u.shape[0]), key=lambda i: (-u[i], i))
        return set(order[:k])

    s1, s2 = topset(u1), topset(u2)
    return len(s1 & s2) / len(s1 | s2)


def uncertainty_cos_sim(estimated_eps, error_rate) -> float:
    """Cosine similarity between an estimated and a reference noise vector."""
    u = np.asarray(estimated_eps, dtype=np.float64)
    v = np.asarray(error_rate, dtype=np.float64)
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise ValidationError("cosine similarity undefined for zero vectors")
    return float(u @ v / (nu * nv))


def drift(rank_a: RankedExplanation, rank_b: RankedExplanation) -> float:
    """Mean |rank difference| over concepts salient in either explanation.

    Salient means nonzero raw score.  Both explanations must cover the same
    concept universe; the averaging restriction is part of the metric.
    """
    _require_same_names(rank_a, rank_b)
    pos_a, pos_b = _position_map(rank_a), _position_map(rank_b)
    raw_b = dict(zip(rank_b.concept_names, rank_b.raw_scores))
    salient = [
        nm
        for nm, raw in zip(rank_a.concept_names, rank_a.raw_scores)
        if raw != 0.0 or raw_b[nm] != 0.0
    ]
    if not salient:
        return 0.0
    total = sum(abs(pos_a[nm] - pos_b[nm]) for nm in salient)
    return total / (len(salient) * rank_a.n_concepts)
