"""Ranking-quality and reproducibility metrics.

All metrics are pure functions over scores and labels. Score ties are
broken deterministically by ascending item id before any rank-based
metric, so repeated evaluation is stable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np

from .data import Dataset, QueryGroup
from .distill import BoostRule, Model
from .errors import InputError
from .nn import listwise_softmax


@dataclass
class RankingMetricsReport:
    ndcg_at_5: float
    ndcg_at_10: float
    ndcg_full: float
    objective_exposure_at_10: list[float]
    boosted_exposure_at_10: float | None
    query_count: int

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SxSReport:
    change_rate: float
    mean_tau: float
    pd: float
    tau_threshold: float
    query_count: int

    def to_dict(self) -> dict:
        return asdict(self)


def rank_order(scores: np.ndarray, item_ids: np.ndarray | None = None) -> np.ndarray:
    """Indices in descending-score order; ties by ascending item id."""
    scores = np.asarray(scores, dtype=np.float64)
    n = scores.shape[0]
    ids = np.arange(n) if item_ids is None else np.asarray(item_ids)
    order = sorted(range(n), key=lambda j: (-scores[j], ids[j]))
    return np.array(order, dtype=np.int64)


def ndcg_at_k(scores: np.ndarray, primary_labels: np.ndarray, k: int | None) -> float:
    """Binary-relevance NDCG; all-zero labels give 0 by convention.

    k=None means the full list.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(primary_labels, dtype=np.float64)
    if scores.shape != labels.shape or scores.ndim != 1 or scores.size < 1:
        raise InputError("scores and labels must be matching 1-d vectors")
    n = scores.size
    if k is None:
        k = n
    if k < 1:
        raise InputError(f"k must be >= 1, got {k}")
    k = min(k, n)
    order = rank_order(scores)
    dcg = 0.0
    for rank, j in enumerate(order[:k], start=1):
        if labels[j] > 0:
            dcg += 1.0 / math.log2(rank + 1)
    relevant = int((labels > 0).sum())
    if relevant == 0:
        return 0.0
    ideal = sum(1.0 / math.log2(r + 1) for r in range(1, min(relevant, k) + 1))
    return dcg / ideal


def exposure_rate(scores: np.ndarray, flags: np.ndarray, k: int) -> float:
    """Fraction of top-k positions held by flagged items; k clamps to n."""
    scores = np.asarray(scores, dtype=np.float64)
    flags = np.asarray(flags, dtype=bool)
    if scores.shape != flags.shape:
        raise InputError("scores and flags must have matching shapes")
    if k < 1:
        raise InputError(f"k must be >= 1, got {k}")
    k = min(k, scores.size)
    order = rank_order(scores)
    return float(flags[order[:k]].sum()) / k


def serve_with_boost(
    model: Model, group: QueryGroup, rule: BoostRule, gamma: float
) -> np.ndarray:
    """Serving-time score boost: add gamma to items matching the rule."""
    scores = model.score_group(group)
    return scores + gamma * rule.match_mask(group)


def kendall_tau(ranking_a, ranking_b) -> float:
    """(concordant - discordant) / (n choose 2); no-tie formula.

    Inputs are two orderings (sequences of the same item identifiers, best
    first).
    """
    a = list(ranking_a)
    b = list(ranking_b)
    if len(a) != len(b):
        raise InputError("rankings have different lengths")
    if set(a) != set(b):
        raise InputError("rankings must be permutations of the same items")
    n = len(a)
    if n < 2:
        return 1.0
    pos_b = {item: i for i, item in enumerate(b)}
    # Positions in b of items taken in a's order; tau counts pair inversions.
    seq = [pos_b[item] for item in a]
    concordant = discordant = 0
    for i in range(n):
        for j in range(i + 1, n):
            if seq[i] < seq[j]:
                concordant += 1
            else:
                discordant += 1
    return (concordant - discordant) / (n * (n - 1) / 2)


def prediction_difference(preds_a, preds_b) -> float:
    """Mean of |a - b| / ((a + b) / 2) over item-level predictions."""
    a = np.asarray(preds_a, dtype=np.float64)
    b = np.asarray(preds_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1 or a.size < 1:
        raise InputError("predictions must be matching nonempty 1-d vectors")
    if (a <= 0).any() or (b <= 0).any():
        raise InputError("predictions must be strictly positive")
    terms = np.abs(a - b) / ((a + b) / 2.0)
    return float(math.fsum(terms) / a.size)


def _group_probabilities(model: Model, group: QueryGroup) -> np.ndarray:
    return listwise_softmax(model.score_group(group), 1.0)


def sxs_change_rate(
    model_a: Model,
    model_b: Model,
    dataset: Dataset,
    tau_threshold: float = 0.02,
) -> SxSReport:
    """Side-by-side comparison of two models over a dataset.

    A query counts as changed when the normalized Kendall distance
    (1 - tau) / 2 between the two induced rankings exceeds tau_threshold.
    PD is computed over per-item softmax probabilities (positive by
    construction), concatenated across all queries.
    """
    if not dataset.groups:
        raise InputError("dataset is empty")
    changed = 0
    taus = []
    probs_a = []
    probs_b = []
    for g in dataset.groups:
        ids = g.item_ids()
        sa = model_a.score_group(g)
        sb = model_b.score_group(g)
        ra = ids[rank_order(sa, ids)]
        rb = ids[rank_order(sb, ids)]
        tau = kendall_tau(ra, rb)
        taus.append(tau)
        if (1.0 - tau) / 2.0 > tau_threshold:
            changed += 1
        probs_a.append(listwise_softmax(sa, 1.0))
        probs_b.append(listwise_softmax(sb, 1.0))
    pd = prediction_difference(np.concatenate(probs_a), np.concatenate(probs_b))
    return SxSReport(
        change_rate=changed / len(dataset.groups),
        mean_tau=float(math.fsum(taus) / len(taus)),
        pd=pd,
        tau_threshold=tau_threshold,
        query_count=len(dataset.groups),
    )


def ranking_metrics_report(
    scores_by_query: dict[int, np.ndarray],
    dataset: Dataset,
    boost_rule: BoostRule | None = None,
    exposure_k: int = 10,
) -> RankingMetricsReport:
    """Aggregate NDCG and exposure rates over a scored dataset.

    Per-objective exposure flags an item when its label for that objective
    is present and positive. Boosted exposure uses the rule's predicate.
    """
    if not dataset.groups:
        raise InputError("dataset is empty")
    ndcg5, ndcg10, ndcgf = [], [], []
    obj_exp = [[] for _ in range(dataset.K)]
    boost_exp = []
    for g in dataset.groups:
        s = scores_by_query[g.query_id]
        labels = g.primary_labels()
        ndcg5.append(ndcg_at_k(s, labels, 5))
        ndcg10.append(ndcg_at_k(s, labels, 10))
        ndcgf.append(ndcg_at_k(s, labels, None))
        for k in range(dataset.K):
            vals, mask = g.objective_labels(k)
            flags = mask & (vals > 0)
            obj_exp[k].append(exposure_rate(s, flags, exposure_k))
        if boost_rule is not None:
            boost_exp.append(exposure_rate(s, boost_rule.match_mask(g), exposure_k))
    mean = lambda xs: float(math.fsum(xs) / len(xs))
    return RankingMetricsReport(
        ndcg_at_5=mean(ndcg5),
        ndcg_at_10=mean(ndcg10),
        ndcg_full=mean(ndcgf),
        objective_exposure_at_10=[mean(e) for e in obj_exp],
        boosted_exposure_at_10=mean(boost_exp) if boost_exp else None,
        query_count=len(dataset.groups),
    )


def mean_boosted_exposure(
    scores_by_query: dict[int, np.ndarray],
    dataset: Dataset,
    rule: BoostRule,
    k: int = 10,
) -> float:
    vals = [
        exposure_rate(scores_by_query[g.query_id], rule.match_mask(g), k)
        for g in dataset.groups
    ]
    return float(math.fsum(vals) / len(vals))


def mean_ndcg(
    scores_by_query: dict[int, np.ndarray], dataset: Dataset, k: int | None = 10
) -> float:
    vals = [
        ndcg_at_k(scores_by_query[g.query_id], g.primary_labels(), k)
        for g in dataset.groups
    ]
    return float(math.fsum(vals) / len(vals))
