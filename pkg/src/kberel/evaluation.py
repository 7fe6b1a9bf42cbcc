"""Relation prediction: rank the true relation of ``(s, ?, o)`` among all relations.

Two regimes are reported. *Raw* ranks against every relation. *Filter*
first removes the other relations known to hold for the pair in any split.

Ties are resolved by a policy:

``mean``         ``1 + #greater + #ties / 2``
``optimistic``   ``1 + #greater``
``pessimistic``  ``1 + #greater + #ties``

where ``#ties`` excludes the true relation itself. Hits@1 requires a rank
of exactly 1, so a two-way tie at the top scores zero under ``mean``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .kg import FilterIndex, KnowledgeBase, Triple, build_filter_index
from .models import ModelParams, score_all_relations, score_pairs

TIE_POLICIES = ("mean", "optimistic", "pessimistic")
REGIMES = ("raw", "filter")


@dataclass(frozen=True)
class RankResult:
    triple: Triple
    raw_rank: float
    filtered_rank: float


@dataclass
class EvalReport:
    mrr_raw: float
    mrr_filtered: float
    hits1_raw: float
    hits1_filtered: float
    ranks: list = field(default_factory=list)
    count: int = 0
    split: str = "test"
    tie_policy: str = "mean"
    model: str = ""
    dataset: str = ""

    def to_dict(self, with_ranks=True) -> dict:
        d = {
            "dataset": self.dataset,
            "model": self.model,
            "split": self.split,
            "tie_policy": self.tie_policy,
            "count": self.count,
            "mrr_filtered": self.mrr_filtered,
            "mrr_raw": self.mrr_raw,
            "hits1_filtered": self.hits1_filtered,
            "hits1_raw": self.hits1_raw,
        }
        if with_ranks:
            d["ranks"] = [[*r.triple, r.raw_rank, r.filtered_rank] for r in self.ranks]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    def tsv_line(self) -> str:
        """dataset, model, MRR-filter, MRR-raw, Hits@1-filter, Hits@1-raw."""
        vals = (self.mrr_filtered, self.mrr_raw, self.hits1_filtered, self.hits1_raw)
        return "\t".join([self.dataset, self.model] + [f"{v:.6f}" for v in vals])


def _check_policy(tie_policy):
    if tie_policy not in TIE_POLICIES:
        raise ConfigError(f"unknown tie policy {tie_policy!r}; expected one of {TIE_POLICIES}")


def rank_from_scores(scores, true_r: int, excluded=(), tie_policy: str = "mean") -> float:
    """Rank of ``scores[true_r]`` among candidates not in ``excluded``."""
    _check_policy(tie_policy)
    scores = np.asarray(scores, dtype=np.float64)
    mask = np.ones(len(scores), dtype=bool)
    for r in excluded:
        mask[r] = False
    mask[true_r] = False
    target = scores[true_r]
    greater = int(np.count_nonzero(mask & (scores > target)))
    ties = int(np.count_nonzero(mask & (scores == target)))
    return _combine(greater, ties, tie_policy)


def _combine(greater, ties, tie_policy):
    if tie_policy == "optimistic":
        return 1.0 + greater
    if tie_policy == "pessimistic":
        return 1.0 + greater + ties
    return 1.0 + greater + ties / 2.0


def rank_relation(params: ModelParams, filter_index: FilterIndex | None, t, regime: str = "filter",
                  tie_policy: str = "mean") -> float:
    regime = regime.lower()
    if regime not in REGIMES:
        raise ConfigError(f"unknown regime {regime!r}")
    s, r, o = t
    if not 0 <= r < params.m:
        raise IndexError(f"relation id {r} out of range (m={params.m})")
    scores = score_all_relations(params, s, o)
    excluded = filter_index[(s, o)] if regime == "filter" and filter_index is not None else ()
    return rank_from_scores(scores, r, excluded, tie_policy)


def _ranks_matrix(scores, true_r, filt_mask, tie_policy):
    n = len(true_r)
    rows = np.arange(n)
    target = scores[rows, true_r][:, None]
    cand = np.ones_like(scores, dtype=bool)
    cand[rows, true_r] = False
    gt = scores > target
    eq = scores == target
    raw = _combine((gt & cand).sum(axis=1), (eq & cand).sum(axis=1), tie_policy)
    cand &= ~filt_mask
    filt = _combine((gt & cand).sum(axis=1), (eq & cand).sum(axis=1), tie_policy)
    return raw.astype(np.float64), filt.astype(np.float64)


def evaluate_relation_prediction(params: ModelParams, kb: KnowledgeBase, split: str = "test",
                                 tie_policy: str = "mean", filter_index: FilterIndex | None = None,
                                 dataset: str = "", chunk: int = 2048) -> EvalReport:
    """Rank every triple of ``split`` and aggregate MRR and Hits@1 in both regimes."""
    _check_policy(tie_policy)
    if split not in ("valid", "test", "train"):
        raise ConfigError(f"unknown split {split!r}")
    params.check_binding(kb.n, kb.m)
    if filter_index is None:
        filter_index = build_filter_index(kb)
    data = kb.array(split)
    raw = np.empty(len(data))
    filt = np.empty(len(data))
    for a in range(0, len(data), chunk):
        block = data[a:a + chunk]
        scores = score_pairs(params, block[:, 0], block[:, 2])
        mask = np.zeros(scores.shape, dtype=bool)
        for i, (s, _, o) in enumerate(block):
            rels = filter_index[(int(s), int(o))]
            if rels:
                mask[i, list(rels)] = True
        raw[a:a + chunk], filt[a:a + chunk] = _ranks_matrix(scores, block[:, 1], mask, tie_policy)

    ranks = [RankResult(Triple(*map(int, t)), float(x), float(y)) for t, x, y in zip(data, raw, filt)]
    count = len(data)

    def mean(v):
        # plain left-to-right accumulation in triple order
        return float(sum(v.tolist()) / count) if count else 0.0

    return EvalReport(
        mrr_raw=mean(1.0 / raw),
        mrr_filtered=mean(1.0 / filt),
        hits1_raw=mean((raw <= 1.0).astype(np.float64)),
        hits1_filtered=mean((filt <= 1.0).astype(np.float64)),
        ranks=ranks,
        count=count,
        split=split,
        tie_policy=tie_policy,
        model=params.kind.value,
        dataset=dataset,
    )
