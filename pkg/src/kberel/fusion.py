"""Late fusion of relation-extraction (RE) bag scores with KBE scores.

For each entity pair the RE model supplies a score per relation plus the
``NA`` ("no relation") marker. The prediction is the argmax over all keys.
A non-NA prediction is re-scored as::

    alpha * s_re + (1 - alpha) * f_kbe

where ``f_kbe`` is the KBE score of the predicted relation, normalised over
the pair's relation scores. ``alpha = 1`` reproduces the RE ranking.
Geometric, harmonic and softmax variants, and wider re-scoring scopes, are
selected through :class:`FusionConfig`.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, FormatError
from .kg import Vocab
from .models import ModelParams, score_all_relations

NA = "NA"
STRATEGIES = ("weighted", "geometric", "harmonic", "softmax-weighted")
SCOPES = ("top-nonNA", "all-nonNA", "all")
NORMALIZATIONS = ("minmax", "sigmoid", "none")
MIDPOINT = 0.5


@dataclass(frozen=True)
class REScoreRow:
    s: str
    o: str
    scores: dict


@dataclass(frozen=True)
class FusionConfig:
    alpha: float = 1.0
    strategy: str = "weighted"
    scope: str = "top-nonNA"
    kbe_normalization: str = "minmax"

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ConfigError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {self.strategy!r}; expected one of {STRATEGIES}")
        if self.scope not in SCOPES:
            raise ConfigError(f"unknown scope {self.scope!r}; expected one of {SCOPES}")
        if self.kbe_normalization not in NORMALIZATIONS:
            raise ConfigError(f"unknown normalization {self.kbe_normalization!r}")


@dataclass(frozen=True)
class RankedPrediction:
    s: str
    o: str
    relation: str
    score: float

    def key(self):
        return (self.s, self.o, self.relation)


# -- RE score files -------------------------------------------------------

def _check_row(row, where=""):
    if not row.scores:
        raise FormatError(f"{where}empty score map for pair ({row.s}, {row.o})")
    if NA not in row.scores:
        raise FormatError(f"{where}score map for pair ({row.s}, {row.o}) lacks {NA!r}")
    for v in row.scores.values():
        if not math.isfinite(v):
            raise FormatError(f"{where}non-finite score for pair ({row.s}, {row.o})")


def parse_re_rows(lines, source="<input>") -> list:
    """Parse JSON Lines of ``{"s": .., "o": .., "scores": {..}}``."""
    rows, seen = [], set()
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        where = f"{source}:{line_no}: "
        try:
            obj = json.loads(line)
            row = REScoreRow(str(obj["s"]), str(obj["o"]),
                             {str(k): float(v) for k, v in obj["scores"].items()})
        except (ValueError, KeyError, TypeError, AttributeError) as exc:
            raise FormatError(f"{where}malformed record ({exc})") from None
        _check_row(row, where)
        if (row.s, row.o) in seen:
            raise FormatError(f"{where}duplicate pair ({row.s}, {row.o})")
        seen.add((row.s, row.o))
        rows.append(row)
    return rows


def load_re_scores(path) -> list:
    with open(path, encoding="utf-8") as fh:
        return parse_re_rows(fh, str(path))


def load_gold(path) -> set:
    """Gold ``(s, o, relation)`` name triples from a TSV triple file."""
    gold = set()
    with open(path, encoding="utf-8", newline="") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\r\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise FormatError(f"{path}:{line_no}: expected 3 tab-separated fields")
            s, r, o = parts
            gold.add((s, o, r))
    return gold


# -- scoring primitives ---------------------------------------------------

def predict_relation(scores: dict) -> str:
    """Argmax over all keys, NA included; ties go to the smallest name."""
    if not scores:
        raise FormatError("empty score map")
    return min(scores, key=lambda k: (-scores[k], k))


def normalize_kbe(scores, method: str = "minmax") -> np.ndarray:
    x = np.asarray(scores, dtype=np.float64)
    if x.size == 0:
        raise ValueError("cannot normalise an empty score list")
    if method == "minmax":
        lo, hi = x.min(), x.max()
        if hi == lo:
            return np.full_like(x, MIDPOINT)
        return (x - lo) / (hi - lo)
    if method == "sigmoid":
        return np.exp(-np.logaddexp(0.0, -x))
    if method == "none":
        return x.copy()
    raise ConfigError(f"unknown normalization {method!r}")


def softmax(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    z = np.exp(x - x.max())
    return z / z.sum()


def composite_score(s_re: float, f_kbe: float, config: FusionConfig) -> float:
    a = config.alpha
    b = 1.0 - a
    if config.strategy in ("weighted", "softmax-weighted"):
        return a * s_re + b * f_kbe
    if s_re < 0 or (b > 0 and f_kbe < 0):
        raise ValueError(f"{config.strategy} average needs nonnegative operands")
    if config.strategy == "geometric":
        return s_re ** a * (f_kbe ** b if b > 0 else 1.0)
    # harmonic; a zero-weight operand drops out, and 1/(1/x) is not always x
    if b == 0:
        return s_re
    if s_re == 0 or f_kbe == 0:
        return 0.0
    return 1.0 / (a / s_re + b / f_kbe)


def neutral_kbe(config: FusionConfig) -> float:
    """KBE plausibility given to NA and to relations unknown to the KB."""
    if config.strategy == "softmax-weighted" or config.kbe_normalization != "none":
        return MIDPOINT
    return 0.0


def kbe_vector(params: ModelParams, s: int, o: int, config: FusionConfig) -> np.ndarray:
    raw = score_all_relations(params, s, o)
    if config.strategy == "softmax-weighted":
        return softmax(raw)
    return normalize_kbe(raw, config.kbe_normalization)


# -- re-scoring -----------------------------------------------------------

def rescore(table, params: ModelParams, vocab: Vocab, config: FusionConfig):
    """Fuse every row of ``table`` and return ``(predictions, skipped)``.

    Rows whose entities are not in ``vocab`` are skipped and counted.
    Relations absent from the KB (and NA under scope ``all``) receive the
    neutral KBE value. Predictions are sorted by composite score, highest
    first, ties by ``(s, o, relation)``.
    """
    params.check_binding(vocab.n, vocab.m)
    preds, skipped = [], 0
    neutral = neutral_kbe(config)
    for row in table:
        _check_row(row)
        if not (vocab.has_entity(row.s) and vocab.has_entity(row.o)):
            skipped += 1
            continue
        kbe = kbe_vector(params, vocab.entity_id(row.s), vocab.entity_id(row.o), config)

        def f(rel):
            if rel != NA and vocab.has_relation(rel):
                return float(kbe[vocab.relation_id(rel)])
            return neutral

        if config.scope == "top-nonNA":
            top = predict_relation(row.scores)
            if top == NA:
                continue
            preds.append(RankedPrediction(row.s, row.o, top, composite_score(row.scores[top], f(top), config)))
            continue
        fused = {}
        for rel, v in row.scores.items():
            if rel == NA and config.scope == "all-nonNA":
                fused[rel] = v
            else:
                fused[rel] = composite_score(v, f(rel), config)
        top = predict_relation(fused)
        if top != NA:
            preds.append(RankedPrediction(row.s, row.o, top, fused[top]))
    preds.sort(key=lambda p: (-p.score, p.s, p.o, p.relation))
    return preds, skipped


def re_only_ranking(table) -> list:
    """Ranking from the RE scores alone (no KBE contribution)."""
    preds = []
    for row in table:
        top = predict_relation(row.scores)
        if top != NA:
            preds.append(RankedPrediction(row.s, row.o, top, row.scores[top]))
    preds.sort(key=lambda p: (-p.score, p.s, p.o, p.relation))
    return preds


# -- precision/recall -----------------------------------------------------

def precision_recall_curve(preds, gold) -> list:
    """One ``(recall, precision)`` point per prediction, in ranked order."""
    if not gold:
        raise ConfigError("gold set is empty")
    points = []
    correct = 0
    for k, p in enumerate(preds, start=1):
        if p.key() in gold:
            correct += 1
        points.append((correct / len(gold), correct / k))
    return points


def curve_auc(points) -> float:
    """Trapezoidal area under the (recall, precision) points as given."""
    if len(points) < 2:
        return 0.0
    r = np.array([p[0] for p in points])
    pr = np.array([p[1] for p in points])
    return float(np.sum(np.diff(r) * (pr[1:] + pr[:-1]) / 2.0))


def write_curve_csv(points, path) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["recall", "precision"])
        for r, p in points:
            writer.writerow([repr(float(r)), repr(float(p))])
    return path
