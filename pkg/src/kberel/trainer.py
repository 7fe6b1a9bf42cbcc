"""Stochastic training with subject/object/relation corruption.

TransE minimises the margin loss ``[gamma + d(pos) - d(neg)]_+`` where ``d``
is the translation distance. DistMult and ComplEx minimise the logistic
loss ``softplus(-y * score)`` plus an L2 penalty on the rows involved.

Updates are sparse: a step touches only the embedding rows named by the
triples in the batch. Within a batch, gradients of repeated rows are summed
before the optimizer is applied, so a batch of one pair reproduces the
single-pair step exactly.
"""

from __future__ import annotations

import json
import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .errors import ConfigError, ModelKindError, NumericalError, SamplingError
from .kg import KnowledgeBase, Triple
from .models import ModelKind, ModelParams, Norm, grad_rows, score_rows, save_checkpoint

log = logging.getLogger(__name__)

MAX_FILTER_ATTEMPTS = 100


@dataclass
class TrainConfig:
    model_kind: ModelKind = ModelKind.TRANSE
    K: int = 100
    norm: Norm = Norm.L1
    margin: float = 1.0
    lr: float | None = None
    optimizer: str | None = None
    epochs: int = 1000
    batch_size: int = 100
    negatives: int | None = None
    corruption_weights: tuple = (1.0, 1.0, 1.0)
    l2: float = 1e-3
    seed: int = 0
    normalize_entities: bool = True
    filtered_negatives: bool = False
    early_stopping: bool = False
    workers: int = 1

    def __post_init__(self):
        self.model_kind = ModelKind.parse(self.model_kind)
        self.norm = Norm.parse(self.norm)
        transe = self.model_kind is ModelKind.TRANSE
        if self.optimizer is None:
            self.optimizer = "sgd" if transe else "adagrad"
        self.optimizer = str(self.optimizer).lower()
        if self.lr is None:
            self.lr = 0.01 if self.optimizer == "sgd" else 0.05
        if self.negatives is None:
            self.negatives = 1 if transe else 5
        self.corruption_weights = tuple(float(w) for w in self.corruption_weights)
        self.validate()

    def validate(self):
        if self.K < 1:
            raise ConfigError("K must be >= 1")
        if not self.margin > 0:
            raise ConfigError("margin must be > 0")
        if not self.lr > 0:
            raise ConfigError("learning rate must be > 0")
        if self.optimizer not in ("sgd", "adagrad"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")
        if self.epochs < 0 or self.batch_size < 1 or self.negatives < 1:
            raise ConfigError("epochs must be >= 0, batch size and negatives >= 1")
        w = self.corruption_weights
        if len(w) != 3 or min(w) < 0 or sum(w) <= 0:
            raise ConfigError("corruption weights must be three nonnegative numbers, not all zero")
        if self.l2 < 0:
            raise ConfigError("l2 must be >= 0")
        if self.early_stopping:
            raise ConfigError("early stopping is reserved and not available")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["model_kind"] = self.model_kind.value
        d["norm"] = self.norm.value
        d["corruption_weights"] = list(self.corruption_weights)
        return d

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]


@dataclass
class TrainReport:
    epoch_losses: list = field(default_factory=list)
    wall_time: float = 0.0
    checkpoint: str | None = None
    seed: int = 0
    config: dict = field(default_factory=dict)

    def to_json(self, include_time: bool = False) -> str:
        d = {
            "epoch_losses": self.epoch_losses,
            "epochs": len(self.epoch_losses),
            "checkpoint": self.checkpoint,
            "seed": self.seed,
            "config": self.config,
        }
        if include_time:
            d["wall_time"] = self.wall_time
        return json.dumps(d, indent=2, sort_keys=True) + "\n"


# -- initialisation -------------------------------------------------------

def normalize_rows(table: np.ndarray) -> None:
    norms = np.sqrt((table * table).sum(axis=1, keepdims=True))
    np.divide(table, norms, out=table, where=norms > 0)


def init_params(kind, K: int, n: int, m: int, seed: int, norm=Norm.L1) -> ModelParams:
    """Uniform ``[-6/sqrt(K), 6/sqrt(K)]`` entries; TransE entity rows are unit-normed."""
    kind = ModelKind.parse(kind)
    if K < 1:
        raise ConfigError("K must be >= 1")
    width = 2 * K if kind is ModelKind.COMPLEX else K
    bound = 6.0 / np.sqrt(K)
    rng = np.random.default_rng(seed)
    entity = rng.uniform(-bound, bound, size=(n, width))
    relation = rng.uniform(-bound, bound, size=(m, width))
    if kind is ModelKind.TRANSE:
        normalize_rows(entity)
    return ModelParams(kind, K, entity, relation, norm, seed)


# -- negative sampling ----------------------------------------------------

def _slot_probabilities(weights, n, m):
    w = np.array(weights, dtype=np.float64)
    if n < 2:
        w[0] = w[1] = 0.0
    if m < 2:
        w[2] = 0.0
    total = w.sum()
    if total <= 0:
        raise SamplingError("no slot can be corrupted with the given weights and vocabulary sizes")
    return w / total


def _replace(values, size, rng):
    # uniform over [0, size) minus the original value
    x = rng.integers(0, size - 1, size=len(values)) if len(values) else np.empty(0, np.int64)
    return x + (x >= values)


def sample_negatives(pos: np.ndarray, n: int, m: int, weights=(1, 1, 1), rng=None,
                     known=None) -> np.ndarray:
    """Corrupt exactly one slot of each row of ``pos`` (an ``(N, 3)`` array).

    Slots are picked with probabilities proportional to ``weights`` given in
    (subject, object, relation) order; the replacement is uniform over the
    values other than the original. With ``known`` (a set of triples) each
    corrupted triple found in it is redrawn, up to 100 attempts.
    """
    rng = np.random.default_rng() if rng is None else rng
    pos = np.asarray(pos, dtype=np.int64).reshape(-1, 3)
    p = _slot_probabilities(weights, n, m)
    neg = pos.copy()
    pending = np.arange(len(pos))
    for attempt in range(MAX_FILTER_ATTEMPTS):
        neg[pending] = pos[pending]
        # slot 0/1/2 = subject/object/relation -> columns 0/2/1
        slot = rng.choice(3, size=len(pending), p=p)
        col = np.array([0, 2, 1])[slot]
        sizes = np.where(col == 1, m, n)
        cur = pos[pending, col]
        repl = np.empty(len(pending), dtype=np.int64)
        for size in np.unique(sizes):
            sel = sizes == size
            repl[sel] = _replace(cur[sel], size, rng)
        neg[pending, col] = repl
        if known is None:
            return neg
        hit = np.array([tuple(map(int, neg[i])) in known for i in pending], dtype=bool)
        pending = pending[hit]
        if not len(pending):
            return neg
    raise SamplingError(f"could not draw an unseen negative within {MAX_FILTER_ATTEMPTS} attempts")


def sample_negative(pos, kb: KnowledgeBase, weights=(1, 1, 1), rng=None, filtered=False) -> Triple:
    """Single-triple form of :func:`sample_negatives` against ``kb``'s vocabulary."""
    known = set(kb.train) if filtered else None
    neg = sample_negatives(np.array([tuple(pos)]), kb.n, kb.m, weights, rng, known)[0]
    return Triple(*map(int, neg))


# -- optimizers -----------------------------------------------------------

class SGD:
    def __init__(self, lr):
        self.lr = lr

    def apply(self, params, table, rows, grads):
        getattr(params, table)[rows] -= self.lr * grads


class Adagrad:
    """Row-sparse Adagrad with per-coordinate accumulators."""

    def __init__(self, lr, eps=1e-10):
        self.lr = lr
        self.eps = eps
        self.state = {}

    def apply(self, params, table, rows, grads):
        target = getattr(params, table)
        acc = self.state.get(table)
        if acc is None or acc.shape != target.shape:
            acc = self.state[table] = np.zeros_like(target)
        g2 = acc[rows] + grads * grads
        acc[rows] = g2
        target[rows] -= self.lr * grads / (np.sqrt(g2) + self.eps)


def make_optimizer(name, lr):
    name = str(name).lower()
    if name == "sgd":
        return SGD(lr)
    if name == "adagrad":
        return Adagrad(lr)
    raise ConfigError(f"unknown optimizer {name!r}")


def _coalesce(rows, grads):
    uniq, inv = np.unique(rows, return_inverse=True)
    out = np.zeros((len(uniq), grads.shape[1]))
    np.add.at(out, inv.reshape(-1), grads)
    return uniq, out


def _apply(params, opt, ent_rows, ent_grads, rel_rows, rel_grads):
    if len(ent_rows):
        opt.apply(params, "entity", *_coalesce(ent_rows, ent_grads))
    if len(rel_rows):
        opt.apply(params, "relation", *_coalesce(rel_rows, rel_grads))


# -- steps ----------------------------------------------------------------

def _gather(params, t):
    E, W = params.entity, params.relation
    return E[t[:, 0]], W[t[:, 1]], E[t[:, 2]]


def margin_batch(params: ModelParams, pos, neg, margin: float, opt) -> float:
    """Summed hinge over aligned ``pos``/``neg`` rows; one sparse update."""
    if params.kind is not ModelKind.TRANSE:
        raise ModelKindError("margin loss applies to TransE parameters")
    pos = np.asarray(pos, dtype=np.int64).reshape(-1, 3)
    neg = np.asarray(neg, dtype=np.int64).reshape(-1, 3)
    ps, pr, po = _gather(params, pos)
    ns, nr, no = _gather(params, neg)
    d_pos = -score_rows(params.kind, params.norm, ps, pr, po)
    d_neg = -score_rows(params.kind, params.norm, ns, nr, no)
    hinge = margin + d_pos - d_neg
    active = hinge > 0
    if not active.any():
        return 0.0
    pos, neg = pos[active], neg[active]
    # distance gradients are the negated score gradients
    gps, gpr, gpo = grad_rows(params.kind, params.norm, ps[active], pr[active], po[active])
    gns, gnr, gno = grad_rows(params.kind, params.norm, ns[active], nr[active], no[active])
    ent_rows = np.concatenate([pos[:, 0], pos[:, 2], neg[:, 0], neg[:, 2]])
    ent_grads = np.concatenate([-gps, -gpo, gns, gno])
    rel_rows = np.concatenate([pos[:, 1], neg[:, 1]])
    rel_grads = np.concatenate([-gpr, gnr])
    _apply(params, opt, ent_rows, ent_grads, rel_rows, rel_grads)
    return float(hinge[active].sum())


def logistic_batch(params: ModelParams, triples, labels, l2: float, opt) -> float:
    """Summed ``softplus(-y*score) + l2*(|e_s|^2 + |w_r|^2 + |e_o|^2)``; one sparse update."""
    if params.kind is ModelKind.TRANSE:
        raise ModelKindError("logistic loss applies to DistMult/ComplEx parameters")
    t = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
    y = np.asarray(labels, dtype=np.float64).reshape(-1)
    es, wr, eo = _gather(params, t)
    sc = score_rows(params.kind, params.norm, es, wr, eo)
    reg = (es * es).sum(axis=1) + (wr * wr).sum(axis=1) + (eo * eo).sum(axis=1)
    loss = np.logaddexp(0.0, -y * sc) + l2 * reg
    # d softplus(-y s)/ds = -y * sigmoid(-y s)
    coef = (-y * _sigmoid(-y * sc))[:, None]
    gs, gr, go = grad_rows(params.kind, params.norm, es, wr, eo)
    ent_rows = np.concatenate([t[:, 0], t[:, 2]])
    ent_grads = np.concatenate([coef * gs + 2 * l2 * es, coef * go + 2 * l2 * eo])
    _apply(params, opt, ent_rows, ent_grads, t[:, 1], coef * gr + 2 * l2 * wr)
    return float(loss.sum())


def _sigmoid(x):
    return np.exp(-np.logaddexp(0.0, -x))


def margin_step(params, pos, neg, margin=1.0, lr=0.01, opt=None) -> float:
    """One margin-loss step on a single (positive, negative) pair; returns the hinge."""
    return margin_batch(params, [tuple(pos)], [tuple(neg)], margin, opt or SGD(lr))


def logistic_step(params, t, label, lr=0.05, l2=0.0, opt=None) -> float:
    """One logistic-loss step on a single labelled triple; returns its loss."""
    if label not in (1, -1):
        raise ValueError("label must be +1 or -1")
    return logistic_batch(params, [tuple(t)], [label], l2, opt or SGD(lr))


def logistic_loss(params, t, label, l2=0.0) -> float:
    """Loss of :func:`logistic_step` without updating anything."""
    es, wr, eo = _gather(params, np.array([tuple(t)]))
    sc = score_rows(params.kind, params.norm, es, wr, eo)[0]
    reg = (es * es).sum() + (wr * wr).sum() + (eo * eo).sum()
    return float(np.logaddexp(0.0, -label * sc) + l2 * reg)


# -- training loop --------------------------------------------------------

def _run_batch(params, cfg, opt, pos, rng, n, m, known):
    reps = np.repeat(pos, cfg.negatives, axis=0)
    neg = sample_negatives(reps, n, m, cfg.corruption_weights, rng, known)
    if params.kind is ModelKind.TRANSE:
        return margin_batch(params, reps, neg, cfg.margin, opt), len(reps)
    triples = np.concatenate([pos, neg])
    labels = np.concatenate([np.ones(len(pos)), -np.ones(len(neg))])
    return logistic_batch(params, triples, labels, cfg.l2, opt), len(triples)


def train(kb: KnowledgeBase, config: TrainConfig, params: ModelParams | None = None,
          progress=None, checkpoint_dir=None):
    """Train on ``kb.train``; return ``(report, params)``.

    ``progress(epoch, mean_loss)`` is called after each epoch. With
    ``config.workers > 1`` batches are spread over threads that update the
    shared tables without locking; results are then not reproducible.
    """
    if not kb.train:
        raise ConfigError("training split is empty")
    config.validate()
    if params is None:
        params = init_params(config.model_kind, config.K, kb.n, kb.m, config.seed, config.norm)
    params.check_binding(kb.n, kb.m)
    rng = np.random.default_rng(config.seed)
    opt = make_optimizer(config.optimizer, config.lr)
    known = set(kb.train) if config.filtered_negatives else None
    data = kb.array("train")
    bs = config.batch_size
    starts = list(range(0, len(data), bs))
    report = TrainReport(seed=config.seed, config=config.to_dict())
    t0 = time.perf_counter()

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(data))
        if config.workers == 1:
            total = count = 0.0
            for b, a in enumerate(starts, start=1):
                loss, k = _run_batch(params, config, opt, data[order[a:a + bs]], rng, kb.n, kb.m, known)
                if not np.isfinite(loss) or not params.is_finite():
                    raise NumericalError(epoch, b, f"batch loss {loss}")
                total += loss
                count += k
        else:
            total, count = _parallel_epoch(params, config, opt, data, order, starts, epoch, kb, known)
        if params.kind is ModelKind.TRANSE and config.normalize_entities:
            normalize_rows(params.entity)
        mean = total / count
        report.epoch_losses.append(mean)
        if progress is not None:
            progress(epoch, mean)

    report.wall_time = time.perf_counter() - t0
    if checkpoint_dir is not None:
        report.checkpoint = str(save_checkpoint(params, checkpoint_dir))
    return report, params


def _parallel_epoch(params, config, opt, data, order, starts, epoch, kb, known):
    bs = config.batch_size
    seeds = np.random.default_rng([config.seed, epoch]).integers(0, 2**63, size=config.workers)
    lock = threading.Lock()
    totals = [0.0, 0.0]

    def work(w):
        rng = np.random.default_rng(seeds[w])
        for b in range(w, len(starts), config.workers):
            a = starts[b]
            loss, k = _run_batch(params, config, opt, data[order[a:a + bs]], rng, kb.n, kb.m, known)
            if not np.isfinite(loss):
                raise NumericalError(epoch, b + 1, f"batch loss {loss}")
            with lock:
                totals[0] += loss
                totals[1] += k

    with ThreadPoolExecutor(config.workers) as pool:
        for fut in [pool.submit(work, w) for w in range(config.workers)]:
            fut.result()
    if not params.is_finite():
        raise NumericalError(epoch, len(starts))
    return totals[0], totals[1]


def write_report(report: TrainReport, path) -> Path:
    path = Path(path)
    path.write_text(report.to_json(), encoding="utf-8")
    return path
