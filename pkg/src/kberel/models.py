"""TransE, DistMult and ComplEx scoring with analytic gradients.

All models follow one convention: a larger score means a more plausible
triple. TransE therefore returns the *negated* translation distance.

Parameter tables are ``float64`` arrays. ComplEx rows hold ``2K`` reals,
the ``K`` real parts followed by the ``K`` imaginary parts, and its score
conjugates the object embedding::

    Re(sum_k e_s[k] * w_r[k] * conj(e_o[k]))

Every scoring path funnels through :func:`score_rows`, which reduces over
the last axis of a broadcast array. Scalar and vectorised calls therefore
perform the same floating point operations in the same order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import BindingError, FormatError, ModelKindError


class ModelKind(str, Enum):
    TRANSE = "TransE"
    DISTMULT = "DistMult"
    COMPLEX = "ComplEx"

    @classmethod
    def parse(cls, value) -> "ModelKind":
        if isinstance(value, cls):
            return value
        for kind in cls:
            if str(value).lower() == kind.value.lower():
                return kind
        raise ModelKindError(f"unknown model kind {value!r}")


class Norm(str, Enum):
    L1 = "L1"
    L2 = "L2"

    @classmethod
    def parse(cls, value) -> "Norm":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).upper())
        except ValueError:
            raise ModelKindError(f"unknown norm {value!r}") from None


@dataclass
class ModelParams:
    kind: ModelKind
    K: int
    entity: np.ndarray
    relation: np.ndarray
    norm: Norm = Norm.L1
    seed: int | None = None

    def __post_init__(self):
        self.kind = ModelKind.parse(self.kind)
        self.norm = Norm.parse(self.norm)
        self.entity = np.ascontiguousarray(self.entity, dtype=np.float64)
        self.relation = np.ascontiguousarray(self.relation, dtype=np.float64)
        width = self.width
        for name, table in (("entity", self.entity), ("relation", self.relation)):
            if table.ndim != 2 or table.shape[1] != width:
                raise FormatError(f"{name} table has shape {table.shape}, expected (*, {width})")

    @property
    def width(self) -> int:
        """Stored reals per row."""
        return 2 * self.K if self.kind is ModelKind.COMPLEX else self.K

    @property
    def n(self) -> int:
        return self.entity.shape[0]

    @property
    def m(self) -> int:
        return self.relation.shape[0]

    def copy(self) -> "ModelParams":
        return ModelParams(self.kind, self.K, self.entity.copy(), self.relation.copy(), self.norm, self.seed)

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.entity).all() and np.isfinite(self.relation).all())

    def check_binding(self, n: int, m: int) -> None:
        if (self.n, self.m) != (n, m):
            raise BindingError(f"parameters cover n={self.n}, m={self.m} but vocabulary has n={n}, m={m}")


def score_rows(kind, norm, es, wr, eo) -> np.ndarray:
    """Scores for broadcast-compatible stacks of embedding rows.

    The last axis of each operand is the stored row; the result drops it.
    """
    if kind is ModelKind.TRANSE:
        d = (es + wr) - eo
        if norm is Norm.L1:
            return 0.0 - np.abs(d).sum(axis=-1)
        return 0.0 - np.sqrt((d * d).sum(axis=-1))
    # e_s * e_o first: exact s/o symmetry for DistMult, and ComplEx with zero
    # imaginary parts reproduces DistMult bit for bit
    if kind is ModelKind.DISTMULT:
        return ((es * eo) * wr).sum(axis=-1)
    K = es.shape[-1] // 2
    ar, ai = es[..., :K], es[..., K:]
    br, bi = wr[..., :K], wr[..., K:]
    cr, ci = eo[..., :K], eo[..., K:]
    # x = e_s * conj(e_o); score = Re(x * w_r)
    xr = ar * cr + ai * ci
    xi = ai * cr - ar * ci
    return (xr * br - xi * bi).sum(axis=-1)


def _check_ids(params, s, r, o):
    if not (0 <= s < params.n and 0 <= o < params.n):
        raise IndexError(f"entity id out of range (n={params.n})")
    if r is not None and not 0 <= r < params.m:
        raise IndexError(f"relation id {r} out of range (m={params.m})")


def _score_one(params, t, expected):
    if params.kind is not expected:
        raise ModelKindError(f"expected {expected.value} parameters, got {params.kind.value}")
    s, r, o = t
    _check_ids(params, s, r, o)
    E, W = params.entity, params.relation
    return float(score_rows(params.kind, params.norm, E[s:s + 1], W[r:r + 1], E[o:o + 1])[0])


def score_transe(params: ModelParams, t) -> float:
    return _score_one(params, t, ModelKind.TRANSE)


def score_distmult(params: ModelParams, t) -> float:
    return _score_one(params, t, ModelKind.DISTMULT)


def score_complex(params: ModelParams, t) -> float:
    return _score_one(params, t, ModelKind.COMPLEX)


def score(params: ModelParams, t) -> float:
    """Score a triple with whichever model ``params`` holds."""
    return _score_one(params, t, params.kind)


def score_triples(params: ModelParams, triples) -> np.ndarray:
    """Scores for an ``(N, 3)`` array of triples."""
    t = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
    E, W = params.entity, params.relation
    return score_rows(params.kind, params.norm, E[t[:, 0]], W[t[:, 1]], E[t[:, 2]])


def score_all_relations(params: ModelParams, s: int, o: int) -> np.ndarray:
    """Scores of ``(s, r, o)`` for every relation ``r``, shape ``(m,)``."""
    _check_ids(params, s, None, o)
    E = params.entity
    return score_rows(params.kind, params.norm, E[s:s + 1], params.relation, E[o:o + 1])


def score_pairs(params: ModelParams, s, o, chunk: int = 4096) -> np.ndarray:
    """Relation-score matrix ``(N, m)`` for entity-pair arrays ``s`` and ``o``."""
    s = np.asarray(s, dtype=np.int64)
    o = np.asarray(o, dtype=np.int64)
    E, W = params.entity, params.relation
    out = np.empty((len(s), params.m))
    # bound the (chunk, m, width) temporary to roughly 32 MB
    step = max(1, min(chunk, (1 << 22) // max(1, params.m * params.width)))
    for a in range(0, len(s), step):
        b = a + step
        out[a:b] = score_rows(params.kind, params.norm,
                              E[s[a:b]][:, None, :], W[None, :, :], E[o[a:b]][:, None, :])
    return out


def grad_rows(kind, norm, es, wr, eo):
    """Gradients of :func:`score_rows` with respect to each operand.

    Operands are ``(B, width)`` arrays; returns three arrays of the same
    shape. TransE-L1 uses the sign subgradient (0 at exact zeros).
    """
    if kind is ModelKind.TRANSE:
        d = (es + wr) - eo
        if norm is Norm.L1:
            g = np.sign(d)
        else:
            nrm = np.sqrt((d * d).sum(axis=-1, keepdims=True))
            g = np.divide(d, nrm, out=np.zeros_like(d), where=nrm > 0)
        return -g, -g, g
    if kind is ModelKind.DISTMULT:
        return wr * eo, es * eo, es * wr
    K = es.shape[-1] // 2
    ar, ai = es[..., :K], es[..., K:]
    br, bi = wr[..., :K], wr[..., K:]
    cr, ci = eo[..., :K], eo[..., K:]
    g_s = np.concatenate([br * cr + bi * ci, br * ci - bi * cr], axis=-1)
    g_r = np.concatenate([ar * cr + ai * ci, ar * ci - ai * cr], axis=-1)
    g_o = np.concatenate([ar * br - ai * bi, ar * bi + ai * br], axis=-1)
    return g_s, g_r, g_o


def score_gradients(params: ModelParams, t):
    """Analytic gradients ``(d/d e_s, d/d w_r, d/d e_o)`` of the score of ``t``.

    For ComplEx the gradients are taken with respect to the 2K stored reals.
    When ``s == o`` the true gradient for that entity row is the sum of the
    first and last arrays.
    """
    s, r, o = t
    _check_ids(params, s, r, o)
    E, W = params.entity, params.relation
    g = grad_rows(params.kind, params.norm, E[s:s + 1], W[r:r + 1], E[o:o + 1])
    return tuple(x[0].copy() for x in g)


# -- checkpoints ----------------------------------------------------------

CHECKPOINT_MANIFEST = "checkpoint.json"
VALUE_ENCODING = "float32-le-row-major"


def save_checkpoint(params: ModelParams, directory) -> Path:
    """Write a JSON manifest plus one little-endian float32 file per table."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files = {"entity": "entity.f32", "relation": "relation.f32"}
    (directory / files["entity"]).write_bytes(params.entity.astype("<f4").tobytes(order="C"))
    (directory / files["relation"]).write_bytes(params.relation.astype("<f4").tobytes(order="C"))
    manifest = {
        "model_kind": params.kind.value,
        "K": params.K,
        "n": params.n,
        "m": params.m,
        "norm_kind": params.norm.value,
        "seed": params.seed,
        "value_encoding": VALUE_ENCODING,
        "files": files,
    }
    path = directory / CHECKPOINT_MANIFEST
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def load_checkpoint(path) -> ModelParams:
    """Load a checkpoint from its directory or its manifest file."""
    path = Path(path)
    if path.is_dir():
        path = path / CHECKPOINT_MANIFEST
    if not path.exists():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    try:
        meta = json.loads(path.read_text(encoding="utf-8"))
        kind = ModelKind.parse(meta["model_kind"])
        K, n, m = int(meta["K"]), int(meta["n"]), int(meta["m"])
        encoding = meta["value_encoding"]
        files = meta.get("files", {"entity": "entity.f32", "relation": "relation.f32"})
    except (ValueError, KeyError) as exc:
        raise FormatError(f"{path}: malformed checkpoint manifest ({exc})") from None
    if encoding != VALUE_ENCODING:
        raise FormatError(f"{path}: unsupported value encoding {encoding!r}")
    width = 2 * K if kind is ModelKind.COMPLEX else K
    tables = {}
    for name, rows in (("entity", n), ("relation", m)):
        raw = (path.parent / files[name]).read_bytes()
        if len(raw) != rows * width * 4:
            raise FormatError(f"{files[name]}: expected {rows * width * 4} bytes, found {len(raw)}")
        tables[name] = np.frombuffer(raw, dtype="<f4").reshape(rows, width).astype(np.float64)
    return ModelParams(kind, K, tables["entity"], tables["relation"],
                       meta.get("norm_kind", "L1"), meta.get("seed"))
