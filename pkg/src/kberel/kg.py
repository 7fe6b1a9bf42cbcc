"""Knowledge-base storage: vocabularies, triple splits, filter indexes.

Triples are read from the usual three-column TSV layout
(``subject<TAB>relation<TAB>object``) that WN18, FB15k and their
derivatives are distributed in.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import ConfigError, FormatError, ParseError, VocabularyError

log = logging.getLogger(__name__)

SPLITS = ("train", "valid", "test")
MANIFEST = "manifest.json"


class Triple(NamedTuple):
    s: int
    r: int
    o: int


class Vocab:
    """Dense, ordered name <-> id mapping for entities and relations."""

    def __init__(self, entity_names: Sequence[str] = (), relation_names: Sequence[str] = ()):
        self.entity_names = tuple(entity_names)
        self.relation_names = tuple(relation_names)
        self._ent = {name: i for i, name in enumerate(self.entity_names)}
        self._rel = {name: i for i, name in enumerate(self.relation_names)}
        if len(self._ent) != len(self.entity_names):
            raise FormatError("duplicate entity names in vocabulary")
        if len(self._rel) != len(self.relation_names):
            raise FormatError("duplicate relation names in vocabulary")

    @property
    def n(self) -> int:
        return len(self.entity_names)

    @property
    def m(self) -> int:
        return len(self.relation_names)

    def entity_id(self, name: str) -> int:
        try:
            return self._ent[name]
        except KeyError:
            raise VocabularyError(name, "entity") from None

    def relation_id(self, name: str) -> int:
        try:
            return self._rel[name]
        except KeyError:
            raise VocabularyError(name, "relation") from None

    def has_entity(self, name: str) -> bool:
        return name in self._ent

    def has_relation(self, name: str) -> bool:
        return name in self._rel

    def extended(self, entities: Iterable[str] = (), relations: Iterable[str] = ()) -> "Vocab":
        ents = list(self.entity_names)
        seen = set(self._ent)
        for e in entities:
            if e not in seen:
                seen.add(e)
                ents.append(e)
        rels = list(self.relation_names)
        seen = set(self._rel)
        for r in relations:
            if r not in seen:
                seen.add(r)
                rels.append(r)
        return Vocab(ents, rels)

    def __eq__(self, other):
        if not isinstance(other, Vocab):
            return NotImplemented
        return (self.entity_names == other.entity_names
                and self.relation_names == other.relation_names)

    def __hash__(self):
        return hash((self.entity_names, self.relation_names))

    def __repr__(self):
        return f"Vocab(n={self.n}, m={self.m})"


class LoadedTriples(NamedTuple):
    triples: tuple
    vocab: Vocab
    duplicates: int


def _read_rows(path):
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\r\n")
            if not line.strip():
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise ParseError(path, line_no, f"expected 3 tab-separated fields, got {len(fields)}")
            yield line_no, fields


def load_triples(path, vocab: Vocab | None = None, build: bool = False) -> LoadedTriples:
    """Read a TSV triple file.

    With ``build=True`` unseen names extend ``vocab`` (or a fresh one) in
    first-appearance order; otherwise ``vocab`` is fixed and any unknown
    name raises :class:`VocabularyError`. Repeated lines are dropped and
    counted.
    """
    if vocab is None:
        if not build:
            raise ConfigError("fixed-vocabulary loading needs a vocabulary")
        vocab = Vocab()
    rows = list(_read_rows(path))
    if build:
        ents, rels = [], []
        for _, (s, r, o) in rows:
            ents.append(s)
            ents.append(o)
            rels.append(r)
        vocab = vocab.extended(ents, rels)

    seen = set()
    triples = []
    duplicates = 0
    for _, (s, r, o) in rows:
        t = Triple(vocab.entity_id(s), vocab.relation_id(r), vocab.entity_id(o))
        if t in seen:
            duplicates += 1
            continue
        seen.add(t)
        triples.append(t)
    if duplicates:
        log.warning("%s: dropped %d duplicate triple(s)", path, duplicates)
    return LoadedTriples(tuple(triples), vocab, duplicates)


@dataclass(frozen=True)
class KnowledgeBase:
    vocab: Vocab
    train: tuple = ()
    valid: tuple = ()
    test: tuple = ()
    duplicates: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        n, m = self.vocab.n, self.vocab.m
        for name in SPLITS:
            triples = tuple(Triple(*map(int, t)) for t in getattr(self, name))
            if len(set(triples)) != len(triples):
                raise FormatError(f"duplicate triples in split {name!r}")
            for t in triples:
                if not (0 <= t.s < n and 0 <= t.o < n and 0 <= t.r < m):
                    raise FormatError(f"triple {tuple(t)} in {name!r} outside vocabulary (n={n}, m={m})")
            object.__setattr__(self, name, triples)

    def split(self, name: str) -> tuple:
        if name not in SPLITS:
            raise ConfigError(f"unknown split {name!r}")
        return getattr(self, name)

    def array(self, name: str) -> np.ndarray:
        """The split as an ``(N, 3)`` int64 array of (s, r, o) rows."""
        return self._arrays[name]

    @cached_property
    def _arrays(self):
        out = {}
        for name in SPLITS:
            a = np.array(getattr(self, name), dtype=np.int64).reshape(-1, 3)
            a.setflags(write=False)
            out[name] = a
        return out

    @property
    def n(self) -> int:
        return self.vocab.n

    @property
    def m(self) -> int:
        return self.vocab.m


class FilterIndex:
    """Relations known to hold for each (subject, object) pair in any split."""

    def __init__(self, pair_to_relations: dict):
        self.pair_to_relations = {k: frozenset(v) for k, v in pair_to_relations.items()}

    def __getitem__(self, pair) -> frozenset:
        return self.pair_to_relations.get(tuple(pair), frozenset())

    def __contains__(self, triple) -> bool:
        s, r, o = triple
        return r in self[(s, o)]

    def __len__(self):
        return len(self.pair_to_relations)

    def __eq__(self, other):
        if not isinstance(other, FilterIndex):
            return NotImplemented
        return self.pair_to_relations == other.pair_to_relations


def build_filter_index(kb: KnowledgeBase) -> FilterIndex:
    index: dict = {}
    for name in SPLITS:
        for s, r, o in kb.split(name):
            index.setdefault((s, o), set()).add(r)
    return FilterIndex(index)


# -- persistence ----------------------------------------------------------

def _write_lines(path, lines):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in lines:
            fh.write(line + "\n")


def save_kb(kb: KnowledgeBase, directory) -> Path:
    """Write splits, vocab files and a JSON manifest; return the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    ents, rels = kb.vocab.entity_names, kb.vocab.relation_names
    files = {name: f"{name}.txt" for name in SPLITS}
    files["entities"] = "entities.txt"
    files["relations"] = "relations.txt"
    for name in SPLITS:
        _write_lines(directory / files[name],
                     (f"{ents[s]}\t{rels[r]}\t{ents[o]}" for s, r, o in kb.split(name)))
    _write_lines(directory / files["entities"], ents)
    _write_lines(directory / files["relations"], rels)
    manifest = {
        "files": files,
        "n": kb.n,
        "m": kb.m,
        "train": len(kb.train),
        "valid": len(kb.valid),
        "test": len(kb.test),
    }
    path = directory / MANIFEST
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _read_vocab_file(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return [line.rstrip("\r\n") for line in fh]


def load_kb(directory) -> KnowledgeBase:
    """Load a KB directory.

    If ``manifest.json`` is present the stored vocabularies fix the ids;
    otherwise ``train.txt``, ``valid.txt`` and ``test.txt`` are read in that
    order and ids follow first appearance.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"dataset directory not found: {directory}")
    manifest_path = directory / MANIFEST
    dups = {}
    splits = {}
    if manifest_path.exists():
        try:
            manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
            files = manifest["files"]
        except (ValueError, KeyError) as exc:
            raise FormatError(f"{manifest_path}: malformed manifest ({exc})") from None
        vocab = Vocab(_read_vocab_file(directory / files["entities"]),
                      _read_vocab_file(directory / files["relations"]))
        if (vocab.n, vocab.m) != (manifest.get("n"), manifest.get("m")):
            raise FormatError(f"{manifest_path}: vocabulary sizes disagree with manifest counts")
        for name in SPLITS:
            loaded = load_triples(directory / files[name], vocab)
            splits[name] = loaded.triples
            dups[name] = loaded.duplicates
    else:
        vocab = Vocab()
        for name in SPLITS:
            path = directory / f"{name}.txt"
            if not path.exists():
                if name == "train":
                    raise FileNotFoundError(f"missing {path}")
                splits[name] = ()
                dups[name] = 0
                continue
            loaded = load_triples(path, vocab, build=True)
            vocab = loaded.vocab
            splits[name] = loaded.triples
            dups[name] = loaded.duplicates
    return KnowledgeBase(vocab, splits["train"], splits["valid"], splits["test"], duplicates=dups)


# -- synthetic KBs --------------------------------------------------------

PATTERNS = ("inverse-pair", "symmetric", "random")
RANDOM_PATTERN_RELATIONS = 3


def generate_synthetic_kb(n_entities: int, pattern: str, density: float, seed: int) -> KnowledgeBase:
    """Build a small KB with a known relational structure.

    ``inverse-pair``
        relations ``r0``/``r1``; each selected pair ``i < j`` is oriented
        ``(a, b) = (i, j)`` when ``i + j`` is odd and ``(j, i)`` otherwise,
        then ``(a, r0, b)`` and ``(b, r1, a)`` are emitted. ``r0`` is
        antisymmetric, ``r1`` is its inverse, and the parity rule keeps
        ``r0`` from encoding a global order over the ids.
    ``symmetric``
        one relation ``r0`` emitted in both directions for each pair.
    ``random``
        three relations, triples drawn uniformly among all ``s != o``.

    ``density`` is the fraction of candidate pairs (or triples, for
    ``random``) selected. Splits are 80/10/10 by triple count; at most one
    triple of each mirrored pair is held out, so the mirror of every
    valid/test triple is in train.
    """
    if n_entities < 2:
        raise ConfigError("n_entities must be >= 2")
    if not 0 < density <= 1:
        raise ConfigError("density must lie in (0, 1]")
    if pattern not in PATTERNS:
        raise ConfigError(f"unknown pattern {pattern!r}; expected one of {PATTERNS}")
    rng = np.random.default_rng(seed)

    if pattern == "random":
        m = RANDOM_PATTERN_RELATIONS
        candidates = [(s, r, o) for s in range(n_entities) for r in range(m)
                      for o in range(n_entities) if s != o]
    else:
        m = 2 if pattern == "inverse-pair" else 1
        candidates = [(i, j) for i in range(n_entities) for j in range(i + 1, n_entities)]
    k = int(round(density * len(candidates)))
    if k == 0:
        raise ConfigError(f"density {density} selects no triples for {n_entities} entities")
    chosen = rng.choice(len(candidates), size=k, replace=False)

    units = []
    for idx in chosen:
        c = candidates[idx]
        if pattern == "random":
            units.append([Triple(*c)])
        elif pattern == "inverse-pair":
            a, b = c if (c[0] + c[1]) % 2 else c[::-1]
            units.append([Triple(a, 0, b), Triple(b, 1, a)])
        else:
            i, j = c
            units.append([Triple(i, 0, j), Triple(j, 0, i)])

    total = sum(len(u) for u in units)
    n_valid = int(round(0.1 * total))
    n_test = int(round(0.1 * total))
    # held-out triples come from distinct units, so the mirror of every
    # valid/test triple stays in train
    held, train = [], []
    for i, u in enumerate(units):
        if i < n_valid + n_test:
            pick = int(rng.integers(len(u)))
            held.append(u[pick])
            train.extend(t for j, t in enumerate(u) if j != pick)
        else:
            train.extend(u)
    vocab = Vocab([f"e{i}" for i in range(n_entities)], [f"r{r}" for r in range(m)])
    return KnowledgeBase(
        vocab,
        train=tuple(train),
        valid=tuple(held[:n_valid]),
        test=tuple(held[n_valid:]),
        duplicates={name: 0 for name in SPLITS},
    )
