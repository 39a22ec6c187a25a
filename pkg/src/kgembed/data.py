"""Triple ingestion, integer encoding, reciprocal augmentation, filter
index, negative sampling, 1-N targets and dataset resplitting."""

import logging
from collections import defaultdict
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

SPLITS = ("train", "valid", "test")
INVERSE_SUFFIX = "_reverse"
MAX_NEGATIVE_RETRIES = 100


class DataError(ValueError):
    """Malformed or inconsistent dataset input."""


def load_triples(path):
    """Read ``subject<TAB>relation<TAB>object`` lines into string triples."""
    path = Path(path)
    triples = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise DataError(
                    f"{path}:{lineno}: expected 3 tab-separated fields, got {len(parts)}"
                )
            triples.append(tuple(parts))
    return triples


def drop_relations(raw, names):
    """Remove raw string triples whose relation is in ``names``."""
    names = set(names)
    return [t for t in raw if t[1] not in names]


def _empty():
    return np.zeros((0, 3), dtype=np.int64)


@dataclass(frozen=True)
class TripleStore:
    """Integer-encoded splits plus the id dictionaries.

    ``relations`` lists relation names by id. After :func:`add_reciprocals`
    ids ``[n_r/2, n_r)`` are the inverses of ``[0, n_r/2)`` in order.
    """

    entities: tuple
    relations: tuple
    train: np.ndarray = field(default_factory=_empty)
    valid: np.ndarray = field(default_factory=_empty)
    test: np.ndarray = field(default_factory=_empty)
    reciprocal: bool = False

    @property
    def n_e(self):
        return len(self.entities)

    @property
    def n_r(self):
        return len(self.relations)

    @property
    def n_r_base(self):
        """Number of original (non-inverse) relations."""
        return self.n_r // 2 if self.reciprocal else self.n_r

    @property
    def entity_ids(self):
        return {name: i for i, name in enumerate(self.entities)}

    @property
    def relation_ids(self):
        return {name: i for i, name in enumerate(self.relations)}

    def split(self, name):
        if name not in SPLITS:
            raise KeyError(f"unknown split {name!r}; expected one of {SPLITS}")
        return getattr(self, name)

    def decode(self, triples):
        return [
            (self.entities[s], self.relations[r], self.entities[o])
            for s, r, o in np.asarray(triples).reshape(-1, 3)
        ]

    def base_relation(self, r):
        """Map an inverse relation id back to the relation it mirrors."""
        return r - self.n_r_base if self.reciprocal and r >= self.n_r_base else r

    def stats(self):
        return {
            "entities": self.n_e,
            "relations": self.n_r,
            "train": len(self.train),
            "valid": len(self.valid),
            "test": len(self.test),
            "reciprocal": self.reciprocal,
        }


def _dedup(arr, name):
    if len(arr) == 0:
        return arr
    _, first = np.unique(arr, axis=0, return_index=True)
    if len(first) < len(arr):
        log.warning("dropped %d duplicate triples from %s split", len(arr) - len(first), name)
        arr = arr[np.sort(first)]
    return arr


def build_store(train, valid=(), test=()):
    """Encode raw string triples; ids follow first appearance over train,
    then valid, then test.  Valid/test items unseen in train are rejected."""
    ent, rel = {}, {}
    for s, r, o in train:
        ent.setdefault(s, len(ent))
        rel.setdefault(r, len(rel))
        ent.setdefault(o, len(ent))

    def encode(raw, name):
        rows = []
        for s, r, o in raw:
            for label, key, table in (("entity", s, ent), ("relation", r, rel), ("entity", o, ent)):
                if key not in table:
                    raise DataError(f"{name} split contains {label} {key!r} not seen in train")
            rows.append((ent[s], rel[r], ent[o]))
        arr = np.asarray(rows, dtype=np.int64).reshape(-1, 3)
        return _dedup(arr, name)

    return TripleStore(
        entities=tuple(ent),
        relations=tuple(rel),
        train=encode(train, "train"),
        valid=encode(valid, "valid"),
        test=encode(test, "test"),
    )


def _mirror(arr, offset):
    return np.stack([arr[:, 2], arr[:, 1] + offset, arr[:, 0]], axis=1)


def add_reciprocals(store):
    """Append ``(o, r + n_r, s)`` for every ``(s, r, o)`` in every split."""
    if store.reciprocal:
        raise DataError("store already contains reciprocal relations")
    n_r = store.n_r
    splits = {
        name: np.concatenate([store.split(name), _mirror(store.split(name), n_r)])
        for name in SPLITS
    }
    relations = store.relations + tuple(r + INVERSE_SUFFIX for r in store.relations)
    return replace(store, relations=relations, reciprocal=True, **splits)


class FilterIndex:
    """Every known-true triple across train, valid and test."""

    def __init__(self, store):
        self.n_e = store.n_e
        arrays = [store.split(name) for name in SPLITS]
        total = sum(len(a) for a in arrays)
        self._triples = set()
        self._objects = defaultdict(set)
        self._subjects = defaultdict(set)
        for arr in arrays:
            for s, r, o in arr.tolist():
                self._triples.add((s, r, o))
                self._objects[s, r].add(o)
                self._subjects[r, o].add(s)
        self.cross_split_duplicates = total - len(self._triples)
        if self.cross_split_duplicates:
            log.warning(
                "%d triples occur in more than one split", self.cross_split_duplicates
            )

    def __len__(self):
        return len(self._triples)

    def __contains__(self, triple):
        s, r, o = (int(x) for x in triple)
        return (s, r, o) in self._triples

    def objects(self, s, r):
        return np.fromiter(sorted(self._objects.get((int(s), int(r)), ())), dtype=np.int64)

    def subjects(self, r, o):
        return np.fromiter(sorted(self._subjects.get((int(r), int(o)), ())), dtype=np.int64)


def build_filter_index(store):
    return FilterIndex(store)


@dataclass
class NegBatch:
    """Positives with ``k`` corrupted copies each (row-aligned, ``k`` per positive)."""

    positives: np.ndarray
    negatives: np.ndarray
    k: int

    def triples_and_labels(self):
        """Interleave as ``(B, k + 1)`` blocks: the positive first, then its negatives."""
        b = len(self.positives)
        trip = np.concatenate(
            [self.positives[:, None, :], self.negatives.reshape(b, self.k, 3)], axis=1
        )
        labels = np.zeros((b, self.k + 1))
        labels[:, 0] = 1.0
        return trip.reshape(-1, 3), labels.reshape(-1)


def sample_negatives(store, batch, k, rng):
    """Corrupt subject or object (chosen uniformly) with a uniform entity.

    A corruption equal to its positive is redrawn up to 100 times and then
    kept as a (rare) false negative.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    batch = np.asarray(batch, dtype=np.int64).reshape(-1, 3)
    b = len(batch)
    side = rng.integers(0, 2, size=(b, k))  # 0 -> subject, 1 -> object
    col = np.where(side == 0, 0, 2)
    original = np.take_along_axis(np.repeat(batch[:, None, :], k, axis=1), col[..., None], axis=2)[..., 0]
    repl = rng.integers(0, store.n_e, size=(b, k))
    for _ in range(MAX_NEGATIVE_RETRIES):
        clash = repl == original
        n = int(clash.sum())
        if n == 0:
            break
        repl[clash] = rng.integers(0, store.n_e, size=n)
    neg = np.repeat(batch[:, None, :], k, axis=1)
    np.put_along_axis(neg, col[..., None], repl[..., None], axis=2)
    return NegBatch(positives=batch, negatives=neg.reshape(-1, 3), k=k)


def train_pairs(store):
    """Group training triples by ``(s, r)``: returns pairs and object id arrays."""
    groups = defaultdict(list)
    for s, r, o in store.train.tolist():
        groups[s, r].append(o)
    keys = sorted(groups)
    pairs = np.asarray(keys, dtype=np.int64).reshape(-1, 2)
    return pairs, [np.asarray(groups[key], dtype=np.int64) for key in keys]


def one_vs_all_targets(store, pair):
    """Label vector over all objects: 1 where ``(s, r, o)`` is a training triple."""
    if not store.reciprocal:
        raise DataError("1-N targets need a store with reciprocal relations")
    s, r = pair
    y = np.zeros(store.n_e)
    tr = store.train
    y[tr[(tr[:, 0] == s) & (tr[:, 1] == r), 2]] = 1.0
    return y


def resplit_random(store, valid_size, test_size, rng):
    """Pool all splits and draw fresh valid/test sets of the given sizes.

    Triples are drawn in random order; one is skipped (left in train) when
    moving it would leave its subject, relation or object absent from train.
    """
    if store.reciprocal:
        raise DataError("resplit before adding reciprocal relations")
    pool = np.concatenate([store.split(name) for name in SPLITS])
    pool = _dedup(pool, "combined")
    need = test_size + valid_size
    if valid_size < 0 or test_size < 0 or (need > 0 and need >= len(pool)):
        raise DataError(
            f"cannot draw {valid_size} valid + {test_size} test from {len(pool)} triples"
        )
    ent_count = np.bincount(pool[:, [0, 2]].ravel(), minlength=store.n_e)
    rel_count = np.bincount(pool[:, 1], minlength=store.n_r)
    chosen = []
    for idx in rng.permutation(len(pool)):
        if len(chosen) == need:
            break
        s, r, o = pool[idx]
        ent_count[s] -= 1
        ent_count[o] -= 1
        rel_count[r] -= 1
        if ent_count[s] > 0 and ent_count[o] > 0 and rel_count[r] > 0:
            chosen.append(idx)
        else:
            ent_count[s] += 1
            ent_count[o] += 1
            rel_count[r] += 1
    if len(chosen) < need:
        raise DataError(
            f"only {len(chosen)} triples can leave train without orphaning an entity "
            f"or relation; {need} requested"
        )
    chosen = np.asarray(chosen, dtype=np.int64)
    mask = np.ones(len(pool), dtype=bool)
    mask[chosen] = False
    return replace(
        store,
        train=pool[mask],
        test=pool[chosen[:test_size]],
        valid=pool[chosen[test_size:]],
    )


def classify_relations(khs, threshold=0.5):
    """Boolean mask of hierarchical relations (``Khs >= threshold``)."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    return np.asarray(khs, dtype=float) >= threshold


def filter_relations_by_khs(store, khs, threshold, keep_hierarchical, keep_other, rng):
    """Keep a random subset of hierarchical and non-hierarchical relations.

    Relation ids are re-encoded in their original order; the entity
    dictionary is left intact.
    """
    if store.reciprocal:
        raise DataError("filter relations before adding reciprocal relations")
    hier = classify_relations(khs, threshold)
    if len(hier) != store.n_r:
        raise ValueError(f"need one Khs per relation ({store.n_r}), got {len(hier)}")
    h_ids = np.flatnonzero(hier)
    o_ids = np.flatnonzero(~hier)
    if keep_hierarchical > len(h_ids) or keep_other > len(o_ids):
        raise DataError(
            f"requested {keep_hierarchical} hierarchical / {keep_other} other relations, "
            f"store has {len(h_ids)} / {len(o_ids)}"
        )
    keep = np.sort(np.concatenate([
        rng.choice(h_ids, size=keep_hierarchical, replace=False),
        rng.choice(o_ids, size=keep_other, replace=False),
    ])).astype(np.int64)
    if len(keep) == store.n_r:
        return store
    remap = np.full(store.n_r, -1, dtype=np.int64)
    remap[keep] = np.arange(len(keep))

    def subset(arr):
        arr = arr[remap[arr[:, 1]] >= 0].copy()
        arr[:, 1] = remap[arr[:, 1]]
        return arr

    return replace(
        store,
        relations=tuple(store.relations[i] for i in keep),
        **{name: subset(store.split(name)) for name in SPLITS},
    )
