"""Filtered link-prediction ranking and per-relation classification accuracy."""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .models import get_model

HITS_AT = (1, 3, 10)
# cap on scored (query, candidate, coordinate) cells held in memory at once
_CELL_BUDGET = 4_000_000


def rank_from_scores(scores, target, masked=()):
    """Rank of ``scores[target]`` with ties counted as one half.

    ``masked`` candidates (other known-true entities) are set to ``-inf``
    first; the target itself is never masked.
    """
    scores = np.array(scores, dtype=np.float64)
    masked = np.asarray(masked, dtype=np.int64)
    masked = masked[masked != target]
    scores[masked] = -np.inf
    t = scores[target]
    higher = np.count_nonzero(scores > t)
    ties = np.count_nonzero(scores == t) - 1
    return 1.0 + higher + ties / 2.0


def metrics_from_ranks(ranks):
    """MR, MRR and Hits@k; sums are exactly rounded so results do not depend
    on evaluation order."""
    ranks = np.asarray(ranks, dtype=np.float64).ravel()
    n = ranks.size
    if n == 0:
        return {"count": 0}
    out = {
        "count": int(n),
        "mr": math.fsum(ranks) / n,
        "mrr": math.fsum(1.0 / ranks) / n,
    }
    for k in HITS_AT:
        out[f"hits@{k}"] = int(np.count_nonzero(ranks <= k)) / n
    return out


@dataclass
class RankingReport:
    """Object-side and subject-side ranks per evaluated triple.

    ``triples`` hold original (non-inverse) relation ids; ``ranks[:, 0]``
    is the object-side rank and ``ranks[:, 1]`` the subject-side rank.
    """

    split: str
    triples: np.ndarray
    ranks: np.ndarray
    relation_names: tuple
    filtered: bool = True
    overall: dict = field(init=False)
    per_relation: dict = field(init=False)

    def __post_init__(self):
        self.overall = metrics_from_ranks(self.ranks)
        self.per_relation = {}
        for r in np.unique(self.triples[:, 1]):
            rows = self.triples[:, 1] == r
            self.per_relation[self.relation_names[r]] = metrics_from_ranks(self.ranks[rows])

    @property
    def mrr(self):
        return self.overall["mrr"]

    def to_json(self):
        return {
            "split": self.split,
            "setting": "filtered" if self.filtered else "raw",
            "tie_rule": "average",
            "overall": self.overall,
            "per_relation": self.per_relation,
        }

    def csv_rows(self):
        header = ["relation", "count", "mr", "mrr"] + [f"hits@{k}" for k in HITS_AT]
        rows = [header]
        for name, m in self.per_relation.items():
            rows.append([name] + [m[h] for h in header[1:]])
        return rows


def _chunk_size(params, n_queries):
    width = 2 * params.settings.get("dim", 1)
    return max(1, min(n_queries, _CELL_BUDGET // max(params.n_e * width, 1)))


def _queries(store, triples):
    """Object-side queries ``(head, rel, target)`` for both directions."""
    if store.reciprocal:
        inv = triples[:, 1] + store.n_r_base
        obj = triples[:, [0, 1, 2]]
        subj = np.stack([triples[:, 2], inv, triples[:, 0]], axis=1)
        return obj, subj, True
    return triples, triples, False


def evaluate_ranking(model, params, store, filter_index, split="test", filtered=True, threads=1):
    """Rank every triple of ``split`` against all entities, in both directions."""
    if isinstance(model, str):
        model = get_model(model)
    triples = store.split(split)
    if store.reciprocal:
        triples = triples[triples[:, 1] < store.n_r_base]
    if len(triples) == 0:
        raise ValueError(f"split {split!r} is empty")
    obj_q, subj_q, via_inverse = _queries(store, triples)
    n = len(triples)
    step = _chunk_size(params, n)

    def work(lo, hi):
        out = np.empty((hi - lo, 2))
        heads = obj_q[lo:hi]
        scores = model.score_all(params, heads[:, 0], heads[:, 1])
        for i, (s, r, o) in enumerate(heads):
            mask = filter_index.objects(s, r) if filtered else ()
            out[i, 0] = rank_from_scores(scores[i], o, mask)
        tails = subj_q[lo:hi]
        if via_inverse:
            scores = model.score_all(params, tails[:, 0], tails[:, 1])
            for i, (o, r_inv, s) in enumerate(tails):
                mask = filter_index.objects(o, r_inv) if filtered else ()
                out[i, 1] = rank_from_scores(scores[i], s, mask)
        else:
            scores = model.score_subjects(params, tails[:, 1], tails[:, 2])
            for i, (s, r, o) in enumerate(tails):
                mask = filter_index.subjects(r, o) if filtered else ()
                out[i, 1] = rank_from_scores(scores[i], s, mask)
        return out

    spans = [(lo, min(lo + step, n)) for lo in range(0, n, step)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda ab: work(*ab), spans))
    else:
        parts = [work(lo, hi) for lo, hi in spans]
    ranks = np.concatenate(parts)
    names = store.relations[: store.n_r_base]
    return RankingReport(split, triples, ranks, names, filtered)


def rank_triple(model, params, triple, store, filter_index, filtered=True):
    """Object-side and subject-side filtered ranks of one (original) triple."""
    if isinstance(model, str):
        model = get_model(model)
    s, r, o = (int(x) for x in triple)
    scores = model.score_all(params, [s], [r])[0]
    obj_rank = rank_from_scores(scores, o, filter_index.objects(s, r) if filtered else ())
    if store.reciprocal:
        r_inv = r + store.n_r_base
        scores = model.score_all(params, [o], [r_inv])[0]
        subj_rank = rank_from_scores(scores, s, filter_index.objects(o, r_inv) if filtered else ())
    else:
        scores = model.score_subjects(params, [r], [o])[0]
        subj_rank = rank_from_scores(scores, s, filter_index.subjects(r, o) if filtered else ())
    return obj_rank, subj_rank


@dataclass
class ClassificationReport:
    """Per relation: accuracy on known train / test+valid truths and the
    mean number of other objects predicted true per (s, r) pair."""

    threshold: float
    per_relation: dict

    def to_json(self):
        return {"threshold": self.threshold, "per_relation": self.per_relation}

    def csv_rows(self):
        header = ["relation", "pairs", "n_train", "n_test", "train_accuracy", "test_accuracy", "other_per_pair"]
        return [header] + [[name] + [m[h] for h in header[1:]] for name, m in self.per_relation.items()]


def classify(model, params, store, filter_index=None, threshold=0.5):
    """Predict ``sigmoid(score) > threshold`` for all objects of every
    ``(s, r)`` pair in the test split."""
    if isinstance(model, str):
        model = get_model(model)
    test = store.test
    if store.reciprocal:
        test = test[test[:, 1] < store.n_r_base]
    known_train = _group(store.train)
    known_eval = _group(np.concatenate([store.valid, store.test]))
    pairs = sorted({(int(s), int(r)) for s, r, _ in test})
    tallies = {}
    for s, r in pairs:
        probs = expit(model.score_all(params, [s], [r])[0])
        predicted = probs > threshold
        tr = known_train.get((s, r), set())
        ev = known_eval.get((s, r), set()) - tr
        t = tallies.setdefault(r, [0, 0, 0, 0, 0, 0])
        t[0] += 1
        t[1] += len(tr)
        t[2] += len(ev)
        t[3] += sum(bool(predicted[o]) for o in tr)
        t[4] += sum(bool(predicted[o]) for o in ev)
        t[5] += int(predicted.sum()) - sum(bool(predicted[o]) for o in tr | ev)
    per_relation = {}
    for r in sorted(tallies):
        n_pairs, n_tr, n_ev, hit_tr, hit_ev, other = tallies[r]
        per_relation[store.relations[r]] = {
            "pairs": n_pairs,
            "n_train": n_tr,
            "n_test": n_ev,
            "train_accuracy": hit_tr / n_tr if n_tr else None,
            "test_accuracy": hit_ev / n_ev if n_ev else None,
            "other_per_pair": other / n_pairs,
        }
    return ClassificationReport(threshold, per_relation)


def _group(triples):
    groups = {}
    for s, r, o in np.asarray(triples).reshape(-1, 3).tolist():
        groups.setdefault((s, r), set()).add(o)
    return groups
