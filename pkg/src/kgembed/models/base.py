"""Parameter containers and the shared score/gradient protocol."""

from collections import namedtuple
from dataclasses import dataclass, field

import numpy as np

ScoreGrad = namedtuple("ScoreGrad", ["score", "grads"])

INIT_RANGE = 0.05


@dataclass
class ModelParams:
    """Named float64 arrays in manifest order plus the model's settings.

    ``settings`` carries ``n_e``, ``n_r`` and the model dimensions
    (``dim``, ``rel_dim``, ``n_filters``, ``filter_len``, ``curvature``).
    """

    kind: str
    arrays: dict
    settings: dict = field(default_factory=dict)

    def __getitem__(self, name):
        return self.arrays[name]

    def __setitem__(self, name, value):
        self.arrays[name] = value

    def __iter__(self):
        return iter(self.arrays)

    @property
    def n_e(self):
        return self.settings["n_e"]

    @property
    def n_r(self):
        return self.settings["n_r"]

    def copy(self):
        return ModelParams(
            self.kind,
            {k: v.copy() for k, v in self.arrays.items()},
            dict(self.settings),
        )

    def manifest(self):
        return [{"name": k, "shape": list(v.shape)} for k, v in self.arrays.items()]

    def norms(self):
        return {k: float(np.linalg.norm(v)) for k, v in self.arrays.items()}


def apply_dropout(v, rate, rng, training=True):
    """Inverted dropout; returns the output and the (scaled) mask used."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must lie in [0, 1), got {rate}")
    v = np.asarray(v, dtype=np.float64)
    if not training or rate == 0.0:
        return v, None
    mask = (rng.random(v.shape) >= rate) / (1.0 - rate)
    return v * mask, mask


class Dropout:
    """Dropout rates per site with the generator that draws the masks."""

    def __init__(self, rates, rng):
        self.rates = dict(rates)
        self.rng = rng

    def __call__(self, site, v):
        return apply_dropout(v, self.rates.get(site, 0.0), self.rng, training=True)


def _drop(dropout, site, v):
    if dropout is None:
        return v, None
    return dropout(site, v)


def _undrop(mask, g):
    return g if mask is None else g * mask


def _uniform(rng, shape, scale=1.0):
    return rng.uniform(-INIT_RANGE, INIT_RANGE, size=shape) * scale


def _upstream(upstream, scores):
    """Per-score weights: ones, a given array, or a callable of the scores."""
    if upstream is None:
        return np.ones_like(scores)
    if callable(upstream):
        upstream = upstream(scores)
    return np.asarray(upstream, dtype=np.float64)


def _ids(*xs):
    return [np.atleast_1d(np.asarray(x, dtype=np.int64)) for x in xs]


class KGEModel:
    """A score function over integer triples with analytic gradients.

    Subclasses implement ``shapes``, ``init``, ``score`` and ``score_grad``.
    ``score_grad`` returns the scores and a dict of dense gradients of
    ``sum_i upstream[i] * score_i`` for every parameter the scores touch.
    """

    kind = None
    ball_params = ()
    dropout_sites = ()

    def shapes(self, n_e, n_r, settings):
        raise NotImplementedError

    def default_settings(self):
        return {"dim": 200}

    def new_params(self, n_e, n_r, settings, arrays):
        merged = dict(self.default_settings())
        merged.update(settings)
        merged.update(n_e=n_e, n_r=n_r)
        return ModelParams(self.kind, arrays, merged)

    def zeros(self, n_e, n_r, **settings):
        merged = dict(self.default_settings())
        merged.update(settings)
        arrays = {k: np.zeros(shape) for k, shape in self.shapes(n_e, n_r, merged).items()}
        return self.new_params(n_e, n_r, merged, arrays)

    def init(self, n_e, n_r, rng, scale=1.0, **settings):
        merged = dict(self.default_settings())
        merged.update(settings)
        arrays = {
            k: _uniform(rng, shape, scale)
            for k, shape in self.shapes(n_e, n_r, merged).items()
        }
        return self.new_params(n_e, n_r, merged, arrays)

    def score(self, p, s, r, o):
        return self.score_grad(p, s, r, o, need_grad=False)[0]

    def score_grad(self, p, s, r, o, upstream=None, dropout=None, need_grad=True):
        raise NotImplementedError

    def score_all(self, p, s, r):
        """Scores of ``(s, r, o)`` for every entity ``o``: shape ``(B, n_e)``."""
        s, r = _ids(s, r)
        n_e = p.n_e
        ss = np.repeat(s, n_e)
        rr = np.repeat(r, n_e)
        oo = np.tile(np.arange(n_e), len(s))
        return self.score(p, ss, rr, oo).reshape(len(s), n_e)

    def score_all_grad(self, p, s, r, upstream, dropout=None):
        s, r = _ids(s, r)
        n_e = p.n_e
        ss = np.repeat(s, n_e)
        rr = np.repeat(r, n_e)
        oo = np.tile(np.arange(n_e), len(s))
        shape = (len(s), n_e)

        def flat_upstream(scores):
            return _upstream(upstream, scores.reshape(shape)).reshape(-1)

        scores, grads = self.score_grad(p, ss, rr, oo, flat_upstream, dropout)
        return scores.reshape(shape), grads

    def score_subjects(self, p, r, o):
        """Scores of ``(s, r, o)`` for every entity ``s``: shape ``(B, n_e)``."""
        r, o = _ids(r, o)
        n_e = p.n_e
        ss = np.tile(np.arange(n_e), len(r))
        return self.score(p, ss, np.repeat(r, n_e), np.repeat(o, n_e)).reshape(len(r), n_e)


class BilinearModel(KGEModel):
    """Scores of the form ``query(s, r) . E[o]``."""

    def query(self, p, s, r, dropout=None):
        """Return the query vectors and a cache for :meth:`query_backward`."""
        raise NotImplementedError

    def query_backward(self, p, cache, dq, grads):
        raise NotImplementedError

    def score_grad(self, p, s, r, o, upstream=None, dropout=None, need_grad=True):
        s, r, o = _ids(s, r, o)
        q, cache = self.query(p, s, r, dropout)
        e_o = p["E"][o]
        scores = np.sum(q * e_o, axis=1)
        if not need_grad:
            return scores, None
        up = _upstream(upstream, scores)
        grads = {name: np.zeros_like(arr) for name, arr in p.arrays.items()}
        np.add.at(grads["E"], o, up[:, None] * q)
        self.query_backward(p, cache, up[:, None] * e_o, grads)
        return scores, grads

    def score_all(self, p, s, r):
        s, r = _ids(s, r)
        q, _ = self.query(p, s, r)
        return q @ p["E"].T

    def score_all_grad(self, p, s, r, upstream, dropout=None):
        s, r = _ids(s, r)
        q, cache = self.query(p, s, r, dropout)
        E = p["E"]
        scores = q @ E.T
        up = _upstream(upstream, scores).reshape(scores.shape)
        grads = {name: np.zeros_like(arr) for name, arr in p.arrays.items()}
        grads["E"] += up.T @ q
        self.query_backward(p, cache, up @ E, grads)
        return scores, grads
