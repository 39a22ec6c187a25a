"""Losses, optimisers and the epoch loop for 1-N and negative-sampling
training."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import expit

from . import poincare as pb
from .data import sample_negatives, train_pairs
from .models import Dropout, apply_dropout, get_model

__all__ = [
    "NumericalError",
    "OptimizerState",
    "TrainConfig",
    "adam_step",
    "apply_dropout",
    "bce_loss",
    "default_config",
    "rsgd_step",
    "sgd_step",
    "smooth_labels",
    "train_epoch",
]

PROB_CLAMP = 1e-12
REGIMES = ("negative-sampling", "one-vs-all")
OPTIMIZERS = ("sgd", "adam", "rsgd-mixed")


class NumericalError(RuntimeError):
    """Training produced a non-finite loss or gradient."""


@dataclass
class TrainConfig:
    regime: str = "negative-sampling"
    k: int = 50
    lr: float = 50.0
    lr_decay: float = 1.0
    epochs: int = 100
    batch_size: int = 128
    label_smoothing: float = 0.0
    dropout: dict = field(default_factory=dict)
    optimizer: str = "sgd"
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ValueError(f"regime must be one of {REGIMES}, got {self.regime!r}")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}, got {self.optimizer!r}")
        if not self.lr >= 0:
            raise ValueError("lr must be non-negative")
        if not 0.0 <= self.label_smoothing < 1.0:
            raise ValueError("label_smoothing must lie in [0, 1)")
        for site, rate in self.dropout.items():
            if not 0.0 <= rate < 1.0:
                raise ValueError(f"dropout rate for {site!r} must lie in [0, 1)")
        if self.k < 1 or self.batch_size < 1 or self.epochs < 0 or self.threads < 1:
            raise ValueError("k, batch_size and threads must be positive, epochs non-negative")

    def to_dict(self):
        return asdict(self)


def default_config(kind):
    """Shipped defaults: model settings and training configuration."""
    if kind == "tucker":
        return {"dim": 200, "rel_dim": 30}, TrainConfig(
            regime="one-vs-all", optimizer="adam", lr=0.01, lr_decay=1.0,
            label_smoothing=0.1,
            dropout={"input": 0.2, "relation": 0.2, "hidden": 0.3},
        )
    if kind == "hyper":
        return {"dim": 200, "rel_dim": 200, "n_filters": 32, "filter_len": 9}, TrainConfig(
            regime="one-vs-all", optimizer="adam", lr=0.001, lr_decay=1.0,
            label_smoothing=0.1,
            dropout={"input": 0.2, "feature": 0.2, "hidden": 0.3},
        )
    if kind == "mure":
        return {"dim": 40}, TrainConfig(optimizer="sgd", lr=50.0, k=50, batch_size=128)
    if kind == "murp":
        return {"dim": 40, "curvature": 1.0}, TrainConfig(
            optimizer="rsgd-mixed", lr=50.0, k=50, batch_size=128
        )
    if kind in ("transe", "distmult", "complex"):
        return {"dim": 200}, TrainConfig(optimizer="adam", lr=0.001, k=50, batch_size=128)
    raise ValueError(f"no default configuration for model {kind!r}")


def _clamped(p):
    return np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)


def bce_loss(p, y):
    """Mean binary cross-entropy with probabilities clamped away from 0 and 1."""
    p = np.asarray(p, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if p.shape != y.shape:
        raise ValueError(f"length mismatch: {p.shape} vs {y.shape}")
    pc = _clamped(p)
    return float(-np.mean(y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc)))


def bce_with_logits(scores, y, n_total=None):
    """Loss sum over entries divided by ``n_total`` and its gradient w.r.t. scores.

    The clamp acts as a stop: entries whose probability was clamped get no
    gradient.
    """
    n_total = y.size if n_total is None else n_total
    p = expit(scores)
    pc = _clamped(p)
    loss = -np.sum(y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc)) / n_total
    grad = np.where(pc == p, p - y, 0.0) / n_total
    return float(loss), grad


def smooth_labels(y, eps, n_e):
    if not 0.0 <= eps < 1.0:
        raise ValueError("label smoothing must lie in [0, 1)")
    return (1.0 - eps) * np.asarray(y, dtype=np.float64) + eps / n_e


def sgd_step(param, grad, lr):
    return param - lr * grad


@dataclass
class AdamMoments:
    m: np.ndarray
    v: np.ndarray
    t: int = 0


def adam_step(param, grad, state, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """Bias-corrected Adam; returns the new parameter and moments."""
    if state is None:
        state = AdamMoments(np.zeros_like(param), np.zeros_like(param))
    t = state.t + 1
    m = beta1 * state.m + (1.0 - beta1) * grad
    v = beta2 * state.v + (1.0 - beta2) * grad * grad
    m_hat = m / (1.0 - beta1**t)
    v_hat = v / (1.0 - beta2**t)
    return param - lr * m_hat / (np.sqrt(v_hat) + eps), AdamMoments(m, v, t)


def rsgd_step(theta, egrad, lr, c=1.0):
    """Riemannian SGD: rescale by the inverse metric, move along exp_theta."""
    lam = pb.conformal_factor(theta, c)[..., None]
    rgrad = egrad / lam**2
    return pb.project_to_ball(pb.exp_map(theta, -lr * rgrad, c), c)


@dataclass
class OptimizerState:
    """Current learning rate plus Adam moments keyed by parameter name."""

    lr: float
    moments: dict = field(default_factory=dict)
    steps: int = 0


def _apply_updates(model, params, grads, config, state):
    c = params.settings.get("curvature", 1.0)
    lr = state.lr
    for name, g in grads.items():
        if name in model.ball_params:
            rows = np.flatnonzero(np.any(g != 0.0, axis=1))
            if len(rows):
                params[name][rows] = rsgd_step(params[name][rows], g[rows], lr, c)
        elif config.optimizer == "adam":
            params[name], state.moments[name] = adam_step(
                params[name], g, state.moments.get(name), lr
            )
        else:
            params[name] = sgd_step(params[name], g, lr)
    state.steps += 1


def _sum_grads(parts):
    total = parts[0]
    for part in parts[1:]:
        for k, v in part.items():
            total[k] = total[k] + v
    return total


def _chunks(n, threads):
    bounds = np.linspace(0, n, min(threads, n) + 1).astype(int)
    return [(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def _run_chunks(fn, n, threads):
    # fixed-order reduction keeps results deterministic for a given thread count
    spans = _chunks(n, threads)
    if len(spans) == 1:
        return [fn(*spans[0])]
    with ThreadPoolExecutor(max_workers=len(spans)) as pool:
        return list(pool.map(lambda ab: fn(*ab), spans))


def _diagnose(params, batch_index, batch):
    norms = ", ".join(f"{k}={v:.4g}" for k, v in params.norms().items())
    return f"non-finite loss or gradient at batch {batch_index} (first triples {batch[:3].tolist()}); parameter norms: {norms}"


def _one_vs_all_batch(model, params, store, config, pairs, objects, rng):
    n_e = store.n_e
    b = len(pairs)
    drop = Dropout(config.dropout, rng) if model.dropout_sites and config.dropout else None

    def work(lo, hi):
        y = np.zeros((hi - lo, n_e))
        for row, objs in enumerate(objects[lo:hi]):
            y[row, objs] = 1.0
        if config.label_smoothing:
            y = smooth_labels(y, config.label_smoothing, n_e)
        out = {}

        def upstream(scores):
            out["loss"], grad = bce_with_logits(scores.reshape(y.shape), y, b * n_e)
            return grad

        _, grads = model.score_all_grad(params, pairs[lo:hi, 0], pairs[lo:hi, 1], upstream, drop)
        return out["loss"], grads

    results = _run_chunks(work, b, config.threads)
    return sum(r[0] for r in results), _sum_grads([r[1] for r in results])


def _negative_sampling_batch(model, params, store, config, batch, rng):
    neg = sample_negatives(store, batch, config.k, rng)
    triples, labels = neg.triples_and_labels()
    n = len(triples)
    drop = Dropout(config.dropout, rng) if model.dropout_sites and config.dropout else None
    width = config.k + 1

    def work(lo, hi):
        t = triples[lo * width:hi * width]
        y = labels[lo * width:hi * width]
        out = {}

        def upstream(scores):
            out["loss"], grad = bce_with_logits(scores, y, n)
            return grad

        _, grads = model.score_grad(params, t[:, 0], t[:, 1], t[:, 2], upstream, drop)
        return out["loss"], grads

    results = _run_chunks(work, len(batch), config.threads)
    return sum(r[0] for r in results), _sum_grads([r[1] for r in results])


def train_epoch(model, params, store, config, state, rng):
    """One shuffled pass over the training split; updates ``params`` in place.

    Returns the sample-weighted mean batch loss.  The learning rate in
    ``state`` is multiplied by ``config.lr_decay`` afterwards.
    """
    if isinstance(model, str):
        model = get_model(model)
    if config.regime == "one-vs-all":
        if not store.reciprocal:
            raise ValueError("1-N training needs a store with reciprocal relations")
        units = train_pairs(store)
    else:
        units = None
    n = len(units[0]) if units else len(store.train)
    order = rng.permutation(n)
    # overflow is detected explicitly and reported as NumericalError
    with np.errstate(over="ignore", invalid="ignore"):
        total, weight = _run_epoch(model, params, store, config, state, rng, order, units)
    state.lr *= config.lr_decay
    return total / max(weight, 1)


def _run_epoch(model, params, store, config, state, rng, order, units):
    total, weight = 0.0, 0
    for bi, start in enumerate(range(0, len(order), config.batch_size)):
        idx = order[start:start + config.batch_size]
        if units:
            pairs, objects = units
            batch = pairs[idx]
            loss, grads = _one_vs_all_batch(
                model, params, store, config, batch, [objects[i] for i in idx], rng
            )
        else:
            batch = store.train[idx]
            loss, grads = _negative_sampling_batch(model, params, store, config, batch, rng)
        if not np.isfinite(loss) or not all(np.isfinite(g).all() for g in grads.values()):
            raise NumericalError(_diagnose(params, bi, batch))
        _apply_updates(model, params, grads, config, state)
        total += loss * len(idx)
        weight += len(idx)
    return total, weight
