"""Score functions with analytic gradients for seven embedding models."""

import numpy as np

from .base import Dropout, KGEModel, ModelParams, ScoreGrad, apply_dropout
from .euclidean import ComplEx, DistMult, MuRE, TransE
from .hyper import HypER
from .hyperbolic import MuRP
from .reference import build_fully_expressive_tucker, build_special_case_core, score_reference
from .tucker import TuckER

MODELS = {
    m.kind: m
    for m in (TransE(), DistMult(), ComplEx(), TuckER(), MuRE(), MuRP(), HypER())
}


def get_model(kind):
    try:
        return MODELS[kind]
    except KeyError:
        raise ValueError(f"unknown model {kind!r}; expected one of {sorted(MODELS)}") from None


def score(p, s, r, o):
    """Score of a single triple under ``p``'s model."""
    return float(get_model(p.kind).score(p, s, r, o)[0])


def score_and_grad(p, s, r, o=None):
    """:class:`ScoreGrad` for one triple, or a list over all objects when
    ``o`` is omitted."""
    model = get_model(p.kind)
    if o is not None:
        scores, grads = model.score_grad(p, s, r, o)
        return ScoreGrad(float(scores[0]), grads)
    out = []
    for obj in range(p.n_e):
        scores, grads = model.score_grad(p, s, r, obj)
        out.append(ScoreGrad(float(scores[0]), grads))
    return out


__all__ = [
    "MODELS",
    "ComplEx",
    "DistMult",
    "Dropout",
    "HypER",
    "KGEModel",
    "ModelParams",
    "MuRE",
    "MuRP",
    "ScoreGrad",
    "TransE",
    "TuckER",
    "apply_dropout",
    "build_fully_expressive_tucker",
    "build_special_case_core",
    "get_model",
    "score",
    "score_and_grad",
    "score_reference",
]
