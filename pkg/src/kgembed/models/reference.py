"""Special-case TuckER cores, reference scorers and the one-hot
fully expressive construction."""

import numpy as np

from .base import ModelParams


def build_special_case_core(kind, dim):
    """Core tensor under which TuckER reproduces DistMult, ComplEx or SimplE.

    ComplEx and SimplE cores act on ``2 * dim`` vectors laid out as
    ``[real; imag]`` and ``[head; tail]`` respectively, with relation
    vectors ``[real; imag]`` and ``[forward; inverse]``.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    i = np.arange(dim)
    if kind == "distmult":
        core = np.zeros((dim, dim, dim))
        core[i, i, i] = 1.0
    elif kind == "complex":
        core = np.zeros((2 * dim,) * 3)
        core[i, i, i] = 1.0
        core[dim + i, i, dim + i] = 1.0
        core[i, dim + i, dim + i] = 1.0
        core[dim + i, dim + i, i] = -1.0
    elif kind == "simple":
        core = np.zeros((2 * dim,) * 3)
        core[i, i, dim + i] = 0.5
        core[dim + i, dim + i, i] = 0.5
    else:
        raise ValueError(f"unknown special-case kind {kind!r}; expected distmult, complex or simple")
    return core


def score_reference(kind, arrays, s, r, o):
    """Non-trainable scorers used as equivalence oracles.

    ``rescal`` needs ``E`` (n_e, d) and ``R`` (n_r, d, d);
    ``simple`` needs head/tail entity tables ``Eh``, ``Et`` and forward /
    inverse relation tables ``W``, ``W_inv``.
    """
    if kind == "rescal":
        return float(arrays["E"][s] @ arrays["R"][r] @ arrays["E"][o])
    if kind == "simple":
        fwd = np.sum(arrays["Eh"][s] * arrays["W"][r] * arrays["Et"][o])
        inv = np.sum(arrays["Eh"][o] * arrays["W_inv"][r] * arrays["Et"][s])
        return float(0.5 * (fwd + inv))
    raise ValueError(f"unknown reference scorer {kind!r}")


def build_fully_expressive_tucker(truth):
    """One-hot TuckER whose core holds +1 for true facts and -1 otherwise."""
    truth = np.asarray(truth, dtype=bool)
    n_e, n_r, n_e2 = truth.shape
    if n_e != n_e2 or n_e < 1 or n_r < 1:
        raise ValueError(f"truth table must be n_e x n_r x n_e, got {truth.shape}")
    arrays = {
        "E": np.eye(n_e),
        "Rvec": np.eye(n_r),
        "core": np.where(truth, 1.0, -1.0),
    }
    return ModelParams("tucker", arrays, {"n_e": n_e, "n_r": n_r, "dim": n_e, "rel_dim": n_r})
