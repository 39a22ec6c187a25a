"""Translational, diagonal and complex score functions in flat space."""

import numpy as np

from .base import BilinearModel, KGEModel, _ids, _uniform, _upstream


def _zero_grads(p):
    return {name: np.zeros_like(arr) for name, arr in p.arrays.items()}


class TransE(KGEModel):
    """``-||e_s + r - e_o||^2``."""

    kind = "transe"

    def shapes(self, n_e, n_r, settings):
        d = settings["dim"]
        return {"E": (n_e, d), "Rvec": (n_r, d)}

    def score_grad(self, p, s, r, o, upstream=None, dropout=None, need_grad=True):
        s, r, o = _ids(s, r, o)
        u = p["E"][s] + p["Rvec"][r] - p["E"][o]
        scores = -np.sum(u * u, axis=1)
        if not need_grad:
            return scores, None
        up = _upstream(upstream, scores)
        g = -2.0 * up[:, None] * u
        grads = _zero_grads(p)
        np.add.at(grads["E"], s, g)
        np.add.at(grads["E"], o, -g)
        np.add.at(grads["Rvec"], r, g)
        return scores, grads

    def score_all(self, p, s, r):
        s, r = _ids(s, r)
        q = p["E"][s] + p["Rvec"][r]
        return -_pairwise_sqdist(q, p["E"])

    def transformed(self, p, s, r, objects):
        return p["E"][s] + p["Rvec"][r], p["E"][objects]


def _pairwise_sqdist(a, b):
    # a: (B, d), b: (N, d) -> (B, N); explicit differences keep exact zeros exact
    return np.sum((a[:, None, :] - b[None, :, :]) ** 2, axis=2)


class DistMult(BilinearModel):
    """``<e_s, w_r, e_o>``."""

    kind = "distmult"

    def shapes(self, n_e, n_r, settings):
        d = settings["dim"]
        return {"E": (n_e, d), "Rvec": (n_r, d)}

    def query(self, p, s, r, dropout=None):
        e_s, w = p["E"][s], p["Rvec"][r]
        return e_s * w, (s, r, e_s, w)

    def query_backward(self, p, cache, dq, grads):
        s, r, e_s, w = cache
        np.add.at(grads["E"], s, dq * w)
        np.add.at(grads["Rvec"], r, dq * e_s)


class ComplEx(BilinearModel):
    """``Re<e_s, w_r, conj(e_o)>``; rows hold real parts then imaginary parts."""

    kind = "complex"

    def shapes(self, n_e, n_r, settings):
        d = settings["dim"]
        return {"E": (n_e, 2 * d), "Rvec": (n_r, 2 * d)}

    def query(self, p, s, r, dropout=None):
        d = p.settings["dim"]
        e_s, w = p["E"][s], p["Rvec"][r]
        sr, si = e_s[:, :d], e_s[:, d:]
        wr, wi = w[:, :d], w[:, d:]
        q = np.concatenate([sr * wr - si * wi, si * wr + sr * wi], axis=1)
        return q, (s, r, sr, si, wr, wi)

    def query_backward(self, p, cache, dq, grads):
        d = p.settings["dim"]
        s, r, sr, si, wr, wi = cache
        qr, qi = dq[:, :d], dq[:, d:]
        g_s = np.concatenate([qr * wr + qi * wi, -qr * wi + qi * wr], axis=1)
        g_w = np.concatenate([qr * sr + qi * si, -qr * si + qi * sr], axis=1)
        np.add.at(grads["E"], s, g_s)
        np.add.at(grads["Rvec"], r, g_w)


class MuRE(KGEModel):
    """``-||Rdiag_r * e_s - (e_o + r)||^2 + b_s[s] + b_o[o]``."""

    kind = "mure"

    def shapes(self, n_e, n_r, settings):
        d = settings["dim"]
        return {
            "E": (n_e, d),
            "Rdiag": (n_r, d),
            "Rvec": (n_r, d),
            "b_s": (n_e,),
            "b_o": (n_e,),
        }

    def init(self, n_e, n_r, rng, scale=1.0, **settings):
        p = self.zeros(n_e, n_r, **settings)
        d = p.settings["dim"]
        p["E"] = _uniform(rng, (n_e, d), scale)
        p["Rdiag"] = rng.uniform(-1.0, 1.0, size=(n_r, d))
        p["Rvec"] = _uniform(rng, (n_r, d), scale)
        return p

    def score_grad(self, p, s, r, o, upstream=None, dropout=None, need_grad=True):
        s, r, o = _ids(s, r, o)
        e_s, diag = p["E"][s], p["Rdiag"][r]
        u = diag * e_s - p["E"][o] - p["Rvec"][r]
        scores = -np.sum(u * u, axis=1) + p["b_s"][s] + p["b_o"][o]
        if not need_grad:
            return scores, None
        up = _upstream(upstream, scores)
        g = -2.0 * up[:, None] * u
        grads = _zero_grads(p)
        np.add.at(grads["E"], s, g * diag)
        np.add.at(grads["Rdiag"], r, g * e_s)
        np.add.at(grads["E"], o, -g)
        np.add.at(grads["Rvec"], r, -g)
        np.add.at(grads["b_s"], s, up)
        np.add.at(grads["b_o"], o, up)
        return scores, grads

    def score_all(self, p, s, r):
        s, r = _ids(s, r)
        q = p["Rdiag"][r] * p["E"][s] - p["Rvec"][r]
        return -_pairwise_sqdist(q, p["E"]) + p["b_s"][s][:, None] + p["b_o"][None, :]

    def transformed(self, p, s, r, objects):
        return p["Rdiag"][r] * p["E"][s], p["E"][objects] + p["Rvec"][r]
