"""MuRP: multi-relational embeddings in the Poincare ball."""

import numpy as np

from .. import poincare as pb
from .base import KGEModel, _ids, _upstream

BALL_INIT_NORM = 1e-3


class MuRP(KGEModel):
    """``-d_B(exp0(Rdiag_r * log0(h_s)), h_o (+) r_h)^2 + b_s[s] + b_o[o]``.

    ``E`` and ``Rvec`` are ball points (updated with RSGD); ``Rdiag`` and
    the biases are Euclidean.  Gradients returned here are Euclidean.
    """

    kind = "murp"
    ball_params = ("E", "Rvec")

    def default_settings(self):
        return {"dim": 200, "curvature": 1.0}

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
        near_origin = BALL_INIT_NORM / np.sqrt(d)
        p["E"] = rng.uniform(-1.0, 1.0, size=(n_e, d)) * near_origin
        p["Rdiag"] = rng.uniform(-1.0, 1.0, size=(n_r, d))
        p["Rvec"] = rng.uniform(-1.0, 1.0, size=(n_r, d)) * near_origin
        return p

    def _forward(self, p, s, r, o):
        c = p.settings["curvature"]
        h_s, diag = p["E"][s], p["Rdiag"][r]
        u = pb.log0(h_s, c)
        v = diag * u
        a = pb.exp0(v, c)
        b = pb.mobius_add(p["E"][o], p["Rvec"][r], c)
        w = pb.mobius_add(-a, b, c)
        return (h_s, diag, u, v, a, b, w)

    def score_grad(self, p, s, r, o, upstream=None, dropout=None, need_grad=True):
        s, r, o = _ids(s, r, o)
        c = p.settings["curvature"]
        h_s, diag, u, v, a, b, w = self._forward(p, s, r, o)
        sc = np.sqrt(c)
        dist = 2.0 / sc * pb._atanh(sc * np.linalg.norm(w, axis=1))
        scores = -dist**2 + p["b_s"][s] + p["b_o"][o]
        if not need_grad:
            return scores, None
        up = _upstream(upstream, scores)
        g_w = -up[:, None] * pb.sqdist_vjp(w, c)
        g_neg_a, g_b = pb.mobius_add_vjp(-a, b, g_w, c)
        g_ho, g_rh = pb.mobius_add_vjp(p["E"][o], p["Rvec"][r], g_b, c)
        g_v = pb.exp0_vjp(v, -g_neg_a, c)
        g_hs = pb.log0_vjp(h_s, g_v * diag, c)
        grads = {name: np.zeros_like(arr) for name, arr in p.arrays.items()}
        np.add.at(grads["E"], s, g_hs)
        np.add.at(grads["E"], o, g_ho)
        np.add.at(grads["Rdiag"], r, g_v * u)
        np.add.at(grads["Rvec"], r, g_rh)
        np.add.at(grads["b_s"], s, up)
        np.add.at(grads["b_o"], o, up)
        return scores, grads

    def score_all(self, p, s, r):
        s, r = _ids(s, r)
        c = p.settings["curvature"]
        a = pb.exp0(p["Rdiag"][r] * pb.log0(p["E"][s], c), c)
        b = pb.mobius_add(p["E"][None, :, :], p["Rvec"][r][:, None, :], c)
        dist = pb.distance(a[:, None, :], b, c)
        return -dist**2 + p["b_s"][s][:, None] + p["b_o"][None, :]

    def transformed(self, p, s, r, objects):
        c = p.settings["curvature"]
        a = pb.exp0(p["Rdiag"][r] * pb.log0(p["E"][s], c), c)
        b = pb.mobius_add(p["E"][objects], p["Rvec"][r], c)
        return a, b
