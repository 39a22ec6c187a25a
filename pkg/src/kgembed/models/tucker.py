"""TuckER: a shared core tensor contracted with subject, relation and object."""

import numpy as np

from .base import BilinearModel, _drop, _undrop, _uniform


class TuckER(BilinearModel):
    """``core x1 e_s x2 w_r x3 e_o``.

    The query is ``drop3(drop1(e_s) @ drop2(W_r))`` where ``W_r`` mixes the
    core along its relation mode; dropout sites are ``input``, ``relation``
    and ``hidden``.
    """

    kind = "tucker"
    dropout_sites = ("input", "relation", "hidden")

    def default_settings(self):
        return {"dim": 200, "rel_dim": 30}

    def shapes(self, n_e, n_r, settings):
        d_e, d_r = settings["dim"], settings["rel_dim"]
        return {"E": (n_e, d_e), "Rvec": (n_r, d_r), "core": (d_e, d_r, d_e)}

    def init(self, n_e, n_r, rng, scale=1.0, **settings):
        p = self.zeros(n_e, n_r, **settings)
        d_e, d_r = p.settings["dim"], p.settings["rel_dim"]
        p["E"] = _uniform(rng, (n_e, d_e), scale)
        p["Rvec"] = _uniform(rng, (n_r, d_r), scale)
        p["core"] = rng.uniform(-1.0, 1.0, size=(d_e, d_r, d_e)) / np.sqrt(d_e * d_r)
        return p

    def relation_matrices(self, p, r):
        """``W_r[b, i, k] = sum_j core[i, j, k] * w_r[b, j]``."""
        return np.einsum("ijk,bj->bik", p["core"], p["Rvec"][r])

    def query(self, p, s, r, dropout=None):
        x, m1 = _drop(dropout, "input", p["E"][s])
        w_r = p["Rvec"][r]
        mats, m2 = _drop(dropout, "relation", self.relation_matrices(p, r))
        h = np.einsum("bi,bik->bk", x, mats)
        q, m3 = _drop(dropout, "hidden", h)
        return q, (s, r, x, w_r, mats, m1, m2, m3)

    def query_backward(self, p, cache, dq, grads):
        s, r, x, w_r, mats, m1, m2, m3 = cache
        dh = _undrop(m3, dq)
        dmats = _undrop(m2, np.einsum("bi,bk->bik", x, dh))
        dx = _undrop(m1, np.einsum("bik,bk->bi", mats, dh))
        np.add.at(grads["E"], s, dx)
        grads["core"] += np.einsum("bik,bj->ijk", dmats, w_r)
        np.add.at(grads["Rvec"], r, np.einsum("ijk,bik->bj", p["core"], dmats))
