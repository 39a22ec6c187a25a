"""HypER: relation-specific 1-D convolution filters from a hypernetwork."""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .base import BilinearModel, _drop, _undrop, _uniform


class HypER(BilinearModel):
    """``relu(vec(conv(e_s, F_r)) @ W) . e_o`` with ``F_r = reshape(w_r @ H)``.

    ``F_r`` has shape ``(filter_len, n_filters)`` (row-major reshape), the
    convolution uses stride 1 and no padding, so the feature map has
    ``dim - filter_len + 1`` rows.  Dropout sites: ``input``, ``feature``
    and ``hidden``.
    """

    kind = "hyper"
    dropout_sites = ("input", "feature", "hidden")

    def default_settings(self):
        return {"dim": 200, "rel_dim": 200, "n_filters": 32, "filter_len": 9}

    def _dims(self, settings):
        d_e, l_f, n_f = settings["dim"], settings["filter_len"], settings["n_filters"]
        if l_f > d_e:
            raise ValueError(f"filter length {l_f} exceeds embedding dimension {d_e}")
        return d_e, settings["rel_dim"], l_f, n_f, d_e - l_f + 1

    def shapes(self, n_e, n_r, settings):
        d_e, d_r, l_f, n_f, l_m = self._dims(settings)
        return {
            "E": (n_e, d_e),
            "Rvec": (n_r, d_r),
            "H": (d_r, l_f * n_f),
            "W": (l_m * n_f, d_e),
        }

    def init(self, n_e, n_r, rng, scale=1.0, **settings):
        p = self.zeros(n_e, n_r, **settings)
        d_e, d_r, l_f, n_f, l_m = self._dims(p.settings)
        p["E"] = _uniform(rng, (n_e, d_e), scale)
        p["Rvec"] = _uniform(rng, (n_r, d_r), scale)
        # fan-in scaled so activations do not vanish with small embeddings
        p["H"] = rng.uniform(-1.0, 1.0, size=(d_r, l_f * n_f)) / np.sqrt(d_r)
        p["W"] = rng.uniform(-1.0, 1.0, size=(l_m * n_f, d_e)) / np.sqrt(l_m * n_f / 3.0)
        return p

    def filters(self, p, r):
        _, _, l_f, n_f, _ = self._dims(p.settings)
        return (p["Rvec"][r] @ p["H"]).reshape(-1, l_f, n_f)

    def feature_maps(self, e_s, filters):
        """``M[b, t, f] = sum_u e_s[b, t + u] * F[b, u, f]``."""
        l_f = filters.shape[1]
        win = sliding_window_view(e_s, l_f, axis=1)
        return np.einsum("btu,buf->btf", win, filters), win

    def query(self, p, s, r, dropout=None):
        x, m1 = _drop(dropout, "input", p["E"][s])
        w_r = p["Rvec"][r]
        filt = self.filters(p, r)
        fmap, win = self.feature_maps(x, filt)
        fmap_d, m2 = _drop(dropout, "feature", fmap)
        flat = fmap_d.reshape(len(s), -1)
        pre, m3 = _drop(dropout, "hidden", flat @ p["W"])
        q = np.maximum(pre, 0.0)
        return q, (s, r, w_r, filt, win, flat, pre, m1, m2, m3)

    def query_backward(self, p, cache, dq, grads):
        s, r, w_r, filt, win, flat, pre, m1, m2, m3 = cache
        dpre = _undrop(m3, np.where(pre > 0.0, dq, 0.0))
        grads["W"] += flat.T @ dpre
        dfmap = _undrop(m2, (dpre @ p["W"].T).reshape(filt.shape[0], -1, filt.shape[2]))
        dfilt = np.einsum("btu,btf->buf", win, dfmap)
        dwin = np.einsum("btf,buf->btu", dfmap, filt)
        l_m, l_f = dwin.shape[1], dwin.shape[2]
        dx = np.zeros((len(s), l_m + l_f - 1))
        for u in range(l_f):
            dx[:, u:u + l_m] += dwin[:, :, u]
        np.add.at(grads["E"], s, _undrop(m1, dx))
        dflat = dfilt.reshape(len(s), -1)
        grads["H"] += w_r.T @ dflat
        np.add.at(grads["Rvec"], r, dflat @ p["H"].T)

    def sparse_filter_tensor(self, p, r):
        """Tensor ``T[i, t, f] = F_r[i - t, f]`` (zero off the band), so that
        ``einsum('i,itf->tf', e_s, T)`` equals the convolution feature map."""
        d_e, _, l_f, n_f, l_m = self._dims(p.settings)
        filt = self.filters(p, np.atleast_1d(r))[0]
        tensor = np.zeros((d_e, l_m, n_f))
        for t in range(l_m):
            tensor[t:t + l_f, t, :] = filt
        return tensor

