"""Poincare ball geometry with curvature ``-c``.

Points and tangent vectors are float64 arrays whose last axis holds the
coordinates; every function broadcasts over leading axes, so a batch of
points is an array of shape ``(..., d)``.  Results that are ball points
are re-projected so that ``||x|| <= (1 - BALL_EPS) / sqrt(c)``.

The ``*_vjp`` helpers return vector-Jacobian products of the matching
forward maps.  They ignore the re-projection step, which is the identity
everywhere except on the retraction margin.
"""

import numpy as np

BALL_EPS = 1e-5
ATANH_MAX = 1.0 - 1e-15
MIN_NORM = 1e-300
# below this |t| the tanh(t)/t style ratios switch to their Taylor series
_SERIES_T = 1e-4


def _check_c(c):
    if not c > 0:
        raise ValueError(f"curvature must be positive, got {c}")


def _pair(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape[-1:] != y.shape[-1:]:
        raise ValueError(f"dimension mismatch: {x.shape[-1:]} vs {y.shape[-1:]}")
    return x, y


def _sqnorm(x):
    return np.sum(x * x, axis=-1, keepdims=True)


def _atanh(z):
    return np.arctanh(np.minimum(z, ATANH_MAX))


def tanh_ratio(t):
    """``tanh(t) / t`` with the limit 1 at ``t = 0``."""
    t = np.asarray(t, dtype=np.float64)
    small = np.abs(t) < _SERIES_T
    safe = np.where(small, 1.0, t)
    return np.where(small, 1.0 - t * t / 3.0, np.tanh(safe) / safe)


def atanh_ratio(t):
    """``atanh(t) / t`` with the limit 1 at ``t = 0``."""
    t = np.asarray(t, dtype=np.float64)
    small = np.abs(t) < _SERIES_T
    safe = np.where(small, 1.0, t)
    return np.where(small, 1.0 + t * t / 3.0, _atanh(safe) / safe)


def _tanh_ratio_slope(t):
    # d/dt [tanh(t)/t] divided by t
    small = np.abs(t) < _SERIES_T
    safe = np.where(small, 1.0, t)
    th = np.tanh(safe)
    exact = (safe * (1.0 - th * th) - th) / safe**3
    return np.where(small, -2.0 / 3.0 + 8.0 / 15.0 * t * t, exact)


def _atanh_ratio_slope(t):
    # d/dt [atanh(t)/t] divided by t
    small = np.abs(t) < _SERIES_T
    safe = np.where(small, 1.0, np.minimum(t, ATANH_MAX))
    exact = (safe / (1.0 - safe * safe) - _atanh(safe)) / safe**3
    return np.where(small, 2.0 / 3.0 + 0.8 * t * t, exact)


def project_to_ball(v, c=1.0):
    """Pull points back inside the ball, leaving interior points untouched."""
    _check_c(c)
    v = np.asarray(v, dtype=np.float64)
    sq = _sqnorm(v)
    limit = (1.0 - BALL_EPS) ** 2
    outside = c * sq >= limit
    if not np.any(outside):
        return v
    scale = np.where(outside, (1.0 - BALL_EPS) / np.sqrt(c * np.where(outside, sq, 1.0)), 1.0)
    return v * scale


def in_ball(x, c=1.0):
    """True when every point satisfies the strict ball invariant."""
    return bool(np.all(c * _sqnorm(np.asarray(x, dtype=np.float64)) < 1.0))


def conformal_factor(x, c=1.0):
    _check_c(c)
    x = np.asarray(x, dtype=np.float64)
    return 2.0 / (1.0 - c * np.sum(x * x, axis=-1))


def _mobius_raw(x, y, c):
    xy = np.sum(x * y, axis=-1, keepdims=True)
    x2 = _sqnorm(x)
    y2 = _sqnorm(y)
    num = (1.0 + 2.0 * c * xy + c * y2) * x + (1.0 - c * x2) * y
    den = 1.0 + 2.0 * c * xy + c * c * x2 * y2
    return num / den


def mobius_add(x, y, c=1.0):
    _check_c(c)
    x, y = _pair(x, y)
    return project_to_ball(_mobius_raw(x, y, c), c)


def mobius_add_vjp(x, y, g, c=1.0):
    """Gradients of ``<g, x (+) y>`` with respect to ``x`` and ``y``."""
    xy = np.sum(x * y, axis=-1, keepdims=True)
    x2 = _sqnorm(x)
    y2 = _sqnorm(y)
    a = 1.0 + 2.0 * c * xy + c * y2
    b = 1.0 - c * x2
    den = 1.0 + 2.0 * c * xy + c * c * x2 * y2
    z = (a * x + b * y) / den
    g_num = g / den
    g_den = -np.sum(g * z, axis=-1, keepdims=True) / den
    g_a = np.sum(g_num * x, axis=-1, keepdims=True)
    g_b = np.sum(g_num * y, axis=-1, keepdims=True)
    gx = (
        a * g_num
        + g_a * (2.0 * c * y)
        + g_b * (-2.0 * c * x)
        + g_den * (2.0 * c * y + 2.0 * c * c * y2 * x)
    )
    gy = (
        b * g_num
        + g_a * (2.0 * c * x + 2.0 * c * y)
        + g_den * (2.0 * c * x + 2.0 * c * c * x2 * y)
    )
    return gx, gy


def distance(x, y, c=1.0):
    """Geodesic distance ``(2/sqrt c) atanh(sqrt c ||(-x) (+) y||)``."""
    _check_c(c)
    x, y = _pair(x, y)
    w = mobius_add(-x, y, c)
    sc = np.sqrt(c)
    d = 2.0 / sc * _atanh(sc * np.linalg.norm(w, axis=-1))
    # (-x) (+) x can round to a tiny nonzero; identical points are exactly 0 apart
    return np.where(np.all(x == y, axis=-1), 0.0, d)


def sqdist_vjp(w, c=1.0):
    """Gradient of ``d^2 = ((2/sqrt c) atanh(sqrt c ||w||))^2`` w.r.t. ``w``."""
    sc = np.sqrt(c)
    n = np.sqrt(_sqnorm(w))
    t = sc * n
    ratio = atanh_ratio(t)
    return 8.0 * ratio * w / (1.0 - np.minimum(t, ATANH_MAX) ** 2)


def exp_map(x, v, c=1.0):
    _check_c(c)
    x, v = _pair(x, v)
    sc = np.sqrt(c)
    vn = np.sqrt(_sqnorm(v))
    lam = conformal_factor(x, c)[..., None]
    # tanh(sqrt c * lam * |v| / 2) * v / (sqrt c |v|)
    t = sc * lam * vn / 2.0
    step = tanh_ratio(t) * (lam / 2.0) * v
    step = np.where(vn < MIN_NORM, 0.0, step)
    return mobius_add(x, step, c)


def log_map(x, y, c=1.0):
    _check_c(c)
    x, y = _pair(x, y)
    sc = np.sqrt(c)
    w = mobius_add(-x, y, c)
    wn = np.sqrt(_sqnorm(w))
    lam = conformal_factor(x, c)[..., None]
    out = (2.0 / lam) * atanh_ratio(sc * wn) * w
    return np.where(wn < MIN_NORM, 0.0, out)


def exp0(v, c=1.0):
    """Exponential map at the origin: ``tanh(sqrt c |v|) v / (sqrt c |v|)``."""
    _check_c(c)
    v = np.asarray(v, dtype=np.float64)
    t = np.sqrt(c) * np.sqrt(_sqnorm(v))
    return project_to_ball(tanh_ratio(t) * v, c)


def log0(y, c=1.0):
    """Logarithmic map at the origin: ``atanh(sqrt c |y|) y / (sqrt c |y|)``."""
    _check_c(c)
    y = np.asarray(y, dtype=np.float64)
    t = np.sqrt(c) * np.sqrt(_sqnorm(y))
    return atanh_ratio(t) * y


def exp0_vjp(v, g, c=1.0):
    t = np.sqrt(c) * np.sqrt(_sqnorm(v))
    gv = np.sum(g * v, axis=-1, keepdims=True)
    return tanh_ratio(t) * g + c * _tanh_ratio_slope(t) * gv * v


def log0_vjp(y, g, c=1.0):
    t = np.sqrt(c) * np.sqrt(_sqnorm(y))
    gy = np.sum(g * y, axis=-1, keepdims=True)
    return atanh_ratio(t) * g + c * _atanh_ratio_slope(t) * gy * y


def mobius_matvec(m, x, c=1.0):
    """Mobius matrix-vector product ``exp0(M log0(x))``."""
    _check_c(c)
    m = np.asarray(m, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if m.ndim != 2 or m.shape[1] != x.shape[-1]:
        raise ValueError(f"cannot apply matrix {m.shape} to points of dimension {x.shape[-1]}")
    return exp0(log0(x, c) @ m.T, c)
