"""Dense kernels shared by all score functions.

Vectors, matrices and order-3 tensors are plain float64 numpy arrays in
C (row-major) order, so a tensor of shape ``(d1, d2, d3)`` stores entry
``(i, j, k)`` at flat offset ``((i * d2) + j) * d3 + k``.
"""

import numpy as np

DTYPE = np.float64


def _vec(a, name):
    a = np.asarray(a, dtype=DTYPE)
    if a.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {a.shape}")
    return a


def dot(a, b):
    a, b = _vec(a, "a"), _vec(b, "b")
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    return float(a @ b)


def mat_vec(m, v):
    m = np.asarray(m, dtype=DTYPE)
    v = _vec(v, "v")
    if m.ndim != 2 or m.shape[1] != v.shape[0]:
        raise ValueError(f"cannot multiply matrix {m.shape} by vector {v.shape}")
    return m @ v


def tucker_trilinear(w, a, b, c):
    """Contract an order-3 core with one vector along each mode."""
    w = np.asarray(w, dtype=DTYPE)
    a, b, c = _vec(a, "a"), _vec(b, "b"), _vec(c, "c")
    if w.ndim != 3 or w.shape != (a.shape[0], b.shape[0], c.shape[0]):
        raise ValueError(
            f"core of shape {w.shape} does not match vectors "
            f"({a.shape[0]}, {b.shape[0]}, {c.shape[0]})"
        )
    return float(np.einsum("ijk,i,j,k->", w, a, b, c))


def mode3_mix(w, b):
    """Mix the middle (relation) mode: ``M[i, k] = sum_j w[i, j, k] * b[j]``."""
    w = np.asarray(w, dtype=DTYPE)
    b = _vec(b, "b")
    if w.ndim != 3 or w.shape[1] != b.shape[0]:
        raise ValueError(f"core of shape {w.shape} cannot be mixed with vector {b.shape}")
    return np.einsum("ijk,j->ik", w, b)
