"""Relation-structure metrics: hierarchy, path lengths, symmetry of
relation matrices, offset norms, diagonal spectra and a 2-D projection."""

import math
from collections import defaultdict, deque

import numpy as np

from .linalg import mode3_mix


def relation_graphs(store, splits=("train",)):
    """Directed adjacency ``{node: set(successors)}`` per original relation."""
    graphs = {r: defaultdict(set) for r in range(store.n_r_base)}
    for name in splits:
        for s, r, o in store.split(name).tolist():
            if r < store.n_r_base:
                graphs[r][s].add(o)
    return graphs


def _as_graph(g):
    if isinstance(g, dict):
        return g
    adj = defaultdict(set)
    for a, b in g:
        adj[a].add(b)
    return adj


def _bfs(adj, source):
    dist = {source: 0}
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for v in adj.get(u, ()):
            if v not in dist:
                dist[v] = dist[u] + 1
                queue.append(v)
    del dist[source]
    # a cycle back to the source is not an (x, y) pair with x != y
    return dist


def _reach(g):
    adj = _as_graph(g)
    nodes = set(adj)
    for succ in list(adj.values()):
        nodes |= succ
    return {n: _bfs(adj, n) for n in nodes}


def krackhardt_score(g):
    """Fraction of reachable ordered pairs ``x != y`` that are one-way.

    Accepts an adjacency dict or an iterable of ``(source, target)`` edges;
    a graph without any reachable pair scores 0.
    """
    return _khs(_reach(g))


def _khs(reach):
    reachable = one_way = 0
    for x, targets in reach.items():
        reachable += len(targets)
        one_way += sum(1 for y in targets if x not in reach[y])
    return one_way / reachable if reachable else 0.0


def path_stats(g):
    """Max and mean shortest-path length over ordered pairs with a path."""
    return _paths(_reach(g))


def _paths(reach):
    lengths = [d for targets in reach.values() for d in targets.values()]
    if not lengths:
        return 0, 0.0
    return int(max(lengths)), float(np.mean(lengths))


def symmetry_score(m):
    """Hubert-Baker symmetry statistic over off-diagonal entries.

    1 for symmetric and -1 for anti-symmetric matrices; ``None`` when all
    off-diagonal entries are equal (zero denominator).
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 2:
        raise ValueError(f"need a square matrix of order >= 2, got shape {m.shape}")
    n = m.shape[0]
    off = ~np.eye(n, dtype=bool)
    # exactly rounded sums keep the symmetric / anti-symmetric endpoints exact
    total = math.fsum(m[off])
    correction = total**2 / (n * (n - 1))
    squares = math.fsum((m * m)[off])
    num = math.fsum((m * m.T)[off]) - correction
    den = squares - correction
    if abs(den) <= 1e-14 * max(1.0, squares):
        return None
    return float(num / den)


def relation_matrices(params):
    """Full relation matrices where the model has them (TuckER)."""
    if params.kind == "tucker":
        return [mode3_mix(params["core"], w) for w in params["Rvec"]]
    if params.kind in ("distmult", "mure", "murp"):
        diag = params["Rdiag"] if params.kind != "distmult" else params["Rvec"]
        return [np.diag(d) for d in diag]
    raise ValueError(f"model {params.kind!r} has no relation matrices")


def vector_norms(params):
    """Euclidean norm of each relation's translation vector."""
    if params.kind not in ("transe", "mure", "murp"):
        raise ValueError(f"model {params.kind!r} has no relation offset vectors")
    return np.linalg.norm(params["Rvec"], axis=1)


def spectrum_diagonal(params):
    """Sorted ``|diag|`` per relation scaled to a leading value of 1.

    Returns the ``(n_r, d)`` magnitudes and a mask of all-zero (degenerate)
    diagonals, which are left as zeros.
    """
    if params.kind in ("mure", "murp"):
        diag = params["Rdiag"]
    elif params.kind == "distmult":
        diag = params["Rvec"]
    else:
        raise ValueError(
            f"model {params.kind!r} has no diagonal relation matrices; "
            "use symmetry_score on its full matrices instead"
        )
    mags = -np.sort(-np.abs(diag), axis=1)
    lead = mags[:, :1]
    degenerate = lead[:, 0] == 0.0
    return np.divide(mags, lead, out=np.zeros_like(mags), where=lead > 0), degenerate


def project_2d(subject, objects):
    """Place objects by their component along ``subject`` and the remainder.

    The subject itself maps to ``(||subject||, 0)``.
    """
    subject = np.asarray(subject, dtype=np.float64)
    objects = np.atleast_2d(np.asarray(objects, dtype=np.float64))
    norm = np.linalg.norm(subject)
    if norm == 0.0:
        raise ValueError("subject embedding has zero norm")
    unit = subject / norm
    x = objects @ unit
    # norm of the orthogonal remainder; equals sqrt(|e|^2 - x^2) without the cancellation
    y = np.linalg.norm(objects - x[:, None] * unit, axis=1)
    return np.stack([x, y], axis=1)


def khs_table(store, splits=("train",)):
    """Khs, max path and mean path per original relation, keyed by name."""
    out = {}
    for r, g in relation_graphs(store, splits).items():
        reach = _reach(g)
        longest, mean = _paths(reach)
        out[store.relations[r]] = {
            "khs": _khs(reach),
            "max_path": longest,
            "avg_path": mean,
        }
    return out
