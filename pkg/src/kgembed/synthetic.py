"""Planted-hierarchy toy graph used by the scaled experiments and tests."""

import numpy as np

from .data import build_store, resplit_random

HIER = "ancestor_of"
SIBLING = "sibling_of"


def binary_tree_triples(depth=5):
    """Raw triples over a balanced binary tree with ``2**(depth+1) - 1`` nodes.

    ``ancestor_of`` holds the transitive closure (every node to every proper
    descendant); ``sibling_of`` links both children of each parent, both ways.
    """
    n = 2 ** (depth + 1) - 1
    name = [f"n{i}" for i in range(n)]
    triples = []
    for node in range(1, n):
        a = node
        while a:
            a = (a - 1) // 2
            triples.append((name[a], HIER, name[node]))
    for parent in range((n - 1) // 2):
        left, right = 2 * parent + 1, 2 * parent + 2
        triples.append((name[left], SIBLING, name[right]))
        triples.append((name[right], SIBLING, name[left]))
    return triples


def planted_hierarchy(depth=5, holdout=0.2, seed=0):
    """Store with ``holdout`` of all edges moved out of train, split evenly
    between valid and test.  Every entity and relation stays in train."""
    raw = binary_tree_triples(depth)
    store = build_store(raw)
    held = int(round(holdout * len(raw)))
    rng = np.random.Generator(np.random.Philox(seed))
    return resplit_random(store, held - held // 2, held // 2, rng)
