"""Union-find with displacement vectors on periodic lattices (numba kernels).

Each node stores its offset from its parent in unwrapped coordinates.  Joining two nodes that
already share a root with an inconsistent offset means the cluster closes a non-contractible
loop, i.e. it wraps the torus.
"""
from __future__ import annotations

import numba as nb
import numpy as np


@nb.njit(cache=True)
def _find(parent, disp, i):
    r = i
    while parent[r] != r:
        r = parent[r]
    # compress, rewriting offsets relative to the root
    node = i
    n = 0
    while parent[node] != node:
        n += 1
        node = parent[node]
    path = np.empty(n, dtype=np.int64)
    node = i
    for k in range(n):
        path[k] = node
        node = parent[node]
    d0 = 0
    d1 = 0
    d2 = 0
    for k in range(n - 1, -1, -1):
        node = path[k]
        d0 += disp[node, 0]
        d1 += disp[node, 1]
        d2 += disp[node, 2]
        disp[node, 0] = d0
        disp[node, 1] = d1
        disp[node, 2] = d2
        parent[node] = r
    return r


@nb.njit(cache=True)
def _union(parent, disp, size, a, b, e0, e1, e2):
    """Join a and b where pos(b) = pos(a) + e.  Returns True if this closes a wrapping loop."""
    ra = _find(parent, disp, a)
    rb = _find(parent, disp, b)
    da0 = disp[a, 0] if a != ra else 0
    da1 = disp[a, 1] if a != ra else 0
    da2 = disp[a, 2] if a != ra else 0
    db0 = disp[b, 0] if b != rb else 0
    db1 = disp[b, 1] if b != rb else 0
    db2 = disp[b, 2] if b != rb else 0
    c0 = da0 + e0 - db0
    c1 = da1 + e1 - db1
    c2 = da2 + e2 - db2
    if ra == rb:
        return c0 != 0 or c1 != 0 or c2 != 0
    if size[ra] < size[rb]:
        parent[ra] = rb
        disp[ra, 0] = -c0
        disp[ra, 1] = -c1
        disp[ra, 2] = -c2
        size[rb] += size[ra]
    else:
        parent[rb] = ra
        disp[rb, 0] = c0
        disp[rb, 1] = c1
        disp[rb, 2] = c2
        size[ra] += size[rb]
    return False


@nb.njit(cache=True)
def components_with_wrap(n, src, dst, disp_e, mask):
    """Cluster labels (root index per node) over edges with mask set, and whether any wraps."""
    parent = np.arange(n)
    disp = np.zeros((n, 3), dtype=np.int64)
    size = np.ones(n, dtype=np.int64)
    wrapped = False
    for k in range(src.shape[0]):
        if mask[k]:
            if _union(parent, disp, size, src[k], dst[k], disp_e[k, 0], disp_e[k, 1], disp_e[k, 2]):
                wrapped = True
    labels = np.empty(n, dtype=np.int64)
    for i in range(n):
        labels[i] = _find(parent, disp, i)
    return labels, wrapped


@nb.njit(cache=True)
def first_wrap_index(n, src, dst, disp_e, order):
    """Add edges in the given order; index (1-based count) at which a wrapping loop first appears.

    Returns len(order) + 1 if it never wraps.
    """
    parent = np.arange(n)
    disp = np.zeros((n, 3), dtype=np.int64)
    size = np.ones(n, dtype=np.int64)
    for j in range(order.shape[0]):
        k = order[j]
        if _union(parent, disp, size, src[k], dst[k], disp_e[k, 0], disp_e[k, 1], disp_e[k, 2]):
            return j + 1
    return order.shape[0] + 1


@nb.njit(cache=True)
def newman_ziff_wrap_indices(n, src, dst, disp_e, seeds):
    """For each seed, a random bond order (lazy Fisher-Yates) and its first wrap index."""
    m = src.shape[0]
    out = np.empty(seeds.shape[0], dtype=np.int64)
    perm = np.empty(m, dtype=np.int64)
    parent = np.empty(n, dtype=np.int64)
    disp = np.zeros((n, 3), dtype=np.int64)
    size = np.empty(n, dtype=np.int64)
    for s in range(seeds.shape[0]):
        np.random.seed(seeds[s])
        for i in range(m):
            perm[i] = i
        for i in range(n):
            parent[i] = i
            size[i] = 1
            disp[i, 0] = 0
            disp[i, 1] = 0
            disp[i, 2] = 0
        out[s] = m + 1
        for j in range(m):
            r = j + np.random.randint(0, m - j)
            t = perm[j]
            perm[j] = perm[r]
            perm[r] = t
            k = perm[j]
            if _union(parent, disp, size, src[k], dst[k], disp_e[k, 0], disp_e[k, 1], disp_e[k, 2]):
                out[s] = j + 1
                break
    return out


def relabel(labels: np.ndarray) -> tuple[np.ndarray, int]:
    """Compact root labels to 0..k-1."""
    uniq, inv = np.unique(labels, return_inverse=True)
    return inv.astype(np.int64), len(uniq)
