"""Hot inner loops, in two interchangeable flavours.

Every kernel has a numba version and a pure-numpy version that produce
bit-identical results. ``BACKEND`` says which one the public names are bound
to; set ``TOPOSEG_NUMBA=0`` before import to force numpy.

Edge weights use the lattice layout shared by the whole package:
``wh[r, c]`` joins pixel (r, c) to (r, c + 1) and ``wv[r, c]`` joins (r, c)
to (r + 1, c).
"""
import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from . import _config


# -- numpy reference path -----------------------------------------------------

def weighted_step_numpy(u, wh, wv, tau):
    fh = wh * (u[:, 1:] - u[:, :-1])
    fv = wv * (u[1:, :] - u[:-1, :])
    east = np.zeros_like(u)
    west = np.zeros_like(u)
    south = np.zeros_like(u)
    north = np.zeros_like(u)
    east[:, :-1] = fh
    west[:, 1:] = -fh
    south[:-1, :] = fv
    north[1:, :] = -fv
    # Pairing opposite directions keeps the sum invariant under the
    # dihedral group: each symmetry permutes terms within or across pairs.
    out = u + tau * ((east + west) + (north + south))
    return np.clip(out, u.min(), u.max())


def edge_components_numpy(wh, wv):
    h, w = _shape_from_weights(wh, wv)
    idx = np.arange(h * w).reshape(h, w)
    on_h = wh > 0
    on_v = wv > 0
    src = np.concatenate([idx[:, :-1][on_h], idx[:-1, :][on_v]])
    dst = np.concatenate([idx[:, 1:][on_h], idx[1:, :][on_v]])
    graph = coo_matrix((np.ones(src.size, dtype=np.int8), (src, dst)), shape=(h * w, h * w))
    _, comp = connected_components(graph, directed=False)
    return _renumber_first_seen(comp).reshape(h, w)


def _shape_from_weights(wh, wv):
    return wh.shape[0], wv.shape[1]


def _renumber_first_seen(comp):
    _, first = np.unique(comp, return_index=True)
    # first[j] is where old label j first appears; rank those positions
    order = np.argsort(first, kind="stable")
    remap = np.empty_like(order)
    remap[order] = np.arange(order.size)
    return remap[comp].astype(np.int64)


# -- numba path ---------------------------------------------------------------

try:
    import numba
    from numba import njit, prange
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
else:
    import os
    if "NUMBA_THREADING_LAYER" not in os.environ:
        # probing an outdated TBB only produces a warning; skip it
        numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]


if numba is not None:

    @njit(parallel=True, cache=True)
    def _weighted_step_nb(u, wh, wv, tau):
        h, w = u.shape
        lo = u.min()
        hi = u.max()
        out = np.empty_like(u)
        for r in prange(h):
            for c in range(w):
                s = u[r, c]
                e = 0.0
                we = 0.0
                n = 0.0
                so = 0.0
                if c + 1 < w:
                    e = wh[r, c] * (u[r, c + 1] - s)
                if c > 0:
                    we = -(wh[r, c - 1] * (s - u[r, c - 1]))
                if r + 1 < h:
                    so = wv[r, c] * (u[r + 1, c] - s)
                if r > 0:
                    n = -(wv[r - 1, c] * (s - u[r - 1, c]))
                v = s + tau * ((e + we) + (n + so))
                if v < lo:
                    v = lo
                elif v > hi:
                    v = hi
                out[r, c] = v
        return out

    @njit(cache=True)
    def _find(parent, x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    @njit(cache=True)
    def _edge_components_nb(wh, wv):
        h = wh.shape[0]
        w = wv.shape[1]
        n = h * w
        parent = np.arange(n)
        for r in range(h):
            for c in range(w - 1):
                if wh[r, c] > 0:
                    a = _find(parent, r * w + c)
                    b = _find(parent, r * w + c + 1)
                    if a < b:
                        parent[b] = a
                    elif b < a:
                        parent[a] = b
        for r in range(h - 1):
            for c in range(w):
                if wv[r, c] > 0:
                    a = _find(parent, r * w + c)
                    b = _find(parent, (r + 1) * w + c)
                    if a < b:
                        parent[b] = a
                    elif b < a:
                        parent[a] = b
        label_of_root = np.full(n, -1, dtype=np.int64)
        labels = np.empty(n, dtype=np.int64)
        nxt = 0
        for i in range(n):
            root = _find(parent, i)
            if label_of_root[root] < 0:
                label_of_root[root] = nxt
                nxt += 1
            labels[i] = label_of_root[root]
        return labels.reshape(h, w)

    def weighted_step_numba(u, wh, wv, tau):
        return _weighted_step_nb(u, wh, wv, float(tau))

    def edge_components_numba(wh, wv):
        return _edge_components_nb(wh, wv)


def _apply_thread_cap():
    cap = _config.thread_cap()
    if numba is None or cap == 0:
        return
    numba.set_num_threads(min(cap, numba.config.NUMBA_NUM_THREADS))


if numba is not None and _config.numba_requested():
    BACKEND = "numba"
    _apply_thread_cap()
    weighted_step = weighted_step_numba
    edge_components = edge_components_numba
else:
    BACKEND = "numpy"
    weighted_step = weighted_step_numpy
    edge_components = edge_components_numpy


def warmup():
    """Trigger JIT compilation on a tiny input (no-op on the numpy path)."""
    u = np.zeros((2, 2))
    wh = np.ones((2, 1))
    wv = np.ones((1, 2))
    weighted_step(u, wh, wv, 0.1)
    edge_components(wh, wv)
