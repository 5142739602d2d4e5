"""Label maps from crack fields or thresholded continuum indicators.

Labels are always 0..R-1, numbered by each region's first pixel in
row-major order.
"""
import heapq

import numpy as np
from scipy import ndimage

from . import kernels
from .image import check_image, encode_pgm
from .topo import continuum_td_field


def renumber(labels):
    """Relabel to 0..R-1 in order of first appearance (row-major)."""
    flat = np.asarray(labels).ravel()
    _, first, inverse = np.unique(flat, return_index=True, return_inverse=True)
    order = np.argsort(first, kind="stable")
    remap = np.empty_like(order)
    remap[order] = np.arange(order.size)
    return remap[inverse].reshape(np.shape(labels)).astype(np.int64)


def _adjacent_pairs(labels):
    pairs = []
    for a, b in ((labels[:, :-1], labels[:, 1:]), (labels[:-1, :], labels[1:, :])):
        m = a != b
        pairs.append(np.stack([a[m], b[m]], axis=1))
    pairs = np.concatenate(pairs)
    pairs.sort(axis=1)
    return np.unique(pairs, axis=0)


def merge_small_regions(labels, img, min_region_size):
    """Fold regions smaller than ``min_region_size`` into a neighbour.

    Smallest region first (ties: lower label); it joins the adjacent region
    whose mean intensity is closest to its own (ties: lower label). Stops when
    no small region is left or only one region remains.
    """
    labels = renumber(labels)
    if min_region_size <= 1:
        return labels
    u = np.asarray(img, dtype=np.float64)
    n = int(labels.max()) + 1
    size = np.bincount(labels.ravel(), minlength=n).astype(np.int64)
    total = np.bincount(labels.ravel(), weights=u.ravel(), minlength=n)
    adj = [set() for _ in range(n)]
    for a, b in _adjacent_pairs(labels):
        adj[a].add(int(b))
        adj[b].add(int(a))
    parent = np.arange(n)
    alive = n
    heap = [(int(size[i]), i) for i in range(n) if size[i] < min_region_size]
    heapq.heapify(heap)
    while heap and alive > 1:
        sz, r = heapq.heappop(heap)
        if parent[r] != r or size[r] != sz or sz >= min_region_size:
            continue
        if not adj[r]:
            continue
        mean_r = total[r] / size[r]
        target = min(adj[r], key=lambda q: (abs(total[q] / size[q] - mean_r), q))
        parent[r] = target
        size[target] += size[r]
        total[target] += total[r]
        for q in adj[r]:
            adj[q].discard(r)
            if q != target:
                adj[q].add(target)
                adj[target].add(q)
        adj[target].discard(target)
        adj[r] = set()
        alive -= 1
        if size[target] < min_region_size:
            heapq.heappush(heap, (int(size[target]), target))
    # resolve merge chains
    for i in range(n):
        root = i
        while parent[root] != root:
            root = parent[root]
        parent[i] = root
    return renumber(parent[labels])


def extract_segmentation(kf, min_region_size=1, img=None):
    """Connected components of the lattice graph with cracked edges removed.

    Merging small regions needs ``img`` for the region means.
    """
    if min_region_size < 1:
        raise ValueError(f"min_region_size must be >= 1, got {min_region_size}")
    wh, wv = kf.weights()
    labels = kernels.edge_components(wh, wv)
    if min_region_size == 1:
        return labels
    if img is None:
        raise ValueError("merging regions below min_region_size needs the image")
    u = np.asarray(img, dtype=np.float64)
    if u.shape != kf.shape:
        raise ValueError(f"dimension mismatch: image {u.shape} vs field {kf.shape}")
    return merge_small_regions(labels, u, min_region_size)


def _absorb_boundary(labels, u, means):
    """Grow labelled regions into unlabelled (-1) pixels one ring at a time.

    A pixel joins the neighbouring region whose mean is closest to its own
    intensity; every ring reads labels from the previous ring only.
    """
    h, w = labels.shape
    big = np.inf
    while True:
        todo = labels < 0
        if not todo.any():
            return labels
        best_cost = np.full((h, w), big)
        best_lab = np.full((h, w), -1, dtype=np.int64)
        padded = np.pad(labels, 1, constant_values=-1)
        for dr, dc in ((0, 1), (0, -1), (1, 0), (-1, 0)):
            nb = padded[1 + dr:1 + dr + h, 1 + dc:1 + dc + w]
            ok = todo & (nb >= 0)
            cost = np.where(ok, np.abs(means[np.maximum(nb, 0)] - u), big)
            better = ok & ((cost < best_cost) | ((cost == best_cost) & (nb < best_lab)))
            best_cost = np.where(better, cost, best_cost)
            best_lab = np.where(better, nb, best_lab)
        grow = best_lab >= 0
        if not grow.any():
            # no labelled pixel anywhere: the whole image is one region
            labels[todo] = 0
            return labels
        labels = np.where(grow, best_lab, labels)


def continuum_td_segment(img, threshold=-0.005, min_region_size=9):
    """Regions separated by pixels whose indicator falls below ``threshold``."""
    if not threshold < 0:
        raise ValueError(f"threshold must be < 0, got {threshold}")
    if min_region_size < 1:
        raise ValueError(f"min_region_size must be >= 1, got {min_region_size}")
    u = check_image(img)
    field = continuum_td_field(u).values
    edge = field < threshold
    comp, n = ndimage.label(~edge)
    labels = comp.astype(np.int64) - 1  # boundary pixels -> -1
    if n == 0:
        return np.zeros(u.shape, dtype=np.int64)
    sums = np.bincount(labels[~edge], weights=u[~edge], minlength=n)
    counts = np.bincount(labels[~edge], minlength=n)
    labels = _absorb_boundary(labels, u, sums / counts)
    return merge_small_regions(labels, u, min_region_size)


def segmentation_from_image(img):
    """Ground-truth style labels: 4-connected runs of identical intensity."""
    u = np.asarray(img, dtype=np.float64)
    wh = (u[:, 1:] == u[:, :-1]).astype(np.float64)
    wv = (u[1:, :] == u[:-1, :]).astype(np.float64)
    return kernels.edge_components(wh, wv)


# -- serialization --------------------------------------------------------------

def write_label_grid(labels, path):
    """Lossless text grid: one row per line, space-separated integers."""
    np.savetxt(path, np.asarray(labels, dtype=np.int64), fmt="%d", delimiter=" ")


def read_label_grid(path):
    grid = np.loadtxt(path, dtype=np.int64, ndmin=2)
    return grid


def label_view(labels):
    """Labels spread over [0, 1] for viewing (lossy once quantized)."""
    lab = np.asarray(labels, dtype=np.float64)
    top = lab.max()
    return lab / top if top > 0 else np.zeros_like(lab)


def write_label_pgm(labels, path):
    with open(path, "wb") as fh:
        fh.write(encode_pgm(label_view(labels)))
