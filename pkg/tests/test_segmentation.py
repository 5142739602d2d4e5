import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from toposeg.image import SyntheticSpec, make_synthetic
from toposeg.metrics import boundary_f1, region_count
from toposeg.segmentation import (
    continuum_td_segment, extract_segmentation, label_view, merge_small_regions,
    read_label_grid, renumber, segmentation_from_image, write_label_grid, write_label_pgm,
)
from toposeg.topo import DiffusivityField, TopoParams, all_derivatives, discrete_td_restore, insert_cracks


def assert_canonical(labels):
    """Labels 0..R-1, numbered by first pixel in row-major order."""
    flat = labels.ravel()
    seen = []
    for v in flat:
        if v not in seen:
            seen.append(v)
    assert seen == list(range(len(seen)))


def test_no_cracks_single_region():
    labels = extract_segmentation(DiffusivityField.uncracked((5, 7)))
    assert labels.shape == (5, 7) and not labels.any()


def test_all_cracked_singletons():
    kf = DiffusivityField.uncracked((4, 5))
    kf = kf.with_cracks(np.arange(kf.lattice.n_edges))
    labels = extract_segmentation(kf, 1)
    np.testing.assert_array_equal(labels, np.arange(20).reshape(4, 5))
    assert region_count(labels) == 20


def test_step4_two_regions():
    u = make_synthetic(SyntheticSpec("step", 4, 4))
    kf = DiffusivityField.uncracked(u.shape)
    kf, _ = insert_cracks(kf, all_derivatives(u, kf), TopoParams(crack_fraction=1, crack_budget=1))
    labels = extract_segmentation(kf, 1)
    np.testing.assert_array_equal(labels, [[0, 0, 1, 1]] * 4)
    # both halves are below 9 pixels, so the merge folds them together
    assert region_count(extract_segmentation(kf, 9, u)) == 1


def test_merge_needs_image():
    kf = DiffusivityField.uncracked((3, 3))
    with pytest.raises(ValueError):
        extract_segmentation(kf, 4)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 7), st.integers(1, 7), st.data())
def test_components_match_flood_fill(h, w, data):
    kf = DiffusivityField.uncracked((h, w))
    n = kf.lattice.n_edges
    cracks = data.draw(st.lists(st.integers(0, max(n - 1, 0)), max_size=n)) if n else []
    kf = kf.with_cracks(cracks)
    labels = extract_segmentation(kf, 1)
    assert_canonical(labels)
    # neighbours across an intact edge share a label
    for e, (s, p) in enumerate(kf.lattice.endpoints()):
        if kf.k[e] == 1:
            assert labels.flat[s] == labels.flat[p]
    # and labels are exactly the components: brute flood fill count
    adj = {i: set() for i in range(h * w)}
    for e, (s, p) in enumerate(kf.lattice.endpoints()):
        if kf.k[e] == 1:
            adj[s].add(p)
            adj[p].add(s)
    seen, comps = set(), 0
    for i in range(h * w):
        if i in seen:
            continue
        comps += 1
        stack = [i]
        while stack:
            j = stack.pop()
            if j not in seen:
                seen.add(j)
                stack.extend(adj[j])
    assert region_count(labels) == comps


def test_merge_small_regions_closest_mean():
    labels = np.array([
        [0, 0, 1, 2, 2],
        [0, 0, 1, 2, 2],
    ])
    img = np.array([
        [0.1, 0.1, 0.75, 0.8, 0.8],
        [0.1, 0.1, 0.75, 0.8, 0.8],
    ])
    merged = merge_small_regions(labels, img, 3)
    np.testing.assert_array_equal(merged, [[0, 0, 1, 1, 1]] * 2)


def test_merge_tie_goes_to_lower_label():
    labels = np.array([[0, 0, 1, 2, 2]])
    img = np.array([[0.2, 0.2, 0.5, 0.8, 0.8]])
    merged = merge_small_regions(labels, img, 2)
    np.testing.assert_array_equal(merged, [[0, 0, 0, 1, 1]])


def test_merge_stops_at_one_region():
    labels = np.array([[0, 1, 2]])
    merged = merge_small_regions(labels, np.array([[0.1, 0.5, 0.9]]), 10)
    np.testing.assert_array_equal(merged, [[0, 0, 0]])


@settings(max_examples=40, deadline=None)
@given(arrays(np.int64, st.tuples(st.integers(1, 8), st.integers(1, 8)), elements=st.integers(0, 5)),
       st.integers(1, 6))
def test_merge_output_is_partition(raw, min_size):
    comp = segmentation_from_image(raw.astype(float) / 5)
    img = raw.astype(float) / 5
    merged = merge_small_regions(comp, img, min_size)
    assert_canonical(merged)
    sizes = np.bincount(merged.ravel())
    assert sizes.min() >= min_size or len(sizes) == 1
    # merging only joins regions: each original region maps into one merged region
    for r in np.unique(comp):
        assert np.unique(merged[comp == r]).size == 1


def test_renumber():
    np.testing.assert_array_equal(renumber(np.array([[5, 5, 2], [9, 2, 5]])), [[0, 0, 1], [2, 1, 0]])


def test_continuum_constant_image():
    labels = continuum_td_segment(np.full((6, 6), 0.5), -0.01, 9)
    assert region_count(labels) == 1


def test_continuum_step_and_disk():
    for kind in ("step", "disk"):
        img = make_synthetic(SyntheticSpec(kind, 16, 16))
        labels = continuum_td_segment(img, -0.01, 9)
        assert region_count(labels) == 2
        assert boundary_f1(labels, segmentation_from_image(img), 0) == 1.0


def test_continuum_rejects_nonnegative_threshold():
    with pytest.raises(ValueError):
        continuum_td_segment(np.zeros((3, 3)), 0.0)


def test_continuum_all_boundary_is_one_region():
    # every pixel has a steep gradient: no interior, one region
    img = np.indices((4, 4)).sum(axis=0) % 2 * 1.0
    labels = continuum_td_segment(img, -0.01, 1)
    assert region_count(labels) == 1


def test_discrete_segmentation_dihedral_equivariance(rng):
    # generic image: distinct edge differences so no tie-break fires
    img = make_synthetic(SyntheticSpec("disk", 24, 24)) * 0.9 + rng.random((24, 24)) * 0.05
    base_out, base_kf, _ = discrete_td_restore(img)
    base = extract_segmentation(base_kf, 9, base_out)
    for t in (lambda a: np.rot90(a), lambda a: a[:, ::-1]):
        out, kf, _ = discrete_td_restore(np.ascontiguousarray(t(img)))
        np.testing.assert_allclose(out, t(base_out), atol=1e-12)
        labels = extract_segmentation(kf, 9, out)
        np.testing.assert_array_equal(labels, renumber(t(base)))


def test_continuum_segmentation_dihedral_equivariance(rng):
    img = make_synthetic(SyntheticSpec("blob", 24, 24)) * 0.9 + rng.random((24, 24)) * 0.05
    base = continuum_td_segment(img)
    for t in (lambda a: np.rot90(a, 3), lambda a: a[::-1, :]):
        labels = continuum_td_segment(np.ascontiguousarray(t(img)))
        np.testing.assert_array_equal(labels, renumber(t(base)))


def test_label_grid_roundtrip(tmp_path, rng):
    labels = rng.integers(0, 30, (5, 4))
    p = tmp_path / "l.txt"
    write_label_grid(labels, p)
    np.testing.assert_array_equal(read_label_grid(p), labels)
    one_row = tmp_path / "r.txt"
    write_label_grid(np.array([[0, 1, 2]]), one_row)
    assert read_label_grid(one_row).shape == (1, 3)


def test_label_pgm(tmp_path):
    from toposeg.image import load_image
    p = tmp_path / "l.pgm"
    write_label_pgm(np.array([[0, 1, 2]]), p)
    np.testing.assert_allclose(load_image(p), [[0, 128 / 255, 1]])
    assert not label_view(np.zeros((2, 2), dtype=int)).any()


def test_truth_from_image():
    img = make_synthetic(SyntheticSpec("step", 6, 4))
    np.testing.assert_array_equal(segmentation_from_image(img), [[0, 0, 0, 1, 1, 1]] * 4)
