import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mimo_noma import capacity as cap
from mimo_noma.model import EXAMPLE_2X2_CHANNEL, sample_iid_gaussian_channel


def test_unit_channel():
    assert cap.sum_capacity(np.ones((1, 1)), 1.0) == pytest.approx(1.0, abs=1e-14)


def test_sum_capacity_matches_both_gram_forms():
    h = sample_iid_gaussian_channel(3, 6, seed=2)
    direct = np.linalg.slogdet(np.eye(6) + h.conj().T @ h / 0.7)[1] / np.log(2)
    assert cap.sum_capacity(h, 0.7) == pytest.approx(direct, rel=1e-12)


def test_ch2x2_corner_points():
    pts = {p.order: p.rates for p in cap.all_extreme_points(EXAMPLE_2X2_CHANNEL, 0.5)}
    c = cap.sum_capacity(EXAMPLE_2X2_CHANNEL, 0.5)
    for r in pts.values():
        assert r.sum() == pytest.approx(c, abs=1e-12)
    # the user decoded last gets its single-user rate
    single = [cap.subset_rate_bound(EXAMPLE_2X2_CHANNEL, 0.5, [i]) for i in range(2)]
    assert pts[(0, 1)][1] == pytest.approx(single[1])
    assert pts[(1, 0)][0] == pytest.approx(single[0])


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 4), st.integers(1, 5), st.integers(0, 2**31))
def test_extreme_points_are_on_the_face(n_r, n_u, seed):
    h = sample_iid_gaussian_channel(n_r, n_u, seed=seed)
    for order in itertools.permutations(range(n_u)):
        r = cap.maximal_extreme_point(h, 1.0, order).rates
        assert cap.on_dominant_face(h, 1.0, r, tol=1e-8)


def test_subset_bounds_indexing():
    h = sample_iid_gaussian_channel(2, 3, seed=5)
    b = cap.subset_bounds(h, 0.4)
    assert b[0] == 0.0
    assert b[0b101] == pytest.approx(cap.subset_rate_bound(h, 0.4, [0, 2]))
    assert b[-1] == pytest.approx(cap.sum_capacity(h, 0.4))


def test_in_region_rejects_negative_and_excess():
    h = EXAMPLE_2X2_CHANNEL
    assert cap.in_region(h, 0.5, [0.0, 0.0])
    assert not cap.in_region(h, 0.5, [-0.1, 0.0])
    c = cap.sum_capacity(h, 0.5)
    assert not cap.in_region(h, 0.5, [c, 0.01])


def test_bad_order_and_subset():
    with pytest.raises(ValueError):
        cap.maximal_extreme_point(EXAMPLE_2X2_CHANNEL, 0.5, (0, 0))
    with pytest.raises(ValueError):
        cap.subset_rate_bound(EXAMPLE_2X2_CHANNEL, 0.5, [])
    with pytest.raises(ValueError):
        cap.subset_bounds(np.ones((1, 21)), 1.0)


def test_projection_of_outside_point():
    h = sample_iid_gaussian_channel(2, 3, seed=11)
    r = np.array([5.0, 5.0, 5.0])
    p = cap.project_to_dominant_face(h, 1.0, r)
    assert cap.on_dominant_face(h, 1.0, p, tol=1e-8)
    # optimality: no vertex improves the distance to r along the face
    for e in cap.all_extreme_points(h, 1.0):
        assert (r - p) @ (e.rates - p) <= 1e-8


def test_projection_keeps_face_points():
    h = sample_iid_gaussian_channel(3, 3, seed=3)
    pts = np.array([e.rates for e in cap.all_extreme_points(h, 1.0)])
    w = np.random.default_rng(0).dirichlet(np.ones(len(pts)))
    r = w @ pts
    assert np.allclose(cap.project_to_dominant_face(h, 1.0, r), r, atol=1e-7)


def test_lift_dominates_and_reaches_face():
    h = sample_iid_gaussian_channel(3, 4, seed=4)
    r = np.array([0.1, 0.0, 0.2, 0.05])
    up = cap.lift_to_dominant_face(h, 1.0, r)
    assert np.all(up >= r - 1e-12)
    assert cap.on_dominant_face(h, 1.0, up, tol=1e-8)


def test_lift_respects_hold():
    h = sample_iid_gaussian_channel(3, 3, seed=8)
    r = np.array([0.1, 0.1, 0.1])
    up = cap.lift_to_dominant_face(h, 1.0, r, hold=[True, False, False])
    assert up[0] == 0.1
    assert cap.in_region(h, 1.0, up)
