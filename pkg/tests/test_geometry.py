import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fracmvp import (Ball, BallUnion, DomainError, Implicit, Scaled, ShiftedBall, SlabComplement, domain_from_json,
                     inradius_from_origin, tangent_balls)
from fracmvp.geometry import sphere_crossings


def test_ball_basics():
    b = Ball((0.0, 0.0), 1.0)
    assert b.signed_dist(np.array([0.0, 0.0])) == pytest.approx(-1.0)
    assert b.signed_dist(np.array([3.0, 4.0])) == pytest.approx(4.0)
    assert inradius_from_origin(b) == 1.0


def test_union_signed_distance(two_balls):
    # tip of the small ball, and a point covered by both
    assert two_balls.signed_dist(np.array([1.9, 0.0])) == pytest.approx(0.0, abs=1e-14)
    assert two_balls.signed_dist(np.array([2.1, 0.0])) == pytest.approx(0.2)
    assert two_balls.signed_dist(np.array([0.0, 0.0])) == pytest.approx(-1.0)
    assert inradius_from_origin(two_balls) == pytest.approx(1.0)


@settings(max_examples=40, deadline=None)
@given(x=st.floats(-3, 3), y=st.floats(-3, 3))
def test_union_sd_matches_brute_force_boundary(x, y):
    # DERIVED oracle: distance to a dense sample of the union boundary
    u = BallUnion([Ball((0.0, 0.0), 1.0), Ball((1.3, 0.0), 0.6)])
    th = np.linspace(0, 2 * np.pi, 20001)
    pts = np.concatenate([np.stack([np.cos(th), np.sin(th)], 1),
                          np.stack([1.3 + 0.6 * np.cos(th), 0.6 * np.sin(th)], 1)])
    inside_other = np.r_[np.linalg.norm(pts[:20001] - [1.3, 0], axis=1) < 0.6,
                         np.linalg.norm(pts[20001:], axis=1) < 1.0]
    bd = pts[~inside_other]
    d = np.min(np.linalg.norm(bd - [x, y], axis=1))
    assert abs(abs(float(u.signed_dist(np.array([x, y])))) - d) < 2e-4


def test_shifted_ball_inradius():
    for R in (1.5, 2.0, 4.0):
        for n in (2, 3):
            assert inradius_from_origin(ShiftedBall(R, n)) == pytest.approx(1.0)


def test_slab_sandwich():
    rng = np.random.default_rng(3)
    for delta in (0.4, 0.2, 0.1):
        dom = SlabComplement(1.0, delta, 2)
        assert inradius_from_origin(dom) == pytest.approx(1.0)
        x = rng.uniform(-2.2 / delta, 2.2 / delta, (40000, 2))
        x = np.concatenate([x, rng.uniform(-1.6, 1.6, (40000, 2))])
        rad, z = np.linalg.norm(x, axis=1), np.abs(x[:, 1])
        inner = ((rad < 1.0) | (z >= 2 * delta)) & (rad < 1 / delta)
        outer = ((rad < 1.0) | (z >= delta)) & (rad < 2 / delta)
        inside = dom.contains(x)
        assert not np.any(inner & ~inside)
        assert not np.any(inside & ~outer)


def test_slab_rejects_bad_parameters():
    with pytest.raises(DomainError):
        SlabComplement(1.0, 0.9)
    with pytest.raises(DomainError):
        SlabComplement(1.0, 0.2, fillet=0.15)


@settings(max_examples=30, deadline=None)
@given(a=st.tuples(st.floats(-8, 8), st.floats(-8, 8)), b=st.tuples(st.floats(-8, 8), st.floats(-8, 8)))
def test_signed_distances_are_1_lipschitz(a, b):
    a, b = np.array(a), np.array(b)
    for dom in (SlabComplement(1.0, 0.2), BallUnion([Ball((0.0, 0.0), 1.0), Ball((1.3, 0.0), 0.6)]),
                ShiftedBall(2.0)):
        assert abs(dom.signed_dist(a) - dom.signed_dist(b)) <= np.linalg.norm(a - b) * (1 + 1e-9) + 1e-12


def test_generic_ray_crossings_match_analytic():
    ball = Ball((0.3, -0.2), 1.1)
    imp = Implicit(lambda x: np.linalg.norm(x - np.array([0.3, -0.2]), axis=-1) - 1.1, 2.0, 2)
    th = np.linspace(0, 2 * np.pi, 17)
    dirs = np.stack([np.cos(th), np.sin(th)], 1)
    a = ball.ray_crossings(np.zeros(2), dirs)
    b = imp.ray_crossings(np.zeros(2), dirs)
    a = np.nanmax(np.where(a > 0, a, np.nan), axis=1)
    b = np.nanmax(np.where(b > 0, b, np.nan), axis=1)
    assert np.allclose(a, b, atol=1e-10)


def test_sphere_crossings_miss_is_nan():
    r = sphere_crossings(np.zeros(2), np.array([[0.0, 1.0]]), np.array([5.0, 0.0]), 1.0)
    assert np.all(np.isnan(r))


def test_tangent_balls():
    tb = tangent_balls(Ball((0.0, 0.0), 1.0), np.array([1.0, 0.0]))
    assert tb.r_int == pytest.approx(1.0, abs=1e-7)
    assert tb.r_ext == pytest.approx(10.0)  # convex: capped at 10 * bounding radius
    tb = tangent_balls(ShiftedBall(2.0), np.array([-1.0, 0.0]))
    assert tb.r_int == pytest.approx(2.0, abs=1e-7)
    with pytest.raises(DomainError):
        tangent_balls(Ball((0.0, 0.0), 1.0), np.array([0.5, 0.0]))


def test_tangent_ball_at_union_tip(two_balls):
    tb = tangent_balls(two_balls, np.array([1.9, 0.0]))
    assert tb.r_int == pytest.approx(0.6, abs=1e-7)
    assert np.allclose(tb.nu, [1.0, 0.0])


def test_scaled_domain():
    base = SlabComplement(1.0, 0.2)
    sc = Scaled(base, 2.5)
    x = np.array([[0.3, 1.7], [5.0, 0.1]])
    assert np.allclose(sc.signed_dist(x), 2.5 * base.signed_dist(x / 2.5))
    assert inradius_from_origin(sc) == pytest.approx(2.5)


@pytest.mark.parametrize("dom", [Ball((0.0, 0.0), 1.0), ShiftedBall(2.0), SlabComplement(1.0, 0.2),
                                 BallUnion([Ball((0.0, 0.0), 1.0), Ball((1.3, 0.0), 0.6)]),
                                 Scaled(ShiftedBall(2.0), 3.0)])
def test_json_roundtrip(dom):
    again = domain_from_json(json.dumps(dom.to_json()))
    x = np.random.default_rng(0).uniform(-3, 3, (50, 2))
    assert np.allclose(again.signed_dist(x), dom.signed_dist(x))


@pytest.mark.parametrize("bad", ['{"type": "torus"}', '{"type": "ball"}', '[1, 2]'])
def test_json_errors(bad):
    with pytest.raises(DomainError):
        domain_from_json(bad)


def test_origin_must_be_interior():
    with pytest.raises(DomainError):
        inradius_from_origin(Ball((3.0, 0.0), 1.0))
