import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import screw_by_logm
from screwgrasp.errors import IdentityDisplacement
from screwgrasp.screws import (INFINITE, Pose, ScrewSegment, UnitScrew, pose_compose,
                               pose_inverse, rodrigues, same_axis_line, screw_exp,
                               screw_from_poses, screw_interpolate, screw_transform)


def Rz(a):
    return rodrigues(np.array([0.0, 0.0, 1.0]), a)


def random_screw(rng, pitch=None):
    l = rng.normal(size=3)
    l /= np.linalg.norm(l)
    r = rng.uniform(-1, 1, 3)
    h = rng.uniform(-0.5, 0.5) if pitch is None else pitch
    return UnitScrew.through_point(l, r, h)


seeds = st.integers(0, 2**32 - 1)


# ----------------------------------------------------------------- poses

def test_compose_identity_and_inverse():
    rng = np.random.default_rng(1)
    g = Pose.random(rng)
    assert pose_compose(Pose.identity(), g).allclose(g, 0)
    assert pose_compose(g, pose_inverse(g)).allclose(Pose.identity(), 1e-12)


def test_rz_half_pi_twice_is_rz_pi():
    q = Pose.from_rotation(Rz(math.pi / 2))
    assert np.allclose((q @ q).rotation, Rz(math.pi), atol=1e-15)


def test_inverse_of_translation():
    g = Pose.from_translation([0, 0, 0.1]).inverse()
    assert np.allclose(g.translation, [0, 0, -0.1]) and np.allclose(g.rotation, np.eye(3))
    assert Pose.identity().inverse().allclose(Pose.identity(), 0)


def test_inverse_property_many_random():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        g = Pose.random(rng, 2.0)
        err = np.max(np.abs((g @ g.inverse()).matrix() - np.eye(4)))
        assert err < 1e-12


def test_compose_is_associative():
    rng = np.random.default_rng(3)
    a, b, c = (Pose.random(rng) for _ in range(3))
    assert ((a @ b) @ c).allclose(a @ (b @ c), 1e-12)


def test_pose_is_immutable():
    g = Pose.identity()
    with pytest.raises(ValueError):
        g.translation[0] = 1.0


def test_pose_json_roundtrip_and_quaternion_check():
    rng = np.random.default_rng(5)
    g = Pose.random(rng)
    assert Pose.from_json(g.to_json()).allclose(g, 1e-12)
    data = {"position": [0, 0, 0], "quaternion": [1.0, 0, 0, 0]}
    assert Pose.from_json(data).allclose(Pose.identity(), 0)
    # tiny deviation is renormalized, a real one rejected
    data["quaternion"] = [1.0 + 5e-7, 0, 0, 0]
    assert Pose.from_json(data).is_valid()
    data["quaternion"] = [1.1, 0, 0, 0]
    with pytest.raises(ValueError):
        Pose.from_json(data)


def test_json_quaternion_is_scalar_first():
    g = Pose.from_rotation(Rz(math.pi / 2))
    w, x, y, z = g.to_json()["quaternion"]
    assert w == pytest.approx(math.cos(math.pi / 4)) and z == pytest.approx(math.sin(math.pi / 4))


# ----------------------------------------------------------- screw_from_poses

def test_pure_translation_screw():
    s, mag = screw_from_poses(Pose.identity(), Pose.from_translation([0, 0, 0.3]))
    assert s.is_translation and s.pitch == INFINITE
    assert np.allclose(s.direction, [0, 0, 1]) and not np.any(s.moment)
    assert mag == pytest.approx(0.3)


def test_rotation_about_offset_line():
    # rotation by pi/2 about the line x=1, z=0 parallel to y, built by conjugation
    T = Pose.from_translation([1, 0, 0])
    R = Pose.from_rotation(rodrigues(np.array([0.0, 1.0, 0.0]), math.pi / 2))
    b = T @ R @ T.inverse()
    s, mag = screw_from_poses(Pose.identity(), b)
    assert mag == pytest.approx(math.pi / 2, abs=1e-12)
    assert s.pitch == pytest.approx(0.0, abs=1e-12)
    assert np.allclose(s.direction, [0, 1, 0], atol=1e-12)
    assert np.allclose(s.moment, np.cross([1, 0, 0], [0, 1, 0]), atol=1e-12)
    assert screw_exp(s, mag).allclose(b, 1e-12)


def test_half_turn_with_advance_matches_logm():
    b = Pose(Rz(math.pi), [0, 0, 0.1])
    s, mag = screw_from_poses(Pose.identity(), b)
    assert mag == pytest.approx(math.pi, abs=1e-12)
    assert np.allclose(s.direction, [0, 0, 1], atol=1e-12)
    assert np.allclose(s.moment, 0, atol=1e-12)
    assert s.pitch == pytest.approx(0.1 / math.pi, abs=1e-12)


def test_identity_displacement_rejected():
    g = Pose.random(np.random.default_rng(0))
    with pytest.raises(IdentityDisplacement):
        screw_from_poses(g, g)


def test_screw_is_in_body_frame_of_start():
    rng = np.random.default_rng(11)
    for _ in range(50):
        a, b = Pose.random(rng), Pose.random(rng)
        s, mag = screw_from_poses(a, b)
        assert (a @ screw_exp(s, mag)).allclose(b, 1e-9)


def test_angle_at_pi_is_deterministic():
    s, mag = screw_from_poses(Pose.identity(), Pose.from_rotation(rodrigues(
        np.array([0.0, -1.0, 0.0]), math.pi)))
    assert mag == pytest.approx(math.pi)
    assert np.allclose(s.direction, [0, 1, 0])


@settings(max_examples=200, deadline=None)
@given(seeds)
def test_agrees_with_matrix_log(seed):
    rng = np.random.default_rng(seed)
    s = random_screw(rng)
    theta = rng.uniform(1e-2, math.pi - 1e-2)
    T = screw_exp(s, theta).matrix()
    l, m, h, th = screw_by_logm(T)
    s2, mag = screw_from_poses(Pose.identity(), Pose.from_matrix(T))
    assert mag == pytest.approx(th, abs=1e-8)
    assert np.allclose(s2.direction, l, atol=1e-7)
    assert np.allclose(s2.moment, m, atol=1e-6)
    assert s2.pitch == pytest.approx(h, abs=1e-7)


# -------------------------------------------------------------- screw_exp

def test_exp_zero_is_identity():
    s = random_screw(np.random.default_rng(2))
    assert screw_exp(s, 0.0).allclose(Pose.identity(), 0)


def test_exp_translation():
    g = screw_exp(UnitScrew.translation([0, 0, 1]), 0.5)
    assert np.allclose(g.translation, [0, 0, 0.5]) and np.allclose(g.rotation, np.eye(3))


def test_exp_half_turn_about_offset_vertical_line():
    s = UnitScrew([0, 0, 1], [0, -1, 0], 0.0)
    g = screw_exp(s, math.pi)
    assert np.allclose(g.apply([0, 0, 0]), [2, 0, 0], atol=1e-12)
    assert np.allclose(s.axis_point, [1, 0, 0])


@settings(max_examples=300, deadline=None)
@given(seeds)
def test_exp_log_round_trip(seed):
    rng = np.random.default_rng(seed)
    s = random_screw(rng)
    theta = rng.uniform(1e-3, math.pi - 1e-3)
    s2, mag = screw_from_poses(Pose.identity(), screw_exp(s, theta))
    assert mag == pytest.approx(theta, abs=1e-9)
    assert same_axis_line(s, s2, 1e-6)
    assert s2.direction @ s.direction > 0


def test_translation_round_trip():
    rng = np.random.default_rng(4)
    for _ in range(100):
        d = rng.normal(size=3)
        s = UnitScrew.translation(d)
        s2, mag = screw_from_poses(Pose.identity(), screw_exp(s, 0.37))
        assert s2.is_translation and np.allclose(s2.direction, s.direction) and mag == pytest.approx(0.37)


# -------------------------------------------------------- screw_transform

def test_transform_identity_and_translation():
    s = UnitScrew([0, 0, 1], [0, 0, 0], 0.0)
    t = screw_transform(s, Pose.identity())
    assert np.allclose(t.direction, s.direction) and np.allclose(t.moment, s.moment)
    t = screw_transform(s, Pose.from_translation([1, 0, 0]))
    assert np.allclose(t.direction, [0, 0, 1]) and np.allclose(t.moment, [0, -1, 0])


def test_transform_via_two_points_on_the_line():
    rng = np.random.default_rng(8)
    s, g = random_screw(rng), Pose.random(rng)
    p1 = s.axis_point
    p2 = p1 + s.direction
    q1, q2 = g.apply(p1), g.apply(p2)
    l = (q2 - q1) / np.linalg.norm(q2 - q1)
    t = screw_transform(s, g)
    assert np.allclose(t.direction, l) and np.allclose(t.moment, np.cross(q1, l))
    assert t.pitch == s.pitch


def test_translation_screw_transform_keeps_zero_moment():
    rng = np.random.default_rng(9)
    g = Pose.random(rng)
    t = screw_transform(UnitScrew.translation([1, 0, 0]), g)
    assert t.is_translation and not np.any(t.moment)
    assert np.allclose(t.direction, g.rotation @ [1, 0, 0])


@settings(max_examples=300, deadline=None)
@given(seeds)
def test_frame_change_consistency(seed):
    rng = np.random.default_rng(seed)
    s, g = random_screw(rng), Pose.random(rng)
    theta = rng.uniform(-3, 3)
    lhs = screw_exp(screw_transform(s, g), theta)
    rhs = g @ screw_exp(s, theta) @ g.inverse()
    assert lhs.allclose(rhs, 1e-9)


# ----------------------------------------------------------- interpolation

def test_interpolation_endpoints_and_midpoint():
    a = Pose.identity()
    seg = ScrewSegment.from_poses(a, Pose.from_translation([0.4, 0, 0]))
    assert screw_interpolate(seg, 0.0) is seg.start
    assert np.allclose(screw_interpolate(seg, 0.5).translation, [0.2, 0, 0])
    rng = np.random.default_rng(12)
    seg = ScrewSegment.from_poses(Pose.random(rng), Pose.random(rng))
    assert screw_interpolate(seg, 1.0).allclose(seg.end, 1e-6)


@settings(max_examples=100, deadline=None)
@given(seeds, st.floats(0.0, 1.0))
def test_interpolation_composition(seed, t1):
    rng = np.random.default_rng(seed)
    seg = ScrewSegment.from_poses(Pose.random(rng), Pose.random(rng))
    mid = screw_interpolate(seg, t1)
    end = mid @ screw_exp(seg.screw, (1 - t1) * seg.magnitude)
    assert end.allclose(seg.end, 1e-6)


def test_constant_screw_motion_keeps_axis():
    rng = np.random.default_rng(13)
    seg = ScrewSegment.from_poses(Pose.random(rng), Pose.random(rng))
    mid = screw_interpolate(seg, 0.3)
    s2, _ = screw_from_poses(mid, seg.end)
    assert same_axis_line(s2, seg.screw, 1e-6)


def test_unit_screw_invariants():
    s = UnitScrew([0, 0, 1], [1, 2, 3], INFINITE)
    assert not np.any(s.moment)
    assert UnitScrew.through_point([0, 0, 2], [1, 0, 0]).is_valid()
    assert not UnitScrew([0, 0, 1], [0, 0, 1], 0.0).is_valid()
