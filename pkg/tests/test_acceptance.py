"""Acceptance checks, one test per criterion.

Each test records a PASS/FAIL line that is printed in the pytest summary,
then asserts.  Criterion 8 is an acknowledgment and always records.
"""

import math
import time
import warnings

import numpy as np

from oracles import exact_score, sampled_eta, screw_by_logm, socp_eta
from test_metric import EXPECTED, cases, _random_config, _eta_or_none
from screwgrasp.cloud import antipodal_pairs, oriented_bounding_box, transform_point_cloud
from screwgrasp.errors import ModelUnbounded
from screwgrasp.metric import (EnvironmentContact, MetricParams, TaskContext,
                               build_task_context, compute_metric, eta_for_contacts)
from screwgrasp.pipeline import PipelineParams, generate_synthetic, run_pipeline
from screwgrasp.regrasp import compute_score, greedy_partition, optimal_partition_bruteforce
from screwgrasp.screws import (Pose, UnitScrew, same_axis_line, screw_exp, screw_from_poses,
                               screw_transform)
from screwgrasp.verify import random_regions

BOX = (0.16, 0.06, 0.21)


def _box_cloud():
    return generate_synthetic("BOX", BOX, n_points=10000, seed=0)


def test_criterion_1_three_pivots_need_two_grasps(report_criterion):
    skeleton = [{"type": "PIVOT", "edge": "min_y_min_z", "angle": math.pi / 4},
                {"type": "PIVOT", "edge": "min_y_min_z", "angle": math.pi / 4},
                {"type": "PIVOT", "edge": "min_x_min_z", "angle": -math.pi / 2}]
    t0 = time.perf_counter()
    res = run_pipeline(_box_cloud(), {"skeleton": skeleton}, PipelineParams())
    elapsed = time.perf_counter() - t0
    rep = res.report
    ok = rep.alpha == 2 and rep.ranges == [[1, 2], [3, 3]] and elapsed < 60.0
    report_criterion(1, ok, f"alpha={rep.alpha}, Z={rep.ranges}, {len(res.cloud)} points, "
                            f"{elapsed:.1f} s")
    assert ok


def test_criterion_2_slide_pivot_pickup_one_grasp(report_criterion):
    skeleton = [{"type": "SLIDE", "direction": [1, 0, 0], "distance": 0.2},
                {"type": "PIVOT", "edge": "min_y_min_z", "angle": math.pi / 4},
                {"type": "PICKUP", "distance": 0.1}]
    res = run_pipeline(_box_cloud(), {"skeleton": skeleton}, PipelineParams())
    rep = res.report
    gamma = res.plan.groups[0].gamma
    ok = rep.alpha == 1 and gamma >= PipelineParams().gamma_th
    report_criterion(2, ok, f"alpha={rep.alpha}, gamma={gamma:.3f}")
    assert ok


def test_criterion_3_greedy_equals_optimal(report_criterion):
    rng = np.random.default_rng(2024)
    agree = 0
    for t in range(500):
        sets = random_regions(rng, max_segments=10, universe=40)
        th = (0.1, 0.25, 0.5)[t % 3]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            agree += greedy_partition(sets, th).alpha == optimal_partition_bruteforce(sets, th).alpha
    report_criterion(3, agree == 500, f"{agree}/500 instances agree")
    assert agree == 500


def test_criterion_4_score_is_exact(report_criterion):
    S = frozenset
    hand = [
        ([S({1, 2, 3, 4}), S({3, 4, 5})], [0.5, 2 / 3]),
        ([S({1, 2}), S({3, 4}), S({5, 6})], [0.0, 0.0, 0.0]),
        ([S(range(12)), S(range(12)), S(range(12))], [1.0, 1.0, 1.0]),
        ([S(range(7)), S(range(3, 10)), S(range(5, 12))], [2 / 7, 2 / 7, 2 / 7]),
    ]
    bad = 0
    for sets, want in hand:
        gamma, Gamma, _ = compute_score(sets)
        bad += any(abs(a - b) > 1e-15 for a, b in zip(Gamma, want)) or gamma != min(want)
    rng = np.random.default_rng(4)
    for _ in range(500):
        sets = [s for s in random_regions(rng) if s][:5]
        gamma, Gamma, common = compute_score(sets)
        g0, G0, c0 = exact_score(sets)
        bad += (common != c0 or abs(gamma - float(g0)) > 1e-15
                or any(abs(a - float(b)) > 1e-15 for a, b in zip(Gamma, G0)))
    report_criterion(4, bad == 0, f"{len(hand)} hand-built + 500 random groups, {bad} mismatches")
    assert bad == 0


def test_criterion_5_screw_round_trips(report_criterion):
    rng = np.random.default_rng(5)
    worst_axis = worst_angle = worst_conj = 0.0
    for t in range(1000):
        l = rng.normal(size=3)
        l /= np.linalg.norm(l)
        h = math.inf if t % 10 == 0 else rng.uniform(-0.5, 0.5)
        s = UnitScrew.through_point(l, rng.uniform(-1, 1, 3), h)
        theta = rng.uniform(1e-2, math.pi - 1e-2)
        T = screw_exp(s, theta)
        s2, mag = screw_from_poses(Pose.identity(), T)
        if s.is_translation:
            worst_axis = max(worst_axis, np.max(np.abs(s2.direction - s.direction)))
        else:
            ref_l, ref_m, ref_h, ref_theta = screw_by_logm(T.matrix())
            worst_axis = max(worst_axis, np.max(np.abs(s2.direction - ref_l)),
                             np.max(np.abs(s2.moment - ref_m)))
            worst_angle = max(worst_angle, abs(ref_theta - theta))
            if not same_axis_line(s, s2, 1e-6):
                worst_axis = max(worst_axis, 1.0)
        worst_angle = max(worst_angle, abs(mag - theta))
        g = Pose.random(rng)
        lhs = screw_exp(screw_transform(s, g), theta).matrix()
        rhs = (g @ T @ g.inverse()).matrix()
        worst_conj = max(worst_conj, np.max(np.abs(lhs - rhs)))
    ok = worst_axis <= 1e-6 and worst_angle <= 1e-9 and worst_conj <= 1e-9
    report_criterion(5, ok, f"1000 screws, axis err {worst_axis:.1e}, angle err "
                            f"{worst_angle:.1e}, conjugation err {worst_conj:.1e}")
    assert ok


def test_criterion_6_metric_against_oracles(report_criterion):
    parts = []
    ok = True
    for name, pts, nrm, ctx in cases(64):
        got = eta_for_contacts(pts, nrm, ctx)
        ref = sampled_eta(pts, nrm, ctx)
        soc = socp_eta(pts, nrm, ctx)
        if EXPECTED[name] == 0.0:
            good = got == 0.0 and abs(ref) < 1e-9
        else:
            good = (abs(got - ref) <= 0.02 * abs(ref) and abs(got - soc) <= 0.02 * abs(soc)
                    and abs(got - EXPECTED[name]) <= 0.02 * EXPECTED[name])
        ok &= good
        parts.append(f"{name} {got:.4g}/{ref:.4g}")
    report_criterion(6, ok, "LP/sampled: " + ", ".join(parts))
    assert ok


def _small_box(rng):
    dims = (rng.uniform(0.03, 0.07), rng.uniform(0.03, 0.07), rng.uniform(0.03, 0.07))
    return dims, generate_synthetic("BOX", dims, n_points=120, seed=int(rng.integers(1 << 30)))


def test_criterion_7_monotonicity_and_equivariance(report_criterion):
    rng = np.random.default_rng(7)
    violations = {"gamma": 0, "mu": 0, "force_cap": 0, "rigid": 0}
    unbounded = nonempty = 0
    for t in range(200):
        # score does not increase as a group grows
        sets = [s for s in random_regions(rng) if s]
        scores = [compute_score(sets[:k])[0] for k in range(1, len(sets) + 1)]
        violations["gamma"] += any(b > a for a, b in zip(scores, scores[1:]))

        # metric does not decrease with friction
        s, pts, nrm, env, gw = _random_config(rng, t)
        mu = rng.uniform(0, 1)
        base = _eta_or_none(pts, nrm, TaskContext(s, env, gw, mu_robot=mu, cone_facets=8))
        if base is None:
            unbounded += 1
        else:
            up = _eta_or_none(pts, nrm, TaskContext(s, env, gw, mu_robot=mu + rng.uniform(0, 0.5),
                                                    cone_facets=8))
            env2 = [EnvironmentContact(c.position, c.normal, c.mu + rng.uniform(0, 0.3))
                    for c in env]
            up_env = _eta_or_none(pts, nrm, TaskContext(s, env2, gw, mu_robot=mu, cone_facets=8))
            tol = 1e-9 * max(1.0, base)
            violations["mu"] += up is None or up < base - tol
            violations["mu"] += up_env is not None and up_env < base - tol

        # regions do not depend on the force budget (no external load)
        dims, cloud = _small_box(rng)
        # axes along a box edge so that some jaw pairs can resist the task
        screw = UnitScrew.through_point(np.eye(3)[t % 3], rng.uniform(0, 0.05, 3),
                                        [0.0, math.inf, 0.1][(t // 3) % 3])
        plan = [Pose.identity(), screw_exp(screw, 0.3)]
        clouds = transform_point_cloud(cloud, plan)
        pairs = antipodal_pairs(cloud)
        params = MetricParams(mass=0.0, cone_facets=8)
        ctx = build_task_context(screw, oriented_bounding_box(cloud), "FREE", params)
        scale = float(rng.uniform(0.1, 10.0))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            (r1,) = compute_metric(clouds, plan, [ctx], 0.75, pairs=pairs)
            (r2,) = compute_metric(clouds, plan, [ctx.with_force_cap(ctx.force_cap * scale)],
                                   0.75, pairs=pairs)
        nonempty += not r1.empty
        violations["force_cap"] += (r1.member_indices != r2.member_indices
                                    or abs(r2.raw_max - scale * r1.raw_max) > 1e-9 * max(1.0, r2.raw_max))

        # metric is frame independent
        g = Pose.random(rng, 1.0)
        try:
            a = eta_for_contacts(pts, nrm, TaskContext(s, env, gw, mu_robot=mu, cone_facets=8))
            ctx_g = TaskContext(s, env, gw, mu_robot=mu, cone_facets=8).transformed(g)
            b = eta_for_contacts(g.apply(pts), nrm @ g.rotation.T, ctx_g)
            violations["rigid"] += abs(a - b) > 1e-6
        except ModelUnbounded:
            pass
    total = sum(violations.values())
    detail = ", ".join(f"{k} {v}" for k, v in violations.items())
    report_criterion(7, total == 0, f"200 trials, violations: {detail}; "
                                    f"{unbounded} unbounded friction draws skipped, "
                                    f"{nonempty} non-empty regions in the force_cap check")
    assert total == 0


def test_criterion_8_acknowledgment(report_criterion):
    report_criterion(8, True, "published scan-based numbers (Gamma=[0.583, 0.926], "
                              "gamma=0.890, robot success counts) are not reproducible "
                              "without the original scans and robot; covered by criteria 1-7")
