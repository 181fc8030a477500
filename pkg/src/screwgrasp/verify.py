"""Self-checks runnable from the command line.

The partition checks compare the greedy planner with exhaustive enumeration
and the score with exact rational arithmetic.  The metric checks compare the
LP against closed-form optima.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from .metric import EnvironmentContact, TaskContext, eta_for_contacts
from .regrasp import compute_score, greedy_partition, optimal_partition_bruteforce
from .screws import UnitScrew

GAMMA_THS = (0.1, 0.25, 0.5)
UNIVERSE = 40


def random_regions(rng, max_segments=10, universe=UNIVERSE):
    """Region sets drifting over a small universe so that groups sometimes overlap."""
    n = int(rng.integers(1, max_segments + 1))
    base = set(rng.choice(universe, size=int(rng.integers(4, universe // 2)), replace=False).tolist())
    out = []
    for _ in range(n):
        keep = {j for j in base if rng.random() < 0.8}
        extra = set(rng.choice(universe, size=int(rng.integers(0, 8)), replace=False).tolist())
        s = keep | extra
        if not s:
            s = {int(rng.integers(universe))}
        out.append(frozenset(s))
        if rng.random() < 0.3:
            base = set(rng.choice(universe, size=int(rng.integers(4, universe // 2)),
                                  replace=False).tolist())
        else:
            base = s
    return out


def exact_score(sets):
    common = frozenset.intersection(*sets)
    Gamma = [Fraction(len(common), len(s)) for s in sets]
    return min(Gamma), Gamma, common


def check_score(sets, score_fn):
    gamma, Gamma, common = score_fn(sets)
    g0, G0, c0 = exact_score(sets)
    if set(common) != set(c0) or len(Gamma) != len(G0):
        return False
    return (abs(gamma - float(g0)) <= 1e-15
            and all(abs(a - float(b)) <= 1e-15 for a, b in zip(Gamma, G0)))


def metric_cases():
    """``(name, computed, expected)`` for closed-form metric configurations."""
    mu, cap = 0.5, 1.0
    out = []
    # frictionless jaws squeezing along x cannot lift along z
    ctx = TaskContext(UnitScrew.translation([0, 0, 1]), mu_robot=0.0, cone_facets=64, force_cap=cap)
    out.append(("frictionless lift",
                eta_for_contacts([[0.02, 0, 0], [-0.02, 0, 0]], [[-1, 0, 0], [1, 0, 0]], ctx), 0.0))
    # one jaw against a frictionless wall: best tangential force at the cone edge
    wall = EnvironmentContact([0, 0, 0], [0, 0, -1], 0.0)
    ctx = TaskContext(UnitScrew.translation([1, 0, 0]), [wall], mu_robot=mu, cone_facets=64,
                      force_cap=cap)
    out.append(("single cone tangential",
                eta_for_contacts([[0, 0, 0]], [[0, 0, 1]], ctx), mu / math.sqrt(1 + mu * mu) * cap))
    # plate squeezed along x and lifted along z
    ctx = TaskContext(UnitScrew.translation([0, 0, 1]), mu_robot=mu, cone_facets=64, force_cap=cap)
    out.append(("plate pickup",
                eta_for_contacts([[0.02, 0, 0], [-0.02, 0, 0]], [[-1, 0, 0], [1, 0, 0]], ctx),
                2 * (cap / 2) * mu / math.sqrt(1 + mu * mu)))
    return out


def cmd_verify(seed=0, instance_count=500, score_fn=compute_score, echo=print):
    """Run all checks; return 0 when every check passes, 1 otherwise."""
    rng = np.random.default_rng(seed)
    failures = 0
    checks = 0
    for t in range(instance_count):
        sets = random_regions(rng)
        gamma_th = GAMMA_THS[t % len(GAMMA_THS)]
        checks += 2
        nonempty = [s for s in sets if s]
        for a in range(len(nonempty)):
            group = nonempty[a:a + 1 + t % 3]
            if not check_score(group, score_fn):
                failures += 1
                echo(f"score mismatch on instance {t}: sets={[sorted(s) for s in group]} "
                     f"got {score_fn(group)[:2]} expected {[float(x) for x in exact_score(group)[1]]}")
                break
        g = greedy_partition(sets, gamma_th)
        b = optimal_partition_bruteforce(sets, gamma_th)
        if g.alpha != b.alpha:
            failures += 1
            echo(f"greedy/bruteforce mismatch on instance {t} (gamma_th={gamma_th}): "
                 f"greedy {g.ranges} vs optimal {b.ranges}; sets={[sorted(s) for s in sets]}")
    if instance_count > 0:
        for name, got, want in metric_cases():
            checks += 1
            ok = got == want if want == 0.0 else abs(got - want) <= 0.02 * abs(want)
            if not ok:
                failures += 1
                echo(f"metric check '{name}' failed: got {got:.6g}, expected {want:.6g}")
    echo(f"{checks - failures}/{checks} checks passed")
    return 0 if failures == 0 else 1
