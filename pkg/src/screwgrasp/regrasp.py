"""Grasp scores, sequential partition of grasping regions and contact selection.

A group of consecutive segments can share one grasp when the intersection of
their grasping regions is a large enough fraction of every member region.
The greedy left-to-right partition is optimal: shrinking a group enlarges
the intersection and drops score terms, so every contiguous subgroup of a
feasible group is feasible, and taking the longest feasible prefix each time
never costs an extra group.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyInput, EmptyRegion, NoFeasiblePair, TooManySegments

DEFAULT_GAMMA_TH = 0.25
DEFAULT_ETA_TH = 0.75
BRUTEFORCE_LIMIT = 16


def _members(region):
    m = getattr(region, "member_indices", region)
    return m if isinstance(m, frozenset) else frozenset(m)


def compute_score(regions):
    """Return ``(gamma, Gamma, intersection)`` for a group of regions."""
    sets = [_members(r) for r in regions]
    if not sets:
        raise EmptyInput("compute_score needs at least one region")
    common = frozenset.intersection(*sets)
    Gamma = [len(common) / len(s) if s else 0.0 for s in sets]
    return min(Gamma), Gamma, common


@dataclass(frozen=True)
class Group:
    start: int
    stop: int
    gamma: float
    Gamma: tuple
    intersection: frozenset
    warning: str | None = None

    @property
    def segments(self):
        return range(self.start, self.stop)

    def to_json(self):
        """Segment range is reported 1-based and inclusive."""
        out = {"segments": [self.start + 1, self.stop], "gamma": self.gamma,
               "Gamma": list(self.Gamma), "intersection_size": len(self.intersection)}
        if self.warning:
            out["warning"] = self.warning
        return out


@dataclass(frozen=True)
class RegraspPlan:
    groups: tuple = field(default_factory=tuple)

    @property
    def alpha(self):
        return len(self.groups)

    @property
    def regrasps(self):
        return max(self.alpha - 1, 0)

    @property
    def ranges(self):
        """Groups as 1-based inclusive ``[first, last]`` segment ranges."""
        return [[g.start + 1, g.stop] for g in self.groups]

    @property
    def group_scores(self):
        return [(list(g.Gamma), g.gamma) for g in self.groups]

    @property
    def group_intersections(self):
        return [g.intersection for g in self.groups]


def _group(regions, start, stop):
    sets = [_members(r) for r in regions[start:stop]]
    if stop - start == 1 and not sets[0]:
        msg = f"segment {start + 1} has an empty grasping region"
        return Group(start, stop, 0.0, (0.0,), frozenset(), msg)
    gamma, Gamma, common = compute_score(sets)
    return Group(start, stop, gamma, tuple(Gamma), common)


def _feasible(sets, gamma_th):
    if any(not s for s in sets):
        return False
    return compute_score(sets)[0] >= gamma_th


def greedy_partition(regions, gamma_th=DEFAULT_GAMMA_TH):
    """Longest-feasible-prefix partition of ``regions`` into sequential groups."""
    if not 0.0 < gamma_th <= 1.0:
        raise ValueError("gamma_th must lie in (0, 1]")
    sets = [_members(r) for r in regions]
    groups = []
    i = 0
    n = len(sets)
    while i < n:
        if not sets[i]:
            groups.append(_group(sets, i, i + 1))
            warnings.warn(groups[-1].warning, EmptyRegion, stacklevel=2)
            i += 1
            continue
        common = sets[i]
        Gamma_sizes = [len(sets[i])]
        j = i + 1
        while j < n and sets[j]:
            cand = common & sets[j]
            sizes = Gamma_sizes + [len(sets[j])]
            # strict less-than breaks the group; equality is accepted
            if min(len(cand) / s for s in sizes) < gamma_th:
                break
            common, Gamma_sizes = cand, sizes
            j += 1
        groups.append(_group(sets, i, j))
        i = j
    return RegraspPlan(tuple(groups))


def _sequential_cuts(n):
    """All cut sets of ``n`` items, ordered longest-first-group then lexicographic."""
    def key(cuts):
        bounds = list(cuts) + [n]
        return tuple(-b for b in bounds)
    all_cuts = []
    for r in range(n):
        all_cuts.extend(itertools.combinations(range(1, n), r))
    return sorted(all_cuts, key=lambda c: (len(c), key(c)))


def optimal_partition_bruteforce(regions, gamma_th=DEFAULT_GAMMA_TH):
    """Minimum-size feasible sequential partition by enumeration."""
    sets = [_members(r) for r in regions]
    n = len(sets)
    if n > BRUTEFORCE_LIMIT:
        raise TooManySegments(f"{n} segments exceed the enumeration bound {BRUTEFORCE_LIMIT}")
    if n == 0:
        return RegraspPlan(())
    feasible = {}

    def ok(a, b):
        if (a, b) not in feasible:
            feasible[(a, b)] = b - a == 1 or _feasible(sets[a:b], gamma_th)
        return feasible[(a, b)]

    for cuts in _sequential_cuts(n):
        bounds = [0, *cuts, n]
        if all(ok(a, b) for a, b in zip(bounds, bounds[1:])):
            return RegraspPlan(tuple(_group(sets, a, b) for a, b in zip(bounds, bounds[1:])))
    raise AssertionError("singleton partition is always feasible")


def grasp_contact_selection(intersection, cloud, pairs, group_regions=()):
    """Best contact pair inside ``intersection`` for a group of segments.

    A pair qualifies when both endpoints lie in the intersection.  Pairs are
    ranked by the smallest normalized endpoint metric over all segments of
    the group; ties go to the lowest index pair.
    """
    inter = _members(intersection)
    n = len(cloud)
    if any(j < 0 or j >= n for j in inter):
        raise ValueError("intersection holds indices outside the cloud")
    best, best_score = None, -np.inf
    for pair in sorted(pairs, key=lambda p: p.indices):
        a, b = pair.indices
        if a not in inter or b not in inter:
            continue
        score = min(min(r.eta[a], r.eta[b]) for r in group_regions) if group_regions else 0.0
        if score > best_score:
            best, best_score = pair, score
    if best is None:
        raise NoFeasiblePair(
            f"no antipodal pair has both contacts inside the {len(inter)}-point intersection")
    return best
