"""Task-dependent grasp metric and grasping-region extraction.

For a parallel-jaw contact pair the metric ``eta`` is the largest multiple of
the unit task wrench that the contacts (robot and environment), together with
gravity, can deliver while every contact force stays inside its friction cone
and the total robot contact force magnitude stays below ``force_cap``::

    maximize    eta
    subject to  sum_c W_c f_c + w_gravity = eta * w_task
                f_c in FC(mu_c)          for every contact c
                sum_robot |f_c| <= force_cap

Friction cones are replaced by inscribed pyramids, which turns the problem
into a linear program.  Each robot force set (pyramid with magnitude at most
one) is spanned by a finite set of generators whose weights sum to the force
budget; environment cones are unbudgeted and only need their boundary rays.

For a pure translation the task wrench is a force along the translation
direction.  Its line of action is left free (a translation has no axis
location), so only the force rows and the moment component along the
direction are constrained.
"""

from __future__ import annotations

import enum
import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .cloud import (DEFAULT_ANTIPODAL_TOL, DEFAULT_GRIPPER_WIDTH, BoundingBox,
                    ContactPair, PointCloud, antipodal_pairs)
from .errors import AxisNotOnBody, EmptyRegion, ModelUnbounded, NumericalBreakdown
from .lpsolve import LinearProgram, LpStatus, solve_lp
from .screws import ScrewSegment, UnitScrew

log = logging.getLogger(__name__)

GRAVITY = 9.81
ETA_ZERO = 1e-9  # relative to force_cap


class Primitive(str, enum.Enum):
    PIVOT = "PIVOT"
    SLIDE = "SLIDE"
    PICKUP = "PICKUP"
    FREE = "FREE"


@dataclass(frozen=True)
class MetricParams:
    mass: float = 0.5
    mu_robot: float = 0.8
    mu_env: float = 0.3
    force_cap: float = 20.0
    cone_facets: int = 16
    gravity: float = GRAVITY
    up: tuple = (0.0, 0.0, 1.0)
    axis_tolerance: float = 0.01

    def to_json(self):
        return {"mass": self.mass, "mu_robot": self.mu_robot, "mu_env": self.mu_env,
                "force_cap": self.force_cap, "cone_facets": self.cone_facets,
                "gravity": self.gravity, "up": list(self.up),
                "axis_tolerance": self.axis_tolerance}


@dataclass(frozen=True, eq=False)
class EnvironmentContact:
    """Object-environment contact.

    ``normal`` points into the object."""

    position: np.ndarray
    normal: np.ndarray
    mu: float

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float).reshape(3))
        n = np.asarray(self.normal, dtype=float).reshape(3)
        if abs(np.linalg.norm(n) - 1.0) > 1e-9:
            raise ValueError("environment contact normal must be unit length")
        if self.mu < 0:
            raise ValueError("friction coefficient must be nonnegative")
        object.__setattr__(self, "normal", n)

    def transformed(self, g):
        return EnvironmentContact(g.apply(self.position), g.rotate(self.normal), self.mu)


@dataclass(frozen=True, eq=False)
class TaskContext:
    task_screw: UnitScrew
    environment_contacts: tuple = ()
    gravity_wrench: np.ndarray = field(default_factory=lambda: np.zeros(6))
    mu_robot: float = 0.8
    cone_facets: int = 16
    force_cap: float = 20.0
    primitive: Primitive = Primitive.FREE

    def __post_init__(self):
        if self.cone_facets < 4:
            raise ValueError("cone_facets must be at least 4")
        if not self.force_cap > 0:
            raise ModelUnbounded("force_cap must be positive; the metric LP is unbounded otherwise")
        if not self.task_screw.is_valid(1e-9):
            raise ValueError("invalid task screw")
        object.__setattr__(self, "environment_contacts", tuple(self.environment_contacts))
        object.__setattr__(self, "gravity_wrench",
                           np.asarray(self.gravity_wrench, dtype=float).reshape(6))

    def transformed(self, g) -> "TaskContext":
        """The same physical situation expressed in another frame."""
        from .screws import screw_transform
        f, m = self.gravity_wrench[:3], self.gravity_wrench[3:]
        f2 = g.rotate(f)
        m2 = g.rotate(m) + np.cross(g.translation, f2)
        return TaskContext(screw_transform(self.task_screw, g),
                           [c.transformed(g) for c in self.environment_contacts],
                           np.concatenate([f2, m2]), self.mu_robot, self.cone_facets,
                           self.force_cap, self.primitive)

    def with_force_cap(self, cap):
        return TaskContext(self.task_screw, self.environment_contacts, self.gravity_wrench,
                           self.mu_robot, self.cone_facets, cap, self.primitive)


def unit_task_wrench(s: UnitScrew) -> np.ndarray:
    """Unit wrench ``(force, moment)`` along the screw, taken about its axis point."""
    l = s.direction
    if s.is_translation:
        return np.concatenate([l, np.zeros(3)])
    if s.pitch == 0.0:
        return np.concatenate([np.zeros(3), l])
    k = 1.0 / math.sqrt(1.0 + s.pitch * s.pitch)
    return np.concatenate([k * l, k * s.pitch * l])


def _tangent_frame(normal, hints):
    for h in hints:
        if h is None:
            continue
        t = np.asarray(h, dtype=float) - (normal @ h) * normal
        nt = np.linalg.norm(t)
        if nt > 1e-9:
            t1 = t / nt
            return t1, np.cross(normal, t1)
    helper = np.eye(3)[int(np.argmin(np.abs(normal)))]
    t1 = np.cross(normal, helper)
    t1 /= np.linalg.norm(t1)
    return t1, np.cross(normal, t1)


def _azimuths(normal, facets, hints):
    t1, t2 = _tangent_frame(normal, hints)
    psi = 2.0 * math.pi * np.arange(facets) / facets
    return np.outer(np.cos(psi), t1) + np.outer(np.sin(psi), t2)


def cone_rays(normal, mu, facets, hints=()):
    """Boundary rays of the ``facets``-sided pyramid inscribed in the friction cone."""
    normal = np.asarray(normal, dtype=float)
    if mu == 0.0:
        return normal[None, :].copy()
    half = math.atan(mu)
    return math.cos(half) * normal + math.sin(half) * _azimuths(normal, facets, hints)


def budget_generators(normal, mu, facets, hints=()):
    """Generators of the robot force set with unit force budget.

    The set is the friction pyramid intersected with a fixed polytope ``Q``
    whose vertices are unit vectors on a polar/azimuth grid of spacing
    ``2*pi/facets`` around the normal.  ``Q`` approximates the unit ball from
    inside and does not depend on ``mu``, so the set grows with ``mu`` and
    with ``facets`` (grids for 8, 16, 32, ... facets are nested).

    Generators: the normal, every grid vector strictly inside the cone, and
    the pyramid's boundary rays shortened to the surface of ``Q``.
    """
    normal = np.asarray(normal, dtype=float)
    if mu == 0.0:
        return normal[None, :].copy()
    step = 2.0 * math.pi / facets
    half = math.atan(mu)
    dirs = _azimuths(normal, facets, hints)
    gens = [normal[None, :]]
    k = 1
    while k * step < half - 1e-12:
        phi = k * step
        gens.append(math.cos(phi) * normal + math.sin(phi) * dirs)
        k += 1
    # the boundary ray meets the chord between grid angles (k-1)*step and k*step
    mid = (k - 0.5) * step
    scale = math.cos(0.5 * step) / math.cos(half - mid)
    gens.append(scale * (math.cos(half) * normal + math.sin(half) * dirs))
    return np.vstack(gens)


def _wrench_rows(points, rays, ref, translation_axis):
    """Constraint rows contributed by forces ``rays`` applied at ``points``."""
    f = rays
    m = np.cross(points - ref, f)
    if translation_axis is None:
        return np.hstack([f, m]).T
    return np.hstack([f, (m @ translation_axis)[:, None]]).T


def eta_for_contacts(points, inward_normals, ctx: TaskContext) -> float:
    """Metric value for robot contacts at ``points`` pushing along ``inward_normals``."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    inward_normals = np.atleast_2d(np.asarray(inward_normals, dtype=float))
    s = ctx.task_screw
    l = s.direction
    w_task = unit_task_wrench(s)
    g_f, g_m0 = ctx.gravity_wrench[:3], ctx.gravity_wrench[3:]
    if s.is_translation:
        ref = points.mean(axis=0)
        axis = l
    else:
        ref = s.axis_point
        axis = None
    g_m = g_m0 - np.cross(ref, g_f)

    facets = ctx.cone_facets
    grav_hint = g_f if np.any(g_f) else None
    blocks = []
    for p, nrm in zip(points, inward_normals):
        hints = (l, p - ref, grav_hint)
        rays = budget_generators(nrm, ctx.mu_robot, facets, hints)
        blocks.append(_wrench_rows(np.broadcast_to(p, rays.shape), rays, ref, axis))
    n_robot = sum(b.shape[1] for b in blocks)
    for c in ctx.environment_contacts:
        hints = (l, c.position - ref, grav_hint)
        rays = cone_rays(c.normal, c.mu, facets, hints)
        blocks.append(_wrench_rows(np.broadcast_to(c.position, rays.shape), rays, ref, axis))

    if axis is None:
        task_col = w_task
        rhs = -np.concatenate([g_f, g_m])
    else:
        task_col = np.concatenate([l, [0.0]])
        rhs = -np.concatenate([g_f, [g_m @ axis]])
    G = np.hstack(blocks)
    A_eq = np.hstack([-task_col[:, None], G])
    n_var = A_eq.shape[1]
    A_ub = np.zeros((1, n_var))
    A_ub[0, 1:1 + n_robot] = 1.0
    c = np.zeros(n_var)
    c[0] = 1.0
    lp = LinearProgram(c, A_eq, rhs, A_ub, [ctx.force_cap])
    try:
        sol = solve_lp(lp)
    except NumericalBreakdown as exc:
        log.warning("metric LP broke down, contact treated as infeasible: %s", exc)
        return 0.0
    if sol.status is LpStatus.INFEASIBLE:
        return 0.0
    if sol.status is LpStatus.UNBOUNDED:
        raise ModelUnbounded("metric LP is unbounded; check the task context")
    eta = float(sol.x[0])
    # solver round-off on a task the contacts cannot resist at all
    return eta if eta > ETA_ZERO * ctx.force_cap else 0.0


def eta_for_pair(pair: ContactPair, cloud: PointCloud, ctx: TaskContext) -> float:
    idx = [pair.index_a, pair.index_b]
    return eta_for_contacts(cloud.points[idx], -cloud.normals[idx], ctx)


@dataclass(frozen=True, eq=False)
class GraspRegion:
    """Grasping region of one screw segment (``segment_index`` is 0-based)."""

    segment_index: int
    member_indices: frozenset
    eta: np.ndarray
    eta_th: float
    raw_max: float = 0.0
    pair_eta: np.ndarray | None = None
    warnings: tuple = ()

    @property
    def empty(self):
        return not self.member_indices

    def __len__(self):
        return len(self.member_indices)


def region_from_point_eta(segment_index, raw_point_eta, eta_th, pair_eta=None):
    raw = np.asarray(raw_point_eta, dtype=float)
    top = float(raw.max()) if raw.size else 0.0
    eta = raw / top if top > 0.0 else np.zeros_like(raw)
    members = frozenset(int(j) for j in np.flatnonzero(eta >= eta_th))
    notes = ()
    if not members:
        msg = (f"segment {segment_index + 1}: no point reaches eta_th={eta_th}; "
               "no single grasp can execute this segment")
        warnings.warn(msg, EmptyRegion, stacklevel=3)
        notes = (msg,)
    return GraspRegion(segment_index, members, eta, eta_th, top, pair_eta, notes)


def compute_metric(clouds, plan, contexts, eta_th, pairs=None,
                   max_gripper_width=DEFAULT_GRIPPER_WIDTH,
                   antipodal_tolerance=DEFAULT_ANTIPODAL_TOL, progress=None):
    """Grasping regions for every segment of ``plan``.

    ``clouds`` is the output of ``transform_point_cloud``.  Pairs are found
    once on the first cloud; rigid motion does not change which indices pair
    up, so the same index pairs are evaluated on every cloud.
    """
    k = len(plan)
    if k < 2:
        raise ValueError("plan needs at least two poses")
    if len(contexts) != k - 1 or len(clouds) != k:
        raise ValueError("need k clouds and k-1 task contexts for a k-pose plan")
    if not 0.0 < eta_th <= 1.0:
        raise ValueError("eta_th must lie in (0, 1]")
    if pairs is None:
        pairs = antipodal_pairs(clouds[0], max_gripper_width, antipodal_tolerance)
    n = len(clouds[0])
    regions = []
    for i, ctx in enumerate(contexts):
        cloud = clouds[i]
        pair_eta = np.zeros(len(pairs))
        point_eta = np.zeros(n)
        for q, pair in enumerate(pairs):
            e = eta_for_pair(pair, cloud, ctx)
            pair_eta[q] = e
            a, b = pair.index_a, pair.index_b
            if e > point_eta[a]:
                point_eta[a] = e
            if e > point_eta[b]:
                point_eta[b] = e
            if progress is not None:
                progress(i, q, len(pairs))
        regions.append(region_from_point_eta(i, point_eta, eta_th, pair_eta))
    return regions


# ------------------------------------------------------------ task contexts

def gravity_wrench(mass, center, up=(0.0, 0.0, 1.0), g=GRAVITY):
    up = np.asarray(up, dtype=float)
    f = -mass * g * up / np.linalg.norm(up)
    return np.concatenate([f, np.cross(center, f)])


def _distance_to_line(points, line_point, direction):
    d = np.atleast_2d(points) - line_point
    return np.linalg.norm(d - np.outer(d @ direction, direction), axis=1)


def pivot_edge(bbox: BoundingBox, screw: UnitScrew, tol=0.01):
    """Endpoints of the box edge that lies on the screw axis."""
    verts = bbox.vertices()
    r, l = screw.axis_point, screw.direction
    dist = _distance_to_line(verts, r, l)
    best = None
    for i, j in bbox.edges():
        d = max(dist[i], dist[j])
        if best is None or d < best[0] - 1e-12:
            best = (d, i, j)
    if screw.is_translation or best[0] > tol:
        raise AxisNotOnBody(
            f"pivot axis is {best[0]:.4g} m from the nearest box edge (tolerance {tol})")
    return verts[best[1]], verts[best[2]]


def bottom_face_center(bbox: BoundingBox, up):
    up = np.asarray(up, dtype=float)
    faces = bbox.faces()
    k = int(np.argmin([n @ up for n, _ in faces]))
    return faces[k][1]


def build_task_context(segment, bbox: BoundingBox, primitive, params: MetricParams = MetricParams()):
    """Environment contacts, gravity and friction data for one segment.

    ``segment`` is a :class:`ScrewSegment` whose poses are expressed in the
    frame of the first plan pose, or directly the task :class:`UnitScrew` in
    that frame.  ``bbox`` is the object's box at the segment start, in the
    same frame.
    """
    primitive = Primitive(primitive)
    screw = segment.spatial_screw if isinstance(segment, ScrewSegment) else segment
    up = np.asarray(params.up, dtype=float)
    up = up / np.linalg.norm(up)
    contacts = []
    if primitive is Primitive.PIVOT:
        a, b = pivot_edge(bbox, screw, params.axis_tolerance)
        contacts = [EnvironmentContact(a, up, params.mu_env),
                    EnvironmentContact(b, up, params.mu_env)]
    elif primitive is Primitive.SLIDE:
        contacts = [EnvironmentContact(bottom_face_center(bbox, up), up, params.mu_env)]
    return TaskContext(
        task_screw=screw,
        environment_contacts=contacts,
        gravity_wrench=gravity_wrench(params.mass, bbox.center, up, params.gravity),
        mu_robot=params.mu_robot,
        cone_facets=params.cone_facets,
        force_cap=params.force_cap,
        primitive=primitive,
    )
