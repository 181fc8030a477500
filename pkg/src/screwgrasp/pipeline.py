"""Plan specifications, synthetic objects and the end-to-end regrasp pipeline."""

from __future__ import annotations

import json
import logging
import math
import re
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .cloud import (DEFAULT_ANTIPODAL_TOL, DEFAULT_GRIPPER_WIDTH, DEFAULT_K_NEIGHBORS,
                    BoundingBox, PointCloud, antipodal_pairs, load_ply,
                    oriented_bounding_box, save_ply, transform_point_cloud)
from .errors import (BadEdgeSelector, EmptyRegion, NoFeasiblePair, ParseError,
                     ZeroMagnitude)
from .metric import MetricParams, Primitive, build_task_context, compute_metric
from .regrasp import (DEFAULT_ETA_TH, DEFAULT_GAMMA_TH, grasp_contact_selection,
                      greedy_partition)
from .screws import INFINITE, Pose, ScrewSegment, UnitScrew, screw_exp

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
_AXES = {"x": 0, "y": 1, "z": 2}
_SELECTOR = re.compile(r"^(min|max)_([xyz])_(min|max)_([xyz])$")
EDGE_ALIGN_COS = math.cos(math.radians(20.0))


# ---------------------------------------------------------------- plan specs

@dataclass(frozen=True)
class Step:
    type: str
    params: dict = field(default_factory=dict)

    @property
    def primitive(self):
        return Primitive.FREE if self.type == "FREE_SCREW" else Primitive(self.type)


@dataclass(frozen=True, eq=False)
class PlanSpec:
    poses: tuple | None = None
    skeleton: tuple | None = None
    primitives: tuple | None = None  # optional labels for explicit poses

    @classmethod
    def from_json(cls, data):
        if isinstance(data, (str, Path)):
            try:
                data = json.loads(Path(data).read_text())
            except json.JSONDecodeError as exc:
                raise ParseError(f"plan is not valid JSON: {exc.msg}", line=exc.lineno) from exc
        if not isinstance(data, dict) or ("poses" in data) == ("skeleton" in data):
            raise ParseError("plan must have exactly one of 'poses' or 'skeleton'")
        if "poses" in data:
            try:
                poses = tuple(Pose.from_json(p) for p in data["poses"])
            except (KeyError, TypeError, ValueError) as exc:
                raise ParseError(f"bad pose record: {exc}") from exc
            if len(poses) < 2:
                raise ParseError("a pose plan needs at least two poses")
            prims = data.get("primitives")
            if prims is not None:
                if len(prims) != len(poses) - 1:
                    raise ParseError("need one primitive label per segment")
                try:
                    prims = tuple(Primitive(p) for p in prims)
                except ValueError as exc:
                    raise ParseError(str(exc)) from exc
            return cls(poses=poses, primitives=prims)
        steps = []
        for k, raw in enumerate(data["skeleton"]):
            if not isinstance(raw, dict) or "type" not in raw:
                raise ParseError(f"skeleton step {k + 1} needs a 'type'")
            t = str(raw["type"]).upper()
            if t not in ("PIVOT", "SLIDE", "PICKUP", "FREE_SCREW"):
                raise ParseError(f"skeleton step {k + 1}: unknown type {raw['type']!r}")
            steps.append(Step(t, {a: b for a, b in raw.items() if a != "type"}))
        if not steps:
            raise ParseError("skeleton is empty")
        return cls(skeleton=tuple(steps))

    def to_json(self):
        if self.poses is not None:
            out = {"poses": [p.to_json() for p in self.poses]}
            if self.primitives is not None:
                out["primitives"] = [p.value for p in self.primitives]
            return out
        return {"skeleton": [{"type": s.type, **s.params} for s in self.skeleton]}


def select_edge(bbox: BoundingBox, selector):
    """Endpoints of the box edge named like ``"min_y_min_z"``.

    The two named coordinates are clamped to the box's extreme values along
    those reference axes; the edge runs along the remaining axis and is
    returned with increasing coordinate along it, so a pivot about it with a
    positive angle turns right-handed about that axis.  Ties between edges of
    a tilted box go to the one more extreme in the second named coordinate.
    Edges may deviate from the reference axis by up to 20 degrees.
    """
    m = _SELECTOR.match(str(selector))
    if not m or m.group(2) == m.group(4):
        raise BadEdgeSelector(f"edge selector {selector!r} is not of the form min_y_min_z")
    clamps = [(_AXES[m.group(2)], m.group(1)), (_AXES[m.group(4)], m.group(3))]
    free = ({0, 1, 2} - {clamps[0][0], clamps[1][0]}).pop()
    verts = bbox.vertices()
    best = None
    for i, j in bbox.edges():
        d = verts[j] - verts[i]
        length = np.linalg.norm(d)
        if length < 1e-12 or abs(d[free]) / length < EDGE_ALIGN_COS:
            continue
        mid = 0.5 * (verts[i] + verts[j])
        terms = [-mid[a] if side == "min" else mid[a] for a, side in clamps]
        score = (round(sum(terms), 9), round(terms[1], 9))
        if best is None or score > best[0]:
            best = (score, i, j)
    if best is None:
        raise BadEdgeSelector(f"no box edge runs along {'xyz'[free]} for selector {selector!r}")
    a, b = verts[best[1]], verts[best[2]]
    return (a, b) if a[free] <= b[free] else (b, a)


def _vec(params, key, default=None):
    v = params.get(key, default)
    if v is None:
        raise ParseError(f"missing parameter {key!r}")
    try:
        v = np.asarray(v, dtype=float).reshape(3)
    except ValueError as exc:
        raise ParseError(f"parameter {key!r} must be a 3-vector") from exc
    return v


def _num(params, key, default=None):
    v = params.get(key, default)
    if v is None:
        raise ParseError(f"missing parameter {key!r}")
    try:
        return float(v)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"parameter {key!r} must be a number") from exc


def _pivot_screw(step, bbox):
    p = step.params
    if "axis" in p:
        ax = p["axis"]
        l = _vec(ax, "l")
        point = _vec(ax, "point")
        n = np.linalg.norm(l)
        if n < 1e-12:
            raise ZeroMagnitude("pivot axis direction is zero")
        return UnitScrew.through_point(l / n, point, 0.0)
    a, b = select_edge(bbox, p.get("edge", "min_y_min_z"))
    l = (b - a) / np.linalg.norm(b - a)
    return UnitScrew.through_point(l, a, 0.0)


def compile_skeleton(spec: PlanSpec, bbox: BoundingBox, params: MetricParams = MetricParams()):
    """Poses and task contexts for every segment of ``spec``.

    Skeleton steps are world-frame displacements applied to the current
    pose, starting from the identity.  Explicit pose plans are re-expressed
    relative to their first pose.
    """
    up = np.asarray(params.up, dtype=float)
    up = up / np.linalg.norm(up)
    if spec.poses is not None:
        g1_inv = spec.poses[0].inverse()
        poses = [g1_inv @ g for g in spec.poses]
        prims = spec.primitives or (Primitive.FREE,) * (len(poses) - 1)
        # gravity and supports stay fixed in the world; express them at g_1
        local = replace(params, up=tuple(spec.poses[0].rotation.T @ up))
        contexts = []
        for i, prim in enumerate(prims):
            seg = ScrewSegment.from_poses(poses[i], poses[i + 1])
            contexts.append(build_task_context(seg, bbox.transformed(poses[i]), prim, local))
        return poses, contexts

    poses = [Pose.identity()]
    contexts = []
    for k, step in enumerate(spec.skeleton):
        g = poses[-1]
        box = bbox.transformed(g)
        p = step.params
        if step.type == "PIVOT":
            screw = _pivot_screw(step, box)
            mag = _num(p, "angle", math.pi / 2)
        elif step.type == "SLIDE":
            d = _vec(p, "direction", (1.0, 0.0, 0.0))
            if np.linalg.norm(d) < 1e-12:
                raise ZeroMagnitude(f"step {k + 1}: slide direction is zero")
            screw = UnitScrew.translation(d)
            mag = _num(p, "distance", 0.1)
        elif step.type == "PICKUP":
            screw = UnitScrew.translation(up)
            mag = _num(p, "distance", 0.1)
        else:
            l = _vec(p, "l")
            if np.linalg.norm(l) < 1e-12:
                raise ZeroMagnitude(f"step {k + 1}: screw direction is zero")
            h = p.get("h", 0.0)
            h = INFINITE if str(h).lower() in ("inf", "infinity") else float(h)
            if math.isinf(h):
                screw = UnitScrew.translation(l)
            else:
                l = l / np.linalg.norm(l)
                m = _vec(p, "m", (0.0, 0.0, 0.0))
                m = m - (m @ l) * l
                screw = UnitScrew(l, m, h)
            mag = _num(p, "magnitude")
        if abs(mag) < 1e-9:
            raise ZeroMagnitude(f"step {k + 1} ({step.type}) has zero magnitude")
        if mag < 0:
            screw = _flip(screw)
            mag = -mag
        poses.append(screw_exp(screw, mag) @ g)
        seg = ScrewSegment.from_poses(g, poses[-1])
        contexts.append(build_task_context(screw, box, step.primitive, params))
        log.debug("step %d %s: %s magnitude %.4g (pitch %s)", k + 1, step.type,
                  seg.screw, seg.magnitude, seg.screw.pitch)
    return poses, contexts


def _flip(s: UnitScrew):
    if s.is_translation:
        return UnitScrew.translation(-s.direction)
    return UnitScrew(-s.direction, -s.moment, s.pitch)


# ----------------------------------------------------------- synthetic shapes

def _box_faces(ex, ey, ez):
    # (area, fixed axis, fixed value, outward normal sign)
    dims = (ex, ey, ez)
    for axis in range(3):
        u, v = [a for a in range(3) if a != axis]
        for sign, value in ((-1.0, 0.0), (1.0, dims[axis])):
            yield dims[u] * dims[v], axis, value, sign, u, v


def generate_synthetic(shape, dims, samples_per_unit_area=None, n_points=None, seed=0):
    """Surface samples with analytic normals.

    ``BOX`` spans ``[0, ex] x [0, ey] x [0, ez]``; ``CYLINDER`` with
    ``(radius, height)`` stands on ``z = 0`` around the z axis.  Give either
    a sampling density or a total point count.
    """
    shape = str(shape).upper()
    dims = [float(d) for d in dims]
    if any(d <= 0 for d in dims):
        raise ValueError("shape dimensions must be positive")
    rng = np.random.default_rng(seed)
    if shape == "BOX":
        if len(dims) != 3:
            raise ValueError("BOX needs three extents")
        faces = list(_box_faces(*dims))
        area = sum(f[0] for f in faces)
    elif shape == "CYLINDER":
        if len(dims) != 2:
            raise ValueError("CYLINDER needs radius and height")
        r, h = dims
        area = 2 * math.pi * r * h + 2 * math.pi * r * r
    else:
        raise ValueError(f"unknown shape {shape!r}")
    if (samples_per_unit_area is None) == (n_points is None):
        raise ValueError("give exactly one of samples_per_unit_area or n_points")
    density = samples_per_unit_area if n_points is None else n_points / area
    if density <= 0:
        raise ValueError("sampling density must be positive")

    pts, nrm = [], []
    if shape == "BOX":
        for a, axis, value, sign, u, v in faces:
            n = max(1, int(round(a * density)))
            p = np.zeros((n, 3))
            p[:, axis] = value
            p[:, u] = rng.uniform(0.0, dims[u], n)
            p[:, v] = rng.uniform(0.0, dims[v], n)
            q = np.zeros((n, 3))
            q[:, axis] = sign
            pts.append(p)
            nrm.append(q)
    else:
        n_side = max(1, int(round(2 * math.pi * r * h * density)))
        phi = rng.uniform(0.0, 2 * math.pi, n_side)
        z = rng.uniform(0.0, h, n_side)
        radial = np.column_stack([np.cos(phi), np.sin(phi), np.zeros(n_side)])
        pts.append(np.column_stack([r * radial[:, :2], z]))
        nrm.append(radial)
        n_cap = max(1, int(round(math.pi * r * r * density)))
        for zc, sign in ((0.0, -1.0), (h, 1.0)):
            rho = r * np.sqrt(rng.uniform(0.0, 1.0, n_cap))
            phi = rng.uniform(0.0, 2 * math.pi, n_cap)
            pts.append(np.column_stack([rho * np.cos(phi), rho * np.sin(phi),
                                        np.full(n_cap, zc)]))
            nrm.append(np.tile([0.0, 0.0, sign], (n_cap, 1)))
    return PointCloud(np.vstack(pts), np.vstack(nrm))


# --------------------------------------------------------------- the pipeline

@dataclass(frozen=True)
class PipelineParams:
    gamma_th: float = DEFAULT_GAMMA_TH
    eta_th: float = DEFAULT_ETA_TH
    metric: MetricParams = MetricParams()
    gripper_width: float = DEFAULT_GRIPPER_WIDTH
    antipodal_tolerance: float = DEFAULT_ANTIPODAL_TOL
    k_neighbors: int = DEFAULT_K_NEIGHBORS

    def to_json(self):
        return {"gamma_th": self.gamma_th, "eta_th": self.eta_th, **self.metric.to_json(),
                "gripper_width": self.gripper_width,
                "antipodal_tolerance_deg": math.degrees(self.antipodal_tolerance),
                "k_neighbors": self.k_neighbors}


@dataclass(eq=False)
class RegraspReport:
    alpha: int
    groups: list
    segments: list
    parameters: dict
    cloud: dict
    executable: bool
    schema_version: int = SCHEMA_VERSION

    @property
    def ranges(self):
        return [g["segments"] for g in self.groups]

    def to_json(self):
        return {"schema_version": self.schema_version, "alpha": self.alpha,
                "regrasps": max(self.alpha - 1, 0), "executable": self.executable,
                "groups": self.groups, "segments": self.segments,
                "parameters": self.parameters, "cloud": self.cloud}

    def dumps(self):
        return json.dumps(self.to_json(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, data):
        if isinstance(data, str):
            data = json.loads(data)
        if data.get("schema_version") != SCHEMA_VERSION:
            raise ParseError(f"unsupported report schema_version {data.get('schema_version')!r}")
        return cls(alpha=data["alpha"], groups=data["groups"], segments=data["segments"],
                   parameters=data["parameters"], cloud=data["cloud"],
                   executable=data["executable"], schema_version=data["schema_version"])


@dataclass(eq=False)
class PipelineResult:
    report: RegraspReport
    cloud: PointCloud
    poses: list
    contexts: list
    regions: list
    plan: object
    pairs: list
    contacts: list  # ContactPair or None per group


def _as_cloud(source, k_neighbors):
    if isinstance(source, PointCloud):
        return source, "memory"
    return load_ply(source, k_neighbors), str(source)


def run_pipeline(cloud_source, plan_spec, params: PipelineParams = PipelineParams(),
                 progress=None) -> PipelineResult:
    cloud, origin = _as_cloud(cloud_source, params.k_neighbors)
    if not isinstance(plan_spec, PlanSpec):
        plan_spec = PlanSpec.from_json(plan_spec)
    bbox = oriented_bounding_box(cloud)
    poses, contexts = compile_skeleton(plan_spec, bbox, params.metric)
    clouds = transform_point_cloud(cloud, poses)
    pairs = antipodal_pairs(cloud, params.gripper_width, params.antipodal_tolerance)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EmptyRegion)
        regions = compute_metric(clouds, poses, contexts, params.eta_th, pairs=pairs,
                                 progress=progress)
        plan = greedy_partition(regions, params.gamma_th)

    segments = []
    for i, (reg, ctx) in enumerate(zip(regions, contexts)):
        seg = ScrewSegment.from_poses(poses[i], poses[i + 1])
        segments.append({
            "index": i + 1, "primitive": ctx.primitive.value,
            "task_screw": ctx.task_screw.to_json(), "magnitude": seg.magnitude,
            "region_size": len(reg), "raw_max_eta": reg.raw_max,
            "warnings": list(reg.warnings)})

    groups, contacts = [], []
    for g in plan.groups:
        entry = g.to_json()
        entry["contact"] = None
        entry["no_feasible_pair"] = False
        pair = None
        if g.intersection:
            try:
                pair = grasp_contact_selection(g.intersection, cloud, pairs,
                                               [regions[s] for s in g.segments])
                a, b = pair.indices
                entry["contact"] = {"indices": [a, b],
                                    "points": [cloud.points[a].tolist(), cloud.points[b].tolist()]}
            except NoFeasiblePair as exc:
                entry["no_feasible_pair"] = True
                entry["warning"] = str(exc)
        else:
            entry["no_feasible_pair"] = True
        groups.append(entry)
        contacts.append(pair)

    executable = all(not r.empty for r in regions)
    report = RegraspReport(
        alpha=plan.alpha, groups=groups, segments=segments,
        parameters=params.to_json(),
        cloud={"source": origin, "n_points": len(cloud), "n_pairs": len(pairs),
               "bbox": bbox.to_json()},
        executable=executable)
    return PipelineResult(report, cloud, poses, contexts, regions, plan, pairs, contacts)


# ------------------------------------------------------------------ PLY export

PALETTE = np.array([
    [230, 190, 30], [40, 120, 220], [150, 70, 200], [20, 170, 160],
    [240, 130, 40], [120, 180, 40], [200, 60, 140], [110, 110, 200],
])
BASE_GRAY = np.array([170, 170, 170])
RED = np.array([255, 0, 0])
GREEN = np.array([0, 255, 0])


def group_colors(n_points, group_index, member_sets, intersection, pair=None):
    colors = np.tile(BASE_GRAY, (n_points, 1))
    full = PALETTE[group_index % len(PALETTE)]
    muted = (0.5 * full + 0.5 * BASE_GRAY).astype(int)
    members = sorted(set().union(*member_sets)) if member_sets else []
    colors[members] = muted
    colors[sorted(intersection)] = full
    if pair is not None:
        colors[pair.index_a] = RED
        colors[pair.index_b] = GREEN
    return colors


def export_group_plys(result: PipelineResult, directory):
    """Write one colored cloud per group; returns the written paths."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for k, (g, pair) in enumerate(zip(result.plan.groups, result.contacts)):
        sets = [result.regions[s].member_indices for s in g.segments]
        colors = group_colors(len(result.cloud), k, sets, g.intersection, pair)
        path = out / f"group_{k + 1}_segments_{g.start + 1}-{g.stop}.ply"
        save_ply(path, result.cloud, colors)
        paths.append(path)
    return paths
