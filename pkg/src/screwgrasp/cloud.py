"""Point clouds in the object's body frame: PLY I/O, rigid transformation,
normal estimation, oriented bounding boxes and antipodal contact pairs."""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import ConvexHull, cKDTree
from scipy.spatial import QhullError

from .errors import (DegenerateGeometry, DegenerateNeighborhood, EmptyCloud,
                     ParseError)
from .screws import Pose, pose_compose, pose_inverse

DEFAULT_GRIPPER_WIDTH = 0.08
DEFAULT_ANTIPODAL_TOL = math.radians(15.0)
DEFAULT_K_NEIGHBORS = 20


@dataclass(frozen=True, eq=False)
class PointCloud:
    points: np.ndarray
    normals: np.ndarray
    frame_tag: str = "g1"

    def __post_init__(self):
        pts = np.array(self.points, dtype=float).reshape(-1, 3)
        nrm = np.array(self.normals, dtype=float).reshape(-1, 3)
        if pts.shape[0] == 0:
            raise EmptyCloud("point cloud has no points")
        if pts.shape != nrm.shape:
            raise ValueError(f"{pts.shape[0]} points but {nrm.shape[0]} normals")
        lengths = np.linalg.norm(nrm, axis=1)
        if np.any(np.abs(lengths - 1.0) > 1e-6):
            raise ValueError("normals must be unit length")
        pts.flags.writeable = False
        nrm.flags.writeable = False
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "normals", nrm)

    def __len__(self):
        return self.points.shape[0]

    def transformed(self, g: Pose, frame_tag=None) -> "PointCloud":
        return PointCloud(g.apply(self.points), g.rotate(self.normals),
                          frame_tag or self.frame_tag)

    @property
    def centroid(self):
        return self.points.mean(axis=0)


def _unit_rows(v):
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def transform_point_cloud(cloud: PointCloud, plan) -> list[PointCloud]:
    """Express the cloud at every plan pose in the frame of the first pose.

    Point ``j`` of output ``i`` is ``g_1^-1 g_i p_j``; indices never change.
    """
    plan = list(plan)
    if len(plan) < 2:
        raise ValueError("a plan needs at least two poses")
    g1_inv = pose_inverse(plan[0])
    out = [cloud]
    for i, g in enumerate(plan[1:], start=2):
        out.append(cloud.transformed(pose_compose(g1_inv, g), frame_tag=f"g{i}"))
    return out


# --------------------------------------------------------------------- PLY I/O

_PLY_TYPES = {
    "char": int, "uchar": int, "short": int, "ushort": int, "int": int, "uint": int,
    "int8": int, "uint8": int, "int16": int, "uint16": int, "int32": int, "uint32": int,
    "float": float, "double": float, "float32": float, "float64": float,
}


def load_ply(path, k_neighbors=DEFAULT_K_NEIGHBORS) -> PointCloud:
    """Read an ASCII PLY file.

    Only the ``vertex`` element is used.  Normals are estimated when the file
    has no ``nx ny nz`` properties.
    """
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0].strip() != "ply":
        raise ParseError("missing 'ply' magic", line=1)

    elements = []  # [name, count, [(prop, type)]]
    fmt_seen = False
    body_start = None
    for ln, raw in enumerate(lines[1:], start=2):
        tok = raw.split()
        if not tok or tok[0] in ("comment", "obj_info"):
            continue
        if tok[0] == "format":
            if len(tok) < 2 or tok[1] != "ascii":
                raise ParseError(f"unsupported format {' '.join(tok[1:])!r}; only ascii", line=ln)
            fmt_seen = True
        elif tok[0] == "element":
            if len(tok) != 3:
                raise ParseError("malformed element line", line=ln)
            try:
                count = int(tok[2])
            except ValueError:
                raise ParseError(f"bad element count {tok[2]!r}", line=ln) from None
            elements.append([tok[1], count, []])
        elif tok[0] == "property":
            if not elements:
                raise ParseError("property before any element", line=ln)
            if tok[1] == "list":
                if len(tok) != 5:
                    raise ParseError("malformed list property", line=ln)
                elements[-1][2].append((tok[4], "list"))
            else:
                if len(tok) != 3 or tok[1] not in _PLY_TYPES:
                    raise ParseError(f"malformed property line {raw.strip()!r}", line=ln)
                elements[-1][2].append((tok[2], tok[1]))
        elif tok[0] == "end_header":
            body_start = ln  # 1-based line number of end_header
            break
        else:
            raise ParseError(f"unexpected header keyword {tok[0]!r}", line=ln)
    if body_start is None:
        raise ParseError("missing end_header", line=len(lines))
    if not fmt_seen:
        raise ParseError("missing format line", line=body_start)

    cursor = body_start  # index into lines of the next body line
    vertex = None
    for name, count, props in elements:
        if name != "vertex":
            cursor += count
            continue
        names = [p for p, _ in props]
        for req in ("x", "y", "z"):
            if req not in names:
                raise ParseError(f"vertex element lacks property {req!r}", line=body_start)
        if any(t == "list" for _, t in props):
            raise ParseError("list properties on vertices are not supported", line=body_start)
        if count == 0:
            raise EmptyCloud("vertex element has zero entries")
        data = np.empty((count, len(props)))
        for i in range(count):
            ln = cursor + i + 1
            if cursor + i >= len(lines):
                raise ParseError(f"body ends after {i} of {count} vertices", line=ln)
            tok = lines[cursor + i].split()
            if len(tok) != len(props):
                raise ParseError(f"expected {len(props)} values, found {len(tok)}", line=ln)
            try:
                data[i] = [float(t) for t in tok]
            except ValueError:
                raise ParseError("non-numeric vertex value", line=ln) from None
        cursor += count
        vertex = (names, data)
    if vertex is None:
        raise ParseError("no vertex element in header", line=body_start)

    names, data = vertex
    col = {n: i for i, n in enumerate(names)}
    points = data[:, [col["x"], col["y"], col["z"]]]
    if not np.all(np.isfinite(points)):
        raise ParseError("non-finite coordinates in vertex data", line=body_start + 1)
    if all(k in col for k in ("nx", "ny", "nz")):
        normals = data[:, [col["nx"], col["ny"], col["nz"]]]
        lengths = np.linalg.norm(normals, axis=1)
        if np.any(lengths < 1e-12):
            raise ParseError("zero-length normal in vertex data", line=body_start + 1)
        return PointCloud(points, normals / lengths[:, None])
    # placeholder normals, replaced right away
    stub = PointCloud(points, np.tile([0.0, 0.0, 1.0], (points.shape[0], 1)))
    return estimate_normals(stub, min(k_neighbors, len(stub)))


def save_ply(path, cloud: PointCloud, colors=None):
    """Write an ASCII PLY with normals and optional uchar RGB colors."""
    n = len(cloud)
    header = ["ply", "format ascii 1.0", f"comment frame {cloud.frame_tag}",
              f"element vertex {n}",
              "property float x", "property float y", "property float z",
              "property float nx", "property float ny", "property float nz"]
    if colors is not None:
        colors = np.asarray(colors, dtype=int).reshape(n, 3)
        header += ["property uchar red", "property uchar green", "property uchar blue"]
    header.append("end_header")
    rows = []
    for i in range(n):
        p, q = cloud.points[i], cloud.normals[i]
        row = f"{p[0]:.9g} {p[1]:.9g} {p[2]:.9g} {q[0]:.9g} {q[1]:.9g} {q[2]:.9g}"
        if colors is not None:
            c = colors[i]
            row += f" {c[0]} {c[1]} {c[2]}"
        rows.append(row)
    Path(path).write_text("\n".join(header + rows) + "\n")


# ---------------------------------------------------------- normal estimation

def estimate_normals(cloud: PointCloud, k_neighbors=DEFAULT_K_NEIGHBORS) -> PointCloud:
    """PCA normals from ``k`` nearest neighbors, oriented away from the centroid.

    Neighborhoods with rank below two get the centroid-outward direction and
    a :class:`DegenerateNeighborhood` warning.
    """
    pts = cloud.points
    n = len(pts)
    if not 3 <= k_neighbors <= n:
        raise ValueError(f"need 3 <= k_neighbors <= N, got k={k_neighbors}, N={n}")
    _, idx = cKDTree(pts).query(pts, k=k_neighbors)
    nbh = pts[idx]
    centered = nbh - nbh.mean(axis=1, keepdims=True)
    cov = np.einsum("nki,nkj->nij", centered, centered) / k_neighbors
    evals, evecs = np.linalg.eigh(cov)
    normals = evecs[:, :, 0].copy()

    centroid = pts.mean(axis=0)
    outward = pts - centroid
    scale = np.maximum(evals[:, 2], 1e-300)
    degenerate = evals[:, 1] <= 1e-12 * scale
    if np.any(degenerate):
        warnings.warn(f"{int(degenerate.sum())} neighborhoods are rank deficient",
                      DegenerateNeighborhood, stacklevel=2)
        for i in np.flatnonzero(degenerate):
            d = outward[i]
            nd = np.linalg.norm(d)
            normals[i] = d / nd if nd > 0 else np.array([0.0, 0.0, 1.0])

    side = np.einsum("ij,ij->i", normals, outward)
    normals[side < 0] *= -1.0
    # points exactly level with the centroid: deterministic sign
    for i in np.flatnonzero(side == 0):
        normals[i] = _first_positive(normals[i])
    return PointCloud(pts, _unit_rows(normals), cloud.frame_tag)


def _first_sign(v, tol=1e-12):
    for c in v:
        if abs(c) > tol:
            return 1.0 if c > 0 else -1.0
    return 1.0


def _first_positive(v, tol=1e-12):
    return v * _first_sign(v, tol)


# -------------------------------------------------------------- bounding box

@dataclass(frozen=True, eq=False)
class BoundingBox:
    center: np.ndarray
    half_extents: np.ndarray
    orientation: np.ndarray  # columns are the box axes

    def __post_init__(self):
        for name in ("center", "half_extents"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float).reshape(3))
        object.__setattr__(self, "orientation",
                           np.asarray(self.orientation, dtype=float).reshape(3, 3))

    _SIGNS = np.array(list(itertools.product((-1.0, 1.0), repeat=3)))

    def vertices(self):
        """The 8 corners, ordered by the sign pattern of (axis0, axis1, axis2)."""
        return self.center + (self._SIGNS * self.half_extents) @ self.orientation.T

    def edges(self):
        """Index pairs into :meth:`vertices` for the 12 box edges."""
        s = self._SIGNS
        return [(i, j) for i in range(8) for j in range(i + 1, 8)
                if np.count_nonzero(s[i] != s[j]) == 1]

    def faces(self):
        """``(outward_normal, face_center)`` for the 6 faces."""
        out = []
        for a in range(3):
            for sgn in (-1.0, 1.0):
                n = sgn * self.orientation[:, a]
                out.append((n, self.center + n * self.half_extents[a]))
        return out

    def contains(self, points, tol=1e-6):
        local = (np.atleast_2d(points) - self.center) @ self.orientation
        return np.all(np.abs(local) <= self.half_extents + tol, axis=1)

    def transformed(self, g: Pose) -> "BoundingBox":
        return BoundingBox(g.apply(self.center), self.half_extents,
                           g.rotation @ self.orientation)

    def to_json(self):
        return {"center": self.center.tolist(), "half_extents": self.half_extents.tolist(),
                "orientation": self.orientation.tolist()}


def _box_for_axes(pts, axes):
    local = pts @ axes
    lo, hi = local.min(axis=0), local.max(axis=0)
    return axes, lo, hi


def _min_area_rectangle(uv):
    """Rotating-calipers over the 2D hull; returns (area, unit edge direction)."""
    try:
        hull = ConvexHull(uv)
        ring = uv[hull.vertices]
    except (QhullError, ValueError):
        ring = uv
    best = (math.inf, np.array([1.0, 0.0]))
    for i in range(len(ring)):
        e = ring[(i + 1) % len(ring)] - ring[i]
        ne = np.linalg.norm(e)
        if ne < 1e-15:
            continue
        e = e / ne
        f = np.array([-e[1], e[0]])
        a = np.ptp(ring @ e) * np.ptp(ring @ f)
        if a < best[0] - 1e-15:
            best = (a, e)
    return best


def _plane_basis(n):
    helper = np.eye(3)[int(np.argmin(np.abs(n)))]
    u = np.cross(n, helper)
    u /= np.linalg.norm(u)
    return u, np.cross(n, u)


def oriented_bounding_box(cloud) -> BoundingBox:
    """Tight oriented box around the cloud.

    Candidate orientations are the principal axes plus, for every convex-hull
    facet, the facet normal combined with the minimum-area rectangle of the
    projection; the smallest-volume candidate wins.  Axes are ordered by
    decreasing extent and signed so their first nonzero component is positive.
    """
    pts = cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud, dtype=float)
    if len(pts) < 3:
        raise DegenerateGeometry("need at least 3 points for a bounding box")
    mean = pts.mean(axis=0)
    centered = pts - mean
    sv = np.linalg.svd(centered, compute_uv=False)
    scale = max(sv[0], 1e-300)
    if sv[0] < 1e-12 or sv[1] <= 1e-9 * scale:
        raise DegenerateGeometry("points are coincident or collinear")

    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    candidates = [vt.T]
    planar = sv[2] <= 1e-9 * scale
    if planar:
        n = vt[2]
        u, v = _plane_basis(n)
        _, e = _min_area_rectangle(centered @ np.column_stack([u, v]))
        a1 = e[0] * u + e[1] * v
        candidates.append(np.column_stack([a1, np.cross(n, a1), n]))
    else:
        hull = ConvexHull(pts)
        hv = pts[hull.vertices]
        seen = set()
        for eq in hull.equations:
            n = eq[:3] / np.linalg.norm(eq[:3])
            n = _first_positive(n)
            key = tuple(np.round(n, 9))
            if key in seen:
                continue
            seen.add(key)
            u, v = _plane_basis(n)
            _, e = _min_area_rectangle(hv @ np.column_stack([u, v]))
            a1 = e[0] * u + e[1] * v
            candidates.append(np.column_stack([a1, np.cross(n, a1), n]))
        pts_for_fit = hv
    best = None
    for axes in candidates:
        _, lo, hi = _box_for_axes(pts if planar else pts_for_fit, axes)
        ext = hi - lo
        vol = ext[0] * ext[1] * ext[2] if not planar else ext[0] * ext[1]
        if best is None or vol < best[0] * (1.0 - 1e-12):
            best = (vol, axes, lo, hi)
    _, axes, lo, hi = best
    order = np.argsort(-(hi - lo), kind="stable")
    axes = axes[:, order]
    lo, hi = lo[order], hi[order]
    axes = axes.copy()
    for a in range(3):
        if _first_sign(axes[:, a]) < 0:
            axes[:, a] = -axes[:, a]
            lo[a], hi[a] = -hi[a], -lo[a]
    center_local = 0.5 * (lo + hi)
    return BoundingBox(axes @ center_local, 0.5 * (hi - lo), axes)


# ---------------------------------------------------------- antipodal pairs

@dataclass(frozen=True)
class ContactPair:
    index_a: int
    index_b: int
    axis: tuple  # unit vector from point a toward point b

    @property
    def indices(self):
        return (self.index_a, self.index_b)


def antipodal_defect(pa, na, pb, nb):
    """Largest deviation (radians) of either normal from the jaw axis."""
    u = pb - pa
    u = u / np.linalg.norm(u)
    ca = np.clip(-(na @ u), -1.0, 1.0)
    cb = np.clip(nb @ u, -1.0, 1.0)
    return max(math.acos(ca), math.acos(cb))


def antipodal_pairs(cloud: PointCloud, max_gripper_width=DEFAULT_GRIPPER_WIDTH,
                    antipodal_tolerance=DEFAULT_ANTIPODAL_TOL) -> list[ContactPair]:
    """Best antipodal partner for every point, deduplicated into unordered pairs.

    A candidate ``b`` for ``a`` must be within ``max_gripper_width`` and both
    normals must lie within ``antipodal_tolerance`` of the jaw axis.  Among
    candidates the smallest defect wins; ties go to the shorter, then the
    lower-index partner.
    """
    pts, nrm = cloud.points, cloud.normals
    n = len(pts)
    if n < 2:
        return []
    cos_tol = math.cos(antipodal_tolerance)
    tree = cKDTree(pts)
    neighborhoods = tree.query_ball_point(pts, r=max_gripper_width * (1.0 + 1e-12))
    chosen = set()
    for a in range(n):
        cand = np.asarray(neighborhoods[a], dtype=np.intp)
        cand = cand[cand != a]
        if cand.size == 0:
            continue
        # cheap prefilter: opposing normals
        cand = cand[nrm[cand] @ nrm[a] <= -math.cos(2.0 * antipodal_tolerance) + 1e-12]
        if cand.size == 0:
            continue
        d = pts[cand] - pts[a]
        dist = np.linalg.norm(d, axis=1)
        ok = (dist > 1e-12) & (dist <= max_gripper_width)
        cand, d, dist = cand[ok], d[ok], dist[ok]
        if cand.size == 0:
            continue
        u = d / dist[:, None]
        ca = -(u @ nrm[a])
        cb = np.einsum("ij,ij->i", u, nrm[cand])
        worst = np.minimum(ca, cb)
        ok = worst >= cos_tol - 1e-12
        if not np.any(ok):
            continue
        cand, dist, worst = cand[ok], dist[ok], worst[ok]
        defect = np.round(np.arccos(np.clip(worst, -1.0, 1.0)), 9)
        k = np.lexsort((cand, np.round(dist, 12), defect))[0]
        b = int(cand[k])
        chosen.add((min(a, b), max(a, b)))
    out = []
    for a, b in sorted(chosen):
        u = pts[b] - pts[a]
        u = u / np.linalg.norm(u)
        out.append(ContactPair(a, b, tuple(float(x) for x in u)))
    return out
