"""Screw-based grasping regions and regrasp planning for point-cloud objects."""

from .cloud import (BoundingBox, ContactPair, PointCloud, antipodal_pairs, load_ply,
                    oriented_bounding_box, save_ply, transform_point_cloud)
from .errors import *  # noqa: F401,F403
from .lpsolve import LinearProgram, LpSolution, LpStatus, solve_lp
from .metric import (EnvironmentContact, GraspRegion, MetricParams, Primitive, TaskContext,
                     build_task_context, compute_metric, eta_for_pair, unit_task_wrench)
from .screws import (INFINITE, Pose, ScrewSegment, UnitScrew, screw_exp, screw_from_poses,
                     screw_interpolate, screw_transform)

__version__ = "0.1.0"
