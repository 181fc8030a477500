"""Command-line front end.

Exit codes: 0 success, 1 failed self-check, 2 unreadable input,
3 geometry error, 4 plan not executable, 5 internal error.
"""

from __future__ import annotations

import json
import logging
import sys
import time
from pathlib import Path

import click

from .cloud import antipodal_pairs, load_ply, oriented_bounding_box, save_ply, transform_point_cloud
from .errors import ParseError, ScrewGraspError
from .metric import MetricParams, compute_metric
from .pipeline import (PipelineParams, PlanSpec, compile_skeleton, export_group_plys,
                       generate_synthetic, run_pipeline)
from .regrasp import (DEFAULT_ETA_TH, DEFAULT_GAMMA_TH, compute_score, greedy_partition)
from .verify import cmd_verify

log = logging.getLogger("screwgrasp")


def _params(gamma_th, eta_th, mu_robot, mu_env, mass, force_cap, cone_facets, gripper_width):
    metric = MetricParams(mass=mass, mu_robot=mu_robot, mu_env=mu_env, force_cap=force_cap,
                          cone_facets=cone_facets)
    return PipelineParams(gamma_th=gamma_th, eta_th=eta_th, metric=metric,
                          gripper_width=gripper_width)


def physics_options(f):
    opts = [
        click.option("--gamma-th", type=float, default=DEFAULT_GAMMA_TH, show_default=True),
        click.option("--eta-th", type=float, default=DEFAULT_ETA_TH, show_default=True),
        click.option("--mu-robot", type=float, default=0.8, show_default=True),
        click.option("--mu-env", type=float, default=0.3, show_default=True),
        click.option("--mass", type=float, default=0.5, show_default=True, help="kg"),
        click.option("--force-cap", type=float, default=MetricParams.force_cap,
                     show_default=True, help="total robot contact force budget, N"),
        click.option("--cone-facets", type=int, default=16, show_default=True),
        click.option("--gripper-width", type=float, default=0.08, show_default=True, help="m"),
    ]
    for opt in reversed(opts):
        f = opt(f)
    return f


def _emit(text, out):
    if out:
        Path(out).write_text(text + "\n")
    else:
        click.echo(text)


def _run(fn):
    """Map package errors onto exit codes."""
    try:
        return fn()
    except ScrewGraspError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(exc.exit_code)
    except (OSError, json.JSONDecodeError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)


def _load_cloud(path, synth_box, seed, n_points):
    if synth_box is not None:
        return generate_synthetic("BOX", synth_box, n_points=n_points, seed=seed)
    if path is None:
        raise click.UsageError("give a PLY cloud or --synth-box")
    return load_ply(path)


@click.group()
@click.option("-v", "--verbose", count=True)
def main(verbose):
    """Screw-based grasping regions and regrasp planning."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


@main.command()
@click.argument("cloud", required=False, type=click.Path(exists=True, dir_okay=False))
@click.option("--plan", "plan_path", required=True, type=click.Path(exists=True, dir_okay=False),
              help="plan JSON (poses or skeleton)")
@click.option("--synth-box", nargs=3, type=float, default=None,
              help="use a synthetic box with these extents instead of CLOUD")
@click.option("--n-points", type=int, default=10000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@physics_options
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@click.option("--export-ply", type=click.Path(file_okay=False), default=None,
              help="directory for one colored cloud per grasp group")
def plan(cloud, plan_path, synth_box, n_points, seed, gamma_th, eta_th, mu_robot, mu_env,
         mass, force_cap, cone_facets, gripper_width, out, export_ply):
    """Compute grasping regions and the minimum number of grasps for a plan."""
    def go():
        pc = _load_cloud(cloud, synth_box, seed, n_points)
        params = _params(gamma_th, eta_th, mu_robot, mu_env, mass, force_cap, cone_facets,
                         gripper_width)
        t0 = time.perf_counter()
        res = run_pipeline(pc, PlanSpec.from_json(plan_path), params)
        log.info("pipeline finished in %.1f s", time.perf_counter() - t0)
        _emit(res.report.dumps(), out)
        if export_ply:
            for p in export_group_plys(res, export_ply):
                log.info("wrote %s", p)
        if not res.report.executable:
            click.echo("error: at least one segment has no grasping region", err=True)
            sys.exit(4)
    _run(go)


@main.command()
@click.argument("cloud", required=False, type=click.Path(exists=True, dir_okay=False))
@click.option("--plan", "plan_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--synth-box", nargs=3, type=float, default=None)
@click.option("--n-points", type=int, default=10000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@physics_options
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def regions(cloud, plan_path, synth_box, n_points, seed, gamma_th, eta_th, mu_robot, mu_env,
            mass, force_cap, cone_facets, gripper_width, out):
    """Grasping regions only, as JSON that `score` can read."""
    def go():
        pc = _load_cloud(cloud, synth_box, seed, n_points)
        params = _params(gamma_th, eta_th, mu_robot, mu_env, mass, force_cap, cone_facets,
                         gripper_width)
        poses, contexts = compile_skeleton(PlanSpec.from_json(plan_path),
                                           oriented_bounding_box(pc), params.metric)
        clouds = transform_point_cloud(pc, poses)
        pairs = antipodal_pairs(pc, params.gripper_width, params.antipodal_tolerance)
        regs = compute_metric(clouds, poses, contexts, eta_th, pairs=pairs)
        doc = {"schema_version": 1, "eta_th": eta_th, "parameters": params.to_json(),
               "n_points": len(pc),
               "regions": [{"segment": r.segment_index + 1, "raw_max_eta": r.raw_max,
                            "members": sorted(r.member_indices)} for r in regs]}
        _emit(json.dumps(doc, indent=2, sort_keys=True), out)
    _run(go)


@main.command()
@click.argument("regions_json", type=click.Path(exists=True, dir_okay=False))
@click.option("--gamma-th", type=float, default=DEFAULT_GAMMA_TH, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def score(regions_json, gamma_th, out):
    """Score and partition saved regions."""
    def go():
        doc = json.loads(Path(regions_json).read_text())
        try:
            sets = [frozenset(int(j) for j in r["members"]) for r in doc["regions"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad regions file: {exc}") from exc
        import warnings
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            p = greedy_partition(sets, gamma_th)
        nonempty = [s for s in sets if s]
        whole = compute_score(nonempty) if nonempty else (0.0, [], frozenset())
        res = {"schema_version": 1, "gamma_th": gamma_th, "alpha": p.alpha,
               "all_segments": {"gamma": whole[0], "Gamma": list(whole[1]),
                                "intersection_size": len(whole[2])},
               "groups": [g.to_json() for g in p.groups]}
        _emit(json.dumps(res, indent=2, sort_keys=True), out)
    _run(go)


@main.command()
@click.option("--shape", type=click.Choice(["box", "cylinder"], case_sensitive=False),
              default="box", show_default=True)
@click.option("--dims", type=float, multiple=True,
              help="box: ex ey ez; cylinder: radius height (repeat the flag)")
@click.option("--n-points", type=int, default=None)
@click.option("--density", type=float, default=None, help="samples per square meter")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def synth(shape, dims, n_points, density, seed, out):
    """Write a synthetic object cloud as PLY."""
    def go():
        d = dims or ((0.16, 0.06, 0.21) if shape.lower() == "box" else (0.04, 0.25))
        n = n_points if (n_points is not None or density is not None) else 10000
        try:
            pc = generate_synthetic(shape, d, samples_per_unit_area=density,
                                    n_points=None if density is not None else n, seed=seed)
        except ValueError as exc:
            raise ParseError(str(exc)) from exc
        save_ply(out, pc)
        click.echo(f"wrote {len(pc)} points to {out}", err=True)
    _run(go)


@main.command()
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--instances", type=int, default=500, show_default=True)
def verify(seed, instances):
    """Greedy-vs-exhaustive partition, exact score and metric closed-form checks."""
    sys.exit(cmd_verify(seed, instances, echo=click.echo))


if __name__ == "__main__":
    main()
