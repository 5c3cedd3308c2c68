"""Command-line interface.

Exit codes: 0 success, 2 malformed input, 3 fit did not converge
(diagnostics still written), 4 experiment with every repetition dropped.
All randomness flows through --seed; repetition seeds are derived by
seed-sequence splitting, so runs are reproducible bit for bit (the run
manifest records wall time and is the one file that differs between
identical runs).
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click
import numpy as np

from . import evaluation, io, simulate
from .causal import edge_report, render_edge_table
from .core import ZeroMassError
from .effects import MarginalMismatchError, PositivityError, ace as ace_point, ace_bounds
from .evaluation import EmptyExperimentError, HarnessConfig
from .solver import (
    InfeasibleTargetError,
    MaxEntProblem,
    NonFiniteError,
    NotConvergedError,
    OptimizerConfig,
    fit,
)

EXIT_INPUT = 2
EXIT_NOT_CONVERGED = 3
EXIT_EMPTY = 4


def _jobs_default() -> int:
    raw = os.environ.get("MAXENT_MERGE_JOBS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _fail_input(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(EXIT_INPUT)


jobs_option = click.option(
    "--jobs", type=int, default=_jobs_default, show_default="MAXENT_MERGE_JOBS or 1",
    help="parallel repetition workers",
)


@click.group()
def main() -> None:
    """Merge moment constraints, fit maximum-entropy joints, and read off
    causal structure and effect bounds."""


@main.command("fit")
@click.argument("constraints_csv", type=click.Path(exists=True, dir_okay=False))
@click.argument("variables_json", type=click.Path(exists=True, dir_okay=False))
@click.option("--mode", type=click.Choice(["joint", "conditional"]), default="joint")
@click.option("--target", default=None, help="target variable (conditional mode)")
@click.option(
    "--cause-marginal", "cause_marginal", default="estimated",
    help="'estimated' or a distribution CSV over the causes",
)
@click.option("--epsilon-scale", type=float, default=None,
              help="override every slack with epsilon-scale/sqrt(n_obs or 1)")
@click.option("--tol", type=float, default=1e-3, show_default=True)
@click.option("--max-iter", type=int, default=50_000, show_default=True)
@click.option("--objective", type=click.Choice(["dual", "squared-residual"]),
              default="dual", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default="solution.json",
              show_default=True)
def cmd_fit(constraints_csv, variables_json, mode, target, cause_marginal,
            epsilon_scale, tol, max_iter, objective, out):
    """Fit a MAXENT distribution from a constraint file."""
    try:
        vars, features = io.load_variables(variables_json)
        constraints = io.load_constraints(constraints_csv, vars, features)
        if epsilon_scale is not None:
            from .core import Constraint, ConstraintSet
            constraints = ConstraintSet.of(
                [
                    Constraint(
                        feature=c.feature,
                        target=c.target,
                        slack=epsilon_scale / np.sqrt(c.n_obs or 1),
                        condition=c.condition,
                        n_obs=c.n_obs,
                    )
                    for c in constraints
                ]
            )
        config = OptimizerConfig(tol=tol, max_iter=max_iter, objective=objective)
        if mode == "joint":
            problem = MaxEntProblem.joint(vars, constraints, config=config)
        else:
            if target is None:
                _fail_input("conditional mode needs --target")
            marginal = (
                "estimated"
                if cause_marginal == "estimated"
                else io.load_distribution(cause_marginal)
            )
            problem = MaxEntProblem.conditional(
                vars, constraints, target=target, cause_marginal=marginal,
                config=config,
            )
    except (io.InputFormatError, ValueError, KeyError) as err:
        _fail_input(str(err))
    try:
        solution = fit(problem)
    except (InfeasibleTargetError, ZeroMassError) as err:
        _fail_input(str(err))
    except NonFiniteError as err:
        _fail_input(str(err))
    except NotConvergedError as err:
        io.write_solution(out, err.solution)
        click.echo(f"not converged: {err}; diagnostics written to {out}", err=True)
        sys.exit(EXIT_NOT_CONVERGED)
    io.write_solution(out, solution)
    click.echo(f"converged in {solution.iterations} iterations; wrote {out}")


@main.command("edges")
@click.argument("solution_json", type=click.Path(exists=True, dir_okay=False))
@click.option("--threshold", "-t", type=float, default=0.15, show_default=True)
@click.option("--json", "json_out", type=click.Path(dir_okay=False), default=None,
              help="also write the report as JSON")
def cmd_edges(solution_json, threshold, json_out):
    """Edge verdicts per cause from a causal-order solution."""
    try:
        solution = io.load_solution(solution_json)
        decisions = edge_report(solution, t=threshold)
    except (io.InputFormatError, NotConvergedError, ValueError, KeyError) as err:
        _fail_input(str(err))
    click.echo(render_edge_table(decisions))
    if json_out:
        io.write_json(
            json_out,
            {
                "target": solution.problem.target,
                "threshold": threshold,
                "decisions": [d.as_dict() for d in decisions],
            },
        )
        click.echo(f"wrote {json_out}")


@main.command("ace")
@click.argument("treatment_target_csv", type=click.Path(exists=True, dir_okay=False))
@click.argument("treatment_confounders_csv", type=click.Path(exists=True, dir_okay=False))
@click.option("--treatment", required=True)
@click.option("--target", required=True)
@click.option("--solution", "solution_json", type=click.Path(exists=True, dir_okay=False),
              default=None, help="fitted solution for the point estimate")
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="write the JSON result here as well")
def cmd_ace(treatment_target_csv, treatment_confounders_csv, treatment, target,
            solution_json, out):
    """Bounds (and optional point estimate) for the average causal effect."""
    try:
        p_tx = io.load_distribution(treatment_target_csv)
        p_tz = io.load_distribution(treatment_confounders_csv)
        point = None
        if solution_json:
            solution = io.load_solution(solution_json)
            point = float(ace_point(solution.joint(), treatment, target))
        bounds = ace_bounds(p_tx, p_tz, treatment, target, point_estimate=point)
    except (io.InputFormatError, MarginalMismatchError, PositivityError,
            NotConvergedError, ValueError, KeyError) as err:
        _fail_input(str(err))
    doc = {
        "treatment": treatment,
        "target": target,
        "point": bounds.point_estimate,
        "lower": bounds.lower,
        "upper": bounds.upper,
        "within_bounds": bounds.point_within,
        "degenerate_flags": list(bounds.degenerate),
    }
    click.echo(json.dumps(doc, indent=2))
    if out:
        io.write_json(out, doc)


def _prepare_out_dir(out_dir: str) -> Path:
    path = Path(out_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


@main.command("simulate")
@click.option("--family", type=click.Choice(simulate.FAMILIES), required=True)
@click.option("--n", type=int, default=1000, show_default=True)
@click.option("--reps", type=int, default=1, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
def cmd_simulate(family, n, reps, seed, out_dir):
    """Draw SCM instances and write sample tables plus an instance manifest."""
    if reps < 1 or n < 1:
        _fail_input(f"need reps >= 1 and n >= 1, got reps={reps} n={n}")
    out = _prepare_out_dir(out_dir)
    manifest = io.ManifestBuilder(
        command="simulate",
        config={"family": family, "n": n, "reps": reps},
        seed=seed,
    )
    instances = []
    seeds = evaluation._rep_seeds(seed, reps)
    for i, (inst_seed, samp_seed) in enumerate(seeds):
        instance = simulate.draw_instance(family, inst_seed)
        table = simulate.sample(instance, n, seed=samp_seed)
        sample_path = out / f"rep{i:03d}.csv"
        io.write_data(sample_path, table)
        manifest.add_artifact(sample_path)
        instances.append(
            {
                "rep": i,
                "instance_seed": inst_seed,
                "sample_seed": samp_seed,
                "family": instance.family,
                "edge_mask": list(instance.edge_mask),
                "p": list(instance.p),
                "a": list(instance.a),
                "b": [list(r) for r in instance.b],
                "logic_op": instance.logic_op,
            }
        )
    inst_path = out / "instances.json"
    io.write_json(inst_path, {"instances": instances})
    manifest.add_artifact(inst_path)
    manifest.write(out / "run_manifest.json")
    click.echo(f"wrote {reps} sample tables to {out}")


def _harness_config(n, epsilon_scale, tol, max_iter, objective, cause_moments, exact):
    return HarnessConfig(
        n=n,
        epsilon_scale=epsilon_scale,
        tol=tol,
        max_iter=max_iter,
        objective=objective,
        cause_moments=cause_moments,
        exact=exact,
    )


harness_options = [
    click.option("--n", type=int, default=1000, show_default=True),
    click.option("--epsilon-scale", type=float, default=1.0, show_default=True),
    click.option("--tol", type=float, default=1e-3, show_default=True),
    click.option("--max-iter", type=int, default=50_000, show_default=True),
    click.option("--objective", type=click.Choice(["dual", "squared-residual"]),
                 default="dual", show_default=True),
    click.option("--cause-moments", type=click.Choice(["pairwise", "means", "none"]),
                 default="pairwise", show_default=True),
    click.option("--exact", is_flag=True, default=False,
                 help="use exact population moments instead of samples"),
    click.option("--seed", type=int, default=0, show_default=True),
]


def add_options(options):
    def wrap(fn):
        for option in reversed(options):
            fn = option(fn)
        return fn
    return wrap


@main.command("roc")
@click.option("--family", type=click.Choice(simulate.FAMILIES), required=True)
@click.option("--reps", type=int, default=100, show_default=True)
@click.option("--mode", type=click.Choice(["known_px", "estimated_px"]),
              default="known_px", show_default=True)
@add_options(harness_options)
@jobs_option
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
def cmd_roc(family, reps, mode, n, epsilon_scale, tol, max_iter, objective,
            cause_moments, exact, seed, jobs, out_dir):
    """Edge-detection ROC over a linear threshold grid."""
    if reps < 1:
        _fail_input(f"need reps >= 1, got {reps}")
    cfg = _harness_config(n, epsilon_scale, tol, max_iter, objective, cause_moments, exact)
    manifest = io.ManifestBuilder(
        command="roc",
        config={"family": family, "reps": reps, "mode": mode, **cfg.__dict__},
        seed=seed,
    )
    try:
        curve = evaluation.run_roc(
            family, reps=reps, mode=mode, config=cfg, seed=seed, jobs=jobs
        )
    except EmptyExperimentError as err:
        click.echo(f"error: {err}", err=True)
        sys.exit(EXIT_EMPTY)
    out = _prepare_out_dir(out_dir)
    curve_path = out / "roc_curve.csv"
    io.write_rows_csv(curve_path, curve.to_rows())
    summary_path = out / "roc_summary.json"
    io.write_json(summary_path, curve.summary())
    manifest.add_artifact(curve_path)
    manifest.add_artifact(summary_path)
    manifest.write(out / "run_manifest.json")
    click.echo(
        f"AUC {curve.auc:.4f} over {curve.retained} retained repetitions "
        f"({curve.dropped} dropped); wrote {out}"
    )


@main.command("tpr-vs-ace")
@click.option("--family", type=click.Choice(simulate.FAMILIES), required=True)
@click.option("--reps", type=int, default=500, show_default=True)
@click.option("--t", "threshold", type=float, default=0.15, show_default=True)
@click.option("--mode", type=click.Choice(["known_px", "estimated_px"]),
              default="known_px", show_default=True)
@click.option("--bins", type=int, default=5, show_default=True)
@add_options(harness_options)
@jobs_option
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
def cmd_tpr_vs_ace(family, reps, threshold, mode, bins, n, epsilon_scale, tol,
                   max_iter, objective, cause_moments, exact, seed, jobs, out_dir):
    """Detection rate of the forced X1 edge, binned by true effect size."""
    if reps < 1:
        _fail_input(f"need reps >= 1, got {reps}")
    cfg = _harness_config(n, epsilon_scale, tol, max_iter, objective, cause_moments, exact)
    manifest = io.ManifestBuilder(
        command="tpr-vs-ace",
        config={"family": family, "reps": reps, "t": threshold, "mode": mode,
                "bins": bins, **cfg.__dict__},
        seed=seed,
    )
    try:
        curve = evaluation.run_tpr_vs_ace(
            family, reps=reps, t=threshold, mode=mode, config=cfg,
            n_bins=bins, seed=seed, jobs=jobs,
        )
    except EmptyExperimentError as err:
        click.echo(f"error: {err}", err=True)
        sys.exit(EXIT_EMPTY)
    out = _prepare_out_dir(out_dir)
    curve_path = out / "tpr_vs_ace.csv"
    io.write_rows_csv(curve_path, curve.to_rows())
    summary_path = out / "tpr_vs_ace_summary.json"
    io.write_json(summary_path, curve.summary())
    manifest.add_artifact(curve_path)
    manifest.add_artifact(summary_path)
    manifest.write(out / "run_manifest.json")
    click.echo(
        f"bin TPRs {[round(b.tpr, 3) for b in curve.bins]} "
        f"({curve.dropped} dropped); wrote {out}"
    )


@main.command("ace-fig")
@click.option("--variants", type=int, default=10, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--tol", type=float, default=1e-6, show_default=True)
@jobs_option
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
def cmd_ace_fig(variants, seed, tol, jobs, out_dir):
    """Effect-strength table: true ACE, MAXENT points, and bounds."""
    if variants < 1:
        _fail_input(f"need variants >= 1, got {variants}")
    cfg = HarnessConfig(tol=tol, exact=True, epsilon_scale=0.0)
    manifest = io.ManifestBuilder(
        command="ace-fig", config={"variants": variants, "tol": tol}, seed=seed
    )
    rows = evaluation.run_ace_fig(variants=variants, config=cfg, seed=seed, jobs=jobs)
    out = _prepare_out_dir(out_dir)
    table_path = out / "ace_fig.csv"
    io.write_rows_csv(table_path, [r.as_dict() | {"flags": ";".join(r.flags)} for r in rows])
    json_path = out / "ace_fig.json"
    io.write_json(json_path, {"rows": [r.as_dict() for r in rows]})
    manifest.add_artifact(table_path)
    manifest.add_artifact(json_path)
    manifest.write(out / "run_manifest.json")
    within = sum(1 for r in rows if r.true_within)
    click.echo(f"{within}/{len(rows)} true effects inside bounds; wrote {out}")


if __name__ == "__main__":
    main()
