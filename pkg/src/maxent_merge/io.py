"""File formats: variables/features JSON, constraint CSV, data CSV,
distribution CSV, solution JSON, and run manifests.

All formats are documented field by field in the README.  JSON floats are
rendered with Python's shortest round-trip repr, so dump -> load -> dump
is byte-stable.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .core import (
    Assignment,
    Constraint,
    ConstraintSet,
    FeatureSpec,
    SampleTable,
    TabularDistribution,
    VariableSet,
)
from .solver import MaxEntProblem, MaxEntSolution, OptimizerConfig


class InputFormatError(ValueError):
    """Malformed input file; the message carries file and position."""


def _parse_value(token: str, domain: tuple) -> Any:
    for value in domain:
        if str(value) == token:
            return value
    raise InputFormatError(f"value {token!r} not in domain {domain}")


# ---------------------------------------------------------------------------
# variables + features JSON


def load_variables(path: str | Path) -> tuple[VariableSet, dict[str, FeatureSpec]]:
    """Read a variables file: variable declarations plus optional feature
    definitions keyed by id."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as err:
        raise InputFormatError(f"{path}: invalid JSON: {err}") from None
    if "variables" not in doc:
        raise InputFormatError(f"{path}: missing 'variables' key")
    try:
        vars = VariableSet.of(
            [(v["name"], tuple(v["domain"])) for v in doc["variables"]]
        )
    except (KeyError, TypeError, ValueError) as err:
        raise InputFormatError(f"{path}: bad variable declaration: {err}") from None
    features: dict[str, FeatureSpec] = {}
    for spec in doc.get("features", []):
        try:
            fid, kind = spec["id"], spec["kind"]
            scope = tuple(spec["scope"])
            if kind == "product":
                features[fid] = FeatureSpec.product(fid, scope)
            elif kind == "indicator":
                anchor = {
                    name: _parse_value(str(val), vars.domain(name))
                    for name, val in spec["assignment"].items()
                }
                features[fid] = FeatureSpec.indicator(fid, anchor)
            elif kind == "table":
                mapping = {}
                for row in spec["table"]:
                    key = tuple(
                        _parse_value(str(v), vars.domain(name))
                        for name, v in zip(scope, row["values"])
                    )
                    mapping[key] = float(row["value"])
                features[fid] = FeatureSpec.value_table(fid, scope, mapping)
            else:
                raise InputFormatError(f"unknown feature kind {kind!r}")
        except (KeyError, TypeError, ValueError) as err:
            raise InputFormatError(f"{path}: bad feature definition: {err}") from None
    return vars, features


# ---------------------------------------------------------------------------
# constraint CSV

CONSTRAINT_COLUMNS = ["feature_id", "kind", "scope", "condition", "target", "slack"]


def _parse_assignment(text: str, vars: VariableSet) -> Assignment:
    items = {}
    for part in text.split(";"):
        if "=" not in part:
            raise InputFormatError(f"bad assignment fragment {part!r}")
        name, _, raw = part.partition("=")
        name = name.strip()
        if name not in vars:
            raise InputFormatError(f"unknown variable {name!r}")
        items[name] = _parse_value(raw.strip(), vars.domain(name))
    if not items:
        raise InputFormatError("empty assignment")
    return Assignment(items)


def load_constraints(
    path: str | Path,
    vars: VariableSet,
    features: Mapping[str, FeatureSpec] | None = None,
) -> ConstraintSet:
    """Read a constraint CSV.

    Columns: feature_id, kind (mean | cond_mean), scope (semicolon-joined
    variable names), condition (var=value;var=value, empty for mean),
    target, slack.  A feature_id not defined in the variables file denotes
    the product feature over the scope.
    """
    path = Path(path)
    features = dict(features or {})
    out = []
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [c.strip() for c in reader.fieldnames] != CONSTRAINT_COLUMNS:
            raise InputFormatError(
                f"{path}:1: header must be {','.join(CONSTRAINT_COLUMNS)}"
            )
        for lineno, row in enumerate(reader, start=2):
            where = f"{path}:{lineno}"
            try:
                fid = row["feature_id"].strip()
                kind = row["kind"].strip()
                scope = tuple(s.strip() for s in row["scope"].split(";") if s.strip())
                if kind not in ("mean", "cond_mean"):
                    raise InputFormatError(f"kind must be mean or cond_mean, got {kind!r}")
                if not scope:
                    raise InputFormatError("empty scope")
                for name in scope:
                    if name not in vars:
                        raise InputFormatError(f"unknown variable {name!r} in scope")
                if fid in features:
                    feature = features[fid]
                    if feature.scope != scope:
                        raise InputFormatError(
                            f"feature {fid!r} is declared with scope {feature.scope}, "
                            f"row says {scope}"
                        )
                else:
                    feature = FeatureSpec.product(fid, scope)
                condition = None
                if kind == "cond_mean":
                    if not row["condition"].strip():
                        raise InputFormatError("cond_mean row without condition")
                    condition = _parse_assignment(row["condition"].strip(), vars)
                elif row["condition"].strip():
                    raise InputFormatError("mean row with a condition")
                target = float(row["target"])
                slack = float(row["slack"]) if row["slack"].strip() else 0.0
                out.append(
                    Constraint(
                        feature=feature, target=target, slack=slack, condition=condition
                    )
                )
            except InputFormatError as err:
                raise InputFormatError(f"{where}: {err}") from None
            except (KeyError, TypeError, ValueError) as err:
                raise InputFormatError(f"{where}: {err}") from None
    try:
        cs = ConstraintSet.of(out)
        cs.validate(vars)
    except ValueError as err:
        raise InputFormatError(f"{path}: {err}") from None
    return cs


def write_constraints(path: str | Path, constraints: ConstraintSet) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CONSTRAINT_COLUMNS)
        for c in constraints:
            writer.writerow(
                [
                    c.feature.id,
                    c.kind,
                    ";".join(c.feature.scope),
                    c.condition.key() if c.condition else "",
                    repr(c.target),
                    repr(c.slack),
                ]
            )


# ---------------------------------------------------------------------------
# data CSV (header of variable names, one row per observation)


def load_data(path: str | Path, vars: VariableSet) -> SampleTable:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputFormatError(f"{path}: empty file") from None
        columns = tuple(h.strip() for h in header)
        for name in columns:
            if name not in vars:
                raise InputFormatError(f"{path}:1: unknown variable {name!r}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(columns):
                raise InputFormatError(
                    f"{path}:{lineno}: expected {len(columns)} fields, got {len(row)}"
                )
            try:
                rows.append(
                    [
                        _parse_value(tok.strip(), vars.domain(name))
                        for tok, name in zip(row, columns)
                    ]
                )
            except InputFormatError as err:
                raise InputFormatError(f"{path}:{lineno}: {err}") from None
    if not rows:
        raise InputFormatError(f"{path}: no data rows")
    arr = np.array(rows, dtype=object)
    try:
        arr = arr.astype(int)
    except (TypeError, ValueError):
        pass
    return SampleTable(columns=columns, rows=arr)


def write_data(path: str | Path, table: SampleTable) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(table.columns)
        for row in table.rows:
            writer.writerow(list(row))


# ---------------------------------------------------------------------------
# distribution CSV (variable columns + prob column, all states listed)


def load_distribution(path: str | Path) -> TabularDistribution:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputFormatError(f"{path}: empty file") from None
        if header[-1].strip() != "prob":
            raise InputFormatError(f"{path}:1: last column must be 'prob'")
        names = [h.strip() for h in header[:-1]]
        raw_rows = list(reader)
    if not raw_rows:
        raise InputFormatError(f"{path}: no rows")
    # infer each variable's domain from the order values first appear
    domains: dict[str, list] = {n: [] for n in names}
    parsed = []
    for lineno, row in enumerate(raw_rows, start=2):
        if len(row) != len(names) + 1:
            raise InputFormatError(
                f"{path}:{lineno}: expected {len(names) + 1} fields"
            )
        values = []
        for name, tok in zip(names, row[:-1]):
            tok = tok.strip()
            value: Any = int(tok) if tok.lstrip("-").isdigit() else tok
            if value not in domains[name]:
                domains[name].append(value)
            values.append(value)
        try:
            prob = float(row[-1])
        except ValueError:
            raise InputFormatError(f"{path}:{lineno}: bad probability {row[-1]!r}") from None
        parsed.append((values, prob))
    vars = VariableSet.of([(n, tuple(domains[n])) for n in names])
    if len(parsed) != vars.n_states:
        raise InputFormatError(
            f"{path}: {len(parsed)} rows but the state space has {vars.n_states}"
        )
    probs = np.zeros(vars.n_states)
    seen = set()
    for values, prob in parsed:
        idx = vars.state_index(Assignment(dict(zip(names, values))))
        if idx in seen:
            raise InputFormatError(f"{path}: duplicate state {values}")
        seen.add(idx)
        probs[idx] = prob
    try:
        return TabularDistribution(vars, probs)
    except ValueError as err:
        raise InputFormatError(f"{path}: {err}") from None


def write_distribution(path: str | Path, dist: TabularDistribution) -> None:
    states = dist.vars.state_matrix()
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([*dist.vars.names, "prob"])
        for i, row in enumerate(states):
            values = [
                v.domain[level] for v, level in zip(dist.vars.variables, row)
            ]
            writer.writerow([*values, repr(float(dist.probs[i]))])


# ---------------------------------------------------------------------------
# solution JSON

SOLUTION_FORMAT = "maxent-merge-solution/1"


def _feature_to_dict(f: FeatureSpec) -> dict:
    doc: dict[str, Any] = {"id": f.id, "kind": f.kind, "scope": list(f.scope)}
    if f.kind == "indicator":
        doc["assignment"] = {k: v for k, v in f.anchor.items}
    elif f.kind == "table":
        doc["table"] = [
            {"values": list(key), "value": val} for key, val in f.table
        ]
    return doc


def _feature_from_dict(doc: Mapping, vars: VariableSet) -> FeatureSpec:
    kind, fid, scope = doc["kind"], doc["id"], tuple(doc["scope"])
    if kind == "product":
        return FeatureSpec.product(fid, scope)
    if kind == "indicator":
        anchor = {
            name: _parse_value(str(v), vars.domain(name))
            for name, v in doc["assignment"].items()
        }
        return FeatureSpec.indicator(fid, anchor)
    mapping = {
        tuple(
            _parse_value(str(v), vars.domain(name))
            for name, v in zip(scope, row["values"])
        ): float(row["value"])
        for row in doc["table"]
    }
    return FeatureSpec.value_table(fid, scope, mapping)


def solution_to_dict(solution: MaxEntSolution) -> dict:
    problem = solution.problem
    doc: dict[str, Any] = {
        "format": SOLUTION_FORMAT,
        "mode": problem.mode,
        "target": problem.target,
        "variables": [
            {"name": v.name, "domain": list(v.domain)}
            for v in problem.vars.variables
        ],
        "constraints": [
            {
                "feature": _feature_to_dict(c.feature),
                "kind": c.kind,
                "condition": c.condition.key() if c.condition else "",
                "target": c.target,
                "slack": c.slack,
                "n_obs": c.n_obs,
            }
            for c in solution.fitted_constraints
        ],
        "lambdas": [
            {
                "feature_id": c.feature.id,
                "condition": c.condition.key() if c.condition else "",
                "value": float(lam),
            }
            for c, lam in zip(solution.fitted_constraints, solution.lambdas)
        ],
        "converged": solution.converged,
        "iterations": solution.iterations,
        "kkt_residual": solution.kkt_residual,
        "residuals": [float(r) for r in solution.residuals],
        "objective_value": solution.objective_value,
        "config": {
            "tol": problem.config.tol,
            "max_iter": problem.config.max_iter,
            "objective": problem.config.objective,
        },
        # the fit itself is deterministic (multipliers start at zero); the
        # seed slot records upstream data provenance when a caller sets one
        "seed": None,
    }
    if problem.mode == "joint":
        doc["log_partition"] = {"alpha": float(solution.log_partition)}
    else:
        cause_vars = solution.cause_marginal.vars
        states = cause_vars.state_matrix()
        doc["log_partition"] = {
            "beta": [
                {
                    "assignment": cause_vars.assignment_at(row).key(),
                    "value": float(b),
                }
                for row, b in zip(states, solution.log_partition)
            ]
        }
        doc["cause_marginal"] = {
            "variables": [
                {"name": v.name, "domain": list(v.domain)}
                for v in cause_vars.variables
            ],
            "probs": [float(p) for p in solution.cause_marginal.probs],
        }
    return doc


def write_solution(path: str | Path, solution: MaxEntSolution) -> None:
    Path(path).write_text(json.dumps(solution_to_dict(solution), indent=2) + "\n")


def load_solution(path: str | Path) -> MaxEntSolution:
    """Rebuild a queryable solution from its JSON rendering."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as err:
        raise InputFormatError(f"{path}: invalid JSON: {err}") from None
    if doc.get("format") != SOLUTION_FORMAT:
        raise InputFormatError(f"{path}: unknown format {doc.get('format')!r}")
    vars = VariableSet.of([(v["name"], tuple(v["domain"])) for v in doc["variables"]])
    constraints = []
    for c in doc["constraints"]:
        try:
            feature = _feature_from_dict(c["feature"], vars)
        except (KeyError, TypeError, ValueError) as err:
            raise InputFormatError(f"{path}: bad feature in solution: {err}") from None
        condition = (
            _parse_assignment(c["condition"], vars) if c["condition"] else None
        )
        constraints.append(
            Constraint(
                feature=feature,
                target=float(c["target"]),
                slack=float(c["slack"]),
                condition=condition,
                n_obs=c.get("n_obs"),
            )
        )
    mode = doc["mode"]
    cause_marginal = None
    if mode == "conditional":
        cm = doc["cause_marginal"]
        cm_vars = VariableSet.of(
            [(v["name"], tuple(v["domain"])) for v in cm["variables"]]
        )
        cause_marginal = TabularDistribution(cm_vars, np.array(cm["probs"]))
    config = OptimizerConfig(
        tol=doc["config"]["tol"],
        max_iter=doc["config"]["max_iter"],
        objective=doc["config"]["objective"],
    )
    problem = MaxEntProblem(
        vars=vars,
        constraints=ConstraintSet.of(constraints),
        target=doc["target"],
        cause_marginal=cause_marginal,
        config=config,
    )
    if mode == "joint":
        log_partition: Any = doc["log_partition"]["alpha"]
    else:
        betas = {e["assignment"]: e["value"] for e in doc["log_partition"]["beta"]}
        cause_vars = cause_marginal.vars
        states = cause_vars.state_matrix()
        log_partition = np.array(
            [betas[cause_vars.assignment_at(row).key()] for row in states]
        )
    return MaxEntSolution(
        problem=problem,
        fitted_constraints=tuple(constraints),
        lambdas=np.array([e["value"] for e in doc["lambdas"]]),
        log_partition=log_partition,
        converged=bool(doc["converged"]),
        residuals=np.array(doc["residuals"]),
        kkt_residual=float(doc["kkt_residual"]),
        iterations=int(doc["iterations"]),
        cause_marginal=cause_marginal,
        objective_value=float(doc["objective_value"]),
    )


# ---------------------------------------------------------------------------
# run manifest


def file_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    h.update(Path(path).read_bytes())
    return h.hexdigest()


@dataclass
class ManifestBuilder:
    """Collects inputs and artifacts while a command runs."""

    command: str
    config: dict
    seed: int | None
    started: float | None = None

    def __post_init__(self):
        self.started = time.monotonic()
        self.inputs: list[dict] = []
        self.artifacts: list[dict] = []

    def add_input(self, path: str | Path) -> None:
        self.inputs.append(
            {"path": str(path), "sha256": file_digest(path)}
        )

    def add_artifact(self, path: str | Path) -> None:
        self.artifacts.append(
            {"path": str(Path(path).name), "sha256": file_digest(path)}
        )

    def write(self, path: str | Path) -> None:
        doc = {
            "command": self.command,
            "config": self.config,
            "seed": self.seed,
            "inputs": self.inputs,
            "artifacts": self.artifacts,
            "wall_time_s": round(time.monotonic() - self.started, 3),
        }
        Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def write_rows_csv(path: str | Path, rows: Sequence[Mapping[str, Any]]) -> None:
    """Write a list of uniform dict rows; floats rendered with repr."""
    if not rows:
        raise ValueError("no rows to write")
    columns = list(rows[0].keys())
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow(
                [repr(v) if isinstance(v, float) else v for v in (row[c] for c in columns)]
            )


def write_json(path: str | Path, doc: Mapping[str, Any]) -> None:
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")
