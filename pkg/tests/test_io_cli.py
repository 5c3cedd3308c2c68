import json
import math
from pathlib import Path

import jsonschema
import numpy as np
import pytest
from click.testing import CliRunner

from maxent_merge import io
from maxent_merge.cli import main
from maxent_merge.core import (
    Assignment,
    Constraint,
    ConstraintSet,
    FeatureSpec,
    TabularDistribution,
    VariableSet,
)

SCHEMA_DIR = Path(__file__).parent.parent / "src" / "maxent_merge" / "schemas"


def schema(name):
    return json.loads((SCHEMA_DIR / f"{name}.schema.json").read_text())


def write(path, text):
    Path(path).write_text(text)
    return str(path)


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def bernoulli_files(tmp_path):
    vars_path = write(
        tmp_path / "variables.json",
        json.dumps({"variables": [{"name": "X", "domain": [0, 1]}]}),
    )
    cons_path = write(
        tmp_path / "constraints.csv",
        "feature_id,kind,scope,condition,target,slack\nx,mean,X,,0.8,0\n",
    )
    return cons_path, vars_path


class TestVariablesFile:
    def test_features_section_round(self, tmp_path):
        doc = {
            "variables": [
                {"name": "A", "domain": [0, 1]},
                {"name": "B", "domain": ["u", "v"]},
            ],
            "features": [
                {"id": "ind", "kind": "indicator", "scope": ["A", "B"],
                 "assignment": {"A": 1, "B": "v"}},
                {"id": "tab", "kind": "table", "scope": ["B"],
                 "table": [{"values": ["u"], "value": 2.0}]},
            ],
        }
        path = write(tmp_path / "vars.json", json.dumps(doc))
        vars, features = io.load_variables(path)
        assert vars.names == ("A", "B")
        assert features["ind"].kind == "indicator"
        assert features["tab"].table_lookup(("u",)) == 2.0

    def test_bad_json_reports_file(self, tmp_path):
        path = write(tmp_path / "vars.json", "{nope")
        with pytest.raises(io.InputFormatError, match="invalid JSON"):
            io.load_variables(path)

    def test_missing_variables_key(self, tmp_path):
        path = write(tmp_path / "vars.json", json.dumps({"features": []}))
        with pytest.raises(io.InputFormatError, match="variables"):
            io.load_variables(path)


class TestConstraintFile:
    def test_round_trip(self, tmp_path):
        vars = VariableSet.binary("X0", "X1")
        cs = ConstraintSet.of(
            [
                Constraint(feature=FeatureSpec.product("x0", ("X0",)), target=0.25,
                           slack=0.031622776601683794,
                           condition=Assignment.of(X1=1)),
                Constraint(feature=FeatureSpec.product("x1", ("X1",)), target=0.5),
            ]
        )
        path = tmp_path / "cons.csv"
        io.write_constraints(path, cs)
        loaded = io.load_constraints(path, vars)
        assert len(loaded) == 2
        assert loaded[0].target == 0.25
        assert loaded[0].slack == cs[0].slack
        assert loaded[0].condition.key() == "X1=1"

    def test_header_enforced(self, tmp_path, bernoulli_files):
        path = write(tmp_path / "bad.csv", "a,b\n1,2\n")
        vars = VariableSet.binary("X")
        with pytest.raises(io.InputFormatError, match="header"):
            io.load_constraints(path, vars)

    def test_line_numbers_in_errors(self, tmp_path):
        path = write(
            tmp_path / "bad.csv",
            "feature_id,kind,scope,condition,target,slack\n"
            "x,mean,X,,0.5,0\n"
            "y,mean,Q,,0.5,0\n",
        )
        vars = VariableSet.binary("X")
        with pytest.raises(io.InputFormatError, match="bad.csv:3"):
            io.load_constraints(path, vars)

    def test_duplicate_rows_rejected(self, tmp_path):
        path = write(
            tmp_path / "dup.csv",
            "feature_id,kind,scope,condition,target,slack\n"
            "x,mean,X,,0.5,0\n"
            "x,mean,X,,0.7,0\n",
        )
        vars = VariableSet.binary("X")
        with pytest.raises(io.InputFormatError, match="duplicate"):
            io.load_constraints(path, vars)

    def test_cond_mean_requires_condition(self, tmp_path):
        path = write(
            tmp_path / "bad.csv",
            "feature_id,kind,scope,condition,target,slack\n"
            "x,cond_mean,X,,0.5,0\n",
        )
        with pytest.raises(io.InputFormatError, match="without condition"):
            io.load_constraints(path, VariableSet.binary("X", "Y"))


class TestDataAndDistributionFiles:
    def test_data_round_trip(self, tmp_path):
        vars = VariableSet.binary("A", "B")
        rows = np.array([[0, 1], [1, 1], [1, 0]])
        from maxent_merge.core import SampleTable

        table = SampleTable(columns=("A", "B"), rows=rows)
        path = tmp_path / "data.csv"
        io.write_data(path, table)
        loaded = io.load_data(path, vars)
        assert np.array_equal(loaded.rows, rows)

    def test_data_value_outside_domain(self, tmp_path):
        path = write(tmp_path / "data.csv", "A\n0\n3\n")
        with pytest.raises(io.InputFormatError, match="data.csv:3"):
            io.load_data(path, VariableSet.binary("A"))

    def test_distribution_round_trip(self, tmp_path, rng):
        vars = VariableSet.binary("T", "Z")
        dist = TabularDistribution.from_weights(vars, rng.dirichlet(np.ones(4)))
        path = tmp_path / "dist.csv"
        io.write_distribution(path, dist)
        loaded = io.load_distribution(path)
        assert loaded.vars.names == ("T", "Z")
        assert np.allclose(loaded.probs, dist.probs, atol=1e-15)

    def test_distribution_requires_all_states(self, tmp_path):
        path = write(tmp_path / "dist.csv", "T,Z,prob\n0,0,0.5\n1,1,0.5\n")
        with pytest.raises(io.InputFormatError, match="state space"):
            io.load_distribution(path)


class TestCmdFit:
    def test_bernoulli_closed_form(self, runner, bernoulli_files, tmp_path):
        cons, vars = bernoulli_files
        out = str(tmp_path / "sol.json")
        result = runner.invoke(
            main, ["fit", cons, vars, "--tol", "1e-8", "--out", out]
        )
        assert result.exit_code == 0, result.output
        doc = json.loads(Path(out).read_text())
        jsonschema.validate(doc, schema("solution"))
        assert doc["lambdas"][0]["value"] == pytest.approx(math.log(4), abs=1e-4)

    def test_empty_constraints_give_uniform(self, runner, tmp_path):
        vars_path = write(
            tmp_path / "vars.json",
            json.dumps({"variables": [
                {"name": n, "domain": [0, 1]} for n in ("A", "B", "C")
            ]}),
        )
        cons_path = write(
            tmp_path / "cons.csv", "feature_id,kind,scope,condition,target,slack\n"
        )
        out = str(tmp_path / "sol.json")
        result = runner.invoke(main, ["fit", cons_path, vars_path, "--out", out])
        assert result.exit_code == 0, result.output
        doc = json.loads(Path(out).read_text())
        assert doc["log_partition"]["alpha"] == pytest.approx(math.log(8))

    def test_duplicate_targets_exit_2(self, runner, tmp_path, bernoulli_files):
        _, vars = bernoulli_files
        cons = write(
            tmp_path / "dup.csv",
            "feature_id,kind,scope,condition,target,slack\n"
            "x,mean,X,,0.5,0\nx,mean,X,,0.7,0\n",
        )
        result = runner.invoke(main, ["fit", cons, vars])
        assert result.exit_code == 2
        assert "duplicate" in result.output

    def test_malformed_value_exit_2_with_position(self, runner, tmp_path, bernoulli_files):
        _, vars = bernoulli_files
        cons = write(
            tmp_path / "bad.csv",
            "feature_id,kind,scope,condition,target,slack\nx,mean,X,,oops,0\n",
        )
        result = runner.invoke(main, ["fit", cons, vars])
        assert result.exit_code == 2
        assert "bad.csv:2" in result.output

    def test_non_convergence_exit_3_writes_diagnostics(self, runner, tmp_path, bernoulli_files):
        cons, vars = bernoulli_files
        out = str(tmp_path / "diag.json")
        result = runner.invoke(
            main,
            ["fit", cons, vars, "--tol", "1e-12", "--max-iter", "2", "--out", out],
        )
        assert result.exit_code == 3
        doc = json.loads(Path(out).read_text())
        assert doc["converged"] is False

    def test_conditional_mode_via_cli(self, runner, tmp_path):
        vars_path = write(
            tmp_path / "vars.json",
            json.dumps({"variables": [
                {"name": "Y", "domain": [0, 1]}, {"name": "X", "domain": [0, 1]}
            ]}),
        )
        cons_path = write(
            tmp_path / "cons.csv",
            "feature_id,kind,scope,condition,target,slack\n"
            "y,cond_mean,Y,X=0,0.3,0\n"
            "y,cond_mean,Y,X=1,0.7,0\n"
            "x,mean,X,,0.5,0\n",
        )
        out = str(tmp_path / "sol.json")
        result = runner.invoke(
            main,
            ["fit", cons_path, vars_path, "--mode", "conditional", "--target", "Y",
             "--tol", "1e-8", "--out", out],
        )
        assert result.exit_code == 0, result.output
        doc = json.loads(Path(out).read_text())
        jsonschema.validate(doc, schema("solution"))
        assert doc["mode"] == "conditional"
        assert "beta" in doc["log_partition"]


class TestCmdEdges:
    def make_solution(self, runner, tmp_path):
        vars_path = write(
            tmp_path / "vars.json",
            json.dumps({"variables": [
                {"name": "Y", "domain": [0, 1]},
                {"name": "treat_a", "domain": [0, 1]},
                {"name": "treat_b", "domain": [0, 1]},
            ]}),
        )
        cons_path = write(
            tmp_path / "cons.csv",
            "feature_id,kind,scope,condition,target,slack\n"
            "y,cond_mean,Y,treat_a=0,0.3,0\n"
            "y,cond_mean,Y,treat_a=1,0.7,0\n"
            "y,cond_mean,Y,treat_b=0,0.5,0\n"
            "y,cond_mean,Y,treat_b=1,0.5,0\n",
        )
        out = str(tmp_path / "sol.json")
        result = runner.invoke(
            main,
            ["fit", cons_path, vars_path, "--mode", "conditional", "--target", "Y",
             "--tol", "1e-9", "--out", out],
        )
        assert result.exit_code == 0, result.output
        return out

    def test_table_shape_one_row_per_cause(self, runner, tmp_path):
        sol = self.make_solution(runner, tmp_path)
        result = runner.invoke(main, ["edges", sol, "-t", "0.15"])
        assert result.exit_code == 0, result.output
        lines = result.output.strip().splitlines()
        assert lines[0].split() == ["variable", "theta", "edge"]
        assert lines[2].startswith("treat_a") and lines[2].rstrip().endswith("yes")
        assert lines[3].startswith("treat_b") and lines[3].rstrip().endswith("no")

    def test_json_report_validates(self, runner, tmp_path):
        sol = self.make_solution(runner, tmp_path)
        report = str(tmp_path / "edges.json")
        result = runner.invoke(main, ["edges", sol, "--json", report])
        assert result.exit_code == 0
        doc = json.loads(Path(report).read_text())
        jsonschema.validate(doc, schema("edges"))
        assert [d["cause"] for d in doc["decisions"]] == ["treat_a", "treat_b"]

    def test_joint_solution_exit_2(self, runner, tmp_path, bernoulli_files):
        cons, vars = bernoulli_files
        out = str(tmp_path / "sol.json")
        runner.invoke(main, ["fit", cons, vars, "--out", out])
        result = runner.invoke(main, ["edges", out])
        assert result.exit_code == 2
        assert "causal order" in result.output


class TestCmdAce:
    def write_marginals(self, tmp_path, consistent=True):
        ty = write(
            tmp_path / "ty.csv",
            "T,Y,prob\n0,0,0.175\n0,1,0.2\n1,0,0.325\n1,1,0.3\n",
        )
        if consistent:
            tz = write(
                tmp_path / "tz.csv",
                "T,Z,prob\n0,0,0.25\n0,1,0.125\n1,0,0.25\n1,1,0.375\n",
            )
        else:
            tz = write(
                tmp_path / "tz.csv",
                "T,Z,prob\n0,0,0.3\n0,1,0.3\n1,0,0.2\n1,1,0.2\n",
            )
        return ty, tz

    def test_hand_computed_bounds(self, runner, tmp_path):
        ty, tz = self.write_marginals(tmp_path)
        out = str(tmp_path / "ace.json")
        result = runner.invoke(
            main, ["ace", ty, tz, "--treatment", "T", "--target", "Y", "--out", out]
        )
        assert result.exit_code == 0, result.output
        doc = json.loads(Path(out).read_text())
        jsonschema.validate(doc, schema("ace"))
        assert doc["lower"] == pytest.approx(0.3 / 0.75 - 0.2 / 0.25)
        assert doc["upper"] == pytest.approx(0.3 / 0.5 - 0.2 / 0.5)

    def test_inconsistent_marginals_exit_2(self, runner, tmp_path):
        ty, tz = self.write_marginals(tmp_path, consistent=False)
        result = runner.invoke(
            main, ["ace", ty, tz, "--treatment", "T", "--target", "Y"]
        )
        assert result.exit_code == 2
        assert "disagree" in result.output

    def test_collapse_with_point(self, runner, tmp_path):
        # independent T/Z: bounds collapse; fit a solution for the point
        vars_path = write(
            tmp_path / "vars.json",
            json.dumps({"variables": [
                {"name": "Y", "domain": [0, 1]}, {"name": "T", "domain": [0, 1]},
                {"name": "Z", "domain": [0, 1]},
            ]}),
        )
        cons_path = write(
            tmp_path / "cons.csv",
            "feature_id,kind,scope,condition,target,slack\n"
            "y,cond_mean,Y,T=0,0.3,0\n"
            "y,cond_mean,Y,T=1,0.8,0\n"
            "y,cond_mean,Y,Z=0,0.55,0\n"
            "y,cond_mean,Y,Z=1,0.55,0\n",
        )
        sol = str(tmp_path / "sol.json")
        result = runner.invoke(
            main,
            ["fit", cons_path, vars_path, "--mode", "conditional", "--target", "Y",
             "--tol", "1e-10", "--out", sol],
        )
        assert result.exit_code == 0, result.output
        ty = write(tmp_path / "ty.csv", "T,Y,prob\n0,0,0.35\n0,1,0.15\n1,0,0.1\n1,1,0.4\n")
        tz = write(tmp_path / "tz.csv", "T,Z,prob\n0,0,0.25\n0,1,0.25\n1,0,0.25\n1,1,0.25\n")
        result = runner.invoke(
            main,
            ["ace", ty, tz, "--treatment", "T", "--target", "Y", "--solution", sol],
        )
        assert result.exit_code == 0, result.output
        doc = json.loads(result.output)
        assert doc["lower"] == pytest.approx(doc["upper"])
        assert doc["point"] == pytest.approx(0.5, abs=1e-6)
        assert doc["within_bounds"] is True


class TestCmdSimulate:
    def test_artifacts_and_manifest(self, runner, tmp_path):
        out = str(tmp_path / "sim")
        result = runner.invoke(
            main, ["simulate", "--family", "a", "--n", "40", "--reps", "2",
                   "--seed", "5", "--out-dir", out]
        )
        assert result.exit_code == 0, result.output
        manifest = json.loads((Path(out) / "run_manifest.json").read_text())
        jsonschema.validate(manifest, schema("manifest"))
        names = {a["path"] for a in manifest["artifacts"]}
        assert names == {"rep000.csv", "rep001.csv", "instances.json"}
        instances = json.loads((Path(out) / "instances.json").read_text())
        assert len(instances["instances"]) == 2

    def test_byte_identical_across_runs(self, runner, tmp_path):
        out1, out2 = str(tmp_path / "s1"), str(tmp_path / "s2")
        for out in (out1, out2):
            result = runner.invoke(
                main, ["simulate", "--family", "c", "--n", "30", "--reps", "2",
                       "--seed", "9", "--out-dir", out]
            )
            assert result.exit_code == 0
        for name in ("rep000.csv", "rep001.csv", "instances.json"):
            assert (Path(out1) / name).read_bytes() == (Path(out2) / name).read_bytes()

    def test_zero_reps_exit_2(self, runner, tmp_path):
        result = runner.invoke(
            main, ["simulate", "--family", "a", "--reps", "0",
                   "--out-dir", str(tmp_path / "x")]
        )
        assert result.exit_code == 2


class TestCmdRoc:
    def test_artifacts_reproducible(self, runner, tmp_path):
        outs = []
        for name in ("r1", "r2"):
            out = str(tmp_path / name)
            result = runner.invoke(
                main, ["roc", "--family", "a", "--reps", "6", "--n", "200",
                       "--seed", "3", "--out-dir", out]
            )
            assert result.exit_code == 0, result.output
            outs.append(Path(out))
        for name in ("roc_curve.csv", "roc_summary.json"):
            assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
        summary = json.loads((outs[0] / "roc_summary.json").read_text())
        jsonschema.validate(summary, schema("roc_summary"))
        manifest = json.loads((outs[0] / "run_manifest.json").read_text())
        jsonschema.validate(manifest, schema("manifest"))

    def test_all_dropped_exit_4(self, runner, tmp_path):
        result = runner.invoke(
            main, ["roc", "--family", "a", "--reps", "2", "--n", "150",
                   "--max-iter", "1", "--tol", "1e-12", "--seed", "3",
                   "--out-dir", str(tmp_path / "r")]
        )
        assert result.exit_code == 4
        assert "dropped" in result.output

    def test_zero_reps_exit_2(self, runner, tmp_path):
        result = runner.invoke(
            main, ["roc", "--family", "a", "--reps", "0",
                   "--out-dir", str(tmp_path / "r")]
        )
        assert result.exit_code == 2


class TestCmdTprVsAce:
    def test_artifacts_validate(self, runner, tmp_path):
        out = str(tmp_path / "t1")
        result = runner.invoke(
            main, ["tpr-vs-ace", "--family", "a", "--reps", "10", "--n", "200",
                   "--seed", "4", "--bins", "3", "--out-dir", out]
        )
        assert result.exit_code == 0, result.output
        summary = json.loads((Path(out) / "tpr_vs_ace_summary.json").read_text())
        jsonschema.validate(summary, schema("tpr_ace_summary"))
        rows = (Path(out) / "tpr_vs_ace.csv").read_text().strip().splitlines()
        assert len(rows) == 4  # header + bins


class TestCmdAceFig:
    def test_artifacts_validate_and_reproduce(self, runner, tmp_path):
        outs = []
        for name in ("f1", "f2"):
            out = str(tmp_path / name)
            result = runner.invoke(
                main, ["ace-fig", "--variants", "3", "--seed", "6", "--out-dir", out]
            )
            assert result.exit_code == 0, result.output
            outs.append(Path(out))
        doc = json.loads((outs[0] / "ace_fig.json").read_text())
        jsonschema.validate(doc, schema("ace_fig"))
        for name in ("ace_fig.csv", "ace_fig.json"):
            assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
