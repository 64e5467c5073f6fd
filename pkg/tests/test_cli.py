import hashlib
import json

import pytest

from mesoscale import cli
from mesoscale.reactions import Reaction, ReactionNetwork, SmoothCoefficient


def run(*argv):
    return cli.main([str(a) for a in argv])


def manifest(out):
    return json.loads((out / cli.MANIFEST).read_text())


def check_manifest(out):
    m = manifest(out)
    for name, digest in m["outputs"].items():
        assert hashlib.sha256((out / name).read_bytes()).hexdigest() == digest
    return m


@pytest.fixture
def bad_model(tmp_path):
    net = ReactionNetwork((Reaction("C", -1, b=SmoothCoefficient.polynomial(0.2, 1.0)),),
                          M=2.0, name="leaky")
    path = tmp_path / "bad.json"
    path.write_text(net.to_json())
    return path


class TestValidateModel:
    def test_builtin_ok(self, capsys):
        assert run("validate-model", "coupled-gene") == 0
        assert "valid" in capsys.readouterr().out

    def test_absorption_violation_exits_one(self, bad_model, tmp_path, capsys):
        out = tmp_path / "v"
        assert run("validate-model", bad_model, "--out", out) == 1
        assert "absorption" in capsys.readouterr().out
        m = check_manifest(out)
        assert m["status"] == "invalid"
        assert json.loads((out / "report.json").read_text())["valid"] is False

    def test_missing_file(self, tmp_path):
        assert run("validate-model", tmp_path / "none.json") == 1


class TestUsage:
    def test_unknown_flag(self, tmp_path, capsys):
        assert run("simulate", "--bogus", "--out", tmp_path) == 64
        assert "usage" in capsys.readouterr().err

    def test_unknown_command(self):
        assert run("frobnicate") == 64

    def test_study_needs_model(self, tmp_path):
        out = tmp_path / "p"
        assert run("probes", "--study", "tail", "--out", out) == 64
        assert manifest(out)["status"] == "usage"


class TestSimulate:
    args = ("simulate", "--model", "coupled-gene", "--n", 5, "--l", 20, "--T", 0.01,
            "--samples", 3, "--seed", 7, "--v0", 1)

    def test_rerun_byte_identical(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert run(*self.args, "--out", a) == 0
        assert run(*self.args, "--out", b, "--jobs", 3) == 0
        for name in ("trajectory.bin", "report.json", "report.csv"):
            assert (a / name).read_bytes() == (b / name).read_bytes()
        ma, mb = check_manifest(a), check_manifest(b)
        assert ma["config_hash"] == mb["config_hash"]
        assert ma["outputs"] == mb["outputs"]

    def test_seed_from_environment(self, tmp_path, monkeypatch):
        base = [a for a in self.args if a not in ("--seed", 7)]
        monkeypatch.setenv(cli.SEED_ENV, "7")
        assert run(*base, "--out", tmp_path / "env") == 0
        assert run(*self.args, "--out", tmp_path / "flag") == 0
        assert ((tmp_path / "env" / "trajectory.bin").read_bytes()
                == (tmp_path / "flag" / "trajectory.bin").read_bytes())
        assert manifest(tmp_path / "env")["master_seed"] == 7

    def test_event_log_written(self, tmp_path):
        out = tmp_path / "e"
        assert run(*self.args, "--log-events", "--out", out) == 0
        assert "events.bin" in check_manifest(out)["outputs"]

    def test_even_cells_invalid(self, tmp_path):
        out = tmp_path / "x"
        args = list(self.args)
        args[args.index("--n") + 1] = 6
        assert run(*args, "--out", out) == 1
        m = manifest(out)
        assert m["status"] == "invalid" and m["error"]

    def test_tau_leap_labelled(self, tmp_path):
        out = tmp_path / "t"
        assert run(*self.args, "--mode", "tau-leap", "--dt", 1e-4, "--out", out) == 0
        assert json.loads((out / "report.json").read_text())["approximate"] is True

    def test_u0_from_csv(self, tmp_path):
        csv = tmp_path / "u0.csv"
        csv.write_text("index,value\n" + "".join(f"{j},0.4\n" for j in range(5)))
        assert run(*self.args, "--u0", csv, "--out", tmp_path / "c") == 0

    def test_rate_law_violation(self, bad_model, tmp_path):
        args = list(self.args)
        args[args.index("--model") + 1] = bad_model
        assert run(*args, "--out", tmp_path / "r") == 1


class TestSolveLimit:
    def test_outputs(self, tmp_path):
        out = tmp_path / "s"
        assert run("solve-limit", "--model", "coupled-gene", "--u0", 0.5, "--v0", 1,
                   "--T", 0.01, "--dt", 1e-3, "--mref", 15, "--samples", 3, "--out", out) == 0
        m = check_manifest(out)
        assert "samples/t0000.csv" in m["outputs"]
        report = json.loads((out / "report.json").read_text())
        assert len(report["samples"]) == 3
        head = (out / "samples" / "t0002.csv").read_text().splitlines()[0]
        assert head == "x,u,v"

    def test_even_mref(self, tmp_path):
        assert run("solve-limit", "--model", "coupled-gene", "--u0", 0.5, "--T", 0.01,
                   "--mref", 16, "--out", tmp_path) == 1


class TestConverge:
    def plan(self, tmp_path):
        path = tmp_path / "lln.json"
        path.write_text(json.dumps({
            "network": "coupled-gene", "grid": [[5, 20, 2], [7, 40, 2], [9, 80, 2]],
            "alpha": 0.1, "beta": 0.2, "T": 0.01, "samples": 3, "seed": 3,
            "m_ref": 31, "dt": 1e-3}))
        return path

    def test_report_schema_and_determinism(self, tmp_path):
        plan = self.plan(tmp_path)
        a, b = tmp_path / "a", tmp_path / "b"
        assert run("converge", "--plan", plan, "--out", a) == 0
        assert run("converge", "--plan", plan, "--out", b, "--jobs", 1) == 0
        for name in ("report.json", "report.csv", "plots/u_sup.csv"):
            assert (a / name).read_bytes() == (b / name).read_bytes()
        report = json.loads((a / "report.json").read_text())
        for row in report["rows"]:
            assert {"u_sup", "u_beta", "v_neg_alpha"} <= set(row)
        check_manifest(a)

    def test_invalid_plan(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"network": "coupled-gene", "grid": [[6, 20, 1]],
                                    "alpha": 0.1, "beta": 0.2, "T": 0.01, "samples": 3}))
        out = tmp_path / "o"
        assert run("converge", "--plan", path, "--out", out) == 1
        assert manifest(out)["status"] == "invalid"


class TestProbes:
    def test_inequality(self, tmp_path):
        out = tmp_path / "i"
        assert run("probes", "--study", "inequality", "--n", 31, 63, 127, "--trials", 50,
                   "--out", out) == 0
        body = json.loads((out / "report.json").read_text())
        assert "eigenvalue_ratio" in body["entries"]
        check_manifest(out)

    def test_compensator(self, tmp_path):
        out = tmp_path / "c"
        assert run("probes", "--study", "compensator", "--model", "birth-death-C", "--n", 7,
                   "--l", 20, "--T", 0.01, "--replicas", 20, "--out", out) == 0
        assert set(json.loads((out / "report.json").read_text())) == {"one", "phi1", "spike"}

    def test_too_few_cells_for_slope(self, tmp_path):
        out = tmp_path / "z"
        assert run("probes", "--study", "zd-decay", "--model", "birth-death-D", "--n", 5, 7,
                   "--replicas", 2, "--out", out) == 1
        assert manifest(out)["status"] == "invalid"

    def test_runtime_failure_keeps_manifest(self, tmp_path, monkeypatch):
        from mesoscale import harness

        def boom(*a, **k):
            raise RuntimeError("reference solve failed")

        monkeypatch.setattr(harness, "yn_tail_study", boom)
        out = tmp_path / "f"
        assert run("probes", "--study", "tail", "--model", "birth-death-C", "--out", out) == 2
        m = manifest(out)
        assert m["status"] == "error" and "reference solve failed" in m["error"]
