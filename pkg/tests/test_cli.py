"""Command-line interface: exit codes, config files and output formats."""

import io
import json

import numpy as np
import pytest

from evanskit import cli
from evanskit.errors import StepSizeError
from evanskit.evans import EvansEvaluator


def run(argv):
    out, err = io.StringIO(), io.StringIO()
    code = cli.run_cli(argv, stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


class TestUsage:
    def test_no_arguments(self):
        code, _, err = run([])
        assert code == 1
        assert "usage:" in err

    def test_missing_config(self):
        code, _, err = run(["winding"])
        assert code == 1
        assert "missing config" in err

    def test_bad_flag(self):
        code, _, _ = run(["winding", "--problem", "burgers", "--nodes", "many"])
        assert code == 1

    def test_unknown_config_key(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("problem = burgers\ncolour = blue\n")
        code, _, err = run(["winding", "--config", str(cfg)])
        assert code == 1
        assert "colour" in err

    def test_unreadable_config(self, tmp_path):
        code, _, _ = run(["winding", "--config", str(tmp_path / "absent.json")])
        assert code == 1


class TestWinding:
    def test_origin_circle(self):
        code, out, _ = run(["winding", "--problem", "burgers", "--contour", "circle:0,0.1", "--nodes", "16",
                            "--method", "exterior"])
        assert code == 0
        doc = json.loads(out)
        assert doc["schema_version"] == 1
        assert doc["result"]["winding"] == 1
        assert doc["config"]["contour"] == "circle:0,0.1"

    def test_singularity_exit_code(self):
        code, _, err = run(["winding", "--problem", "burgers", "--contour", "circle:0,1e-5", "--nodes", "8"])
        assert code == 2
        assert "SingularityError" in err

    def test_config_file_and_outputs(self, tmp_path):
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({"problem": "burgers", "contour": "circle:0.5,0.25", "nodes": 16,
                                   "method": "polar"}))
        prefix = tmp_path / "out" / "w"
        code, out, _ = run(["winding", "--config", str(cfg), "-o", str(prefix)])
        assert code == 0 and out == ""
        doc = json.loads((tmp_path / "out" / "w.json").read_text())
        assert doc["result"]["winding"] == 0
        assert doc["config"]["method"] == "polar"
        header = (tmp_path / "out" / "w.csv").read_text().splitlines()[0]
        assert header == "re_lambda,im_lambda,re_D,im_D,ok"

    def test_deterministic_csv(self, tmp_path):
        args = ["winding", "--problem", "burgers", "--contour", "circle:0.5,0.25", "--nodes", "16"]
        run(args + ["-o", str(tmp_path / "a")])
        run(args + ["-o", str(tmp_path / "b")])
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


class TestSample:
    def test_single_lambda(self):
        code, out, _ = run(["sample", "--problem", "burgers", "--lambdas", "1e-4"])
        assert code == 0
        value = json.loads(out)["result"]["samples"][0]["value"]
        assert np.hypot(*value) < 1e-3

    def test_key_value_config_with_params(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("# bound state\nproblem = sech-potential\nparams = {\"depth\": 2.0}\nlambdas = 1.0\n")
        code, out, _ = run(["sample", "--config", str(cfg)])
        assert code == 0
        assert np.hypot(*json.loads(out)["result"]["samples"][0]["value"]) < 1e-6

    def test_partial_results(self, monkeypatch):
        original = EvansEvaluator.evaluate

        def flaky(self, node):
            if node.lam.real > 0.9:
                raise StepSizeError("forced")
            return original(self, node)

        monkeypatch.setattr(EvansEvaluator, "evaluate", flaky)
        code, out, err = run(["sample", "--problem", "burgers", "--lambdas", "0.5,1.0"])
        assert code == 3
        assert json.loads(out)["result"]["failed"] == 1
        assert "partial" in err


class TestExperiments:
    def test_stiefel(self):
        code, out, _ = run(["stiefel"])
        assert code == 0
        result = json.loads(out)["result"]
        np.testing.assert_allclose(result["fitted_rate"], -2.0, rtol=0.05)

    def test_mesh_study(self, tmp_path):
        cfg = tmp_path / "m.cfg"
        cfg.write_text("a_values = [1, 16]\n")
        code, _, _ = run(["mesh-study", "--config", str(cfg), "-o", str(tmp_path / "m")])
        assert code == 0
        rows = (tmp_path / "m.csv").read_text().splitlines()
        assert rows[0] == "a,steps,centered_steps"
        assert len(rows) == 3

    def test_kato_order_pointwise(self, tmp_path):
        cfg = tmp_path / "k.cfg"
        cfg.write_text("node_counts = [32, 64]\n")
        code, out, _ = run(["kato-order", "--config", str(cfg), "--metric", "pointwise"])
        assert code == 0
        reports = json.loads(out)["result"]["reports"]
        assert [r["kind"] for r in reports] == ["kato-order-1-pointwise", "kato-order-2-pointwise"]

    def test_converge_m(self):
        code, out, _ = run(["converge-m", "--param", "theta=2"])
        assert code == 0
        np.testing.assert_allclose(json.loads(out)["result"]["fitted_rate"], 2.0, rtol=0.05)

    def test_converge_m_needs_testbed(self):
        code, _, _ = run(["converge-m", "--problem", "burgers"])
        assert code == 1


class TestRendering:
    def test_csv_uses_repr_floats(self):
        text = cli.render_csv(["x"], [[cli._fmt(0.1)]])
        assert text == "x\n0.1\n"

    def test_version(self, capsys):
        with pytest.raises(SystemExit) as info:
            cli.build_parser().parse_args(["--version"])
        assert info.value.code == 0
        assert "evanskit" in capsys.readouterr().out
