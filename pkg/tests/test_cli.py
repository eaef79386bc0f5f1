import json
import shutil
import subprocess
import sys

import numpy as np
import pytest

from biaslens import LinearModel, check_statistical_parity, fixture, from_dataset, io
from biaslens.cli import main


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def d_b(tmp_path):
    path = tmp_path / "d_b.csv"
    assert main(["fixture", "D_b", "--out", str(path)]) == 0
    return path


class TestFixtureAndAudit:
    def test_fixture_csv(self, tmp_path):
        path = tmp_path / "d_a.csv"
        assert main(["fixture", "D_a", "--out", str(path)]) == 0
        assert path.read_text().splitlines()[0] == "y,a,x0,count"
        assert io.read_dataset(path) == fixture("D_a")

    def test_audit_exact(self, capsys, d_b):
        code, out, _ = run(capsys, "audit", "--data", d_b, "--exact", "--tol", "1e-9")
        doc = json.loads(out)
        assert code == 0
        assert doc["sp-label"]["report"]["intersection"] == ["1/3", "2/3"]
        assert doc["sp-label"]["feasible"] is True
        assert doc["wae-label"]["feasible"] is False

    def test_audit_single_combo(self, capsys, tmp_path):
        path = tmp_path / "d.csv"
        main(["fixture", "D_a_prime", "--out", str(path)])
        code, out, _ = run(capsys, "audit", "--data", path, "--combo", "wae-sel", "--exact")
        doc = json.loads(out)
        assert list(doc) == ["wae-sel"]
        assert doc["wae-sel"]["report"]["alpha"] == "2/3"

    def test_audit_sampled_default_tolerance(self, capsys, d_b):
        code, out, _ = run(capsys, "audit", "--data", d_b)
        assert code == 0
        assert json.loads(out)["sp-label"]["tol"] == 0.05

    def test_missing_file(self, capsys, tmp_path):
        code, _, err = run(capsys, "audit", "--data", tmp_path / "nope.csv")
        assert code == 1 and "error" in err


class TestRecover:
    def test_sp_label(self, capsys, tmp_path, d_b):
        dist = tmp_path / "d_b.json"
        io.write_distribution(from_dataset(io.read_dataset(d_b), exact=True), dist)
        out_path = tmp_path / "fair.json"
        code, out, _ = run(capsys, "recover", "--dist", dist, "--combo", "sp-label", "--p-y1", "1/2", "--out", out_path)
        assert code == 0
        fair = io.read_distribution(out_path)
        assert check_statistical_parity(fair).value == 0
        spec = json.loads(out)["spec"]["flip"]
        assert spec == {"y0": {"a0": "1/9", "a1": "2/9"}, "y1": {"a0": "2/9", "a1": "1/9"}}

    def test_sp_label_needs_rate(self, capsys, tmp_path):
        dist = tmp_path / "j.json"
        main(["synth", "--features", "1", "--card", "2", "--out", str(dist)])
        code, _, err = run(capsys, "recover", "--dist", dist, "--combo", "sp-label", "--out", tmp_path / "o.json")
        assert code == 1 and "--p-y1" in err

    def test_selection_note(self, capsys, tmp_path):
        dist = tmp_path / "j.json"
        main(["synth", "--features", "2", "--card", "2", "--seed", "4", "--out", str(dist)])
        code, out, _ = run(capsys, "recover", "--dist", dist, "--combo", "sp-sel", "--out", tmp_path / "o.json")
        assert code == 0
        assert "not identifiable" in json.loads(out)["note"]


class TestSynthInjectTrain:
    def test_synth_and_sample(self, tmp_path):
        dist, data = tmp_path / "j.json", tmp_path / "j.csv"
        assert main(["synth", "--features", "2", "--card", "3", "--seed", "1", "--sample", "500",
                     "--sample-out", str(data), "--out", str(dist)]) == 0
        J = io.read_distribution(dist)
        assert J.mass.shape == (2, 2, 9)
        assert check_statistical_parity(J).value < 1e-15
        assert io.read_dataset(data, J.schema).n == 500

    def test_inject_label(self, tmp_path, d_b):
        spec = tmp_path / "s.json"
        spec.write_text(json.dumps({"flip": {"y0": {"a0": 0, "a1": 0}, "y1": {"a0": 1, "a1": 0}}}))
        out = tmp_path / "o.csv"
        assert main(["inject", "--data", str(d_b), "--spec", str(spec), "--seed", "3", "--out", str(out)]) == 0
        c = io.read_dataset(out).counts()
        assert c[1, 0].sum() == 0
        assert c[0, 0].sum() == 90

    def test_inject_selection_deterministic(self, tmp_path, d_b):
        spec = tmp_path / "s.json"
        spec.write_text(json.dumps({"keep": {"y0": {"a0": 0.5, "a1": 1}, "y1": {"a0": 1, "a1": 0.5}}}))
        outs = []
        for name in ("o1.csv", "o2.csv"):
            out = tmp_path / name
            main(["inject", "--data", str(d_b), "--spec", str(spec), "--seed", "3", "--out", str(out)])
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_train(self, tmp_path, d_b):
        out = tmp_path / "m.json"
        assert main(["train", "--data", str(d_b), "--lambda", "100", "--epochs", "500", "--out", str(out)]) == 0
        m = LinearModel.load(out)
        assert m.config.lambda_dpd == 100.0 and m.config.epochs == 500
        assert np.all(np.isfinite(m.theta))

    def test_train_reweigh_unlabeled(self, tmp_path, d_b):
        out = tmp_path / "m.json"
        code = main(["train", "--data", str(d_b), "--reweigh", "--unlabeled", str(d_b), "--lambda", "1",
                     "--epochs", "50", "--no-group", "--out", str(out)])
        assert code == 0
        assert LinearModel.load(out).config.include_group is False


class TestSweep:
    def _config(self, tmp_path, **kw):
        doc = {"source": {"synth": {"k": 2, "cards": 2}}, "kind": "label", "grid": [0.0, 0.3],
               "models": ["agnostic", "oracle-on-fair"], "repetitions": 1, "n": 1000, "epochs": 100}
        doc.update(kw)
        path = tmp_path / "sweep.json"
        path.write_text(json.dumps(doc))
        return path

    def test_outputs(self, tmp_path):
        cfg = self._config(tmp_path)
        assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "out"), "--no-plots"]) == 0
        assert len((tmp_path / "out" / "results.csv").read_text().splitlines()) == 5
        assert json.loads((tmp_path / "out" / "summary.json").read_text())["failures"] == 0
        assert not list((tmp_path / "out").glob("*.svg"))

    def test_config_error_exit_1(self, capsys, tmp_path):
        cfg = self._config(tmp_path, grid=[0.5, 0.1])
        code, _, err = run(capsys, "sweep", "--config", cfg, "--out", tmp_path / "out")
        assert code == 1 and "config error" in err

    def test_unknown_key_exit_1(self, capsys, tmp_path):
        cfg = self._config(tmp_path, colour="red")
        assert run(capsys, "sweep", "--config", cfg, "--out", tmp_path / "out")[0] == 1

    def test_cell_failures_exit_2(self, capsys, tmp_path):
        cfg = self._config(tmp_path, kind="selection", grid=[0.5, 1.0], eps=0.0)
        code, _, err = run(capsys, "sweep", "--config", cfg, "--out", tmp_path / "out", "--no-plots")
        assert code == 2 and "2 of 4 rows failed" in err


@pytest.mark.skipif(shutil.which("biaslens") is None, reason="console script not installed")
def test_console_script(tmp_path):
    out = tmp_path / "d.csv"
    proc = subprocess.run(["biaslens", "fixture", "D_a", "--out", str(out)], capture_output=True, text=True)
    assert proc.returncode == 0
    assert io.read_dataset(out).n == 100


def test_module_entry(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "biaslens.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "sweep" in proc.stdout
