import json

import pytest
from click.testing import CliRunner

import handover as h
from handover.cli import main


@pytest.fixture()
def runner():
    return CliRunner()


@pytest.fixture(scope="module")
def data_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "data.jsonl"
    ds = h.generate_synthetic(h.GeneratorConfig(n_id=27, n_ood=6), seed=5)
    h.save(ds, path)
    return str(path)


@pytest.fixture(scope="module")
def config_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("cfg") / "handover.cfg"
    path.write_text(
        "# test config\n"
        "kernel.lengthscales = 0.35, 0.2\n"
        "kernel.signal_variance = 0.8\n"
        "kernel.noise_variance = 0.002\n"
        "similarity.kappa = 1.0\n"
        "similarity.window = 90\n"
        "prediction.k_neighbors = 8\n")
    return str(path)


class TestGenData:
    def test_writes_dataset(self, runner, tmp_path):
        out = tmp_path / "d.jsonl"
        res = runner.invoke(main, ["gen-data", "--n-id", "6", "--n-ood", "2",
                                   "--seed", "3", "--out", str(out)])
        assert res.exit_code == 0, res.output
        assert h.load(out).n == 8
        assert json.loads(res.output.strip().splitlines()[-1])["n_pairs"] == 8

    def test_error_is_json_and_nonzero(self, runner, tmp_path):
        res = runner.invoke(main, ["gen-data", "--n-id", "0", "--n-ood", "0",
                                   "--out", str(tmp_path / "d.jsonl")])
        assert res.exit_code == 1
        # stderr carries a machine-readable error object
        assert "error" in res.output


class TestEval:
    def test_kfold_report(self, runner, data_file, config_file, tmp_path):
        out = tmp_path / "report.json"
        res = runner.invoke(main, ["eval", "kfold", "--data", data_file,
                                   "--k", "3", "--inducing", "0.4",
                                   "--kappa", "1.0", "--seed", "7",
                                   "--config", config_file, "--out", str(out)])
        assert res.exit_code == 0, res.output
        report = json.loads(out.read_text())
        assert report["kind"] == "kfold"
        assert len(report["folds"]) == 3
        assert report["summary"]["mean_rms_mm"] > 0

    def test_tradeoff_report(self, runner, data_file, config_file, tmp_path):
        out = tmp_path / "tr.json"
        res = runner.invoke(main, ["eval", "tradeoff", "--data", data_file,
                                   "--inducing-ratios", "0.4,1.0",
                                   "--max-test-pairs", "8",
                                   "--config", config_file, "--out", str(out)])
        # the tiny dataset cannot reach the 1000-tick latency floor
        assert res.exit_code == 1
        assert "error" in res.output

    def test_missing_data_nonzero(self, runner):
        res = runner.invoke(main, ["eval", "kfold", "--data", "/nope.jsonl"])
        assert res.exit_code != 0


class TestRollout:
    def test_rollout_json(self, runner, data_file, config_file, tmp_path):
        out = tmp_path / "roll.json"
        res = runner.invoke(main, ["rollout", "--params",
                                   "K=114.3,B=17.1,tf=0.14,fr=7.1",
                                   "--scenario", "static", "--seed", "1",
                                   "--data", data_file, "--config", config_file,
                                   "--out", str(out)])
        assert res.exit_code == 0, res.output
        roll = json.loads(out.read_text())
        assert {"t", "target", "ee", "receiver", "release_t", "params"} <= set(roll)
        assert roll["params"]["stiffness"] == 114.3

    def test_bad_params_rejected(self, runner, data_file):
        res = runner.invoke(main, ["rollout", "--params", "K=999,B=17,tf=0.1,fr=7",
                                   "--data", data_file])
        assert res.exit_code == 1
        assert "error" in res.output


class TestPrefs:
    def test_simulate_small(self, runner, tmp_path):
        out = tmp_path / "prefs.json"
        res = runner.invoke(main, ["prefs", "simulate", "--iters", "5",
                                   "--seeds", "3", "--out", str(out)])
        assert res.exit_code == 0, res.output
        rep = json.loads(out.read_text())
        assert rep["n_runs"] == 3 and 0.0 <= rep["success_rate"] <= 1.0

    def test_replay_roundtrip(self, runner, tmp_path):
        from handover.preference import ActionGrid
        from handover.service import PreferenceSession

        log = tmp_path / "sess.jsonl"
        session = PreferenceSession(session_id="cli", grid=ActionGrid.default(),
                                    budget=2, seed=4, log_path=log)
        session.submit("a", query_id=0)
        session.submit("b", query_id=1)
        res = runner.invoke(main, ["prefs", "replay", "--log", str(log)])
        assert res.exit_code == 0, res.output
        payload = json.loads(res.output)
        assert payload["done"] is True
        assert payload["incumbent_index"] == session.posterior.incumbent
