import csv
import json
import logging
import os

import numpy as np
import pytest

from diffusion_factor.diffusion import DiffusionSchedule
from diffusion_factor.errors import ConfigError, DataError
from diffusion_factor.harness.backtest_runner import run_backtest, window_starts
from diffusion_factor.harness.cli import main, spec_from_dict, spec_to_dict
from diffusion_factor.harness.config import default_config_dict, load_config
from diffusion_factor.harness.ingest import ingest_csv, preprocess_window, standardize, winsorize
from diffusion_factor.harness.report import VOLATILE, file_sha256
from diffusion_factor.panel import ReturnPanel
from diffusion_factor.sampler import appendix_d_spec
from diffusion_factor.score_net import init_params, save_checkpoint
from helpers import random_mixture_spec


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return str(path)


def read_rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def small_config(tmp_path, **sections):
    doc = {
        "net": {"hidden": [8]},
        "train": {"epochs": 2, "batch_size": 32},
        "sampler": {"steps": 10, "m": 64},
        "study": {"d": 6, "k": 2, "N": [8], "repetitions": 1},
        "backtest": {
            "train_window": 30,
            "update_every": 10,
            "methods": ["EW", "Real Emp+Real Emp"],
            "constraint": "l1_norm",
            "bound": 2.0,
            "k_factors": 2,
        },
    }
    for key, value in sections.items():
        doc.setdefault(key, {}).update(value)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(doc))
    return str(path)


class TestIngest:
    def test_clean(self, tmp_path):
        path = write_csv(tmp_path / "r.csv", ["date", "x", "y"], [["d1", 0.1, 0.2], ["d2", -0.1, 0.0], ["d3", 0.0, 0.1]])
        cfg = load_config().preprocess
        cfg.sort_by_volatility = False
        panel = ingest_csv(path, cfg)
        assert panel.asset_ids == ["x", "y"] and panel.dates == ["d1", "d2", "d3"]
        np.testing.assert_array_equal(panel.values, [[0.1, 0.2], [-0.1, 0.0], [0.0, 0.1]])

    def test_missing_column_dropped(self, tmp_path, caplog):
        rng = np.random.default_rng(0)
        rows = [[f"{i:03d}", *rng.normal(size=2)] for i in range(50)]
        for i in range(3):  # 6% missing in column b
            rows[i * 10][2] = ""
        rows[5][1] = ""  # 2% missing in column a is zero-filled
        path = write_csv(tmp_path / "r.csv", ["date", "a", "b"], rows)
        with caplog.at_level(logging.WARNING):
            panel = ingest_csv(path, load_config().preprocess)
        assert panel.asset_ids == ["a"] and panel.values[5, 0] == 0.0
        assert "dropping asset b" in caplog.text

    def test_constant_column_dropped(self, caplog):
        x = np.column_stack([np.arange(5.0), np.full(5, 0.3)])
        with caplog.at_level(logging.WARNING):
            z, st, keep = standardize(x)
        assert list(keep) == [True, False] and z.shape == (5, 1)
        assert "zero-variance" in caplog.text
        np.testing.assert_allclose(st.invert(z), x[:, :1])

    def test_malformed_line(self, tmp_path):
        path = tmp_path / "r.csv"
        path.write_text("date,a\nd1,0.1\nd2,oops\n")
        with pytest.raises(DataError, match=":3:"):
            ingest_csv(str(path), load_config().preprocess)

    def test_non_monotone_dates(self, tmp_path):
        path = write_csv(tmp_path / "r.csv", ["date", "a"], [["2020-01-02", 0.1], ["2020-01-01", 0.2]])
        with pytest.raises(DataError, match="monotone"):
            ingest_csv(path, load_config().preprocess)

    def test_sample_ids_skip_date_check(self, tmp_path):
        rows = [[f"s{i}", float(i)] for i in range(12)]
        panel = ingest_csv(write_csv(tmp_path / "r.csv", ["date", "a"], rows), load_config().preprocess)
        assert panel.n == 12 and panel.dates[10] == "s10"

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError):
            ingest_csv(str(tmp_path / "none.csv"), load_config().preprocess)

    def test_volatility_order(self, tmp_path):
        rng = np.random.default_rng(1)
        rows = [[i, *(rng.normal(size=3) * [1.0, 3.0, 2.0])] for i in range(40)]
        path = write_csv(tmp_path / "r.csv", ["date", "lo", "hi", "mid"], rows)
        assert ingest_csv(path, load_config().preprocess).asset_ids == ["hi", "mid", "lo"]

    def test_winsorize_keeps_sign(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal((200, 3))
        x[0, 0], x[1, 0] = 50.0, -50.0
        w = winsorize(x, 0.025, np.random.default_rng(0))
        assert 0 < w[0, 0] < 50.0 and -50.0 < w[1, 0] < 0
        lo, hi = np.quantile(x, [0.025, 0.975], axis=0)
        assert np.all((w >= lo) & (w <= hi))

    def test_preprocess_round_trip(self):
        x = np.random.default_rng(3).normal(0.01, 0.02, (60, 4))
        cfg = load_config().preprocess
        cfg.winsorize = 0.0
        z, st, _ = preprocess_window(x, cfg, np.random.default_rng(0))
        np.testing.assert_allclose(z.mean(0), 0.0, atol=1e-12)
        np.testing.assert_allclose(st.invert(z), x, atol=1e-15)


class TestConfig:
    def test_defaults(self):
        cfg = load_config()
        assert cfg.to_dict() == default_config_dict()
        assert cfg.schedule.T == 5.0 and cfg.schedule.t0 == 0.01

    def test_overlay_and_override(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"seed": 3, "train": {"epochs": 7}}))
        cfg = load_config(str(path), {"seed": 9, "threads": None})
        assert cfg.seed == 9 and cfg.train.epochs == 7 and cfg.threads == 1

    @pytest.mark.parametrize(
        "doc",
        [
            {"bogus": 1},
            {"train": {"lr": 1}},
            {"schedule": {"t0": 6.0}},
            {"study": {"k": 64}},
            {"sampler": {"mode": "ode"}},
            {"backtest": {"constraint": "box"}},
            {"train": 5},
        ],
    )
    def test_rejects(self, tmp_path, doc):
        path = tmp_path / "c.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(ConfigError):
            load_config(str(path))

    def test_bad_json(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text("{")
        with pytest.raises(ConfigError):
            load_config(str(path))

    def test_steps_drive_epochs(self):
        cfg = load_config()
        cfg.train.steps = 100
        assert cfg.train.to_train_config(0, n_rows=512).epochs == 50
        small = cfg.train.to_train_config(0, n_rows=16)
        assert small.batch_size == 16 and small.m_noise == 16

    def test_print_config(self, capsys):
        assert main(["--print-config", "--seed", "4"]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["seed"] == 4 and doc["backtest"]["eta"] == 3.0


class TestSpecRoundTrip:
    def test_gaussian(self):
        spec = appendix_d_spec(5, 2, 0)
        back = spec_from_dict(json.loads(json.dumps(spec_to_dict(spec))))
        np.testing.assert_array_equal(back.covariance(), spec.covariance())

    def test_mixture(self):
        spec = random_mixture_spec(np.random.default_rng(0), 4, 2)
        back = spec_from_dict(json.loads(json.dumps(spec_to_dict(spec))))
        np.testing.assert_allclose(back.mean(), spec.mean(), atol=0)


class TestBacktestRunner:
    def test_window_underflow(self):
        with pytest.raises(ConfigError):
            window_starts(10, 10, 5)

    def test_window_starts(self):
        assert window_starts(100, 30, 25) == [30, 55, 80]
        assert window_starts(100, 30, 25, max_windows=2) == [30, 55]

    def test_equal_weight_single_window(self):
        rng = np.random.default_rng(0)
        panel = ReturnPanel(rng.normal(0.001, 0.01, (50, 4)))
        cfg = load_config()
        cfg.backtest.train_window, cfg.backtest.update_every = 30, 20
        cfg.backtest.methods, cfg.backtest.cost_bp = ["EW"], 0.0
        run = run_backtest(cfg, panel)
        assert run.results["EW"].mean == pytest.approx(panel.values[30:].mean(), abs=1e-15)

    def test_unknown_method(self):
        cfg = load_config()
        cfg.backtest.train_window, cfg.backtest.methods = 5, ["Real BS+Diff LW"]
        with pytest.raises(ConfigError):
            run_backtest(cfg, ReturnPanel(np.zeros((10, 2))))


class TestCli:
    def test_pipeline(self, tmp_path):
        cfg = small_config(tmp_path)
        sim, tr, sm, rec = (str(tmp_path / x) for x in ("sim", "train", "sample", "rec"))
        assert main(["simulate", "--n", "80", "--out", sim, "--config", cfg]) == 0
        data = os.path.join(sim, "panel.csv")
        assert main(["train", "--data", data, "--k", "2", "--out", tr, "--config", cfg]) == 0
        ckpt = os.path.join(tr, "checkpoint.json")
        assert main(["sample", "--checkpoint", ckpt, "--m", "16", "--out", sm, "--config", cfg]) == 0
        side = json.loads(open(os.path.join(sm, "samples.csv.json")).read())
        assert side["checkpoint_sha256"] == file_sha256(ckpt) and side["sampler"]["m"] == 16
        spec = os.path.join(sim, "spec.json")
        assert main(["recover-subspace", "--data", data, "--spec", spec, "--k", "2", "--out", rec]) == 0
        metrics = {r["metric"]: float(r["value"]) for r in read_rows(os.path.join(rec, "recover_metrics.csv"))}
        assert set(metrics) == {"RE1", "RE2", "RE3", "RE4"} and metrics["RE2"] < 0.5

    def test_manifest_hashes(self, tmp_path):
        out = str(tmp_path / "o")
        assert main(["simulate", "--n", "5", "--d", "4", "--k", "1", "--out", out, "--seed", "2"]) == 0
        man = json.loads(open(os.path.join(out, "manifest.json")).read())
        assert man["command"] == "simulate" and man["seeds"]["data"] == 2
        files = man["files"]
        assert set(files) == {"panel.csv", "spec.json"}
        for name, digest in files.items():
            assert file_sha256(os.path.join(out, name)) == digest

    def test_flags_after_subcommand(self, tmp_path):
        a, b = str(tmp_path / "a"), str(tmp_path / "b")
        assert main(["--seed", "5", "--out", a, "simulate", "--n", "4", "--d", "3", "--k", "1"]) == 0
        assert main(["simulate", "--n", "4", "--d", "3", "--k", "1", "--seed", "5", "--out", b]) == 0
        assert open(os.path.join(a, "panel.csv")).read() == open(os.path.join(b, "panel.csv")).read()

    def test_portfolio_outputs(self, tmp_path):
        cfg = small_config(tmp_path)
        sim, out = str(tmp_path / "sim"), str(tmp_path / "pf")
        main(["simulate", "--n", "60", "--d", "5", "--k", "1", "--out", sim])
        assert main(["portfolio", "--data", os.path.join(sim, "panel.csv"), "--out", out, "--config", cfg]) == 0
        report = read_rows(os.path.join(out, "report.csv"))
        assert [r["Method"] for r in report] == ["EW", "Real Emp+Real Emp"]
        assert len(read_rows(os.path.join(out, "returns_long.csv"))) == 2 * 30
        man = json.loads(open(os.path.join(out, "manifest.json")).read())
        assert man["methods"] == {"weights_00.csv": "EW", "weights_01.csv": "Real Emp+Real Emp"}

    def test_report_rebuilds_manifest(self, tmp_path):
        out = str(tmp_path / "o")
        main(["simulate", "--n", "4", "--d", "3", "--k", "1", "--out", out])
        os.remove(os.path.join(out, "manifest.json"))
        assert main(["report", "--out", out]) == 0
        assert os.path.exists(os.path.join(out, "manifest.json"))

    def test_volatile_set(self):
        assert VOLATILE == {"manifest.json", "train_log.csv"}

    @pytest.mark.parametrize(
        "argv",
        [
            [],
            ["simulate", "--n", "5", "--config", "/nonexistent/cfg.json"],
            ["simulate", "--n", "5", "--d", "3", "--k", "3"],
            ["simulate", "--n", "0", "--d", "3", "--k", "1"],
        ],
    )
    def test_config_exit(self, tmp_path, argv):
        assert main([*argv, "--out", str(tmp_path / "o")] if argv else argv) == 2

    def test_config_exit_portfolio_method(self, tmp_path):
        cfg = small_config(tmp_path, backtest={"methods": ["Magic"]})
        sim = str(tmp_path / "sim")
        main(["simulate", "--n", "40", "--d", "3", "--k", "1", "--out", sim])
        argv = ["portfolio", "--data", os.path.join(sim, "panel.csv"), "--config", cfg, "--out", str(tmp_path / "o")]
        assert main(argv) == 2

    def test_data_exit(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("date,a\n1,0.1\n2,x\n")
        assert main(["train", "--data", str(bad), "--out", str(tmp_path / "o")]) == 3
        assert main(["train", "--data", str(tmp_path / "none.csv"), "--out", str(tmp_path / "o")]) == 3
        assert main(["report", "--out", str(tmp_path / "empty")]) == 3

    def test_numerical_exit(self, tmp_path):
        p = init_params(3, 1, np.random.default_rng(0), hidden=(4,))
        p.mlp.weights[0][:] = np.nan
        ckpt = str(tmp_path / "ckpt.json")
        save_checkpoint(ckpt, p, DiffusionSchedule())
        argv = ["sample", "--checkpoint", ckpt, "--m", "4", "--steps", "4", "--out", str(tmp_path / "o")]
        assert main(argv) == 4
