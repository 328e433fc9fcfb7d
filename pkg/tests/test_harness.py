import json
import os
import subprocess
import sys

import numpy as np
import pytest

from otfsmu import cli, harness
from otfsmu.harness import (
    ConfigError,
    SimConfig,
    SweepError,
    parse_config,
    run_ber_sweep,
    run_complexity_report,
    run_nmse_sweep,
    run_threshold_sweep,
    trial_rng,
)

SMALL = dict(M=16, N=16, trials=4, seed=11, snr_db_list=(0.0, 20.0))


class TestConfig:
    def test_defaults(self):
        cfg = SimConfig()
        assert (cfg.M, cfg.N, cfg.L, cfg.l_max, cfg.k_max) == (32, 32, 4, 4, 4)
        assert cfg.delta_f == 15e3 and cfg.f_c == 4e9
        assert cfg.tau_multiplier == 3.0
        assert cfg.per_path_power == pytest.approx(0.25)

    def test_parse_lists_and_comments(self):
        cfg = parse_config(
            """
            # comment
            users = 1, 2,3
            snr_db_list = -5, 0.5   # trailing comment
            estimator = OMP, impulse
            epsilon = none
            path_power = 1.0
            scheme = embedded
            """
        )
        assert cfg.users == (1, 2, 3)
        assert cfg.snr_db_list == (-5.0, 0.5)
        assert cfg.estimator == ("omp", "impulse")
        assert cfg.epsilon is None and cfg.path_power == 1.0 and cfg.scheme == "embedded"

    @pytest.mark.parametrize(
        "text",
        [
            "bogus = 1",
            "M = 32\nM = 16",
            "M 32",
            "trials = many",
            "trials = 0",
            "estimator = lasso",
            "L = 20",
            "scheme = tdma",
            "epsilon = -1",
            "data_constellation = 8psk",
        ],
    )
    def test_rejects(self, text):
        with pytest.raises(ConfigError):
            parse_config(text)

    def test_digest_tracks_content(self):
        assert SimConfig().digest() == SimConfig().digest()
        assert SimConfig(seed=2).digest() != SimConfig().digest()

    def test_shipped_configs_parse(self):
        root = os.path.join(os.path.dirname(__file__), "..", "configs")
        for name in ("fig4", "fig5", "fig6", "fig7"):
            harness.load_config(os.path.join(root, f"{name}.cfg"))


class TestTrialStreams:
    def test_stream_depends_on_seed_and_index(self):
        a = trial_rng(1, 0).standard_normal(4)
        assert np.array_equal(a, trial_rng(1, 0).standard_normal(4))
        assert not np.array_equal(a, trial_rng(1, 1).standard_normal(4))
        assert not np.array_equal(a, trial_rng(2, 0).standard_normal(4))

    def test_worker_env(self, monkeypatch):
        monkeypatch.setenv(harness.WORKERS_ENV, "3")
        assert harness.worker_count() == 3
        monkeypatch.setenv(harness.WORKERS_ENV, "zero")
        assert harness.worker_count() >= 1


class TestSweeps:
    def test_nmse_header_and_rows(self):
        res = run_nmse_sweep(SimConfig(users=(2,), **SMALL), workers=1)
        assert res.to_csv().splitlines()[0] == "snr_db,estimator,users,nmse_mean,nmse_std,trials"
        assert len(res.rows) == 3 * 2
        assert all(r["trials"] == 4 for r in res.records())
        meta = res.metadata
        assert meta["seed"] == 11 and meta["config_hash"] == SimConfig(users=(2,), **SMALL).digest()

    def test_nmse_decreases_with_snr(self):
        res = run_nmse_sweep(SimConfig(users=(2,), **SMALL), workers=1)
        for est in ("omp", "omp_sci"):
            _, y = res.series("snr_db", "nmse_mean", estimator=est)
            assert y[1] < y[0]

    def test_ber_header(self):
        cfg = SimConfig(users=(1,), path_power=1.0, **SMALL)
        res = run_ber_sweep(cfg, csi="perfect", workers=1)
        assert res.to_csv().splitlines()[0] == "snr_db,users,csi,ber,trials"
        assert {r["csi"] for r in res.records()} == {"perfect"}

    def test_threshold_header(self):
        cfg = SimConfig(users=(2,), **SMALL)
        res = run_threshold_sweep(cfg, multipliers=(2, 3), workers=1)
        assert res.to_csv().splitlines()[0] == "tau_multiplier,users,ber,trials"
        assert [r["tau_multiplier"] for r in res.records()] == [2.0, 3.0]

    def test_complexity_counts(self):
        cfg = SimConfig(users=(2,), **SMALL)
        res = run_complexity_report(cfg, workers=1)
        assert res.to_csv().splitlines()[0] == "algorithm,ls_solves_total,corr_ops_total,trials"
        sci = res.per_trial[2]["ls_solves"][:, :, 1]
        assert np.all(sci == 2 * cfg.L)
        omp, sci_total = (r["ls_solves_total"] for r in res.records())
        assert sci_total <= omp

    def test_ber_rejects_impulse_scheme(self):
        with pytest.raises(ConfigError):
            run_ber_sweep(SimConfig(users=(1,), scheme="impulse", **SMALL), workers=1)

    def test_json_mirrors_csv(self):
        res = run_threshold_sweep(SimConfig(users=(1,), **SMALL), multipliers=(3,), workers=1)
        doc = json.loads(res.to_json())
        assert doc["columns"] == list(res.columns)
        assert doc["rows"][0]["ber"] == res.rows[0][2]

    def test_failed_trials_are_excluded(self, monkeypatch):
        real = harness.nmse

        def flaky(true, est, *a, **kw):
            if abs(true.per_user[0][0].gain) > 0.5:
                raise ValueError("injected")
            return real(true, est, *a, **kw)

        monkeypatch.setattr(harness, "nmse", flaky)
        res = run_nmse_sweep(SimConfig(users=(1,), estimator=("omp_sci",), **dict(SMALL, trials=12)), workers=1)
        counts = [r["trials"] for r in res.records()]
        assert all(0 < c < 12 for c in counts)
        assert res.metadata["excluded_trials"]["flagged"]

    def test_point_without_trials_fails(self, monkeypatch):
        def broken(*a, **kw):
            raise ValueError("always")

        monkeypatch.setattr(harness, "nmse", broken)
        with pytest.raises(SweepError):
            run_nmse_sweep(SimConfig(users=(1,), estimator=("omp",), **SMALL), workers=1)

    def test_worker_count_does_not_change_output(self):
        cfg = SimConfig(users=(2,), **dict(SMALL, trials=6))
        one = run_nmse_sweep(cfg, workers=1).to_csv()
        assert run_nmse_sweep(cfg, workers=3).to_csv() == one


class TestCli:
    def test_nmse_to_file(self, tmp_path, capsys):
        cfg = tmp_path / "c.cfg"
        cfg.write_text("M = 16\nN = 16\nusers = 1\nsnr_db_list = 10\ntrials = 2\n")
        out = tmp_path / "o.csv"
        assert cli.main(["nmse-sweep", "--config", str(cfg), "--out", str(out), "--seed", "3"]) == 0
        assert out.read_text().startswith("snr_db,estimator,users,nmse_mean,nmse_std,trials\n")

    def test_json_to_stdout(self, tmp_path, capsys):
        cfg = tmp_path / "c.cfg"
        cfg.write_text("M = 16\nN = 16\nusers = 1\nsnr_db_list = 10\n")
        assert cli.main(["ber-sweep", "--config", str(cfg), "--trials", "2", "--format", "json", "--csi", "perfect"]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["columns"] == ["snr_db", "users", "csi", "ber", "trials"]

    def test_config_errors_exit_1(self, tmp_path, capsys):
        bad = tmp_path / "bad.cfg"
        bad.write_text("nonsense = 3\n")
        assert cli.main(["nmse-sweep", "--config", str(bad)]) == 1
        assert cli.main(["nmse-sweep", "--config", str(tmp_path / "missing.cfg")]) == 1
        assert cli.main(["complexity", "--trials", "0"]) == 1
        assert "error" in capsys.readouterr().err

    def test_usage_errors_exit_1(self, capsys):
        with pytest.raises(SystemExit) as exc:
            cli.main(["nmse-sweep", "--no-such-flag"])
        assert exc.value.code == 1
        assert "usage" in capsys.readouterr().err

    def test_runtime_failure_exit_2(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setattr(harness, "nmse", lambda *a, **k: (_ for _ in ()).throw(ValueError("x")))
        cfg = tmp_path / "c.cfg"
        cfg.write_text("M = 16\nN = 16\nusers = 1\nsnr_db_list = 10\ntrials = 1\nestimator = omp\n")
        assert cli.main(["nmse-sweep", "--config", str(cfg)]) == 2

    def test_selftest(self, capsys):
        assert cli.main(["selftest"]) == 0
        assert "FAIL" not in capsys.readouterr().out

    def test_console_script_byte_identical(self, tmp_path):
        cfg = tmp_path / "c.cfg"
        cfg.write_text("M = 16\nN = 16\nusers = 2\nsnr_db_list = 0, 10\ntrials = 3\n")
        outs = []
        for i, workers in enumerate(("1", "2")):
            out = tmp_path / f"o{i}.csv"
            env = dict(os.environ, OTFSMU_WORKERS=workers)
            subprocess.run(
                [sys.executable, "-m", "otfsmu.cli", "threshold-sweep", "--config", str(cfg), "--out", str(out)],
                env=env, check=True,
            )
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]
