import math

import numpy as np
import pytest

from sparsediff import bench
from sparsediff.cli import main
from sparsediff.model_sim import load_path

SMALL = """
# tiny experiment
n_grid = 40, 80
p = 4
S = 2
theta0 = 0.8, -0.6
K0 = 1.0
alpha = 0.2
replicates = 3
substeps = 4
ou_rate = 10
ou_vol = 4.47
master_seed = 11
"""


@pytest.fixture
def small_cfg(tmp_path):
    cfg = tmp_path / "small.cfg"
    cfg.write_text(SMALL + f"output = {tmp_path / 'out'}\n")
    return cfg


class TestConfig:
    def test_parse(self):
        cfg = bench.parse_config(SMALL)
        assert cfg.n_grid == (40, 80) and cfg.p == 4 and cfg.S == 2
        assert cfg.tuning.K0 == 1.0 and cfg.tuning.alpha == 0.2
        assert cfg.theta0_l1 == pytest.approx(1.4)

    def test_zeta_inequality_named(self):
        with pytest.raises(bench.ConfigError, match="zeta < 2\\*alpha"):
            bench.parse_config("n_grid = 10\nalpha = 0.2\nzeta = 0.4\n")

    @pytest.mark.parametrize("text", ["n_grid = 100, 100", "n_grid = 400, 100", "n_grid = 10\nreplicates = 0",
                                      "n_grid = 10\nbogus = 1", "n_grid = 10\np = x", "p = 3",
                                      "n_grid = 10\np = 1\ntheta0 = 1, 1\nS = 2",
                                      "n_grid = 10\ntheta0 = 1, 0\nS = 2"])
    def test_rejects(self, text):
        with pytest.raises(bench.ConfigError):
            bench.parse_config(text)

    def test_exp_rule(self):
        cfg = bench.parse_config("n_grid = 10, 100\np_rule = exp\np_c = 0.5\nzeta = 0.3\nalpha = 0.2\n")
        assert [bench.p_for(cfg, n) for n in cfg.n_grid] == [math.ceil(math.exp(0.5 * n ** 0.3)) for n in (10, 100)]

    def test_random_theta(self):
        cfg = bench.parse_config("n_grid = 10\np = 6\nS = 3\ntheta0_gen = random\ntheta0_magnitude = 0.5\n")
        t = bench.theta0_for(cfg, 0)
        assert np.count_nonzero(t) == 3 and set(np.abs(t[t != 0])) == {0.5}
        assert np.array_equal(t, bench.theta0_for(cfg, 0))


class TestSeeds:
    def test_split_is_deterministic_and_distinct(self):
        seeds = {bench.replicate_seed(5, i, r) for i in range(3) for r in range(50)}
        assert len(seeds) == 150
        assert bench.replicate_seed(5, 1, 2) == bench.replicate_seed(5, 1, 2)


class TestExperiment:
    def test_degenerate_run(self, tmp_path):
        cfg = bench.parse_config("n_grid = 16\np = 3\ntheta0 = 0\nreplicates = 1\ngamma = 1e6\nsubsteps = 2\n")
        records = bench.run_experiment(cfg, tmp_path)
        assert len(records) == 1
        r = records[0]
        assert r["err_l1"] == 0 and r["err_l2"] == 0 and r["err_linf"] == 0
        assert r["solver_status"] == "converged"

    def test_outputs_and_determinism(self, small_cfg, tmp_path):
        cfg = bench.load_config(small_cfg)
        a = bench.run_experiment(cfg, tmp_path / "a")
        bench.run_experiment(cfg, tmp_path / "b")
        assert len(a) == 6
        assert [(r["n"], r["replicate"]) for r in a] == sorted((r["n"], r["replicate"]) for r in a)
        for name in ("records.csv", "summary.csv", "err_l1_vs_n.svg", "err_l2_vs_n.svg", "err_linf_vs_n.svg"):
            assert (tmp_path / "a" / name).exists()

        def strip(p):
            lines = p.read_text().splitlines()
            header = lines[2].split(",")
            k = header.index("runtime_ms")
            return [",".join(v for i, v in enumerate(line.split(",")) if i != k) for line in lines[2:]]

        assert strip(tmp_path / "a" / "records.csv") == strip(tmp_path / "b" / "records.csv")
        lines = (tmp_path / "a" / "records.csv").read_text().splitlines()
        assert lines[0] == bench.RECORDS_TAG
        assert lines[1].startswith("# constants")
        assert lines[2] == ",".join(bench.RECORD_COLUMNS)
        summary = (tmp_path / "a" / "summary.csv").read_text().splitlines()
        assert summary[0] == ",".join(bench.SUMMARY_COLUMNS)
        svg = (tmp_path / "a" / "err_l2_vs_n.svg").read_text()
        assert svg.startswith("<svg") and "polyline" in svg

    def test_replicate_errors_are_recorded(self, monkeypatch, tmp_path):
        cfg = bench.parse_config("n_grid = 16\np = 2\ntheta0 = 1\nreplicates = 2\nsubsteps = 2\n")

        def boom(*a, **k):
            raise FloatingPointError("synthetic")

        monkeypatch.setattr(bench, "estimate", boom)
        records = bench.run_experiment(cfg, tmp_path)
        assert all(r["solver_status"] == "error:FloatingPointError" for r in records)
        assert (tmp_path / "errors.log").exists()


class TestVerify:
    def record(self, **kw):
        r = dict(n=100, p=2, replicate=0, seed=1, gamma_n=1.0, feas_gamma=1, feas_6gamma=1, epsilon_n=0.0,
                 kappa=1.0, re=1.0, f2=1.0, finf=1.0, err_l1=0.0, err_l2=0.0, err_linf=0.0,
                 bound_a_slack=0.0, bound_c_slack=0.0, solver_status="converged", runtime_ms=1.0)
        r.update(kw)
        return r

    def test_zero_error_slack_is_full_bound(self):
        const = {"theta0_l1": 1.0, "cov_bound": 1.0, "S": 1}
        rep = bench.verify_bounds([self.record()], const)
        k = bench.theorem_constants(1.0, 1.0)
        assert rep.violations["a"] == 0
        assert rep.median_slack["a"] == pytest.approx(k["K2"])
        assert k["K2"] == pytest.approx(8 * 1.0 / k["nu"])

    def test_nonpositive_denominator_not_applicable(self):
        const = {"theta0_l1": 1.0, "cov_bound": 1.0, "S": 2}
        rep = bench.verify_bounds([self.record(kappa=0.1, epsilon_n=0.5)], const)
        assert rep.applicable["c"] == 0 and rep.applicable["a"] == 1

    def test_vacuous(self):
        const = {"theta0_l1": 1.0, "cov_bound": 1.0, "S": 2}
        rep = bench.verify_bounds([self.record(feas_gamma=0)], const)
        assert rep.vacuous

    def test_violation_counted(self):
        const = {"theta0_l1": 1.0, "cov_bound": 1.0, "S": 1}
        rep = bench.verify_bounds([self.record(err_l2=100.0)], const)
        assert rep.violations["a"] == 1 and rep.fraction["a"] == 1.0


class TestCLI:
    def test_simulate_then_estimate(self, small_cfg, tmp_path, capsys):
        out = tmp_path / "p.bin"
        assert main(["simulate", "--config", str(small_cfg), "--seed", "7", "--out", str(out)]) == 0
        path = load_path(out)
        assert path.n == 40 and path.p == 4
        capsys.readouterr()
        assert main(["estimate", "--path", str(out), "--gamma", "0.3"]) == 0
        first = capsys.readouterr().out
        assert main(["estimate", "--path", str(out), "--gamma", "0.3"]) == 0
        assert capsys.readouterr().out == first
        assert '"feasible"' in first and '"theta_hat"' in first

    def test_score_and_factors(self, small_cfg, tmp_path, capsys):
        out = tmp_path / "p.bin"
        main(["simulate", "--config", str(small_cfg), "--seed", "3", "--out", str(out)])
        assert main(["score", "--path", str(out), "--theta", "0.8,-0.6,0,0"]) == 0
        assert main(["score", "--config", str(small_cfg), "--seed", "3"]) == 0
        assert '"decomposition"' in capsys.readouterr().out
        assert main(["factors", "--path", str(out), "--support", "0,1"]) == 0
        mat = tmp_path / "j.txt"
        np.savetxt(mat, np.eye(3))
        capsys.readouterr()
        assert main(["factors", "--matrix", str(mat), "--support", "0"]) == 0
        assert '"kappa": 1.0' in capsys.readouterr().out

    def test_experiment_verify_plot(self, small_cfg, tmp_path, capsys):
        out = tmp_path / "exp"
        assert main(["experiment", "--config", str(small_cfg), "--out", str(out)]) == 0
        assert main(["verify", "--records", str(out / "records.csv")]) == 0
        assert "bound (a)" in capsys.readouterr().out
        plots = tmp_path / "plots"
        assert main(["plot", "--summary", str(out / "summary.csv"), "--out", str(plots)]) == 0
        assert (plots / "err_linf_vs_n.svg").exists()

    def test_verify_empty(self, tmp_path, capsys):
        empty = tmp_path / "empty.csv"
        empty.write_text("")
        assert main(["verify", "--records", str(empty)]) == 1
        assert "no records" in capsys.readouterr().err

    def test_usage_errors(self, capsys):
        assert main(["frobnicate"]) == 1
        assert main(["estimate", "--bogus"]) == 1
        assert main([]) == 1
        assert "usage" in capsys.readouterr().err

    def test_validation_and_io_codes(self, tmp_path):
        bad = tmp_path / "bad.cfg"
        bad.write_text("n_grid = 10\nalpha = 0.2\nzeta = 0.5\n")
        assert main(["experiment", "--config", str(bad)]) == 1
        assert main(["experiment", "--config", str(tmp_path / "missing.cfg")]) == 2
        junk = tmp_path / "junk.bin"
        junk.write_bytes(b"not a path file")
        assert main(["estimate", "--path", str(junk), "--gamma", "0.1"]) == 2
