import json
import math

import numpy as np
import pytest

from isotns_sampler import harness
from isotns_sampler.harness import ExperimentConfig, InfeasibleConfigError

SHORT = (100, 1000, 10000)


class TestConfig:
    def test_default_schedule(self):
        s = harness.default_schedule()
        assert len(s) == 10 and s[0] == 100 and s[-1] == 100000
        assert all(b > a for a, b in zip(s, s[1:]))
        assert ExperimentConfig("ghz", 4).n_trials == 10

    @pytest.mark.parametrize(
        "kw",
        [
            dict(n_samples=(100, 100)),
            dict(n_samples=(1000, 100)),
            dict(n_samples=()),
            dict(n_trials=0),
            dict(chi=0),
            dict(k=0),
        ],
    )
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            ExperimentConfig("ghz", 2, **kw)

    def test_unknown_state(self):
        with pytest.raises(ValueError):
            ExperimentConfig("cluster", 2)

    def test_default_k(self):
        assert ExperimentConfig("ghz", 4).top_k == 2
        assert ExperimentConfig("w", 4).top_k == 16
        assert ExperimentConfig("random", 3).top_k == 10


class TestConvergence:
    def test_rows_and_summary(self):
        cfg = ExperimentConfig("ghz", 3, 2, seed=1, n_samples=SHORT, n_trials=5)
        rec = harness.run_convergence(cfg)
        assert rec.columns == ("state", "L", "chi", "N", "trial", "KL", "sum_row_errors")
        assert len(rec.rows) == len(SHORT) * 5
        for r in rec.rows:
            assert r[5] >= 0 and r[6] == 0.0
        for s in rec.summary:
            kls = [r[5] for r in rec.rows if r[3] == s["N"]]
            assert s["p16_KL"] <= s["median_KL"] <= s["p84_KL"]
            assert s["median_KL"] == pytest.approx(np.median(kls))
            assert s["p16_KL"] == pytest.approx(np.percentile(kls, 16))

    def test_csv_deterministic(self):
        cfg = ExperimentConfig("random", 2, 2, seed=3, n_samples=SHORT, n_trials=3)
        a = harness.records_to_csv([harness.run_convergence(cfg)])
        b = harness.records_to_csv([harness.run_convergence(cfg)])
        assert a == b
        assert a.splitlines()[0] == "# isotns-sampler v0.1.0"

    def test_parallel_equals_serial(self):
        cfg = ExperimentConfig("w", 3, 2, seed=2, n_samples=SHORT, n_trials=4)
        par = ExperimentConfig("w", 3, 2, seed=2, n_samples=SHORT, n_trials=4, workers=2)
        assert harness.run_convergence(cfg).rows == harness.run_convergence(par).rows

    def test_nested_prefixes_match_direct_runs(self):
        big = harness.run_convergence(ExperimentConfig("w", 2, 2, seed=4, n_samples=(50, 500), n_trials=2))
        small = harness.run_convergence(ExperimentConfig("w", 2, 2, seed=4, n_samples=(50,), n_trials=2))
        assert [r for r in big.rows if r[3] == 50] == small.rows

    def test_w_harder_than_ghz(self):
        ghz = harness.run_convergence(ExperimentConfig("ghz", 4, 2, n_samples=SHORT, n_trials=10))
        w = harness.run_convergence(ExperimentConfig("w", 4, 2, n_samples=SHORT, n_trials=10))
        for a, b in zip(ghz.summary, w.summary):
            assert b["median_KL"] > a["median_KL"]

    def test_truncation_plateau(self):
        sched = (100, 1000, 10000, 100000)
        low = harness.run_convergence(ExperimentConfig("random", 3, 2, seed=1, n_samples=sched, n_trials=3))
        full = harness.run_convergence(ExperimentConfig("random", 3, 8, seed=1, n_samples=sched, n_trials=3))
        assert low.summary[-1]["median_KL"] > 10 * full.summary[-1]["median_KL"]
        assert max(r[6] for r in full.rows) < 1e-12
        assert min(r[6] for r in low.rows) > 0

    def test_infeasible_oracle(self):
        with pytest.raises(InfeasibleConfigError):
            harness.run_convergence(ExperimentConfig("random", 5, 2, n_samples=(10,), n_trials=1))

    def test_json(self):
        rec = harness.run_convergence(ExperimentConfig("ghz", 2, 2, n_samples=(10, 20), n_trials=2))
        doc = json.loads(harness.records_to_json([rec]))[0]
        assert doc["config"]["state"] == "ghz"
        assert "total" in doc["wall_times"] and len(doc["summary"]) == 2


class TestTopK:
    @pytest.mark.parametrize("state,L", [("ghz", 2), ("ghz", 16), ("w", 3), ("w", 8)])
    def test_exact_states(self, state, L):
        rec = harness.run_topk(ExperimentConfig(state, L, 2, mode="topk"))
        row = dict(zip(rec.columns, rec.rows[0]))
        assert row["KL"] < 1e-12
        assert row["coverage"] == pytest.approx(1.0, abs=1e-12)
        assert row["L1_error"] < 1e-12
        assert row["sum_row_errors"] == 0.0

    def test_random_chi_sweep(self):
        errs, rowerr = [], []
        for chi in range(1, 17):
            rec = harness.run_topk(ExperimentConfig("random", 3, chi, seed=0, k=10, mode="topk"))
            row = dict(zip(rec.columns, rec.rows[0]))
            assert 0 <= row["recall"] <= 1
            assert all(0 <= d["prob"] <= 1 for d in rec.details)
            errs.append(row["L1_error"])
            rowerr.append(row["sum_row_errors"])
        assert errs[-1] < 1e-10 and rowerr[-1] < 1e-12
        assert errs[0] > 10 * errs[-1]
        # trend: least-squares slope of error against chi is negative
        assert np.polyfit(np.arange(1, 17), errs, 1)[0] < 0

    def test_recall_nan_without_oracle(self):
        rec = harness.run_topk(ExperimentConfig("ghz", 8, 2, mode="topk"))
        assert math.isnan(rec.rows[0][7])

    def test_details(self):
        rec = harness.run_topk(ExperimentConfig("random", 3, 8, seed=0, k=10, mode="topk"))
        assert len(rec.details) == 10
        assert all(d["abs_error"] < 1e-10 for d in rec.details)


class TestBench:
    def test_ghz_slope(self):
        rec = harness.run_bench("ghz", [4, 8, 16], [2], n_samples=5)
        assert 1.5 <= rec.slopes[(2, None)] <= 2.5

    def test_chi_monotone(self):
        rec = harness.run_bench("random", [4], [2, 4, 8], repeats=7)
        times = [r[-1] for r in rec.rows]
        assert times == sorted(times)

    def test_k_monotone(self):
        rec = harness.run_bench("random", [4], [4], ks=[1, 4, 16], repeats=7)
        times = [r[-1] for r in rec.rows]
        assert times == sorted(times)

    def test_json(self):
        rec = harness.run_bench("ghz", [2, 3], [2], repeats=1, n_samples=1)
        doc = rec.to_json()
        assert len(doc["rows"]) == 2 and doc["slopes_in_L"][0]["chi"] == 2


def test_loglog_slope():
    x = np.array([10.0, 100.0, 1000.0])
    assert harness.loglog_slope(x, 3 / x) == pytest.approx(-1.0)
