import math

import numpy as np
import pytest

from upshm.workload import (Task, TaskTrace, TraceFormatError, WorkloadConfig, generate_trace, load_trace,
                            make_rng, metadata_path, poisson_pmf, sample_interarrival, sample_service, save_trace)


def poisson_by_recurrence(lam_t, kmax):
    # p_0 = e^{-m}, p_k = p_{k-1} * m / k
    p = [math.exp(-lam_t)]
    for k in range(1, kmax + 1):
        p.append(p[-1] * lam_t / k)
    return p


class TestPoissonPmf:
    def test_k0(self):
        assert poisson_pmf(0, 1.0, 1.0) == pytest.approx(math.exp(-1), abs=1e-15)

    def test_unit_mean_k1(self):
        assert poisson_pmf(1, 2.0, 0.5) == pytest.approx(0.36787944117144233, abs=1e-15)

    def test_normalizes(self):
        assert math.fsum(poisson_pmf(k, 30.0, 1.0) for k in range(201)) == pytest.approx(1.0, abs=1e-9)

    @pytest.mark.parametrize("lam_t", [0.5, 7.0, 30.0, 60.0])
    def test_matches_recurrence(self, lam_t):
        ref = poisson_by_recurrence(lam_t, 150)
        got = [poisson_pmf(k, lam_t, 1.0) for k in range(151)]
        np.testing.assert_allclose(got, ref, rtol=1e-11, atol=1e-300)

    def test_large_k_no_overflow(self):
        p = poisson_pmf(5000, 60.0, 1.0)
        assert math.isfinite(p) and 0.0 <= p < 1e-300

    @pytest.mark.parametrize("lam,t", [(0.0, 1.0), (-1.0, 1.0), (1.0, 0.0)])
    def test_domain(self, lam, t):
        with pytest.raises(ValueError):
            poisson_pmf(1, lam, t)


class TestSampling:
    def test_interarrival_mean(self):
        rng = make_rng(12345)
        draws = [sample_interarrival(10.0, rng) for _ in range(1_000_000)]
        assert min(draws) > 0
        assert math.fsum(draws) / len(draws) == pytest.approx(0.1, abs=0.001)

    def test_service_mean(self):
        rng = make_rng(54321)
        draws = [sample_service(20.0, rng) for _ in range(1_000_000)]
        assert min(draws) > 0
        assert math.fsum(draws) / len(draws) == pytest.approx(0.05, abs=0.0005)

    def test_mean_within_three_sigma(self):
        # exponential: sd = mean, so the standard error is mean / sqrt(n)
        n, lam = 200_000, 37.0
        rng = make_rng(9)
        mean = math.fsum(sample_interarrival(lam, rng) for _ in range(n)) / n
        assert abs(mean - 1 / lam) < 3 * (1 / lam) / math.sqrt(n)

    def test_seed_determinism(self):
        r1, r2 = make_rng(3), make_rng(3)
        assert [sample_interarrival(10.0, r1) for _ in range(50)] == [sample_interarrival(10.0, r2) for _ in range(50)]

    @pytest.mark.parametrize("sampler", [sample_interarrival, sample_service])
    def test_rate_domain(self, sampler):
        with pytest.raises(ValueError):
            sampler(0.0, make_rng(1))


class TestGenerateTrace:
    def test_default_shape(self):
        trace = generate_trace(WorkloadConfig(rng_seed=1))
        trace.validate()
        assert trace.num_intervals == 100
        assert all(10 <= iv.lam <= 60 and 10 <= iv.mu <= 40 for iv in trace.intervals)
        assert all(0 <= t.priority <= 1 and 0 <= t.demand <= 1 for t in trace.tasks)

    def test_total_count_range_over_seeds(self):
        counts = [generate_trace(WorkloadConfig(rng_seed=s)).num_tasks for s in range(100)]
        assert all(2000 <= c <= 5500 for c in counts)
        # E[E] = W * E[lambda] * d = 3500; sd of the seed mean is ~ sqrt(Var)/10
        assert 3300 < np.mean(counts) < 3700

    def test_tasks_sorted_within_intervals(self):
        trace = generate_trace(WorkloadConfig(rng_seed=4))
        for j, group in enumerate(trace.tasks_by_interval()):
            times = [t.arrival_time for t in group]
            assert times == sorted(times)
            assert all(j <= a < j + 1 for a in times)

    def test_degenerate_rate_gives_near_empty_trace(self):
        trace = generate_trace(WorkloadConfig(lambda_range=(0.001, 0.001), rng_seed=2))
        assert trace.num_tasks <= 3

    def test_one_interval(self):
        trace = generate_trace(WorkloadConfig(num_intervals=1, rng_seed=2))
        assert trace.num_intervals == 1

    def test_interval_duration_scales_counts(self):
        short = generate_trace(WorkloadConfig(interval_duration=0.1, rng_seed=5))
        assert short.num_tasks < 700
        assert short.horizon == pytest.approx(10.0)

    def test_same_seed_identical(self, tmp_path):
        a, b = (generate_trace(WorkloadConfig(rng_seed=77)) for _ in range(2))
        assert a == b
        save_trace(a, tmp_path / "a.csv")
        save_trace(b, tmp_path / "b.csv")
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
        assert (tmp_path / "a.meta.json").read_bytes() == (tmp_path / "b.meta.json").read_bytes()

    def test_different_seeds_differ(self):
        assert generate_trace(WorkloadConfig(rng_seed=1)) != generate_trace(WorkloadConfig(rng_seed=2))

    @pytest.mark.parametrize("kwargs", [dict(num_intervals=0), dict(lambda_range=(0, 5)),
                                        dict(mu_range=(5, 1)), dict(interval_duration=0)])
    def test_config_validation(self, kwargs):
        with pytest.raises(ValueError):
            WorkloadConfig(**kwargs)


class TestPersistence:
    def test_round_trip_small(self, tmp_path, trace_factory):
        trace = trace_factory([(0.1, 0.5, 0.2, 0.9), (0.2, 0.01, 1.0, 0.0), (0.7, 3.25, 0.5, 0.5)])
        save_trace(trace, tmp_path / "t.csv")
        assert load_trace(tmp_path / "t.csv") == trace

    def test_round_trip_generated(self, tmp_path):
        trace = generate_trace(WorkloadConfig(rng_seed=11))
        save_trace(trace, tmp_path / "t.csv")
        assert load_trace(tmp_path / "t.csv") == trace

    def test_row_count_matches_metadata(self, tmp_path):
        import json
        trace = generate_trace(WorkloadConfig(rng_seed=3))
        save_trace(trace, tmp_path / "t.csv")
        rows = (tmp_path / "t.csv").read_text().splitlines()
        meta = json.loads(metadata_path(tmp_path / "t.csv").read_text())
        assert len(rows) - 1 == meta["num_tasks"] == trace.num_tasks
        assert meta["num_intervals"] == 100
        assert rows[0] == "id,service_time,arrival_time,priority,demand"

    def _write_pair(self, tmp_path, body, trace_factory):
        save_trace(trace_factory([(0.1, 0.5, 0.2, 0.9)]), tmp_path / "t.csv")
        (tmp_path / "t.csv").write_text(body)
        return tmp_path / "t.csv"

    def test_four_columns_names_line(self, tmp_path, trace_factory):
        path = self._write_pair(tmp_path, "id,service_time,arrival_time,priority,demand\n0,0.5,0.1,0.2\n",
                                trace_factory)
        with pytest.raises(TraceFormatError) as err:
            load_trace(path)
        assert err.value.line == 2
        assert ":2:" in str(err.value)

    @pytest.mark.parametrize("row", ["0,abc,0.1,0.2,0.3", "0,0.5,0.1,1.2,0.3", "0,0.5,0.1,0.2,-0.1",
                                     "x,0.5,0.1,0.2,0.3", "0,0,0.1,0.2,0.3"])
    def test_bad_rows(self, tmp_path, trace_factory, row):
        path = self._write_pair(tmp_path, f"id,service_time,arrival_time,priority,demand\n{row}\n", trace_factory)
        with pytest.raises(TraceFormatError) as err:
            load_trace(path)
        assert err.value.line == 2

    def test_missing_column_in_header(self, tmp_path, trace_factory):
        path = self._write_pair(tmp_path, "id,service_time,arrival_time,priority\n0,0.5,0.1,0.2\n", trace_factory)
        with pytest.raises(TraceFormatError) as err:
            load_trace(path)
        assert err.value.line == 1

    def test_missing_sidecar(self, tmp_path):
        (tmp_path / "x.csv").write_text("id,service_time,arrival_time,priority,demand\n")
        with pytest.raises(TraceFormatError, match="sidecar"):
            load_trace(tmp_path / "x.csv")


def test_task_invariants():
    with pytest.raises(ValueError):
        Task(0, 0.0, 0.0, 0.5, 0.5)
    with pytest.raises(ValueError):
        Task(0, -1.0, 1.0, 0.5, 0.5)
    with pytest.raises(ValueError):
        Task(0, 0.0, 1.0, 1.5, 0.5)


def test_validate_rejects_gapped_ids(trace_factory):
    trace = trace_factory([(0.1, 0.5, 0.2, 0.9)])
    bad = TaskTrace(trace.intervals, (Task(3, 0.1, 0.5, 0.2, 0.9),), 1.0)
    with pytest.raises(ValueError, match="dense"):
        bad.validate()
