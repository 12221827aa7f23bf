"""Percentile / peak-throughput / aggregation checks against brute-force oracles."""

import random

import pytest
from hypothesis import given, strategies as st

from modelci.errors import EmptySamples
from modelci.profiler.stats import LatencySamples, ResourceSample, aggregate, peak_throughput, percentile

from oracles import (
    max_bruteforce,
    mean_bruteforce,
    peak_throughput_bruteforce,
    percentile_bruteforce,
)


class TestPercentile:
    def test_constant_samples(self):
        assert percentile([5, 5, 5, 5], 50) == 5

    def test_one_to_hundred_p95(self):
        # ceil(0.95 * 100) = 95 -> the 95th element
        samples = list(range(1, 101))
        assert percentile(samples, 95) == 95

    def test_three_samples_p50(self):
        # ceil(0.5 * 3) = 2 -> second element
        assert percentile([10, 20, 30], 50) == 20

    def test_unsorted_input(self):
        assert percentile([30, 10, 20], 50) == 20

    def test_empty_raises(self):
        with pytest.raises(EmptySamples):
            percentile([], 50)

    def test_out_of_range_p(self):
        with pytest.raises(ValueError):
            percentile([1], 0)
        with pytest.raises(ValueError):
            percentile([1], 101)

    def test_p100_is_max(self):
        assert percentile([3, 1, 2], 100) == 3

    def test_float_p_means_decimal_value(self):
        # 95.0 must behave exactly like 95, binary float representation aside
        samples = list(range(1, 101))
        assert percentile(samples, 95.0) == 95
        assert percentile(samples, 99.0) == 99

    def test_matches_oracle_randomized(self):
        rng = random.Random(0xC0FFEE)
        for _ in range(2000):
            n = rng.randint(1, 60)
            samples = [rng.randint(-1000, 1000) for _ in range(n)]
            p = rng.randint(1, 100)
            assert percentile(samples, p) == percentile_bruteforce(samples, p)

    @given(st.lists(st.integers(-10**6, 10**6), min_size=1, max_size=50),
           st.integers(1, 99), st.integers(2, 100))
    def test_monotone_in_p(self, samples, p_low, p_high):
        if p_low > p_high:
            p_low, p_high = p_high, p_low
        assert percentile(samples, p_low) <= percentile(samples, p_high)

    @given(st.lists(st.floats(0, 1e6, allow_nan=False), min_size=1, max_size=50),
           st.integers(1, 100))
    def test_membership(self, samples, p):
        assert percentile(samples, p) in samples


class TestPeakThroughput:
    def test_steady_rate(self):
        # completions every 10 ms for 2 s at batch 4 -> 100 req/s * 4
        ts = [10 * i for i in range(1, 201)]
        assert peak_throughput(ts, batch_size=4) == pytest.approx(400.0)

    def test_short_run_fallback(self):
        # a single completion at 500 ms, batch 1 -> 2 samples/s
        assert peak_throughput([500], batch_size=1) == 2.0

    def test_bursty_trace(self):
        # 100 completions in second one, 50 in second two -> peak 100/s
        ts = [5 + 10 * i for i in range(100)] + [1010 + 20 * i for i in range(50)]
        got = peak_throughput(ts, batch_size=1)
        assert got == peak_throughput_bruteforce(ts, 1)
        assert got == pytest.approx(100.0)

    def test_empty_raises(self):
        with pytest.raises(EmptySamples):
            peak_throughput([], 1)

    def test_consistency_lower_bound(self):
        # peak >= overall average rate
        rng = random.Random(3)
        for _ in range(50):
            n = rng.randint(1, 200)
            ts = sorted(rng.randint(1, 5000) for _ in range(n))
            batch = rng.randint(1, 8)
            total_rate = n * batch * 1000 / ts[-1]
            assert peak_throughput(ts, batch) >= total_rate - 1e-9

    def test_matches_oracle_randomized(self):
        rng = random.Random(0xBEEF)
        for _ in range(1500):
            n = rng.randint(1, 80)
            ts = [rng.randint(1, 4000) for _ in range(n)]
            batch = rng.randint(1, 16)
            window = rng.choice([250, 500, 1000, 2000])
            assert peak_throughput(ts, batch, window) == \
                peak_throughput_bruteforce(ts, batch, window)


class TestAggregate:
    @staticmethod
    def _samples(rng, n):
        lat = [rng.uniform(1, 50) for _ in range(n)]
        completions = sorted(rng.uniform(1, 3000) for _ in range(n))
        return LatencySamples(latencies_ms=lat, completions_ms=completions)

    def test_six_indicators_present_and_ordered(self):
        rng = random.Random(21)
        samples = self._samples(rng, 200)
        trace = [ResourceSample(t_ms=i * 100, cpu_fraction=0.5, memory_bytes=10_000)
                 for i in range(10)]
        result = aggregate(samples, trace, 8, variant_id="v1", device="cpu:0",
                           backend="mockserve", protocol="rest")
        for name in result.INDICATORS:
            assert getattr(result, name) is not None
        assert result.p50_latency_ms <= result.p95_latency_ms <= result.p99_latency_ms
        assert result.peak_throughput > 0
        assert not result.degraded

    def test_constant_trace_mean(self):
        samples = LatencySamples([10.0] * 20, [float(i + 1) * 10 for i in range(20)])
        trace = [ResourceSample(0, 0.5, 1000), ResourceSample(100, 0.5, 900)]
        result = aggregate(samples, trace, 1, variant_id="v", device="cpu:0",
                           backend="b", protocol="rest")
        assert result.utilization == pytest.approx(0.5)
        assert result.memory_bytes == 1000

    def test_stats_match_bruteforce_recomputation(self):
        rng = random.Random(99)
        lat = [rng.randint(1, 500) for _ in range(1000)]
        completions = [rng.randint(1, 20_000) for _ in range(1000)]
        samples = LatencySamples([float(x) for x in lat], [float(t) for t in completions])
        trace = [ResourceSample(i * 50, rng.uniform(0, 1), rng.randint(1, 10**9))
                 for i in range(100)]
        result = aggregate(samples, trace, 4, variant_id="v", device="cpu:0",
                           backend="b", protocol="rest")
        assert result.p50_latency_ms == percentile_bruteforce(lat, 50)
        assert result.p95_latency_ms == percentile_bruteforce(lat, 95)
        assert result.p99_latency_ms == percentile_bruteforce(lat, 99)
        assert result.peak_throughput == peak_throughput_bruteforce(completions, 4)
        assert result.memory_bytes == max_bruteforce(s.memory_bytes for s in trace)
        assert result.utilization == pytest.approx(
            mean_bruteforce([s.cpu_fraction for s in trace]))

    def test_empty_trace_degrades(self):
        samples = LatencySamples([5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 11.0, 12.0, 13.0, 14.0],
                                 [float(i + 1) * 10 for i in range(10)])
        result = aggregate(samples, [], 1, variant_id="v", device="cpu:0",
                           backend="b", protocol="rest")
        assert result.degraded
        assert result.memory_bytes is None
        assert result.utilization is None
        assert result.p50_latency_ms <= result.p99_latency_ms

    def test_no_successful_requests_raises(self):
        with pytest.raises(EmptySamples):
            aggregate(LatencySamples([], [], failed=10), [], 1, variant_id="v",
                      device="cpu:0", backend="b", protocol="rest")
