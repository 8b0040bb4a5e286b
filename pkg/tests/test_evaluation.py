"""Metric and benchmark-harness tests.

The adjusted Rand index is checked against two independent references:
a brute-force pair-counting loop written here, and scikit-learn's
implementation.
"""

import numpy as np
import pytest
from sklearn.metrics import adjusted_rand_score

from mmclust.evaluation import (
    MethodSpec,
    adjusted_rand_index,
    resolve_workers,
    run_benchmark,
    run_single,
    stability,
)
from mmclust.synth import SynthSpec, generate


def brute_force_ari(a, b):
    """Pair-counting ARI straight from the four pair categories."""
    n = len(a)
    s11 = s10 = s01 = s00 = 0
    for i in range(n):
        for j in range(i + 1, n):
            same_a = a[i] == a[j]
            same_b = b[i] == b[j]
            if same_a and same_b:
                s11 += 1
            elif same_a:
                s10 += 1
            elif same_b:
                s01 += 1
            else:
                s00 += 1
    denom = (s11 + s10) * (s10 + s00) + (s11 + s01) * (s01 + s00)
    if denom == 0:
        return 1.0
    return 2.0 * (s11 * s00 - s10 * s01) / denom


def set_partitions(n):
    """All set partitions of range(n) as label tuples (restricted
    growth strings)."""
    if n == 0:
        return
    labels = [0] * n

    def rec(i, max_label):
        if i == n:
            yield tuple(labels)
            return
        for lab in range(max_label + 2):
            labels[i] = lab
            yield from rec(i + 1, max(max_label, lab))

    yield from rec(1, 0)


class TestAri:
    def test_hand_value(self):
        assert adjusted_rand_index([1, 1, 2, 2], [1, 2, 1, 2]) == pytest.approx(-0.5)

    def test_identical_and_relabeled(self):
        assert adjusted_rand_index([1, 1, 2, 2], [1, 1, 2, 2]) == 1.0
        assert adjusted_rand_index([1, 1, 2, 2], [2, 2, 1, 1]) == 1.0
        assert adjusted_rand_index(["a", "a", "b", "b"], [5, 5, 9, 9]) == 1.0

    def test_degenerate_partitions(self):
        assert adjusted_rand_index([1, 2, 3], [4, 5, 6]) == 1.0
        assert adjusted_rand_index([1, 1, 1], [2, 2, 2]) == 1.0

    def test_exhaustive_small_n(self):
        for n in range(2, 6):
            parts = list(set_partitions(n))
            for a in parts:
                for b in parts:
                    got = adjusted_rand_index(a, b)
                    want = brute_force_ari(a, b)
                    assert got == pytest.approx(want, abs=1e-12), (a, b)

    def test_random_pairs_n50(self):
        rng = np.random.default_rng(12)
        for _ in range(100):
            ka = int(rng.integers(1, 8))
            kb = int(rng.integers(1, 8))
            a = rng.integers(0, ka, size=50)
            b = rng.integers(0, kb, size=50)
            got = adjusted_rand_index(a, b)
            assert got == pytest.approx(brute_force_ari(a, b), abs=1e-12)
            assert got == pytest.approx(adjusted_rand_score(a, b), abs=1e-10)

    def test_upper_bound_and_identity(self):
        rng = np.random.default_rng(3)
        for _ in range(30):
            a = rng.integers(0, 4, size=25)
            b = rng.integers(0, 4, size=25)
            assert adjusted_rand_index(a, b) <= 1.0 + 1e-15
        a = rng.integers(0, 4, size=25)
        assert adjusted_rand_index(a, a) == 1.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="differ"):
            adjusted_rand_index([1, 2], [1, 2, 3])

    def test_too_short(self):
        with pytest.raises(ValueError, match="at least 2"):
            adjusted_rand_index([1], [1])

    def test_no_overflow_large_n(self):
        # Balanced two-cluster partitions at n=200000 overflow int64
        # pair counts if computed carelessly.
        n = 200_000
        a = np.repeat([0, 1], n // 2)
        b = np.repeat([0, 1, 0, 1], n // 4)
        got = adjusted_rand_index(a, b)
        assert -1.0 <= got <= 1.0
        assert got == pytest.approx(adjusted_rand_score(a, b), abs=1e-10)


class TestStability:
    def test_hand_value(self):
        assert stability([0.0, 1.0]) == pytest.approx(0.7071067811865476)

    def test_constant_is_zero(self):
        assert stability([0.3, 0.3, 0.3]) == 0.0

    def test_permutation_invariant(self):
        assert stability([0.1, 0.5, 0.9]) == stability([0.9, 0.1, 0.5])

    def test_needs_two_values(self):
        with pytest.raises(ValueError):
            stability([0.5])


class TestResolveWorkers:
    def test_default_serial(self, monkeypatch):
        monkeypatch.delenv("MMCLUST_THREADS", raising=False)
        assert resolve_workers(None) == 1

    def test_explicit(self, monkeypatch):
        monkeypatch.delenv("MMCLUST_THREADS", raising=False)
        assert resolve_workers(3) == 3

    def test_zero_means_cpu_count(self, monkeypatch):
        monkeypatch.delenv("MMCLUST_THREADS", raising=False)
        import os

        assert resolve_workers(0) == (os.cpu_count() or 1)

    def test_env_caps(self, monkeypatch):
        import os

        monkeypatch.setenv("MMCLUST_THREADS", "2")
        assert resolve_workers(8) == 2
        monkeypatch.setenv("MMCLUST_THREADS", "0")
        assert resolve_workers(4) == min(4, os.cpu_count() or 1)

    def test_env_invalid(self, monkeypatch):
        monkeypatch.setenv("MMCLUST_THREADS", "lots")
        with pytest.raises(ValueError, match="MMCLUST_THREADS"):
            resolve_workers(2)


class TestMethodSpec:
    def test_normalizes_names(self):
        m = MethodSpec(init="SM_EM", generation="EMHAC", selection="L_METHOD")
        assert m.key == "sm-em/em-hac/l-method"

    def test_rejects_unknown(self):
        with pytest.raises(ValueError):
            MethodSpec(init="kmeans")


@pytest.fixture(scope="module")
def tiny_specs():
    return [SynthSpec(2, 6, 60, separation="ws", seed=3)]


@pytest.fixture(scope="module")
def fast_methods():
    return [
        MethodSpec(init="random", generation="em-hac", selection="bic"),
        MethodSpec(init="random", generation="mul-em", selection="bic"),
    ]


class TestRunSingle:
    def test_basic_outputs(self, tiny_specs):
        data = generate(tiny_specs[0]).dataset
        method = MethodSpec(init="random", generation="em-hac", selection="bic")
        selected_k, ari, elapsed = run_single(
            data, method, fit_seed=0, k_min=1, k_max=4, true_k=2
        )
        assert 1 <= selected_k <= 4
        assert -1.0 <= ari <= 1.0
        assert elapsed >= 0.0


class TestRunBenchmark:
    def test_report_structure(self, tiny_specs, fast_methods):
        report = run_benchmark(
            tiny_specs, fast_methods, repeats=3, seed=1, k_min=1, k_max=4
        )
        assert len(report.records) == 1 * 2 * 3
        assert len(report.aggregates) == 2
        for record in report.records:
            assert record.error is None
            assert record.true_k == 2
            assert -1.0 <= record.ari <= 1.0
            assert record.elapsed >= 0.0
        for agg in report.aggregates:
            assert agg.n_runs == 3
            assert agg.n_failures == 0
            assert 0.0 <= agg.correct_k_rate <= 1.0
            assert sum(agg.selected_counts.values()) == 3

    def test_seeds_shared_across_methods(self, tiny_specs, fast_methods):
        report = run_benchmark(
            tiny_specs, fast_methods, repeats=2, seed=5, k_min=1, k_max=4
        )
        by_method = {}
        for r in report.records:
            by_method.setdefault(r.method, []).append(r.seed)
        seed_lists = list(by_method.values())
        assert seed_lists[0] == seed_lists[1]

    def test_deterministic_modulo_timing(self, tiny_specs, fast_methods):
        kwargs = dict(repeats=2, seed=7, k_min=1, k_max=4)
        a = run_benchmark(tiny_specs, fast_methods, **kwargs)
        b = run_benchmark(tiny_specs, fast_methods, **kwargs)
        for ra, rb in zip(a.records, b.records):
            assert (ra.dataset_id, ra.method, ra.repeat, ra.seed) == (
                rb.dataset_id,
                rb.method,
                rb.repeat,
                rb.seed,
            )
            assert ra.selected_k == rb.selected_k
            assert ra.ari == rb.ari

    def test_parallel_matches_serial(self, tiny_specs, fast_methods):
        kwargs = dict(repeats=2, seed=2, k_min=1, k_max=4)
        serial = run_benchmark(tiny_specs, fast_methods, workers=None, **kwargs)
        parallel = run_benchmark(tiny_specs, fast_methods, workers=2, **kwargs)
        for rs, rp in zip(serial.records, parallel.records):
            assert rs.selected_k == rp.selected_k
            assert rs.ari == rp.ari

    def test_aggregate_math(self, tiny_specs, fast_methods):
        report = run_benchmark(
            tiny_specs, fast_methods[:1], repeats=4, seed=3, k_min=1, k_max=4
        )
        agg = report.aggregates[0]
        aris = [r.ari for r in report.records]
        assert agg.ari_mean == pytest.approx(np.mean(aris))
        assert agg.ari_std == pytest.approx(np.std(aris, ddof=1))
        rate = sum(r.selected_k == r.true_k for r in report.records) / 4
        assert agg.correct_k_rate == pytest.approx(rate)

    def test_input_validation(self, tiny_specs, fast_methods):
        with pytest.raises(ValueError):
            run_benchmark(tiny_specs, fast_methods, repeats=0)
        with pytest.raises(ValueError):
            run_benchmark([], fast_methods)
        with pytest.raises(ValueError):
            run_benchmark(tiny_specs, fast_methods, dataset_ids=["a", "b"])

    def test_method_tuples_accepted(self, tiny_specs):
        report = run_benchmark(
            tiny_specs,
            [("random", "em-hac", "bic")],
            repeats=1,
            seed=0,
            k_min=1,
            k_max=3,
        )
        assert report.records[0].method == "random/em-hac/bic"
