"""Candidate-generation tests.

The agglomeration path is verified against a tiny brute-force
re-implementation in this file (pure python sets and math.log), and the
divergence/merge primitives against hand-computed values.
"""

import math

import numpy as np
import pytest

from mmclust.core import CountDataset, EmConfig, MixtureModel, mixture_log_likelihood
from mmclust.initialization import InitConfig
from mmclust.modelgen import (
    CandidateModelSet,
    _annihilate_smallest,
    complete_linkage,
    em_hac,
    generate_candidates,
    int_em,
    kl_divergence,
    merge_components,
    mul_em,
    normalize_method,
    pairwise_skld,
    symmetric_kl_divergence,
)


def py_kl(p, q):
    return sum(pi * math.log(pi / qi) for pi, qi in zip(p, q))


def py_skld(p, q):
    return 0.5 * (py_kl(p, q) + py_kl(q, p))


@pytest.fixture(scope="module")
def data():
    rng = np.random.default_rng(1)
    comps = rng.dirichlet(np.ones(6) * 0.2, size=3)
    labels = rng.integers(0, 3, size=80)
    counts = np.stack([rng.multinomial(9, comps[z]) for z in labels])
    return CountDataset(counts=counts)


class TestDivergence:
    def test_hand_value(self):
        got = symmetric_kl_divergence([0.5, 0.5], [0.25, 0.75])
        assert got == pytest.approx(0.1373, abs=1e-4)

    def test_matches_pure_python(self):
        rng = np.random.default_rng(2)
        for _ in range(25):
            d = rng.integers(2, 7)
            p = np.maximum(rng.dirichlet(np.ones(d)), 1e-10)
            q = np.maximum(rng.dirichlet(np.ones(d)), 1e-10)
            p, q = p / p.sum(), q / q.sum()
            assert kl_divergence(p, q) == pytest.approx(py_kl(p, q), rel=1e-10)
            assert symmetric_kl_divergence(p, q) == pytest.approx(
                py_skld(p, q), rel=1e-10
            )

    def test_symmetry_nonnegativity_identity(self):
        rng = np.random.default_rng(3)
        for _ in range(25):
            p = np.maximum(rng.dirichlet(np.ones(5)), 1e-10)
            q = np.maximum(rng.dirichlet(np.ones(5)), 1e-10)
            p, q = p / p.sum(), q / q.sum()
            s_pq = symmetric_kl_divergence(p, q)
            s_qp = symmetric_kl_divergence(q, p)
            assert s_pq == pytest.approx(s_qp, rel=1e-12)
            assert s_pq >= 0.0
            assert symmetric_kl_divergence(p, p) == 0.0

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError, match="positive"):
            kl_divergence([0.0, 1.0], [0.5, 0.5])

    def test_rejects_shape_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            kl_divergence([0.5, 0.5], [0.2, 0.3, 0.5])

    def test_pairwise_matches_scalar(self):
        rng = np.random.default_rng(4)
        comps = np.maximum(rng.dirichlet(np.ones(5), size=4), 1e-10)
        comps = comps / comps.sum(axis=1, keepdims=True)
        mat = pairwise_skld(comps)
        assert mat.shape == (4, 4)
        np.testing.assert_allclose(mat, mat.T, atol=1e-12)
        np.testing.assert_allclose(np.diag(mat), 0.0, atol=1e-12)
        for i in range(4):
            for j in range(4):
                assert mat[i, j] == pytest.approx(
                    py_skld(comps[i], comps[j]), abs=1e-10
                )


class TestMerge:
    def test_hand_value(self):
        w, mean = merge_components(
            np.array([0.2, 0.3]), np.array([[0.9, 0.1], [0.1, 0.9]])
        )
        assert w == pytest.approx(0.5, abs=1e-12)
        np.testing.assert_allclose(mean, [0.42, 0.58], atol=1e-12)

    def test_conserves_weight_and_barycenter(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            k = rng.integers(2, 6)
            d = rng.integers(2, 8)
            weights = rng.dirichlet(np.ones(k))
            comps = rng.dirichlet(np.ones(d), size=k)
            w, mean = merge_components(weights, comps)
            assert w == pytest.approx(weights.sum(), abs=1e-12)
            np.testing.assert_allclose(
                w * mean, (weights[:, None] * comps).sum(axis=0), atol=1e-12
            )
            np.testing.assert_allclose(mean.sum(), 1.0, atol=1e-10)

    def test_rejects_zero_weight(self):
        with pytest.raises(ValueError):
            merge_components(np.zeros(2), np.full((2, 2), 0.5))


class TestCompleteLinkage:
    def test_hand_value(self):
        dissim = np.array([[0.0, 0.1, 0.4], [0.1, 0.0, 0.5], [0.4, 0.5, 0.0]])
        assert complete_linkage(dissim, [0, 1], [2]) == 0.5
        assert complete_linkage(dissim, [0], [1]) == pytest.approx(0.1)


class TestMulEm:
    def test_all_counts_present(self, data):
        cands = mul_em(data, 5, InitConfig(strategy="random", seed=0), EmConfig(seed=0))
        assert cands.component_counts() == [1, 2, 3, 4, 5]
        assert cands.method == "mul-em"
        assert not cands.failures
        for k, fit in cands.entries.items():
            assert fit.model.n_components == k
            assert fit.responsibilities is not None

    def test_deterministic(self, data):
        kwargs = dict(
            init_config=InitConfig(strategy="random", seed=3),
            em_config=EmConfig(seed=3),
        )
        a = mul_em(data, 4, **kwargs)
        b = mul_em(data, 4, **kwargs)
        for k in a.entries:
            assert a.entries[k].log_likelihood == b.entries[k].log_likelihood

    def test_k_max_validation(self, data):
        with pytest.raises(ValueError):
            mul_em(data, 0)
        with pytest.raises(ValueError, match="exceeds"):
            mul_em(data, data.n_samples + 1)

    def test_single_entry(self, data):
        cands = mul_em(data, 1)
        assert cands.component_counts() == [1]


class TestIntEm:
    def test_chain_structure(self, data):
        cands = int_em(data, 5, InitConfig(strategy="random", seed=1), EmConfig(seed=1))
        assert cands.component_counts() == [1, 2, 3, 4, 5]
        assert cands.method == "int-em"
        for k, fit in cands.entries.items():
            assert fit.model.n_components == k
            assert fit.responsibilities is not None
            np.testing.assert_allclose(fit.model.weights.sum(), 1.0, atol=1e-10)

    def test_annihilation_drops_min_weight(self):
        model = MixtureModel(
            weights=[0.6, 0.3, 0.1],
            components=[[0.8, 0.2], [0.5, 0.5], [0.2, 0.8]],
        )
        reduced = _annihilate_smallest(model)
        np.testing.assert_allclose(reduced.weights, [2 / 3, 1 / 3], atol=1e-12)
        np.testing.assert_allclose(
            reduced.components, model.components[:2], atol=1e-12
        )

    def test_annihilation_tie_drops_lowest_index(self):
        model = MixtureModel(
            weights=[0.25, 0.25, 0.5],
            components=[[0.8, 0.2], [0.5, 0.5], [0.2, 0.8]],
        )
        reduced = _annihilate_smallest(model)
        np.testing.assert_allclose(
            reduced.components, model.components[1:], atol=1e-12
        )

    def test_deterministic(self, data):
        kwargs = dict(
            init_config=InitConfig(strategy="random", seed=2),
            em_config=EmConfig(seed=2),
        )
        a = int_em(data, 4, **kwargs)
        b = int_em(data, 4, **kwargs)
        for k in a.entries:
            assert a.entries[k].log_likelihood == b.entries[k].log_likelihood


def brute_force_hac(dissim, k_max):
    """Reference agglomeration: sets of original indices, complete
    linkage on the original matrix, ties by lexicographic smallest."""
    clusters = [frozenset([i]) for i in range(k_max)]
    sequence = []
    while len(clusters) > 1:
        best = None
        for a in sorted(clusters, key=min):
            for b in sorted(clusters, key=min):
                if min(a) >= min(b):
                    continue
                d = max(dissim[i][j] for i in a for j in b)
                key = (d, min(a), min(b))
                if best is None or key < best[0]:
                    best = (key, a, b)
        (d, _, _), a, b = best
        clusters.remove(a)
        clusters.remove(b)
        clusters.append(a | b)
        sequence.append((frozenset(a | b), d))
    return sequence


class TestEmHac:
    def test_structure(self, data):
        cands = em_hac(data, 5, InitConfig(strategy="random", seed=7), EmConfig(seed=7))
        assert cands.component_counts() == [1, 2, 3, 4, 5]
        assert cands.method == "em-hac"
        assert len(cands.merge_steps) == 4
        base = cands.entries[5]
        assert base.responsibilities is not None
        for k in range(1, 5):
            fit = cands.entries[k]
            assert fit.model.n_components == k
            assert fit.responsibilities is None
            assert fit.iterations == base.iterations
            assert fit.converged == base.converged

    def test_k1_is_global_barycenter(self, data):
        cands = em_hac(data, 4, InitConfig(strategy="random", seed=3), EmConfig(seed=3))
        base = cands.entries[4].model
        bary = (base.weights[:, None] * base.components).sum(axis=0)
        got = cands.entries[1].model
        np.testing.assert_allclose(got.weights, [1.0], atol=1e-12)
        np.testing.assert_allclose(got.components[0], bary, atol=1e-9)

    def test_merge_sequence_matches_reference(self, data):
        cands = em_hac(data, 5, InitConfig(strategy="random", seed=9), EmConfig(seed=9))
        dissim = pairwise_skld(cands.entries[5].model.components)
        want = brute_force_hac(dissim.tolist(), 5)
        got = [
            (frozenset(step.members), step.dissimilarity)
            for step in cands.merge_steps
        ]
        # Reference tracks full membership after each merge; ours logs the
        # pooled original indices per step, which must match in order.
        assert [m for m, _ in got] == [m for m, _ in want]
        for (_, d_got), (_, d_want) in zip(got, want):
            assert d_got == pytest.approx(d_want, rel=1e-12)

    def test_merge_dissimilarities_non_decreasing(self, data):
        cands = em_hac(data, 5, InitConfig(strategy="random", seed=11), EmConfig(seed=11))
        ds = [step.dissimilarity for step in cands.merge_steps]
        assert all(b >= a - 1e-12 for a, b in zip(ds, ds[1:]))

    def test_weights_conserved_along_chain(self, data):
        cands = em_hac(data, 5, InitConfig(strategy="random", seed=13), EmConfig(seed=13))
        for k, fit in cands.entries.items():
            np.testing.assert_allclose(fit.model.weights.sum(), 1.0, atol=1e-10)

    def test_merged_llh_evaluated_not_refit(self, data):
        cands = em_hac(data, 4, InitConfig(strategy="random", seed=5), EmConfig(seed=5))
        for k in range(1, 4):
            fit = cands.entries[k]
            want = mixture_log_likelihood(data, fit.model)
            assert fit.log_likelihood == pytest.approx(want, abs=1e-10)

    def test_single_entry(self, data):
        cands = em_hac(data, 1)
        assert cands.component_counts() == [1]
        assert cands.merge_steps == ()


class TestDispatch:
    def test_aliases(self):
        assert normalize_method("EM_HAC") == "em-hac"
        assert normalize_method("mulem") == "mul-em"
        with pytest.raises(ValueError, match="unknown"):
            normalize_method("vbem")

    def test_generate_candidates_routes(self, data):
        for method in ("mul-em", "int-em", "em-hac"):
            cands = generate_candidates(
                data, 3, method, InitConfig(strategy="random", seed=1), EmConfig(seed=1)
            )
            assert isinstance(cands, CandidateModelSet)
            assert cands.method == method
            assert cands.component_counts() == [1, 2, 3]
            assert cands.total_elapsed >= 0.0
            assert cands.n_samples == data.n_samples
