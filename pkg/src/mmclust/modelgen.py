"""Build a family of candidate mixtures over a range of component counts.

Three generation methods:

* ``mul-em`` fits an independent mixture for every K from 1 to K_max.
* ``int-em`` fits once at K_max, then repeatedly deletes the component
  with the smallest weight, renormalises, and continues EM, yielding a
  chain of models down to K=1.
* ``em-hac`` fits once at K_max, then agglomerates components by
  symmetric KL divergence with complete linkage; merged entries are
  weighted barycenters and are scored without further EM.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .core import (
    CountDataset,
    EmConfig,
    FitResult,
    MixtureModel,
    em_fit,
    mixture_log_likelihood,
)
from .initialization import InitConfig, initialize

METHODS = ("mul-em", "int-em", "em-hac")

_ALIASES = {
    "mul-em": "mul-em",
    "mulem": "mul-em",
    "mul_em": "mul-em",
    "int-em": "int-em",
    "intem": "int-em",
    "int_em": "int-em",
    "em-hac": "em-hac",
    "emhac": "em-hac",
    "em_hac": "em-hac",
}


def normalize_method(name: str) -> str:
    key = name.strip().lower()
    if key not in _ALIASES:
        raise ValueError(
            f"unknown generation method {name!r}; "
            f"expected one of {', '.join(METHODS)}"
        )
    return _ALIASES[key]


def kl_divergence(p, q) -> float:
    """KL divergence between two strictly positive discrete distributions."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape or p.ndim != 1:
        raise ValueError(f"shape mismatch: {p.shape} vs {q.shape}")
    if np.any(p <= 0.0) or np.any(q <= 0.0):
        raise ValueError("distributions must be strictly positive")
    return float(np.dot(p, np.log(p) - np.log(q)))


def symmetric_kl_divergence(p, q) -> float:
    """Average of the two KL directions; symmetric and non-negative."""
    return 0.5 * (kl_divergence(p, q) + kl_divergence(q, p))


def pairwise_skld(components: np.ndarray) -> np.ndarray:
    """Symmetric KL divergence between every pair of component rows."""
    comps = np.asarray(components, dtype=float)
    log_c = np.log(comps)
    # KL(i, j) = sum_d c[i,d] * (log c[i,d] - log c[j,d])
    self_term = np.sum(comps * log_c, axis=1)
    cross = comps @ log_c.T
    kl = self_term[:, None] - cross
    out = 0.5 * (kl + kl.T)
    np.fill_diagonal(out, 0.0)
    return out


def merge_components(
    weights: np.ndarray, components: np.ndarray
) -> tuple[float, np.ndarray]:
    """Collapse components into one: weights add, the mean is the
    weight-proportional barycenter of the rows."""
    weights = np.asarray(weights, dtype=float)
    components = np.asarray(components, dtype=float)
    w = float(weights.sum())
    if w <= 0.0:
        raise ValueError("merged weight must be positive")
    mean = (weights[:, None] * components).sum(axis=0) / w
    return w, mean


def complete_linkage(dissim: np.ndarray, group_a, group_b) -> float:
    """Largest pairwise dissimilarity between two index groups."""
    a = np.asarray(group_a, dtype=int)
    b = np.asarray(group_b, dtype=int)
    return float(dissim[np.ix_(a, b)].max())


@dataclass(frozen=True, eq=False)
class MergeStep:
    """One agglomeration: which entry positions merged and what resulted.

    ``left`` and ``right`` are positions in the shrinking component list
    of the model the merge was applied to (left < right); ``members``
    are the original K_max component indices now pooled together.
    """

    left: int
    right: int
    members: tuple[int, ...]
    dissimilarity: float
    merged_weight: float
    merged_mean: np.ndarray


@dataclass(eq=False)
class CandidateModelSet:
    """Fits indexed by component count, as produced by one method.

    ``entries[k]`` holds the fit with k components.  ``failures`` maps a
    K that could not be produced to the error message; such K are absent
    from ``entries``.
    """

    entries: dict[int, FitResult]
    method: str
    n_samples: int
    total_elapsed: float
    merge_steps: tuple[MergeStep, ...] = ()
    failures: dict[int, str] = field(default_factory=dict)

    @property
    def max_components(self) -> int:
        return max(self.entries)

    def component_counts(self) -> list[int]:
        return sorted(self.entries)


def _check_k_max(data: CountDataset, k_max: int) -> None:
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    if k_max > data.n_samples:
        raise ValueError(f"k_max={k_max} exceeds {data.n_samples} samples")


def _per_k_seeds(seed: int, k_max: int) -> list[int]:
    return [int(c.generate_state(1)[0]) for c in np.random.SeedSequence(seed).spawn(k_max)]


def mul_em(
    data: CountDataset,
    k_max: int,
    init_config: InitConfig | None = None,
    em_config: EmConfig | None = None,
) -> CandidateModelSet:
    """Independent initialise-and-fit for every K in 1..k_max."""
    _check_k_max(data, k_max)
    if init_config is None:
        init_config = InitConfig()
    if em_config is None:
        em_config = EmConfig()
    start = time.perf_counter()
    entries: dict[int, FitResult] = {}
    failures: dict[int, str] = {}
    for k, k_seed in zip(range(1, k_max + 1), _per_k_seeds(init_config.seed, k_max)):
        try:
            init = initialize(
                data,
                k,
                replace(init_config, seed=k_seed),
                tolerance=em_config.tolerance,
                prob_floor=em_config.prob_floor,
            )
            entries[k] = em_fit(data, init, replace(em_config, seed=k_seed))
        except Exception as exc:  # record and keep going
            failures[k] = f"{type(exc).__name__}: {exc}"
    if not entries:
        raise RuntimeError("no candidate could be fitted")
    return CandidateModelSet(
        entries=entries,
        method="mul-em",
        n_samples=data.n_samples,
        total_elapsed=time.perf_counter() - start,
        failures=failures,
    )


def _annihilate_smallest(model: MixtureModel) -> MixtureModel:
    """Drop the lowest-weight component (ties to the lowest index) and
    renormalise the remaining weights."""
    j = int(np.argmin(model.weights))
    keep = np.ones(model.n_components, dtype=bool)
    keep[j] = False
    weights = model.weights[keep]
    return MixtureModel(
        weights / weights.sum(),
        model.components[keep],
        prob_floor=model.prob_floor,
    )


def int_em(
    data: CountDataset,
    k_max: int,
    init_config: InitConfig | None = None,
    em_config: EmConfig | None = None,
) -> CandidateModelSet:
    """One fit at K_max, then annihilate-and-continue down to K=1.

    After each deletion EM resumes from the surviving components, so
    every entry is a genuine EM fixed point (up to the iteration cap)
    rather than a truncated copy of its parent.
    """
    _check_k_max(data, k_max)
    if init_config is None:
        init_config = InitConfig()
    if em_config is None:
        em_config = EmConfig()
    start = time.perf_counter()
    init = initialize(
        data,
        k_max,
        init_config,
        tolerance=em_config.tolerance,
        prob_floor=em_config.prob_floor,
    )
    chain_seeds = _per_k_seeds(em_config.seed, k_max)
    entries: dict[int, FitResult] = {}
    fit = em_fit(data, init, replace(em_config, seed=chain_seeds[k_max - 1]))
    entries[k_max] = fit
    for k in range(k_max - 1, 0, -1):
        reduced = _annihilate_smallest(fit.model)
        fit = em_fit(data, reduced, replace(em_config, seed=chain_seeds[k - 1]))
        entries[k] = fit
    return CandidateModelSet(
        entries=entries,
        method="int-em",
        n_samples=data.n_samples,
        total_elapsed=time.perf_counter() - start,
    )


def em_hac(
    data: CountDataset,
    k_max: int,
    init_config: InitConfig | None = None,
    em_config: EmConfig | None = None,
) -> CandidateModelSet:
    """One fit at K_max, then agglomerative merging down to K=1.

    Dissimilarities are symmetric KL divergences between the original
    K_max components; cluster distance is complete linkage over those
    original rows.  Each merge adds the weights and takes the
    weight-proportional barycenter of the member rows.  Merged models
    are scored by log-likelihood directly, with no further EM, so all
    entries share the base fit's iteration count and convergence flag.
    """
    _check_k_max(data, k_max)
    if init_config is None:
        init_config = InitConfig()
    if em_config is None:
        em_config = EmConfig()
    start = time.perf_counter()
    init = initialize(
        data,
        k_max,
        init_config,
        tolerance=em_config.tolerance,
        prob_floor=em_config.prob_floor,
    )
    base = em_fit(data, init, em_config)
    entries: dict[int, FitResult] = {k_max: base}
    dissim = pairwise_skld(base.model.components)

    base_weights = base.model.weights
    base_components = base.model.components
    # Each cluster is the sorted tuple of original component indices it
    # contains; the list order (by smallest member) fixes tie-breaking.
    clusters: list[tuple[int, ...]] = [(i,) for i in range(k_max)]
    steps: list[MergeStep] = []
    model = base.model
    for k in range(k_max - 1, 0, -1):
        # Strict < keeps the first pair on ties; the cluster list is
        # ordered by smallest original member, so ties resolve to the
        # lexicographically lowest original indices.
        best = None
        for a in range(len(clusters)):
            for b in range(a + 1, len(clusters)):
                d = complete_linkage(dissim, clusters[a], clusters[b])
                if best is None or d < best[0]:
                    best = (d, a, b)
        d, a, b = best
        members = tuple(sorted(clusters[a] + clusters[b]))
        w, mean = merge_components(
            base_weights[list(members)], base_components[list(members)]
        )
        steps.append(
            MergeStep(
                left=a,
                right=b,
                members=members,
                dissimilarity=d,
                merged_weight=w,
                merged_mean=mean,
            )
        )
        clusters[a] = members
        del clusters[b]
        clusters.sort(key=min)

        weights = np.empty(len(clusters))
        components = np.empty((len(clusters), model.n_features))
        for i, group in enumerate(clusters):
            weights[i], components[i] = merge_components(
                base_weights[list(group)], base_components[list(group)]
            )
        model = MixtureModel(weights, components, prob_floor=model.prob_floor)
        entries[k] = FitResult(
            model=model,
            log_likelihood=mixture_log_likelihood(data, model),
            responsibilities=None,
            iterations=base.iterations,
            converged=base.converged,
            elapsed=0.0,
        )
    return CandidateModelSet(
        entries=entries,
        method="em-hac",
        n_samples=data.n_samples,
        total_elapsed=time.perf_counter() - start,
        merge_steps=tuple(steps),
    )


def generate_candidates(
    data: CountDataset,
    k_max: int,
    method: str = "em-hac",
    init_config: InitConfig | None = None,
    em_config: EmConfig | None = None,
) -> CandidateModelSet:
    """Dispatch to the generation method named by ``method``."""
    name = normalize_method(method)
    fn = {"mul-em": mul_em, "int-em": int_em, "em-hac": em_hac}[name]
    return fn(data, k_max, init_config, em_config)
