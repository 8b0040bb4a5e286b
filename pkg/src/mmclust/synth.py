"""Synthetic count datasets drawn from known multinomial mixtures.

A generating model is sampled (Dirichlet component rows, uniform
weights, one multinomial order per component), classified as
well-separated or not by the smallest pairwise symmetric KL divergence
between its rows, and resampled until it matches the requested
separation regime.  Rows are then drawn component-first, so every
observation carries its true label.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import DEFAULT_PROB_FLOOR, CountDataset, MixtureModel
from .modelgen import pairwise_skld

SEPARATIONS = ("ws", "nws")
DEFAULT_THRESHOLD = 1.0
DEFAULT_MAX_ATTEMPTS = 1000

# Dirichlet concentration defaults per regime: sparse rows separate
# easily, flat rows tend to overlap.
DEFAULT_ALPHA = {"ws": 0.1, "nws": 1.0}


class SeparationRejectionError(RuntimeError):
    """Raised when no sampled model matches the separation regime."""

    def __init__(self, separation: str, attempts: int, best: float):
        self.separation = separation
        self.attempts = attempts
        self.best_min_skld = best
        super().__init__(
            f"no {separation!r} model found in {attempts} attempts "
            f"(closest min pairwise divergence: {best:.4g}); adjust "
            "dirichlet_alpha or the separation threshold"
        )


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for one synthetic dataset.

    ``dirichlet_alpha`` and ``order_range`` default per separation
    regime; ``order_range`` bounds the per-component multinomial order
    and defaults to [ceil(0.5 D), floor(1.5 D)].
    """

    n_clusters: int
    n_features: int
    n_samples: int
    separation: str = "ws"
    dirichlet_alpha: float | None = None
    order_range: tuple[int, int] | None = None
    separation_threshold: float = DEFAULT_THRESHOLD
    seed: int = 0

    def __post_init__(self):
        if self.n_clusters < 1:
            raise ValueError("n_clusters must be >= 1")
        if self.n_features < 2:
            raise ValueError("n_features must be >= 2")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if self.separation not in SEPARATIONS:
            raise ValueError(
                f"separation must be one of {SEPARATIONS}, got {self.separation!r}"
            )
        if self.dirichlet_alpha is not None and self.dirichlet_alpha <= 0.0:
            raise ValueError("dirichlet_alpha must be positive")
        if self.separation_threshold <= 0.0:
            raise ValueError("separation_threshold must be positive")
        if self.order_range is not None:
            lo, hi = self.order_range
            if lo < 1 or hi < lo:
                raise ValueError(f"invalid order_range {self.order_range}")

    @property
    def resolved_alpha(self) -> float:
        if self.dirichlet_alpha is not None:
            return self.dirichlet_alpha
        return DEFAULT_ALPHA[self.separation]

    @property
    def resolved_order_range(self) -> tuple[int, int]:
        if self.order_range is not None:
            return self.order_range
        return (math.ceil(0.5 * self.n_features), math.floor(1.5 * self.n_features))


def min_pairwise_skld(model: MixtureModel) -> float:
    """Smallest symmetric KL divergence between distinct components;
    infinity for a single component."""
    k = model.n_components
    if k < 2:
        return math.inf
    d = pairwise_skld(model.components)
    return float(d[np.triu_indices(k, k=1)].min())


def classify_separation(
    model: MixtureModel, threshold: float = DEFAULT_THRESHOLD
) -> str:
    """``"ws"`` when every component pair diverges by at least
    ``threshold``, else ``"nws"``."""
    return "ws" if min_pairwise_skld(model) >= threshold else "nws"


def sample_generating_model(
    spec: SynthSpec,
    rng: np.random.Generator,
    max_attempts: int = DEFAULT_MAX_ATTEMPTS,
) -> tuple[MixtureModel, np.ndarray, int]:
    """Rejection-sample a model in the requested separation regime.

    Returns the model, the per-component multinomial orders, and the
    number of attempts used.
    """
    lo, hi = spec.resolved_order_range
    alpha = np.full(spec.n_features, spec.resolved_alpha)
    weights = np.full(spec.n_clusters, 1.0 / spec.n_clusters)
    want_ws = spec.separation == "ws"
    best = -math.inf if want_ws else math.inf
    for attempt in range(1, max_attempts + 1):
        components = rng.dirichlet(alpha, size=spec.n_clusters)
        orders = rng.integers(lo, hi + 1, size=spec.n_clusters)
        model = MixtureModel(weights, components, prob_floor=DEFAULT_PROB_FLOOR)
        gap = min_pairwise_skld(model)
        if (gap >= spec.separation_threshold) == want_ws:
            return model, orders, attempt
        best = max(best, gap) if want_ws else min(best, gap)
    raise SeparationRejectionError(spec.separation, max_attempts, best)


def sample_dataset(
    model: MixtureModel,
    orders,
    n_samples: int,
    rng: np.random.Generator,
) -> CountDataset:
    """Draw labelled rows from a known model.

    Each row picks a component from the mixing weights, then draws a
    multinomial of that component's order.  Labels are 1-based.
    """
    orders = np.asarray(orders, dtype=int)
    if orders.shape != (model.n_components,):
        raise ValueError(
            f"need one order per component, got shape {orders.shape}"
        )
    if np.any(orders < 1):
        raise ValueError("orders must be >= 1")
    picks = rng.choice(model.n_components, size=n_samples, p=model.weights)
    counts = np.empty((n_samples, model.n_features), dtype=np.int64)
    for i, k in enumerate(picks):
        counts[i] = rng.multinomial(orders[k], model.components[k])
    return CountDataset(counts=counts, labels=picks + 1)


@dataclass(frozen=True, eq=False)
class SynthResult:
    """A generated dataset together with its ground truth."""

    dataset: CountDataset
    model: MixtureModel
    orders: np.ndarray
    min_skld: float
    attempts: int
    spec: SynthSpec


def generate(spec: SynthSpec, max_attempts: int = DEFAULT_MAX_ATTEMPTS) -> SynthResult:
    """Sample a generating model per ``spec`` and draw a dataset from it.

    Model search and row sampling use independent streams derived from
    ``spec.seed``, so the same seed always yields the same dataset.
    """
    model_seq, data_seq = np.random.SeedSequence(spec.seed).spawn(2)
    model, orders, attempts = sample_generating_model(
        spec, np.random.default_rng(model_seq), max_attempts
    )
    dataset = sample_dataset(
        model, orders, spec.n_samples, np.random.default_rng(data_seq)
    )
    return SynthResult(
        dataset=dataset,
        model=model,
        orders=orders,
        min_skld=min_pairwise_skld(model),
        attempts=attempts,
        spec=spec,
    )
