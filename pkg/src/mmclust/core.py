"""Core types and EM estimation for mixtures of multinomials.

A mixture of K multinomial components over D categories is parameterised
by mixing weights ``pi`` (a point on the K-simplex) and a row-stochastic
K x D matrix of category probabilities.  Observations are non-negative
integer count vectors; each row may have its own total count, so the
model is a mixture of multinomials of per-row order.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, logsumexp

DEFAULT_PROB_FLOOR = 1e-10
DEFAULT_TOLERANCE = 1e-5
DEFAULT_MAX_ITERATIONS = 100

# Mixing weights and probability rows are accepted as normalised when they
# sum to 1 within this slack; anything worse is a caller bug.
_SUM_TOL = 1e-6


class DimensionMismatchError(ValueError):
    """Raised when data and model disagree on the number of categories."""


def as_count_matrix(counts) -> np.ndarray:
    """Validate and convert count data to a 2-D int64 array.

    Accepts anything array-like holding non-negative integers (float
    input is fine when every value is integral).  Raises ``ValueError``
    on negative, fractional, or non-finite entries.
    """
    arr = np.asarray(counts)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise ValueError(f"count data must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"count data must be non-empty, got shape {arr.shape}")
    if arr.dtype.kind == "f":
        if not np.all(np.isfinite(arr)):
            raise ValueError("count data contains non-finite values")
        if not np.all(arr == np.floor(arr)):
            raise ValueError("count data contains fractional values")
        arr = arr.astype(np.int64)
    elif arr.dtype.kind in "iu":
        arr = arr.astype(np.int64)
    else:
        raise ValueError(f"count data has non-numeric dtype {arr.dtype}")
    if np.any(arr < 0):
        raise ValueError("count data contains negative values")
    return arr


def floor_probabilities(probs: np.ndarray, floor: float) -> np.ndarray:
    """Clip probabilities from below and renormalise rows to sum to 1."""
    clipped = np.maximum(np.asarray(probs, dtype=float), floor)
    if clipped.ndim == 1:
        return clipped / clipped.sum()
    return clipped / clipped.sum(axis=1, keepdims=True)


@dataclass(frozen=True, eq=False)
class CountDataset:
    """Immutable bundle of a count matrix and optional reference labels.

    Parameters
    ----------
    counts : array-like of shape (n_samples, n_features)
        Non-negative integer counts.
    labels : array-like of shape (n_samples,), optional
        Reference cluster labels, one per row.
    """

    counts: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        counts = as_count_matrix(self.counts)
        counts.flags.writeable = False
        object.__setattr__(self, "counts", counts)
        if self.labels is not None:
            labels = np.asarray(self.labels)
            if labels.shape != (counts.shape[0],):
                raise ValueError(
                    f"labels shape {labels.shape} does not match "
                    f"{counts.shape[0]} samples"
                )
            labels = labels.copy()
            labels.flags.writeable = False
            object.__setattr__(self, "labels", labels)

    @property
    def n_samples(self) -> int:
        return self.counts.shape[0]

    @property
    def n_features(self) -> int:
        return self.counts.shape[1]

    @property
    def orders(self) -> np.ndarray:
        """Total count of each row."""
        return self.counts.sum(axis=1)


@dataclass(frozen=True, eq=False)
class MixtureModel:
    """Multinomial mixture parameters.

    ``components`` rows are floored at ``prob_floor`` and renormalised at
    construction, so every stored probability is strictly positive and
    every row sums to 1.  Arrays are stored read-only; use
    ``dataclasses.replace`` to derive modified models.
    """

    weights: np.ndarray
    components: np.ndarray
    prob_floor: float = DEFAULT_PROB_FLOOR

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=float).copy()
        components = np.asarray(self.components, dtype=float)
        if weights.ndim != 1:
            raise ValueError("weights must be 1-D")
        if components.ndim != 2:
            raise ValueError("components must be 2-D")
        if components.shape[0] != weights.shape[0]:
            raise ValueError(
                f"{weights.shape[0]} weights but "
                f"{components.shape[0]} component rows"
            )
        if not (0.0 < self.prob_floor < 1.0 / components.shape[1]):
            raise ValueError(
                "prob_floor must lie in (0, 1/n_features), got "
                f"{self.prob_floor} with n_features={components.shape[1]}"
            )
        if np.any(weights < 0) or not np.isclose(
            weights.sum(), 1.0, atol=_SUM_TOL, rtol=0.0
        ):
            raise ValueError("weights must be non-negative and sum to 1")
        if np.any(components < 0) or not np.allclose(
            components.sum(axis=1), 1.0, atol=_SUM_TOL, rtol=0.0
        ):
            raise ValueError("component rows must be non-negative and sum to 1")
        weights = weights / weights.sum()
        components = floor_probabilities(components, self.prob_floor)
        weights.flags.writeable = False
        components.flags.writeable = False
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "components", components)

    @property
    def n_components(self) -> int:
        return self.weights.shape[0]

    @property
    def n_features(self) -> int:
        return self.components.shape[1]


@dataclass(frozen=True)
class EmConfig:
    """Knobs for a single EM run."""

    max_iterations: int = DEFAULT_MAX_ITERATIONS
    tolerance: float = DEFAULT_TOLERANCE
    prob_floor: float = DEFAULT_PROB_FLOOR
    seed: int = 0

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.tolerance <= 0.0:
            raise ValueError("tolerance must be positive")
        if not 0.0 < self.prob_floor < 1.0:
            raise ValueError("prob_floor must lie in (0, 1)")


@dataclass(frozen=True, eq=False)
class FitResult:
    """Outcome of one EM run.

    ``responsibilities`` is the posterior membership matrix consistent
    with the final ``model`` (``None`` for models produced without an
    E-step, e.g. merged candidates).  ``log_likelihood_history`` records
    the LLH after initialisation and after every completed iteration.
    """

    model: MixtureModel
    log_likelihood: float
    responsibilities: np.ndarray | None
    iterations: int
    converged: bool
    elapsed: float
    log_likelihood_history: tuple[float, ...] = field(default=())


def _check_dims(data: CountDataset, model: MixtureModel) -> None:
    if data.n_features != model.n_features:
        raise DimensionMismatchError(
            f"data has {data.n_features} categories, "
            f"model has {model.n_features}"
        )


def log_multinomial_coefficient(x) -> float:
    """log of the multinomial coefficient (sum(x))! / prod(x_d!)."""
    x = np.asarray(x, dtype=float)
    return float(gammaln(x.sum() + 1.0) - gammaln(x + 1.0).sum())


def log_multinomial_pmf(x, probs, include_coefficient: bool = False) -> float:
    """Log-probability of one count vector under one multinomial.

    The combinatorial coefficient is a constant per observation and is
    omitted by default; pass ``include_coefficient=True`` for the exact
    normalised pmf value.
    """
    x = np.asarray(x, dtype=float)
    probs = np.asarray(probs, dtype=float)
    if x.shape != probs.shape or x.ndim != 1:
        raise DimensionMismatchError(
            f"count vector shape {x.shape} does not match "
            f"probability shape {probs.shape}"
        )
    if np.any(probs <= 0.0):
        raise ValueError("probabilities must be strictly positive")
    out = float(np.dot(x, np.log(probs)))
    if include_coefficient:
        out += log_multinomial_coefficient(x)
    return out


def total_log_coefficient(data: CountDataset) -> float:
    """Sum of log multinomial coefficients over all rows."""
    counts = data.counts.astype(float)
    return float(
        gammaln(counts.sum(axis=1) + 1.0).sum() - gammaln(counts + 1.0).sum()
    )


def _log_component_scores(data: CountDataset, model: MixtureModel) -> np.ndarray:
    """(N, K) matrix of log(pi_k) + log M(x_i | mu_k), coefficient omitted."""
    log_mu = np.log(model.components)
    with np.errstate(divide="ignore"):
        log_pi = np.log(model.weights)
    return data.counts @ log_mu.T + log_pi


def mixture_log_likelihood(
    data: CountDataset, model: MixtureModel, include_coefficient: bool = False
) -> float:
    """Observed-data log-likelihood of the dataset under the model."""
    _check_dims(data, model)
    scores = _log_component_scores(data, model)
    ll = float(logsumexp(scores, axis=1).sum())
    if include_coefficient:
        ll += total_log_coefficient(data)
    return ll


def e_step(data: CountDataset, model: MixtureModel) -> np.ndarray:
    """Posterior component responsibilities, one row per observation.

    Computed in log space; each returned row is non-negative and sums
    to 1 up to float rounding.
    """
    _check_dims(data, model)
    scores = _log_component_scores(data, model)
    norm = logsumexp(scores, axis=1, keepdims=True)
    if not np.all(np.isfinite(norm)):
        raise RuntimeError("observation with zero posterior mass")
    return np.exp(scores - norm)


def m_step(
    data: CountDataset,
    responsibilities: np.ndarray,
    prob_floor: float = DEFAULT_PROB_FLOOR,
    rng: np.random.Generator | None = None,
) -> MixtureModel:
    """Weighted maximum-likelihood update of weights and components.

    A component whose responsibility mass underflows to zero cannot be
    updated from the data; it is restarted at the global category
    frequencies plus a little seeded noise, and its weight is floored at
    1/N (all weights are then renormalised).
    """
    resp = np.asarray(responsibilities, dtype=float)
    n, k = resp.shape
    if n != data.n_samples:
        raise DimensionMismatchError(
            f"responsibilities for {n} rows, data has {data.n_samples}"
        )
    mass = resp.sum(axis=0)
    weights = mass / n
    counts = data.counts.astype(float)
    numer = resp.T @ counts
    denom = numer.sum(axis=1)

    empty = denom <= 0.0
    if np.any(empty):
        if rng is None:
            rng = np.random.default_rng(0)
        total = counts.sum(axis=0)
        base = floor_probabilities(total / total.sum(), prob_floor)
        for j in np.flatnonzero(empty):
            jitter = rng.uniform(0.0, 1.0 / data.n_features, size=data.n_features)
            numer[j] = base + jitter
            denom[j] = numer[j].sum()
        weights = np.maximum(weights, 1.0 / n)
        weights = weights / weights.sum()

    components = floor_probabilities(numer / denom[:, None], prob_floor)
    return MixtureModel(weights, components, prob_floor=prob_floor)


def em_fit(
    data: CountDataset, init: MixtureModel, config: EmConfig | None = None
) -> FitResult:
    """Run EM from a given starting model until the LLH stabilises.

    Stops when the absolute LLH improvement falls below
    ``config.tolerance`` or after ``config.max_iterations`` iterations,
    whichever comes first.  The returned responsibilities correspond to
    the final model.
    """
    if config is None:
        config = EmConfig()
    _check_dims(data, init)
    if not config.prob_floor * data.n_features < 1.0:
        raise ValueError(
            f"prob_floor {config.prob_floor} too large for "
            f"{data.n_features} categories"
        )
    start = time.perf_counter()
    rng = np.random.default_rng(config.seed)

    model = init
    ll = mixture_log_likelihood(data, model)
    history = [ll]
    resp = None
    iterations = 0
    converged = False
    for _ in range(config.max_iterations):
        resp = e_step(data, model)
        model = m_step(data, resp, prob_floor=config.prob_floor, rng=rng)
        new_ll = mixture_log_likelihood(data, model)
        iterations += 1
        history.append(new_ll)
        delta = abs(new_ll - ll)
        ll = new_ll
        if delta < config.tolerance:
            converged = True
            break
    # Make the reported responsibilities consistent with the final model.
    resp = e_step(data, model)
    return FitResult(
        model=model,
        log_likelihood=ll,
        responsibilities=resp,
        iterations=iterations,
        converged=converged,
        elapsed=time.perf_counter() - start,
        log_likelihood_history=tuple(history),
    )


def hard_assignments(resp: np.ndarray) -> np.ndarray:
    """Most probable component index per row, ties to the lowest index."""
    return np.argmax(np.asarray(resp), axis=1)
