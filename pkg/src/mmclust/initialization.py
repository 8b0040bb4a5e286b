"""Starting-point strategies for EM on multinomial mixtures.

Five strategies are provided.  ``random`` draws one start from flat
Dirichlets.  ``rnd-em`` draws many and keeps the best scoring one
without running EM.  ``sm-em`` refines a few starts with short EM runs
and keeps the best.  ``cem`` does the same with hard (classification)
assignments inside the short runs.  ``sem`` runs a single long
stochastic-assignment chain and returns the iteration with the best
log-likelihood.

All strategies consume seeds through the same per-trial derivation, so
``rnd-em`` with one trial reproduces ``random`` exactly and ``sm-em``
with a zero-length short run reproduces ``rnd-em``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    DEFAULT_PROB_FLOOR,
    DEFAULT_TOLERANCE,
    CountDataset,
    EmConfig,
    MixtureModel,
    e_step,
    em_fit,
    hard_assignments,
    m_step,
    mixture_log_likelihood,
)

STRATEGIES = ("random", "rnd-em", "sm-em", "cem", "sem")

# Trial counts and short-run iteration caps used when the caller does
# not override them.
DEFAULT_TRIALS = {"random": 1, "rnd-em": 100, "sm-em": 5, "cem": 5, "sem": 1}
DEFAULT_SHORT_RUN = {"random": 0, "rnd-em": 0, "sm-em": 50, "cem": 50, "sem": 500}

_ALIASES = {
    "random": "random",
    "rnd-em": "rnd-em",
    "rndem": "rnd-em",
    "rnd_em": "rnd-em",
    "sm-em": "sm-em",
    "smem": "sm-em",
    "sm_em": "sm-em",
    "cem": "cem",
    "sem": "sem",
}


def normalize_strategy(name: str) -> str:
    key = name.strip().lower()
    if key not in _ALIASES:
        raise ValueError(
            f"unknown initialization strategy {name!r}; "
            f"expected one of {', '.join(STRATEGIES)}"
        )
    return _ALIASES[key]


@dataclass(frozen=True)
class InitConfig:
    """Initialization strategy plus its effort knobs.

    ``trials`` and ``short_run_iterations`` default to the per-strategy
    values in ``DEFAULT_TRIALS`` and ``DEFAULT_SHORT_RUN`` when left as
    ``None``.
    """

    strategy: str = "sm-em"
    trials: int | None = None
    short_run_iterations: int | None = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "strategy", normalize_strategy(self.strategy))
        if self.trials is not None and self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.short_run_iterations is not None and self.short_run_iterations < 0:
            raise ValueError("short_run_iterations must be >= 0")

    @property
    def resolved_trials(self) -> int:
        if self.trials is not None:
            return self.trials
        return DEFAULT_TRIALS[self.strategy]

    @property
    def resolved_short_run(self) -> int:
        if self.short_run_iterations is not None:
            return self.short_run_iterations
        return DEFAULT_SHORT_RUN[self.strategy]


def _check_components(data: CountDataset, n_components: int) -> None:
    if n_components < 1:
        raise ValueError("n_components must be >= 1")
    if n_components > data.n_samples:
        raise ValueError(
            f"n_components={n_components} exceeds {data.n_samples} samples"
        )


def _trial_streams(seed: int, trials: int) -> list[tuple[np.random.Generator, int]]:
    """One (start-rng, em-seed) pair per trial.

    Children of a seed sequence depend only on their index, so the
    stream for trial t is the same no matter how many trials follow it.
    """
    out = []
    for child in np.random.SeedSequence(seed).spawn(trials):
        start, em = child.spawn(2)
        out.append((np.random.default_rng(start), int(em.generate_state(1)[0])))
    return out


def _random_model(
    rng: np.random.Generator,
    n_components: int,
    n_features: int,
    prob_floor: float,
) -> MixtureModel:
    components = rng.dirichlet(np.ones(n_features), size=n_components)
    weights = np.full(n_components, 1.0 / n_components)
    return MixtureModel(weights, components, prob_floor=prob_floor)


def init_random(
    data: CountDataset,
    n_components: int,
    seed: int = 0,
    prob_floor: float = DEFAULT_PROB_FLOOR,
) -> MixtureModel:
    """Single random start: flat-Dirichlet rows, uniform weights."""
    _check_components(data, n_components)
    rng, _ = _trial_streams(seed, 1)[0]
    return _random_model(rng, n_components, data.n_features, prob_floor)


def init_rnd_em(
    data: CountDataset,
    n_components: int,
    trials: int = DEFAULT_TRIALS["rnd-em"],
    seed: int = 0,
    prob_floor: float = DEFAULT_PROB_FLOOR,
    return_trace: bool = False,
):
    """Best of ``trials`` random starts by log-likelihood, no EM.

    Ties keep the earliest trial.  With ``return_trace=True`` also
    returns the per-trial log-likelihoods.
    """
    _check_components(data, n_components)
    if trials < 1:
        raise ValueError("trials must be >= 1")
    best = None
    best_ll = -np.inf
    trace = []
    for rng, _ in _trial_streams(seed, trials):
        model = _random_model(rng, n_components, data.n_features, prob_floor)
        ll = mixture_log_likelihood(data, model)
        trace.append(ll)
        if ll > best_ll:
            best, best_ll = model, ll
    if return_trace:
        return best, trace
    return best


def init_sm_em(
    data: CountDataset,
    n_components: int,
    trials: int = DEFAULT_TRIALS["sm-em"],
    short_run_iterations: int = DEFAULT_SHORT_RUN["sm-em"],
    seed: int = 0,
    tolerance: float = DEFAULT_TOLERANCE,
    prob_floor: float = DEFAULT_PROB_FLOOR,
    return_trace: bool = False,
):
    """Short EM runs from several random starts, keep the best model.

    Each trial starts from a fresh random model and runs at most
    ``short_run_iterations`` EM iterations.  ``short_run_iterations=0``
    skips EM entirely and degenerates to ``init_rnd_em``.
    """
    _check_components(data, n_components)
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if short_run_iterations < 0:
        raise ValueError("short_run_iterations must be >= 0")
    best = None
    best_ll = -np.inf
    trace = []
    for rng, em_seed in _trial_streams(seed, trials):
        model = _random_model(rng, n_components, data.n_features, prob_floor)
        if short_run_iterations > 0:
            cfg = EmConfig(
                max_iterations=short_run_iterations,
                tolerance=tolerance,
                prob_floor=prob_floor,
                seed=em_seed,
            )
            fit = em_fit(data, model, cfg)
            model, ll = fit.model, fit.log_likelihood
        else:
            ll = mixture_log_likelihood(data, model)
        trace.append(ll)
        if ll > best_ll:
            best, best_ll = model, ll
    if return_trace:
        return best, trace
    return best


def _one_hot(indices: np.ndarray, n_components: int) -> np.ndarray:
    out = np.zeros((indices.shape[0], n_components))
    out[np.arange(indices.shape[0]), indices] = 1.0
    return out


def init_cem(
    data: CountDataset,
    n_components: int,
    trials: int = DEFAULT_TRIALS["cem"],
    short_run_iterations: int = DEFAULT_SHORT_RUN["cem"],
    seed: int = 0,
    tolerance: float = DEFAULT_TOLERANCE,
    prob_floor: float = DEFAULT_PROB_FLOOR,
    return_trace: bool = False,
):
    """Classification EM starts: responsibilities hardened to one-hot.

    Identical to ``init_sm_em`` except each E-step result is replaced by
    the most probable component per row (ties to the lowest index)
    before the M-step.
    """
    _check_components(data, n_components)
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if short_run_iterations < 0:
        raise ValueError("short_run_iterations must be >= 0")
    best = None
    best_ll = -np.inf
    trace = []
    for rng, em_seed in _trial_streams(seed, trials):
        model = _random_model(rng, n_components, data.n_features, prob_floor)
        rng_m = np.random.default_rng(em_seed)
        ll = mixture_log_likelihood(data, model)
        for _ in range(short_run_iterations):
            resp = e_step(data, model)
            hard = _one_hot(hard_assignments(resp), n_components)
            model = m_step(data, hard, prob_floor=prob_floor, rng=rng_m)
            new_ll = mixture_log_likelihood(data, model)
            done = abs(new_ll - ll) < tolerance
            ll = new_ll
            if done:
                break
        trace.append(ll)
        if ll > best_ll:
            best, best_ll = model, ll
    if return_trace:
        return best, trace
    return best


def init_sem(
    data: CountDataset,
    n_components: int,
    max_iterations: int = DEFAULT_SHORT_RUN["sem"],
    seed: int = 0,
    prob_floor: float = DEFAULT_PROB_FLOOR,
    return_trace: bool = False,
):
    """Stochastic EM: sample hard assignments, keep the best iteration.

    Each iteration draws one component per row from its posterior and
    refits on those assignments.  The chain has no convergence criterion
    (the log-likelihood fluctuates by design), so it always runs
    ``max_iterations`` steps and returns the model of the iteration with
    the highest log-likelihood.
    """
    _check_components(data, n_components)
    if max_iterations < 1:
        raise ValueError("max_iterations must be >= 1")
    rng, em_seed = _trial_streams(seed, 1)[0]
    rng_m = np.random.default_rng(em_seed)
    model = _random_model(rng, n_components, data.n_features, prob_floor)
    best = model
    best_ll = -np.inf
    trace = []
    for _ in range(max_iterations):
        resp = e_step(data, model)
        # Inverse-CDF draw of one component per row.
        cdf = np.cumsum(resp, axis=1)
        cdf[:, -1] = 1.0
        u = rng.uniform(size=(data.n_samples, 1))
        picks = (u > cdf).sum(axis=1)
        model = m_step(data, _one_hot(picks, n_components), prob_floor=prob_floor, rng=rng_m)
        ll = mixture_log_likelihood(data, model)
        trace.append(ll)
        if ll > best_ll:
            best, best_ll = model, ll
    if return_trace:
        return best, trace
    return best


def initialize(
    data: CountDataset,
    n_components: int,
    config: InitConfig | None = None,
    tolerance: float = DEFAULT_TOLERANCE,
    prob_floor: float = DEFAULT_PROB_FLOOR,
) -> MixtureModel:
    """Dispatch to the strategy named in ``config``."""
    if config is None:
        config = InitConfig()
    strategy = config.strategy
    if strategy == "random":
        return init_random(data, n_components, config.seed, prob_floor)
    if strategy == "rnd-em":
        return init_rnd_em(
            data, n_components, config.resolved_trials, config.seed, prob_floor
        )
    if strategy == "sm-em":
        return init_sm_em(
            data,
            n_components,
            config.resolved_trials,
            config.resolved_short_run,
            config.seed,
            tolerance,
            prob_floor,
        )
    if strategy == "cem":
        return init_cem(
            data,
            n_components,
            config.resolved_trials,
            config.resolved_short_run,
            config.seed,
            tolerance,
            prob_floor,
        )
    return init_sem(
        data, n_components, config.resolved_short_run, config.seed, prob_floor
    )
