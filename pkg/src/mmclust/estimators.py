"""Scikit-learn style estimators wrapping the EM machinery.

``MultinomialMixture`` fits a fixed number of components.
``AutoMultinomialMixture`` additionally searches over a component-count
range with a candidate-generation method and a selection criterion.
Both follow the usual conventions: hyperparameters are set verbatim in
``__init__`` (so ``get_params``/``set_params``/``clone`` work), fitted
state lives in trailing-underscore attributes, and ``fit_predict`` /
``predict`` return integer labels starting at 0.
"""

from __future__ import annotations

import numpy as np
from scipy.special import logsumexp
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.exceptions import NotFittedError

from .core import (
    CountDataset,
    EmConfig,
    _log_component_scores,
    as_count_matrix,
    e_step,
    em_fit,
    hard_assignments,
    mixture_log_likelihood,
)
from .initialization import InitConfig, initialize
from .modelgen import generate_candidates
from .modelsel import criterion_curve, normalize_criterion, select_model


def _seed_pair(random_state) -> tuple[int, int]:
    """Derive (init seed, EM seed) from a random_state-style argument."""
    if random_state is None:
        seq = np.random.SeedSequence()
    elif isinstance(random_state, (int, np.integer)):
        seq = np.random.SeedSequence(int(random_state))
    elif isinstance(random_state, np.random.SeedSequence):
        seq = random_state
    else:
        raise TypeError(
            f"random_state must be None, an int, or a SeedSequence, "
            f"got {type(random_state).__name__}"
        )
    a, b = seq.spawn(2)
    return int(a.generate_state(1)[0]), int(b.generate_state(1)[0])


class MultinomialMixture(ClusterMixin, BaseEstimator):
    """Multinomial mixture with a fixed number of components.

    Parameters
    ----------
    n_components : int, default=2
        Number of mixture components.
    init : str, default="sm-em"
        Initialization strategy: "random", "rnd-em", "sm-em", "cem" or
        "sem".
    init_trials : int, optional
        Number of initialization trials; strategy default when None.
    init_iterations : int, optional
        Iteration budget inside the initialization; strategy default
        when None.
    max_iter : int, default=100
        EM iteration cap for the main fit.
    tol : float, default=1e-5
        Absolute log-likelihood improvement that counts as converged.
    prob_floor : float, default=1e-10
        Lower bound applied to every category probability.
    random_state : int, optional
        Seed for initialization and degenerate-component restarts.

    Attributes
    ----------
    weights_ : ndarray of shape (n_components,)
    components_ : ndarray of shape (n_components, n_features)
    labels_ : ndarray of shape (n_samples,)
    log_likelihood_ : float
    n_iter_ : int
    converged_ : bool
    """

    def __init__(
        self,
        n_components: int = 2,
        *,
        init: str = "sm-em",
        init_trials: int | None = None,
        init_iterations: int | None = None,
        max_iter: int = 100,
        tol: float = 1e-5,
        prob_floor: float = 1e-10,
        random_state: int | None = None,
    ):
        self.n_components = n_components
        self.init = init
        self.init_trials = init_trials
        self.init_iterations = init_iterations
        self.max_iter = max_iter
        self.tol = tol
        self.prob_floor = prob_floor
        self.random_state = random_state

    def fit(self, X, y=None):
        """Estimate mixture parameters from count rows in X."""
        data = CountDataset(counts=as_count_matrix(X))
        init_seed, em_seed = _seed_pair(self.random_state)
        cfg = EmConfig(
            max_iterations=self.max_iter,
            tolerance=self.tol,
            prob_floor=self.prob_floor,
            seed=em_seed,
        )
        start = initialize(
            data,
            self.n_components,
            InitConfig(
                strategy=self.init,
                trials=self.init_trials,
                short_run_iterations=self.init_iterations,
                seed=init_seed,
            ),
            tolerance=self.tol,
            prob_floor=self.prob_floor,
        )
        result = em_fit(data, start, cfg)
        self.model_ = result.model
        self.weights_ = result.model.weights
        self.components_ = result.model.components
        self.labels_ = hard_assignments(result.responsibilities)
        self.log_likelihood_ = result.log_likelihood
        self.n_iter_ = result.iterations
        self.converged_ = result.converged
        self.n_features_in_ = data.n_features
        return self

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise NotFittedError(
                f"This {type(self).__name__} instance is not fitted yet."
            )

    def predict_proba(self, X) -> np.ndarray:
        """Posterior component probabilities for each row of X."""
        self._check_fitted()
        data = CountDataset(counts=as_count_matrix(X))
        return e_step(data, self.model_)

    def predict(self, X) -> np.ndarray:
        """Most probable component index for each row of X."""
        return hard_assignments(self.predict_proba(X))

    def score_samples(self, X) -> np.ndarray:
        """Per-row log-likelihood under the fitted mixture."""
        self._check_fitted()
        data = CountDataset(counts=as_count_matrix(X))
        return logsumexp(_log_component_scores(data, self.model_), axis=1)

    def score(self, X, y=None) -> float:
        """Mean per-row log-likelihood."""
        return float(np.mean(self.score_samples(X)))


class AutoMultinomialMixture(ClusterMixin, BaseEstimator):
    """Multinomial mixture with automatic component-count selection.

    Builds candidates for every count up to ``max_components`` with the
    chosen generation method, scores them with the chosen criterion,
    and keeps the winner with at least ``min_components`` components.

    Parameters
    ----------
    min_components : int, default=2
        Smallest admissible selection.  Candidates below it are still
        fitted (the criteria see the full curve) but never returned.
    max_components : int, default=15
        Largest candidate size.
    method : str, default="em-hac"
        Candidate generation: "mul-em", "int-em" or "em-hac".
    criterion : str, default="bic"
        Selection rule: "bic", "icl", "mml", "llh" or "l-method".
    init, init_trials, init_iterations, max_iter, tol, prob_floor,
    random_state
        As in :class:`MultinomialMixture`.

    Attributes
    ----------
    n_components_ : int
        Selected component count.
    candidates_ : CandidateModelSet
    criterion_curve_ : CriterionCurve
    weights_, components_, labels_, log_likelihood_ : fitted model state
    """

    def __init__(
        self,
        *,
        min_components: int = 2,
        max_components: int = 15,
        method: str = "em-hac",
        criterion: str = "bic",
        init: str = "sm-em",
        init_trials: int | None = None,
        init_iterations: int | None = None,
        max_iter: int = 100,
        tol: float = 1e-5,
        prob_floor: float = 1e-10,
        random_state: int | None = None,
    ):
        self.min_components = min_components
        self.max_components = max_components
        self.method = method
        self.criterion = criterion
        self.init = init
        self.init_trials = init_trials
        self.init_iterations = init_iterations
        self.max_iter = max_iter
        self.tol = tol
        self.prob_floor = prob_floor
        self.random_state = random_state

    def fit(self, X, y=None):
        """Generate candidates from X and keep the criterion's choice."""
        if not 1 <= self.min_components <= self.max_components:
            raise ValueError(
                f"need 1 <= min_components <= max_components, got "
                f"{self.min_components}..{self.max_components}"
            )
        data = CountDataset(counts=as_count_matrix(X))
        init_seed, em_seed = _seed_pair(self.random_state)
        candidates = generate_candidates(
            data,
            self.max_components,
            self.method,
            InitConfig(
                strategy=self.init,
                trials=self.init_trials,
                short_run_iterations=self.init_iterations,
                seed=init_seed,
            ),
            EmConfig(
                max_iterations=self.max_iter,
                tolerance=self.tol,
                prob_floor=self.prob_floor,
                seed=em_seed,
            ),
        )
        selected_k, fit = select_model(
            candidates, self.criterion, data=data, k_min=self.min_components
        )
        name = normalize_criterion(self.criterion)
        curve_name = "bic" if name == "l-method" else name
        self.candidates_ = candidates
        self.criterion_curve_ = criterion_curve(candidates, curve_name, data)
        self.n_components_ = selected_k
        self.model_ = fit.model
        self.weights_ = fit.model.weights
        self.components_ = fit.model.components
        resp = fit.responsibilities
        if resp is None:
            resp = e_step(data, fit.model)
        self.labels_ = hard_assignments(resp)
        self.log_likelihood_ = fit.log_likelihood
        self.n_features_in_ = data.n_features
        return self

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise NotFittedError(
                f"This {type(self).__name__} instance is not fitted yet."
            )

    def predict_proba(self, X) -> np.ndarray:
        self._check_fitted()
        data = CountDataset(counts=as_count_matrix(X))
        return e_step(data, self.model_)

    def predict(self, X) -> np.ndarray:
        return hard_assignments(self.predict_proba(X))

    def score(self, X, y=None) -> float:
        """Mean per-row log-likelihood under the selected model."""
        self._check_fitted()
        data = CountDataset(counts=as_count_matrix(X))
        return mixture_log_likelihood(data, self.model_) / data.n_samples
