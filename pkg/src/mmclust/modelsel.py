"""Pick a component count from a candidate set.

Four criterion curves (``bic``, ``icl``, ``mml``, ``llh``) are computed
per candidate and minimised, plus an ``l-method`` knee detector that
locates the corner of the BIC curve by fitting two straight lines.  All
criteria resolve ties toward the smallest component count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import CountDataset, FitResult, e_step
from .modelgen import CandidateModelSet

CRITERIA = ("bic", "icl", "mml", "llh", "l-method")

_ALIASES = {
    "bic": "bic",
    "icl": "icl",
    "mml": "mml",
    "llh": "llh",
    "l-method": "l-method",
    "lmethod": "l-method",
    "l_method": "l-method",
}


def normalize_criterion(name: str) -> str:
    key = name.strip().lower()
    if key not in _ALIASES:
        raise ValueError(
            f"unknown selection criterion {name!r}; "
            f"expected one of {', '.join(CRITERIA)}"
        )
    return _ALIASES[key]


@dataclass(frozen=True)
class CriterionCurve:
    """Criterion values keyed by component count, sorted by count."""

    criterion: str
    points: tuple[tuple[int, float], ...]

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(sorted(self.points)))

    @property
    def counts(self) -> np.ndarray:
        return np.array([k for k, _ in self.points], dtype=int)

    @property
    def values(self) -> np.ndarray:
        return np.array([v for _, v in self.points], dtype=float)

    def best(self, k_min: int = 1) -> int:
        """Component count with the smallest value, restricted to
        counts >= k_min; ties go to the smallest count."""
        feasible = [(v, k) for k, v in self.points if k >= k_min]
        if not feasible:
            raise ValueError(f"no candidate with at least {k_min} components")
        value, count = min(feasible, key=lambda t: (t[0], t[1]))
        del value
        return count


def free_parameters(n_components: int, n_features: int) -> int:
    """Free parameters of a K-component mixture over D categories.

    K-1 independent weights plus K rows of D-1 independent
    probabilities: K*D - 1 in total.
    """
    return n_components * n_features - 1


def bic(fit: FitResult, n_samples: int) -> float:
    """-2 LLH plus a parameter-count penalty scaled by log N."""
    p = free_parameters(fit.model.n_components, fit.model.n_features)
    return -2.0 * fit.log_likelihood + p * float(np.log(n_samples))


def icl(fit: FitResult, n_samples: int, data: CountDataset | None = None) -> float:
    """BIC plus an entropy-style penalty for uncertain assignments.

    Adds -2 sum_i log rho_{i, z_i} where z_i is the most probable
    component of row i, so ICL >= BIC with equality only for fully
    confident assignments.  Needs responsibilities: either stored on the
    fit or recomputed from ``data``.
    """
    resp = fit.responsibilities
    if resp is None:
        if data is None:
            raise ValueError(
                "fit has no stored responsibilities; pass the dataset "
                "so they can be recomputed"
            )
        resp = e_step(data, fit.model)
    peak = resp.max(axis=1)
    # A peak responsibility cannot be 0 (rows sum to 1), but guard the
    # log against underflow anyway.
    penalty = -2.0 * float(np.log(np.maximum(peak, 1e-300)).sum())
    return bic(fit, n_samples) + penalty


def mml(fit: FitResult, n_samples: int) -> float:
    """Minimum message length of the fit, in nats.

    Components with zero weight carry no message cost; with the
    construction-time weight normalisation these do not normally occur,
    but the guard keeps the criterion well defined.
    """
    weights = fit.model.weights
    nz = weights > 0.0
    k_nz = int(nz.sum())
    d = fit.model.n_features
    n = float(n_samples)
    term_weights = 0.5 * d * float(np.log(n * weights[nz] / 12.0).sum())
    term_count = 0.5 * k_nz * float(np.log(n / 12.0))
    term_const = 0.5 * k_nz * (d + 1.0)
    return term_weights + term_count + term_const - fit.log_likelihood


def criterion_curve(
    candidates: CandidateModelSet,
    criterion: str,
    data: CountDataset | None = None,
) -> CriterionCurve:
    """Evaluate one criterion on every candidate entry.

    ``l-method`` has no per-candidate value of its own; its curve is the
    BIC curve it operates on.
    """
    name = normalize_criterion(criterion)
    n = candidates.n_samples
    points = []
    for k, fit in candidates.entries.items():
        if name == "icl":
            value = icl(fit, n, data)
        elif name == "mml":
            value = mml(fit, n)
        elif name == "llh":
            value = -fit.log_likelihood
        else:  # bic and l-method
            value = bic(fit, n)
        points.append((k, float(value)))
    return CriterionCurve(criterion=name, points=tuple(points))


def _two_line_error(x: np.ndarray, y: np.ndarray, split: int) -> float:
    """Size-weighted RMSE of straight-line fits left and right of
    ``split`` (the split point belongs to both lines)."""
    total = 0.0
    n_total = 0
    for xs, ys in ((x[: split + 1], y[: split + 1]), (x[split:], y[split:])):
        coef = np.polyfit(xs, ys, 1)
        resid = ys - np.polyval(coef, xs)
        rmse = float(np.sqrt(np.mean(resid**2)))
        total += len(xs) * rmse
        n_total += len(xs)
    return total / n_total


def l_method(curve: CriterionCurve, k_min: int = 1) -> int:
    """Knee of a criterion curve via the best two-segment line fit.

    Every split needs at least two points on each side, so the curve
    must contain at least four points; candidates below ``k_min`` still
    support the line fits but cannot be returned as the knee.
    """
    x = curve.counts.astype(float)
    y = curve.values
    if len(x) < 4:
        raise ValueError(
            f"knee detection needs at least 4 curve points, got {len(x)}; "
            "increase the candidate range"
        )
    errors = []
    for split in range(1, len(x) - 1):
        if x[split] < k_min:
            continue
        errors.append((split, _two_line_error(x, y, split)))
    if not errors:
        raise ValueError(f"no knee candidate with at least {k_min} components")
    values = np.array([e for _, e in errors])
    # Near-perfectly straight curves leave only float noise in the
    # errors; collapse anything within noise of the minimum so the tie
    # break lands on the smallest count.
    scale = max(float(np.abs(y).max()), 1.0)
    cutoff = values.min() + 1e-12 * scale
    for split, err in errors:
        if err <= cutoff:
            return int(curve.counts[split])
    raise AssertionError("unreachable")


def select_model(
    candidates: CandidateModelSet,
    criterion: str = "bic",
    data: CountDataset | None = None,
    k_min: int = 1,
) -> tuple[int, FitResult]:
    """Pick the candidate favoured by ``criterion``.

    Returns the winning component count and its fit.  ``data`` is only
    needed for ``icl`` on candidates without stored responsibilities.
    """
    name = normalize_criterion(criterion)
    if name == "l-method":
        curve = criterion_curve(candidates, "bic", data)
        k = l_method(curve, k_min=k_min)
    else:
        curve = criterion_curve(candidates, name, data)
        k = curve.best(k_min=k_min)
    return k, candidates.entries[k]
