"""Scoring and benchmarking of clustering pipelines.

Provides a contingency-table adjusted Rand index, a sample-standard-
deviation stability measure, and a grid runner that crosses synthetic
dataset recipes with (initialization, generation, selection) method
triples over repeated fits.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .core import CountDataset, EmConfig, e_step, hard_assignments
from .initialization import InitConfig, normalize_strategy
from .modelgen import generate_candidates, normalize_method
from .modelsel import normalize_criterion, select_model
from .synth import SynthSpec, generate


def adjusted_rand_index(labels_a, labels_b) -> float:
    """Chance-corrected agreement between two partitions.

    Label values are opaque; only the induced groupings matter.  The
    pair counts are evaluated in exact integer arithmetic, so the result
    is immune to overflow for any realistic n.  Degenerate pairs of
    partitions with no expected-index spread (e.g. both all-singletons
    or both one-cluster) score 1.0 when identical as partitions.
    """
    a = np.asarray(labels_a).ravel()
    b = np.asarray(labels_b).ravel()
    if a.shape != b.shape:
        raise ValueError(f"label shapes differ: {a.shape} vs {b.shape}")
    n = a.shape[0]
    if n < 2:
        raise ValueError("labelings need at least 2 elements")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)

    t = sum(math.comb(int(v), 2) for v in table.ravel() if v > 1)
    row = sum(math.comb(int(v), 2) for v in table.sum(axis=1))
    col = sum(math.comb(int(v), 2) for v in table.sum(axis=0))
    total = math.comb(n, 2)
    # ARI = (t - row*col/total) / ((row+col)/2 - row*col/total), scaled
    # by 2*total to stay in integers until the final division.
    numer = 2 * (total * t - row * col)
    denom = total * (row + col) - 2 * row * col
    if denom == 0:
        return 1.0
    return numer / denom


def stability(values) -> float:
    """Sample standard deviation of a metric across repeated runs."""
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or arr.shape[0] < 2:
        raise ValueError("stability needs at least 2 values")
    return float(np.std(arr, ddof=1))


def resolve_workers(requested: int | None = None) -> int:
    """Worker count for benchmark cells.

    ``requested=None`` means serial; 0 means one per CPU.  The
    MMCLUST_THREADS environment variable caps the result (0 = no cap
    beyond the CPU count).
    """
    cpus = os.cpu_count() or 1
    workers = 1 if requested is None else requested
    if workers < 0:
        raise ValueError("workers must be >= 0")
    if workers == 0:
        workers = cpus
    env = os.environ.get("MMCLUST_THREADS")
    if env is not None and env.strip() != "":
        try:
            cap = int(env)
        except ValueError:
            raise ValueError(f"MMCLUST_THREADS must be an integer, got {env!r}")
        if cap < 0:
            raise ValueError(f"MMCLUST_THREADS must be >= 0, got {cap}")
        workers = min(workers, cpus if cap == 0 else cap)
    return max(1, workers)


@dataclass(frozen=True)
class MethodSpec:
    """One pipeline: how to initialise, generate candidates, select."""

    init: str = "sm-em"
    generation: str = "em-hac"
    selection: str = "bic"

    def __post_init__(self):
        object.__setattr__(self, "init", normalize_strategy(self.init))
        object.__setattr__(self, "generation", normalize_method(self.generation))
        object.__setattr__(self, "selection", normalize_criterion(self.selection))

    @property
    def key(self) -> str:
        return f"{self.init}/{self.generation}/{self.selection}"


@dataclass(frozen=True, eq=False)
class RunRecord:
    """Outcome of a single repeat of one method on one dataset.

    ``ari`` compares the reference labels against the candidate with
    the true component count (partition accuracy), which is independent
    of ``selected_k``; when that candidate is missing the selected one
    is used instead.  Failed runs carry the error message and NaN/None
    metrics.
    """

    dataset_id: str
    method: str
    repeat: int
    seed: int
    true_k: int
    selected_k: int | None
    ari: float | None
    elapsed: float
    error: str | None = None


@dataclass(frozen=True, eq=False)
class CellAggregate:
    """Per (dataset, method) summary over repeats."""

    dataset_id: str
    method: str
    true_k: int
    n_runs: int
    n_failures: int
    ari_mean: float | None
    ari_std: float | None
    correct_k_rate: float | None
    elapsed_mean: float | None
    selected_counts: dict[int, int] = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class BenchmarkReport:
    records: tuple[RunRecord, ...]
    aggregates: tuple[CellAggregate, ...]
    repeats: int
    seed: int


def _repeat_seeds(master_seed: int, dataset_index: int, repeats: int) -> list[int]:
    """Fit seeds for one dataset, shared by every method on it."""
    seq = np.random.SeedSequence([master_seed, dataset_index])
    return [int(c.generate_state(1)[0]) for c in seq.spawn(repeats)]


def run_single(
    data: CountDataset,
    method: MethodSpec,
    fit_seed: int,
    k_min: int = 1,
    k_max: int = 10,
    em_config: EmConfig | None = None,
    true_k: int | None = None,
) -> tuple[int, float | None, float]:
    """One fit-and-select pass; returns (selected_k, ari, elapsed)."""
    if em_config is None:
        em_config = EmConfig()
    start = time.perf_counter()
    candidates = generate_candidates(
        data,
        k_max,
        method.generation,
        InitConfig(strategy=method.init, seed=fit_seed),
        replace(em_config, seed=fit_seed),
    )
    selected_k, _ = select_model(candidates, method.selection, data=data, k_min=k_min)
    elapsed = time.perf_counter() - start

    ari = None
    if data.labels is not None:
        score_k = true_k if true_k in candidates.entries else selected_k
        fit = candidates.entries[score_k]
        resp = fit.responsibilities
        if resp is None:
            resp = e_step(data, fit.model)
        ari = adjusted_rand_index(data.labels, hard_assignments(resp))
    return selected_k, ari, elapsed


def _run_cell(args) -> tuple[int, list[RunRecord]]:
    (
        cell_index,
        dataset_id,
        spec,
        method,
        fit_seeds,
        k_min,
        k_max,
        em_config,
    ) = args
    data = generate(spec).dataset
    records = []
    for repeat, fit_seed in enumerate(fit_seeds):
        try:
            selected_k, ari, elapsed = run_single(
                data, method, fit_seed, k_min, k_max, em_config, spec.n_clusters
            )
            records.append(
                RunRecord(
                    dataset_id=dataset_id,
                    method=method.key,
                    repeat=repeat,
                    seed=fit_seed,
                    true_k=spec.n_clusters,
                    selected_k=selected_k,
                    ari=ari,
                    elapsed=elapsed,
                )
            )
        except Exception as exc:
            records.append(
                RunRecord(
                    dataset_id=dataset_id,
                    method=method.key,
                    repeat=repeat,
                    seed=fit_seed,
                    true_k=spec.n_clusters,
                    selected_k=None,
                    ari=None,
                    elapsed=float("nan"),
                    error=f"{type(exc).__name__}: {exc}",
                )
            )
    return cell_index, records


def _aggregate(
    dataset_id: str, method: MethodSpec, true_k: int, records: list[RunRecord]
) -> CellAggregate:
    ok = [r for r in records if r.error is None]
    aris = [r.ari for r in ok if r.ari is not None]
    counts: dict[int, int] = {}
    for r in ok:
        counts[r.selected_k] = counts.get(r.selected_k, 0) + 1
    return CellAggregate(
        dataset_id=dataset_id,
        method=method.key,
        true_k=true_k,
        n_runs=len(records),
        n_failures=len(records) - len(ok),
        ari_mean=float(np.mean(aris)) if aris else None,
        ari_std=stability(aris) if len(aris) >= 2 else None,
        correct_k_rate=(
            sum(r.selected_k == true_k for r in ok) / len(ok) if ok else None
        ),
        elapsed_mean=float(np.mean([r.elapsed for r in ok])) if ok else None,
        selected_counts=dict(sorted(counts.items())),
    )


def run_benchmark(
    dataset_specs,
    methods,
    repeats: int = 10,
    seed: int = 0,
    k_min: int = 1,
    k_max: int = 10,
    em_config: EmConfig | None = None,
    workers: int | None = None,
    dataset_ids=None,
) -> BenchmarkReport:
    """Cross datasets with methods, ``repeats`` fits per cell.

    Each dataset is generated once from its spec's own seed.  Fit seeds
    are derived from the master ``seed`` per (dataset, repeat) and are
    shared across methods, so methods face identical starting
    conditions.  Cells run in separate processes when ``workers``
    resolves to more than one.
    """
    specs = list(dataset_specs)
    method_list = [m if isinstance(m, MethodSpec) else MethodSpec(*m) for m in methods]
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    if not specs or not method_list:
        raise ValueError("need at least one dataset spec and one method")
    if dataset_ids is None:
        dataset_ids = [
            f"{s.separation}-k{s.n_clusters}-d{s.n_features}-n{s.n_samples}-i{i}"
            for i, s in enumerate(specs)
        ]
    elif len(dataset_ids) != len(specs):
        raise ValueError("dataset_ids length must match dataset_specs")

    cells = []
    for i, (dataset_id, spec) in enumerate(zip(dataset_ids, specs)):
        fit_seeds = tuple(_repeat_seeds(seed, i, repeats))
        for method in method_list:
            cells.append(
                (
                    len(cells),
                    dataset_id,
                    spec,
                    method,
                    fit_seeds,
                    k_min,
                    k_max,
                    em_config,
                )
            )

    n_workers = resolve_workers(workers)
    results: list[list[RunRecord] | None] = [None] * len(cells)
    if n_workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            for index, records in pool.map(_run_cell, cells):
                results[index] = records
    else:
        for cell in cells:
            index, records = _run_cell(cell)
            results[index] = records

    records: list[RunRecord] = []
    aggregates: list[CellAggregate] = []
    for cell, cell_records in zip(cells, results):
        _, dataset_id, spec, method, _, _, _, _ = cell
        records.extend(cell_records)
        aggregates.append(
            _aggregate(dataset_id, method, spec.n_clusters, cell_records)
        )
    return BenchmarkReport(
        records=tuple(records),
        aggregates=tuple(aggregates),
        repeats=repeats,
        seed=seed,
    )
