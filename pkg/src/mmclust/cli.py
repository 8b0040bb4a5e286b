"""Command line front end.

Three subcommands: ``generate`` writes a synthetic labelled dataset,
``fit`` clusters a count file with automatic component-count selection,
``benchmark`` crosses synthetic dataset recipes with method pipelines.
Failures print a one-line JSON object to stderr; exit status is 2 for
bad configuration or unreadable input and 1 for runtime failures.
"""

from __future__ import annotations

import argparse
import json
import sys

from .core import CountDataset, EmConfig, e_step, hard_assignments
from .dataio import (
    ParseError,
    candidates_to_jsonable,
    load_counts,
    load_labels,
    report_to_jsonable,
    write_curve_csv,
    write_json,
    write_labels,
    write_report_csv,
    write_sparse_counts,
)
from .evaluation import MethodSpec, adjusted_rand_index, run_benchmark
from .initialization import STRATEGIES, InitConfig
from .modelgen import METHODS, generate_candidates
from .modelsel import CRITERIA, criterion_curve, normalize_criterion, select_model
from .synth import SEPARATIONS, SeparationRejectionError, SynthSpec, generate


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mmclust",
        description="Multinomial mixture clustering of count data",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="sample a synthetic labelled dataset")
    gen.add_argument("--k", type=int, required=True, help="number of clusters")
    gen.add_argument("--d", type=int, required=True, help="number of categories")
    gen.add_argument("--n", type=int, required=True, help="number of rows")
    gen.add_argument(
        "--alpha",
        type=float,
        default=None,
        help="Dirichlet concentration (default depends on --separation)",
    )
    gen.add_argument("--separation", choices=SEPARATIONS, default="ws")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True, help="output path prefix")

    fit = sub.add_parser("fit", help="cluster a count file")
    fit.add_argument("--data", required=True, help="counts file (sparse or dense)")
    fit.add_argument("--labels", default=None, help="reference labels for scoring")
    fit.add_argument("--kmin", type=int, default=2)
    fit.add_argument("--kmax", type=int, default=15)
    fit.add_argument("--init", choices=STRATEGIES, default="sm-em")
    fit.add_argument("--gen", choices=METHODS, default="em-hac")
    fit.add_argument("--select", choices=CRITERIA, default="bic")
    fit.add_argument("--seed", type=int, default=0)
    fit.add_argument("--out", required=True, help="output path prefix")

    bench = sub.add_parser("benchmark", help="run a dataset x method grid")
    bench.add_argument("--config", required=True, help="grid description JSON")
    bench.add_argument("--repeats", type=int, default=None)
    bench.add_argument("--seed", type=int, default=None)
    bench.add_argument("--out", required=True, help="output path prefix")
    return parser


def _fail(category: str, message: str, code: int, **extra) -> int:
    payload = {"error": category, "message": message}
    payload.update({k: v for k, v in extra.items() if v is not None})
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    return code


def _cmd_generate(args) -> int:
    try:
        spec = SynthSpec(
            n_clusters=args.k,
            n_features=args.d,
            n_samples=args.n,
            separation=args.separation,
            dirichlet_alpha=args.alpha,
            seed=args.seed,
        )
    except ValueError as exc:
        return _fail("config-error", str(exc), 2)
    try:
        result = generate(spec)
    except SeparationRejectionError as exc:
        return _fail("generation-error", str(exc), 1)
    write_sparse_counts(f"{args.out}.counts", result.dataset)
    write_labels(f"{args.out}.labels", result.dataset.labels)
    write_json(
        f"{args.out}.json",
        {
            "k": spec.n_clusters,
            "d": spec.n_features,
            "n": spec.n_samples,
            "separation": spec.separation,
            "alpha": spec.resolved_alpha,
            "seed": spec.seed,
            "attempts": result.attempts,
            "min_skld": result.min_skld,
            "orders": result.orders.tolist(),
            "files": {
                "counts": f"{args.out}.counts",
                "labels": f"{args.out}.labels",
            },
        },
    )
    return 0


def _cmd_fit(args) -> int:
    if not 1 <= args.kmin <= args.kmax:
        return _fail(
            "config-error",
            f"need 1 <= kmin <= kmax, got {args.kmin}..{args.kmax}",
            2,
        )
    try:
        data = load_counts(args.data)
        labels = load_labels(args.labels) if args.labels else None
    except FileNotFoundError as exc:
        return _fail("data-error", str(exc), 2)
    except ParseError as exc:
        return _fail("data-error", str(exc), 2, path=exc.path, line=exc.line)
    if labels is not None:
        try:
            data = CountDataset(counts=data.counts, labels=labels)
        except ValueError as exc:
            return _fail("data-error", str(exc), 2)
    if args.kmax > data.n_samples:
        return _fail(
            "config-error",
            f"kmax={args.kmax} exceeds {data.n_samples} rows",
            2,
        )

    candidates = generate_candidates(
        data,
        args.kmax,
        args.gen,
        InitConfig(strategy=args.init, seed=args.seed),
        EmConfig(seed=args.seed),
    )
    try:
        selected_k, fit = select_model(
            candidates, args.select, data=data, k_min=args.kmin
        )
    except ValueError as exc:
        return _fail("config-error", str(exc), 2)

    resp = fit.responsibilities
    if resp is None:
        resp = e_step(data, fit.model)
    assignments = hard_assignments(resp) + 1
    write_labels(f"{args.out}.assignments", assignments)

    name = normalize_criterion(args.select)
    curve = criterion_curve(
        candidates, "bic" if name == "l-method" else name, data
    )
    write_curve_csv(f"{args.out}.curve.csv", curve)
    write_json(f"{args.out}.candidates.json", candidates_to_jsonable(candidates))

    summary = {
        "data": args.data,
        "kmin": args.kmin,
        "kmax": args.kmax,
        "init": args.init,
        "generation": candidates.method,
        "criterion": name,
        "seed": args.seed,
        "selected_k": selected_k,
        "log_likelihood": fit.log_likelihood,
        "weights": fit.model.weights.tolist(),
        "files": {
            "assignments": f"{args.out}.assignments",
            "curve": f"{args.out}.curve.csv",
            "candidates": f"{args.out}.candidates.json",
        },
    }
    if labels is not None:
        summary["ari"] = adjusted_rand_index(labels, assignments)
    write_json(f"{args.out}.json", summary)
    return 0


def _parse_benchmark_config(path, args):
    with open(path) as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise ValueError("config root must be a JSON object")
    datasets = raw.get("datasets")
    methods = raw.get("methods")
    if not datasets or not methods:
        raise ValueError("config needs non-empty 'datasets' and 'methods' lists")
    specs, ids = [], []
    for i, entry in enumerate(datasets):
        spec = SynthSpec(
            n_clusters=int(entry["k"]),
            n_features=int(entry["d"]),
            n_samples=int(entry["n"]),
            separation=entry.get("separation", "ws"),
            dirichlet_alpha=entry.get("alpha"),
            seed=int(entry.get("seed", i)),
        )
        specs.append(spec)
        ids.append(str(entry.get("id", f"dataset-{i}")))
    triples = [
        MethodSpec(
            init=m.get("init", "sm-em"),
            generation=m.get("generation", "em-hac"),
            selection=m.get("selection", "bic"),
        )
        for m in methods
    ]
    repeats = args.repeats if args.repeats is not None else int(raw.get("repeats", 10))
    seed = args.seed if args.seed is not None else int(raw.get("seed", 0))
    k_min = int(raw.get("k_min", 1))
    k_max = int(raw.get("k_max", 10))
    em_config = EmConfig(
        max_iterations=int(raw.get("max_iter", 100)),
        tolerance=float(raw.get("tol", 1e-5)),
    )
    return specs, ids, triples, repeats, seed, k_min, k_max, em_config


def _cmd_benchmark(args) -> int:
    try:
        (
            specs,
            ids,
            methods,
            repeats,
            seed,
            k_min,
            k_max,
            em_config,
        ) = _parse_benchmark_config(args.config, args)
    except FileNotFoundError as exc:
        return _fail("config-error", str(exc), 2)
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        return _fail("config-error", f"bad benchmark config: {exc}", 2)

    try:
        report = run_benchmark(
            specs,
            methods,
            repeats=repeats,
            seed=seed,
            k_min=k_min,
            k_max=k_max,
            em_config=em_config,
            workers=0,
            dataset_ids=ids,
        )
    except SeparationRejectionError as exc:
        return _fail("generation-error", str(exc), 1)
    except ValueError as exc:
        return _fail("config-error", str(exc), 2)

    write_report_csv(f"{args.out}.runs.csv", report)
    write_json(f"{args.out}.json", report_to_jsonable(report))
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "generate":
            return _cmd_generate(args)
        if args.command == "fit":
            return _cmd_fit(args)
        return _cmd_benchmark(args)
    except Exception as exc:  # last resort: keep stderr machine readable
        return _fail("internal-error", f"{type(exc).__name__}: {exc}", 1)


if __name__ == "__main__":
    sys.exit(main())
