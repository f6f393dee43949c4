"""Command-line entry point: ``lrvm bench|stats|boundary``.

Config files are flat ``key = value`` text; ``#`` starts a comment. Unknown
keys are rejected.

bench keys
    datasets      comma-separated CSV paths (relative to the config file)
    label_column  ``last`` (default) or a column index
    classifiers   subset of ``lrvm, rvm-global, knn``
    k_values      LRVM neighbour counts, e.g. ``1-71`` or ``1,2,3``
    knn_k_values  k-NN neighbour counts (default odd 1-71)
    gamma_values  kernel widths, e.g. ``2^-3..2^6`` or ``0.5,1``
    runs, folds   repeated CV protocol for the reported accuracy (10, 10)
    seed          integer, required here or via ``--seed``

boundary keys
    generator     ``ripley`` (default) or omit and give ``dataset``
    dataset, label_column
    n_per_class   generator size per class (125)
    classifier    ``lrvm`` (default) or ``rvm-global``
    k, gamma      LRVM neighbours (20) and kernel width (0.5)
    seed          integer, required here or via ``--seed``
"""
from __future__ import annotations

import argparse
import csv
import io
import sys
from pathlib import Path

import numpy as np

from .dataset import DatasetError, gen_ripley, load_csv, zscore_apply, zscore_fit
from .evaluation import (FAMILIES, GridSpec, NEMENYI_Q05, fit_global_rvm, format_accuracy_csv,
                         friedman_report, grid_search, read_accuracy_csv, run_cv)
from .kernel import build_gram
from .localized import LrvmConfig, classify_local

EXIT_OK, EXIT_PARTIAL, EXIT_USAGE = 0, 1, 2


class ConfigError(ValueError):
    pass


BENCH_KEYS = {"datasets", "label_column", "classifiers", "k_values", "knn_k_values",
              "gamma_values", "runs", "folds", "seed"}
BOUNDARY_KEYS = {"generator", "dataset", "label_column", "n_per_class", "classifier",
                 "k", "gamma", "seed"}


def read_config(path, allowed: set[str]) -> dict[str, str]:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    cfg = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in allowed:
            raise ConfigError(f"{path}:{lineno}: unknown key '{key}'")
        cfg[key] = value
    return cfg


def parse_ints(text: str) -> tuple[int, ...]:
    """``1-5,7`` -> (1, 2, 3, 4, 5, 7); ``1-71:2`` steps by 2."""
    out = []
    for part in filter(None, (p.strip() for p in text.split(","))):
        if "-" in part[1:]:
            rng, _, step = part.partition(":")
            lo, hi = rng.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1, int(step or 1)))
        else:
            out.append(int(part))
    if not out or min(out) < 1:
        raise ConfigError(f"invalid integer list '{text}'")
    return tuple(out)


def parse_floats(text: str) -> tuple[float, ...]:
    """``2^-3..2^6`` expands to powers of two; otherwise a comma list."""
    text = text.strip()
    if ".." in text and "^" in text:
        lo, hi = text.split("..")
        base, e0 = lo.split("^")
        _, e1 = hi.split("^")
        out = tuple(float(base) ** e for e in range(int(e0), int(e1) + 1))
    else:
        out = tuple(float(v) for v in text.split(",") if v.strip())
    if not out or min(out) <= 0:
        raise ConfigError(f"invalid positive value list '{text}'")
    return out


def _seed(cfg, args) -> int:
    if args.seed is not None:
        return args.seed
    if "seed" not in cfg:
        raise ConfigError("a seed is required (config key 'seed' or --seed)")
    return int(cfg["seed"])


def _write_csv(path: Path, rows) -> None:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    path.write_text(buf.getvalue(), encoding="utf-8")


def _fmt(v) -> str:
    return "" if v is None else (repr(float(v)) if isinstance(v, (float, np.floating)) else str(v))


def cmd_bench(args) -> int:
    try:
        cfg_path = Path(args.config)
        cfg = read_config(cfg_path, BENCH_KEYS)
        seed = _seed(cfg, args)
        if "datasets" not in cfg:
            raise ConfigError("config needs 'datasets'")
        paths = [(cfg_path.parent / p.strip()) for p in cfg["datasets"].split(",") if p.strip()]
        names = [c.strip() for c in cfg.get("classifiers", "lrvm").split(",") if c.strip()]
        unknown = [n for n in names if n not in FAMILIES]
        if unknown or not names or not paths:
            raise ConfigError(f"need datasets and classifiers from {sorted(FAMILIES)}; got {names}")
        grid = GridSpec(
            k_values=parse_ints(cfg.get("k_values", "1-71")),
            gamma_values=parse_floats(cfg.get("gamma_values", "2^-3..2^6")),
            knn_k_values=parse_ints(cfg.get("knn_k_values", "1-71:2")),
        )
        runs = int(cfg.get("runs", 10))
        folds = int(cfg.get("folds", 10))
        datasets = [load_csv(p, cfg.get("label_column", "last")) for p in paths]
    except (ConfigError, DatasetError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    status = EXIT_OK
    matrix = np.full((len(datasets), len(names)), np.nan)
    reports = {}
    for di, data in enumerate(datasets):
        rows = [["classifier", "accuracy", "std", "k", "gamma", "mean_lrv", "mean_iterations",
                 "runs", "folds", "status"]]
        fold_rows = [["classifier", "run", "fold", "accuracy"]]
        for ci, name in enumerate(names):
            family = FAMILIES[name]()
            try:
                params, _ = grid_search(family, data, grid, seed=seed, folds=folds)
                res = run_cv(family, params, data, runs=runs, folds=folds, seed=seed)
            except Exception as exc:  # a failed cell must not sink the whole benchmark
                print(f"error: {data.name}/{name}: {exc}", file=sys.stderr)
                rows.append([name, "nan", "nan", "", "", "", "", runs, folds, f"failed: {exc}"])
                status = EXIT_PARTIAL
                continue
            matrix[di, ci] = res.mean_accuracy
            rows.append([name, _fmt(res.mean_accuracy), _fmt(res.std_accuracy), _fmt(params.get("k")),
                         _fmt(params.get("gamma")), _fmt(res.mean_lrv), _fmt(res.mean_iterations),
                         runs, folds, "ok"])
            for r in range(runs):
                for f in range(folds):
                    fold_rows.append([name, r, f, _fmt(res.fold_accuracies[r, f])])
            print(f"{data.name} {name}: accuracy {res.mean_accuracy:.4f} params {params} "
                  f"({res.wall_clock:.1f}s)", file=sys.stderr)
        reports[data.name] = (rows, fold_rows)

    for dname, (rows, fold_rows) in reports.items():
        _write_csv(out / f"{dname}_cv.csv", rows)
        _write_csv(out / f"{dname}_folds.csv", fold_rows)
    (out / "accuracy.csv").write_text(
        format_accuracy_csv([d.name for d in datasets], names, matrix), encoding="utf-8")
    return status


def cmd_stats(args) -> int:
    try:
        datasets, classifiers, A = read_accuracy_csv(args.accuracy_csv)
        cv_alpha = args.cv_alpha
        if cv_alpha is None:
            if len(classifiers) not in NEMENYI_Q05:
                raise ValueError(f"no tabulated critical value for {len(classifiers)} classifiers; pass --cv-alpha")
            cv_alpha = NEMENYI_Q05[len(classifiers)]
        report = friedman_report(A, classifiers, cv_alpha)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    text = report.to_text()
    (out / "friedman.txt").write_text(text, encoding="utf-8")
    _write_csv(out / "friedman.csv", report.to_csv_rows())
    sys.stdout.write(text)
    return EXIT_OK


def boundary_grid(X, resolution: int) -> np.ndarray:
    """Regular grid over the bounding box of ``X`` widened by 10% per side."""
    lo, hi = X.min(axis=0), X.max(axis=0)
    pad = 0.1 * (hi - lo)
    lo, hi = lo - pad, hi + pad
    if resolution == 1:
        axes = [np.array([(a + b) / 2]) for a, b in zip(lo, hi)]
    else:
        axes = [np.linspace(a, b, resolution) for a, b in zip(lo, hi)]
    g1, g2 = np.meshgrid(axes[0], axes[1], indexing="ij")
    return np.column_stack([g1.ravel(), g2.ravel()])


def cmd_boundary(args) -> int:
    try:
        cfg_path = Path(args.config)
        cfg = read_config(cfg_path, BOUNDARY_KEYS)
        seed = _seed(cfg, args)
        if "dataset" in cfg:
            data = load_csv(cfg_path.parent / cfg["dataset"], cfg.get("label_column", "last"))
        elif cfg.get("generator", "ripley") == "ripley":
            data = gen_ripley(int(cfg.get("n_per_class", 125)), seed)
        else:
            raise ConfigError(f"unknown generator '{cfg['generator']}'")
        if data.n_features != 2:
            raise ConfigError(f"boundary export needs 2-D data, got {data.n_features} features")
        classifier = cfg.get("classifier", "lrvm")
        if classifier not in ("lrvm", "rvm-global"):
            raise ConfigError(f"unknown classifier '{classifier}'")
        gamma = float(cfg.get("gamma", 0.5))
        k = int(cfg.get("k", 20))
        if args.grid < 1:
            raise ConfigError("--grid must be >= 1")
        lcfg = LrvmConfig(k=min(k, data.n_samples), gamma=gamma)
    except (ConfigError, DatasetError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    stats = zscore_fit(data)
    train = data.with_features(zscore_apply(stats, data.features))
    G = boundary_grid(data.features, args.grid)
    Gn = zscore_apply(stats, G)
    binary = data.class_count == 2

    global_model = fit_global_rvm(train, gamma)
    grid_rows = [["x1", "x2", "probability", "predicted_class"]]
    vec_rows = [["query", "model", "iterations", "vector_count", "indices"]]
    rv_idx = sorted(set().union(*(set(m.basis_rows.tolist()) for m in global_model.models)))
    vec_rows.append([-1, "rvm-global", global_model.iterations, len(rv_idx), ";".join(map(str, rv_idx))])

    status = EXIT_OK
    if classifier == "rvm-global":
        for q, (g, gn) in enumerate(zip(G, Gn)):
            s = global_model.scores(train.features, gn)
            c = int(np.argmax(s))
            grid_rows.append([_fmt(g[0]), _fmt(g[1]), _fmt(s[1] if binary else s[c]), c])
    else:
        table = build_gram(train.features, gamma)
        for q, (g, gn) in enumerate(zip(G, Gn)):
            try:
                p = classify_local(gn, train, table, lcfg)
            except Exception as exc:
                print(f"error: grid point {q}: {exc}", file=sys.stderr)
                status = EXIT_PARTIAL
                continue
            prob = p.probabilities[1] if binary else p.probabilities[p.predicted_class]
            grid_rows.append([_fmt(g[0]), _fmt(g[1]), _fmt(prob), p.predicted_class])
            vec_rows.append([q, "lrvm-shortcut" if p.shortcut else "lrvm", p.iterations, p.lrv_count,
                             ";".join(map(str, p.lrv_indices.tolist()))])

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "boundary_grid.csv", grid_rows)
    _write_csv(out / "boundary_vectors.csv", vec_rows)
    return status


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lrvm", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bench", help="grid search + repeated stratified CV on CSV datasets")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default="results")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("stats", help="Friedman / Nemenyi statistics on an accuracy table")
    p.add_argument("accuracy_csv")
    p.add_argument("--cv-alpha", type=float, dest="cv_alpha")
    p.add_argument("--out", default="stats")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("boundary", help="decision-boundary grid and RV/LRV export for 2-D data")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default="boundary")
    p.add_argument("--grid", type=int, default=50)
    p.set_defaults(func=cmd_boundary)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
