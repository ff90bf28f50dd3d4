"""Command-line entry points binding the package into an end-to-end pipeline.

Commands:

  build-graphs   turn a directory of patch files into cell-graph files
  train          train a fusion model from a config file
  eval           evaluate a saved checkpoint on a manifest split
  synth          run the synthetic regression sweep
  gradcheck      verify analytic gradients against finite differences
  bench          compare the compiled and pure-numpy kernel backends

Exit codes: 0 success, 1 usage error, 2 data error (unreadable or malformed
inputs), 3 numeric failure (non-finite losses, failed gradient checks,
undefined metrics).

Every command is deterministic given its seed.  The only supported
environment variables are CELLFUSE_NUMBA (kernel backend selection) and
CELLFUSE_CACHE_DIR, which relocates the compiled-kernel cache.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

_BUNDLE_SUFFIX = ".patch"
_GRAPH_SUFFIX = ".graph"


class _Parser(argparse.ArgumentParser):
    """argparse parser whose usage failures exit 1 instead of 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _fail_data(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return EXIT_DATA


# ---------------------------------------------------------------------------
# build-graphs


def _build_one(task):
    """Worker for one bundle file; returns (out_name, text, nodes, edges)."""
    from cellfuse.cellgraph import build_graph, parse_bundle, serialize_graph

    path, d_c, n_bins = task
    with open(path, encoding="utf-8") as fh:
        bundle = parse_bundle(fh.read())
    graph = build_graph(bundle, d_c, n_bins)
    stem = os.path.basename(path)
    if stem.endswith(_BUNDLE_SUFFIX):
        stem = stem[: -len(_BUNDLE_SUFFIX)]
    return stem + _GRAPH_SUFFIX, serialize_graph(graph), graph.n_nodes, graph.n_edges


def cmd_build_graphs(args) -> int:
    if not os.path.isdir(args.input):
        return _fail_data(f"input directory not found: {args.input}")
    os.makedirs(args.output, exist_ok=True)
    paths = sorted(
        os.path.join(args.input, name)
        for name in os.listdir(args.input)
        if name.endswith(_BUNDLE_SUFFIX)
    )
    tasks = [(path, args.dc, args.bins) for path in paths]
    results, failures = [], 0
    if args.jobs > 1 and len(tasks) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            futures = list(pool.map(_safe_build, tasks))
        for path, outcome in zip(paths, futures):
            if isinstance(outcome, str):
                print(f"error: {path}: {outcome}", file=sys.stderr)
                failures += 1
            else:
                results.append(outcome)
    else:
        for task in tasks:
            try:
                results.append(_build_one(task))
            except (ValueError, OSError) as exc:
                print(f"error: {task[0]}: {exc}", file=sys.stderr)
                failures += 1
    for out_name, text, _, _ in results:
        with open(os.path.join(args.output, out_name), "w", encoding="utf-8") as fh:
            fh.write(text)
    if results:
        nodes = [r[2] for r in results]
        edges = [r[3] for r in results]
        print(
            f"patches {len(results)}  failed {failures}  "
            f"min_nodes {min(nodes)}  avg_nodes {sum(nodes) / len(nodes):.1f}  "
            f"min_edges {min(edges)}  avg_edges {sum(edges) / len(edges):.1f}"
        )
    else:
        print(f"patches 0  failed {failures}")
    return EXIT_DATA if failures else EXIT_OK


def _safe_build(task):
    try:
        return _build_one(task)
    except (ValueError, OSError) as exc:
        return str(exc)


# ---------------------------------------------------------------------------
# train / eval


def _apply_overrides(cfg, args):
    from dataclasses import replace

    updates = {}
    if getattr(args, "manifest", None):
        updates["manifest"] = args.manifest
    if getattr(args, "out", None):
        updates["out_dir"] = args.out
    if getattr(args, "seed", None) is not None:
        updates["seed"] = args.seed
    return replace(cfg, **updates) if updates else cfg


def _check_graph_files(manifest_path: str) -> None:
    """Fail early, naming the build-graphs flag, when graph files are absent."""
    base = os.path.dirname(os.path.abspath(manifest_path))
    missing = []
    with open(manifest_path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 3:
                return  # leave malformed lines to the manifest parser
            graph_path = os.path.join(base, parts[1])
            if not os.path.exists(graph_path):
                missing.append(parts[1])
    if missing:
        raise FileNotFoundError(
            f"{len(missing)} graph file(s) missing (first: {missing[0]}); "
            "build them first with: cellfuse build-graphs --dc <distance>"
        )


def _identity_standardizer(width: int):
    import numpy as np

    from cellfuse.pipeline import Standardizer

    return Standardizer(np.zeros(width), np.ones(width))


_ARCH_KEYS = (
    "mode", "cnn_kind", "gnn_kind", "cnn_width", "d_image", "gnn_hidden",
    "d_graph", "ratio", "n_blocks", "alignment", "predefined_dim",
    "mlp_embed", "heads", "dropout", "activation",
)


def _arch_meta(cfg) -> dict:
    kwargs = cfg.model_kwargs()
    meta = {key: str(kwargs[key]) for key in _ARCH_KEYS}
    meta["ratio"] = "none" if kwargs["ratio"] is None else repr(kwargs["ratio"])
    meta["dropout"] = repr(kwargs["dropout"])
    return meta


def _arch_from_meta(meta: dict) -> dict:
    ints = {"cnn_width", "d_image", "gnn_hidden", "d_graph", "n_blocks",
            "predefined_dim", "mlp_embed", "heads"}
    out = {}
    for key in _ARCH_KEYS:
        if key not in meta:
            raise ValueError(f"checkpoint lacks architecture entry {key!r}")
        raw = meta[key]
        if key in ints:
            out[key] = int(raw)
        elif key == "dropout":
            out[key] = float(raw)
        elif key == "ratio":
            out[key] = None if raw == "none" else float(raw)
        else:
            out[key] = raw
    return out


def _floats_to_meta(values) -> str:
    return " ".join(repr(float(v)) for v in values)


def _floats_from_meta(raw: str):
    import numpy as np

    return np.array([float(tok) for tok in raw.split()], dtype=np.float64)


def cmd_train(args) -> int:
    from cellfuse import pipeline
    from cellfuse.config import read_config

    cfg = _apply_overrides(read_config(args.config), args)
    if cfg.manifest is None:
        return _fail_data(
            f"{args.config}: key 'manifest' must be set (or pass --manifest)"
        )
    _check_graph_files(cfg.manifest)
    splits = pipeline.read_manifest(cfg.manifest)
    if not splits["train"] or not splits["val"]:
        return _fail_data(
            f"{cfg.manifest}: needs non-empty train and val splits, got "
            f"{len(splits['train'])} train / {len(splits['val'])} val samples"
        )
    os.makedirs(cfg.out_dir, exist_ok=True)

    model = pipeline.build_model(cfg.seed, **cfg.model_kwargs())
    tcfg = pipeline.TrainConfig(
        lr_max=cfg.lr_max, lr_min=cfg.lr_min, t_max=cfg.t_max,
        weight_decay=cfg.weight_decay, batch_size=cfg.batch_size,
        max_epochs=cfg.max_epochs, patience=cfg.patience, seed=cfg.seed,
    )
    standardizer = None
    if cfg.feature_norm == "none":
        width = splits["train"][0].graph.x.shape[1]
        standardizer = _identity_standardizer(width)
    t0 = time.time()
    result = pipeline.train(model, splits["train"], splits["val"], tcfg, standardizer)

    meta = _arch_meta(cfg)
    meta["seed"] = str(cfg.seed)
    meta["feature_norm"] = cfg.feature_norm
    meta["feature_mean"] = _floats_to_meta(result.standardizer.mean)
    meta["feature_std"] = _floats_to_meta(result.standardizer.std)
    ckpt_path = os.path.join(cfg.out_dir, "model.ckpt")
    pipeline.save_checkpoint(ckpt_path, model, meta)

    eval_split = "test" if splits["test"] else "val"
    report = pipeline.evaluate(
        model, splits[eval_split], result.standardizer, cfg.batch_size
    )
    metrics_path = os.path.join(cfg.out_dir, "metrics.csv")
    pipeline.write_metrics(
        metrics_path, [(0, cfg.seed, report.acc, report.auc, report.auc_patient)]
    )
    for note in report.notes:
        print(f"note: {note}", file=sys.stderr)
    print(
        f"trained {result.epochs_run} epochs (best {result.best_epoch}, "
        f"val loss {result.best_val_loss:.4f}) in {time.time() - t0:.1f}s; "
        f"{eval_split} acc {_fmt_metric(report.acc)} "
        f"auc {_fmt_metric(report.auc)} "
        f"auc_patient {_fmt_metric(report.auc_patient)}; "
        f"wrote {ckpt_path} and {metrics_path}"
    )
    return EXIT_OK


def _fmt_metric(value) -> str:
    return "n/a" if value is None else f"{value:.4f}"


def cmd_eval(args) -> int:
    from cellfuse import pipeline

    meta, _ = pipeline.read_checkpoint(args.model)
    model = pipeline.build_model(int(meta.get("seed", "0")), **_arch_from_meta(meta))
    pipeline.load_checkpoint(args.model, model)
    if "feature_mean" not in meta or "feature_std" not in meta:
        return _fail_data(f"{args.model}: checkpoint lacks feature scaling entries")
    standardizer = pipeline.Standardizer(
        _floats_from_meta(meta["feature_mean"]), _floats_from_meta(meta["feature_std"])
    )
    splits = pipeline.read_manifest(args.manifest)
    samples = splits[args.split]
    if not samples:
        return _fail_data(f"{args.manifest}: split {args.split!r} is empty")
    report = pipeline.evaluate(model, samples, standardizer)
    for note in report.notes:
        print(f"note: {note}", file=sys.stderr)
    if args.out:
        pipeline.write_metrics(
            args.out,
            [(0, int(meta.get("seed", "0")), report.acc, report.auc, report.auc_patient)],
        )
    print(
        f"{args.split} acc {_fmt_metric(report.acc)} "
        f"auc {_fmt_metric(report.auc)} "
        f"auc_patient {_fmt_metric(report.auc_patient)}"
        + (f"; wrote {args.out}" if args.out else "")
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# synth


def alpha_list(raw: str):
    try:
        values = tuple(float(tok) for tok in raw.split(",") if tok.strip())
    except ValueError:
        raise ValueError(f"expected comma-separated numbers, got {raw!r}")
    if not values:
        raise ValueError("expected at least one value")
    if any(not 0.0 <= a <= 1.0 for a in values):
        raise ValueError(f"alphas must lie in [0, 1], got {raw!r}")
    return values


def write_plot_data(path, summary) -> None:
    """Whitespace table (one row per alpha) ready for gnuplot-style tooling."""
    from cellfuse.synth import MODELS

    by_alpha: dict = {}
    for alpha, model, mean_rmse, std_rmse in summary:
        by_alpha.setdefault(alpha, {})[model] = (mean_rmse, std_rmse)
    cols = [f"{m}_{s}" for m in MODELS for s in ("mean", "std")]
    lines = ["# alpha " + " ".join(cols)]
    for alpha in sorted(by_alpha):
        row = [f"{alpha:g}"]
        for model in MODELS:
            mean_rmse, std_rmse = by_alpha[alpha][model]
            row.append(f"{mean_rmse:.6f}")
            row.append(f"{std_rmse:.6f}")
        lines.append(" ".join(row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def cmd_synth(args) -> int:
    from dataclasses import replace

    from cellfuse import synth

    cfg = replace(
        synth.SynthConfig(), seed=args.seed, n_pairs=args.pairs,
        n_teachers=args.teachers,
    )
    os.makedirs(args.out, exist_ok=True)
    t0 = time.time()
    rows = synth.run_sweep(args.alphas, runs=args.runs, cfg=cfg)
    sweep_path = os.path.join(args.out, "sweep.csv")
    summary_path = os.path.join(args.out, "summary.csv")
    plot_path = os.path.join(args.out, "sweep.dat")
    synth.write_sweep_csv(sweep_path, rows)
    synth.write_summary_csv(summary_path, rows)
    write_plot_data(plot_path, synth.summarize(rows))
    print(
        f"{len(args.alphas)} alphas x {args.runs} runs x 3 models in "
        f"{time.time() - t0:.1f}s; wrote {sweep_path}, {summary_path}, {plot_path}"
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# gradcheck / bench


def cmd_gradcheck(args) -> int:
    from cellfuse import gradcheck

    checks = dict(gradcheck.CHECKS)
    if args.include_negative_control:
        checks["negative_control"] = gradcheck.broken_linear_check
    seeds = tuple(range(args.seed, args.seed + args.seeds))
    results = gradcheck.run_suite(seeds=seeds, checks=checks)
    print(gradcheck.format_report(results))
    return EXIT_OK if all(r.passed for r in results) else EXIT_NUMERIC


def cmd_bench(args) -> int:
    from cellfuse import backend, bench

    print(f"active backend: {backend.backend_name()}")
    rows = bench.run_bench(repeat=args.repeat, seed=args.seed)
    print(bench.format_table(rows))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser wiring


def build_parser() -> _Parser:
    parser = _Parser(
        prog="cellfuse",
        description="Image + cell-graph fusion pipeline tools.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser(
        "build-graphs",
        help="build cell-graph files from a directory of patch files",
    )
    p.add_argument("--input", required=True, help="directory of *.patch files")
    p.add_argument("--output", required=True, help="directory for *.graph files")
    p.add_argument("--dc", type=float, required=True,
                   help="critical distance in pixels (no default)")
    p.add_argument("--bins", type=int, default=32,
                   help="gray-level bins for texture features (default 32)")
    p.add_argument("--jobs", type=int, default=1,
                   help="parallel workers, one patch each (default 1)")
    p.set_defaults(handler=cmd_build_graphs)

    p = sub.add_parser("train", help="train a model from a config file")
    p.add_argument("--config", required=True, help="key = value config file")
    p.add_argument("--manifest", help="override the config's manifest path")
    p.add_argument("--out", help="override the config's output directory")
    p.add_argument("--seed", type=int, help="override the config's seed")
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a manifest split")
    p.add_argument("--model", required=True, help="checkpoint file")
    p.add_argument("--manifest", required=True, help="dataset manifest")
    p.add_argument("--split", choices=("train", "val", "test"), default="test",
                   help="manifest split to score (default test)")
    p.add_argument("--out", help="optional metrics CSV path")
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("synth", help="run the synthetic regression sweep")
    p.add_argument("--alphas", type=alpha_list,
                   default="0.0,0.1,0.3,0.5,0.7,0.9,1.0",
                   help="comma-separated mixing weights in [0, 1] "
                        "(default 0.0,0.1,0.3,0.5,0.7,0.9,1.0)")
    p.add_argument("--runs", type=int, default=5,
                   help="training runs per (alpha, model) cell (default 5)")
    p.add_argument("--seed", type=int, default=0, help="sweep seed (default 0)")
    p.add_argument("--out", default=".", help="output directory (default .)")
    p.add_argument("--pairs", type=int, default=2000,
                   help="generated image/graph pairs (default 2000)")
    p.add_argument("--teachers", type=int, default=5,
                   help="frozen teacher networks per modality (default 5)")
    p.set_defaults(handler=cmd_synth)

    p = sub.add_parser("gradcheck", help="finite-difference gradient verification")
    p.add_argument("--seed", type=int, default=0, help="first seed (default 0)")
    p.add_argument("--seeds", type=int, default=20,
                   help="number of consecutive seeds (default 20)")
    p.add_argument("--include-negative-control", action="store_true",
                   help="also run the deliberately wrong gradient "
                        "(must fail; verifies the harness)")
    p.set_defaults(handler=cmd_gradcheck)

    p = sub.add_parser("bench", help="compare numba and numpy kernel backends")
    p.add_argument("--repeat", type=int, default=5,
                   help="calls per measurement (default 5)")
    p.add_argument("--seed", type=int, default=0, help="workload seed (default 0)")
    p.set_defaults(handler=cmd_bench)

    return parser


def main(argv=None) -> int:
    cache_dir = os.environ.get("CELLFUSE_CACHE_DIR")
    if cache_dir:
        os.environ.setdefault("NUMBA_CACHE_DIR", cache_dir)

    parser = build_parser()
    args = parser.parse_args(argv)
    for name in ("jobs", "bins", "runs", "pairs", "teachers", "seeds", "repeat"):
        if getattr(args, name, 1) < 1:
            parser.error(f"--{name} must be positive")
    if getattr(args, "dc", 1.0) <= 0:
        parser.error("--dc must be positive")

    from cellfuse.cellgraph import GraphFormatError
    from cellfuse.config import ConfigError
    from cellfuse.pipeline import CheckpointError, MetricUndefinedError

    try:
        return args.handler(args)
    except MetricUndefinedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, GraphFormatError, CheckpointError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    raise SystemExit(main())
