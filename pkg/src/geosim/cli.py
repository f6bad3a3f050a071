"""Command-line interface: train embeddings, evaluate them, plot them.

Exit codes: 0 success, 1 validation or usage error, 2 I/O failure.
"""

from __future__ import annotations

import argparse
import struct
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .io import (
    FormatError,
    IDX_MAGIC_IMAGES,
    IDX_MAGIC_LABELS,
    load_csv_matrix,
    load_edge_list,
    load_embedding,
    load_idx,
    load_labels,
    parse_config,
    resolve_config,
    save_embedding,
    write_metrics,
    write_run_header,
    write_training_log,
)
from .metrics import (
    LabeledEmbedding,
    continuity,
    knn_accuracy,
    linear_probe,
    stratified_split,
    trustworthiness,
)
from .svg import render_scatter_svg
from .tasks import run_dr_task, run_ge_task, run_kd_task

__all__ = ["cli_main", "main", "UsageError"]


class UsageError(ValueError):
    """Bad command line; carries the usage text."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 through the normal error path, not SystemExit(2)
        raise UsageError(f"{message}\n{self.format_usage()}")


def _load_features(path):
    """CSV or IDX by content sniffing (gzip transparently unwrapped)."""
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head[:2] == b"\x1f\x8b" or (
        len(head) == 4 and struct.unpack(">I", head)[0] in (IDX_MAGIC_IMAGES, IDX_MAGIC_LABELS)
    ):
        data = load_idx(path)
        if isinstance(data, np.ndarray):
            raise FormatError(path, "expected image data, found an IDX label file")
        return data
    return load_csv_matrix(path)


def _evaluation_rows(z, labels, reference, eval_k=10, vote_k=5, eval_fraction=0.5, seed=0):
    rows = []
    if reference is not None:
        rows.append(("trustworthiness", eval_k, trustworthiness(reference, z, k=eval_k, seed=seed)))
        rows.append(("continuity", eval_k, continuity(reference, z, k=eval_k, seed=seed)))
    if labels is not None:
        tr, te = stratified_split(labels, eval_fraction, seed=seed)
        train = LabeledEmbedding(z=z[tr], labels=labels[tr])
        test = LabeledEmbedding(z=z[te], labels=labels[te])
        rows.append(("knn_accuracy", vote_k, knn_accuracy(train, test, k=vote_k)))
        rows.append(("linear_probe", None, linear_probe(train, test)))
    return rows


def _run_training(task: str, args) -> int:
    raw = parse_config(args.config)
    overrides = {
        "seed": args.seed,
        "epochs": args.epochs,
        "batch_size": args.batch_size,
        "loss": args.loss,
        "nu_z": args.nu_z,
        "sigma_x": args.sigma_x,
        "alpha2": args.alpha2,
        "fusion": args.fusion,
        "mask_fraction": args.mask_fraction,
        "out": args.out,
        "preset": args.preset,
    }
    config = resolve_config(task, raw, overrides)
    outdir = Path(config.paths.get("out", f"geosim_{task}"))
    outdir.mkdir(parents=True, exist_ok=True)
    write_run_header(outdir / "run_header.txt", config, __version__)

    labels = None
    if task == "dr":
        data = _load_features(config.paths["data"])
        if "labels" in config.paths:
            labels = load_labels(config.paths["labels"], n=data.n)
        result = run_dr_task(data, spec=config.spec)
        reference = data.values
    elif task == "ge":
        data = _load_features(config.paths["data"])
        edges = load_edge_list(config.paths["edges"])
        if "labels" in config.paths:
            labels = load_labels(config.paths["labels"], n=data.n)
        result = run_ge_task(data, edges, spec=config.spec)
        reference = data.values
    else:
        data = _load_features(config.paths["student"])
        teacher = _load_features(config.paths["teacher"])
        if "labels" in config.paths:
            labels = load_labels(config.paths["labels"], n=data.n)
        result = run_kd_task(data, teacher, spec=config.spec)
        reference = teacher.values

    save_embedding(result.embedding, outdir / "embedding.csv", labels=labels)
    write_training_log(outdir / "training_log.csv", result.log)
    rows = _evaluation_rows(
        result.embedding,
        labels,
        reference,
        eval_k=config.eval_k,
        vote_k=config.vote_k,
        eval_fraction=config.eval_fraction,
        seed=config.spec.seed,
    )
    write_metrics(outdir / "metrics.csv", rows)

    final = result.log[-1]
    print(f"{task}: trained {result.embedding.shape[0]} points -> {outdir}")
    print(f"final epoch {final.epoch}: loss {final.loss:.6g}")
    for name, k, value in rows:
        print(f"{name}{'' if k is None else f'@{k}'}: {value:.4f}")
    return 0


def _run_eval(args) -> int:
    z, file_labels = load_embedding(args.embedding)
    labels = file_labels
    if args.labels is not None:
        labels = load_labels(args.labels, n=z.shape[0])
    reference = _load_features(args.data).values if args.data is not None else None
    rows = _evaluation_rows(z, labels, reference, eval_k=args.k, seed=args.seed)
    if not rows:
        raise UsageError("nothing to evaluate: pass --data for rank metrics or labels for accuracy")
    for name, k, value in rows:
        print(f"{name},{'' if k is None else k},{value:.10g}")
    if args.out is not None:
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        write_metrics(outdir / "metrics.csv", rows)
    return 0


def _run_plot(args) -> int:
    z, file_labels = load_embedding(args.embedding)
    labels = file_labels
    if args.labels is not None:
        labels = load_labels(args.labels, n=z.shape[0])
    outdir = Path(args.out) if args.out is not None else Path(".")
    outdir.mkdir(parents=True, exist_ok=True)
    target = outdir / "scatter.svg"
    render_scatter_svg(z, labels=labels, path=target)
    print(f"wrote {target}")
    return 0


def _add_train_parser(sub, name: str, help_text: str):
    p = sub.add_parser(name, help=help_text)
    p.add_argument("--config", required=True, help="flat key = value run configuration")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    p.add_argument("--loss", choices=("mse", "kl", "bce", "gkl"), default=None)
    p.add_argument("--nu-z", dest="nu_z", type=float, default=None)
    p.add_argument("--sigma-x", dest="sigma_x", type=float, default=None)
    p.add_argument("--alpha2", type=float, default=None)
    p.add_argument("--fusion", choices=("static", "dynamic"), default=None)
    p.add_argument("--mask-fraction", dest="mask_fraction", type=float, default=None)
    p.add_argument("--out", default=None, help="output directory (overrides config)")
    p.add_argument("--preset", default=None, help="named parameter preset")
    return p


def _build_parser() -> _Parser:
    parser = _Parser(prog="geosim", description=__doc__)
    parser.add_argument("--version", action="version", version=f"geosim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    _add_train_parser(sub, "dr", "dimension reduction from a feature matrix")
    _add_train_parser(sub, "ge", "node embedding from a graph plus features")
    _add_train_parser(sub, "kd", "distill a teacher's relations into an encoder")

    pe = sub.add_parser("eval", help="metrics for a saved embedding")
    pe.add_argument("--embedding", required=True)
    pe.add_argument("--data", default=None, help="reference features for rank metrics")
    pe.add_argument("--labels", default=None)
    pe.add_argument("--k", type=int, default=10)
    pe.add_argument("--seed", type=int, default=0)
    pe.add_argument("--out", default=None)

    pp = sub.add_parser("plot", help="SVG scatter of a 2-D embedding")
    pp.add_argument("--embedding", required=True)
    pp.add_argument("--labels", default=None)
    pp.add_argument("--out", default=None)
    return parser


def cli_main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
        if args.command in ("dr", "ge", "kd"):
            return _run_training(args.command, args)
        if args.command == "eval":
            return _run_eval(args)
        return _run_plot(args)
    except UsageError as exc:
        print(f"geosim: {exc}", file=sys.stderr)
        return 1
    except (ValueError, FloatingPointError) as exc:  # covers ConfigError and FormatError
        print(f"geosim: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"geosim: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli_main())
