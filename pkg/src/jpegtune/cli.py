"""Command-line interface: optimize / evaluate / export workflows.

Every command writes its artifacts plus a run manifest (resolved
configuration, seed, versions, artifact hashes) under the output
directory, so a run can be reproduced bit for bit from the manifest.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import platform
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__, dataset, entropy, evaluation, optimizer, taskloss
from .codec.quantize import QuantTablePair, default_tables

MANIFEST_FORMAT = "jpegtune-manifest-v1"


@dataclass
class RunConfig:
    command: str
    dataset: str | None = None
    labels: str | None = None
    out: str = "runs/out"
    steps: int = 1000
    batch: int = 4
    lr: float = 1e-4
    cr: float | None = None
    cd: float | None = None
    cc: float | None = None
    qmin: int = 10
    qmax: int = 90
    qlist: str | None = None
    layout: str = "420"
    seed: int = 0
    tables: str | None = None
    entropy_ckpt: str | None = None
    classifier_ckpt: str | None = None
    size: int = 299

    def train_q_choices(self) -> tuple[int, ...]:
        if self.qlist:
            return tuple(int(tok) for tok in self.qlist.split(","))
        return tuple(range(self.qmin, self.qmax + 1))

    def eval_q_list(self) -> list[int]:
        if self.qlist:
            return [int(tok) for tok in self.qlist.split(",")]
        return list(range(10, 91, 10))


_DEFAULT_WEIGHTS = {
    "optimize-rd": (1.0, 1.0, 0.0),
    "optimize-ra": (10.0, 0.0, 1.0),
    "optimize-per-image": (1.0, 1.0, 0.0),
}

_FIELD_TYPES = {
    "dataset": str, "labels": str, "out": str, "steps": int, "batch": int,
    "lr": float, "cr": float, "cd": float, "cc": float, "qmin": int,
    "qmax": int, "qlist": str, "layout": str, "seed": int, "tables": str,
    "entropy_ckpt": str, "classifier_ckpt": str, "size": int,
}


def parse_config_file(path: str | Path) -> dict:
    """Line-based `key = value` configuration with '#' comments."""
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        key, _, raw = line.partition("=")
        key = key.strip().replace("-", "_")
        if key not in _FIELD_TYPES:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = _FIELD_TYPES[key](raw.strip())
    return values


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jpegtune",
        description="Optimize JPEG quantization tables by gradient descent "
                    "and evaluate them against a built-in baseline codec.")
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "optimize-rd": "optimize tables for rate-distortion over a corpus",
        "optimize-ra": "optimize tables for rate-accuracy (needs labels)",
        "optimize-per-image": "fit tables to each image individually",
        "eval-curve": "sweep quality factors and measure bpp/PSNR/accuracy",
        "estimate-vs-actual": "compare learned bit-rate estimates to actual bpp",
        "export-tables": "re-export a table file (optionally scaled to integers)",
    }
    for name, help_text in commands.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="config file with key = value lines")
        p.add_argument("--dataset", help="directory of P6/P5 PPM images")
        p.add_argument("--labels", help="label index file (filename class per line)")
        p.add_argument("--out", help="output directory (default runs/out)")
        p.add_argument("--steps", type=int, help="optimization steps")
        p.add_argument("--batch", type=int, help="mini-batch size (default 4)")
        p.add_argument("--lr", type=float, help="Adam learning rate (default 1e-4)")
        p.add_argument("--cr", type=float, help="rate weight")
        p.add_argument("--cd", type=float, help="distortion weight")
        p.add_argument("--cc", type=float, help="classification weight")
        p.add_argument("--qmin", type=int, help="training quality range lower end")
        p.add_argument("--qmax", type=int, help="training quality range upper end")
        p.add_argument("--qlist", help="comma-separated quality factors")
        p.add_argument("--layout", choices=["420", "444"], help="chroma layout")
        p.add_argument("--seed", type=int, help="RNG seed")
        p.add_argument("--tables", help="table text file to start from / evaluate")
        p.add_argument("--entropy-ckpt", dest="entropy_ckpt", help="entropy checkpoint")
        p.add_argument("--classifier-ckpt", dest="classifier_ckpt", help="classifier checkpoint")
        p.add_argument("--size", type=int, help="ingestion size (default 299)")
        p.add_argument("--q", type=int, default=None,
                       help="quality factor for export-tables integer output")
    return parser


def resolve_config(args: argparse.Namespace) -> tuple[RunConfig, int | None]:
    cfg = RunConfig(command=args.command)
    if args.config:
        for key, value in parse_config_file(args.config).items():
            setattr(cfg, key, value)
    for key in _FIELD_TYPES:
        value = getattr(args, key, None)
        if value is not None:
            setattr(cfg, key, value)
    return cfg, args.q


def _weights(cfg: RunConfig) -> optimizer.LossWeights:
    dcr, dcd, dcc = _DEFAULT_WEIGHTS.get(cfg.command, (1.0, 1.0, 0.0))
    return optimizer.LossWeights(
        dcr if cfg.cr is None else cfg.cr,
        dcd if cfg.cd is None else cfg.cd,
        dcc if cfg.cc is None else cfg.cc,
    )


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(out_dir: Path, cfg: RunConfig, weights: optimizer.LossWeights | None,
                   artifacts: dict[str, Path]):
    payload = {
        "format": MANIFEST_FORMAT,
        "command": cfg.command,
        "config": asdict(cfg),
        "weights": asdict(weights) if weights else None,
        "seed": cfg.seed,
        "versions": {
            "jpegtune": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
        },
        "artifacts": {name: {"path": str(p.name), "sha256": _sha256(p)}
                      for name, p in artifacts.items()},
    }
    (out_dir / "manifest.json").write_text(json.dumps(payload, indent=2))


def _load_corpus(cfg: RunConfig, need_labels: bool) -> dataset.Corpus:
    if not cfg.dataset:
        raise ValueError(f"{cfg.command} requires --dataset")
    corpus = dataset.ingest(cfg.dataset, size=cfg.size, labels_path=cfg.labels)
    for (img, label), name in zip(corpus.records, corpus.names):
        if need_labels and label is None:
            raise ValueError(f"{cfg.command} requires a label for every image; "
                             f"missing label for {name}")
    if corpus.skipped:
        for name, reason in corpus.skipped:
            print(f"skipped {name}: {reason}", file=sys.stderr)
        print(f"skipped {len(corpus.skipped)} unreadable file(s), "
              f"kept {len(corpus)}", file=sys.stderr)
    return corpus


def _load_tables(cfg: RunConfig) -> QuantTablePair:
    return optimizer.read_tables(cfg.tables) if cfg.tables else default_tables()


def _train_config(cfg: RunConfig, mode: str = "universal",
                  init_tables: QuantTablePair | None = None) -> optimizer.TrainConfig:
    return optimizer.TrainConfig(
        steps=cfg.steps, batch_size=cfg.batch, lr=cfg.lr,
        q_choices=cfg.train_q_choices(), layout=cfg.layout, seed=cfg.seed,
        mode=mode, init_tables=init_tables)


def _cmd_optimize_rd(cfg: RunConfig, out: Path) -> dict[str, Path]:
    corpus = _load_corpus(cfg, need_labels=False)
    weights = _weights(cfg)
    init = optimizer.read_tables(cfg.tables) if cfg.tables else None
    eset = entropy.load_estimator_set(cfg.entropy_ckpt) if cfg.entropy_ckpt else None
    p, eset, trace = optimizer.universal_train(
        corpus.records, _train_config(cfg, init_tables=init), weights, eset=eset)
    optimizer.write_tables(p, out / "tables.txt", header=f"{cfg.command} optimized tables")
    entropy.save_estimator_set(eset, out / "entropy.json")
    optimizer.write_trace_csv(trace, out / "trace.csv")
    return {"tables": out / "tables.txt", "entropy": out / "entropy.json",
            "trace": out / "trace.csv"}


def _cmd_optimize_ra(cfg: RunConfig, out: Path) -> dict[str, Path]:
    corpus = _load_corpus(cfg, need_labels=True)
    weights = _weights(cfg)
    if weights.c_c <= 0:
        raise ValueError("optimize-ra requires a positive classification weight")
    if cfg.classifier_ckpt:
        clf = taskloss.load_classifier(cfg.classifier_ckpt)
    else:
        clf = taskloss.train_toy_classifier(corpus.records, seed=cfg.seed)
    taskloss.save_classifier(clf, out / "classifier.json")
    init = optimizer.read_tables(cfg.tables) if cfg.tables else None
    eset = entropy.load_estimator_set(cfg.entropy_ckpt) if cfg.entropy_ckpt else None
    p, eset, trace = optimizer.universal_train(
        corpus.records, _train_config(cfg, init_tables=init), weights,
        eset=eset, classifier=clf)
    optimizer.write_tables(p, out / "tables.txt", header=f"{cfg.command} optimized tables")
    entropy.save_estimator_set(eset, out / "entropy.json")
    optimizer.write_trace_csv(trace, out / "trace.csv")
    return {"tables": out / "tables.txt", "entropy": out / "entropy.json",
            "trace": out / "trace.csv", "classifier": out / "classifier.json"}


def _cmd_optimize_per_image(cfg: RunConfig, out: Path) -> dict[str, Path]:
    corpus = _load_corpus(cfg, need_labels=False)
    weights = _weights(cfg)
    if not cfg.entropy_ckpt:
        raise ValueError("optimize-per-image requires --entropy-ckpt "
                         "(a pre-trained bit-rate estimator)")
    eset = entropy.load_estimator_set(cfg.entropy_ckpt)
    clf = taskloss.load_classifier(cfg.classifier_ckpt) if cfg.classifier_ckpt else None
    init = optimizer.read_tables(cfg.tables) if cfg.tables else None
    artifacts = {}
    for (img, label), name in zip(corpus.records, corpus.names):
        tcfg = _train_config(cfg, mode="per-image", init_tables=init)
        p = optimizer.per_image_train(img, label, tcfg, weights, eset, classifier=clf)
        path = out / f"tables_{Path(name).stem}.txt"
        optimizer.write_tables(p, path, header=f"per-image tables for {name}")
        artifacts[f"tables_{Path(name).stem}"] = path
    return artifacts


def _cmd_eval_curve(cfg: RunConfig, out: Path) -> dict[str, Path]:
    corpus = _load_corpus(cfg, need_labels=False)
    tables = _load_tables(cfg)
    clf = taskloss.load_classifier(cfg.classifier_ckpt) if cfg.classifier_ckpt else None
    eset = entropy.load_estimator_set(cfg.entropy_ckpt) if cfg.entropy_ckpt else None
    curve = evaluation.sweep(tables, corpus.records, cfg.eval_q_list(), cfg.layout,
                             classifier=clf, eset=eset)
    evaluation.emit_csv(curve, out / "curve.csv")
    return {"curve": out / "curve.csv"}


def _cmd_estimate_vs_actual(cfg: RunConfig, out: Path) -> dict[str, Path]:
    corpus = _load_corpus(cfg, need_labels=False)
    if not cfg.entropy_ckpt:
        raise ValueError("estimate-vs-actual requires --entropy-ckpt")
    eset = entropy.load_estimator_set(cfg.entropy_ckpt)
    tables = _load_tables(cfg)
    rows = evaluation.estimate_vs_actual(tables, corpus.records, cfg.eval_q_list(),
                                         cfg.layout, eset)
    evaluation.scatter_csv(rows, out / "scatter.csv")
    r = evaluation.pearson([e for _, e, _ in rows], [a for _, _, a in rows])
    print(f"pearson r = {r:.4f} over {len(rows)} (image, q) points")
    return {"scatter": out / "scatter.csv"}


def _cmd_export_tables(cfg: RunConfig, out: Path, q: int | None) -> dict[str, Path]:
    if not cfg.tables:
        raise ValueError("export-tables requires --tables")
    p = optimizer.read_tables(cfg.tables)
    path = out / "tables.txt"
    optimizer.export_tables(p, path, q=q)
    artifacts = {"tables": path}
    if q is not None:
        artifacts[f"tables_q{q}"] = path.with_name(f"tables_q{q}.txt")
    return artifacts


def run(cfg: RunConfig, q: int | None = None) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    handlers = {
        "optimize-rd": lambda: _cmd_optimize_rd(cfg, out),
        "optimize-ra": lambda: _cmd_optimize_ra(cfg, out),
        "optimize-per-image": lambda: _cmd_optimize_per_image(cfg, out),
        "eval-curve": lambda: _cmd_eval_curve(cfg, out),
        "estimate-vs-actual": lambda: _cmd_estimate_vs_actual(cfg, out),
        "export-tables": lambda: _cmd_export_tables(cfg, out, q),
    }
    artifacts = handlers[cfg.command]()
    weights = _weights(cfg) if cfg.command.startswith("optimize") else None
    write_manifest(out, cfg, weights, artifacts)
    return out


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg, q = resolve_config(args)
        run(cfg, q)
    except Exception as e:  # one-line diagnostic, nonzero exit
        print(f"jpegtune: error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
