"""Command-line entry point: every operation as a subcommand, scriptable and seeded.

Defaults mirror the training protocol the models were tuned with
(lr 1e-5, batch 32, patience 200), so running with no tuning flags
reproduces that setup.  Errors print a single machine-parsable line
`error: <message>` on stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .gridsearch import GridResult, GridSpec, run_grid, write_grid_report
from .heatmap import (
    accumulate,
    concept_similarity,
    normalize,
    read_grid_csv,
    write_grid_csv,
    write_grid_pgm,
)
from .kpseq import filter_frames, parse_kpseq, write_kpseq
from .manifest import Manifest, load_sequences, read_manifest, split_manifest, write_manifest
from .nn import Dims, init_params
from .synth import DEFAULT_ANCHORS, default_spec, synth_generate, write_dataset
from .training import (
    LabeledDataset,
    TrainConfig,
    evaluate,
    metrics_json,
    result_summary,
    train,
    write_history,
)
from .transfer import (
    Checkpoint,
    CheckpointMeta,
    TransferScope,
    init_from_source,
    load_checkpoint,
    relative_improvement,
    save_checkpoint,
)


@dataclass
class ExperimentConfig:
    """Declarative training-run description, loadable from a JSON file."""

    manifest: str | None = None
    data_dir: str | None = None
    mlp_hidden: int | None = None  # None: 256, or the source model's size under transfer
    gru_hidden: int | None = None  # None: 512, or the source model's size under transfer
    train: TrainConfig = field(default_factory=TrainConfig)
    init_from: str | None = None
    transfer_scope: str = "mlp"
    metric: str = "accuracy"
    filter_threshold: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        train_part = data.pop("train", {})
        unknown = set(data) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ValueError(f"unknown experiment config fields: {sorted(unknown)}")
        return cls(train=TrainConfig(**train_part), **data)

    @classmethod
    def from_json_file(cls, path: str | Path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def validate(self) -> None:
        if self.manifest is None:
            raise ValueError("experiment config needs a manifest path")
        if not Path(self.manifest).exists():
            raise ValueError(f"manifest does not exist: {self.manifest}")
        if self.data_dir is not None and not Path(self.data_dir).is_dir():
            raise ValueError(f"data_dir does not exist: {self.data_dir}")
        if self.init_from is not None and not Path(self.init_from).exists():
            raise ValueError(f"transfer source does not exist: {self.init_from}")
        for size in (self.mlp_hidden, self.gru_hidden):
            if size is not None and size < 1:
                raise ValueError("hidden sizes must be positive")
        if self.metric not in ("accuracy", "macro_f1"):
            raise ValueError(f"unknown metric {self.metric!r}")
        TransferScope.parse(self.transfer_scope)
        self.train.validate()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slrkit",
        description="Keypoint-sequence sign recognition toolkit: synthetic data, "
        "MLP-GRU training, transfer learning, grid search, activity heatmaps.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("synth", help="generate a synthetic keypoint dataset")
    p.add_argument("--out", required=True, help="output directory for kpseq files + manifest.csv")
    p.add_argument("--classes", type=int, default=5, help="number of classes")
    p.add_argument("--samples-per-class", type=int, default=20, help="samples per class")
    p.add_argument("--frames-min", type=int, default=10, help="min frames per sample")
    p.add_argument("--frames-max", type=int, default=20, help="max frames per sample")
    p.add_argument("--concepts", default=None,
                   help="comma-separated concept names (default: all built-in concepts)")
    p.add_argument("--anchors", default=None,
                   help="JSON file mapping concept -> [x, y] anchor (default: built-ins)")
    p.add_argument("--jitter", type=float, default=0.01, help="per-landmark jitter stddev")
    p.add_argument("--dataset-id", default="synth", help="dataset identifier")
    p.add_argument("--seed", type=int, default=0, help="generator seed")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("filter", help="apply the wrist-height frame filter to one sample")
    p.add_argument("--in", dest="input", required=True, help="input .kpseq.json file")
    p.add_argument("--out", required=True, help="filtered output file")
    p.add_argument("--threshold", type=float, default=0.6,
                   help="keep frames with min pose-wrist y below this")
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("split", help="stratified train/test split of a manifest")
    p.add_argument("--manifest", required=True, help="input manifest.csv (all rows unassigned)")
    p.add_argument("--out", required=True, help="output manifest path")
    p.add_argument("--train-fraction", type=float, default=0.8, help="fraction per class to train")
    p.add_argument("--seed", type=int, default=0, help="assignment seed")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="train an MLP-GRU model on the manifest's train split")
    _add_data_args(p)
    p.add_argument("--config", default=None, help="experiment config JSON (flags override it)")
    p.add_argument("--mlp", type=int, default=None, help="MLP hidden size (default 256)")
    p.add_argument("--gru", type=int, default=None, help="GRU hidden size (default 512)")
    _add_train_args(p)
    p.add_argument("--init-from", default=None, help="source checkpoint for weight initialization")
    p.add_argument("--transfer-scope", default=None, choices=["mlp", "mlp+gru"],
                   help="tensors to transfer (default mlp)")
    p.add_argument("--no-eval", action="store_true",
                   help="skip per-epoch evaluation on the test split")
    p.add_argument("--out", default=None, help="checkpoint output path")
    p.add_argument("--history-out", default=None, help="per-epoch history CSV path")
    p.add_argument("--summary-out", default=None, help="training summary JSON path")
    p.add_argument("--metrics-out", default=None,
                   help="test-split metrics JSON for the returned model")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a manifest split")
    p.add_argument("--model", required=True, help="checkpoint file")
    _add_data_args(p)
    p.add_argument("--split", default="test", choices=["train", "test", "all"],
                   help="manifest split to evaluate")
    p.add_argument("--batch", type=int, default=32, help="evaluation batch size")
    p.add_argument("--metrics-out", default=None, help="metrics JSON output path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("grid", help="paired (mlp, gru) hyperparameter grid search")
    _add_data_args(p)
    p.add_argument("--pairs", default="256:512,512:1024,1024:2048,2000:3000,2048:4096",
                   help="comma-separated mlp:gru pairs")
    p.add_argument("--metric", default="accuracy", choices=["accuracy", "macro_f1"],
                   help="selection metric")
    p.add_argument("--jobs", type=int, default=1, help="parallel training processes")
    _add_train_args(p)
    p.add_argument("--out", default=None, help="grid report CSV path")
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("transfer-init", help="initialize a target model from a source checkpoint")
    p.add_argument("--source", required=True, help="source checkpoint")
    p.add_argument("--manifest", required=True,
                   help="target manifest; its train-split labels become the class map")
    p.add_argument("--scope", default="mlp", choices=["mlp", "mlp+gru"],
                   help="tensors to transfer")
    p.add_argument("--mlp", type=int, default=None, help="target MLP size (default: source)")
    p.add_argument("--gru", type=int, default=None, help="target GRU size (default: source)")
    p.add_argument("--seed", type=int, default=0, help="seed for freshly initialized tensors")
    p.add_argument("--out", required=True, help="target checkpoint output path")
    p.set_defaults(func=cmd_transfer_init)

    p = sub.add_parser("report", help="relative improvement of a TL run over its baseline")
    p.add_argument("--baseline", required=True, help="baseline metrics JSON")
    p.add_argument("--tl", required=True, help="transfer-learning metrics JSON")
    p.add_argument("--metric", default="accuracy", choices=["accuracy", "macro_f1"],
                   help="metric to compare")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("heatmap", help="accumulate a per-concept hand-activity grid")
    _add_data_args(p)
    p.add_argument("--concept", default=None, help="restrict to one concept tag")
    p.add_argument("--split", default="all", choices=["train", "test", "all"],
                   help="manifest split to read")
    p.add_argument("--grid-size", type=int, default=64, help="cells per grid side")
    p.add_argument("--selector", default="wrists", choices=["wrists", "all"],
                   help="hand landmarks to histogram")
    p.add_argument("--normalize", action="store_true", help="export mass-normalized cells")
    p.add_argument("--out", required=True, help="grid CSV output path")
    p.add_argument("--pgm", default=None, help="optional PGM (P5) visualization path")
    p.set_defaults(func=cmd_heatmap)

    p = sub.add_parser("compare-heatmaps", help="Pearson similarity of two exported grids")
    p.add_argument("--a", required=True, help="first grid CSV")
    p.add_argument("--b", required=True, help="second grid CSV")
    p.set_defaults(func=cmd_compare_heatmaps)

    return parser


def _add_data_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--manifest", required=False, default=None, help="manifest CSV path")
    p.add_argument("--data-dir", default=None,
                   help="directory holding kpseq files (default: manifest's directory)")
    p.add_argument("--filter-threshold", type=float, default=None,
                   help="apply the wrist-height filter at load time")


def _add_train_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--lr", type=float, default=None, help="learning rate (default 1e-5)")
    p.add_argument("--batch", type=int, default=None, help="batch size (default 32)")
    p.add_argument("--patience", type=int, default=None,
                   help="epochs without loss improvement before stopping (default 200)")
    p.add_argument("--max-epochs", type=int, default=None, help="optional epoch cap")
    p.add_argument("--seed", type=int, default=None, help="shuffle/init seed (default 0)")
    p.add_argument("--no-shuffle", action="store_true", help="keep sample order each epoch")
    p.add_argument("--monitor", default=None, choices=["train_loss", "eval_loss"],
                   help="loss monitored for early stopping (default train_loss)")


def _resolve_experiment(args: argparse.Namespace) -> ExperimentConfig:
    """Merge --config file values with explicit flags; flags win."""
    cfg = (
        ExperimentConfig.from_json_file(args.config)
        if getattr(args, "config", None)
        else ExperimentConfig()
    )
    if args.manifest is not None:
        cfg.manifest = args.manifest
    if args.data_dir is not None:
        cfg.data_dir = args.data_dir
    if args.filter_threshold is not None:
        cfg.filter_threshold = args.filter_threshold
    if getattr(args, "mlp", None) is not None:
        cfg.mlp_hidden = args.mlp
    if getattr(args, "gru", None) is not None:
        cfg.gru_hidden = args.gru
    if getattr(args, "init_from", None) is not None:
        cfg.init_from = args.init_from
    if getattr(args, "transfer_scope", None) is not None:
        cfg.transfer_scope = args.transfer_scope
    if getattr(args, "metric", None) is not None:
        cfg.metric = args.metric
    _apply_train_flags(cfg.train, args)
    cfg.validate()
    return cfg


def _apply_train_flags(config: TrainConfig, args: argparse.Namespace) -> None:
    if getattr(args, "lr", None) is not None:
        config.learning_rate = args.lr
    if getattr(args, "batch", None) is not None:
        config.batch_size = args.batch
    if getattr(args, "patience", None) is not None:
        config.patience_epochs = args.patience
    if getattr(args, "max_epochs", None) is not None:
        config.max_epochs = args.max_epochs
    if getattr(args, "seed", None) is not None:
        config.seed = args.seed
    if getattr(args, "no_shuffle", False):
        config.shuffle = False
    if getattr(args, "monitor", None) is not None:
        config.monitor = args.monitor


def _data_base(manifest_path: str, data_dir: str | None) -> Path:
    return Path(data_dir) if data_dir else Path(manifest_path).parent


def cmd_synth(args: argparse.Namespace) -> int:
    concepts = args.concepts.split(",") if args.concepts else None
    anchors = None
    if args.anchors:
        raw = json.loads(Path(args.anchors).read_text(encoding="utf-8"))
        anchors = {k: (float(v[0]), float(v[1])) for k, v in raw.items()}
        if concepts is None:
            concepts = sorted(anchors)
    spec = default_spec(
        num_classes=args.classes,
        samples_per_class=args.samples_per_class,
        frames_range=(args.frames_min, args.frames_max),
        concepts=concepts,
        jitter_stddev=args.jitter,
        seed=args.seed,
        dataset_id=args.dataset_id,
        anchors=anchors,
    )
    sequences, manifest = synth_generate(spec)
    manifest_path = write_dataset(sequences, manifest, args.out)
    print(f"wrote {len(sequences)} samples and {manifest_path}")
    return 0


def cmd_filter(args: argparse.Namespace) -> int:
    seq = parse_kpseq(args.input)
    filtered = filter_frames(seq, threshold=args.threshold)
    write_kpseq(filtered, args.out)
    print(f"kept {filtered.num_frames}/{seq.num_frames} frames -> {args.out}")
    return 0


def cmd_split(args: argparse.Namespace) -> int:
    manifest = read_manifest(args.manifest)
    assigned = split_manifest(manifest, args.train_fraction, args.seed)
    write_manifest(assigned, args.out)
    n_train = len(assigned.subset("train"))
    print(f"assigned {n_train} train / {len(assigned) - n_train} test rows -> {args.out}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    cfg = _resolve_experiment(args)
    manifest = read_manifest(cfg.manifest)
    base = _data_base(cfg.manifest, cfg.data_dir)
    train_seqs = load_sequences(manifest, base, "train", cfg.filter_threshold)
    if not train_seqs:
        raise ValueError("manifest has no train rows (run `slrkit split` first)")
    manifest.check_label_coverage()
    train_set = LabeledDataset.from_sequences(train_seqs)

    if cfg.init_from:
        source = load_checkpoint(cfg.init_from)
        dims = Dims(
            input=train_set.features[0].shape[1],
            mlp_hidden=cfg.mlp_hidden or source.params.dims.mlp_hidden,
            gru_hidden=cfg.gru_hidden or source.params.dims.gru_hidden,
            num_classes=train_set.num_classes,
        )
        scope = TransferScope.parse(cfg.transfer_scope)
        seeded = init_from_source(source, dims, train_set.label_map, scope, cfg.train.seed)
        params = seeded.params
        provenance_init = seeded.meta.provenance
    else:
        dims = Dims(
            input=train_set.features[0].shape[1],
            mlp_hidden=cfg.mlp_hidden or 256,
            gru_hidden=cfg.gru_hidden or 512,
            num_classes=train_set.num_classes,
        )
        params = init_params(dims, cfg.train.seed)
        provenance_init = None

    eval_set = None
    test_seqs = load_sequences(manifest, base, "test", cfg.filter_threshold)
    if test_seqs and not args.no_eval:
        eval_set = LabeledDataset.from_sequences(test_seqs, train_set.label_map)

    result = train(params, train_set, cfg.train, eval_set=eval_set)

    if args.history_out:
        write_history(result.history, args.history_out)
    if args.summary_out:
        summary = result_summary(result)
        if provenance_init:
            summary["transfer"] = provenance_init
        Path(args.summary_out).write_text(json.dumps(summary, indent=2), encoding="utf-8")
    if args.metrics_out:
        if not test_seqs:
            raise ValueError("--metrics-out needs a test split in the manifest")
        metrics = evaluate(
            result.params,
            LabeledDataset.from_sequences(test_seqs, train_set.label_map),
            batch_size=cfg.train.batch_size,
        )
        payload = metrics_json(metrics, result.best_loss_epoch, result.stopped_epoch)
        Path(args.metrics_out).write_text(json.dumps(payload, indent=2), encoding="utf-8")
    if args.out:
        dataset_ids = {s.dataset_id for s in train_seqs}
        provenance = {
            "dataset_id": dataset_ids.pop() if len(dataset_ids) == 1 else None,
            "config": result_summary(result)["config"],
            "best_epoch": result.best_loss_epoch,
            "stopped_epoch": result.stopped_epoch,
        }
        if provenance_init:
            provenance["transfer"] = provenance_init
        save_checkpoint(
            result.params,
            CheckpointMeta(label_map=result.label_map, provenance=provenance),
            args.out,
        )
    best = result.history[result.best_loss_epoch - 1]
    print(
        f"stopped at epoch {result.stopped_epoch}, best loss "
        f"{best.loss:.6f} at epoch {result.best_loss_epoch}"
    )
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    if not args.manifest:
        raise ValueError("--manifest is required")
    checkpoint = load_checkpoint(args.model)
    manifest = read_manifest(args.manifest)
    base = _data_base(args.manifest, args.data_dir)
    split = None if args.split == "all" else args.split
    sequences = load_sequences(manifest, base, split, args.filter_threshold)
    if not sequences:
        raise ValueError(f"no rows in split {args.split!r}")
    data_set = LabeledDataset.from_sequences(sequences, checkpoint.meta.label_map)
    metrics = evaluate(checkpoint.params, data_set, batch_size=args.batch)
    payload = metrics_json(
        metrics,
        checkpoint.meta.provenance.get("best_epoch"),
        checkpoint.meta.provenance.get("stopped_epoch"),
    )
    if args.metrics_out:
        Path(args.metrics_out).write_text(json.dumps(payload, indent=2), encoding="utf-8")
    print(f"accuracy={metrics.accuracy:.4f} macro_f1={metrics.macro_f1:.4f}")
    return 0


def cmd_grid(args: argparse.Namespace) -> int:
    if not args.manifest:
        raise ValueError("--manifest is required")
    pairs = []
    for chunk in args.pairs.split(","):
        mlp_text, _, gru_text = chunk.partition(":")
        pairs.append((int(mlp_text), int(gru_text)))
    config = TrainConfig()
    _apply_train_flags(config, args)
    spec = GridSpec(pairs=pairs, metric=args.metric, train=config)

    manifest = read_manifest(args.manifest)
    manifest.check_label_coverage()
    base = _data_base(args.manifest, args.data_dir)
    train_seqs = load_sequences(manifest, base, "train", args.filter_threshold)
    test_seqs = load_sequences(manifest, base, "test", args.filter_threshold)
    if not train_seqs or not test_seqs:
        raise ValueError("grid search needs both train and test rows")
    train_set = LabeledDataset.from_sequences(train_seqs)
    eval_set = LabeledDataset.from_sequences(test_seqs, train_set.label_map)

    result = run_grid(spec, train_set, eval_set, jobs=args.jobs)
    if args.out:
        write_grid_report(result, args.out)
    winner = result.entries[result.winner]
    print(
        f"winner: mlp={winner.mlp_hidden} gru={winner.gru_hidden} "
        f"{result.metric}={winner.value(result.metric):.4f} "
        f"at epoch {winner.best_metric_epoch}"
    )
    return 0


def cmd_transfer_init(args: argparse.Namespace) -> int:
    source = load_checkpoint(args.source)
    manifest = read_manifest(args.manifest)
    rows = manifest.subset("train") or manifest.rows
    labels = sorted({row.label for row in rows})
    label_map = {label: i for i, label in enumerate(labels)}
    dims = Dims(
        input=source.params.dims.input,
        mlp_hidden=args.mlp or source.params.dims.mlp_hidden,
        gru_hidden=args.gru or source.params.dims.gru_hidden,
        num_classes=len(label_map),
    )
    checkpoint = init_from_source(
        source, dims, label_map, TransferScope.parse(args.scope), args.seed
    )
    save_checkpoint(checkpoint.params, checkpoint.meta, args.out)
    print(f"initialized {len(label_map)}-class model from {args.source} -> {args.out}")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    baseline = json.loads(Path(args.baseline).read_text(encoding="utf-8"))
    tl = json.loads(Path(args.tl).read_text(encoding="utf-8"))
    improvement = relative_improvement(baseline[args.metric], tl[args.metric])
    print(f"{improvement:+.2f}%")
    return 0


def cmd_heatmap(args: argparse.Namespace) -> int:
    if not args.manifest:
        raise ValueError("--manifest is required")
    manifest = read_manifest(args.manifest)
    base = _data_base(args.manifest, args.data_dir)
    split = None if args.split == "all" else args.split
    sequences = load_sequences(manifest, base, split, args.filter_threshold)
    grid = accumulate(
        sequences, grid_size=args.grid_size, selector=args.selector, concept=args.concept
    )
    if args.normalize:
        grid = normalize(grid)
    write_grid_csv(grid, args.out)
    if args.pgm:
        write_grid_pgm(grid, args.pgm)
    print(f"accumulated {grid.count} points -> {args.out}")
    return 0


def cmd_compare_heatmaps(args: argparse.Namespace) -> int:
    grid_a = normalize(read_grid_csv(args.a))
    grid_b = normalize(read_grid_csv(args.b))
    print(f"{concept_similarity(grid_a, grid_b):.6f}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - surfaced as the machine-parsable line
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
