"""Command-line entry point.

Every command reads one optional YAML config plus ``--set key.path=value``
overrides (flags win), writes its artifacts under ``--out``, and exits 0 on
success or 1 with a one-line ``error[Class]: message`` on stderr.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import archive, reports
from .config import ConfigError, RunConfig, dump_config, load_config
from .data import (Dataset, load_csv, load_idx, synth_ambiguous, write_idx_images,
                   write_idx_labels)
from .dbn import pretrain
from .distill import dataset_kl, repair_pipeline, trace_path
from .rules import extract_rules, fidelity, tree_to_text


def _load_run_config(args) -> RunConfig:
    cfg = load_config(args.config, tuple(args.set or ()))
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
        cfg.cd.seed = args.seed
        cfg.synth.seed = args.seed
        cfg.repair.seed = args.seed
    return cfg


def _out_dir(args, cfg: RunConfig) -> Path:
    out = Path(args.out) if args.out else Path(cfg.paths.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_dataset(args) -> Dataset:
    if getattr(args, "csv", None):
        return load_csv(args.csv, label_column=args.label_column)
    if not (getattr(args, "images", None) and getattr(args, "labels", None)):
        raise ConfigError("provide --images and --labels (IDX) or --csv")
    ds = load_idx(args.images, args.labels)
    meta_path = Path(args.images).with_name("dataset-meta.json")
    if meta_path.exists():
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        names = meta.get("class_names")
        if names and len(names) >= ds.n_classes:
            ds = Dataset(ds.features, ds.labels, list(names), ds.provenance)
    return ds


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML config file")
    p.add_argument("--set", action="append", metavar="KEY.PATH=VALUE",
                   help="override one config value (repeatable; flags win)")
    p.add_argument("--seed", type=int, help="override every seed in the config")
    p.add_argument("--out", help="output directory (default: paths.out_dir)")


def _add_data_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--images", help="IDX images file")
    p.add_argument("--labels", help="IDX labels file")
    p.add_argument("--csv", help="CSV dataset (alternative to IDX)")
    p.add_argument("--label-column", default="label", help="CSV label column name")


def cmd_synth(args) -> int:
    cfg = _load_run_config(args)
    out = _out_dir(args, cfg)
    train, test = synth_ambiguous(cfg.synth)
    for split, name in ((train, "train"), (test, "test")):
        write_idx_images(out / f"{name}-images.idx", split.features)
        write_idx_labels(out / f"{name}-labels.idx", split.labels)
    meta = {
        "seed": cfg.synth.seed,
        "class_names": train.class_names,
        "provenance": train.provenance,
        "n_train": train.n_samples,
        "n_test": test.n_samples,
    }
    (out / "dataset-meta.json").write_text(
        json.dumps(meta, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    print(f"wrote {train.n_samples} train / {test.n_samples} test samples to {out}")
    return 0


def cmd_pretrain(args) -> int:
    cfg = _load_run_config(args)
    out = _out_dir(args, cfg)
    ds = _load_dataset(args)
    model = pretrain(ds.features, cfg.structure, cfg.cd, ds.n_classes)
    model.meta["class_names"] = ds.class_names
    archive.save_model(model, out / "model.adbn")
    (out / "events.jsonl").write_text(reports.events_to_jsonl(model.events),
                                      encoding="utf-8")
    payload = {
        "seed": cfg.cd.seed,
        "layer_sizes": [[l.n_visible, l.n_hidden] for l in model.layers],
        "n_events": len(model.events),
    }
    text = (f"seed: {cfg.cd.seed}\n"
            + "".join(f"layer {i}: {l.n_visible} -> {l.n_hidden}\n"
                      for i, l in enumerate(model.layers))
            + f"structure events: {len(model.events)}\n")
    reports.write_report(out, "pretrain-report", text, payload)
    print(f"pretrained {len(model.layers)}-layer model -> {out / 'model.adbn'}")
    return 0


def cmd_train(args) -> int:
    cfg = _load_run_config(args)
    out = _out_dir(args, cfg)
    ds = _load_dataset(args)
    model = archive.load_model(args.model)
    report = model.train_head(ds.features, ds.labels, cfg.head.epochs, cfg.head.lr)
    archive.save_model(model, out / "model.adbn")
    evaluation = model.evaluate(ds.features, ds.labels)
    payload = {
        "seed": cfg.seed,
        "epochs": cfg.head.epochs,
        "lr": cfg.head.lr,
        "final_loss": report.losses[-1] if report.losses else None,
        "train_accuracy": evaluation.accuracy,
    }
    text = (f"seed: {cfg.seed}\nepochs: {cfg.head.epochs}\nlr: {cfg.head.lr}\n"
            + (f"loss: {report.losses[0]:.6f} -> {report.losses[-1]:.6f}\n"
               if report.losses else "loss: (no epochs)\n")
            + f"train accuracy: {evaluation.accuracy:.4f}\n")
    reports.write_report(out, "train-report", text, payload)
    print(f"trained head -> {out / 'model.adbn'} (train accuracy {evaluation.accuracy:.4f})")
    return 0


def cmd_eval(args) -> int:
    cfg = _load_run_config(args)
    out = _out_dir(args, cfg)
    ds = _load_dataset(args)
    model = archive.load_model(args.model)
    names = model.meta.get("class_names", ds.class_names)
    evaluation = model.evaluate(ds.features, ds.labels)
    reports.write_report(out, "eval-report",
                         reports.format_eval_report(evaluation, names, cfg.seed),
                         reports.eval_report_payload(evaluation, names, cfg.seed))
    print(f"accuracy {evaluation.accuracy:.4f} -> {out / 'eval-report.txt'}")
    return 0


def cmd_repair(args) -> int:
    cfg = _load_run_config(args)
    out = _out_dir(args, cfg)
    ds = _load_dataset(args)
    model = archive.load_model(args.model)
    names = model.meta.get("class_names", ds.class_names)
    targets = [int(t) for t in args.targets.split(",") if t.strip() != ""]
    report = repair_pipeline(model, ds.features, ds.labels, targets, cfg.repair)
    archive.save_model(model, out / "model.adbn")
    (out / "events.jsonl").write_text(reports.events_to_jsonl(model.events),
                                      encoding="utf-8")
    reports.write_report(out, "repair-report",
                         reports.format_repair_report(report, names),
                         reports.repair_report_payload(report, names))
    print(report.message if report.message else "repair finished")
    print(f"repaired model -> {out / 'model.adbn'}")
    return 0


def cmd_kl(args) -> int:
    cfg = _load_run_config(args)
    out = _out_dir(args, cfg)
    ds = _load_dataset(args)
    parent = archive.load_model(args.parent)
    child = archive.load_model(args.child)
    report = dataset_kl(parent, child, ds.features)
    theta = cfg.repair.theta_kl
    reports.write_report(out, "kl-report",
                         reports.format_kl_report(report, cfg.seed, theta),
                         reports.kl_report_payload(report, cfg.seed, theta))
    print(f"aggregate KL {report.aggregate:.6f} -> {out / 'kl-report.txt'}")
    return 0


def cmd_trace(args) -> int:
    cfg = _load_run_config(args)
    out = _out_dir(args, cfg)
    ds = _load_dataset(args)
    model = archive.load_model(args.model)
    names = model.meta.get("class_names", ds.class_names)
    if not 0 <= args.index < ds.n_samples:
        raise ConfigError(f"--index {args.index} outside dataset of {ds.n_samples} samples")
    trace = trace_path(model, ds.features[args.index],
                       cfg.repair.activation_threshold)
    reports.write_report(out, "trace-report",
                         reports.format_trace(trace, names, cfg.seed),
                         reports.trace_payload(trace, cfg.seed))
    print(f"traced sample {args.index} -> {out / 'trace-report.txt'}")
    return 0


def cmd_rules(args) -> int:
    cfg = _load_run_config(args)
    out = _out_dir(args, cfg)
    ds = _load_dataset(args)
    model = archive.load_model(args.model)
    tree = extract_rules(model, ds.features)
    agreement = fidelity(tree, model, ds.features)
    text = tree_to_text(tree)
    (out / "rules.txt").write_text(text, encoding="utf-8")
    payload = {
        "seed": cfg.seed,
        "fidelity": agreement,
        "depth": tree.depth(),
        "n_leaves": tree.n_leaves(),
    }
    report_text = (f"seed: {cfg.seed}\nfidelity: {agreement:.4f}\n"
                   f"depth: {tree.depth()}\nleaves: {tree.n_leaves()}\n")
    reports.write_report(out, "rules-report", report_text, payload)
    print(f"extracted {tree.n_leaves()} rules (fidelity {agreement:.4f}) -> {out / 'rules.txt'}")
    return 0


def cmd_print_config(args) -> int:
    cfg = _load_run_config(args)
    sys.stdout.write(dump_config(cfg))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adbn",
        description="Adaptive-structure deep belief networks with distillation repair")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate the synthetic ambiguous-pair corpus")
    _add_common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("pretrain", help="adaptively pretrain a DBN on a dataset")
    _add_common(p)
    _add_data_args(p)
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("train", help="train the softmax head of a pretrained model")
    _add_common(p)
    _add_data_args(p)
    p.add_argument("--model", required=True, help="input model archive")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a model; writes the confusion matrix")
    _add_common(p)
    _add_data_args(p)
    p.add_argument("--model", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("repair", help="run the distillation repair pipeline")
    _add_common(p)
    _add_data_args(p)
    p.add_argument("--model", required=True)
    p.add_argument("--targets", required=True,
                   help="comma-separated target class indices, e.g. 5,6")
    p.set_defaults(func=cmd_repair)

    p = sub.add_parser("kl", help="KL divergence between two models on a dataset")
    _add_common(p)
    _add_data_args(p)
    p.add_argument("--parent", required=True)
    p.add_argument("--child", required=True)
    p.set_defaults(func=cmd_kl)

    p = sub.add_parser("trace", help="binary activation path of one sample")
    _add_common(p)
    _add_data_args(p)
    p.add_argument("--model", required=True)
    p.add_argument("--index", type=int, default=0, help="sample index to trace")
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("rules", help="extract a decision-rule explanation of a model")
    _add_common(p)
    _add_data_args(p)
    p.add_argument("--model", required=True)
    p.set_defaults(func=cmd_rules)

    p = sub.add_parser("print-config", help="print the effective configuration")
    _add_common(p)
    p.set_defaults(func=cmd_print_config)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - single reporting point for the CLI
        print(f"error[{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
