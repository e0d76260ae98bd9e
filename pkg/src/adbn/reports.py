"""Plain-text report rendering plus machine-readable JSON sidecars.

All output is deterministic for a fixed model/config/seed: fixed float
formatting, sorted keys, no timestamps.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .adaptive import StructureEvent
from .dbn import EvalReport
from .distill import KlReport, PathTrace, RepairReport

KL_BIN_WIDTH = 1e-4


def kl_histogram(per_sample, width: float = KL_BIN_WIDTH):
    """Counts in fixed-width bins [i*width, (i+1)*width) covering every value."""
    values = np.asarray(per_sample, dtype=np.float64)
    if values.size == 0:
        return np.zeros(1), np.zeros(1, dtype=np.int64)
    n_bins = int(np.floor(values.max() / width)) + 1
    edges = np.arange(n_bins + 1) * width
    counts, _ = np.histogram(values, bins=edges)
    return edges, counts


def format_table(rows: list[list[str]], header: list[str]) -> str:
    table = [header] + rows
    widths = [max(len(r[i]) for r in table) for i in range(len(header))]
    lines = []
    for r, row in enumerate(table):
        lines.append("  ".join(cell.rjust(widths[i]) for i, cell in enumerate(row)))
        if r == 0:
            lines.append("  ".join("-" * widths[i] for i in range(len(header))))
    return "\n".join(lines)


def format_eval_report(report: EvalReport, class_names: list[str], seed: int) -> str:
    rows = []
    for k, name in enumerate(class_names):
        acc = report.per_class[k]
        rows.append([name, str(int(report.confusion[k].sum())),
                     "n/a" if np.isnan(acc) else f"{acc:.4f}"])
    lines = [f"seed: {seed}",
             f"accuracy: {report.accuracy:.4f}",
             "",
             "per-class accuracy:",
             format_table(rows, ["class", "n", "accuracy"]),
             "",
             "confusion matrix (rows: true, columns: predicted):",
             format_table(
                 [[class_names[t]] + [str(int(v)) for v in report.confusion[t]]
                  for t in range(len(class_names))],
                 ["true\\pred"] + list(class_names))]
    return "\n".join(lines) + "\n"


def eval_report_payload(report: EvalReport, class_names: list[str], seed: int) -> dict:
    return {
        "seed": seed,
        "accuracy": report.accuracy,
        "class_names": list(class_names),
        "per_class_accuracy": [None if np.isnan(v) else float(v)
                               for v in report.per_class],
        "confusion": report.confusion.tolist(),
    }


def format_kl_report(report: KlReport, seed: int, theta_kl: float | None = None) -> str:
    values = report.per_sample
    lines = [f"seed: {seed}",
             f"samples: {values.size}",
             f"aggregate KL: {report.aggregate:.6f}"]
    if values.size:
        lines.append(f"per-sample KL range: [{values.min():.6f}, {values.max():.6f}]")
    if theta_kl is not None:
        above = int((values > theta_kl).sum())
        lines.append(f"theta_kl: {theta_kl}")
        lines.append(f"samples above threshold: {above}")
    edges, counts = kl_histogram(values)
    rows = [[f"{edges[i]:.4f}", f"{edges[i + 1]:.4f}", str(int(counts[i]))]
            for i in range(len(counts))]
    lines += ["", f"histogram (bin width {KL_BIN_WIDTH}):",
              format_table(rows, ["from", "to", "count"])]
    return "\n".join(lines) + "\n"


def kl_report_payload(report: KlReport, seed: int, theta_kl: float | None = None) -> dict:
    edges, counts = kl_histogram(report.per_sample)
    payload = {
        "seed": seed,
        "aggregate": report.aggregate,
        "per_sample": report.per_sample.tolist(),
        "histogram": {"bin_width": KL_BIN_WIDTH, "edges": edges.tolist(),
                      "counts": counts.tolist()},
    }
    if theta_kl is not None:
        payload["theta_kl"] = theta_kl
        payload["n_above"] = int((report.per_sample > theta_kl).sum())
    return payload


def format_repair_report(report: RepairReport, class_names: list[str]) -> str:
    lines = [f"seed: {report.seed}",
             f"target classes: {', '.join(class_names[t] for t in report.target_classes)}",
             f"status: {'no-op' if report.no_op else 'repaired'}",
             f"note: {report.message}",
             f"mis-classified target samples: {report.n_misclassified}",
             f"child retraining rounds: {report.child_rounds}",
             f"samples above theta_kl: {report.n_above_threshold}",
             f"grafted neurons: {len(report.grafted)}"]
    if report.fine_tune is not None:
        lines.append(f"fine-tune modified edges: {len(report.fine_tune.modified)}")
    after = report.after if report.after is not None else report.before
    rows = []
    for k, name in enumerate(class_names):
        b, a = report.before.per_class[k], after.per_class[k]
        rows.append([name,
                     "n/a" if np.isnan(b) else f"{b:.4f}",
                     "n/a" if np.isnan(a) else f"{a:.4f}",
                     "*" if k in report.target_classes else ""])
    lines += ["", "per-class accuracy before/after (*: target):",
              format_table(rows, ["class", "before", "after", ""]),
              "",
              f"overall accuracy: {report.before.accuracy:.4f} -> {after.accuracy:.4f}"]
    for label, ev in (("before", report.before), ("after", after)):
        lines += ["", f"confusion matrix {label} (rows: true, columns: predicted):",
                  format_table(
                      [[class_names[t]] + [str(int(v)) for v in ev.confusion[t]]
                       for t in range(len(class_names))],
                      ["true\\pred"] + list(class_names))]
    if report.kl is not None:
        lines += ["", format_kl_report(report.kl, report.seed).rstrip()]
    return "\n".join(lines) + "\n"


def repair_report_payload(report: RepairReport, class_names: list[str]) -> dict:
    after = report.after if report.after is not None else report.before
    payload = {
        "seed": report.seed,
        "no_op": report.no_op,
        "message": report.message,
        "target_classes": report.target_classes,
        "n_misclassified": report.n_misclassified,
        "child_rounds": report.child_rounds,
        "n_above_threshold": report.n_above_threshold,
        "grafted": [list(g) for g in report.grafted],
        "before": eval_report_payload(report.before, class_names, report.seed),
        "after": eval_report_payload(after, class_names, report.seed),
    }
    if report.kl is not None:
        payload["kl"] = kl_report_payload(report.kl, report.seed)
    if report.fine_tune is not None:
        payload["fine_tune_modified"] = [[l, j, k, v]
                                         for l, j, k, v in report.fine_tune.modified]
    return payload


def format_trace(trace: PathTrace, class_names: list[str], seed: int) -> str:
    lines = [f"seed: {seed}",
             f"predicted class: {class_names[trace.predicted_class]}"]
    for l, layer in enumerate(trace.layers):
        active = np.flatnonzero(layer)
        bits = "".join(str(int(v)) for v in layer)
        lines.append(f"layer {l}: {bits} (active: "
                     f"{', '.join(map(str, active)) if active.size else 'none'})")
    return "\n".join(lines) + "\n"


def trace_payload(trace: PathTrace, seed: int) -> dict:
    return {
        "seed": seed,
        "predicted_class": trace.predicted_class,
        "layers": [layer.tolist() for layer in trace.layers],
    }


def events_to_jsonl(events: list[StructureEvent]) -> str:
    lines = []
    for e in events:
        lines.append(json.dumps(
            {"epoch": e.epoch, "kind": e.kind, "layer_index": e.layer_index,
             "neuron_index": e.neuron_index, "detail": e.detail, "seq": e.seq},
            sort_keys=True))
    return "\n".join(lines) + ("\n" if lines else "")


def write_report(out_dir, stem: str, text: str, payload: dict) -> tuple[Path, Path]:
    """Write ``<stem>.txt`` and the JSON sidecar ``<stem>.json``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    text_path = out_dir / f"{stem}.txt"
    json_path = out_dir / f"{stem}.json"
    text_path.write_text(text, encoding="utf-8")
    json_path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n",
                         encoding="utf-8")
    return text_path, json_path
