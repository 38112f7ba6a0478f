"""Command-line entry point: ``explain``, ``batch``, ``sweep`` and ``render``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from contextlib import ExitStack
from pathlib import Path

from .pipeline import (
    CELLS,
    ExplainConfig,
    ExplanationReport,
    batch_explain,
    epsilon_sweep,
    explain,
    file_digest,
    read_dataset,
    render_report,
    sweep_to_json,
)
from .predictor import BridgePredictor, FeatureVector, load_model


def parse_input(value: str) -> dict[str, float]:
    """``--input`` is a CSV file (header + first row) or an inline ``a=0.1,b=0.2`` list."""
    path = Path(value)
    if path.is_file():
        reader = csv.DictReader(io.StringIO(path.read_text()))
        try:
            row = next(reader)
        except StopIteration:
            raise ValueError(f"{value} holds no data row") from None
        return {k: float(v) for k, v in row.items()}
    out = {}
    for part in value.split(","):
        key, sep, val = part.partition("=")
        if not sep:
            raise ValueError(f"cannot parse input item {part!r}; expected name=value")
        out[key.strip()] = float(val)
    return out


def _add_common(p: argparse.ArgumentParser) -> None:
    d = ExplainConfig()
    p.add_argument("--model", required=True,
                   help="weights/synthetic JSON file, or cmd:<command> for a stdio bridge")
    p.add_argument("--labels", help="comma-separated class labels of a bridge model")
    p.add_argument("--timeout", type=float, default=30.0, help="bridge response timeout (s)")
    p.add_argument("--class-var", default=d.class_var)
    p.add_argument("--epsilon", type=float, default=d.epsilon)
    p.add_argument("--samples", type=int, default=d.n_samples)
    p.add_argument("--seed", type=int, default=d.seed)
    p.add_argument("--quartiles", type=int, default=d.quartiles)
    p.add_argument("--tau", type=float, default=d.tau)
    p.add_argument("--max-parents", type=int, default=d.max_parents, help="0 means unbounded")
    p.add_argument("--alpha", type=float, default=d.alpha, help="CPT smoothing pseudo-count")
    p.add_argument("--depth", type=int, default=d.blanket_depth, help="Markov blanket render depth")
    p.add_argument("--format", choices=("json", "dot", "text"), default="json")
    p.add_argument("--out", default="-")


def _add_dataset(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dataset", required=True, help="CSV with feature columns and a label column")
    p.add_argument("--label-col", required=True)
    p.add_argument("--positive-label", help="defaults to the model's last label")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="localbn", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("explain", help="explain one prediction")
    _add_common(p)
    p.add_argument("--input", required=True, help="CSV row file or inline name=value list")

    p = sub.add_parser("batch", help="explain every row of a dataset")
    _add_common(p)
    _add_dataset(p)

    p = sub.add_parser("sweep", help="rule frequencies per confusion cell over an epsilon grid")
    _add_common(p)
    _add_dataset(p)
    p.add_argument("--epsilons", required=True, help="comma-separated list, e.g. 0.05,0.1,0.2")

    p = sub.add_parser("render", help="render a saved JSON report")
    p.add_argument("report")
    p.add_argument("--format", choices=("json", "dot", "text"), default="text")
    p.add_argument("--depth", type=int, default=1)
    p.add_argument("--out", default="-")
    return parser


def _config(args) -> ExplainConfig:
    return ExplainConfig(
        epsilon=args.epsilon,
        n_samples=args.samples,
        seed=args.seed,
        quartiles=args.quartiles,
        tau=args.tau,
        max_parents=args.max_parents or None,
        alpha=args.alpha,
        class_var=args.class_var,
        blanket_depth=args.depth,
    )


def _model(args, names, stack: ExitStack):
    labels = args.labels.split(",") if args.labels else None
    model = load_model(args.model, names, labels, args.timeout)
    if isinstance(model, BridgePredictor):
        stack.enter_context(model)
    return model


def _model_id(spec: str) -> str:
    return spec if spec.startswith("cmd:") else f"{Path(spec).name}:{file_digest(spec)}"


def _write(out: str, text: str) -> None:
    if out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _batch_text(results) -> str:
    lines = []
    for i, (report, cell) in enumerate(results):
        post = report.verdict["surrogate_posterior"]
        p = dict(zip(post["labels"], post["probabilities"]))[report.prediction["label"]]
        lines.append(f"{i}\t{cell}\t{report.prediction['label']}\t{report.rule}\t{p:.4f}")
    return "\n".join(lines) + ("\n" if lines else "")


def run(args) -> int:
    if args.command == "render":
        report = ExplanationReport.from_json(Path(args.report).read_text())
        _write(args.out, render_report(report, args.format, args.depth))
        return 0

    cfg = _config(args)
    with ExitStack() as stack:
        if args.command == "explain":
            values = parse_input(args.input)
            model = _model(args, list(values), stack)
            x = FeatureVector.from_mapping(values, model.input_names)
            report = explain(x, model, cfg)
            _write(args.out, render_report(report, args.format, args.depth))
            return 0

        with open(args.dataset) as fh:
            header = next(csv.reader(fh))
        names = [h for h in header if h != args.label_col]
        model = _model(args, names, stack)
        data = read_dataset(args.dataset, args.label_col, model.input_names)

        if args.command == "batch":
            results = batch_explain(data, model, cfg, args.positive_label)
            if args.format == "text":
                _write(args.out, _batch_text(results))
            else:
                doc = [{"index": i, "truth": truth, "cell": cell, "report": r.to_dict()}
                       for i, ((_, truth), (r, cell)) in enumerate(zip(data, results))]
                _write(args.out, json.dumps(doc, sort_keys=True, indent=2) + "\n")
            return 0

        epsilons = [float(e) for e in args.epsilons.split(",") if e.strip()]
        summary = epsilon_sweep(data, model, epsilons, cfg, args.positive_label,
                                dataset_id=f"{Path(args.dataset).name}:{file_digest(args.dataset)}",
                                model_id=_model_id(args.model))
        if args.format == "text":
            lines = []
            for point in summary["grid"]:
                for cell in (*CELLS, "all"):
                    c = point["cells"][cell]
                    freqs = " ".join(f"{k}={v:.3f}" for k, v in c["frequencies"].items())
                    lines.append(f"eps={point['epsilon']}\t{cell}\tn={c['n']}\t{freqs}")
            _write(args.out, "\n".join(lines) + "\n")
        else:
            _write(args.out, sweep_to_json(summary))
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return run(args)
    except (ValueError, KeyError, OSError, RuntimeError) as exc:
        print(f"localbn: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
