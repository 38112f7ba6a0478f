"""Rule frequencies as the neighbourhood grows.

Runs the epsilon sweep over a labelled dataset and prints, for each epsilon, the
share of each rule overall and per confusion cell.  The canonical JSON summary is
written next to the table when ``--out`` is given.

    python3 scripts/make_synthetic.py --out-dir runs/synth
    python3 scripts/epsilon_sweep.py runs/synth/model.json runs/synth/test.csv --out runs/synth/sweep.json
"""

import argparse
from pathlib import Path

from localbn.pipeline import ExplainConfig, epsilon_sweep, file_digest, read_dataset, sweep_to_json
from localbn.predictor import load_model
from localbn.verdicts import RULES

SHORT = {rule: rule.split("_")[0] for rule in RULES}


def format_table(summary):
    head = f"{'eps':>6} {'cell':>4} {'n':>4} " + " ".join(f"{SHORT[r]:>6}" for r in RULES)
    lines = [head]
    for point in summary["grid"]:
        for cell in ("all", "TP", "TN", "FP", "FN"):
            c = point["cells"][cell]
            freqs = " ".join(f"{c['frequencies'][r]:6.3f}" if not c["empty"] else f"{'-':>6}" for r in RULES)
            lines.append(f"{point['epsilon']:6.3f} {cell:>4} {c['n']:4d} {freqs}")
    return "\n".join(lines)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("model")
    ap.add_argument("dataset")
    ap.add_argument("--label-col", default="label")
    ap.add_argument("--epsilons", default="0.01,0.05,0.1,0.2,0.3,0.5")
    ap.add_argument("--samples", type=int, default=300)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--positive-label")
    ap.add_argument("--out")
    args = ap.parse_args(argv)

    model = load_model(args.model)
    data = read_dataset(args.dataset, args.label_col, model.input_names)
    summary = epsilon_sweep(data, model, [float(e) for e in args.epsilons.split(",")],
                            ExplainConfig(n_samples=args.samples, seed=args.seed), args.positive_label,
                            dataset_id=file_digest(args.dataset), model_id=file_digest(args.model))
    print(format_table(summary))
    if args.out:
        Path(args.out).write_text(sweep_to_json(summary))


if __name__ == "__main__":
    main()
