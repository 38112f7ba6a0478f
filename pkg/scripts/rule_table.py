"""Rule counts by confusion cell at a single epsilon.

    python3 scripts/rule_table.py runs/synth/model.json runs/synth/test.csv --epsilon 0.1
"""

import argparse
from collections import Counter

from localbn.pipeline import ExplainConfig, batch_explain, read_dataset
from localbn.predictor import load_model
from localbn.verdicts import RULES

CELLS = ("TP", "TN", "FP", "FN")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("model")
    ap.add_argument("dataset")
    ap.add_argument("--label-col", default="label")
    ap.add_argument("--epsilon", type=float, default=0.1)
    ap.add_argument("--samples", type=int, default=300)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--positive-label")
    args = ap.parse_args(argv)

    model = load_model(args.model)
    data = read_dataset(args.dataset, args.label_col, model.input_names)
    cfg = ExplainConfig(epsilon=args.epsilon, n_samples=args.samples, seed=args.seed)
    counts = Counter((cell, report.rule) for report, cell in batch_explain(data, model, cfg, args.positive_label))

    print(f"{'rule':<20}" + "".join(f"{c:>6}" for c in CELLS) + f"{'total':>7}")
    for rule in RULES:
        row = [counts[(c, rule)] for c in CELLS]
        print(f"{rule:<20}" + "".join(f"{v:6d}" for v in row) + f"{sum(row):7d}")
    totals = [sum(counts[(c, r)] for r in RULES) for c in CELLS]
    print(f"{'total':<20}" + "".join(f"{v:6d}" for v in totals) + f"{sum(totals):7d}")


if __name__ == "__main__":
    main()
