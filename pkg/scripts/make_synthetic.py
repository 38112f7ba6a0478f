"""Generate a synthetic tabular task and a small MLP trained on it.

The true boundary is a curve, x2 > 0.3 + 0.4 * sin(3 * x1), with label noise,
so the fitted network makes some mistakes and every confusion cell is populated.

    python3 scripts/make_synthetic.py --out-dir runs/synth
"""

import argparse
import json
from pathlib import Path

import numpy as np


def make_data(rng, n, noise):
    x = rng.uniform(0, 1, (n, 2))
    y = (x[:, 1] > 0.3 + 0.4 * np.sin(3 * x[:, 0])).astype(int)
    flip = rng.random(n) < noise
    return x, np.where(flip, 1 - y, y)


def train_mlp(rng, x, y, hidden=8, steps=3000, lr=0.5):
    """Full-batch gradient descent on cross-entropy; relu hidden layer, softmax output."""
    w1 = rng.normal(0, 1, (hidden, x.shape[1]))
    b1 = np.zeros(hidden)
    w2 = rng.normal(0, 1, (2, hidden))
    b2 = np.zeros(2)
    onehot = np.eye(2)[y]
    for _ in range(steps):
        h = np.maximum(x @ w1.T + b1, 0.0)
        z = h @ w2.T + b2
        p = np.exp(z - z.max(axis=1, keepdims=True))
        p /= p.sum(axis=1, keepdims=True)
        g = (p - onehot) / len(x)
        gh = (g @ w2) * (h > 0)
        w2 -= lr * g.T @ h
        b2 -= lr * g.sum(axis=0)
        w1 -= lr * gh.T @ x
        b1 -= lr * gh.sum(axis=0)
    return w1, b1, w2, b2


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out-dir", default="runs/synth")
    ap.add_argument("--n-train", type=int, default=2000)
    ap.add_argument("--n-test", type=int, default=200)
    ap.add_argument("--noise", type=float, default=0.05)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    x, y = make_data(rng, args.n_train, args.noise)
    w1, b1, w2, b2 = train_mlp(rng, x, y)
    doc = {
        "input_names": ["x1", "x2"],
        "output_labels": ["neg", "pos"],
        "layers": [
            {"weights": w1.tolist(), "bias": b1.tolist(), "activation": "relu"},
            {"weights": w2.tolist(), "bias": b2.tolist(), "activation": "softmax"},
        ],
    }
    (out / "model.json").write_text(json.dumps(doc, indent=2) + "\n")

    xt, yt = make_data(rng, args.n_test, args.noise)
    labels = ("neg", "pos")
    lines = ["x1,x2,label"] + [f"{a!r},{b!r},{labels[c]}" for (a, b), c in zip(xt.tolist(), yt.tolist())]
    (out / "test.csv").write_text("\n".join(lines) + "\n")

    h = np.maximum(xt @ w1.T + b1, 0.0)
    acc = float(np.mean(np.argmax(h @ w2.T + b2, axis=1) == yt))
    print(f"wrote {out / 'model.json'} and {out / 'test.csv'}; test accuracy {acc:.3f}")


if __name__ == "__main__":
    main()
