"""Neighbourhood sampling around the datapoint being explained."""

from __future__ import annotations

import csv
import io
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .predictor import FeatureVector, predict_labels

__all__ = ["PermutationConfig", "LabeledSample", "generate_permutations", "label_histogram"]


@dataclass(frozen=True)
class PermutationConfig:
    epsilon: float = 0.1
    n_samples: int = 300
    seed: int = 0
    include_original: bool = True

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in [0, 1], got {self.epsilon}")
        if self.n_samples < 1:
            raise ValueError("n_samples must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")


@dataclass(frozen=True)
class LabeledSample:
    feature_names: tuple[str, ...]
    rows: np.ndarray  # (n_samples, n_features)
    labels: tuple[str, ...]
    class_name: str = "class"
    # declared label order of the black box, when known
    class_labels: tuple[str, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "labels", tuple(self.labels))
        if self.rows.ndim != 2 or self.rows.shape[1] != len(self.feature_names):
            raise ValueError("rows must be a matrix with one column per feature")
        if self.rows.shape[0] != len(self.labels):
            raise ValueError("one label per row is required")
        if self.class_name in self.feature_names:
            raise ValueError(f"class column {self.class_name!r} clashes with a feature name")

    def __len__(self):
        return len(self.labels)

    def label_order(self) -> tuple[str, ...]:
        """Observed labels, in declared order when known, else first appearance."""
        seen = dict.fromkeys(self.labels)
        if self.class_labels is not None:
            ordered = [l for l in self.class_labels if l in seen]
            return tuple(ordered + [l for l in seen if l not in ordered])
        return tuple(seen)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([*self.feature_names, self.class_name])
        for row, label in zip(self.rows, self.labels):
            w.writerow([repr(float(v)) for v in row] + [label])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, class_labels: Sequence[str] | None = None) -> "LabeledSample":
        reader = csv.reader(io.StringIO(text))
        header = next(reader)
        body = [r for r in reader if r]
        rows = np.array([[float(v) for v in r[:-1]] for r in body], dtype=float).reshape(len(body), len(header) - 1)
        return cls(
            tuple(header[:-1]),
            rows,
            tuple(r[-1] for r in body),
            header[-1],
            tuple(class_labels) if class_labels else None,
        )


def generate_permutations(x: FeatureVector, model, cfg: PermutationConfig,
                          class_name: str = "class") -> LabeledSample:
    """Draw ``cfg.n_samples`` points uniformly from the clamped epsilon-box around ``x``.

    Every feature is drawn independently from ``[max(0, x - eps), min(1, x + eps)]``.
    With ``include_original`` the first row is ``x`` itself. All draws happen
    before any labelling.
    """
    centre = x.as_array()
    low = np.maximum(0.0, centre - cfg.epsilon)
    high = np.minimum(1.0, centre + cfg.epsilon)
    rng = np.random.default_rng(cfg.seed)
    rows = rng.uniform(low, high, size=(cfg.n_samples, len(centre)))
    # uniform(a, b) can return b only through rounding; keep the box closed
    rows = np.clip(rows, low, high)
    if cfg.include_original:
        rows[0] = centre
    labels = predict_labels(model, rows, x.names)
    return LabeledSample(x.names, rows, tuple(labels), class_name, tuple(model.labels) if model.labels else None)


def label_histogram(s: LabeledSample) -> dict[str, int]:
    counts = Counter(s.labels)
    return {label: counts[label] for label in s.label_order()}
