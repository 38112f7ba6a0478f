"""Equal-frequency binning of the neighbourhood sample.

Cut points are empirical quantiles of each column (linear interpolation between
order statistics) and bins are right-closed: ``(-inf, c1], (c1, c2], ..., (ck, inf)``.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .sampler import LabeledSample

__all__ = ["BinningScheme", "DiscreteDataset", "fit_bins", "apply_bins", "discretize", "bin_labels"]

QUANTILE_METHOD = "linear"


def bin_labels(cuts: Sequence[float]) -> tuple[str, ...]:
    """Human-readable interval names, e.g. ``(-inf,0.25]``, ``(0.25,0.5]``, ``(0.5,inf)``."""
    if not cuts:
        return ("all",)
    edges = ["-inf", *(f"{c:.4g}" for c in cuts), "inf"]
    names = []
    for k in range(len(edges) - 1):
        close = ")" if k == len(edges) - 2 else "]"
        name = f"({edges[k]},{edges[k + 1]}{close}"
        if name in names:
            name = f"{name}#{k}"
        names.append(name)
    return tuple(names)


@dataclass(frozen=True)
class BinningScheme:
    cuts: dict[str, tuple[float, ...]]
    quartiles: int = 4

    def __post_init__(self):
        for name, cuts in self.cuts.items():
            if any(b <= a for a, b in zip(cuts, cuts[1:])):
                raise ValueError(f"cut points for {name!r} are not strictly increasing")

    def categories(self, feature: str) -> tuple[str, ...]:
        return bin_labels(self.cuts[feature])

    def to_json(self) -> str:
        return json.dumps(
            {"quartiles": self.quartiles, "method": QUANTILE_METHOD,
             "cuts": {k: list(v) for k, v in self.cuts.items()}},
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "BinningScheme":
        doc = json.loads(text)
        return cls({k: tuple(v) for k, v in doc["cuts"].items()}, doc["quartiles"])


@dataclass(frozen=True)
class DiscreteDataset:
    names: tuple[str, ...]
    alphabets: tuple[tuple[str, ...], ...]
    data: np.ndarray  # (n_rows, n_vars) category indices
    class_var: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "alphabets", tuple(tuple(a) for a in self.alphabets))
        data = np.asarray(self.data, dtype=np.int64)
        object.__setattr__(self, "data", data)
        if len(set(self.names)) != len(self.names):
            raise ValueError("variable names must be unique")
        if len(self.alphabets) != len(self.names):
            raise ValueError("one alphabet per variable is required")
        if data.ndim != 2 or data.shape[1] != len(self.names) or data.shape[0] < 1:
            raise ValueError("data must be a non-empty (rows, variables) matrix")
        sizes = np.array([len(a) for a in self.alphabets])
        if np.any(sizes < 1) or np.any(data < 0) or np.any(data >= sizes):
            raise ValueError("cell outside its variable's alphabet")
        if self.class_var is not None and self.class_var not in self.names:
            raise ValueError(f"class variable {self.class_var!r} is missing")

    @property
    def n_rows(self) -> int:
        return self.data.shape[0]

    def index(self, name: str) -> int:
        return self.names.index(name)

    def cardinality(self, name: str) -> int:
        return len(self.alphabets[self.index(name)])

    @classmethod
    def from_records(cls, names: Sequence[str], records: Sequence[Sequence[str]],
                     alphabets: Sequence[Sequence[str]] | None = None, class_var: str | None = None):
        """Build from rows of category names; alphabets default to first appearance order."""
        cols = list(zip(*records))
        if alphabets is None:
            alphabets = [tuple(dict.fromkeys(c)) for c in cols]
        data = np.array([[alphabets[j].index(v) for j, v in enumerate(r)] for r in records])
        return cls(tuple(names), tuple(tuple(a) for a in alphabets), data, class_var)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.names)
        for row in self.data:
            w.writerow([self.alphabets[j][k] for j, k in enumerate(row)])
        return buf.getvalue()


def _column_cuts(col: np.ndarray, quartiles: int) -> tuple[float, ...]:
    qs = np.arange(1, quartiles) / quartiles
    raw = np.unique(np.quantile(col, qs, method=QUANTILE_METHOD))
    raw = raw[raw < col.max()]
    if raw.size == 0:
        return ()
    # keep one cut between consecutive occupied bins so no category is empty
    occupied = np.unique(np.searchsorted(raw, col, side="left"))
    return tuple(float(raw[k]) for k in occupied[:-1])


def fit_bins(s: LabeledSample, quartiles: int = 4) -> BinningScheme:
    if quartiles < 2:
        raise ValueError("quartiles must be at least 2")
    if len(s) == 0:
        raise ValueError("cannot fit bins on an empty sample")
    return BinningScheme({name: _column_cuts(s.rows[:, j], quartiles)
                          for j, name in enumerate(s.feature_names)}, quartiles)


def apply_bins(s: LabeledSample, b: BinningScheme) -> DiscreteDataset:
    unknown = [n for n in s.feature_names if n not in b.cuts]
    if unknown:
        raise KeyError(f"no bins fitted for features {unknown}")
    cols, alphabets = [], []
    for j, name in enumerate(s.feature_names):
        cuts = np.asarray(b.cuts[name], dtype=float)
        # side="left": a value equal to a cut point lands in the lower bin
        cols.append(np.searchsorted(cuts, s.rows[:, j], side="left"))
        alphabets.append(b.categories(name))
    class_alpha = s.label_order()
    cols.append(np.array([class_alpha.index(l) for l in s.labels], dtype=np.int64))
    alphabets.append(class_alpha)
    return DiscreteDataset(
        (*s.feature_names, s.class_name),
        tuple(alphabets),
        np.column_stack(cols) if cols else np.zeros((len(s), 0)),
        s.class_name,
    )


def discretize(s: LabeledSample, quartiles: int = 4) -> tuple[BinningScheme, DiscreteDataset]:
    scheme = fit_bins(s, quartiles)
    return scheme, apply_bins(s, scheme)
