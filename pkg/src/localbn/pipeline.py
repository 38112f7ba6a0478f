"""End-to-end explanation of single predictions, batches and epsilon sweeps."""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .bn import BayesianNetwork, Dag, SearchConfig, fit_parameters, hill_climb
from .discretizer import QUANTILE_METHOD, discretize
from .inference import all_marginals, blanket_nodes, markov_blanket
from .predictor import ClassDistribution, FeatureVector, predict
from .sampler import LabeledSample, PermutationConfig, generate_permutations, label_histogram
from .verdicts import DEFAULT_TAU, RULES, classify_rule, unanimous_verdict

__all__ = [
    "ExplainConfig",
    "ExplanationReport",
    "explain",
    "explain_sample",
    "batch_explain",
    "epsilon_sweep",
    "confusion_cell",
    "read_dataset",
    "render_report",
    "derive_seed",
    "CELLS",
]

CELLS = ("TP", "TN", "FP", "FN")
FORMATS = ("json", "dot", "text")


@dataclass(frozen=True)
class ExplainConfig:
    epsilon: float = 0.1
    n_samples: int = 300
    seed: int = 0
    quartiles: int = 4
    tau: float = DEFAULT_TAU
    max_parents: int | None = 4
    max_iterations: int = 1000
    alpha: float = 1.0
    include_original: bool = True
    class_var: str = "class"
    # full network when the variable count is at most this, blanket view otherwise
    node_threshold: int = 10
    blanket_depth: int = 1

    def __post_init__(self):
        PermutationConfig(self.epsilon, self.n_samples, self.seed, self.include_original)
        SearchConfig(self.max_parents, self.max_iterations)
        if self.quartiles < 2:
            raise ValueError("quartiles must be at least 2")
        if not 0.5 < self.tau <= 1.0:
            raise ValueError("tau must lie in (0.5, 1]")
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")
        if self.blanket_depth < 1:
            raise ValueError("blanket_depth must be at least 1")

    def echo(self) -> dict[str, Any]:
        """Every knob that shaped a result, including fixed conventions."""
        out = dataclasses.asdict(self)
        out.update(
            quantile_method=QUANTILE_METHOD,
            bin_closure="right",
            score="bic",
            log_base="e",
            search="hill_climb(add,remove,reverse) from empty graph",
            tie_break="lexicographic(operator,parent,child)",
            elimination_order="min_degree",
        )
        return out


def derive_seed(*keys: int) -> int:
    """Deterministic 64-bit seed from a tuple of non-negative integers."""
    lo, hi = np.random.SeedSequence(list(keys)).generate_state(2, np.uint32)
    return int(lo) | (int(hi) << 32)


def _canonical(doc: Any) -> str:
    return json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n"


def _dist_doc(d: ClassDistribution) -> dict:
    return {"labels": list(d.labels), "probabilities": list(d.probabilities)}


@dataclass
class ExplanationReport:
    input: dict
    prediction: dict
    config: dict
    binning: dict
    sample: dict
    view: str
    network: dict
    markov_blanket: dict
    marginals: dict
    topology: dict
    verdict: dict
    timing: dict = field(default_factory=dict)

    @property
    def rule(self) -> str:
        return self.verdict["rule"]

    @property
    def class_var(self) -> str:
        return self.config["class_var"]

    def bayesian_network(self) -> BayesianNetwork:
        return BayesianNetwork.from_dict(self.network)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "ExplanationReport":
        return cls(**{f.name: doc[f.name] for f in dataclasses.fields(cls) if f.name in doc})

    def to_json(self) -> str:
        return _canonical(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "ExplanationReport":
        return cls.from_dict(json.loads(text))


def _class_marginal(labels: Sequence[str], alphabet: Sequence[str], probs: np.ndarray) -> ClassDistribution:
    unknown = set(alphabet) - set(labels)
    if unknown:
        raise ValueError(f"sample holds labels the model never declared: {sorted(unknown)}")
    values = [float(probs[alphabet.index(l)]) if l in alphabet else 0.0 for l in labels]
    return ClassDistribution(tuple(labels), tuple(values))


def explain_sample(x: FeatureVector, prediction: ClassDistribution, sample: LabeledSample,
                   cfg: ExplainConfig, timing: dict | None = None) -> ExplanationReport:
    """Run discretisation, structure search, fitting, inference and verdict on a labelled sample."""
    timing = dict(timing or {})
    clock = time.perf_counter()
    scheme, data = discretize(sample, cfg.quartiles)
    timing["discretize_s"] = time.perf_counter() - clock

    clock = time.perf_counter()
    dag = hill_climb(data, SearchConfig(cfg.max_parents, cfg.max_iterations))
    bn = fit_parameters(data, dag, cfg.alpha)
    timing["learn_s"] = time.perf_counter() - clock

    clock = time.perf_counter()
    marginals = all_marginals(bn)
    blanket = markov_blanket(dag, sample.class_name)
    timing["inference_s"] = time.perf_counter() - clock

    predicted = prediction.argmax()
    alphabet = bn.alphabets[sample.class_name]
    if len(alphabet) == 1:
        verdict = unanimous_verdict(dag, sample.class_name, prediction.labels, alphabet[0], predicted, cfg.tau)
    else:
        posterior = _class_marginal(prediction.labels, alphabet, marginals[sample.class_name])
        verdict = classify_rule(dag, sample.class_name, posterior, predicted, cfg.tau)

    hist = label_histogram(sample)
    return ExplanationReport(
        input={"names": list(x.names), "values": list(x.values)},
        prediction={"label": predicted, "distribution": _dist_doc(prediction)},
        config=cfg.echo(),
        binning={"method": QUANTILE_METHOD, "quartiles": scheme.quartiles,
                 "cuts": {k: list(v) for k, v in scheme.cuts.items()}},
        sample={"n_rows": len(sample), "labels": list(hist), "counts": list(hist.values())},
        view="full" if len(dag.nodes) <= cfg.node_threshold else "markov_blanket",
        network=bn.to_dict(),
        markov_blanket=blanket.to_dict(),
        marginals={v: p.tolist() for v, p in marginals.items()},
        topology=verdict.topology.to_dict(),
        verdict=verdict.to_dict(),
        timing=timing,
    )


def explain(x: FeatureVector, model, cfg: ExplainConfig = ExplainConfig()) -> ExplanationReport:
    """Explain the black box's prediction for ``x``.

    Stages: neighbourhood sampling, quantile binning, hill climbing, CPT
    fitting, prior marginals, class Markov blanket, verdict. When the whole
    neighbourhood gets one label the class node cannot be learned; the verdict
    is then R1 with posterior 1 (R3 if that label differs from the prediction).
    """
    clock = time.perf_counter()
    prediction = predict(model, x)
    sample = generate_permutations(
        x, model, PermutationConfig(cfg.epsilon, cfg.n_samples, cfg.seed, cfg.include_original),
        class_name=cfg.class_var,
    )
    return explain_sample(x, prediction, sample, cfg, {"sample_s": time.perf_counter() - clock})


# ---------------------------------------------------------------------------
# batches and sweeps
# ---------------------------------------------------------------------------


def confusion_cell(truth: str, predicted: str, positive: str) -> str:
    if predicted == positive:
        return "TP" if truth == positive else "FP"
    return "FN" if truth == positive else "TN"


def read_dataset(source: str | Path | io.TextIOBase, label_col: str,
                 feature_names: Sequence[str] | None = None) -> list[tuple[FeatureVector, str]]:
    """Load a labelled CSV; features are taken in ``feature_names`` order when given."""
    if isinstance(source, (str, Path)):
        text = Path(source).read_text()
    else:
        text = source.read()
    reader = csv.DictReader(io.StringIO(text))
    header = reader.fieldnames or []
    if label_col not in header:
        raise ValueError(f"label column {label_col!r} not in header {header}")
    names = list(feature_names) if feature_names else [h for h in header if h != label_col]
    missing = [n for n in names if n not in header]
    if missing:
        raise ValueError(f"dataset lacks feature columns {missing}")
    out = []
    for i, row in enumerate(reader):
        try:
            x = FeatureVector(tuple(names), tuple(float(row[n]) for n in names))
        except (TypeError, ValueError) as exc:
            raise ValueError(f"dataset row {i}: {exc}") from exc
        out.append((x, row[label_col]))
    return out


def batch_explain(dataset: Iterable[tuple[FeatureVector, str]], model, cfg: ExplainConfig = ExplainConfig(),
                  positive_label: str | None = None) -> list[tuple[ExplanationReport, str]]:
    """Explain every row; row ``i`` uses the seed derived from ``(cfg.seed, i)``.

    ``positive_label`` defaults to the model's last declared label.
    """
    out = []
    for i, (x, truth) in enumerate(dataset):
        row_cfg = dataclasses.replace(cfg, seed=derive_seed(cfg.seed, i))
        report = explain(x, model, row_cfg)
        positive = positive_label if positive_label is not None else model.labels[-1]
        out.append((report, confusion_cell(truth, report.prediction["label"], positive)))
    return out


def _rule_table(results: Sequence[tuple[ExplanationReport, str]]) -> dict:
    table = {}
    for cell in (*CELLS, "all"):
        rules = [r.rule for r, c in results if cell == "all" or c == cell]
        n = len(rules)
        table[cell] = {
            "n": n,
            "empty": n == 0,
            "frequencies": {rule: (rules.count(rule) / n if n else 0.0) for rule in RULES},
        }
    return table


def epsilon_sweep(dataset: Sequence[tuple[FeatureVector, str]], model, epsilons: Sequence[float],
                  cfg: ExplainConfig = ExplainConfig(), positive_label: str | None = None,
                  dataset_id: str = "", model_id: str = "") -> dict:
    """Rule frequencies per confusion cell for each epsilon.

    Grid point ``k`` runs :func:`batch_explain` with base seed ``derive_seed(cfg.seed, k)``.
    """
    if not epsilons:
        raise ValueError("at least one epsilon is required")
    dataset = list(dataset)
    grid = []
    for k, eps in enumerate(epsilons):
        if not 0.0 <= eps <= 1.0:
            raise ValueError(f"epsilon {eps} outside [0, 1]")
        seed = derive_seed(cfg.seed, k)
        results = batch_explain(dataset, model, dataclasses.replace(cfg, epsilon=float(eps), seed=seed),
                                positive_label)
        grid.append({"epsilon": float(eps), "seed": seed, "cells": _rule_table(results)})
    echo = cfg.echo()
    echo.pop("epsilon")
    return {
        "dataset": dataset_id,
        "model": model_id,
        "seed": cfg.seed,
        "n_points": len(dataset),
        "positive_label": positive_label if positive_label is not None else model.labels[-1],
        "config": echo,
        "epsilons": [float(e) for e in epsilons],
        "grid": grid,
    }


def sweep_to_json(summary: dict) -> str:
    return _canonical(summary)


def file_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# rendering
# ---------------------------------------------------------------------------


def _dot_escape(s: str) -> str:
    return s.replace("\\", "\\\\").replace('"', '\\"')


def _dot_quote(s: str) -> str:
    return f'"{_dot_escape(s)}"'


def _view_nodes(report: ExplanationReport, depth: int) -> list[str]:
    dag = Dag.from_dict(report.network)
    if report.view == "full":
        return list(dag.nodes)
    return blanket_nodes(dag, report.class_var, depth)


def render_dot(report: ExplanationReport, depth: int = 1) -> str:
    nodes = _view_nodes(report, depth)
    keep = set(nodes)
    alphabets = report.network["alphabets"]
    lines = ["digraph explanation {", "  rankdir=LR;", "  node [shape=ellipse];"]
    for v in nodes:
        probs = report.marginals[v]
        k = int(np.argmax(probs))
        # DOT's own "\\n" escape separates the name from the top marginal
        label = _dot_escape(v) + "\\n" + _dot_escape(f"P({alphabets[v][k]})={probs[k]:.4f}")
        attrs = [f'label="{label}"']
        if v == report.class_var:
            attrs.append("peripheries=2")
        lines.append(f"  {_dot_quote(v)} [{', '.join(attrs)}];")
    for u, v in report.network["edges"]:
        if u in keep and v in keep:
            lines.append(f"  {_dot_quote(u)} -> {_dot_quote(v)};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def render_text(report: ExplanationReport) -> str:
    v = report.verdict
    post = v["surrogate_posterior"]
    mb = report.markov_blanket
    members = mb["parents"] + mb["children"] + mb["spouses"]
    lines = [
        f"prediction: {report.prediction['label']}",
        f"verdict: {v['rule']}",
        "surrogate posterior: " + ", ".join(
            f"{l}={p:.4f}" for l, p in zip(post["labels"], post["probabilities"])),
        f"class topology: {report.topology['pattern']}",
        f"markov blanket of {mb['target']}: " + (", ".join(members) if members else "(empty)"),
        f"view: {report.view} ({len(report.network['nodes'])} variables)",
        f"epsilon={report.config['epsilon']} n_samples={report.config['n_samples']} "
        f"seed={report.config['seed']} tau={report.config['tau']}",
    ]
    return "\n".join(lines) + "\n"


def render_report(report: ExplanationReport, fmt: str = "json", depth: int = 1) -> str:
    if fmt == "json":
        return report.to_json()
    if fmt == "dot":
        return render_dot(report, depth)
    if fmt == "text":
        return render_text(report)
    raise ValueError(f"unknown format {fmt!r}; expected one of {FORMATS}")
