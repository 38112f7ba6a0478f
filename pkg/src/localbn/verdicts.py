"""Confidence verdicts from the learned network's class node.

The decision procedure, checked in order:

1. class node has no edges                            -> ``R2_unreliable``
2. surrogate argmax differs from the black-box label  -> ``R3_contrast``
3. surrogate probability of that label >= ``tau``      -> ``R1_high_confidence``
4. otherwise                                          -> ``R4_uncertain``
"""

from __future__ import annotations

from dataclasses import dataclass

from .bn import Dag
from .predictor import ClassDistribution

__all__ = [
    "RULES",
    "ClassTopology",
    "RuleVerdict",
    "classify_topology",
    "classify_rule",
    "unanimous_verdict",
]

R1 = "R1_high_confidence"
R2 = "R2_unreliable"
R3 = "R3_contrast"
R4 = "R4_uncertain"
RULES = (R1, R2, R3, R4)

DEFAULT_TAU = 0.95


@dataclass(frozen=True)
class ClassTopology:
    pattern: str
    in_degree: int
    out_degree: int

    def to_dict(self) -> dict:
        return {"pattern": self.pattern, "in_degree": self.in_degree, "out_degree": self.out_degree}


@dataclass(frozen=True)
class RuleVerdict:
    rule: str
    predicted_label: str
    surrogate_argmax: str
    surrogate_posterior: ClassDistribution
    threshold_used: float
    topology: ClassTopology

    def to_dict(self) -> dict:
        return {
            "rule": self.rule,
            "predicted_label": self.predicted_label,
            "surrogate_argmax": self.surrogate_argmax,
            "surrogate_posterior": {
                "labels": list(self.surrogate_posterior.labels),
                "probabilities": list(self.surrogate_posterior.probabilities),
            },
            "threshold_used": self.threshold_used,
            "topology": self.topology.to_dict(),
        }


def _pattern(in_degree: int, out_degree: int) -> str:
    if in_degree == 0 and out_degree == 0:
        return "isolated"
    if out_degree == 0:
        return "common_effect"
    if in_degree == 0:
        return "common_cause"
    return "mixed"


def classify_topology(dag: Dag, class_var: str) -> ClassTopology:
    if class_var not in dag:
        raise KeyError(f"unknown class variable {class_var!r}")
    i, o = dag.in_degree(class_var), dag.out_degree(class_var)
    return ClassTopology(_pattern(i, o), i, o)


def _check_tau(tau: float) -> None:
    if not 0.5 < tau <= 1.0:
        raise ValueError(f"tau must lie in (0.5, 1], got {tau}")


def classify_rule(dag: Dag, class_var: str, class_marginal: ClassDistribution,
                  predicted_label: str, tau: float = DEFAULT_TAU) -> RuleVerdict:
    _check_tau(tau)
    if predicted_label not in class_marginal.labels:
        raise ValueError(f"{predicted_label!r} is not a class label")
    topology = classify_topology(dag, class_var)
    top = class_marginal.argmax()
    p_pred = class_marginal[predicted_label]
    if topology.pattern == "isolated":
        rule = R2
    elif p_pred < class_marginal[top]:
        # a tie with the predicted label counts as agreement
        rule = R3
    elif p_pred >= tau:
        rule = R1
    else:
        rule = R4
    if rule != R3 and p_pred == class_marginal[top]:
        top = predicted_label
    return RuleVerdict(rule, predicted_label, top, class_marginal, tau, topology)


def unanimous_verdict(dag: Dag, class_var: str, labels: tuple[str, ...], unanimous_label: str,
                      predicted_label: str, tau: float = DEFAULT_TAU) -> RuleVerdict:
    """Verdict for a neighbourhood the black box labels with a single class.

    The surrogate posterior puts all mass on that class. The verdict is R1 when
    it matches the prediction and R3 otherwise; topology stays ``isolated``.
    """
    _check_tau(tau)
    posterior = ClassDistribution(labels, tuple(1.0 if l == unanimous_label else 0.0 for l in labels))
    rule = R1 if unanimous_label == predicted_label else R3
    return RuleVerdict(rule, predicted_label, unanimous_label, posterior, tau,
                       classify_topology(dag, class_var))
