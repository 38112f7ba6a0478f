"""Black-box predictors behind a single interface.

Three backends are provided:

* :class:`MlpModel` -- a feed-forward network evaluated from a weights document.
* synthetic analytic classifiers (:data:`SYNTHETIC`), used for tests and experiments.
* :class:`BridgePredictor` -- a line-delimited JSON bridge to an external process.

Every backend exposes ``input_names``, ``labels`` and ``predict_proba(x)``.
In-process backends also expose ``predict_proba_batch(rows)`` so that the
sampler can label a whole neighbourhood in one call.
"""

from __future__ import annotations

import hashlib
import json
import math
import queue
import shlex
import subprocess
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

__all__ = [
    "FeatureVector",
    "ClassDistribution",
    "Layer",
    "MlpModel",
    "ModelFormatError",
    "PredictorError",
    "ProtocolError",
    "BridgePredictor",
    "ThresholdClassifier",
    "LinearClassifier",
    "CoinClassifier",
    "ConstantClassifier",
    "SYNTHETIC",
    "make_synthetic",
    "mlp_load",
    "load_model",
    "predict",
    "predict_label",
    "bridge_predict",
]

PROB_TOL = 1e-9
BRIDGE_SUM_TOL = 1e-6


class PredictorError(RuntimeError):
    """A predictor failed to produce a valid distribution."""


class ProtocolError(PredictorError):
    """The external process violated the stdio protocol."""


class ModelFormatError(ValueError):
    """A model document is malformed or internally inconsistent."""


@dataclass(frozen=True)
class FeatureVector:
    names: tuple[str, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        names = tuple(self.names)
        values = tuple(float(v) for v in self.values)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "values", values)
        if not names:
            raise ValueError("feature vector needs at least one feature")
        if len(set(names)) != len(names) or any(not n for n in names):
            raise ValueError("feature names must be unique and non-empty")
        if len(values) != len(names):
            raise ValueError(f"{len(names)} names but {len(values)} values")
        for n, v in zip(names, values):
            if not math.isfinite(v) or not 0.0 <= v <= 1.0:
                raise ValueError(f"feature {n!r}={v} is outside [0, 1]")

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, float], names: Sequence[str] | None = None):
        names = list(mapping) if names is None else list(names)
        missing = [n for n in names if n not in mapping]
        if missing:
            raise ValueError(f"missing features: {missing}")
        return cls(tuple(names), tuple(mapping[n] for n in names))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    def to_dict(self) -> dict[str, float]:
        return dict(zip(self.names, self.values))


@dataclass(frozen=True)
class ClassDistribution:
    labels: tuple[str, ...]
    probabilities: tuple[float, ...]

    def __post_init__(self):
        labels = tuple(str(l) for l in self.labels)
        probs = tuple(float(p) for p in self.probabilities)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "probabilities", probs)
        if len(labels) < 2:
            raise ValueError("a class distribution needs at least two labels")
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate labels in {labels}")
        if len(probs) != len(labels):
            raise ValueError("labels and probabilities differ in length")
        if any(not (0.0 <= p <= 1.0) for p in probs):
            raise ValueError(f"probabilities outside [0, 1]: {probs}")
        if abs(math.fsum(probs) - 1.0) > PROB_TOL:
            raise ValueError(f"probabilities sum to {math.fsum(probs)!r}, not 1")

    def __getitem__(self, label: str) -> float:
        return self.probabilities[self.labels.index(label)]

    def argmax(self) -> str:
        """Most probable label; the first label in declared order wins ties."""
        best = 0
        for i, p in enumerate(self.probabilities):
            if p > self.probabilities[best]:
                best = i
        return self.labels[best]

    def to_dict(self) -> dict[str, float]:
        return dict(zip(self.labels, self.probabilities))


def _normalised(labels: Sequence[str], probs: np.ndarray) -> ClassDistribution:
    probs = np.clip(np.asarray(probs, dtype=float), 0.0, 1.0)
    probs = probs / probs.sum()
    return ClassDistribution(tuple(labels), tuple(probs.tolist()))


def _check_names(model, x: FeatureVector) -> None:
    if tuple(x.names) != tuple(model.input_names):
        raise ValueError(
            f"feature names {list(x.names)} do not match model inputs {list(model.input_names)}"
        )


# ---------------------------------------------------------------------------
# feed-forward network
# ---------------------------------------------------------------------------

ACTIVATIONS = ("relu", "softmax")


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass(frozen=True)
class Layer:
    weights: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)
    activation: str


@dataclass(frozen=True)
class MlpModel:
    layers: tuple[Layer, ...]
    input_names: tuple[str, ...]
    labels: tuple[str, ...]

    def __post_init__(self):
        if not self.layers:
            raise ModelFormatError("network has no layers")
        if len(set(self.input_names)) != len(self.input_names) or not self.input_names:
            raise ModelFormatError("input_names must be non-empty and unique")
        if len(set(self.labels)) != len(self.labels) or len(self.labels) < 2:
            raise ModelFormatError("output_labels must hold at least two unique labels")
        width = len(self.input_names)
        for i, layer in enumerate(self.layers):
            if layer.activation not in ACTIVATIONS:
                raise ModelFormatError(f"layer {i}: unknown activation {layer.activation!r}")
            if layer.weights.ndim != 2 or layer.bias.ndim != 1:
                raise ModelFormatError(f"layer {i}: weights must be 2-D and bias 1-D")
            out, inp = layer.weights.shape
            if inp != width:
                raise ModelFormatError(f"layer {i} expects {inp} inputs but receives {width}")
            if layer.bias.shape[0] != out:
                raise ModelFormatError(f"layer {i}: bias length {layer.bias.shape[0]} != {out}")
            width = out
        if self.layers[-1].activation != "softmax":
            raise ModelFormatError("final activation must be softmax")
        if width != len(self.labels):
            raise ModelFormatError(f"final layer has {width} outputs for {len(self.labels)} labels")

    def forward(self, rows: np.ndarray) -> np.ndarray:
        h = np.atleast_2d(np.asarray(rows, dtype=float))
        for layer in self.layers:
            h = h @ layer.weights.T + layer.bias
            h = np.maximum(h, 0.0) if layer.activation == "relu" else _softmax(h)
        return h

    def predict_proba_batch(self, rows: np.ndarray) -> np.ndarray:
        return self.forward(rows)

    def predict_proba(self, x: FeatureVector) -> ClassDistribution:
        _check_names(self, x)
        return _normalised(self.labels, self.forward(x.as_array())[0])

    def to_document(self) -> dict[str, Any]:
        return {
            "input_names": list(self.input_names),
            "output_labels": list(self.labels),
            "layers": [
                {
                    "weights": layer.weights.tolist(),
                    "bias": layer.bias.tolist(),
                    "activation": layer.activation,
                }
                for layer in self.layers
            ],
        }


def mlp_load(document: str | Mapping[str, Any]) -> MlpModel:
    """Build an :class:`MlpModel` from a weights document.

    ``document`` is either JSON text or an already-parsed mapping with keys
    ``input_names``, ``output_labels`` and ``layers``; each layer carries
    ``weights`` (``[out][in]``), ``bias`` and ``activation``.
    """
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"weights document is not valid JSON: {exc}") from exc
    if not isinstance(document, Mapping):
        raise ModelFormatError("weights document must be an object")
    try:
        input_names = tuple(str(n) for n in document["input_names"])
        labels = tuple(str(l) for l in document["output_labels"])
        raw_layers = document["layers"]
    except (KeyError, TypeError) as exc:
        raise ModelFormatError(f"weights document is missing {exc}") from exc
    layers = []
    for i, raw in enumerate(raw_layers):
        try:
            w = np.asarray(raw["weights"], dtype=float)
            b = np.asarray(raw["bias"], dtype=float)
            act = raw["activation"]
        except (KeyError, TypeError, ValueError) as exc:
            raise ModelFormatError(f"layer {i} is malformed: {exc}") from exc
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ModelFormatError(f"layer {i} holds non-finite numbers")
        layers.append(Layer(w, b, act))
    return MlpModel(tuple(layers), input_names, labels)


# ---------------------------------------------------------------------------
# synthetic classifiers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ThresholdClassifier:
    """Hard classifier: ``positive`` iff ``x[feature] > threshold``."""

    input_names: tuple[str, ...]
    feature: str
    threshold: float = 0.5
    labels: tuple[str, ...] = ("neg", "pos")

    def predict_proba_batch(self, rows: np.ndarray) -> np.ndarray:
        j = self.input_names.index(self.feature)
        hit = np.atleast_2d(rows)[:, j] > self.threshold
        return np.stack([~hit, hit], axis=1).astype(float)

    def predict_proba(self, x: FeatureVector) -> ClassDistribution:
        _check_names(self, x)
        return _normalised(self.labels, self.predict_proba_batch(x.as_array())[0])

    def boundary_distance(self, values: Sequence[float]) -> float:
        return abs(values[self.input_names.index(self.feature)] - self.threshold)


@dataclass(frozen=True)
class LinearClassifier:
    """Hard linear classifier: ``positive`` iff ``w . x > bias``.

    ``sharpness`` turns it into a logistic model when finite; the default
    ``inf`` gives 0/1 probabilities.
    """

    input_names: tuple[str, ...]
    weights: tuple[float, ...]
    bias: float = 0.0
    labels: tuple[str, ...] = ("neg", "pos")
    sharpness: float = math.inf

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if len(self.weights) != len(self.input_names):
            raise ValueError("one weight per input feature is required")
        if not any(self.weights):
            raise ValueError("weights must not all be zero")

    def predict_proba_batch(self, rows: np.ndarray) -> np.ndarray:
        margin = np.atleast_2d(rows) @ np.asarray(self.weights) - self.bias
        if math.isinf(self.sharpness):
            p = (margin > 0).astype(float)
        else:
            p = 1.0 / (1.0 + np.exp(-self.sharpness * margin))
        return np.stack([1.0 - p, p], axis=1)

    def predict_proba(self, x: FeatureVector) -> ClassDistribution:
        _check_names(self, x)
        return _normalised(self.labels, self.predict_proba_batch(x.as_array())[0])

    def boundary_distance(self, values: Sequence[float]) -> float:
        """Distance to the hyperplane in the infinity norm, ``|w.x - b| / ||w||_1``."""
        w = np.asarray(self.weights)
        return float(abs(np.dot(w, values) - self.bias) / np.abs(w).sum())


@dataclass(frozen=True)
class CoinClassifier:
    """Labels drawn from a seeded coin that ignores the feature values' meaning.

    The draw is a hash of ``(seed, x)`` so repeated queries stay deterministic.
    """

    input_names: tuple[str, ...]
    seed: int = 0
    p_positive: float = 0.5
    labels: tuple[str, ...] = ("neg", "pos")

    def _flip(self, row: np.ndarray) -> float:
        h = hashlib.blake2b(digest_size=8, key=self.seed.to_bytes(8, "little"))
        h.update(np.ascontiguousarray(row, dtype="<f8").tobytes())
        u = int.from_bytes(h.digest(), "little") / 2.0**64
        return 1.0 if u < self.p_positive else 0.0

    def predict_proba_batch(self, rows: np.ndarray) -> np.ndarray:
        p = np.array([self._flip(r) for r in np.atleast_2d(rows)])
        return np.stack([1.0 - p, p], axis=1)

    def predict_proba(self, x: FeatureVector) -> ClassDistribution:
        _check_names(self, x)
        return _normalised(self.labels, self.predict_proba_batch(x.as_array())[0])


@dataclass(frozen=True)
class ConstantClassifier:
    input_names: tuple[str, ...]
    label: str = "pos"
    labels: tuple[str, ...] = ("neg", "pos")

    def predict_proba_batch(self, rows: np.ndarray) -> np.ndarray:
        out = np.zeros((np.atleast_2d(rows).shape[0], len(self.labels)))
        out[:, self.labels.index(self.label)] = 1.0
        return out

    def predict_proba(self, x: FeatureVector) -> ClassDistribution:
        _check_names(self, x)
        return _normalised(self.labels, self.predict_proba_batch(x.as_array())[0])


SYNTHETIC = {
    "threshold": ThresholdClassifier,
    "linear": LinearClassifier,
    "coin": CoinClassifier,
    "constant": ConstantClassifier,
}


def make_synthetic(kind: str, **params):
    try:
        cls = SYNTHETIC[kind]
    except KeyError:
        raise ModelFormatError(f"unknown synthetic classifier {kind!r}; have {sorted(SYNTHETIC)}")
    for key in ("input_names", "labels", "weights"):
        if key in params:
            params[key] = tuple(params[key])
    return cls(**params)


# ---------------------------------------------------------------------------
# stdio bridge
# ---------------------------------------------------------------------------


def parse_bridge_response(line: str, labels: Sequence[str] | None) -> ClassDistribution:
    """Validate one response line and return its distribution.

    Sums within ``1e-6`` of one are renormalised; anything further off is rejected.
    """
    try:
        payload = json.loads(line)
        probs = payload["probabilities"]
    except (json.JSONDecodeError, TypeError, KeyError) as exc:
        raise ProtocolError(f"bad response line {line!r}: {exc}") from exc
    if not isinstance(probs, dict):
        raise ProtocolError("'probabilities' must be an object")
    if labels is None:
        labels = list(probs)
    missing = [l for l in labels if l not in probs]
    extra = [l for l in probs if l not in labels]
    if missing or extra:
        raise ProtocolError(f"response labels mismatch: missing={missing} extra={extra}")
    try:
        values = np.array([float(probs[l]) for l in labels])
    except (TypeError, ValueError) as exc:
        raise ProtocolError(f"non-numeric probability: {exc}") from exc
    if not np.all(np.isfinite(values)) or np.any(values < 0) or np.any(values > 1):
        raise ProtocolError(f"probabilities out of range: {probs}")
    total = values.sum()
    if abs(total - 1.0) > BRIDGE_SUM_TOL:
        raise ProtocolError(f"probabilities sum to {total}, expected 1")
    return _normalised(labels, values)


@dataclass
class BridgePredictor:
    """Talks to an external process, one JSON request and response per line.

    Requests are serialised under a lock; spawn several bridges for parallelism.
    """

    command: Sequence[str] | str
    input_names: tuple[str, ...]
    labels: tuple[str, ...] | None = None
    timeout: float = 30.0
    _proc: subprocess.Popen | None = field(default=None, init=False, repr=False)
    _lines: queue.Queue | None = field(default=None, init=False, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, init=False, repr=False)

    def __post_init__(self):
        self.input_names = tuple(self.input_names)
        if self.labels is not None:
            self.labels = tuple(self.labels)

    def start(self) -> None:
        if self._proc is not None:
            return
        argv = shlex.split(self.command) if isinstance(self.command, str) else list(self.command)
        self._proc = subprocess.Popen(
            argv,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            encoding="utf-8",
            bufsize=1,
        )
        self._lines = queue.Queue()
        threading.Thread(target=self._pump, args=(self._proc.stdout, self._lines), daemon=True).start()

    @staticmethod
    def _pump(stream, sink: queue.Queue) -> None:
        for line in stream:
            sink.put(line)
        sink.put(None)

    def close(self) -> None:
        if self._proc is None:
            return
        try:
            self._proc.stdin.close()
            self._proc.wait(timeout=5)
        except (OSError, subprocess.TimeoutExpired):
            self._proc.kill()
        self._proc = None

    def __enter__(self):
        self.start()
        return self

    def __exit__(self, *exc):
        self.close()

    def predict_proba(self, x: FeatureVector) -> ClassDistribution:
        _check_names(self, x)
        with self._lock:
            self.start()
            request = json.dumps({"features": x.to_dict()})
            try:
                self._proc.stdin.write(request + "\n")
                self._proc.stdin.flush()
            except (BrokenPipeError, OSError) as exc:
                raise PredictorError(f"external process is gone: {exc}") from exc
            try:
                line = self._lines.get(timeout=self.timeout)
            except queue.Empty:
                raise PredictorError(f"no response within {self.timeout}s") from None
            if line is None:
                raise PredictorError("external process closed its output")
        dist = parse_bridge_response(line, self.labels)
        if self.labels is None:
            self.labels = dist.labels
        return dist


def bridge_predict(endpoint: BridgePredictor, x: FeatureVector) -> ClassDistribution:
    return endpoint.predict_proba(x)


# ---------------------------------------------------------------------------
# uniform entry points
# ---------------------------------------------------------------------------


def predict(model, x: FeatureVector) -> ClassDistribution:
    return model.predict_proba(x)


def predict_label(model, x: FeatureVector) -> str:
    return predict(model, x).argmax()


def predict_labels(model, rows: np.ndarray, names: Sequence[str]) -> list[str]:
    """Label every row; aborts with the failing row index on predictor errors."""
    rows = np.atleast_2d(rows)
    batch = getattr(model, "predict_proba_batch", None)
    if batch is not None:
        if tuple(names) != tuple(model.input_names):
            raise ValueError(f"feature names {list(names)} do not match model inputs")
        probs = batch(rows)
        # np.argmax returns the first maximum, matching ClassDistribution.argmax
        return [model.labels[i] for i in np.argmax(probs, axis=1)]
    out = []
    for i, row in enumerate(rows):
        try:
            out.append(predict_label(model, FeatureVector(tuple(names), tuple(row))))
        except Exception as exc:
            raise PredictorError(f"prediction failed at row {i}: {exc}") from exc
    return out


def load_model(spec: str, input_names: Sequence[str] | None = None, labels: Sequence[str] | None = None,
               timeout: float = 30.0):
    """Resolve a ``--model`` argument.

    ``cmd:<command line>`` starts a stdio bridge; anything else is a JSON file
    holding either an MLP weights document or ``{"synthetic": {"kind": ..., ...}}``.
    """
    if spec.startswith("cmd:"):
        if input_names is None:
            raise ValueError("a bridge model needs the input feature names")
        return BridgePredictor(spec[4:], tuple(input_names), tuple(labels) if labels else None, timeout)
    doc = json.loads(Path(spec).read_text())
    if "synthetic" in doc:
        params = dict(doc["synthetic"])
        return make_synthetic(params.pop("kind"), **params)
    return mlp_load(doc)
