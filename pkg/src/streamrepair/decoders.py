"""Reference decoders and the pluggable decoder abstraction.

Lightweight stand-ins for heavyweight neural decoders: a softmax regression
classifier (gradient-trained, supports incremental retraining), a
nearest-centroid classifier, and a Wiener cascade regressor (linear stage on
lagged features followed by a per-dimension polynomial).  All decoders are
immutable after fitting; ``fit``/``retrain`` return new instances.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .data import CONTINUOUS, DISCRETE, Label, Sample

RETRAIN_INCREMENTAL = "incremental"
RETRAIN_CONCAT = "concat"


class Decoder:
    """Common decoder surface: fit, predict, retrain, JSON round-trip."""

    kind: str
    retrain_mode: str
    is_gradient: bool = False

    @property
    def is_fitted(self) -> bool:
        raise NotImplementedError

    @property
    def n_features(self) -> int:
        raise NotImplementedError

    def fit(self, samples: Sequence[Sample]) -> "Decoder":
        raise NotImplementedError

    def predict(self, features: np.ndarray) -> Label:
        raise NotImplementedError

    def predict_series(self, series: Sequence[np.ndarray]) -> list:
        """Predict over an ordered feature series (overridden by stateful decoders)."""
        return [self.predict(f) for f in series]

    def retrain(self, acquired: Sequence[Sample], base: Sequence[Sample]) -> "Decoder":
        """Retrain with newly acquired data.

        Incremental mode runs additional gradient epochs on the acquired data
        only; concat mode refits from scratch on base + acquired.
        """
        if not acquired:
            raise ValueError("retrain requires a non-empty acquired set")
        if self.retrain_mode == RETRAIN_INCREMENTAL:
            if not self.is_gradient:
                raise ValueError("incremental retraining requires a gradient-trained decoder")
            return self._continue_training(acquired)
        if self.retrain_mode == RETRAIN_CONCAT:
            return self.fit(list(base) + list(acquired))
        raise ValueError(f"unknown retrain mode {self.retrain_mode!r}")

    def _continue_training(self, acquired: Sequence[Sample]) -> "Decoder":
        raise NotImplementedError

    def to_json_dict(self) -> dict:
        raise NotImplementedError


def _check_dim(features: np.ndarray, expected: int) -> np.ndarray:
    features = np.asarray(features, dtype=float)
    if features.shape != (expected,):
        raise ValueError(f"feature dimension mismatch: got {features.shape}, expected ({expected},)")
    return features


def _class_matrix(samples: Sequence[Sample], states: Sequence[str]):
    index = {s: i for i, s in enumerate(states)}
    X = np.array([s.features for s in samples], dtype=float)
    try:
        y = np.array([index[s.label] for s in samples], dtype=int)
    except KeyError as exc:
        raise ValueError(f"label {exc.args[0]!r} not in state set {tuple(states)}") from None
    present = set(y.tolist())
    missing = [states[i] for i in range(len(states)) if i not in present]
    if missing:
        raise ValueError(f"training data has no samples for class(es): {', '.join(missing)}")
    return X, y


def _softmax(scores: np.ndarray) -> np.ndarray:
    z = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


@dataclass(frozen=True, eq=False)
class SoftmaxClassifier(Decoder):
    """Multinomial logistic regression, full-batch gradient descent from zero init.

    States are kept sorted so that argmax ties resolve to the lowest class id.
    The per-epoch loss (mean cross-entropy plus L2 penalty) is recorded in
    ``loss_history`` for monitoring.
    """

    states: tuple
    learning_rate: float = 0.5
    epochs: int = 200
    l2: float = 1e-4
    incremental_epochs: int = 10
    retrain_mode: str = RETRAIN_INCREMENTAL
    columns: Optional[tuple] = None  # feature columns the decoder reads (None = all)
    weights: Optional[np.ndarray] = None
    bias: Optional[np.ndarray] = None
    input_dim: Optional[int] = None
    loss_history: tuple = ()

    kind = DISCRETE
    is_gradient = True

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(sorted(self.states)))
        if len(self.states) < 2:
            raise ValueError("softmax classifier needs at least two states")
        if self.columns is not None:
            object.__setattr__(self, "columns", tuple(int(c) for c in self.columns))

    @property
    def is_fitted(self) -> bool:
        return self.weights is not None

    @property
    def n_features(self) -> int:
        if self.input_dim is None:
            raise ValueError("decoder is not fitted")
        return self.input_dim

    def _descend(self, X, Y, W, b, epochs):
        n = X.shape[0]
        losses = []
        for _ in range(epochs):
            scores = X @ W.T + b
            P = _softmax(scores)
            eps = 1e-300
            loss = -np.mean(np.log(P[np.arange(n), Y.argmax(axis=1)] + eps))
            loss += 0.5 * self.l2 * float(np.sum(W * W))
            losses.append(float(loss))
            G = P - Y
            W = W - self.learning_rate * (G.T @ X / n + self.l2 * W)
            b = b - self.learning_rate * G.mean(axis=0)
        return W, b, losses

    def _select(self, X: np.ndarray) -> np.ndarray:
        return X if self.columns is None else X[:, list(self.columns)]

    def fit(self, samples: Sequence[Sample]) -> "SoftmaxClassifier":
        X, y = _class_matrix(samples, self.states)
        input_dim = X.shape[1]
        X = self._select(X)
        Y = np.zeros((X.shape[0], len(self.states)))
        Y[np.arange(X.shape[0]), y] = 1.0
        W = np.zeros((len(self.states), X.shape[1]))
        b = np.zeros(len(self.states))
        W, b, losses = self._descend(X, Y, W, b, self.epochs)
        return replace(self, weights=W, bias=b, input_dim=input_dim, loss_history=tuple(losses))

    def _continue_training(self, acquired: Sequence[Sample]) -> "SoftmaxClassifier":
        X, y = _class_matrix_partial(acquired, self.states)
        X = self._select(X)
        Y = np.zeros((X.shape[0], len(self.states)))
        Y[np.arange(X.shape[0]), y] = 1.0
        W, b, losses = self._descend(X, Y, self.weights.copy(), self.bias.copy(), self.incremental_epochs)
        return replace(self, weights=W, bias=b, loss_history=self.loss_history + tuple(losses))

    def predict_proba(self, features: np.ndarray) -> np.ndarray:
        features = _check_dim(features, self.n_features)
        x = self._select(features[None, :])[0]
        return _softmax((x @ self.weights.T + self.bias)[None, :])[0]

    def predict(self, features: np.ndarray) -> str:
        return self.states[int(np.argmax(self.predict_proba(features)))]

    def to_json_dict(self) -> dict:
        return {
            "type": "softmax",
            "kind": self.kind,
            "states": list(self.states),
            "learning_rate": self.learning_rate,
            "epochs": self.epochs,
            "l2": self.l2,
            "incremental_epochs": self.incremental_epochs,
            "retrain_mode": self.retrain_mode,
            "columns": None if self.columns is None else list(self.columns),
            "weights": None if self.weights is None else self.weights.ravel().tolist(),
            "weights_shape": None if self.weights is None else list(self.weights.shape),
            "bias": None if self.bias is None else self.bias.tolist(),
            "input_dim": self.input_dim,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "SoftmaxClassifier":
        weights = None
        if d.get("weights") is not None:
            weights = np.array(d["weights"], dtype=float).reshape(d["weights_shape"])
        bias = None if d.get("bias") is None else np.array(d["bias"], dtype=float)
        cols = d.get("columns")
        return cls(
            states=tuple(d["states"]),
            learning_rate=d["learning_rate"],
            epochs=d["epochs"],
            l2=d["l2"],
            incremental_epochs=d["incremental_epochs"],
            retrain_mode=d["retrain_mode"],
            columns=None if cols is None else tuple(cols),
            weights=weights,
            bias=bias,
            input_dim=d.get("input_dim"),
        )


def _class_matrix_partial(samples: Sequence[Sample], states: Sequence[str]):
    # Incremental updates may legitimately see only a subset of classes.
    index = {s: i for i, s in enumerate(states)}
    X = np.array([s.features for s in samples], dtype=float)
    try:
        y = np.array([index[s.label] for s in samples], dtype=int)
    except KeyError as exc:
        raise ValueError(f"label {exc.args[0]!r} not in state set {tuple(states)}") from None
    return X, y


@dataclass(frozen=True, eq=False)
class NearestCentroidClassifier(Decoder):
    """Per-class mean centroids; predicts the closest centroid's class."""

    states: tuple
    retrain_mode: str = RETRAIN_CONCAT
    columns: Optional[tuple] = None
    centroids: Optional[np.ndarray] = None
    input_dim: Optional[int] = None

    kind = DISCRETE
    is_gradient = False

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(sorted(self.states)))
        if self.columns is not None:
            object.__setattr__(self, "columns", tuple(int(c) for c in self.columns))

    @property
    def is_fitted(self) -> bool:
        return self.centroids is not None

    @property
    def n_features(self) -> int:
        if self.input_dim is None:
            raise ValueError("decoder is not fitted")
        return self.input_dim

    def _select(self, X: np.ndarray) -> np.ndarray:
        return X if self.columns is None else X[:, list(self.columns)]

    def fit(self, samples: Sequence[Sample]) -> "NearestCentroidClassifier":
        X, y = _class_matrix(samples, self.states)
        input_dim = X.shape[1]
        X = self._select(X)
        centroids = np.array([X[y == i].mean(axis=0) for i in range(len(self.states))])
        return replace(self, centroids=centroids, input_dim=input_dim)

    def predict(self, features: np.ndarray) -> str:
        features = _check_dim(features, self.n_features)
        x = self._select(features[None, :])[0]
        dists = np.linalg.norm(self.centroids - x, axis=1)
        return self.states[int(np.argmin(dists))]

    def to_json_dict(self) -> dict:
        return {
            "type": "nearest_centroid",
            "kind": self.kind,
            "states": list(self.states),
            "retrain_mode": self.retrain_mode,
            "columns": None if self.columns is None else list(self.columns),
            "centroids": None if self.centroids is None else self.centroids.ravel().tolist(),
            "centroids_shape": None if self.centroids is None else list(self.centroids.shape),
            "input_dim": self.input_dim,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "NearestCentroidClassifier":
        centroids = None
        if d.get("centroids") is not None:
            centroids = np.array(d["centroids"], dtype=float).reshape(d["centroids_shape"])
        cols = d.get("columns")
        return cls(
            states=tuple(d["states"]),
            retrain_mode=d["retrain_mode"],
            columns=None if cols is None else tuple(cols),
            centroids=centroids,
            input_dim=d.get("input_dim"),
        )


def _lag_matrix(series: Sequence[np.ndarray], lags: int) -> np.ndarray:
    """Stack each frame with its ``lags`` predecessors (edge-replicated at the start)."""
    frames = [np.asarray(f, dtype=float) for f in series]
    rows = []
    for t in range(len(frames)):
        stacked = [frames[max(t - back, 0)] for back in range(lags, -1, -1)]
        rows.append(np.concatenate(stacked))
    return np.array(rows)


def _polyfit(z: np.ndarray, y: np.ndarray, degree: int) -> np.ndarray:
    """Least-squares polynomial coefficients (ascending order) of y on z."""
    V = np.vander(z, degree + 1, increasing=True)
    coeffs, *_ = np.linalg.lstsq(V, y, rcond=None)
    return coeffs


def _polyval_ascending(coeffs: np.ndarray, z: np.ndarray) -> np.ndarray:
    out = np.zeros_like(z, dtype=float)
    power = np.ones_like(z, dtype=float)
    for c in coeffs:
        out = out + c * power
        power = power * z
    return out


@dataclass(frozen=True, eq=False)
class WienerCascade(Decoder):
    """Linear filter over lagged features followed by a per-dimension polynomial.

    The linear stage solves n-normalized ridge normal equations (bias term
    unpenalized); with polynomial degree 1 the cascade reduces to the linear
    filter.  Positional prediction is stateful over a series: the lag window
    is built from the preceding frames, edge-replicated at the start.
    """

    lags: int = 0
    degree: int = 3
    ridge: float = 1e-6
    output_dim: int = 2
    retrain_mode: str = RETRAIN_CONCAT
    linear: Optional[np.ndarray] = None  # ((lags+1)*features + 1, output_dim), last row is bias
    poly: Optional[np.ndarray] = None  # (output_dim, degree + 1), ascending
    feature_dim: Optional[int] = None

    kind = CONTINUOUS
    is_gradient = False

    def __post_init__(self):
        if self.lags < 0:
            raise ValueError("lag window must be non-negative")
        if self.degree < 1:
            raise ValueError("polynomial degree must be >= 1")

    @property
    def is_fitted(self) -> bool:
        return self.linear is not None

    @property
    def n_features(self) -> int:
        if self.feature_dim is None:
            raise ValueError("decoder is not fitted")
        return self.feature_dim

    def fit(self, samples: Sequence[Sample]) -> "WienerCascade":
        if len(samples) < self.lags + 1:
            raise ValueError(f"need at least lags+1={self.lags + 1} samples, got {len(samples)}")
        X = _lag_matrix([s.features for s in samples], self.lags)
        Y = np.array([s.label for s in samples], dtype=float)
        if Y.ndim != 2 or Y.shape[1] != self.output_dim:
            raise ValueError(f"labels must be vectors of dimension {self.output_dim}")
        n = X.shape[0]
        A = np.hstack([X, np.ones((n, 1))])
        G = A.T @ A / n
        reg = np.eye(A.shape[1]) * self.ridge
        reg[-1, -1] = 0.0  # bias unpenalized
        linear = np.linalg.solve(G + reg, A.T @ Y / n)
        Z = A @ linear
        poly = np.array([_polyfit(Z[:, j], Y[:, j], self.degree) for j in range(self.output_dim)])
        return replace(self, linear=linear, poly=poly, feature_dim=samples[0].features.shape[0])

    def predict_series(self, series: Sequence[np.ndarray]) -> list:
        if not self.is_fitted:
            raise ValueError("decoder is not fitted")
        frames = [_check_dim(f, self.feature_dim) for f in series]
        X = _lag_matrix(frames, self.lags)
        A = np.hstack([X, np.ones((X.shape[0], 1))])
        Z = A @ self.linear
        out = np.column_stack(
            [_polyval_ascending(self.poly[j], Z[:, j]) for j in range(self.output_dim)]
        )
        return [out[t] for t in range(out.shape[0])]

    def predict(self, features: np.ndarray) -> np.ndarray:
        # A single frame is treated as a constant history.
        return self.predict_series([features])[0]

    def to_json_dict(self) -> dict:
        return {
            "type": "wiener_cascade",
            "kind": self.kind,
            "lags": self.lags,
            "degree": self.degree,
            "ridge": self.ridge,
            "output_dim": self.output_dim,
            "retrain_mode": self.retrain_mode,
            "linear": None if self.linear is None else self.linear.ravel().tolist(),
            "linear_shape": None if self.linear is None else list(self.linear.shape),
            "poly": None if self.poly is None else self.poly.ravel().tolist(),
            "poly_shape": None if self.poly is None else list(self.poly.shape),
            "feature_dim": self.feature_dim,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "WienerCascade":
        linear = None
        if d.get("linear") is not None:
            linear = np.array(d["linear"], dtype=float).reshape(d["linear_shape"])
        poly = None
        if d.get("poly") is not None:
            poly = np.array(d["poly"], dtype=float).reshape(d["poly_shape"])
        return cls(
            lags=d["lags"],
            degree=d["degree"],
            ridge=d["ridge"],
            output_dim=d["output_dim"],
            retrain_mode=d["retrain_mode"],
            linear=linear,
            poly=poly,
            feature_dim=d.get("feature_dim"),
        )


@dataclass(frozen=True, eq=False)
class AuxiliaryBinaryClassifier:
    """Threshold rule over designated feature columns, deciding awake vs asleep.

    Total over its input domain: the mean of the selected columns is compared
    against ``threshold``; values strictly above it map to ``above``.
    """

    threshold: float = 0.0
    columns: Optional[tuple] = None
    above: str = "awake"

    def __post_init__(self):
        if self.above not in ("awake", "asleep"):
            raise ValueError("above must be 'awake' or 'asleep'")
        if self.columns is not None:
            object.__setattr__(self, "columns", tuple(int(c) for c in self.columns))

    def predict(self, features: np.ndarray) -> str:
        features = np.asarray(features, dtype=float)
        values = features if self.columns is None else features[list(self.columns)]
        verdict_above = self.above
        verdict_below = "asleep" if self.above == "awake" else "awake"
        return verdict_above if float(np.mean(values)) > self.threshold else verdict_below

    def to_json_dict(self) -> dict:
        return {
            "type": "aux_binary",
            "threshold": self.threshold,
            "columns": None if self.columns is None else list(self.columns),
            "above": self.above,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "AuxiliaryBinaryClassifier":
        cols = d.get("columns")
        return cls(threshold=d["threshold"], columns=None if cols is None else tuple(cols), above=d["above"])


_DECODER_TYPES = {
    "softmax": SoftmaxClassifier,
    "nearest_centroid": NearestCentroidClassifier,
    "wiener_cascade": WienerCascade,
}


def decoder_from_json_dict(d: dict) -> Decoder:
    try:
        cls = _DECODER_TYPES[d["type"]]
    except KeyError:
        raise ValueError(f"unknown decoder type {d.get('type')!r}") from None
    return cls.from_json_dict(d)


def save_decoder(decoder: Decoder, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(decoder.to_json_dict(), fh, indent=2, sort_keys=True)


def load_decoder(path) -> Decoder:
    with open(path, encoding="utf-8") as fh:
        return decoder_from_json_dict(json.load(fh))
