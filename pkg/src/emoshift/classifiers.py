"""Least-squares linear and quadratic classifiers with one-hot targets."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ModelError

MODES = ("none", "diagonal", "full")
# CLI/report names for the expansion modes.
CLASSIFIERS = {"linear": "none", "diagonal": "diagonal", "quadratic": "diagonal", "full": "full"}


@dataclass(frozen=True)
class LabeledDataset:
    features: np.ndarray
    labels: np.ndarray
    class_count: int = 7

    def __post_init__(self):
        x = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels, dtype=np.int64)
        if x.ndim != 2 or y.shape != (x.shape[0],):
            raise ModelError(f"features {x.shape} / labels {y.shape} mismatch", "shape-error")
        if not np.all(np.isfinite(x)):
            raise ModelError("non-finite feature values", "invalid-input")
        if len(y) and (y.min() < 0 or y.max() >= self.class_count):
            raise ModelError(f"labels outside [0, {self.class_count})", "invalid-input")
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)

    def __len__(self) -> int:
        return len(self.labels)


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, x: np.ndarray) -> "Standardizer":
        return cls(x.mean(axis=0), np.maximum(x.std(axis=0), 1e-12))

    @classmethod
    def identity(cls, n: int) -> "Standardizer":
        return cls(np.zeros(n), np.ones(n))

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) / self.scale


def expanded_length(n: int, mode: str) -> int:
    if mode == "none":
        return n
    if mode == "diagonal":
        return 2 * n
    if mode == "full":
        return n + n * (n + 1) // 2
    raise ModelError(f"unknown expansion mode {mode!r}", "invalid-mode")


def quadratic_expand(x: np.ndarray, mode: str) -> np.ndarray:
    """Append squares (``diagonal``) or all products ``x_m x_n, m <= n`` (``full``).

    Works on a single vector or on the rows of a matrix.
    """
    x = np.asarray(x, dtype=np.float64)
    if mode == "none":
        return x
    if mode == "diagonal":
        return np.concatenate([x, x * x], axis=-1)
    if mode == "full":
        i, j = np.triu_indices(x.shape[-1])
        return np.concatenate([x, x[..., i] * x[..., j]], axis=-1)
    raise ModelError(f"unknown expansion mode {mode!r}", "invalid-mode")


@dataclass(frozen=True)
class LinearModel:
    weights: np.ndarray  # (L' + 1) x K, bias in the last row
    mode: str
    standardizer: Standardizer
    ridge: float = 0.0
    fallback_ridge: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def class_count(self) -> int:
        return self.weights.shape[1]

    @property
    def input_length(self) -> int:
        return len(self.standardizer.mean)

    def design(self, x: np.ndarray) -> np.ndarray:
        g = quadratic_expand(self.standardizer(np.atleast_2d(x)), self.mode)
        return np.hstack([g, np.ones((g.shape[0], 1))])

    def scores(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != self.input_length:
            raise ModelError(f"expected {self.input_length} features, got {x.shape[1]}", "shape-error")
        if not np.all(np.isfinite(x)):
            raise ModelError("non-finite input", "invalid-input")
        return self.design(x) @ self.weights

    def predict_many(self, x: np.ndarray, tie_tol: float = 1e-9) -> np.ndarray:
        """Arg-max class per row; scores within ``tie_tol`` (relative) of the
        maximum count as tied and the lowest class index wins."""
        y = self.scores(x)
        top = y.max(axis=1, keepdims=True)
        tied = y >= top - tie_tol * np.maximum(1.0, np.abs(top))
        return np.argmax(tied, axis=1)

    def to_json(self) -> str:
        return json.dumps(
            {
                "mode": self.mode,
                "ridge": self.ridge,
                "fallback_ridge": self.fallback_ridge,
                "mean": self.standardizer.mean.tolist(),
                "scale": self.standardizer.scale.tolist(),
                "weights": self.weights.tolist(),
                "meta": self.meta,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "LinearModel":
        d = json.loads(text)
        std = Standardizer(np.array(d["mean"]), np.array(d["scale"]))
        return cls(np.array(d["weights"]), d["mode"], std, d["ridge"], d["fallback_ridge"], d.get("meta", {}))


def one_hot(labels: np.ndarray, class_count: int) -> np.ndarray:
    t = np.zeros((len(labels), class_count))
    t[np.arange(len(labels)), labels] = 1.0
    return t


def _solve(gram: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    w = np.linalg.solve(gram, rhs)
    if not np.all(np.isfinite(w)):
        raise np.linalg.LinAlgError("non-finite solution")
    # refuse numerically singular systems instead of returning garbage
    if np.linalg.cond(gram) > 1e13:
        raise np.linalg.LinAlgError("ill-conditioned normal equations")
    return w


def fit_least_squares(
    dataset: LabeledDataset,
    mode: str = "diagonal",
    ridge: float = 0.0,
    standardize: bool = True,
) -> LinearModel:
    """Solve ``(G'G + lambda I) W = G'T`` for one-hot targets ``T``.

    ``G`` is the standardized, expanded feature table with a trailing column
    of ones; the bias is not penalized. When the system is singular at the
    requested ``ridge``, it is retried once with
    ``1e-8 * trace(G'G) / L'`` and the model is flagged.
    """
    if ridge < 0:
        raise ModelError(f"ridge must be >= 0, got {ridge}", "invalid-ridge")
    if len(dataset) == 0:
        raise ModelError("no training patterns", "empty-dataset")
    x = dataset.features
    std = Standardizer.fit(x) if standardize else Standardizer.identity(x.shape[1])
    g = quadratic_expand(std(x), mode)
    n_exp = g.shape[1]
    if n_exp != expanded_length(x.shape[1], mode):
        raise ModelError(f"expanded width {n_exp} for mode {mode}", "shape-error")
    g = np.hstack([g, np.ones((g.shape[0], 1))])
    t = one_hot(dataset.labels, dataset.class_count)

    gram = g.T @ g
    rhs = g.T @ t
    penalty = np.ones(n_exp + 1)
    penalty[-1] = 0.0

    fallback = False
    lam = ridge
    try:
        w = _solve(gram + lam * np.diag(penalty), rhs)
    except np.linalg.LinAlgError:
        fallback = True
        lam = max(ridge, 1e-8 * np.trace(gram[:-1, :-1]) / n_exp)
        w = np.linalg.solve(gram + lam * np.diag(penalty), rhs)

    if w.shape != (n_exp + 1, dataset.class_count):
        raise ModelError(f"weight table {w.shape}", "shape-error")
    return LinearModel(w, mode, std, lam, fallback, {"patterns": len(dataset)})


def normal_equation_residual(model: LinearModel, dataset: LabeledDataset) -> tuple[float, float]:
    """``(||(G'G + lambda P) W - G'T||, ||G'T||)`` for a fitted model."""
    g = model.design(dataset.features)
    t = one_hot(dataset.labels, model.class_count)
    penalty = np.ones(g.shape[1])
    penalty[-1] = 0.0
    lhs = g.T @ g @ model.weights + model.ridge * penalty[:, None] * model.weights
    rhs = g.T @ t
    return float(np.linalg.norm(lhs - rhs)), float(np.linalg.norm(rhs))


def predict(model: LinearModel, x: np.ndarray) -> int:
    return int(model.predict_many(np.asarray(x, dtype=np.float64).reshape(1, -1))[0])


def error_count(model: LinearModel, dataset: LabeledDataset) -> int:
    return int(np.count_nonzero(model.predict_many(dataset.features) != dataset.labels))


def error_rate(model: LinearModel, dataset: LabeledDataset) -> float:
    if len(dataset) == 0:
        raise ModelError("cannot score an empty dataset", "empty-dataset")
    return error_count(model, dataset) / len(dataset)
