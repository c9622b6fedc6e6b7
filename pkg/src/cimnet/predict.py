"""Surrogate predictors over one-hot genomes, plus their evaluation metrics.

Ridge regression is the workhorse (closed-form, one hyper-parameter); a
linear epsilon-insensitive SVR trained by seeded subgradient descent is
available as an alternative.  Cycle counts span orders of magnitude across
architectures, so they are regressed in the log domain by default while
accuracy stays in the identity domain; MAPE is always reported linearly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np


class TargetTransform(str, Enum):
    IDENTITY = "identity"
    LOG = "log"


class IllConditionedError(RuntimeError):
    """Normal equations are singular; only possible at lambda = 0."""


@dataclass
class RidgeModel:
    weights: np.ndarray
    bias: float
    lam: float
    transform: TargetTransform = TargetTransform.IDENTITY

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        raw = X @ self.weights + self.bias
        if self.transform is TargetTransform.LOG:
            return np.exp(raw)
        return raw

    def to_json(self, schema_hash: str | None = None) -> dict:
        doc = {"kind": "ridge", "weights": self.weights.tolist(),
               "bias": self.bias, "lambda": self.lam,
               "transform": self.transform.value}
        if schema_hash is not None:
            doc["genome_schema_hash"] = schema_hash
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "RidgeModel":
        return cls(weights=np.asarray(doc["weights"], dtype=float),
                   bias=float(doc["bias"]), lam=float(doc["lambda"]),
                   transform=TargetTransform(doc["transform"]))


def _fit_domain(y: np.ndarray, transform: TargetTransform) -> np.ndarray:
    if transform is TargetTransform.LOG:
        if np.any(y <= 0):
            raise ValueError("log transform needs strictly positive targets")
        return np.log(y)
    return y


def fit_ridge(X: np.ndarray, y: np.ndarray, lam: float = 1.0,
              transform: TargetTransform = TargetTransform.IDENTITY,
              ) -> RidgeModel:
    """Closed-form ridge fit with an unpenalized bias.

    Solves min ||Xw + b - y||^2 + lam ||w||^2 via the centered normal
    equations; with the LOG transform the fit runs on log(y) and predictions
    are exponentiated.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[0] != y.shape[0] or y.shape[0] < 1:
        raise ValueError("X must be (n, d) with n == len(y) >= 1")
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    yt = _fit_domain(y, transform)
    x_mean = X.mean(axis=0)
    y_mean = yt.mean()
    Xc = X - x_mean
    yc = yt - y_mean
    A = Xc.T @ Xc + lam * np.eye(X.shape[1])
    rhs = Xc.T @ yc
    if lam == 0.0:
        if np.linalg.matrix_rank(A) < A.shape[0]:
            raise IllConditionedError(
                "singular normal equations at lambda=0; add regularization")
        w = np.linalg.solve(A, rhs)
    else:
        w = np.linalg.solve(A, rhs)
    bias = float(y_mean - x_mean @ w)
    return RidgeModel(weights=w, bias=bias, lam=lam, transform=transform)


def ridge_lambda_cv(X: np.ndarray, y: np.ndarray,
                    grid: tuple[float, ...] = (0.01, 0.1, 1.0, 10.0),
                    folds: int = 5, seed: int = 0,
                    transform: TargetTransform = TargetTransform.IDENTITY,
                    ) -> float:
    """Pick the grid lambda with the lowest k-fold mean squared error."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(y)
    if n < folds:
        raise ValueError("need at least one sample per fold")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    fold_of = np.arange(n) % folds
    best_lam = grid[0]
    best_err = math.inf
    for lam in grid:
        err = 0.0
        for f in range(folds):
            test = order[fold_of == f]
            train = order[fold_of != f]
            model = fit_ridge(X[train], y[train], lam=lam, transform=transform)
            err += float(np.mean((model.predict(X[test]) - y[test]) ** 2))
        if err < best_err:
            best_err = err
            best_lam = lam
    return best_lam


@dataclass
class LinearSVRModel:
    weights: np.ndarray
    bias: float
    c: float
    epsilon: float
    transform: TargetTransform
    x_mean: np.ndarray
    x_scale: np.ndarray
    y_mean: float
    y_scale: float

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = (np.asarray(X, dtype=float) - self.x_mean) / self.x_scale
        raw = (X @ self.weights + self.bias) * self.y_scale + self.y_mean
        if self.transform is TargetTransform.LOG:
            return np.exp(raw)
        return raw


def fit_svr_linear(X: np.ndarray, y: np.ndarray, c: float = 10.0,
                   epsilon: float = 0.01, epochs: int = 40, seed: int = 0,
                   transform: TargetTransform = TargetTransform.IDENTITY,
                   ) -> LinearSVRModel:
    """Linear epsilon-insensitive SVR via deterministic subgradient descent.

    Inputs and targets are standardized internally; the per-sample updates use
    a 1/t step schedule over seeded shuffles, so results are reproducible.
    """
    if c <= 0:
        raise ValueError("c must be > 0")
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    X = np.asarray(X, dtype=float)
    yt = _fit_domain(np.asarray(y, dtype=float), transform)
    n, d = X.shape
    x_mean = X.mean(axis=0)
    x_scale = X.std(axis=0)
    x_scale[x_scale == 0] = 1.0
    y_mean = float(yt.mean())
    y_scale = float(yt.std()) or 1.0
    Xs = (X - x_mean) / x_scale
    ys = (yt - y_mean) / y_scale

    rng = np.random.default_rng(seed)
    w = np.zeros(d)
    b = 0.0
    lam = 1.0 / (c * n)
    t = 0
    for _ in range(epochs):
        for i in rng.permutation(n):
            t += 1
            eta = 1.0 / (lam * (t + n))
            r = float(Xs[i] @ w + b - ys[i])
            w *= 1.0 - eta * lam
            if abs(r) > epsilon:
                g = math.copysign(1.0, r) / n
                w -= eta * g * Xs[i]
                b -= eta * g
    return LinearSVRModel(weights=w, bias=b, c=c, epsilon=epsilon,
                          transform=transform, x_mean=x_mean, x_scale=x_scale,
                          y_mean=y_mean, y_scale=y_scale)


def mape(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    """Mean absolute percentage error, 100/n * sum(|t - p| / |t|)."""
    y_true = np.asarray(y_true, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    if y_true.shape != y_pred.shape:
        raise ValueError("shape mismatch")
    if np.any(y_true == 0):
        raise ValueError("MAPE undefined for zero ground-truth elements")
    return float(100.0 * np.mean(np.abs(y_true - y_pred) / np.abs(y_true)))


def kendall_tau(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    """Tie-corrected Kendall tau-b by exact O(n^2) pair counting."""
    x = np.asarray(y_true, dtype=float)
    y = np.asarray(y_pred, dtype=float)
    n = len(x)
    if n < 2 or len(y) != n:
        raise ValueError("need two equal-length vectors of length >= 2")
    sx = np.sign(x[:, None] - x[None, :])
    sy = np.sign(y[:, None] - y[None, :])
    # both matrices are antisymmetric with zero diagonal, so work on totals
    concordant_minus_discordant = float(np.sum(sx * sy)) / 2.0
    n0 = n * (n - 1) // 2
    ties_x = n0 - int(np.count_nonzero(sx)) // 2
    ties_y = n0 - int(np.count_nonzero(sy)) // 2
    denom = math.sqrt(float(n0 - ties_x) * float(n0 - ties_y))
    if denom == 0:
        raise ValueError("kendall tau undefined for a constant vector")
    return concordant_minus_discordant / denom


@dataclass
class PredictorEval:
    """Averaged quality of a predictor at one training-set size."""

    mape: float
    kendall_tau: float
    n_train: int
    n_test: int

    def __post_init__(self) -> None:
        if self.mape < 0:
            raise ValueError("mape must be >= 0")


def fit_predictor(kind: str, X: np.ndarray, y: np.ndarray, lam: float = 1.0,
                  transform: TargetTransform = TargetTransform.IDENTITY,
                  seed: int = 0):
    if kind == "ridge":
        return fit_ridge(X, y, lam=lam, transform=transform)
    if kind == "svr":
        return fit_svr_linear(X, y, seed=seed, transform=transform)
    raise ValueError(f"unknown predictor kind {kind!r}")


def evaluate_predictor(X_pool: np.ndarray, y_pool: np.ndarray,
                       train_sizes: tuple[int, ...] = (100, 250, 500, 1000),
                       trials: int = 10, test_size: int = 200,
                       kind: str = "ridge",
                       transform: TargetTransform = TargetTransform.LOG,
                       lam: float = 1.0, seed: int = 0,
                       ) -> list[PredictorEval]:
    """MAPE/tau curve over training-set sizes, averaged over seeded trials.

    A fixed held-out test set is split off first; each trial resamples the
    training subset from the remainder.
    """
    X_pool = np.asarray(X_pool, dtype=float)
    y_pool = np.asarray(y_pool, dtype=float)
    n = len(y_pool)
    if test_size >= n:
        raise ValueError("test_size must leave room for training samples")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    test_idx = order[:test_size]
    rest = order[test_size:]
    curve = []
    for size in train_sizes:
        if size > len(rest):
            raise ValueError(
                f"train size {size} exceeds pool remainder {len(rest)}")
        mapes = []
        taus = []
        for trial in range(trials):
            trial_rng = np.random.default_rng(seed + 1000 * trial + size)
            train_idx = trial_rng.choice(rest, size=size, replace=False)
            model = fit_predictor(kind, X_pool[train_idx], y_pool[train_idx],
                                  lam=lam, transform=transform,
                                  seed=seed + trial)
            pred = model.predict(X_pool[test_idx])
            mapes.append(mape(y_pool[test_idx], pred))
            taus.append(kendall_tau(y_pool[test_idx], pred))
        curve.append(PredictorEval(mape=float(np.mean(mapes)),
                                   kendall_tau=float(np.mean(taus)),
                                   n_train=size, n_test=test_size))
    return curve


def model_to_json_str(model, schema_hash: str | None = None) -> str:
    if isinstance(model, RidgeModel):
        return json.dumps(model.to_json(schema_hash), indent=2)
    raise ValueError("only ridge models serialize to JSON")
