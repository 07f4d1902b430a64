"""Model fitters: polynomial basis, least squares, ridge and Lasso.

Penalized fits work on standardized features (zero mean, unit population
variance) with a centered response and minimize

    (1/(2n)) * RSS + lam * penalty

where penalty is ``0.5 * sum(beta**2)`` for ridge and ``sum(|beta|)`` for
Lasso. The intercept is never penalized. Every ``FittedModel`` stores its
intercept and coefficients on the raw feature scale, so prediction is a
plain dot product with the expanded features.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import solve_triangular

PREDICTORS = ("ram_gb", "vcpu", "day")
DEFAULT_DEGREES = (2, 3, 3)
RANK_TOL = 1e-10
LASSO_TOL = 1e-7
LASSO_MAX_ITER = 100_000


class RegressionError(ValueError):
    pass


class RankDeficientError(RegressionError):
    def __init__(self, column, message=None):
        self.column = column
        super().__init__(message or f"design matrix is rank deficient at column {column!r}")


class ConvergenceError(RuntimeError):
    def __init__(self, sweeps, last_delta, last_objective_delta):
        self.sweeps = sweeps
        self.last_delta = last_delta
        self.last_objective_delta = last_objective_delta
        super().__init__(
            f"lasso did not converge after {sweeps} sweeps "
            f"(max coefficient change {last_delta:.3g}, "
            f"last objective delta {last_objective_delta:.3g})"
        )


class ModelKind(str, enum.Enum):
    LINEAR = "LINEAR"
    POLY = "POLY"
    RIDGE = "RIDGE"
    LASSO = "LASSO"

    def __str__(self):
        return self.value

    @classmethod
    def parse(cls, value) -> "ModelKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).upper())
        except ValueError:
            raise RegressionError(f"unknown model kind {value!r}") from None

    @property
    def penalized(self) -> bool:
        return self in (ModelKind.RIDGE, ModelKind.LASSO)


@dataclass(frozen=True)
class BasisSpec:
    """Per-predictor polynomial degrees for (ram_gb, vcpu, day)."""

    degrees: tuple = DEFAULT_DEGREES

    def __post_init__(self):
        degrees = tuple(int(d) for d in self.degrees)
        if len(degrees) != 3:
            raise RegressionError(f"expected three degrees, got {self.degrees!r}")
        if any(d < 1 for d in degrees):
            raise RegressionError(f"degrees must be >= 1, got {degrees}")
        object.__setattr__(self, "degrees", degrees)

    @property
    def p(self) -> int:
        return sum(self.degrees)

    @property
    def labels(self) -> list:
        out = ["1"]
        for name, d in zip(PREDICTORS, self.degrees):
            out.extend(name if k == 1 else f"{name}^{k}" for k in range(1, d + 1))
        return out

    @classmethod
    def parse(cls, text: str) -> "BasisSpec":
        try:
            return cls(tuple(int(t) for t in text.split(",")))
        except ValueError:
            raise RegressionError(f"bad degrees {text!r}, expected d1,d2,d3") from None


LINEAR_BASIS = BasisSpec((1, 1, 1))
POLY_BASIS = BasisSpec(DEFAULT_DEGREES)


def default_basis(kind) -> BasisSpec:
    return POLY_BASIS if ModelKind.parse(kind) is ModelKind.POLY else LINEAR_BASIS


def expand_basis(x, basis: BasisSpec) -> np.ndarray:
    """``[1, x1..x1^d1, x2..x2^d2, x3..x3^d3]`` for x = (ram_gb, vcpu, day)."""
    ram, vcpu, day = (float(v) for v in x)
    if not all(math.isfinite(v) for v in (ram, vcpu, day)):
        raise RegressionError(f"non-finite predictor in {x!r}")
    if ram <= 0:
        raise RegressionError(f"ram_gb must be positive, got {ram}")
    if vcpu < 1:
        raise RegressionError(f"vcpu must be >= 1, got {vcpu}")
    if not 1 <= day <= 7:
        raise RegressionError(f"day must be in 1..7, got {day}")
    out = [1.0]
    for v, d in zip((ram, vcpu, day), basis.degrees):
        out.extend(v ** k for k in range(1, d + 1))
    return np.array(out)


def expand_many(X, basis: BasisSpec) -> np.ndarray:
    """Vectorized expand_basis over an (n, 3) array of raw predictors."""
    X = np.asarray(X, dtype=float)
    cols = [np.ones(len(X))]
    for j, d in enumerate(basis.degrees):
        cols.extend(X[:, j] ** k for k in range(1, d + 1))
    return np.column_stack(cols)


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    """Intercept-first design matrix with its response vector."""

    values: np.ndarray
    response: np.ndarray
    column_labels: tuple
    basis: Optional[BasisSpec] = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        response = np.asarray(self.response, dtype=float)
        if values.ndim != 2:
            raise RegressionError("design values must be two-dimensional")
        if len(response) != values.shape[0]:
            raise RegressionError("response length must equal the number of rows")
        if len(self.column_labels) != values.shape[1]:
            raise RegressionError("column_labels length must equal the number of columns")
        if values.shape[0] and not np.all(values[:, 0] == 1.0):
            raise RegressionError("first design column must be all ones")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "response", response)
        object.__setattr__(self, "column_labels", tuple(self.column_labels))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    @property
    def features(self) -> np.ndarray:
        return self.values[:, 1:]

    def take(self, idx) -> "DesignMatrix":
        return DesignMatrix(self.values[idx], self.response[idx], self.column_labels, self.basis)

    @classmethod
    def from_features(cls, features, response, labels=None) -> "DesignMatrix":
        """Prepend an intercept column to an (n, p) feature array."""
        F = np.asarray(features, dtype=float)
        if F.ndim == 1:
            F = F[:, None]
        if labels is None:
            labels = [f"x{j + 1}" for j in range(F.shape[1])]
        values = np.column_stack([np.ones(len(F)), F])
        return cls(values, response, ("1", *labels))


@dataclass(frozen=True, eq=False)
class FittedModel:
    kind: ModelKind
    basis: Optional[BasisSpec]
    intercept: float
    coefficients: np.ndarray
    lam: float
    means: np.ndarray
    scales: np.ndarray
    n_train: int
    sweeps: int = 0
    objective_history: tuple = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        coefs = np.asarray(self.coefficients, dtype=float)
        means = np.asarray(self.means, dtype=float)
        scales = np.asarray(self.scales, dtype=float)
        if self.basis is not None and len(coefs) != self.basis.p:
            raise RegressionError(
                f"expected {self.basis.p} coefficients for degrees {self.basis.degrees}, got {len(coefs)}"
            )
        if not (len(means) == len(scales) == len(coefs)):
            raise RegressionError("standardization length must match coefficients")
        if np.any(scales <= 0):
            raise RegressionError("standardization scales must be positive")
        if self.lam < 0:
            raise RegressionError("lambda must be nonnegative")
        object.__setattr__(self, "kind", ModelKind.parse(self.kind))
        object.__setattr__(self, "coefficients", coefs)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "scales", scales)

    @property
    def standardized_coefficients(self) -> np.ndarray:
        return self.coefficients * self.scales

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "degrees": None if self.basis is None else list(self.basis.degrees),
            "intercept": float(self.intercept),
            "coefficients": [float(c) for c in self.coefficients],
            "lambda": float(self.lam),
            "standardization": {
                "means": [float(m) for m in self.means],
                "scales": [float(s) for s in self.scales],
            },
            "n_train": int(self.n_train),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "FittedModel":
        try:
            degrees = obj["degrees"]
            std = obj["standardization"]
            return cls(
                kind=ModelKind.parse(obj["kind"]),
                basis=None if degrees is None else BasisSpec(tuple(degrees)),
                intercept=float(obj["intercept"]),
                coefficients=np.array(obj["coefficients"], dtype=float),
                lam=float(obj["lambda"]),
                means=np.array(std["means"], dtype=float),
                scales=np.array(std["scales"], dtype=float),
                n_train=int(obj["n_train"]),
            )
        except (KeyError, TypeError) as exc:
            raise RegressionError(f"malformed model JSON: {exc!r}") from exc


def save_model(model: FittedModel, path, extra: Optional[dict] = None) -> None:
    obj = model.to_dict()
    if extra:
        obj.update(extra)
    Path(path).write_text(json.dumps(obj, indent=2) + "\n")


def load_model(path) -> FittedModel:
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise RegressionError(f"{path}: invalid JSON: {exc}") from exc
    return FittedModel.from_dict(obj)


# ---------------------------------------------------------------------------
# fitters


def _as_design(X) -> DesignMatrix:
    if not isinstance(X, DesignMatrix):
        raise TypeError(f"expected DesignMatrix, got {type(X).__name__}")
    return X


def _kind_for(X: DesignMatrix, penalized=None) -> ModelKind:
    if penalized is not None:
        return penalized
    if X.basis is not None and X.basis.degrees != LINEAR_BASIS.degrees:
        return ModelKind.POLY
    return ModelKind.LINEAR


def _qr_solve(A: np.ndarray, y: np.ndarray, labels) -> np.ndarray:
    # column equilibration keeps the rank test meaningful for wide-ranging powers
    norms = np.linalg.norm(A, axis=0)
    for j, nrm in enumerate(norms):
        if nrm == 0:
            raise RankDeficientError(labels[j])
    Q, R = np.linalg.qr(A / norms, mode="reduced")
    diag = np.abs(np.diag(R))
    tol = RANK_TOL * diag.max()
    for j, r in enumerate(diag):
        if r <= tol:
            raise RankDeficientError(labels[j])
    return solve_triangular(R, Q.T @ y) / norms


def fit_ols(X: DesignMatrix) -> FittedModel:
    """Least squares by Householder QR on the raw design."""
    X = _as_design(X)
    n, cols = X.values.shape
    if n < cols:
        raise RegressionError(f"need at least {cols} rows for {cols} columns, got {n}")
    beta = _qr_solve(X.values, X.response, X.column_labels)
    p = cols - 1
    return FittedModel(
        kind=_kind_for(X),
        basis=X.basis,
        intercept=float(beta[0]),
        coefficients=beta[1:],
        lam=0.0,
        means=np.zeros(p),
        scales=np.ones(p),
        n_train=n,
    )


def _standardize(X: DesignMatrix):
    F = X.features
    means = F.mean(axis=0)
    scales = F.std(axis=0)
    # a constant column carries no information once centered
    scales = np.where(scales > 0, scales, 1.0)
    Z = (F - means) / scales
    y_mean = float(X.response.mean())
    return Z, X.response - y_mean, means, scales, y_mean


def _destandardize(kind, X, beta_std, lam, means, scales, y_mean, **extra) -> FittedModel:
    coefs = beta_std / scales
    intercept = y_mean - float(np.dot(coefs, means))
    return FittedModel(
        kind=kind,
        basis=X.basis,
        intercept=intercept,
        coefficients=coefs,
        lam=float(lam),
        means=means,
        scales=scales,
        n_train=X.n,
        **extra,
    )


def _check_penalized(X: DesignMatrix, lam):
    if X.n < 2:
        raise RegressionError(f"need at least 2 rows, got {X.n}")
    if not (lam >= 0 and math.isfinite(lam)):
        raise RegressionError(f"lambda must be a finite nonnegative number, got {lam}")


def fit_ridge(X: DesignMatrix, lam: float) -> FittedModel:
    X = _as_design(X)
    _check_penalized(X, lam)
    Z, yc, means, scales, y_mean = _standardize(X)
    n, p = Z.shape
    # (Z'Z/n + lam I) b = Z'y/n, solved as an augmented least-squares problem
    A = np.vstack([Z / math.sqrt(n), math.sqrt(lam) * np.eye(p)])
    b = np.concatenate([yc / math.sqrt(n), np.zeros(p)])
    beta, *_ = np.linalg.lstsq(A, b, rcond=None)
    return _destandardize(ModelKind.RIDGE, X, beta, lam, means, scales, y_mean)


def soft_threshold(z: float, gamma: float) -> float:
    if gamma < 0:
        raise ValueError(f"gamma must be nonnegative, got {gamma}")
    if z > gamma:
        return z - gamma
    if z < -gamma:
        return z + gamma
    return 0.0


def lasso_lambda_max(X: DesignMatrix) -> float:
    """Smallest lambda at which every standardized Lasso coefficient is zero."""
    Z, yc, *_ = _standardize(_as_design(X))
    return float(np.max(np.abs(Z.T @ yc)) / len(yc))


def _lasso_cd(Z, yc, lam, tol, max_iter):
    """Cyclic coordinate descent with covariance updates.

    Coordinate updates use G = Z'Z/n and c = Z'y/n; the per-sweep objective is
    evaluated from the residual vector. Returns (beta, sweeps, objective history).
    """
    n, p = Z.shape
    G = Z.T @ Z / n
    c = Z.T @ yc / n
    Gl = G.tolist()
    diag = [Gl[j][j] for j in range(p)]
    beta = [0.0] * p
    # grad[j] = c_j - sum_k G_jk beta_k, kept up to date incrementally
    grad = c.tolist()

    def objective():
        b = np.array(beta)
        r = yc - Z @ b
        return float(r @ r) / (2 * n) + lam * float(np.sum(np.abs(b)))

    history = [objective()]
    max_delta = 0.0
    for sweep in range(1, max_iter + 1):
        max_delta = 0.0
        for j in range(p):
            dj = diag[j]
            if dj <= 0:
                continue
            old = beta[j]
            new = soft_threshold(grad[j] + dj * old, lam) / dj
            delta = new - old
            if delta != 0.0:
                beta[j] = new
                row = Gl[j]
                for k in range(p):
                    grad[k] -= row[k] * delta
                if abs(delta) > max_delta:
                    max_delta = abs(delta)
        history.append(objective())
        if max_delta < tol:
            return np.array(beta), sweep, tuple(history)
    raise ConvergenceError(max_iter, max_delta, history[-2] - history[-1])


def fit_lasso(X: DesignMatrix, lam: float, tol: float = LASSO_TOL,
              max_iter: int = LASSO_MAX_ITER) -> FittedModel:
    X = _as_design(X)
    _check_penalized(X, lam)
    Z, yc, means, scales, y_mean = _standardize(X)
    beta, sweeps, history = _lasso_cd(Z, yc, lam, tol, max_iter)
    return _destandardize(ModelKind.LASSO, X, beta, lam, means, scales, y_mean,
                          sweeps=sweeps, objective_history=history)


def penalized_objective(model: FittedModel, X: DesignMatrix) -> float:
    """(1/(2n)) RSS + lam * penalty, penalty measured on standardized coefficients."""
    r = X.response - predict_design(model, X.values)
    b = model.standardized_coefficients
    if model.kind is ModelKind.LASSO:
        pen = float(np.sum(np.abs(b)))
    else:
        pen = 0.5 * float(b @ b)
    return float(r @ r) / (2 * X.n) + model.lam * pen


def fit(X: DesignMatrix, kind, lam: float = 0.0) -> FittedModel:
    kind = ModelKind.parse(kind)
    if kind is ModelKind.RIDGE:
        return fit_ridge(X, lam)
    if kind is ModelKind.LASSO:
        return fit_lasso(X, lam)
    m = fit_ols(X)
    if m.kind is not kind:
        m = FittedModel(kind, m.basis, m.intercept, m.coefficients, 0.0, m.means, m.scales, m.n_train)
    return m


def lambda_grid(hi: float, lo: float, count: int = 100) -> list:
    """Log-uniform, strictly decreasing grid from hi down to lo inclusive."""
    if not (hi > lo > 0):
        raise ValueError(f"lambda grid needs hi > lo > 0, got hi={hi}, lo={lo}")
    if count < 2:
        raise ValueError(f"lambda grid needs count >= 2, got {count}")
    grid = np.logspace(math.log10(hi), math.log10(lo), count).tolist()
    grid[0], grid[-1] = float(hi), float(lo)
    return grid


def predict_design(model: FittedModel, values: np.ndarray) -> np.ndarray:
    """Predictions for intercept-first design rows."""
    values = np.asarray(values, dtype=float)
    return model.intercept + values[:, 1:] @ model.coefficients


def predict(model: FittedModel, x) -> float:
    if model.basis is None:
        raise RegressionError("model has no basis; use predict_design")
    phi = expand_basis(x, model.basis)
    out = float(model.intercept + phi[1:] @ model.coefficients)
    if not math.isfinite(out):
        raise RegressionError(f"non-finite prediction for {x!r}")
    return out


def predict_many(model: FittedModel, X: Sequence) -> np.ndarray:
    if model.basis is None:
        raise RegressionError("model has no basis; use predict_design")
    return predict_design(model, expand_many(X, model.basis))
