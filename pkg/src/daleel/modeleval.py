"""Model assessment: k-fold CV, lambda selection, goodness of fit, residual exports."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np
from scipy import stats

from daleel.dataset import Dataset, to_design
from daleel.regress import (
    BasisSpec,
    DesignMatrix,
    FittedModel,
    ModelKind,
    default_basis,
    fit,
    predict_design,
)

PERFECT_FIT = "PERFECT_FIT"
CONSTANT_RESPONSE = "CONSTANT_RESPONSE"


class EvaluationError(ValueError):
    pass


@dataclass(frozen=True)
class CVConfig:
    k: int = 10
    seed: int = 42

    def __post_init__(self):
        if self.k < 2:
            raise EvaluationError(f"k must be >= 2, got {self.k}")


@dataclass(frozen=True)
class ModelConfig:
    kind: ModelKind
    basis: Optional[BasisSpec] = None
    lam: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", ModelKind.parse(self.kind))
        if self.basis is None:
            object.__setattr__(self, "basis", default_basis(self.kind))


def kfold_indices(n: int, k: int, seed: int) -> list:
    """Shuffle 0..n-1 with the seed and cut into k folds whose sizes differ by at most one."""
    if k < 2:
        raise EvaluationError(f"k must be >= 2, got {k}")
    if n < k:
        raise EvaluationError(f"need n >= k, got n={n}, k={k}")
    perm = np.random.default_rng(seed).permutation(n)
    return np.array_split(perm, k)


def _design(data: Union[Dataset, DesignMatrix], basis) -> DesignMatrix:
    if isinstance(data, DesignMatrix):
        return data
    return to_design(data, basis)


def _mse(model, X: DesignMatrix) -> float:
    r = X.response - predict_design(model, X.values)
    return float(np.mean(r * r))


def fold_mses(data, config: ModelConfig, cv: CVConfig) -> list:
    X = _design(data, config.basis)
    folds = kfold_indices(X.n, cv.k, cv.seed)
    largest = max(len(f) for f in folds)
    need = X.cols if not config.kind.penalized else 2
    if X.n - largest < need:
        raise EvaluationError(
            f"folds too small: training portion of {X.n - largest} rows cannot fit "
            f"{X.cols} columns (n={X.n}, k={cv.k})"
        )
    out = []
    all_idx = np.arange(X.n)
    for fold in folds:
        mask = np.ones(X.n, dtype=bool)
        mask[fold] = False
        model = fit(X.take(all_idx[mask]), config.kind, config.lam)
        out.append(_mse(model, X.take(fold)))
    return out


def kfold_cv(data, config: ModelConfig, cv: CVConfig = CVConfig()) -> float:
    """Mean of the k per-fold test MSEs (seconds squared)."""
    mses = fold_mses(data, config, cv)
    total = 0.0
    for m in mses:  # fold-index order keeps the sum reproducible
        total += m
    return total / len(mses)


def select_lambda(data, kind, grid, cv: CVConfig = CVConfig(),
                  basis: Optional[BasisSpec] = None) -> tuple:
    """Pick the grid value with the lowest CV MSE; ties go to the larger lambda.

    Returns ``(best_lambda, [cv_mse for each grid value])`` in grid order.
    """
    kind = ModelKind.parse(kind)
    grid = [float(g) for g in grid]
    if not grid:
        raise EvaluationError("lambda grid is empty")
    X = _design(data, basis or default_basis(kind))
    scores = [kfold_cv(X, ModelConfig(kind, X.basis, lam), cv) for lam in grid]
    best = None
    for lam, s in zip(grid, scores):
        if best is None or s < best[1] or (s == best[1] and lam > best[0]):
            best = (lam, s)
    return best[0], scores


@dataclass(frozen=True)
class DiagnosticsReport:
    kind: ModelKind
    mse: float
    r_squared: Optional[float]
    rse: Optional[float]
    f_statistic: Optional[float]
    f_p_value: Optional[float]
    n: int
    p: int
    flags: tuple = field(default=())

    def to_dict(self) -> dict:
        return {
            "kind": str(self.kind),
            "mse": self.mse,
            "r_squared": self.r_squared,
            "rse": self.rse,
            "f_statistic": self.f_statistic,
            "f_p_value": self.f_p_value,
            "n": self.n,
            "p": self.p,
        }


def pred_vs_actual(model: FittedModel, d) -> list:
    """(actual, predicted) pairs in dataset order."""
    X = _design(d, model.basis)
    if X.n == 0:
        raise EvaluationError("empty dataset")
    pred = predict_design(model, X.values)
    return list(zip(X.response.tolist(), pred.tolist()))


def diagnostics(model: FittedModel, d) -> DiagnosticsReport:
    pairs = pred_vs_actual(model, d)
    actual = np.array([a for a, _ in pairs])
    pred = np.array([p for _, p in pairs])
    resid = actual - pred
    n = len(actual)
    p = len(model.coefficients)
    mse = float(np.mean(resid * resid))
    rss = float(resid @ resid)

    if model.kind.penalized:
        return DiagnosticsReport(model.kind, mse, None, None, None, None, n, p)

    flags = []
    dof = n - p - 1
    rse = math.sqrt(rss / dof) if dof > 0 else None
    centered = actual - actual.mean()
    tss = float(centered @ centered)
    perfect = rss <= (1e-12 ** 2) * float(actual @ actual)
    if perfect:
        flags.append(PERFECT_FIT)
    if tss == 0.0:
        flags.append(CONSTANT_RESPONSE)
        r2 = None
    elif perfect:
        r2 = 1.0
    else:
        r2 = 1.0 - rss / tss

    f_stat = f_p = None
    if dof > 0 and tss > 0 and not perfect and p > 0:
        f_stat = ((tss - rss) / p) / (rss / dof)
        f_p = float(stats.f.sf(f_stat, p, dof))
    if perfect and rse is not None:
        rse = 0.0
    return DiagnosticsReport(model.kind, mse, r2, rse, f_stat, f_p, n, p, tuple(flags))


def qq_data(residuals) -> list:
    """(theoretical, sample) normal quantile pairs for standardized residuals."""
    r = np.asarray(residuals, dtype=float)
    n = len(r)
    if n < 3:
        raise EvaluationError(f"need at least 3 residuals, got {n}")
    sd = r.std(ddof=1)
    if not sd > 0:
        raise EvaluationError("residuals have zero variance")
    sample = np.sort((r - r.mean()) / sd)
    theoretical = stats.norm.ppf((np.arange(1, n + 1) - 0.5) / n)
    return list(zip(theoretical.tolist(), sample.tolist()))


def residuals(model: FittedModel, d) -> np.ndarray:
    return np.array([a - p for a, p in pred_vs_actual(model, d)])


def write_pairs(pairs, path, header) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for a, b in pairs:
            w.writerow([repr(float(a)), repr(float(b))])


def write_qq(pairs, path) -> None:
    write_pairs(pairs, path, ("theoretical", "sample"))


def write_pred_vs_actual(pairs, path) -> None:
    write_pairs(pairs, path, ("actual", "predicted"))


def write_report(report: DiagnosticsReport, path, extra: Optional[dict] = None) -> None:
    obj = report.to_dict()
    if extra:
        obj.update(extra)
    Path(path).write_text(json.dumps(obj, indent=2) + "\n")
