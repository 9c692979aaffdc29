"""Loss and metric computation backing tolerance constraints and reports."""

from __future__ import annotations

from enum import Enum

import numpy as np

from .models import BINARY_CLASSIFICATION, REGRESSION, ImportanceModel, LinearModel, Model, TreeModel

_PROB_CLIP = 1e-12


class LossKind(str, Enum):
    MSE = "mse"
    LOG_LOSS = "log_loss"
    MISCLASSIFICATION = "misclassification"
    AUC = "auc"  # reported metric, not a mean per-row loss


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # exp(-logaddexp(0, -z)) is stable for large |z|
    return np.exp(-np.logaddexp(0.0, -z))


def predict_scores(model: Model, X: np.ndarray) -> np.ndarray:
    """Raw scores: regression values, classification probabilities, or leaf labels."""
    X = np.asarray(X, dtype=np.float64)
    rep = model.representation
    if isinstance(rep, LinearModel):
        z = X @ rep.coefficients + rep.intercept
        return z if rep.task == REGRESSION else _sigmoid(z)
    if isinstance(rep, TreeModel):
        return rep.predict_labels(X).astype(np.float64)
    raise ValueError(f"model {model.id!r} is not predictive (importance-only representation)")


def empirical_loss(model: Model, X: np.ndarray, y: np.ndarray, kind: LossKind) -> float:
    """Mean per-row loss of ``model`` on ``(X, y)``.

    Tree predictions are hard labels, so their log-loss uses clipped 0/1
    probabilities; tree pools record misclassification by default.
    """
    kind = LossKind(kind)
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.shape[0] == 0:
        raise ValueError("empty data")
    if kind is LossKind.AUC:
        raise ValueError("AUC is a reported metric, not a loss; use auc()")
    rep = model.representation
    if isinstance(rep, ImportanceModel):
        raise ValueError(f"model {model.id!r} is not predictive (importance-only representation)")

    if kind is LossKind.MSE:
        if isinstance(rep, LinearModel) and rep.task != REGRESSION:
            raise ValueError("MSE requires a regression model")
        if isinstance(rep, TreeModel):
            raise ValueError("MSE requires a regression model, trees are classifiers")
        pred = predict_scores(model, X)
        r = pred - y
        return float(np.mean(r * r))

    if isinstance(rep, LinearModel) and rep.task != BINARY_CLASSIFICATION:
        raise ValueError(f"{kind.value} requires a classification model")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError(f"{kind.value} requires binary 0/1 labels")

    if kind is LossKind.LOG_LOSS:
        if isinstance(rep, LinearModel):
            z = X @ rep.coefficients + rep.intercept
            # -[y log q + (1-y) log(1-q)] = logaddexp(0, z) - y z, stably
            return float(np.mean(np.logaddexp(0.0, z) - y * z))
        q = np.clip(predict_scores(model, X), _PROB_CLIP, 1.0 - _PROB_CLIP)
        return float(np.mean(-(y * np.log(q) + (1.0 - y) * np.log(1.0 - q))))

    # misclassification
    pred = (predict_scores(model, X) >= 0.5).astype(np.float64)
    return float(np.mean(pred != y))


def _midranks(scores: np.ndarray) -> np.ndarray:
    order = np.argsort(scores, kind="mergesort")
    s = scores[order]
    ranks = np.empty(len(s), dtype=np.float64)
    i = 0
    while i < len(s):
        j = i
        while j + 1 < len(s) and s[j + 1] == s[i]:
            j += 1
        ranks[i : j + 1] = 0.5 * (i + j) + 1.0  # 1-based midrank
        i = j + 1
    out = np.empty_like(ranks)
    out[order] = ranks
    return out


def auc_from_scores(scores: np.ndarray, y: np.ndarray) -> float:
    """Rank-based AUC with midrank tie handling."""
    scores = np.asarray(scores, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    pos = y == 1
    n_pos = int(pos.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC requires both classes present")
    ranks = _midranks(scores)
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def auc(model: Model, X: np.ndarray, y: np.ndarray) -> float:
    y = np.asarray(y, dtype=np.float64)
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("AUC requires binary 0/1 labels")
    return auc_from_scores(predict_scores(model, X), y)


def default_loss_kind(model: Model) -> LossKind:
    """The loss a model of this representation records: MSE, log-loss, or misclassification."""
    rep = model.representation
    if isinstance(rep, LinearModel):
        return LossKind.MSE if rep.task == REGRESSION else LossKind.LOG_LOSS
    if isinstance(rep, TreeModel):
        return LossKind.MISCLASSIFICATION
    raise ValueError("importance-only models have no loss kind")
