"""Desk-scale trainers and bootstrap candidate-pool generation.

Candidate diversity comes from bootstrap resampling plus hyperparameter
jitter: the ridge/logistic penalty is multiplied by a log-uniform draw, tree
depth and leaf-size limits get integer jitter. Every fit is deterministic in
its seed, and pools record each model's hyperparameter draws in its metadata.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .datagen import Dataset
from .evaluation import LossKind, empirical_loss
from .models import (
    BINARY_CLASSIFICATION,
    REGRESSION,
    CandidatePool,
    LinearModel,
    Model,
    TreeModel,
    TreeNode,
)

FAMILIES = ("ridge", "logistic", "cart")


def train_ridge(data: Dataset, l2: float = 0.0) -> LinearModel:
    """Exact solution of the ridge normal equations; the intercept is unpenalized."""
    if l2 < 0:
        raise ValueError("l2 penalty must be >= 0")
    n, p = data.X.shape
    if n < 1:
        raise ValueError("empty data")
    Xa = np.column_stack([data.X, np.ones(n)])
    A = Xa.T @ Xa
    A[np.arange(p), np.arange(p)] += l2
    c = Xa.T @ data.y
    if l2 == 0.0 and np.linalg.matrix_rank(A) < p + 1:
        raise ValueError("singular normal equations; pass l2 > 0")
    w = np.linalg.solve(A, c)
    return LinearModel(coefficients=w[:p], intercept=float(w[p]), task=REGRESSION)


def _logistic_objective(w: np.ndarray, Xa: np.ndarray, y: np.ndarray, l2: float):
    z = Xa @ w
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z))
    reg = 0.5 * l2 * float(np.dot(w[:-1], w[:-1]))
    prob = np.exp(-np.logaddexp(0.0, -z))
    grad = Xa.T @ (prob - y) / Xa.shape[0]
    grad[:-1] += l2 * w[:-1]
    return loss + reg, grad


def train_logistic(
    data: Dataset,
    l2: float = 1e-2,
    max_iters: int = 5000,
    step_rule: str = "backtracking",
    grad_tol: float = 1e-6,
) -> LinearModel:
    """Gradient descent on l2-regularized log-loss, run to gradient norm <= grad_tol."""
    if not np.all((data.y == 0) | (data.y == 1)):
        raise ValueError("logistic regression needs binary 0/1 labels")
    if step_rule not in ("backtracking", "fixed"):
        raise ValueError(f"unknown step rule {step_rule!r}")
    n, p = data.X.shape
    Xa = np.column_stack([data.X, np.ones(n)])
    w = np.zeros(p + 1)
    obj, grad = _logistic_objective(w, Xa, data.y, l2)
    step = 1.0
    for _ in range(max_iters):
        gnorm2 = float(np.dot(grad, grad))
        if np.sqrt(gnorm2) <= grad_tol:
            break
        if step_rule == "fixed":
            w = w - step * grad
            obj, grad = _logistic_objective(w, Xa, data.y, l2)
            continue
        step = min(step * 2.0, 1e4)
        while True:
            cand = w - step * grad
            cand_obj, cand_grad = _logistic_objective(cand, Xa, data.y, l2)
            if cand_obj <= obj - 1e-4 * step * gnorm2 or step < 1e-18:
                break
            step *= 0.5
        w, obj, grad = cand, cand_obj, cand_grad
    return LinearModel(coefficients=w[:p], intercept=float(w[p]), task=BINARY_CLASSIFICATION)


# ---------------------------------------------------------------------------
# CART
# ---------------------------------------------------------------------------

def _gini_from_counts(n_pos: float, n_total: float) -> float:
    frac = n_pos / n_total
    other = (n_total - n_pos) / n_total
    return 1.0 - frac * frac - other * other


def train_cart(
    data: Dataset,
    max_depth: int = 3,
    min_leaf: int = 1,
    feature_subsample: float = 1.0,
    seed: int = 0,
) -> TreeModel:
    """Greedy Gini-gain tree on binary labels.

    Split gain ties break on the lowest feature index, then the lowest
    threshold. Each internal node records its impurity reduction weighted by
    the fraction of training rows it sees, so importances need no re-scan of
    the data. ``feature_subsample`` < 1 considers a seeded random subset of
    features at every node.
    """
    if data.n == 0:
        raise ValueError("empty data")
    if not np.all((data.y == 0) | (data.y == 1)):
        raise ValueError("tree training needs binary 0/1 labels")
    if max_depth < 0 or min_leaf < 1:
        raise ValueError("max_depth must be >= 0 and min_leaf >= 1")
    if not (0.0 < feature_subsample <= 1.0):
        raise ValueError("feature_subsample must lie in (0, 1]")
    X = data.X
    y = data.y.astype(np.int64)
    n, p = X.shape
    rng = np.random.default_rng(np.random.PCG64(seed))
    n_sub = max(1, int(round(feature_subsample * p)))
    nodes: list[TreeNode] = []

    def leaf_for(idx: np.ndarray) -> int:
        pos = int(y[idx].sum())
        neg = len(idx) - pos
        label = 1 if pos > neg else 0  # ties go to the lowest class id
        nodes.append(TreeNode.leaf(label=label, n_samples=len(idx)))
        return len(nodes) - 1

    def grow(idx: np.ndarray, depth: int) -> int:
        pos = int(y[idx].sum())
        if depth >= max_depth or len(idx) < 2 * min_leaf or pos == 0 or pos == len(idx):
            return leaf_for(idx)
        if n_sub < p:
            features = np.sort(rng.choice(p, size=n_sub, replace=False))
        else:
            features = np.arange(p)
        best_gain = -1.0
        best_feature = -1
        best_thr = 0.0
        for f in features:
            order = np.argsort(X[idx, f], kind="stable")
            vals = X[idx, f][order]
            labs = y[idx][order]
            gain, thr, found = kernels.best_split_scan(vals, labs, min_leaf)
            if found and gain > best_gain:
                best_gain, best_feature, best_thr = gain, int(f), thr
        if best_feature < 0 or best_gain <= 1e-12:
            return leaf_for(idx)
        mask = X[idx, best_feature] <= best_thr
        left_idx = idx[mask]
        right_idx = idx[~mask]
        # impurity reduction weighted by this node's sample fraction
        weighted_gain = best_gain * (len(idx) / n)
        pos_here = len(nodes)
        nodes.append(TreeNode.split(best_feature, best_thr, -1, -1, weighted_gain))
        left = grow(left_idx, depth + 1)
        right = grow(right_idx, depth + 1)
        nodes[pos_here] = TreeNode.split(best_feature, best_thr, left, right, weighted_gain)
        return pos_here

    root = grow(np.arange(n), 0)
    return TreeModel(nodes=tuple(nodes), root=root, n_features=p)


# ---------------------------------------------------------------------------
# bootstrap pools
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FamilyConfig:
    """A model family plus its base hyperparameters and jitter ranges."""

    kind: str
    l2: float = 1e-2
    l2_jitter: tuple[float, float] = (0.1, 10.0)  # log-uniform multiplier range
    max_depth: int = 3
    depth_jitter: int = 1
    min_leaf: int = 5
    leaf_jitter: int = 3
    feature_subsample: float = 1.0
    max_iters: int = 5000

    def __post_init__(self):
        if self.kind not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}, got {self.kind!r}")

    @property
    def loss_kind(self) -> LossKind:
        return {
            "ridge": LossKind.MSE,
            "logistic": LossKind.LOG_LOSS,
            "cart": LossKind.MISCLASSIFICATION,
        }[self.kind]


def _fit_one(train: Dataset, family: FamilyConfig, params: dict):
    if family.kind == "ridge":
        return train_ridge(train, l2=params["l2"])
    if family.kind == "logistic":
        return train_logistic(train, l2=params["l2"], max_iters=family.max_iters)
    return train_cart(
        train,
        max_depth=params["max_depth"],
        min_leaf=params["min_leaf"],
        feature_subsample=family.feature_subsample,
        seed=params["tree_seed"],
    )


def bootstrap_pool(
    data: Dataset,
    validation: Dataset,
    n_candidates: int,
    family: FamilyConfig,
    seed: int,
    batch: int = 1,
    feature_bounds: np.ndarray | None = None,
) -> CandidatePool:
    """Train ``n_candidates`` models on bootstrap resamples with jittered hyperparameters.

    Train loss is recorded on the full batch data (what the tolerance
    constraint bounds), validation loss on the supplied slice.
    """
    if n_candidates < 1:
        raise ValueError("need at least one candidate")
    rng = np.random.default_rng(np.random.PCG64(seed))
    loss_kind = family.loss_kind
    models = []
    for i in range(n_candidates):
        params: dict = {}
        if family.kind in ("ridge", "logistic"):
            lo, hi = family.l2_jitter
            mult = float(np.exp(rng.uniform(np.log(lo), np.log(hi))))
            params["l2"] = family.l2 * mult
        else:
            params["max_depth"] = max(
                1, family.max_depth + int(rng.integers(-family.depth_jitter, family.depth_jitter + 1))
            )
            params["min_leaf"] = max(
                1, family.min_leaf + int(rng.integers(-family.leaf_jitter, family.leaf_jitter + 1))
            )
            params["tree_seed"] = int(rng.integers(0, 2**31 - 1))
        rows = rng.integers(0, data.n, size=data.n)
        resample = Dataset(data.X[rows], data.y[rows], data.t[rows])
        rep = _fit_one(resample, family, params)
        model = Model(id=f"b{batch}-m{i}", representation=rep, metadata=dict(params))
        model.train_loss = empirical_loss(model, data.X, data.y, loss_kind)
        model.val_loss = empirical_loss(model, validation.X, validation.y, loss_kind)
        models.append(model)
    if feature_bounds is None:
        feature_bounds = np.column_stack([data.X.min(axis=0), data.X.max(axis=0)])
    return CandidatePool(
        batch=batch,
        n_features=data.p,
        feature_bounds=feature_bounds,
        models=models,
    )
