"""Candidate-model representations and their interchange format.

A candidate pool is one JSON document::

    {
      "schema_version": 1,
      "batch": <int >= 1>,
      "p": <feature count>,
      "feature_bounds": [[min, max], ...],          # length p
      "models": [
        {"id": str, "kind": "linear"|"tree"|"importance",
         "payload": {...}, "train_loss": float|null,
         "val_loss": float|null, "metadata": {...}},
        ...
      ]
    }

Payloads: linear ``{"coefficients": [...], "intercept": f, "task": str}``;
tree ``{"nodes": [...], "root": int}`` where internal nodes are
``{"f", "t", "l", "r", "gain"}`` and leaves are ``{"label", "n"}``;
importance ``{"importances": [...]}``. Numbers round-trip at full double
precision. All types are immutable after construction and safe to share
across concurrent readers.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

REGRESSION = "regression"
BINARY_CLASSIFICATION = "binary-classification"
_TASKS = (REGRESSION, BINARY_CLASSIFICATION)

SCHEMA_VERSION = 1


class SchemaError(ValueError):
    """The on-disk document does not match the interchange schema."""


class ValidationError(ValueError):
    """A structurally well-formed object violates a type invariant."""


def _require_finite(arr: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{what} contains non-finite entries")


# ---------------------------------------------------------------------------
# representations
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LinearModel:
    """Linear predictor: coefficient vector, intercept, and task flavour."""

    coefficients: np.ndarray
    intercept: float = 0.0
    task: str = REGRESSION

    def __post_init__(self):
        coefs = np.asarray(self.coefficients, dtype=np.float64)
        object.__setattr__(self, "coefficients", coefs)
        if coefs.ndim != 1:
            raise ValidationError("coefficients must be a 1-d vector")
        _require_finite(coefs, "coefficients")
        if not math.isfinite(self.intercept):
            raise ValidationError("intercept must be finite")
        if self.task not in _TASKS:
            raise ValidationError(f"unknown task {self.task!r}")

    @property
    def n_features(self) -> int:
        return self.coefficients.shape[0]


@dataclass(frozen=True)
class TreeNode:
    """One node of a binary decision tree.

    Internal nodes route ``x[feature] <= threshold`` to the left child and
    carry the impurity reduction achieved by their split; leaves carry a class
    label and their training sample count.
    """

    feature: int = -1
    threshold: float = 0.0
    left: int = -1
    right: int = -1
    gain: float = 0.0
    label: int = -1
    n_samples: int = 0

    @property
    def is_leaf(self) -> bool:
        return self.feature < 0

    @staticmethod
    def split(feature: int, threshold: float, left: int, right: int, gain: float) -> "TreeNode":
        return TreeNode(feature=feature, threshold=threshold, left=left, right=right, gain=gain)

    @staticmethod
    def leaf(label: int, n_samples: int) -> "TreeNode":
        return TreeNode(label=label, n_samples=n_samples)


@dataclass(frozen=True, eq=False)
class TreeModel:
    """Axis-aligned binary classification tree over ``n_features`` features."""

    nodes: tuple[TreeNode, ...]
    root: int
    n_features: int

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        self._validate()
        object.__setattr__(self, "depth", self._compute_depth())

    def _validate(self) -> None:
        n = len(self.nodes)
        if n == 0:
            raise ValidationError("tree has no nodes")
        if not (0 <= self.root < n):
            raise SchemaError(f"root index {self.root} out of range")
        parents: dict[int, int] = {}
        stack = [self.root]
        seen = set()
        while stack:
            idx = stack.pop()
            if idx in seen:
                raise ValidationError(f"node {idx} reachable twice (cycle or shared child)")
            seen.add(idx)
            node = self.nodes[idx]
            if node.is_leaf:
                if node.label < 0:
                    raise ValidationError(f"leaf {idx} has negative label")
                continue
            if not math.isfinite(node.threshold):
                raise ValidationError(f"node {idx} has non-finite threshold")
            if not (0 <= node.feature < self.n_features):
                raise ValidationError(
                    f"node {idx} splits on feature {node.feature} outside [0, {self.n_features})"
                )
            if node.gain < 0 or not math.isfinite(node.gain):
                raise ValidationError(f"node {idx} has invalid impurity reduction {node.gain}")
            for child in (node.left, node.right):
                if not (0 <= child < n):
                    raise SchemaError(f"node {idx} references missing child {child}")
                if child in parents:
                    raise ValidationError(f"node {child} has two parents")
                parents[child] = idx
                stack.append(child)
        if len(seen) != n:
            raise ValidationError("tree contains nodes unreachable from the root")

    def _compute_depth(self) -> int:
        depth = 0
        stack = [(self.root, 0)]
        while stack:
            idx, d = stack.pop()
            node = self.nodes[idx]
            if node.is_leaf:
                depth = max(depth, d)
            else:
                stack.append((node.left, d + 1))
                stack.append((node.right, d + 1))
        return depth

    @property
    def leaf_indices(self) -> list[int]:
        out = []
        stack = [self.root]
        while stack:
            idx = stack.pop()
            node = self.nodes[idx]
            if node.is_leaf:
                out.append(idx)
            else:
                stack.append(node.right)
                stack.append(node.left)
        return out

    def predict_labels(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        out = np.empty(X.shape[0], dtype=np.int64)
        for i in range(X.shape[0]):
            idx = self.root
            node = self.nodes[idx]
            while not node.is_leaf:
                idx = node.left if X[i, node.feature] <= node.threshold else node.right
                node = self.nodes[idx]
            out[i] = node.label
        return out


@dataclass(frozen=True, eq=False)
class ImportanceModel:
    """Per-feature importance vector standing in for a black-box model."""

    importances: np.ndarray

    def __post_init__(self):
        imp = np.asarray(self.importances, dtype=np.float64)
        object.__setattr__(self, "importances", imp)
        if imp.ndim != 1:
            raise ValidationError("importances must be a 1-d vector")
        _require_finite(imp, "importances")
        if np.any(imp < 0):
            raise ValidationError("importances must be non-negative")

    @property
    def n_features(self) -> int:
        return self.importances.shape[0]


Representation = LinearModel | TreeModel | ImportanceModel


@dataclass(frozen=True, eq=False)
class TreePath:
    """The feature box of one root-to-leaf route, clipped to shared bounds.

    Intervals are half-open on the left, ``(lo, hi]``, matching the "go left
    iff x <= threshold" convention. Features the route never splits on carry
    the full bound interval; for a constant feature (degenerate bounds) that
    interval has zero length, which the path distance treats as dissimilarity
    zero.
    """

    lo: np.ndarray
    hi: np.ndarray
    label: int

    def __post_init__(self):
        object.__setattr__(self, "lo", np.asarray(self.lo, dtype=np.float64))
        object.__setattr__(self, "hi", np.asarray(self.hi, dtype=np.float64))
        _require_finite(self.lo, "path lower bounds")
        _require_finite(self.hi, "path upper bounds")
        if np.any(self.lo > self.hi):
            raise ValidationError("path interval with lo > hi")

    def contains(self, x: np.ndarray) -> bool:
        return bool(np.all((self.lo < x) & (x <= self.hi)))


# ---------------------------------------------------------------------------
# wrapper + pool
# ---------------------------------------------------------------------------

_KINDS = {LinearModel: "linear", TreeModel: "tree", ImportanceModel: "importance"}


@dataclass(eq=False)
class Model:
    """A candidate model: representation plus recorded losses and metadata."""

    id: str
    representation: Representation
    train_loss: float | None = None
    val_loss: float | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.id:
            raise ValidationError("model id must be non-empty")
        for name, loss in (("train_loss", self.train_loss), ("val_loss", self.val_loss)):
            if loss is None:
                continue
            if not math.isfinite(loss) or loss < 0:
                raise ValidationError(f"{name} of model {self.id!r} must be finite and >= 0")

    @property
    def kind(self) -> str:
        return _KINDS[type(self.representation)]


@dataclass(eq=False)
class CandidatePool:
    """The finite set of pre-trained candidate models for one batch."""

    batch: int
    n_features: int
    feature_bounds: np.ndarray  # (p, 2) per-feature (min, max) from training data
    models: list[Model]

    def __post_init__(self):
        self.feature_bounds = np.asarray(self.feature_bounds, dtype=np.float64)
        if self.batch < 1:
            raise ValidationError("batch index must be >= 1")
        if self.feature_bounds.shape != (self.n_features, 2):
            raise ValidationError(
                f"feature_bounds shape {self.feature_bounds.shape} != ({self.n_features}, 2)"
            )
        _require_finite(self.feature_bounds, "feature_bounds")
        if np.any(self.feature_bounds[:, 0] > self.feature_bounds[:, 1]):
            raise ValidationError("feature bound with min > max")
        if not self.models:
            raise ValidationError("pool must contain at least one model")
        ids = [m.id for m in self.models]
        if len(set(ids)) != len(ids):
            dup = sorted({i for i in ids if ids.count(i) > 1})
            raise ValidationError(f"duplicate model ids in pool: {dup}")
        for m in self.models:
            rep = m.representation
            if isinstance(rep, (LinearModel, ImportanceModel)):
                if rep.n_features != self.n_features:
                    raise ValidationError(
                        f"model {m.id!r} has {rep.n_features} features, pool declares {self.n_features}"
                    )
            elif isinstance(rep, TreeModel):
                if rep.n_features != self.n_features:
                    raise ValidationError(
                        f"tree model {m.id!r} declares {rep.n_features} features, pool {self.n_features}"
                    )
            else:  # pragma: no cover - union is closed
                raise ValidationError(f"model {m.id!r} has unsupported representation")

    def __len__(self) -> int:
        return len(self.models)

    def model_index(self, model_id: str) -> int:
        for i, m in enumerate(self.models):
            if m.id == model_id:
                return i
        raise KeyError(f"model id {model_id!r} not in pool for batch {self.batch}")

    def losses(self, source: str = "validation") -> np.ndarray:
        if source not in ("validation", "train"):
            raise ValueError(f"loss source must be 'validation' or 'train', got {source!r}")
        out = np.empty(len(self.models))
        for i, m in enumerate(self.models):
            loss = m.val_loss if source == "validation" else m.train_loss
            if loss is None:
                raise ValidationError(f"model {m.id!r} has no recorded {source} loss")
            out[i] = loss
        return out


# ---------------------------------------------------------------------------
# path extraction and tree importances
# ---------------------------------------------------------------------------

def extract_paths(tree: TreeModel, bounds: np.ndarray) -> list[TreePath]:
    """One path per leaf: split half-spaces intersected along the route, clipped to bounds."""
    bounds = np.asarray(bounds, dtype=np.float64)
    if bounds.shape != (tree.n_features, 2):
        raise ValidationError(f"bounds shape {bounds.shape} != ({tree.n_features}, 2)")
    if not np.all(np.isfinite(bounds)):
        raise ValidationError("feature bounds must be finite (infinities are not stored)")
    if np.any(bounds[:, 0] > bounds[:, 1]):
        raise ValidationError("feature bound with min > max")

    paths: list[TreePath] = []

    def walk(idx: int, lo: np.ndarray, hi: np.ndarray) -> None:
        node = tree.nodes[idx]
        if node.is_leaf:
            split_on = lo > bounds[:, 0]
            split_on |= hi < bounds[:, 1]
            bad = split_on & (lo >= hi)
            if np.any(bad):
                feats = np.nonzero(bad)[0].tolist()
                raise ValidationError(
                    f"empty interval after clipping on features {feats} (thresholds outside bounds?)"
                )
            paths.append(TreePath(lo.copy(), hi.copy(), node.label))
            return
        f, t = node.feature, node.threshold
        old = hi[f]
        hi[f] = min(hi[f], t)
        walk(node.left, lo, hi)
        hi[f] = old
        old = lo[f]
        lo[f] = max(lo[f], t)
        walk(node.right, lo, hi)
        lo[f] = old

    walk(tree.root, bounds[:, 0].copy(), bounds[:, 1].copy())
    return paths


def gini_importance(tree: TreeModel) -> ImportanceModel:
    """Per-feature share of the total impurity reduction across all splits.

    A single-leaf tree (no splits) yields the all-zero vector.
    """
    totals = np.zeros(tree.n_features)
    for node in tree.nodes:
        if not node.is_leaf:
            totals[node.feature] += node.gain
    grand = totals.sum()
    if grand > 0:
        totals = totals / grand
    return ImportanceModel(totals)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def _model_to_doc(m: Model) -> dict:
    rep = m.representation
    if isinstance(rep, LinearModel):
        payload = {
            "coefficients": rep.coefficients.tolist(),
            "intercept": float(rep.intercept),
            "task": rep.task,
        }
    elif isinstance(rep, TreeModel):
        nodes = []
        for node in rep.nodes:
            if node.is_leaf:
                nodes.append({"label": int(node.label), "n": int(node.n_samples)})
            else:
                nodes.append(
                    {
                        "f": int(node.feature),
                        "t": float(node.threshold),
                        "l": int(node.left),
                        "r": int(node.right),
                        "gain": float(node.gain),
                    }
                )
        payload = {"nodes": nodes, "root": int(rep.root)}
    else:
        payload = {"importances": rep.importances.tolist()}
    return {
        "id": m.id,
        "kind": m.kind,
        "payload": payload,
        "train_loss": m.train_loss,
        "val_loss": m.val_loss,
        "metadata": m.metadata,
    }


def _get(doc: dict, key: str, where: str):
    if key not in doc:
        raise SchemaError(f"{where}.{key}: missing field")
    return doc[key]


def _model_from_doc(doc: dict, where: str, p: int) -> Model:
    kind = _get(doc, "kind", where)
    payload = _get(doc, "payload", where)
    if kind == "linear":
        rep = LinearModel(
            coefficients=np.asarray(_get(payload, "coefficients", f"{where}.payload")),
            intercept=float(_get(payload, "intercept", f"{where}.payload")),
            task=_get(payload, "task", f"{where}.payload"),
        )
    elif kind == "tree":
        raw_nodes = _get(payload, "nodes", f"{where}.payload")
        nodes = []
        for i, nd in enumerate(raw_nodes):
            loc = f"{where}.payload.nodes[{i}]"
            if "f" in nd:
                nodes.append(
                    TreeNode.split(
                        feature=int(_get(nd, "f", loc)),
                        threshold=float(_get(nd, "t", loc)),
                        left=int(_get(nd, "l", loc)),
                        right=int(_get(nd, "r", loc)),
                        gain=float(_get(nd, "gain", loc)),
                    )
                )
            else:
                nodes.append(TreeNode.leaf(int(_get(nd, "label", loc)), int(_get(nd, "n", loc))))
        root = int(_get(payload, "root", f"{where}.payload"))
        if not (0 <= root < len(nodes)):
            raise SchemaError(f"{where}.payload.root: index {root} out of range")
        for i, nd in enumerate(nodes):
            if not nd.is_leaf and not (0 <= nd.left < len(nodes) and 0 <= nd.right < len(nodes)):
                raise SchemaError(f"{where}.payload.nodes[{i}]: child index out of range")
        rep = TreeModel(nodes=tuple(nodes), root=root, n_features=p)
    elif kind == "importance":
        rep = ImportanceModel(np.asarray(_get(payload, "importances", f"{where}.payload")))
    else:
        raise SchemaError(f"{where}.kind: unknown kind {kind!r}")
    metadata = doc.get("metadata", {})
    if not isinstance(metadata, dict):
        raise SchemaError(f"{where}.metadata: must be an object")
    return Model(
        id=_get(doc, "id", where),
        representation=rep,
        train_loss=doc.get("train_loss"),
        val_loss=doc.get("val_loss"),
        metadata=metadata,
    )


def pool_to_doc(pool: CandidatePool) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "batch": pool.batch,
        "p": pool.n_features,
        "feature_bounds": [[float(lo), float(hi)] for lo, hi in pool.feature_bounds],
        "models": [_model_to_doc(m) for m in pool.models],
    }


def pool_from_doc(doc: dict) -> CandidatePool:
    version = _get(doc, "schema_version", "pool")
    if version != SCHEMA_VERSION:
        raise SchemaError(f"pool.schema_version: expected {SCHEMA_VERSION}, got {version}")
    p = int(_get(doc, "p", "pool"))
    raw_models = _get(doc, "models", "pool")
    if not isinstance(raw_models, list):
        raise SchemaError("pool.models: must be a list")
    models = [_model_from_doc(m, f"pool.models[{i}]", p) for i, m in enumerate(raw_models)]
    return CandidatePool(
        batch=int(_get(doc, "batch", "pool")),
        n_features=p,
        feature_bounds=np.asarray(_get(doc, "feature_bounds", "pool"), dtype=np.float64),
        models=models,
    )


def save_pool(pool: CandidatePool, path: str | Path) -> None:
    """Write a validated pool; round-trips bit-for-bit through :func:`load_pool`."""
    revalidated = [
        Model(id=m.id, representation=m.representation, train_loss=m.train_loss,
              val_loss=m.val_loss, metadata=m.metadata)
        for m in pool.models
    ]
    CandidatePool(pool.batch, pool.n_features, pool.feature_bounds, revalidated)
    text = json.dumps(pool_to_doc(pool), indent=2)
    Path(path).write_text(text + "\n", encoding="utf-8")


def load_pool(path: str | Path) -> CandidatePool:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise SchemaError(f"{path}: top-level document must be an object")
    return pool_from_doc(doc)


def models_equal(a: Model, b: Model) -> bool:
    if a.id != b.id or a.kind != b.kind or a.metadata != b.metadata:
        return False
    if a.train_loss != b.train_loss or a.val_loss != b.val_loss:
        return False
    ra, rb = a.representation, b.representation
    if isinstance(ra, LinearModel):
        return (
            np.array_equal(ra.coefficients, rb.coefficients)
            and ra.intercept == rb.intercept
            and ra.task == rb.task
        )
    if isinstance(ra, TreeModel):
        return ra.nodes == rb.nodes and ra.root == rb.root and ra.n_features == rb.n_features
    return np.array_equal(ra.importances, rb.importances)


def pools_equal(a: CandidatePool, b: CandidatePool) -> bool:
    """Semantic-field equality, used by the round-trip tests."""
    return (
        a.batch == b.batch
        and a.n_features == b.n_features
        and np.array_equal(a.feature_bounds, b.feature_bounds)
        and len(a.models) == len(b.models)
        and all(models_equal(x, y) for x, y in zip(a.models, b.models))
    )
