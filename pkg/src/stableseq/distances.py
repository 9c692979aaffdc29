"""Stability distances between candidate models and inter-batch distance matrices.

Supported metrics:

* ``linear``: (squared) Euclidean distance between coefficient vectors, with
  the intercept excluded by default.
* ``importance``: the same on importance vectors; tree models enter through
  their impurity-reduction importances, so black-box-style pools and trees
  share one code path.
* ``tree``: optimal matching of root-to-leaf paths. Pairwise path costs are
  the per-feature interval dissimilarity (one minus intersection length over
  hull length) averaged over features, plus a weighted label-mismatch term.
  The matching assigns every path of the path-richer tree to exactly one path
  of the other tree and covers each of the latter's paths at least once; it is
  solved exactly and integrally (see :mod:`stableseq.assignment`).

Distance matrices may be assembled by several worker lanes; every entry is an
independent pairwise computation, so results are bit-identical for any lane
count.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import accel, kernels
from .assignment import solve_matching
from .models import (
    CandidatePool,
    ImportanceModel,
    LinearModel,
    Model,
    TreeModel,
    TreePath,
    extract_paths,
    gini_importance,
)

METRIC_KINDS = ("linear", "tree", "importance")


@dataclass(frozen=True)
class DistanceSpec:
    """Which stability metric to use and how.

    ``squared`` selects squared vs. plain Euclidean distance for the vector
    metrics (squared is the default; plain satisfies the triangle inequality
    and is required by the inter-sequence stability bound). ``label_weight``
    is the tree metric's penalty for matching paths with different labels.
    """

    kind: str = "linear"
    squared: bool = True
    include_intercept: bool = False
    label_weight: float = 1.0

    def __post_init__(self):
        if self.kind not in METRIC_KINDS:
            raise ValueError(f"metric kind must be one of {METRIC_KINDS}, got {self.kind!r}")
        if not np.isfinite(self.label_weight) or self.label_weight < 0:
            raise ValueError("label_weight must be finite and non-negative")


def _linear_vector(m: LinearModel, spec: DistanceSpec) -> np.ndarray:
    if spec.include_intercept:
        return np.append(m.coefficients, m.intercept)
    return m.coefficients


def linear_distance(a: LinearModel, b: LinearModel, spec: DistanceSpec | None = None) -> float:
    spec = spec or DistanceSpec(kind="linear")
    if a.n_features != b.n_features:
        raise ValueError(f"dimension mismatch: {a.n_features} vs {b.n_features}")
    if a.task != b.task:
        raise ValueError(f"task mismatch: {a.task} vs {b.task}")
    diff = _linear_vector(a, spec) - _linear_vector(b, spec)
    sq = float(np.dot(diff, diff))
    return sq if spec.squared else float(np.sqrt(sq))


def importance_distance(
    a: ImportanceModel, b: ImportanceModel, spec: DistanceSpec | None = None
) -> float:
    spec = spec or DistanceSpec(kind="importance")
    if a.n_features != b.n_features:
        raise ValueError(f"dimension mismatch: {a.n_features} vs {b.n_features}")
    diff = a.importances - b.importances
    sq = float(np.dot(diff, diff))
    return sq if spec.squared else float(np.sqrt(sq))


def _clip_to_bounds(path: TreePath, bounds: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    lo = np.maximum(path.lo, bounds[:, 0])
    hi = np.minimum(path.hi, bounds[:, 1])
    return lo, hi


def path_distance(
    p: TreePath, q: TreePath, spec: DistanceSpec, bounds: np.ndarray
) -> float:
    """Mean per-feature interval dissimilarity plus the label-mismatch penalty."""
    bounds = np.asarray(bounds, dtype=np.float64)
    lo_p, hi_p = _clip_to_bounds(p, bounds)
    lo_q, hi_q = _clip_to_bounds(q, bounds)
    n_features = bounds.shape[0]
    acc = 0.0
    for k in range(n_features):
        union = max(hi_p[k], hi_q[k]) - min(lo_p[k], lo_q[k])
        if union <= 0.0:
            warnings.warn(
                f"zero-length union interval on feature {k} (degenerate bounds); "
                "treating as dissimilarity 0",
                RuntimeWarning,
                stacklevel=2,
            )
            continue
        inter = max(0.0, min(hi_p[k], hi_q[k]) - max(lo_p[k], lo_q[k]))
        acc += 1.0 - inter / union
    value = acc / n_features
    if p.label != q.label:
        value += spec.label_weight
    return value


def _path_arrays(
    paths: list[TreePath], bounds: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    lo = np.vstack([np.maximum(pp.lo, bounds[:, 0]) for pp in paths])
    hi = np.vstack([np.minimum(pp.hi, bounds[:, 1]) for pp in paths])
    labels = np.array([pp.label for pp in paths], dtype=np.int64)
    return lo, hi, labels


def path_cost_matrix(
    paths_a: list[TreePath], paths_b: list[TreePath], spec: DistanceSpec, bounds: np.ndarray
) -> np.ndarray:
    bounds = np.asarray(bounds, dtype=np.float64)
    lo1, hi1, lab1 = _path_arrays(paths_a, bounds)
    lo2, hi2, lab2 = _path_arrays(paths_b, bounds)
    return kernels.path_cost_matrix(lo1, hi1, lab1, lo2, hi2, lab2, spec.label_weight)


def tree_distance(
    t1: TreeModel,
    t2: TreeModel,
    spec: DistanceSpec,
    bounds: np.ndarray,
    _paths1: list[TreePath] | None = None,
    _paths2: list[TreePath] | None = None,
) -> float:
    """Optimal path-matching distance; symmetric because the path-richer tree
    always plays the assignment's row role."""
    paths1 = _paths1 if _paths1 is not None else extract_paths(t1, bounds)
    paths2 = _paths2 if _paths2 is not None else extract_paths(t2, bounds)
    if len(paths1) < len(paths2):
        paths1, paths2 = paths2, paths1
    cost = path_cost_matrix(paths1, paths2, spec, np.asarray(bounds, dtype=np.float64))
    objective, _ = solve_matching(cost)
    return objective


@dataclass(eq=False)
class DistanceMatrix:
    """Pairwise distances from every model of one pool to every model of the next."""

    from_batch: int
    to_batch: int
    source_ids: list[str]
    target_ids: list[str]
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (len(self.source_ids), len(self.target_ids)):
            raise ValueError("distance matrix shape does not match id lists")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("distance matrix contains non-finite entries")
        if np.any(self.values < 0):
            raise ValueError("distances must be non-negative")

    def to_csv(self, path: str | Path) -> None:
        lines = ["," + ",".join(self.target_ids)]
        for sid, row in zip(self.source_ids, self.values):
            lines.append(sid + "," + ",".join(repr(float(v)) for v in row))
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @staticmethod
    def from_csv(path: str | Path, from_batch: int, to_batch: int) -> "DistanceMatrix":
        lines = Path(path).read_text(encoding="utf-8").strip().splitlines()
        target_ids = lines[0].split(",")[1:]
        source_ids = []
        rows = []
        for line in lines[1:]:
            parts = line.split(",")
            source_ids.append(parts[0])
            rows.append([float(v) for v in parts[1:]])
        return DistanceMatrix(from_batch, to_batch, source_ids, target_ids, np.array(rows))


def _vector_for(model: Model, spec: DistanceSpec) -> np.ndarray:
    rep = model.representation
    if spec.kind == "linear":
        if not isinstance(rep, LinearModel):
            raise ValueError(f"model {model.id!r} is not linear (kind {model.kind})")
        return _linear_vector(rep, spec)
    if spec.kind == "importance":
        if isinstance(rep, ImportanceModel):
            return rep.importances
        if isinstance(rep, TreeModel):
            return gini_importance(rep).importances
        raise ValueError(
            f"model {model.id!r} has no importance vector (kind {model.kind})"
        )
    raise AssertionError(spec.kind)


def pairwise_distance(
    a: Model, b: Model, spec: DistanceSpec, bounds: np.ndarray | None = None
) -> float:
    """Distance between two wrapped models under ``spec``."""
    if spec.kind == "tree":
        if not isinstance(a.representation, TreeModel) or not isinstance(b.representation, TreeModel):
            raise ValueError(
                f"tree metric needs tree models, got ({a.kind}, {b.kind}) for ({a.id!r}, {b.id!r})"
            )
        if bounds is None:
            raise ValueError("tree metric requires feature bounds")
        return tree_distance(a.representation, b.representation, spec, bounds)
    if spec.kind == "linear":
        ra, rb = a.representation, b.representation
        if not isinstance(ra, LinearModel) or not isinstance(rb, LinearModel):
            raise ValueError(
                f"linear metric needs linear models, got ({a.kind}, {b.kind}) for ({a.id!r}, {b.id!r})"
            )
        return linear_distance(ra, rb, spec)
    va, vb = _vector_for(a, spec), _vector_for(b, spec)
    if va.shape != vb.shape:
        raise ValueError(f"dimension mismatch between {a.id!r} and {b.id!r}")
    diff = va - vb
    sq = float(np.dot(diff, diff))
    return sq if spec.squared else float(np.sqrt(sq))


def _vector_matrix(
    pool_a: CandidatePool, pool_b: CandidatePool, spec: DistanceSpec, lanes: int
) -> np.ndarray:
    try:
        A = np.vstack([_vector_for(m, spec) for m in pool_a.models])
        B = np.vstack([_vector_for(m, spec) for m in pool_b.models])
    except ValueError as exc:
        raise ValueError(f"incompatible representations between pools: {exc}") from exc
    if spec.kind == "linear":
        tasks_a = {m.representation.task for m in pool_a.models}
        tasks_b = {m.representation.task for m in pool_b.models}
        if len(tasks_a | tasks_b) > 1:
            raise ValueError("mixed regression/classification models across pools")
    if A.shape[1] != B.shape[1]:
        raise ValueError("pools disagree on feature count")
    if lanes == 1 or A.shape[0] == 1:
        out = kernels.pairwise_sq_dists(A, B)
    else:
        out = np.empty((A.shape[0], B.shape[0]))
        chunks = np.array_split(np.arange(A.shape[0]), lanes)

        def work(idx):
            if len(idx):
                out[idx] = kernels.pairwise_sq_dists(A[idx], B)

        with ThreadPoolExecutor(max_workers=lanes) as pool:
            list(pool.map(work, chunks))
    return out if spec.squared else np.sqrt(out)


def _tree_matrix(
    pool_a: CandidatePool, pool_b: CandidatePool, spec: DistanceSpec, lanes: int
) -> np.ndarray:
    if not np.array_equal(pool_a.feature_bounds, pool_b.feature_bounds):
        raise ValueError("tree pools must share feature bounds")
    bounds = pool_a.feature_bounds
    for pool in (pool_a, pool_b):
        for m in pool.models:
            if not isinstance(m.representation, TreeModel):
                raise ValueError(f"model {m.id!r} is not a tree (kind {m.kind})")
    paths_a = [extract_paths(m.representation, bounds) for m in pool_a.models]
    paths_b = [extract_paths(m.representation, bounds) for m in pool_b.models]
    arrays_a = [_path_arrays(pp, bounds) for pp in paths_a]
    arrays_b = [_path_arrays(pp, bounds) for pp in paths_b]

    out = np.empty((len(pool_a), len(pool_b)))

    def row(i: int) -> None:
        lo_a, hi_a, lab_a = arrays_a[i]
        for j in range(len(pool_b)):
            lo_b, hi_b, lab_b = arrays_b[j]
            if lo_a.shape[0] >= lo_b.shape[0]:
                cost = kernels.path_cost_matrix(
                    lo_a, hi_a, lab_a, lo_b, hi_b, lab_b, spec.label_weight
                )
            else:
                cost = kernels.path_cost_matrix(
                    lo_b, hi_b, lab_b, lo_a, hi_a, lab_a, spec.label_weight
                )
            out[i, j], _ = solve_matching(cost)

    if lanes == 1:
        for i in range(len(pool_a)):
            row(i)
    else:
        with ThreadPoolExecutor(max_workers=lanes) as pool:
            list(pool.map(row, range(len(pool_a))))
    return out


def distance_matrix(
    pool_a: CandidatePool,
    pool_b: CandidatePool,
    spec: DistanceSpec,
    threads: int | None = None,
) -> DistanceMatrix:
    """Entry (j, k) is the distance between model j of ``pool_a`` and model k of ``pool_b``."""
    lanes = accel.worker_lanes(threads)
    if spec.kind == "tree":
        values = _tree_matrix(pool_a, pool_b, spec, lanes)
    else:
        values = _vector_matrix(pool_a, pool_b, spec, lanes)
    return DistanceMatrix(
        from_batch=pool_a.batch,
        to_batch=pool_b.batch,
        source_ids=[m.id for m in pool_a.models],
        target_ids=[m.id for m in pool_b.models],
        values=values,
    )


def build_matrices(
    pools: list[CandidatePool], spec: DistanceSpec, threads: int | None = None
) -> list[DistanceMatrix]:
    """Distance matrices for every consecutive pool pair."""
    return [
        distance_matrix(pools[b], pools[b + 1], spec, threads=threads)
        for b in range(len(pools) - 1)
    ]
