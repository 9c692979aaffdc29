import itertools

import numpy as np
import pytest

from stableseq.distances import DistanceMatrix
from stableseq.models import (
    CandidatePool,
    ImportanceModel,
    LinearModel,
    Model,
    TreeModel,
    TreeNode,
)


def stub_pool(batch: int, losses, p: int = 2) -> CandidatePool:
    """Pool of importance-vector stubs with prescribed losses (val == train)."""
    rng = np.random.default_rng(batch * 7919)
    models = [
        Model(
            id=f"b{batch}-m{j}",
            representation=ImportanceModel(rng.uniform(0, 1, p)),
            train_loss=float(loss),
            val_loss=float(loss),
        )
        for j, loss in enumerate(losses)
    ]
    bounds = np.column_stack([np.zeros(p), np.ones(p)])
    return CandidatePool(batch=batch, n_features=p, feature_bounds=bounds, models=models)


def linear_pool(batch: int, coefs: np.ndarray, losses=None) -> CandidatePool:
    """Pool of linear regression models from a (m, p) coefficient matrix."""
    coefs = np.asarray(coefs, dtype=np.float64)
    m, p = coefs.shape
    losses = losses if losses is not None else np.linspace(0.1, 0.2, m)
    models = [
        Model(
            id=f"b{batch}-m{j}",
            representation=LinearModel(coefs[j], intercept=0.0),
            train_loss=float(losses[j]),
            val_loss=float(losses[j]),
        )
        for j in range(m)
    ]
    bounds = np.column_stack([-np.ones(p) * 10, np.ones(p) * 10])
    return CandidatePool(batch=batch, n_features=p, feature_bounds=bounds, models=models)


def random_matrices(rng, pools) -> list[DistanceMatrix]:
    out = []
    for a, b in zip(pools, pools[1:]):
        out.append(
            DistanceMatrix(
                from_batch=a.batch,
                to_batch=b.batch,
                source_ids=[m.id for m in a.models],
                target_ids=[m.id for m in b.models],
                values=rng.uniform(0.0, 1.0, (len(a), len(b))),
            )
        )
    return out


def random_instance(rng, b_range=(2, 5), size_range=(2, 6), alphas=(0.0, 0.01, 0.05, 0.1, 0.3, 1.0)):
    """Random pools with random losses plus random distance matrices."""
    B = int(rng.integers(b_range[0], b_range[1] + 1))
    sizes = [int(rng.integers(size_range[0], size_range[1] + 1)) for _ in range(B)]
    pools = [stub_pool(b + 1, rng.uniform(0.0, 1.0, s)) for b, s in enumerate(sizes)]
    matrices = random_matrices(rng, pools)
    alpha = float(rng.choice(alphas))
    return pools, matrices, alpha


def random_tree(rng, p: int, bounds: np.ndarray, max_depth: int = 2) -> TreeModel:
    """Random valid tree with thresholds strictly inside the current box."""
    nodes: list[TreeNode] = []

    def grow(lo, hi, depth) -> int:
        if depth >= max_depth or rng.random() < 0.3:
            nodes.append(TreeNode.leaf(label=int(rng.integers(0, 2)), n_samples=int(rng.integers(1, 50))))
            return len(nodes) - 1
        f = int(rng.integers(0, p))
        t = float(rng.uniform(lo[f] + 1e-6, hi[f] - 1e-6))
        pos = len(nodes)
        nodes.append(TreeNode.split(f, t, -1, -1, float(rng.uniform(0, 1))))
        hi_left = hi.copy()
        hi_left[f] = t
        left = grow(lo, hi_left, depth + 1)
        lo_right = lo.copy()
        lo_right[f] = t
        right = grow(lo_right, hi, depth + 1)
        nodes[pos] = TreeNode.split(f, t, left, right, nodes[pos].gain)
        return pos

    root = grow(bounds[:, 0].copy(), bounds[:, 1].copy(), 0)
    return TreeModel(nodes=tuple(nodes), root=root, n_features=p)


def brute_force_matching_cost(cost: np.ndarray) -> float:
    """Minimum over all surjective row-to-column assignments (test oracle)."""
    P, Q = cost.shape
    best = None
    for assign in itertools.product(range(Q), repeat=P):
        if len(set(assign)) != Q:
            continue
        total = sum(cost[i, assign[i]] for i in range(P))
        if best is None or total < best:
            best = total
    return best


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
