"""Tolerance filtering and exact sequence selection over candidate pools.

The restricted selection problem is solved on a layered DAG: one layer of
surviving candidates per batch, edges between consecutive layers weighted by
the model distances, plus zero-weight virtual source and sink edges. A single
backward sweep computes exact suffix costs (the layered specialization of
nonnegative-weight shortest path); the forward walk then picks, among optimal
successors, the lexicographically smallest model id, so ties resolve
reproducibly.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .distances import DistanceMatrix
from .models import CandidatePool, Model

BRUTE_FORCE_LIMIT = 10_000_000


class InfeasibleError(RuntimeError):
    """No sequence satisfies the filter/anchor constraints."""


def filter_pool(
    pool: CandidatePool,
    alpha: float,
    loss_source: str = "validation",
    higher_is_better: bool = False,
) -> np.ndarray:
    """Indices of models within tolerance of the pool's best.

    With losses (default) a model survives iff ``loss <= (1 + alpha) * min``;
    in metric mode (``higher_is_better``) iff ``metric >= (1 - alpha) * max``.
    The best model always survives, so the result is never empty.
    """
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    values = pool.losses(loss_source)
    if higher_is_better:
        cutoff = (1.0 - alpha) * values.max()
        mask = values >= cutoff
    else:
        cutoff = (1.0 + alpha) * values.min()
        mask = values <= cutoff
    return np.nonzero(mask)[0]


@dataclass(eq=False)
class LayeredGraph:
    """Surviving nodes per batch plus the restricted inter-layer weight blocks."""

    pools: list[CandidatePool]
    layers: list[np.ndarray]          # surviving pool indices per batch
    weights: list[np.ndarray]         # (|L_b|, |L_{b+1}|) blocks, len B-1
    alpha: float
    loss_source: str
    anchor: str | None = None

    def __post_init__(self):
        for b, layer in enumerate(self.layers):
            if len(layer) == 0:
                raise InfeasibleError(f"layer for batch {self.pools[b].batch} is empty")
        for b, w in enumerate(self.weights):
            expected = (len(self.layers[b]), len(self.layers[b + 1]))
            if w.shape != expected:
                raise ValueError(f"weight block {b} has shape {w.shape}, expected {expected}")
            if np.any(w < 0) or not np.all(np.isfinite(w)):
                raise ValueError(f"weight block {b} must be finite and non-negative")

    @property
    def n_batches(self) -> int:
        return len(self.layers)

    @property
    def n_edges(self) -> int:
        middle = sum(w.size for w in self.weights)
        return middle + len(self.layers[0]) + len(self.layers[-1])

    def layer_ids(self, b: int) -> list[str]:
        return [self.pools[b].models[i].id for i in self.layers[b]]


def _check_matrices(pools: list[CandidatePool], matrices: list[DistanceMatrix]) -> None:
    if len(matrices) != len(pools) - 1:
        raise ValueError(f"expected {len(pools) - 1} distance matrices, got {len(matrices)}")
    for b, mat in enumerate(matrices):
        if mat.values.shape != (len(pools[b]), len(pools[b + 1])):
            raise ValueError(
                f"matrix {b} shape {mat.values.shape} does not match pool sizes "
                f"({len(pools[b])}, {len(pools[b + 1])})"
            )


def build_graph(
    pools: list[CandidatePool],
    matrices: list[DistanceMatrix],
    alpha: float,
    anchor: str | None = None,
    loss_source: str = "validation",
    force_anchor: bool = False,
) -> LayeredGraph:
    """Filter each pool and restrict the distance matrices to the survivors.

    An anchor id pins layer 1 to that single model; by default it must also
    pass the filter (``force_anchor`` overrides).
    """
    if not pools:
        raise ValueError("no pools given")
    _check_matrices(pools, matrices)
    layers = [filter_pool(pool, alpha, loss_source) for pool in pools]
    if anchor is not None:
        idx = pools[0].model_index(anchor)  # raises KeyError when absent
        if idx not in layers[0]:
            if not force_anchor:
                raise InfeasibleError(
                    f"anchor {anchor!r} fails the batch-{pools[0].batch} filter at "
                    f"alpha={alpha}; pass force_anchor to pin it anyway"
                )
        layers[0] = np.array([idx], dtype=np.int64)
    weights = [
        matrices[b].values[np.ix_(layers[b], layers[b + 1])] for b in range(len(pools) - 1)
    ]
    return LayeredGraph(
        pools=pools,
        layers=layers,
        weights=weights,
        alpha=alpha,
        loss_source=loss_source,
        anchor=anchor,
    )


@dataclass(eq=False)
class SequencePlan:
    """One selected model per batch plus the realized losses of the choice."""

    batches: list[int]
    model_ids: list[str]
    indices: list[int]
    models: list[Model]
    pred_losses: list[float]
    transition_costs: list[float]
    stability_loss: float
    alpha: float | None
    loss_source: str
    tie_counts: list[int] = field(default_factory=list)

    def to_report(self) -> dict:
        return {
            "alpha": self.alpha,
            "loss_source": self.loss_source,
            "chosen": [
                {"batch": b, "model_id": mid, "pred_loss": loss}
                for b, mid, loss in zip(self.batches, self.model_ids, self.pred_losses)
            ],
            "transitions": [
                {"from": self.model_ids[i], "to": self.model_ids[i + 1], "distance": d}
                for i, d in enumerate(self.transition_costs)
            ],
            "stability_loss": self.stability_loss,
            "tie_break_trace": self.tie_counts,
        }

    def save_report(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_report(), indent=2) + "\n", encoding="utf-8")


def chain_cost(weights: list[np.ndarray], indices) -> float:
    """Right-associated transition-cost sum; every solver and oracle uses this
    exact accumulation so objectives compare bit-for-bit."""
    total = 0.0
    for b in range(len(weights) - 1, -1, -1):
        total = float(weights[b][indices[b], indices[b + 1]]) + total
    return total


def _plan_from_layer_choice(
    graph: LayeredGraph, choice: list[int], tie_counts: list[int] | None = None
) -> SequencePlan:
    indices = [int(graph.layers[b][c]) for b, c in enumerate(choice)]
    models = [graph.pools[b].models[i] for b, i in enumerate(indices)]
    losses = [
        float(graph.pools[b].losses(graph.loss_source)[i]) for b, i in enumerate(indices)
    ]
    costs = [float(graph.weights[b][choice[b], choice[b + 1]]) for b in range(len(choice) - 1)]
    stability = chain_cost(graph.weights, choice)
    return SequencePlan(
        batches=[pool.batch for pool in graph.pools],
        model_ids=[m.id for m in models],
        indices=indices,
        models=models,
        pred_losses=losses,
        transition_costs=costs,
        stability_loss=stability,
        alpha=graph.alpha,
        loss_source=graph.loss_source,
        tie_counts=tie_counts or [],
    )


def solve_sequence(graph: LayeredGraph) -> SequencePlan:
    """Exact minimum-stability sequence through the layered graph.

    Suffix costs are computed in one backward sweep; the forward walk chooses
    the lexicographically smallest model-id sequence among the optima.
    """
    B = graph.n_batches
    suffix: list[np.ndarray] = [None] * B
    suffix[B - 1] = np.zeros(len(graph.layers[B - 1]))
    for b in range(B - 2, -1, -1):
        suffix[b] = (graph.weights[b] + suffix[b + 1][None, :]).min(axis=1)

    choice: list[int] = []
    tie_counts: list[int] = []
    ids0 = graph.layer_ids(0)
    best = suffix[0].min()
    candidates = [i for i in range(len(ids0)) if suffix[0][i] == best]
    tie_counts.append(len(candidates))
    choice.append(min(candidates, key=lambda i: ids0[i]))
    for b in range(B - 1):
        cur = choice[-1]
        ids_next = graph.layer_ids(b + 1)
        target = suffix[b][cur]
        options = [
            k
            for k in range(len(ids_next))
            if graph.weights[b][cur, k] + suffix[b + 1][k] == target
        ]
        tie_counts.append(len(options))
        choice.append(min(options, key=lambda k: ids_next[k]))
    return _plan_from_layer_choice(graph, choice, tie_counts)


def brute_force_sequence(
    pools: list[CandidatePool],
    matrices: list[DistanceMatrix],
    alpha: float,
    anchor: str | None = None,
    loss_source: str = "validation",
    force_anchor: bool = False,
) -> SequencePlan:
    """Exhaustive-enumeration optimum with the solver's tie rule (oracle)."""
    graph = build_graph(pools, matrices, alpha, anchor, loss_source, force_anchor)
    sizes = [len(layer) for layer in graph.layers]
    count = 1
    for s in sizes:
        count *= s
        if count > BRUTE_FORCE_LIMIT:
            raise ValueError(f"instance too large for brute force ({count} > {BRUTE_FORCE_LIMIT})")
    layer_ids = [graph.layer_ids(b) for b in range(graph.n_batches)]
    best_cost = None
    best_ids = None
    best_choice = None
    for combo in itertools.product(*[range(s) for s in sizes]):
        cost = chain_cost(graph.weights, combo)
        ids = tuple(layer_ids[b][c] for b, c in enumerate(combo))
        if best_cost is None or cost < best_cost or (cost == best_cost and ids < best_ids):
            best_cost, best_ids, best_choice = cost, ids, list(combo)
    return _plan_from_layer_choice(graph, best_choice)


def greedy_sequence(
    pools: list[CandidatePool],
    matrices: list[DistanceMatrix],
    loss_source: str = "validation",
) -> SequencePlan:
    """Per-batch best-loss models, ignoring stability; ties break on the id.

    The baseline satisfies every tolerance filter by construction, so its
    stability loss bounds the optimized sequence's from above.
    """
    _check_matrices(pools, matrices)
    indices = []
    for pool in pools:
        losses = pool.losses(loss_source)
        best = losses.min()
        tied = [i for i in range(len(pool)) if losses[i] == best]
        indices.append(min(tied, key=lambda i: pool.models[i].id))
    weights = [m.values for m in matrices]
    models = [pool.models[i] for pool, i in zip(pools, indices)]
    return SequencePlan(
        batches=[pool.batch for pool in pools],
        model_ids=[m.id for m in models],
        indices=indices,
        models=models,
        pred_losses=[float(pool.losses(loss_source)[i]) for pool, i in zip(pools, indices)],
        transition_costs=[
            float(weights[b][indices[b], indices[b + 1]]) for b in range(len(pools) - 1)
        ],
        stability_loss=chain_cost(weights, indices),
        alpha=None,
        loss_source=loss_source,
    )


def plan_passes_filter(plan: SequencePlan, pools: list[CandidatePool]) -> bool:
    """Post-hoc recheck that every chosen model is within its batch tolerance."""
    if plan.alpha is None:
        return True
    for pool, idx in zip(pools, plan.indices):
        losses = pool.losses(plan.loss_source)
        if losses[idx] > (1.0 + plan.alpha) * losses.min():
            return False
    return True
