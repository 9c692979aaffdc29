"""Adaptive retraining: extend a sequence when a new batch arrives.

Rather than greedily picking a new final model close to the previous one, the
whole sequence is re-solved over the extended pools, optionally pinned to a
shared initial model. With a metric (non-squared) distance and a shared
anchor, the distance between the two deployments is bounded by the sum of the
two sequences' stability losses; :func:`stability_bound_check` evaluates that
bound and refuses squared distances, which do not satisfy the triangle
inequality the bound rests on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .distances import DistanceMatrix, DistanceSpec, pairwise_distance
from .models import CandidatePool
from .selector import SequencePlan, build_graph, greedy_sequence, solve_sequence


def extend_sequence(
    pools: list[CandidatePool],
    matrices: list[DistanceMatrix],
    alpha: float,
    anchor: str | None = None,
    loss_source: str = "validation",
    force_anchor: bool = False,
) -> SequencePlan:
    """Full re-solve over all given pools with layer 1 pinned to the anchor.

    A previously deployed anchor passed this same filter when it was chosen,
    so pinning it only shrinks layer 1 and the anchored optimum is never
    better than the unanchored one. Anchors that fail the filter are refused
    unless ``force_anchor`` is set (a forced anchor is not a restriction of
    the filtered problem, so that monotonicity no longer applies). The plan's
    last model is the new deployment.
    """
    if anchor is not None:
        pools[0].model_index(anchor)  # raises KeyError when absent
    graph = build_graph(
        pools, matrices, alpha, anchor=anchor, loss_source=loss_source,
        force_anchor=force_anchor,
    )
    return solve_sequence(graph)


def intra_sequence_loss(plan: SequencePlan, spec: DistanceSpec, bounds: np.ndarray | None = None) -> float:
    """Sum of adjacent-model distances of one plan, recomputed under ``spec``."""
    total = 0.0
    for b in range(len(plan.models) - 2, -1, -1):
        total = pairwise_distance(plan.models[b], plan.models[b + 1], spec, bounds) + total
    return total


def inter_sequence_loss(
    plan_a: SequencePlan,
    plan_b: SequencePlan,
    spec: DistanceSpec,
    bounds: np.ndarray | None = None,
) -> float:
    """Distance between the final (deployed) models of the two plans."""
    return pairwise_distance(plan_a.models[-1], plan_b.models[-1], spec, bounds)


def stability_bound_check(
    plan_a: SequencePlan,
    plan_b: SequencePlan,
    spec: DistanceSpec,
    bounds: np.ndarray | None = None,
    slack: float = 1e-9,
) -> tuple[bool, float, float]:
    """Check d(final_a, final_b) <= intra(a) + intra(b) for anchored plans.

    Requires a metric distance (``spec.squared`` must be False) and both plans
    to start at the same model; the bound follows from repeated triangle
    inequalities through the shared anchor.
    """
    if spec.squared:
        raise ValueError(
            "the inter-sequence bound needs a metric distance; squared distances "
            "violate the triangle inequality (use squared=False)"
        )
    if plan_a.model_ids[0] != plan_b.model_ids[0]:
        raise ValueError(
            f"plans are anchored at different models: {plan_a.model_ids[0]!r} "
            f"vs {plan_b.model_ids[0]!r}"
        )
    lhs = inter_sequence_loss(plan_a, plan_b, spec, bounds)
    rhs = intra_sequence_loss(plan_a, spec, bounds) + intra_sequence_loss(plan_b, spec, bounds)
    return lhs <= rhs + slack, lhs, rhs


@dataclass(eq=False)
class SequenceFamily:
    """Plans of increasing length plus the losses between adjacent deployments."""

    plans: list[SequencePlan]
    anchor: str | None
    inter_losses: list[float] = field(default_factory=list)

    def __post_init__(self):
        lengths = [len(p.model_ids) for p in self.plans]
        if lengths != sorted(lengths) or len(set(lengths)) != len(lengths):
            raise ValueError("plans must have strictly increasing lengths")
        if self.anchor is not None:
            for p in self.plans:
                if p.model_ids[0] != self.anchor:
                    raise ValueError(f"plan of length {len(p.model_ids)} is not anchored at {self.anchor!r}")

    @property
    def transition_labels(self) -> list[str]:
        return [
            f"T_{len(a.model_ids)}-{len(b.model_ids)}"
            for a, b in zip(self.plans, self.plans[1:])
        ]


def build_family(
    pools: list[CandidatePool],
    matrices: list[DistanceMatrix],
    alpha: float,
    spec: DistanceSpec,
    anchor: str | None = None,
    start_length: int = 1,
    loss_source: str = "validation",
    method: str = "stable",
    bounds: np.ndarray | None = None,
    force_anchor: bool = False,
) -> SequenceFamily:
    """Re-solve over pool prefixes of growing length and record inter-sequence losses.

    ``method`` is ``"stable"`` (the optimized sequence) or ``"greedy"`` (the
    per-batch best-loss baseline). Greedy families ignore the anchor, matching
    a baseline chosen on performance alone.
    """
    B = len(pools)
    if not (1 <= start_length <= B):
        raise ValueError(f"start_length must lie in 1..{B}")
    if method not in ("stable", "greedy"):
        raise ValueError(f"method must be 'stable' or 'greedy', got {method!r}")
    plans = []
    for k in range(start_length, B + 1):
        prefix_pools = pools[:k]
        prefix_matrices = matrices[: k - 1]
        if method == "greedy":
            plans.append(greedy_sequence(prefix_pools, prefix_matrices, loss_source))
        else:
            plans.append(
                extend_sequence(
                    prefix_pools, prefix_matrices, alpha, anchor, loss_source, force_anchor
                )
            )
    inter = [
        inter_sequence_loss(a, b, spec, bounds) for a, b in zip(plans, plans[1:])
    ]
    return SequenceFamily(plans=plans, anchor=anchor if method == "stable" else None, inter_losses=inter)
