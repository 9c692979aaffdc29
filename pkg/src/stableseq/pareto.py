"""Tolerance sweeps and Pareto-optimality verification.

The sweep traces the empirical predictive-power/stability frontier by
re-solving the selection problem over a tolerance grid. Verification runs at
desk scale over the full finite candidate space: the weak check scans for a
sequence strictly better in every objective; the strong check solves the
stability problem at the plan's realized per-batch losses plus one
complementary loss-minimization problem per batch, all by exhaustive
enumeration. Sweep points are independent; they are solved sequentially here
for determinism.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .datagen import Dataset
from .distances import DistanceMatrix
from .evaluation import LossKind, default_loss_kind, empirical_loss
from .models import CandidatePool
from .selector import (
    BRUTE_FORCE_LIMIT,
    SequencePlan,
    build_graph,
    chain_cost,
    solve_sequence,
)


@dataclass(eq=False)
class ParetoPoint:
    """One sweep point: tolerance, totals of the recorded losses, and the plan."""

    alpha: float
    plan: SequencePlan
    total_train_loss: float
    total_val_loss: float
    stability_loss: float
    plan_repeated: bool = False


def sweep(
    pools: list[CandidatePool],
    matrices: list[DistanceMatrix],
    alphas,
    loss_source: str = "validation",
) -> list[ParetoPoint]:
    """One exact solve per tolerance, returned in increasing-alpha order.

    Points whose plan repeats an earlier point's plan are flagged.
    """
    alphas = sorted(float(a) for a in alphas)
    if not alphas:
        raise ValueError("alpha grid must be non-empty")
    points: list[ParetoPoint] = []
    seen_plans: list[list[str]] = []
    for alpha in alphas:
        plan = solve_sequence(build_graph(pools, matrices, alpha, loss_source=loss_source))
        repeated = plan.model_ids in seen_plans
        seen_plans.append(plan.model_ids)
        points.append(
            ParetoPoint(
                alpha=alpha,
                plan=plan,
                total_train_loss=float(
                    sum(pool.losses("train")[i] for pool, i in zip(pools, plan.indices))
                ),
                total_val_loss=float(
                    sum(pool.losses("validation")[i] for pool, i in zip(pools, plan.indices))
                ),
                stability_loss=plan.stability_loss,
                plan_repeated=repeated,
            )
        )
    return points


def _enumeration_guard(pools: list[CandidatePool]) -> None:
    count = 1
    for pool in pools:
        count *= len(pool)
        if count > BRUTE_FORCE_LIMIT:
            raise ValueError(
                f"instance too large for exhaustive verification ({count} sequences)"
            )


def plan_from_indices(
    pools: list[CandidatePool],
    matrices: list[DistanceMatrix],
    indices,
    loss_source: str,
) -> SequencePlan:
    weights = [m.values for m in matrices]
    models = [pool.models[i] for pool, i in zip(pools, indices)]
    return SequencePlan(
        batches=[pool.batch for pool in pools],
        model_ids=[m.id for m in models],
        indices=list(indices),
        models=models,
        pred_losses=[float(pool.losses(loss_source)[i]) for pool, i in zip(pools, indices)],
        transition_costs=[
            float(weights[b][indices[b], indices[b + 1]]) for b in range(len(pools) - 1)
        ],
        stability_loss=chain_cost(weights, list(indices)),
        alpha=None,
        loss_source=loss_source,
    )


def check_wpo(
    plan: SequencePlan,
    pools: list[CandidatePool],
    matrices: list[DistanceMatrix],
    loss_source: str = "validation",
) -> tuple[bool, SequencePlan | None]:
    """Exhaustive weak-Pareto check over the full candidate space.

    Searches for a sequence with strictly smaller loss in *every* batch and
    strictly smaller stability loss; returns it as a certificate when found.
    """
    _enumeration_guard(pools)
    weights = [m.values for m in matrices]
    losses = [pool.losses(loss_source) for pool in pools]
    plan_losses = [losses[b][i] for b, i in enumerate(plan.indices)]
    plan_stability = chain_cost(weights, plan.indices)
    better = [np.nonzero(losses[b] < plan_losses[b])[0] for b in range(len(pools))]
    if any(len(idx) == 0 for idx in better):
        return True, None
    best_cert = None
    for combo in itertools.product(*better):
        if chain_cost(weights, combo) < plan_stability:
            cand = tuple(int(i) for i in combo)
            key = (chain_cost(weights, cand), tuple(pools[b].models[i].id for b, i in enumerate(cand)))
            if best_cert is None or key < best_cert[0]:
                best_cert = (key, cand)
    if best_cert is None:
        return True, None
    return False, plan_from_indices(pools, matrices, best_cert[1], loss_source)


def _all_sequences(pools: list[CandidatePool]):
    return itertools.product(*[range(len(pool)) for pool in pools])


def verify_po(
    plan: SequencePlan,
    pools: list[CandidatePool],
    matrices: list[DistanceMatrix],
    loss_source: str = "validation",
) -> tuple[bool, SequencePlan | None]:
    """Pareto-optimality certificate via the complementary-problem criterion.

    The plan must (i) attain the minimum stability loss among sequences whose
    per-batch losses stay within the plan's realized losses, and (ii) for each
    batch, attain the minimum loss of that batch among sequences respecting the
    other batches' realized losses and the plan's stability budget. Both are
    checked by exhaustive enumeration; any violating sequence is returned as a
    certificate.
    """
    _enumeration_guard(pools)
    weights = [m.values for m in matrices]
    losses = [pool.losses(loss_source) for pool in pools]
    eps = [losses[b][i] for b, i in enumerate(plan.indices)]
    budget = chain_cost(weights, plan.indices)
    B = len(pools)

    for combo in _all_sequences(pools):
        if all(losses[b][combo[b]] <= eps[b] for b in range(B)):
            if chain_cost(weights, combo) < budget:
                return False, plan_from_indices(pools, matrices, combo, loss_source)

    for b_prime in range(B):
        for combo in _all_sequences(pools):
            ok = all(losses[b][combo[b]] <= eps[b] for b in range(B) if b != b_prime)
            if ok and chain_cost(weights, combo) <= budget:
                if losses[b_prime][combo[b_prime]] < eps[b_prime]:
                    return False, plan_from_indices(pools, matrices, combo, loss_source)
    return True, None


def direct_pareto_check(
    plan: SequencePlan,
    pools: list[CandidatePool],
    matrices: list[DistanceMatrix],
    loss_source: str = "validation",
) -> tuple[bool, SequencePlan | None]:
    """Definition-level Pareto check: scan for a weak dominator with one strict
    improvement (independent oracle for :func:`verify_po`)."""
    _enumeration_guard(pools)
    weights = [m.values for m in matrices]
    losses = [pool.losses(loss_source) for pool in pools]
    plan_losses = [losses[b][i] for b, i in enumerate(plan.indices)]
    plan_stability = chain_cost(weights, plan.indices)
    B = len(pools)
    for combo in _all_sequences(pools):
        cand_losses = [losses[b][combo[b]] for b in range(B)]
        cand_stability = chain_cost(weights, combo)
        if any(cand_losses[b] > plan_losses[b] for b in range(B)):
            continue
        if cand_stability > plan_stability:
            continue
        strict = cand_stability < plan_stability or any(
            cand_losses[b] < plan_losses[b] for b in range(B)
        )
        if strict:
            return False, plan_from_indices(pools, matrices, combo, loss_source)
    return True, None


# ---------------------------------------------------------------------------
# frontier report
# ---------------------------------------------------------------------------

FRONTIER_HEADER = "solver,alpha,pred_loss_in,pred_loss_out,stability_loss,gap"


def frontier_rows(
    points: list[ParetoPoint],
    test_data: Dataset | None = None,
    loss_kind: LossKind | None = None,
    solver: str = "restricted",
) -> list[dict]:
    """CSV-ready rows: tolerance, in/out-of-sample predictive loss, stability.

    In-sample is the sum of recorded train losses of the chosen models;
    out-of-sample re-evaluates each chosen model on the holdout set. The gap
    column (out minus in) is reported, never asserted against.
    """
    rows = []
    for point in points:
        out_loss = None
        if test_data is not None and test_data.n > 0:
            kind = loss_kind or default_loss_kind(point.plan.models[0])
            out_loss = float(
                sum(
                    empirical_loss(m, test_data.X, test_data.y, kind)
                    for m in point.plan.models
                )
            )
        rows.append(
            {
                "solver": solver,
                "alpha": point.alpha,
                "pred_loss_in": point.total_train_loss,
                "pred_loss_out": out_loss,
                "stability_loss": point.stability_loss,
                "gap": None if out_loss is None else out_loss - point.total_train_loss,
            }
        )
    return rows


def write_frontier_csv(rows: list[dict], path: str | Path) -> None:
    lines = [FRONTIER_HEADER]
    for r in rows:
        cells = [
            str(r["solver"]),
            repr(float(r["alpha"])),
            repr(float(r["pred_loss_in"])),
            "" if r["pred_loss_out"] is None else repr(float(r["pred_loss_out"])),
            repr(float(r["stability_loss"])),
            "" if r["gap"] is None else repr(float(r["gap"])),
        ]
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
