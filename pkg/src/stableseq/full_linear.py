"""Unrestricted sequence optimization for linear regression.

Minimizes the total squared coefficient change between consecutive batches
subject to a per-batch mean-squared-error cap, over the whole space of linear
models rather than a finite pool. The problem is jointly convex with
block-separable constraints, so cyclic block-coordinate descent converges to
the global optimum: each batch update minimizes the distance to its
neighbours' coefficients subject to that batch's single quadratic constraint,
solved exactly by bisecting the constraint's Lagrange multiplier (the
trust-region secular equation). Intercepts are concentrated out: for any
coefficient vector the optimal intercept is the residual mean, so each
subproblem works on centered data.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .datagen import Dataset

BISECT_ITERS = 120
FEAS_TOL = 1e-8


class InfeasibleEpsilonError(ValueError):
    """Some epsilon is below the best attainable loss of its batch."""


@dataclass(eq=False)
class _BatchQuadratic:
    """Centered quadratic form of one batch's MSE: q(beta) = beta'H beta - 2 r'beta + c0."""

    H: np.ndarray
    r: np.ndarray
    c0: float
    x_mean: np.ndarray
    y_mean: float
    eigvals: np.ndarray
    eigvecs: np.ndarray
    best: float
    beta_ols: np.ndarray

    @staticmethod
    def from_data(data: Dataset) -> "_BatchQuadratic":
        if data.n == 0:
            raise ValueError("empty batch")
        x_mean = data.X.mean(axis=0)
        y_mean = float(data.y.mean())
        Xc = data.X - x_mean
        yc = data.y - y_mean
        n = data.n
        H = (Xc.T @ Xc) / n
        r = (Xc.T @ yc) / n
        c0 = float(yc @ yc) / n
        eigvals, eigvecs = np.linalg.eigh(H)
        beta_ols, *_ = np.linalg.lstsq(Xc, yc, rcond=None)
        q = _BatchQuadratic(H, r, c0, x_mean, y_mean, eigvals, eigvecs, 0.0, beta_ols)
        q.best = q.mse(beta_ols)
        return q

    def mse(self, beta: np.ndarray) -> float:
        return float(beta @ self.H @ beta - 2.0 * (self.r @ beta) + self.c0)

    def intercept(self, beta: np.ndarray) -> float:
        return self.y_mean - float(self.x_mean @ beta)

    def solve_constrained(self, m: np.ndarray, weight: float, eps: float) -> tuple[np.ndarray, float]:
        """argmin weight*||beta - m||^2 subject to mse(beta) <= eps.

        Returns (beta, multiplier). beta(mu) = (weight I + mu H)^-1 (weight m + mu r);
        the constraint value is decreasing in mu, so bisection brackets the
        multiplier until the feasible-side residual is within FEAS_TOL.
        """
        if self.mse(m) <= eps:
            return m.copy(), 0.0
        Q, lam = self.eigvecs, self.eigvals
        mt = Q.T @ m
        rt = Q.T @ self.r
        # null directions of H carry no signal; zero them so huge multipliers stay stable
        lam_max = max(float(lam.max()), 0.0)
        rt = np.where(lam > 1e-12 * max(lam_max, 1e-30), rt, 0.0)

        def beta_of(mu: float) -> np.ndarray:
            coef = (weight * mt + mu * rt) / (weight + mu * lam)
            return Q @ coef

        mu_hi = 1.0
        for _ in range(200):
            if self.mse(beta_of(mu_hi)) <= eps + FEAS_TOL:
                break
            mu_hi *= 4.0
        else:
            raise InfeasibleEpsilonError(
                f"epsilon {eps} unreachable (best attainable {self.best})"
            )
        mu_lo = 0.0
        beta_hi = beta_of(mu_hi)
        for _ in range(BISECT_ITERS):
            mid = 0.5 * (mu_lo + mu_hi)
            beta_mid = beta_of(mid)
            if self.mse(beta_mid) <= eps + FEAS_TOL:
                mu_hi, beta_hi = mid, beta_mid
            else:
                mu_lo = mid
            if mu_hi - mu_lo <= 1e-14 * max(1.0, mu_hi):
                break
        return beta_hi, mu_hi


@dataclass(eq=False)
class FullSolveResult:
    betas: np.ndarray                  # (B, p)
    intercepts: np.ndarray             # (B,)
    stability_loss: float
    mse: np.ndarray                    # (B,) realized per-batch MSE
    eps: np.ndarray
    n_iters: int
    converged: bool
    max_violation: float               # max over iterates of (mse_b - eps_b)
    kkt_stationarity: np.ndarray       # (B,) final stationarity residuals
    kkt_complementarity: np.ndarray    # (B,) final |mu (mse - eps)|
    objective_history: list[float]


def best_loss(data: Dataset) -> float:
    """Minimum attainable MSE of a linear model (with intercept) on the batch."""
    return _BatchQuadratic.from_data(data).best


def _stability(betas: np.ndarray) -> float:
    total = 0.0
    for b in range(betas.shape[0] - 2, -1, -1):
        diff = betas[b] - betas[b + 1]
        total = float(diff @ diff) + total
    return total


def solve_full(
    batches: list[Dataset],
    eps,
    tol: float = 1e-9,
    max_outer: int = 500,
) -> FullSolveResult:
    """Block-coordinate descent over batches until the stability objective stalls.

    ``eps`` entries may be ``inf`` (unconstrained). Starts from each batch's
    own least-squares solution, which is feasible whenever the problem is.
    """
    B = len(batches)
    if B < 1:
        raise ValueError("need at least one batch")
    eps = np.asarray(eps, dtype=np.float64)
    if eps.shape != (B,):
        raise ValueError(f"eps must have length {B}")
    quads = [_BatchQuadratic.from_data(d) for d in batches]
    for b, q in enumerate(quads):
        if eps[b] < q.best - 1e-9 * max(1.0, q.best):
            raise InfeasibleEpsilonError(
                f"eps[{b}]={eps[b]} is below the batch's best attainable MSE {q.best}"
            )
    p = batches[0].p
    betas = np.vstack([q.beta_ols for q in quads])
    mus = np.zeros(B)
    objective = _stability(betas)
    history = [objective]
    max_violation = max(0.0, max(q.mse(betas[b]) - eps[b] for b, q in enumerate(quads)))
    converged = False
    it = 0
    for it in range(1, max_outer + 1):
        for b in range(B):
            if B == 1:
                break
            if b == 0:
                m, weight = betas[1].copy(), 1.0
            elif b == B - 1:
                m, weight = betas[B - 2].copy(), 1.0
            else:
                m, weight = 0.5 * (betas[b - 1] + betas[b + 1]), 2.0
            betas[b], mus[b] = quads[b].solve_constrained(m, weight, eps[b])
            violation = quads[b].mse(betas[b]) - eps[b]
            if np.isfinite(violation):
                max_violation = max(max_violation, violation)
        new_objective = _stability(betas)
        history.append(new_objective)
        drop = objective - new_objective
        objective = new_objective
        if objective < 1e-16 or drop < tol * max(1.0, abs(objective)):
            converged = True
            break
    if not converged:
        warnings.warn(
            f"full solver did not converge in {max_outer} outer iterations; "
            "returning the best iterate",
            RuntimeWarning,
            stacklevel=2,
        )
    mse = np.array([q.mse(betas[b]) for b, q in enumerate(quads)])
    stationarity = np.zeros(B)
    complementarity = np.zeros(B)
    for b, q in enumerate(quads):
        if B == 1:
            break
        if b == 0:
            m, weight = betas[1], 1.0
        elif b == B - 1:
            m, weight = betas[B - 2], 1.0
        else:
            m, weight = 0.5 * (betas[b - 1] + betas[b + 1]), 2.0
        grad = 2.0 * weight * (betas[b] - m) + 2.0 * mus[b] * (q.H @ betas[b] - q.r)
        stationarity[b] = float(np.max(np.abs(grad)))
        complementarity[b] = abs(mus[b] * (mse[b] - eps[b])) if np.isfinite(eps[b]) else 0.0
    intercepts = np.array([q.intercept(betas[b]) for b, q in enumerate(quads)])
    return FullSolveResult(
        betas=betas,
        intercepts=intercepts,
        stability_loss=objective,
        mse=mse,
        eps=eps,
        n_iters=it,
        converged=converged,
        max_violation=max_violation,
        kkt_stationarity=stationarity,
        kkt_complementarity=complementarity,
        objective_history=history,
    )


def matched_epsilons(pools, alpha: float) -> np.ndarray:
    """Epsilon vector matching the restricted filter: (1 + alpha) times each
    pool's best recorded train loss. Using the same caps for both solvers makes
    the restricted feasible set a subset of the full one."""
    return np.array([(1.0 + alpha) * pool.losses("train").min() for pool in pools])
