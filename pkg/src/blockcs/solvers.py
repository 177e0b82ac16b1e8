"""Reconstruction algorithms: block BPDN and the support-informed baseline.

solve_block_bpdn minimizes the sum of block l2 norms subject to a residual
ball constraint, via a primal-dual (Chambolle-Pock style) iteration whose
inner loop lives in a compiled extension when available and in NumPy
otherwise.  The contract is checked, not the algorithm: feasibility, small
objective gap against an independent solver, and a first-order optimality
certificate (certify_kkt).  oracle_ls solves least squares restricted to a
known block support and floors what any practical recovery can achieve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import svdvals

from .errors import ConfigurationError, InfeasibleProblemError, RankDeficiencyError
from .model import SensingMatrix, SparseVector

try:
    from . import _pdhg as _core
except ImportError:  # extension not built; keep everything working
    from . import _pdhg_py as _core

#: Which inner-loop implementation this process uses ("compiled" or "numpy").
SOLVER_BACKEND = _core.BACKEND

# Relative slack allowed on the residual constraint for a converged solve.
FEASIBILITY_RTOL = 1e-6


def _matrix_of(A) -> np.ndarray:
    if isinstance(A, SensingMatrix):
        return A.entries
    return np.ascontiguousarray(A, dtype=float)


def _vector_of(x) -> np.ndarray:
    if isinstance(x, SparseVector):
        return x.values
    return np.asarray(x, dtype=float)


def group_shrink(v, tau: float) -> np.ndarray:
    """Proximal map of tau * ||.||_2: scale v by max(0, 1 - tau/||v||_2)."""
    if tau < 0:
        raise ConfigurationError("tau must be non-negative")
    v = np.asarray(v, dtype=float)
    n = float(np.linalg.norm(v))
    if n <= tau:
        return np.zeros_like(v)
    return (1.0 - tau / n) * v


@dataclass
class BpdnOptions:
    """Solver controls.

    epsilon is the residual-ball radius.  Convergence is declared when the
    primal and dual residual norms fall below tol * (1 + ||y||_2); defaults
    are tight enough that the objective matches an interior-point reference
    to well under 1e-4 relative.  operator_norm and pseudo_inverse are
    optional precomputed hints (the largest singular value of A, and its
    pseudo-inverse used by the final feasibility projection); passing them
    avoids a fresh SVD per solve when many solves share one matrix.
    """

    epsilon: float = 0.0
    max_iterations: int = 50_000
    primal_tol: float = 1e-8
    dual_tol: float = 1e-8
    step_ratio: float = 0.99
    check_every: int = 50
    operator_norm: float | None = None
    pseudo_inverse: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.epsilon < 0:
            raise ConfigurationError("epsilon must be non-negative")
        if self.primal_tol <= 0 or self.dual_tol <= 0:
            raise ConfigurationError("tolerances must be positive")
        if not 0 < self.step_ratio < 1:
            raise ConfigurationError("step_ratio must be in (0,1)")
        if self.max_iterations < 1 or self.check_every < 1:
            raise ConfigurationError("iteration controls must be positive")


@dataclass(frozen=True)
class Reconstruction:
    """Solver output: estimate, effort, and solution-quality scalars."""

    x_hat: np.ndarray
    iterations: int
    residual_norm: float
    objective: float
    converged: bool

    def to_json_dict(self, include_vector: bool = False) -> dict:
        doc = {
            "iterations": self.iterations,
            "residual_norm": self.residual_norm,
            "objective": self.objective,
            "converged": self.converged,
        }
        if include_vector:
            doc["x_hat"] = [float(v) for v in self.x_hat]
        return doc


def _block_objective(x: np.ndarray, Q: int) -> float:
    return float(np.sum(np.linalg.norm(x.reshape(-1, Q), axis=1)))


def solve_block_bpdn(A, y, block_length: int, options: BpdnOptions) -> Reconstruction:
    """Minimize sum_r ||x_r||_2 subject to ||y - A x||_2 <= epsilon.

    Returns the best iterate with converged=False when the iteration budget
    runs out (callers decide what to do with it; the sweep keeps feasible
    ones).  A final projection step pulls the iterate exactly onto the
    constraint ball when the first-order loop leaves it marginally outside,
    changing the objective by a vanishing amount.
    """
    A_arr = _matrix_of(A)
    y = np.asarray(y, dtype=float)
    N, M = A_arr.shape
    Q = block_length
    if M % Q != 0:
        raise ConfigurationError(f"M={M} not divisible by block length {Q}")
    if y.shape != (N,):
        raise ConfigurationError(f"y has shape {y.shape}, expected ({N},)")

    eps = options.epsilon
    ynorm = float(np.linalg.norm(y))

    if options.operator_norm is not None:
        L = options.operator_norm
    else:
        s = svdvals(A_arr)
        L = float(s[0])
        if s[-1] < 1e-12 * s[0] and eps < ynorm:
            # Rank-deficient A: the ball may be unreachable.
            x_ls, *_ = np.linalg.lstsq(A_arr, y, rcond=None)
            if float(np.linalg.norm(y - A_arr @ x_ls)) > eps:
                raise InfeasibleProblemError(
                    "residual ball unreachable: rank-deficient A and epsilon "
                    "below the least-squares residual"
                )
    step = options.step_ratio / L
    ptol = options.primal_tol * (1.0 + ynorm)
    dtol = options.dual_tol * (1.0 + ynorm)

    x, iterations, _, _, converged, Ax = _core.pdhg_core(
        A_arr,
        y,
        Q,
        eps,
        step,
        step,
        options.max_iterations,
        ptol,
        dtol,
        options.check_every,
    )

    residual = y - Ax
    residual_norm = float(np.linalg.norm(residual))
    if residual_norm > eps:
        # Project onto the constraint ball along the minimum-norm correction;
        # with full row rank the new residual norm is exactly epsilon.
        pinv = options.pseudo_inverse
        if pinv is None:
            pinv = np.linalg.pinv(A_arr)
        target = eps / residual_norm if residual_norm > 0 else 0.0
        x = x + pinv @ (residual * (1.0 - target))
        residual_norm = float(np.linalg.norm(y - A_arr @ x))

    feasible = residual_norm <= eps * (1.0 + FEASIBILITY_RTOL) + 1e-12 * (1.0 + ynorm)
    return Reconstruction(
        x_hat=x,
        iterations=iterations,
        residual_norm=residual_norm,
        objective=_block_objective(x, Q),
        converged=bool(converged and feasible),
    )


@dataclass(frozen=True)
class KktReport:
    """First-order optimality check for a candidate BPDN solution.

    lambda_hat scales the correlation A^T (y - A x) into the subdifferential
    of the block-norm objective: active blocks must match their unit
    directions, inactive blocks must stay within the unit ball, and the
    residual constraint must be tight whenever lambda_hat is positive.
    """

    lambda_hat: float
    active_violation: float
    inactive_excess: float
    slackness: float
    ok: bool


def certify_kkt(A, y, block_length: int, epsilon: float, x_hat, tol: float = 1e-4) -> KktReport:
    """Check the subgradient conditions at x_hat; algorithm-agnostic."""
    A_arr = _matrix_of(A)
    x = _vector_of(x_hat)
    Q = block_length
    r = y - A_arr @ x
    rnorm = float(np.linalg.norm(r))
    g = (A_arr.T @ r).reshape(-1, Q)
    xb = x.reshape(-1, Q)
    xnorms = np.linalg.norm(xb, axis=1)
    gnorms = np.linalg.norm(g, axis=1)
    # Blocks below solver noise are treated as zero.
    active = xnorms > tol * max(1.0, float(xnorms.max(initial=0.0)))

    if rnorm < epsilon * (1.0 - tol):
        # Slack constraint: multiplier 0, gradient of the objective must vanish.
        lam = 0.0
        active_violation = float(xnorms[active].max(initial=0.0))
        inactive_excess = 0.0
    elif not np.any(active):
        lam = 1.0 / float(gnorms.max(initial=np.inf))
        active_violation = 0.0
        inactive_excess = float(max(0.0, lam * gnorms.max(initial=0.0) - 1.0))
    else:
        lam = float(np.median(1.0 / gnorms[active]))
        units = xb[active] / xnorms[active][:, None]
        active_violation = float(
            np.linalg.norm(lam * g[active] - units, axis=1).max(initial=0.0)
        )
        inactive_excess = float(
            max(0.0, (lam * gnorms[~active]).max(initial=0.0) - 1.0)
        )
    slackness = abs(rnorm - epsilon) * (lam if lam > 0 else 0.0)
    ok = (
        active_violation <= tol
        and inactive_excess <= tol
        and slackness <= tol * max(1.0, epsilon)
    )
    return KktReport(lam, active_violation, inactive_excess, slackness, ok)


def _support_columns(support, Q: int) -> np.ndarray:
    sup = np.asarray(sorted(support), dtype=int)
    return (sup[:, None] * Q + np.arange(Q)[None, :]).ravel()


def oracle_ls(A, y, support, block_length: int) -> Reconstruction:
    """Least squares on the given block support, zeros elsewhere."""
    A_arr = _matrix_of(A)
    y = np.asarray(y, dtype=float)
    N, M = A_arr.shape
    Q = block_length
    if len(support) * Q > N:
        raise ConfigurationError(
            f"support spans {len(support) * Q} columns but only N={N} rows"
        )
    cols = _support_columns(support, Q)
    A_sub = A_arr[:, cols]
    s = svdvals(A_sub)
    if s[-1] < 1e-10 * s[0]:
        raise RankDeficiencyError(
            f"support columns are rank deficient (condition ~ {s[0] / max(s[-1], 1e-300):.3e})",
            condition=float(s[0] / max(s[-1], 1e-300)),
        )
    coef, *_ = np.linalg.lstsq(A_sub, y, rcond=None)
    x = np.zeros(M)
    x[cols] = coef
    residual_norm = float(np.linalg.norm(y - A_sub @ coef))
    return Reconstruction(
        x_hat=x,
        iterations=1,
        residual_norm=residual_norm,
        objective=_block_objective(x, Q),
        converged=True,
    )


def true_support(x, Q: int, K: int):
    """Indices of the K blocks with largest l2 norm; ties take the lower index."""
    v = _vector_of(x)
    norms = np.linalg.norm(v.reshape(-1, Q), axis=1)
    order = np.argsort(-norms, kind="stable")
    return tuple(sorted(int(i) for i in order[:K]))
