"""Shared fixtures and independent reference implementations.

The reference solvers here are deliberately built on different machinery
than the package (cvxpy interior point for the block program, SLSQP for
the allocation problem) so agreement is meaningful.
"""

import math

import numpy as np
import pytest


def reference_bpdn(A, y, Q, epsilon):
    """Solve the block program with cvxpy; returns (x, objective)."""
    cvxpy = pytest.importorskip("cvxpy")
    M = A.shape[1]
    R = M // Q
    x = cvxpy.Variable(M)
    blocks = cvxpy.reshape(x, (Q, R), order="F")  # column r = block r
    objective = cvxpy.Minimize(cvxpy.sum(cvxpy.norm(blocks, 2, axis=0)))
    constraints = [cvxpy.norm(y - A @ x, 2) <= epsilon]
    problem = cvxpy.Problem(objective, constraints)
    problem.solve()
    if x.value is None:
        raise RuntimeError(f"reference solve failed: {problem.status}")
    return np.asarray(x.value), float(problem.value)


def reference_allocation(weights, log_dets, b_total, N):
    """Minimize the expected distortion over bit splits with SLSQP.

    Works in codebook-share coordinates s_i = 2^(b_i - b_total), where the
    budget becomes the simplex sum(s) = 1 and stays well conditioned no
    matter how lopsided the optimal split is (raw bit space hands SLSQP a
    nearly singular constraint Jacobian on skewed mixtures).  Returns
    (bits, delta2).
    """
    from scipy.optimize import minimize

    from blockcs.gmvq import shape_constant

    w = np.asarray(weights, dtype=float)
    ld = np.asarray(log_dets, dtype=float)
    v2 = shape_constant(2, N)
    p = 2.0 / N

    coeff = w * np.exp(ld / N)  # |ld| <= ~20 so this never over/underflows

    def objective(s):
        return float(np.sum(coeff * s**-p))

    def gradient(s):
        return -p * coeff * s ** (-p - 1.0)

    L = len(w)
    res = minimize(
        objective,
        np.full(L, 1.0 / L),
        jac=gradient,
        method="SLSQP",
        bounds=[(1e-12, 1.0)] * L,
        constraints=[{"type": "eq", "fun": lambda s: s.sum() - 1.0, "jac": lambda s: np.ones(L)}],
        options={"maxiter": 1000, "ftol": 1e-16},
    )
    if not res.success:
        raise RuntimeError(f"reference allocation failed: {res.message}")
    bits = b_total + np.log2(res.x)
    scale = v2 * 2.0 ** (-2.0 * b_total / N)
    return bits, float(scale * objective(res.x))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def make_block_sparse(rng, Q, R, K, rho=1.0):
    """Exactly block sparse draw (inactive blocks identically zero)."""
    M = Q * R
    x = np.zeros(M)
    support = tuple(sorted(rng.choice(R, size=K, replace=False).tolist()))
    for r in support:
        x[r * Q : (r + 1) * Q] = rho * rng.standard_normal(Q)
    return x, support
