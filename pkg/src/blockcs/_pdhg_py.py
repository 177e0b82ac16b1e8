"""NumPy implementation of the primal-dual solver loop.

Fallback used when the compiled extension is unavailable; same interface
and stopping rule as the compiled core, two matrix-vector products per
iteration and no extras for the residual checks.
"""

from __future__ import annotations

import numpy as np

BACKEND = "numpy"


def pdhg_core(A, y, Q, epsilon, tau, sigma, max_iterations, primal_tol, dual_tol, check_every):
    """Primal-dual iteration for min sum_r ||x_r||_2 s.t. ||y - A x||_2 <= eps.

    Dual prox shrinks the whole residual vector toward the epsilon ball;
    primal prox shrinks each length-Q block.  Returns (x, iterations,
    primal_residual, dual_residual, converged, Ax).  Tolerances are absolute
    thresholds on the standard primal/dual residual norms.
    """
    N, M = A.shape
    Rb = M // Q
    x = np.zeros(M)
    w = np.zeros(N)
    Ax = np.zeros(N)
    Axbar = np.zeros(N)
    ATw = np.zeros(M)
    prim_res = np.inf
    dual_res = np.inf
    converged = False
    it = 0
    for it in range(1, max_iterations + 1):
        u = w + sigma * Axbar - sigma * y
        nu = float(np.linalg.norm(u))
        w_new = u * max(0.0, 1.0 - sigma * epsilon / nu) if nu > 0 else np.zeros(N)

        ATw_new = A.T @ w_new
        z = x - tau * ATw_new
        blocks = z.reshape(Rb, Q)
        norms = np.linalg.norm(blocks, axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = np.where(norms > tau, 1.0 - tau / norms, 0.0)
        x_new = (blocks * scale[:, None]).ravel()

        Ax_new = A @ x_new
        if it % check_every == 0 or it == max_iterations:
            p = (x - x_new) / tau - (ATw - ATw_new)
            d = (w - w_new) / sigma - (Axbar - Ax_new)
            prim_res = float(np.linalg.norm(p))
            dual_res = float(np.linalg.norm(d))
            if prim_res <= primal_tol and dual_res <= dual_tol:
                x, w, Ax, ATw = x_new, w_new, Ax_new, ATw_new
                converged = True
                break
        Axbar = 2.0 * Ax_new - Ax
        x, w, Ax, ATw = x_new, w_new, Ax_new, ATw_new
    return x, it, prim_res, dual_res, converged, Ax
