"""Sampled block-isometry constants and the probabilistic error bounds.

The recovery guarantee needs the block restricted isometry constant of A,
which is NP-hard to certify; like the experiments we rely on, it is probed
by random block-sparse unit vectors, giving a lower estimate.  The error
bounds combine that constant with the noise moments through a one-sided
Chebyshev (Cantelli) margin.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import BoundNotApplicableError, ConfigurationError
from .model import SensingMatrix, make_rng

# The guarantee constant blows up at this isometry level.
DELTA_CRITICAL = math.sqrt(2.0) - 1.0


@dataclass(frozen=True)
class RipEstimate:
    """Sampled estimate of the k-block isometry constant (a running max)."""

    k: int
    delta: float
    trials: int
    sided: str


@dataclass(frozen=True)
class BoundResult:
    """One evaluated error bound.

    side "bpdn-upper": the reconstruction error is at most error_bound with
    probability at least `confidence`.  side "oracle-lower": the oracle error
    exceeds error_bound with probability at most `confidence` (the
    complement-side level; both directions follow from the same margin).
    epsilon_implicit is the residual radius the upper-bound argument
    implicitly feeds the solver: sqrt(a + beta + N(sigma_m2 + sigma_c2)).
    """

    error_bound: float
    srnr_bound: float
    confidence: float
    margin_a: float
    epsilon_implicit: float
    side: str


def estimate_block_rip(
    A: SensingMatrix, Q: int, R: int, k: int, trials: int, seed, sided: str = "lower"
) -> RipEstimate:
    """Probe max deviation of ||Ax||^2 from 1 over random k-block-sparse unit x.

    Support sets are uniform over the C(R,k) arrangements, block entries
    i.i.d. standard Gaussian, the whole vector normalized.  "lower" keeps
    max(0, max(1 - ||Ax||^2)); "two-sided" keeps the max absolute deviation
    of ||Ax||^2 from 1.  Both are lower estimates of the true constant.
    """
    if trials < 1:
        raise ConfigurationError("trials must be at least 1")
    if k * Q > A.M:
        raise ConfigurationError(f"k*Q = {k * Q} exceeds M = {A.M}")
    if Q * R != A.M:
        raise ConfigurationError(f"Q*R = {Q * R} does not match M = {A.M}")
    if sided not in ("lower", "two-sided"):
        raise ConfigurationError(f"unknown sided mode {sided!r}")
    rng = make_rng(seed)
    worst = 0.0
    for _ in range(trials):
        support = rng.choice(R, size=k, replace=False)
        g = rng.standard_normal(k * Q)
        g /= np.linalg.norm(g)
        cols = (support[:, None] * Q + np.arange(Q)[None, :]).ravel()
        gain = float(np.sum((A.entries[:, cols] @ g) ** 2))
        dev = 1.0 - gain if sided == "lower" else abs(gain - 1.0)
        if dev > worst:
            worst = dev
    return RipEstimate(k, max(0.0, worst), trials, sided)


def cantelli_margin(variance: float, p_target: float) -> float:
    """Margin a with a^2/(a^2 + Var) = p_target, i.e. a = sqrt(Var p/(1-p))."""
    if variance < 0:
        raise ConfigurationError("variance must be non-negative")
    if not 0 < p_target < 1:
        raise ConfigurationError(f"p_target must be in (0,1), got {p_target}")
    if variance == 0:
        warnings.warn("zero variance: degenerate margin a = 0", stacklevel=2)
        return 0.0
    return math.sqrt(variance * p_target / (1.0 - p_target))


def exceedance_probability(a: float, variance: float) -> float:
    """Guaranteed probability a^2/(a^2 + Var) that the noise stays within margin a."""
    if a < 0:
        raise ConfigurationError("margin a must be non-negative")
    if variance < 0:
        raise ConfigurationError("variance must be non-negative")
    if a == 0:
        return 0.0
    if variance == 0:
        return 1.0
    return a * a / (a * a + variance)


def bpdn_guarantee_constant(delta: float) -> float:
    """C(delta) = 4 sqrt(1+delta) / (1 - (1+sqrt 2) delta); needs delta < sqrt(2)-1."""
    if not 0 <= delta < DELTA_CRITICAL:
        raise BoundNotApplicableError(
            f"guarantee holds only for delta < sqrt(2)-1 ~ {DELTA_CRITICAL:.4f}, "
            f"got {delta:.4f}"
        )
    return 4.0 * math.sqrt(1.0 + delta) / (1.0 - (1.0 + math.sqrt(2.0)) * delta)


def bpdn_upper_bound(
    delta2K: float,
    a: float,
    beta: float,
    N: int,
    sigma_m2: float,
    sigma_c2: float,
    *,
    variance: float,
    source_energy: float,
) -> BoundResult:
    """Probabilistic upper bound on the convex-program reconstruction error.

    error <= C(delta2K) * sqrt(a + beta + N(sigma_m2+sigma_c2)) with
    probability at least a^2/(a^2 + Var); Var is the total-noise variance the
    margin a was derived from.  Raises BoundNotApplicableError when delta2K
    is past the guarantee's validity edge (callers mark such sweep points
    not applicable rather than plotting a vacuous value).
    """
    if a <= 0:
        raise ConfigurationError("margin a must be positive")
    c = bpdn_guarantee_constant(delta2K)
    s = a + beta + N * (sigma_m2 + sigma_c2)
    error_bound = c * math.sqrt(s)
    return BoundResult(
        error_bound=error_bound,
        srnr_bound=source_energy / (error_bound * error_bound),
        confidence=exceedance_probability(a, variance),
        margin_a=a,
        epsilon_implicit=math.sqrt(s),
        side="bpdn-upper",
    )


def oracle_lower_bound(
    deltaK: float,
    a: float,
    beta: float,
    N: int,
    sigma_m2: float,
    sigma_c2: float,
    *,
    variance: float,
    source_energy: float,
) -> BoundResult:
    """Probabilistic floor on the error of the support-informed estimator.

    The oracle error stays below sqrt(a + beta + N s2)/sqrt(1 + deltaK) with
    probability at least a^2/(a^2+Var); equivalently it exceeds that value
    with probability at most Var/(a^2+Var), which is what `confidence`
    stores (the complement-side level).  Since no practical algorithm beats
    the oracle, srnr_bound here caps achievable SRNR.
    """
    if a <= 0:
        raise ConfigurationError("margin a must be positive")
    if not 0 <= deltaK < 1:
        raise ConfigurationError(f"deltaK must be in [0,1), got {deltaK}")
    s = a + beta + N * (sigma_m2 + sigma_c2)
    error_bound = math.sqrt(s) / math.sqrt(1.0 + deltaK)
    return BoundResult(
        error_bound=error_bound,
        srnr_bound=source_energy / (error_bound * error_bound),
        confidence=1.0 - exceedance_probability(a, variance),
        margin_a=a,
        epsilon_implicit=math.sqrt(s),
        side="oracle-lower",
    )
