"""Block-sparse Gaussian mixture source, sensing matrix, and noisy measurement.

The source x in R^M is split into R blocks of length Q.  Each mixture
component picks a set of at most K "active" blocks; coordinates in active
blocks have variance rho2, the rest theta2 (tiny, so draws are approximately
block sparse).  Measurements are y = A x + n_m with a column-normalized
Gaussian A of shape N x M, N <= M.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

# Ratio theta2/rho2 above which a model stops looking block sparse.
SPARSITY_RATIO_WARN = 1e-3


def make_rng(seed) -> np.random.Generator:
    """Build a Generator from an int, tuple of ints, SeedSequence, or Generator.

    Tuples feed SeedSequence entropy directly, which gives independent,
    order-insensitive streams for hierarchical seeding schemes.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.default_rng(seed)
    if isinstance(seed, (tuple, list)):
        return np.random.default_rng(np.random.SeedSequence(list(seed)))
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class MixtureComponent:
    """One Gaussian component: which blocks are active, and its mixture weight."""

    support: tuple  # sorted block indices, 0-based
    weight: float

    def block_variances(self, R: int, theta2: float, rho2: float) -> np.ndarray:
        v = np.full(R, theta2, dtype=float)
        v[list(self.support)] = rho2
        return v


def enumerate_components(R: int, K: int, weight_rule="uniform", weights=None):
    """All supports of size 1..K in deterministic order (by size, then lexicographic).

    weight_rule: "uniform" gives every arrangement the same weight
    1/sum_k C(R,k); "explicit" takes `weights` in enumeration order.
    """
    if not 1 <= K <= R:
        raise ConfigurationError(f"need 1 <= K <= R, got K={K}, R={R}")
    supports = []
    for k in range(1, K + 1):
        supports.extend(itertools.combinations(range(R), k))
    count = len(supports)
    if weight_rule == "uniform":
        if weights is not None:
            raise ConfigurationError("weights given but weight_rule is 'uniform'")
        w = [1.0 / count] * count
    elif weight_rule == "explicit":
        if weights is None or len(weights) != count:
            raise ConfigurationError(
                f"explicit weight list must have {count} entries, got "
                f"{'none' if weights is None else len(weights)}"
            )
        w = [float(x) for x in weights]
        if any(x < 0 for x in w):
            raise ConfigurationError("weights must be non-negative")
        if abs(sum(w) - 1.0) > 1e-12:
            raise ConfigurationError(f"weights must sum to 1, got {sum(w)!r}")
    else:
        raise ConfigurationError(f"unknown weight_rule {weight_rule!r}")
    return [MixtureComponent(s, wi) for s, wi in zip(supports, w)]


@dataclass(frozen=True)
class SourceModel:
    """Full prior: geometry (Q, R, K), variances, and the component list."""

    Q: int
    R: int
    K: int
    rho2: float
    theta2: float
    components: tuple = field(default=())

    def __post_init__(self):
        if self.Q < 1 or self.R < 1:
            raise ConfigurationError("Q and R must be positive")
        if not 1 <= self.K <= self.R:
            raise ConfigurationError(f"need 1 <= K <= R, got K={self.K}, R={self.R}")
        if self.rho2 <= 0:
            raise ConfigurationError("rho2 must be positive")
        if self.theta2 < 0:
            raise ConfigurationError("theta2 must be non-negative")
        if self.theta2 >= self.rho2:
            raise ConfigurationError("theta2 must be strictly below rho2")
        if self.theta2 / self.rho2 > SPARSITY_RATIO_WARN:
            warnings.warn(
                f"theta2/rho2 = {self.theta2 / self.rho2:.3g} is large; draws "
                "will not look block sparse",
                stacklevel=3,
            )
        expected = sum(math.comb(self.R, k) for k in range(1, self.K + 1))
        if len(self.components) != expected:
            raise ConfigurationError(
                f"component count {len(self.components)} != {expected}"
            )
        total = sum(c.weight for c in self.components)
        if abs(total - 1.0) > 1e-12:
            raise ConfigurationError(f"component weights sum to {total!r}, not 1")
        if len({c.support for c in self.components}) != len(self.components):
            raise ConfigurationError("component supports must be distinct")

    @property
    def M(self) -> int:
        return self.Q * self.R

    @property
    def default_gamma(self) -> float:
        # Small threshold for block-activity accounting.
        return 1e-3 * math.sqrt(self.rho2)

    @classmethod
    def create(cls, Q, R, K, rho2, theta2, weight_rule="uniform", weights=None):
        comps = enumerate_components(R, K, weight_rule, weights)
        return cls(Q, R, K, rho2, theta2, tuple(comps))

    def coordinate_variances(self, comp: MixtureComponent) -> np.ndarray:
        """Per-coordinate variance (length M) of one component's covariance diagonal."""
        return np.repeat(comp.block_variances(self.R, self.theta2, self.rho2), self.Q)

    def to_config(self) -> dict:
        cfg = {
            "M": self.M,
            "Q": self.Q,
            "R": self.R,
            "K": self.K,
            "theta2": self.theta2,
            "rho2": self.rho2,
            "weight_rule": "uniform",
        }
        uniform = 1.0 / len(self.components)
        if any(abs(c.weight - uniform) > 1e-15 for c in self.components):
            cfg["weight_rule"] = "explicit"
            cfg["weights"] = [c.weight for c in self.components]
        return cfg

    @classmethod
    def from_config(cls, cfg: dict) -> "SourceModel":
        cfg = dict(cfg)
        M = cfg.pop("M", None)
        Q = cfg.pop("Q")
        R = cfg.pop("R")
        if M is not None and M != Q * R:
            raise ConfigurationError(f"M={M} inconsistent with Q*R={Q * R}")
        model = cls.create(
            Q,
            R,
            cfg.pop("K"),
            cfg.pop("rho2"),
            cfg.pop("theta2"),
            cfg.pop("weight_rule", "uniform"),
            cfg.pop("weights", None),
        )
        if cfg:
            raise ConfigurationError(f"unknown model keys: {sorted(cfg)}")
        return model


@dataclass(frozen=True)
class ChannelSpec:
    """Additive Gaussian noise variances: sigma_m2 pre-quantizer, sigma_c2 post."""

    sigma_m2: float = 0.0
    sigma_c2: float = 0.0

    def __post_init__(self):
        if self.sigma_m2 < 0 or self.sigma_c2 < 0:
            raise ConfigurationError("noise variances must be non-negative")

    @property
    def total_variance(self) -> float:
        return self.sigma_m2 + self.sigma_c2

    def to_config(self) -> dict:
        return {"sigma_m2": self.sigma_m2, "sigma_c2": self.sigma_c2}

    @classmethod
    def from_config(cls, cfg: dict) -> "ChannelSpec":
        cfg = dict(cfg)
        spec = cls(cfg.pop("sigma_m2", 0.0), cfg.pop("sigma_c2", 0.0))
        if cfg:
            raise ConfigurationError(f"unknown channel keys: {sorted(cfg)}")
        return spec


@dataclass(frozen=True)
class SparseVector:
    """A source draw plus the generating component's block support."""

    values: np.ndarray
    true_support: tuple
    component_index: int


@dataclass(frozen=True)
class SensingMatrix:
    """Dense N x M matrix with unit-norm columns."""

    entries: np.ndarray

    def __post_init__(self):
        if self.entries.ndim != 2:
            raise ConfigurationError("sensing matrix must be 2-D")
        norms = np.linalg.norm(self.entries, axis=0)
        if np.any(np.abs(norms - 1.0) > 1e-12):
            raise ConfigurationError("sensing matrix columns must have unit norm")

    @property
    def N(self) -> int:
        return self.entries.shape[0]

    @property
    def M(self) -> int:
        return self.entries.shape[1]


def sample_source(model: SourceModel, seed) -> SparseVector:
    """Draw x: pick a component by weight, then fill blocks with Gaussians."""
    rng = make_rng(seed)
    weights = np.array([c.weight for c in model.components])
    idx = int(rng.choice(len(weights), p=weights))
    comp = model.components[idx]
    std = np.sqrt(model.coordinate_variances(comp))
    values = rng.standard_normal(model.M) * std
    return SparseVector(values, comp.support, idx)


def sample_sensing_matrix(N: int, M: int, seed) -> SensingMatrix:
    """Gaussian entries with variance 1/N, then columns rescaled to unit norm."""
    if N < 1:
        raise ConfigurationError("N must be positive")
    if N > M:
        raise ConfigurationError(f"N={N} > M={M}: system must be under-determined")
    rng = make_rng(seed)
    A = rng.normal(0.0, 1.0 / math.sqrt(N), size=(N, M))
    A /= np.linalg.norm(A, axis=0, keepdims=True)
    return SensingMatrix(A)


def _vector_of(x) -> np.ndarray:
    return x.values if isinstance(x, SparseVector) else np.asarray(x, dtype=float)


def measure(A: SensingMatrix, x, sigma_m2: float, seed) -> np.ndarray:
    """y = A x + n_m with i.i.d. Gaussian n_m of variance sigma_m2."""
    v = _vector_of(x)
    if v.shape != (A.M,):
        raise ConfigurationError(f"x has shape {v.shape}, expected ({A.M},)")
    y = A.entries @ v
    if sigma_m2 > 0:
        y = y + make_rng(seed).normal(0.0, math.sqrt(sigma_m2), size=A.N)
    return y


def block_sparsity(x, Q: int, gamma: float) -> int:
    """Number of blocks whose l2 norm exceeds gamma."""
    v = _vector_of(x)
    if v.size % Q != 0:
        raise ConfigurationError(f"length {v.size} not divisible by Q={Q}")
    norms = np.linalg.norm(v.reshape(-1, Q), axis=1)
    return int(np.sum(norms > gamma))


def source_energy(model: SourceModel) -> float:
    """E||x||^2 = sum_j w_j * Q * (k_j * rho2 + (R - k_j) * theta2)."""
    return sum(
        c.weight
        * model.Q
        * (len(c.support) * model.rho2 + (model.R - len(c.support)) * model.theta2)
        for c in model.components
    )
