"""High-rate vector-quantizer analysis for the Gaussian mixture measurement.

Per mixture component, the asymptotic distortion of a b-bit quantizer in N
dimensions is 2^(-eta*b/N) * V(eta,N) * det(cov)^(eta/2N).  This module
computes the component log-determinants robustly, allocates a total bit
budget across components in closed form, and derives the first two moments
of the total noise (quantization + Gaussian) that the error bounds consume.
It also provides the uniform-noise simulation rules used by the sweep.

Everything involving determinants works in the log domain: with inactive
block variance near 1e-10 the raw determinants underflow double precision
long before the paper-scale N is reached.
"""

from __future__ import annotations

import hashlib
import json
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import svdvals
from scipy.special import gammaln, logsumexp

from .errors import ConfigurationError
from .model import MixtureComponent, SensingMatrix, SourceModel, make_rng

_LN2 = math.log(2.0)


@dataclass(frozen=True)
class ComponentMass:
    """Weight and measurement-covariance log-determinant of one component."""

    component_index: int
    log_det: float
    weight: float


@dataclass(frozen=True)
class RateAllocation:
    """Optimal per-component bits plus the distortion moments at the optimum.

    bits are real valued (the high-rate optimum is continuous; never rounded).
    delta2 is the minimum mean squared quantization distortion, delta4 the
    fourth moment evaluated at the same allocation.  high_rate_warning is set
    when some component receives fewer than zero bits (2^b < 1), where the
    high-rate model is strained; the real-valued optimum is still returned.
    """

    b_total: float
    bits: np.ndarray
    delta2: float
    delta4: float
    high_rate_warning: bool

    def shares_log2(self) -> np.ndarray:
        """Per-component log2 share of the rate budget: bits - b_total."""
        return self.bits - self.b_total

    def to_json_dict(self) -> dict:
        return {
            "b_total": self.b_total,
            "bits": [float(b) for b in self.bits],
            "shares_log2": [float(s) for s in self.shares_log2()],
            "delta2": self.delta2,
            "delta4": self.delta4,
            "high_rate_warning": self.high_rate_warning,
        }


@dataclass(frozen=True)
class NoiseMoments:
    """Mean and variance of the squared l2 norm of the total noise."""

    mean: float
    variance: float


def shape_constant(eta: int, N: int) -> float:
    """Dimensionality constant V(eta, N) of the high-rate distortion law.

    V = (sqrt 2)^eta * ((N/2) Gamma(N/2))^(eta/N) * ((N+eta)/N)^((N+eta-2)/2),
    evaluated through log-Gamma so large N does not overflow.
    """
    if eta not in (2, 4):
        raise ConfigurationError(f"eta must be 2 or 4, got {eta}")
    if N < 1:
        raise ConfigurationError(f"N must be positive, got {N}")
    log_v = (
        0.5 * eta * _LN2
        + (eta / N) * (math.log(N / 2.0) + gammaln(N / 2.0))
        + 0.5 * (N + eta - 2) * math.log((N + eta) / N)
    )
    return math.exp(log_v)


def component_logdet(A: SensingMatrix, coordinate_variances, sigma_m2: float) -> float:
    """log det(A C A^T + sigma_m2 I) for one component's diagonal covariance C.

    Computed from the singular values of A sqrt(C): the determinant itself
    underflows for tiny inactive variances, the log of the squared singular
    values does not.  Raises ConfigurationError when the matrix is singular
    (sigma_m2 = 0 and rank(A sqrt(C)) < N).
    """
    c = np.asarray(coordinate_variances, dtype=float)
    if c.shape != (A.M,):
        raise ConfigurationError(
            f"variance vector has shape {c.shape}, expected ({A.M},)"
        )
    if sigma_m2 < 0:
        raise ConfigurationError("sigma_m2 must be non-negative")
    s = svdvals(A.entries * np.sqrt(c)[None, :])
    # svdvals returns min(N, M) = N values since N <= M.
    if sigma_m2 == 0.0:
        tol = s[0] * max(A.N, A.M) * np.finfo(float).eps
        if s[-1] <= tol:
            raise ConfigurationError(
                "measurement covariance is singular: sigma_m2 = 0 and "
                f"A*sqrt(C) has numerical rank < N (smin={s[-1]:.3e})"
            )
        return float(2.0 * np.sum(np.log(s)))
    return float(np.sum(np.log(s * s + sigma_m2)))


def mixture_logdets(A: SensingMatrix, model: SourceModel, sigma_m2: float):
    """ComponentMass list for every mixture component, in enumeration order."""
    return [
        ComponentMass(i, component_logdet(A, model.coordinate_variances(c), sigma_m2), c.weight)
        for i, c in enumerate(model.components)
    ]


def _log_distortion(b: float, eta: int, log_det: float, N: int) -> float:
    return -eta * b * _LN2 / N + math.log(shape_constant(eta, N)) + eta * log_det / (2 * N)


def component_distortion(b: float, eta: int, log_det: float, N: int) -> float:
    """Distortion 2^(-eta*b/N) * V(eta,N) * det^(eta/2N) of one component at b bits."""
    if N < 1:
        raise ConfigurationError(f"N must be positive, got {N}")
    return math.exp(_log_distortion(float(b), eta, log_det, N))


def _log_weights_and_masses(masses):
    log_w = np.array([math.log(m.weight) for m in masses])
    log_dets = np.array([m.log_det for m in masses])
    return log_w, log_dets


def optimal_allocation(masses, b_total: float, N: int) -> RateAllocation:
    """Bit split across components minimizing the mean quantization distortion.

    Closed form: 2^(b_j) proportional to [w_j det_j^(1/N)]^(N/(N+2)), scaled
    to exhaust 2^(b_total).  delta2 comes from the matching closed form;
    delta4 is evaluated by direct summation of the per-component fourth-moment
    law at the returned bits (see delta4_closed_form for the two closed-form
    variants and why summation is the authority).

    Zero-weight components are dropped from the optimization and get -inf
    bits (a zero share).  All sums run in the log domain.
    """
    if b_total <= 0:
        raise ConfigurationError(f"b_total must be positive, got {b_total}")
    if N < 1:
        raise ConfigurationError(f"N must be positive, got {N}")
    if not masses:
        raise ConfigurationError("need at least one component")
    active = [m for m in masses if m.weight > 0]
    if not active:
        raise ConfigurationError("all component weights are zero")

    log_w, log_dets = _log_weights_and_masses(active)
    lw = (N / (N + 2.0)) * (log_w + log_dets / N)
    ls = logsumexp(lw)

    bits_active = b_total + (lw - ls) / _LN2
    bits = np.full(len(masses), -np.inf)
    bits[[i for i, m in enumerate(masses) if m.weight > 0]] = bits_active

    log_delta2 = -2.0 * b_total * _LN2 / N + math.log(shape_constant(2, N)) + ((N + 2.0) / N) * ls
    delta2 = math.exp(log_delta2)

    terms4 = log_w + np.array(
        [_log_distortion(b, 4, ld, N) for b, ld in zip(bits_active, log_dets)]
    )
    delta4 = math.exp(logsumexp(terms4))

    warn = bool(np.any(bits_active < 0))
    if warn:
        warnings.warn(
            "optimal allocation gives some component less than one codevector "
            "equivalent (2^b < 1); high-rate distortion model is strained",
            stacklevel=2,
        )
    return RateAllocation(float(b_total), bits, delta2, delta4, warn)


def delta4_closed_form(masses, b_total: float, N: int, variant: str = "consistent") -> float:
    """Closed-form fourth moment at the optimal allocation, two variants.

    "consistent" substitutes the optimal bits into the fourth-moment law and
    simplifies; it matches direct summation to near machine precision.  The
    "alternate" variant evaluates a published closed form whose inner
    determinant exponent (N-6)/(2N(N-2)) disagrees with that substitution;
    it is retained purely as a diagnostic.  Both need N > 2.
    """
    if variant not in ("consistent", "alternate"):
        raise ConfigurationError(f"unknown variant {variant!r}")
    if N <= 2:
        raise ConfigurationError("closed forms require N > 2 (direct summation does not)")
    active = [m for m in masses if m.weight > 0]
    log_w, log_dets = _log_weights_and_masses(active)
    lw = (N / (N + 2.0)) * (log_w + log_dets / N)
    ls = logsumexp(lw)
    if variant == "consistent":
        inner = log_dets / (N - 2.0)
    else:
        inner = log_dets * (N - 6.0) / (2.0 * N * (N - 2.0))
    terms = ((N - 2.0) / (N + 2.0)) * (log_w + 2.0 * inner)
    log_val = (
        -4.0 * b_total * _LN2 / N
        + math.log(shape_constant(4, N))
        + (4.0 / N) * ls
        + logsumexp(terms)
    )
    return math.exp(log_val)


def noise_moments(delta2, delta4, N, sigma_m2, sigma_c2) -> NoiseMoments:
    """Moments of ||n||^2 for n = quantization noise + Gaussian noise.

    mean = delta2 + N s2 and
    variance = (delta4 - delta2^2) + 4 s2 delta2 + 2 N s2^2, s2 = sigma_m2 +
    sigma_c2.  The cross term is 4 s2 delta2: for independent zero-mean parts
    u and g, Var||u+g||^2 picks up 4 E[(u.g)^2] = 4 s2 E||u||^2, which has no
    extra factor of N (Monte Carlo in the test suite pins this down).
    """
    if delta2 < 0 or delta4 < 0:
        raise ConfigurationError("moments must be non-negative")
    if delta4 < delta2 * delta2:
        raise ConfigurationError(
            f"delta4={delta4!r} < delta2^2={delta2 * delta2!r}: not a valid "
            "fourth/second moment pair"
        )
    s2 = sigma_m2 + sigma_c2
    mean = delta2 + N * s2
    variance = (delta4 - delta2 * delta2) + 4.0 * s2 * delta2 + 2.0 * N * s2 * s2
    return NoiseMoments(float(mean), float(variance))


def quantization_step(M: int, N: int, b_per_scalar: float) -> float:
    """Uniform-model level spacing q = 1 / 2^(M b / N - 1)."""
    if b_per_scalar <= 0:
        raise ConfigurationError("b_per_scalar must be positive")
    return 2.0 ** (1.0 - M * b_per_scalar / N)


def simulate_quantization(y, q: float, seed) -> np.ndarray:
    """y plus i.i.d. uniform noise on (-q/2, q/2), the high-rate surrogate."""
    if q <= 0:
        raise ConfigurationError("q must be positive")
    y = np.asarray(y, dtype=float)
    return y + make_rng(seed).uniform(-0.5 * q, 0.5 * q, size=y.shape)


def epsilon_radius(N: int, q: float) -> float:
    """Residual radius for the uniform noise model: mean of ||n_q||^2 plus
    three standard deviations, under the square root.

    epsilon = sqrt(N q^2 / 12 + 3 sqrt(N) q^2 / (6 sqrt 5)); the standard
    deviation term comes from the uniform fourth moment E u^4 = q^4 / 80.
    """
    if N < 1:
        raise ConfigurationError(f"N must be positive, got {N}")
    if q <= 0:
        raise ConfigurationError("q must be positive")
    return q * math.sqrt(N / 12.0 + 3.0 * math.sqrt(N) / (6.0 * math.sqrt(5.0)))


def _model_digest(model: SourceModel, sigma_m2: float) -> str:
    payload = json.dumps(
        [model.to_config(), sigma_m2, [c.weight for c in model.components]],
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def save_mass_cache(path, matrix_seed_label: str, model: SourceModel, sigma_m2, masses):
    """Write component masses to a JSON sidecar keyed by matrix seed and model."""
    doc = {
        "matrix_seed": matrix_seed_label,
        "model_digest": _model_digest(model, sigma_m2),
        "masses": [[m.component_index, m.log_det, m.weight] for m in masses],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_mass_cache(path, matrix_seed_label: str, model: SourceModel, sigma_m2):
    """Read masses back; None when the key does not match or the file is absent."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError):
        return None
    if doc.get("matrix_seed") != matrix_seed_label:
        return None
    if doc.get("model_digest") != _model_digest(model, sigma_m2):
        return None
    return [ComponentMass(int(i), float(ld), float(w)) for i, ld, w in doc["masses"]]
