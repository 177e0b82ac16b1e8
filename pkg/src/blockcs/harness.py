"""Monte Carlo sweep engine: per-trial pipeline, medians, and bound curves.

A sweep walks a grid of measurement fractions (fom = N/M) and per-scalar
rates b.  Per fom it draws one sensing matrix, estimates the block-isometry
constants, and computes the mixture log-determinants once; per (fom, b) it
allocates the rate budget, evaluates the theoretical bound curves, and runs
`trials` independent reconstructions; per trial it samples a source, forms
the noisy quantized measurement, and solves both recovery problems.

Seeding: all randomness derives from one master seed through fixed-purpose
streams: (seed, 1, fom_index) for the sensing matrix, (seed, 2, fom_index,
k) for isometry probes, (seed, 3, fom_index, trial_index) for trials, and
(seed, 4, fom_index, trial_index) for per-trial matrices when enabled.
Trial streams deliberately do not depend on b: all rates see the same
source and noise draws with only the noise scale changing, which removes
sampling noise from rate-to-rate comparisons.

Two noise models are available.  "uniform" reproduces the standard
experiment: additive uniform quantization noise with step q and the
matching residual radius.  "vq" injects Gaussian noise whose squared-norm
moments match the rate-allocation model (variance beta/N per coordinate),
which is the regime the theoretical bound columns describe; use it to
validate the bounds against simulation.  The *_sim bound columns always
describe whichever noise was actually injected.
"""

from __future__ import annotations

import difflib
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import __version__ as _pkg_version
from .bounds import (
    BoundResult,
    bpdn_upper_bound,
    cantelli_margin,
    estimate_block_rip,
    oracle_lower_bound,
)
from .errors import BoundNotApplicableError, ConfigurationError
from .gmvq import (
    NoiseMoments,
    epsilon_radius,
    mixture_logdets,
    noise_moments,
    optimal_allocation,
    quantization_step,
)
from .model import (
    ChannelSpec,
    SensingMatrix,
    SourceModel,
    sample_sensing_matrix,
    sample_source,
    source_energy,
    make_rng,
)
from .solvers import BpdnOptions, FEASIBILITY_RTOL, oracle_ls, solve_block_bpdn, true_support

# Seed-stream tags; part of the documented derivation scheme above.
_TAG_MATRIX = 1
_TAG_RIP = 2
_TAG_TRIAL = 3
_TAG_TRIAL_MATRIX = 4


def median(values) -> float:
    """Lower-middle element of the sorted values (index (n-1)//2)."""
    vals = sorted(values)
    if not vals:
        raise ConfigurationError("median of empty list")
    return vals[(len(vals) - 1) // 2]


def srnr_db(energy: float, err_squared: float) -> float:
    """10 log10(energy / err^2); zero error maps to +inf."""
    if err_squared < 0:
        raise ConfigurationError("err_squared must be non-negative")
    if err_squared == 0:
        return math.inf
    return 10.0 * math.log10(energy / err_squared)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a sweep needs; JSON-round-trippable with strict keys."""

    model: SourceModel
    channel: ChannelSpec = ChannelSpec()
    fom_grid: tuple = tuple(round(0.05 * i, 2) for i in range(1, 21))
    rate_grid: tuple = (0.5, 1.0, 1.5)
    trials: int = 100
    confidence: float = 0.5
    seed: int = 0
    rip_probes: int = 1000
    output_path: str | None = None
    threads: int = 0
    noise_model: str = "uniform"
    matrix_per_trial: bool = False
    emit_trials: bool = False
    oracle_support: str = "generator"
    solver_max_iterations: int = 50_000
    solver_tol: float = 1e-8

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigurationError("trials must be at least 1")
        if not 0 < self.confidence < 1:
            raise ConfigurationError("confidence must be in (0,1)")
        if self.rip_probes < 1:
            raise ConfigurationError("ripProbes must be at least 1")
        if self.noise_model not in ("uniform", "vq"):
            raise ConfigurationError(
                f"noiseModel must be 'uniform' or 'vq', got {self.noise_model!r}"
            )
        if self.oracle_support not in ("generator", "threshold"):
            raise ConfigurationError(
                f"oracleSupport must be 'generator' or 'threshold', got {self.oracle_support!r}"
            )
        if self.threads < 0:
            raise ConfigurationError("threads must be >= 0 (0 = auto)")
        if not self.fom_grid or not self.rate_grid:
            raise ConfigurationError("fomGrid and rateGrid must be non-empty")
        for f in self.fom_grid:
            if not 0 < f <= 1:
                raise ConfigurationError(f"fom {f} outside (0, 1]")
            if self.n_for(f) < 1:
                raise ConfigurationError(f"fom {f} gives N < 1")
        for b in self.rate_grid:
            if b <= 0:
                raise ConfigurationError(f"rate {b} must be positive")
        if self.solver_max_iterations < 1 or self.solver_tol <= 0:
            raise ConfigurationError("invalid solver settings")

    def n_for(self, fom: float) -> int:
        # round(fom * M) with exact halves rounded up
        return int(math.floor(fom * self.model.M + 0.5))

    def to_json_dict(self) -> dict:
        return {
            "model": self.model.to_config(),
            "channel": self.channel.to_config(),
            "fomGrid": list(self.fom_grid),
            "rateGrid": list(self.rate_grid),
            "trials": self.trials,
            "confidence": self.confidence,
            "seed": self.seed,
            "ripProbes": self.rip_probes,
            "outputPath": self.output_path,
            "threads": self.threads,
            "noiseModel": self.noise_model,
            "matrixPerTrial": self.matrix_per_trial,
            "emitTrials": self.emit_trials,
            "oracleSupport": self.oracle_support,
            "solver": {
                "maxIterations": self.solver_max_iterations,
                "tol": self.solver_tol,
            },
        }

    @classmethod
    def from_dict(cls, cfg: dict) -> "ExperimentConfig":
        cfg = _reject_unknown(dict(cfg), _TOP_KEYS, "config")
        model_cfg = dict(_PAPER_MODEL)
        model_cfg.update(_reject_unknown(dict(cfg.get("model", {})), _MODEL_KEYS, "model"))
        channel_cfg = _reject_unknown(dict(cfg.get("channel", {})), _CHANNEL_KEYS, "channel")
        solver_cfg = {"maxIterations": 50_000, "tol": 1e-8}
        solver_cfg.update(_reject_unknown(dict(cfg.get("solver", {})), _SOLVER_KEYS, "solver"))
        kwargs = {}
        for json_key, attr in _SCALAR_KEYS.items():
            if json_key in cfg:
                kwargs[attr] = cfg[json_key]
        if "fomGrid" in cfg:
            kwargs["fom_grid"] = tuple(cfg["fomGrid"])
        if "rateGrid" in cfg:
            kwargs["rate_grid"] = tuple(cfg["rateGrid"])
        return cls(
            model=SourceModel.from_config(model_cfg),
            channel=ChannelSpec.from_config(channel_cfg),
            solver_max_iterations=int(solver_cfg["maxIterations"]),
            solver_tol=float(solver_cfg["tol"]),
            **kwargs,
        )


_PAPER_MODEL = {"Q": 10, "R": 30, "K": 1, "theta2": 1e-10, "rho2": 1.0}
_MODEL_KEYS = {"M", "Q", "R", "K", "theta2", "rho2", "weight_rule", "weights"}
_CHANNEL_KEYS = {"sigma_m2", "sigma_c2"}
_SOLVER_KEYS = {"maxIterations", "tol"}
_SCALAR_KEYS = {
    "trials": "trials",
    "confidence": "confidence",
    "seed": "seed",
    "ripProbes": "rip_probes",
    "outputPath": "output_path",
    "threads": "threads",
    "noiseModel": "noise_model",
    "matrixPerTrial": "matrix_per_trial",
    "emitTrials": "emit_trials",
    "oracleSupport": "oracle_support",
}
_TOP_KEYS = (
    {"model", "channel", "solver", "fomGrid", "rateGrid"} | set(_SCALAR_KEYS)
)


def _reject_unknown(cfg: dict, allowed, scope: str) -> dict:
    for key in cfg:
        if key not in allowed:
            near = difflib.get_close_matches(key, sorted(allowed), n=1)
            hint = f"; nearest valid key: {near[0]!r}" if near else ""
            raise ConfigurationError(f"unknown {scope} key {key!r}{hint}")
    return cfg


def default_config(**overrides) -> ExperimentConfig:
    """The full-size experiment configuration; overrides replace fields."""
    cfg = ExperimentConfig(model=SourceModel.create(**_PAPER_MODEL))
    return replace(cfg, **overrides) if overrides else cfg


def apply_dotted_overrides(cfg_dict: dict, assignments) -> dict:
    """Apply 'a.b=value' strings onto a nested config dict (values parse as JSON)."""
    out = json.loads(json.dumps(cfg_dict))  # deep copy, JSON-safe
    for item in assignments:
        if "=" not in item:
            raise ConfigurationError(f"override {item!r} is not KEY=VALUE")
        key, _, raw = item.partition("=")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = out
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigurationError(f"override {key!r} descends into a scalar")
        node[parts[-1]] = value
    return out


@dataclass(frozen=True)
class TrialRecord:
    """One realization: both reconstruction errors and their SRNRs (linear)."""

    fom: float
    b: float
    trial_index: int
    err_bpdn: float
    err_oracle: float
    srnr_bpdn: float
    srnr_oracle: float
    feasible_truth: bool
    converged: bool
    feasible_result: bool

    @property
    def excluded(self) -> bool:
        # Dropped from medians only when flagged non-converged AND infeasible.
        return (not self.converged) and (not self.feasible_result)


@dataclass(frozen=True)
class FomPrecomp:
    """Per-fom shared state: matrix, isometry estimates, log-determinants."""

    fom: float
    fom_index: int
    N: int
    A: SensingMatrix
    masses: tuple
    delta_k: float
    delta_2k: float
    operator_norm: float
    pseudo_inverse: np.ndarray


@dataclass(frozen=True)
class RatePrecomp:
    """Per-(fom, b) state: allocation, moments, bounds, solver radius."""

    b: float
    b_total: float
    q: float
    beta: float
    alpha: float
    margin_a: float
    bound_bpdn: BoundResult | None
    bound_oracle: BoundResult
    bound_bpdn_sim: BoundResult | None
    bound_oracle_sim: BoundResult
    epsilon_solver: float
    noise_scale: float  # q for uniform noise, sqrt(beta/N) for vq noise
    high_rate_warning: bool
    operator_norm: float | None = None
    pseudo_inverse: np.ndarray | None = None


@dataclass(frozen=True)
class SweepRow:
    fom: float
    N: int
    b: float
    delta_k: float
    delta_2k: float
    margin_a: float
    beta: float
    alpha: float
    error_bound_bpdn: float | None
    error_bound_oracle: float
    srnr_bound_bpdn_db: float | None
    srnr_bound_oracle_db: float
    applicable: bool
    median_srnr_bpdn_db: float | None
    median_srnr_oracle_db: float | None
    n_trials: int
    n_excluded: int
    srnr_bound_bpdn_sim_db: float | None
    srnr_bound_oracle_sim_db: float
    epsilon_solver: float
    error: str = ""


CSV_COLUMNS = [
    "fom",
    "N",
    "b_per_scalar",
    "delta_k",
    "delta_2k",
    "a",
    "beta",
    "alpha",
    "error_bound_bpdn",
    "error_bound_oracle",
    "srnr_bound_bpdn_db",
    "srnr_bound_oracle_db",
    "applicable",
    "median_srnr_bpdn_db",
    "median_srnr_oracle_db",
    "n_trials",
    "n_excluded",
    "srnr_bound_bpdn_sim_db",
    "srnr_bound_oracle_sim_db",
    "epsilon_solver",
    "error",
]


@dataclass
class SweepTable:
    """Sweep output: one row per (fom, b), optional per-trial records."""

    rows: list
    config: ExperimentConfig
    trials: list = field(default_factory=list)
    errors: list = field(default_factory=list)
    runtime_seconds: float = 0.0

    @property
    def n_excluded_total(self) -> int:
        return sum(r.n_excluded for r in self.rows)

    def to_csv(self) -> str:
        lines = [",".join(CSV_COLUMNS)]
        for r in self.rows:
            cells = [
                _fmt(r.fom),
                str(r.N),
                _fmt(r.b),
                _fmt(r.delta_k),
                _fmt(r.delta_2k),
                _fmt(r.margin_a),
                _fmt(r.beta),
                _fmt(r.alpha),
                _fmt(r.error_bound_bpdn),
                _fmt(r.error_bound_oracle),
                _fmt(r.srnr_bound_bpdn_db),
                _fmt(r.srnr_bound_oracle_db),
                "1" if r.applicable else "0",
                _fmt(r.median_srnr_bpdn_db),
                _fmt(r.median_srnr_oracle_db),
                str(r.n_trials),
                str(r.n_excluded),
                _fmt(r.srnr_bound_bpdn_sim_db),
                _fmt(r.srnr_bound_oracle_sim_db),
                _fmt(r.epsilon_solver),
                r.error.replace(",", ";").replace("\n", " "),
            ]
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"

    def trials_csv(self) -> str:
        cols = [
            "fom",
            "b_per_scalar",
            "trial_index",
            "err_bpdn",
            "err_oracle",
            "srnr_bpdn",
            "srnr_oracle",
            "feasible_truth",
            "converged",
            "feasible_result",
            "excluded",
        ]
        lines = [",".join(cols)]
        for t in self.trials:
            lines.append(
                ",".join(
                    [
                        _fmt(t.fom),
                        _fmt(t.b),
                        str(t.trial_index),
                        _fmt(t.err_bpdn),
                        _fmt(t.err_oracle),
                        _fmt(t.srnr_bpdn),
                        _fmt(t.srnr_oracle),
                        "1" if t.feasible_truth else "0",
                        "1" if t.converged else "0",
                        "1" if t.feasible_result else "0",
                        "1" if t.excluded else "0",
                    ]
                )
            )
        return "\n".join(lines) + "\n"

    def meta_dict(self) -> dict:
        import scipy

        from .solvers import SOLVER_BACKEND

        return {
            "config": self.config.to_json_dict(),
            "package_version": _pkg_version,
            "numpy_version": np.__version__,
            "scipy_version": scipy.__version__,
            "solver_backend": SOLVER_BACKEND,
            "runtime_seconds": self.runtime_seconds,
            "n_excluded_total": self.n_excluded_total,
            "errors": list(self.errors),
            "finished_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        }

    def write(self, out_dir: str) -> None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "sweep.csv"), "w", newline="") as fh:
            fh.write(self.to_csv())
        with open(os.path.join(out_dir, "meta.json"), "w") as fh:
            json.dump(self.meta_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        if self.config.emit_trials:
            with open(os.path.join(out_dir, "trials.csv"), "w", newline="") as fh:
                fh.write(self.trials_csv())


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _precompute_fom(config: ExperimentConfig, fom_index: int) -> FomPrecomp:
    fom = config.fom_grid[fom_index]
    N = config.n_for(fom)
    A = sample_sensing_matrix(N, config.model.M, (config.seed, _TAG_MATRIX, fom_index))
    masses = tuple(mixture_logdets(A, config.model, config.channel.sigma_m2))
    rip_k = estimate_block_rip(
        A,
        config.model.Q,
        config.model.R,
        config.model.K,
        config.rip_probes,
        (config.seed, _TAG_RIP, fom_index, config.model.K),
    )
    k2 = min(2 * config.model.K, config.model.R)
    rip_2k = estimate_block_rip(
        A,
        config.model.Q,
        config.model.R,
        k2,
        config.rip_probes,
        (config.seed, _TAG_RIP, fom_index, k2),
    )
    s = np.linalg.svd(A.entries, compute_uv=False)
    return FomPrecomp(
        fom=fom,
        fom_index=fom_index,
        N=N,
        A=A,
        masses=masses,
        delta_k=rip_k.delta,
        delta_2k=rip_2k.delta,
        operator_norm=float(s[0]),
        pseudo_inverse=np.linalg.pinv(A.entries),
    )


def _simulation_moments(config: ExperimentConfig, N: int, q: float, beta: float) -> NoiseMoments:
    """Moments of the noise actually injected by the chosen noise model."""
    if config.noise_model == "uniform":
        d2 = N * q * q / 12.0
        d4 = d2 * d2 + N * q**4 / 180.0
    else:
        d2 = beta
        d4 = d2 * d2 * (1.0 + 2.0 / N)  # chi-square fourth moment
    return noise_moments(d2, d4, N, config.channel.sigma_m2, config.channel.sigma_c2)


def _precompute_rate(config: ExperimentConfig, pre: FomPrecomp, b: float) -> RatePrecomp:
    N = pre.N
    model = config.model
    sigma_m2, sigma_c2 = config.channel.sigma_m2, config.channel.sigma_c2
    energy = source_energy(model)

    alloc = optimal_allocation(list(pre.masses), b * model.M, N)
    beta, alpha = alloc.delta2, alloc.delta4
    moments = noise_moments(beta, alpha, N, sigma_m2, sigma_c2)
    a = cantelli_margin(moments.variance, config.confidence)
    common = dict(beta=beta, N=N, sigma_m2=sigma_m2, sigma_c2=sigma_c2)
    try:
        bound_bpdn = bpdn_upper_bound(
            pre.delta_2k, a, variance=moments.variance, source_energy=energy, **common
        )
    except BoundNotApplicableError:
        bound_bpdn = None
    bound_oracle = oracle_lower_bound(
        pre.delta_k, a, variance=moments.variance, source_energy=energy, **common
    )

    q = quantization_step(model.M, N, b)
    sim = _simulation_moments(config, N, q, beta)
    a_sim = cantelli_margin(sim.variance, config.confidence)
    sim_common = dict(
        beta=sim.mean - N * (sigma_m2 + sigma_c2),
        N=N,
        sigma_m2=sigma_m2,
        sigma_c2=sigma_c2,
    )
    try:
        bound_bpdn_sim = bpdn_upper_bound(
            pre.delta_2k, a_sim, variance=sim.variance, source_energy=energy, **sim_common
        )
    except BoundNotApplicableError:
        bound_bpdn_sim = None
    bound_oracle_sim = oracle_lower_bound(
        pre.delta_k, a_sim, variance=sim.variance, source_energy=energy, **sim_common
    )

    s2 = sigma_m2 + sigma_c2
    if config.noise_model == "uniform":
        eps2 = epsilon_radius(N, q) ** 2
        if s2 > 0:
            eps2 = eps2 + N * s2 + 3.0 * math.sqrt(2.0 * N) * s2
        noise_scale = q
    else:
        # Solve at the guarantee's own radius sqrt(a + mean) so the error
        # bound applies directly whenever the truth is feasible.
        eps2 = moments.mean + a
        noise_scale = math.sqrt(beta / N)

    return RatePrecomp(
        b=b,
        b_total=b * model.M,
        q=q,
        beta=beta,
        alpha=alpha,
        margin_a=a,
        bound_bpdn=bound_bpdn,
        bound_oracle=bound_oracle,
        bound_bpdn_sim=bound_bpdn_sim,
        bound_oracle_sim=bound_oracle_sim,
        epsilon_solver=math.sqrt(eps2),
        noise_scale=noise_scale,
        high_rate_warning=alloc.high_rate_warning,
        operator_norm=pre.operator_norm,
        pseudo_inverse=pre.pseudo_inverse,
    )


def run_trial(
    config: ExperimentConfig,
    fom: float,
    b: float,
    trial_seed,
    A: SensingMatrix,
    rate_pre: RatePrecomp,
    trial_index: int = 0,
) -> TrialRecord:
    """One realization end to end; bit-identical for identical trial seeds.

    Draw order is fixed and independent of b so that different rates reuse
    the same source and unit-scale noise draws.
    """
    model = config.model
    N = A.N
    rng = make_rng(trial_seed)
    x = sample_source(model, rng)

    y = A.entries @ x.values
    if config.channel.sigma_m2 > 0:
        y = y + math.sqrt(config.channel.sigma_m2) * rng.standard_normal(N)
    if config.noise_model == "uniform":
        y_c = y + rate_pre.q * rng.uniform(-0.5, 0.5, N)
    else:
        y_c = y + rate_pre.noise_scale * rng.standard_normal(N)
    if config.channel.sigma_c2 > 0:
        y_c = y_c + math.sqrt(config.channel.sigma_c2) * rng.standard_normal(N)

    eps = rate_pre.epsilon_solver
    options = BpdnOptions(
        epsilon=eps,
        max_iterations=config.solver_max_iterations,
        primal_tol=config.solver_tol,
        dual_tol=config.solver_tol,
        operator_norm=rate_pre.operator_norm,
        pseudo_inverse=rate_pre.pseudo_inverse,
    )
    bp = solve_block_bpdn(A, y_c, model.Q, options)

    if config.oracle_support == "generator":
        support = x.true_support
    else:
        support = true_support(x.values, model.Q, model.K)
    orc = oracle_ls(A, y_c, support, model.Q)

    energy = source_energy(model)
    err_bp = float(np.linalg.norm(x.values - bp.x_hat))
    err_or = float(np.linalg.norm(x.values - orc.x_hat))
    truth_residual = float(np.linalg.norm(y_c - A.entries @ x.values))
    return TrialRecord(
        fom=fom,
        b=b,
        trial_index=trial_index,
        err_bpdn=err_bp,
        err_oracle=err_or,
        srnr_bpdn=energy / (err_bp * err_bp) if err_bp > 0 else math.inf,
        srnr_oracle=energy / (err_or * err_or) if err_or > 0 else math.inf,
        feasible_truth=truth_residual <= eps,
        converged=bp.converged,
        feasible_result=bp.residual_norm <= eps * (1.0 + FEASIBILITY_RTOL) + 1e-12,
    )


def _db_of(bound: BoundResult | None) -> float | None:
    if bound is None:
        return None
    return 10.0 * math.log10(bound.srnr_bound)


def _run_point(config: ExperimentConfig, fom_pre: FomPrecomp, rate_pre: RatePrecomp):
    """All trials for one (fom, b) grid point, aggregated into a SweepRow."""
    records = []
    error_msg = ""
    for t in range(config.trials):
        if config.matrix_per_trial:
            A = sample_sensing_matrix(
                fom_pre.N,
                config.model.M,
                (config.seed, _TAG_TRIAL_MATRIX, fom_pre.fom_index, t),
            )
            pre_t = replace(rate_pre, operator_norm=None, pseudo_inverse=None)
        else:
            A = fom_pre.A
            pre_t = rate_pre
        seed = (config.seed, _TAG_TRIAL, fom_pre.fom_index, t)
        try:
            records.append(
                run_trial(config, fom_pre.fom, rate_pre.b, seed, A, pre_t, trial_index=t)
            )
        except Exception as exc:  # keep the sweep going; annotate the row
            if not error_msg:
                error_msg = f"trial {t}: {type(exc).__name__}: {exc}"

    included = [r for r in records if not r.excluded]
    if included:
        med_bp = srnr_db(1.0, 1.0 / median(r.srnr_bpdn for r in included))
        med_or = srnr_db(1.0, 1.0 / median(r.srnr_oracle for r in included))
    else:
        med_bp = med_or = None
        if not error_msg:
            error_msg = "all trials excluded"

    row = SweepRow(
        fom=fom_pre.fom,
        N=fom_pre.N,
        b=rate_pre.b,
        delta_k=fom_pre.delta_k,
        delta_2k=fom_pre.delta_2k,
        margin_a=rate_pre.margin_a,
        beta=rate_pre.beta,
        alpha=rate_pre.alpha,
        error_bound_bpdn=None if rate_pre.bound_bpdn is None else rate_pre.bound_bpdn.error_bound,
        error_bound_oracle=rate_pre.bound_oracle.error_bound,
        srnr_bound_bpdn_db=_db_of(rate_pre.bound_bpdn),
        srnr_bound_oracle_db=_db_of(rate_pre.bound_oracle),
        applicable=rate_pre.bound_bpdn is not None,
        median_srnr_bpdn_db=med_bp,
        median_srnr_oracle_db=med_or,
        n_trials=len(records),
        n_excluded=sum(r.excluded for r in records),
        srnr_bound_bpdn_sim_db=_db_of(rate_pre.bound_bpdn_sim),
        srnr_bound_oracle_sim_db=_db_of(rate_pre.bound_oracle_sim),
        epsilon_solver=rate_pre.epsilon_solver,
        error=error_msg,
    )
    return row, records


def _point_worker(args):
    config, fom_pre, rate_pre, i, j = args
    row, records = _run_point(config, fom_pre, rate_pre)
    return i, j, row, records


def run_sweep(config: ExperimentConfig, progress=None) -> SweepTable:
    """Full grid sweep; deterministic for a fixed config regardless of threads."""
    t0 = time.monotonic()
    say = progress if progress is not None else (lambda msg: None)

    fom_pres = []
    errors = []
    for i, fom in enumerate(config.fom_grid):
        say(f"precompute fom={fom} ({i + 1}/{len(config.fom_grid)})")
        try:
            fom_pres.append(_precompute_fom(config, i))
        except Exception as exc:
            errors.append(f"fom={fom}: {type(exc).__name__}: {exc}")
            fom_pres.append(None)

    tasks = []
    for i, fom_pre in enumerate(fom_pres):
        if fom_pre is None:
            continue
        for j, b in enumerate(config.rate_grid):
            try:
                rate_pre = _precompute_rate(config, fom_pre, b)
            except Exception as exc:
                errors.append(
                    f"fom={fom_pre.fom} b={b}: {type(exc).__name__}: {exc}"
                )
                continue
            tasks.append((config, fom_pre, rate_pre, i, j))

    workers = config.threads if config.threads > 0 else (os.cpu_count() or 1)
    results = {}
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for i, j, row, records in pool.map(_point_worker, tasks):
                results[(i, j)] = (row, records)
                say(f"done fom={row.fom} b={row.b}")
    else:
        for task in tasks:
            i, j, row, records = _point_worker(task)
            results[(i, j)] = (row, records)
            say(f"done fom={row.fom} b={row.b}")

    rows = []
    all_records = []
    for i in range(len(config.fom_grid)):
        for j in range(len(config.rate_grid)):
            if (i, j) in results:
                row, records = results[(i, j)]
                rows.append(row)
                all_records.extend(records)

    return SweepTable(
        rows=rows,
        config=config,
        trials=all_records,
        errors=errors,
        runtime_seconds=time.monotonic() - t0,
    )
