"""Command line front end.

Subcommands:
  sweep      full grid sweep; writes sweep.csv + meta.json (+ trials.csv)
  bounds     bound row for a single (fom, rate) point, as JSON
  rip        block-isometry estimate for one fom, as JSON
  alloc      rate allocation and noise moments for one (fom, rate), as JSON
  solve-one  one end-to-end trial, as JSON
  validate   fast self-checks against frozen constants; exit 1 on failure

Exit codes: 0 success, 1 validation failure, 2 configuration error,
3 sweep finished with annotated partial failures.  Progress goes to
stderr; results go to stdout or files.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import __version__
from .bounds import cantelli_margin, estimate_block_rip, exceedance_probability
from .errors import ConfigurationError
from .gmvq import epsilon_radius, noise_moments, optimal_allocation, shape_constant
from .harness import (
    ExperimentConfig,
    _precompute_fom,
    _precompute_rate,
    apply_dotted_overrides,
    run_sweep,
    run_trial,
)
from .model import make_rng, sample_sensing_matrix, sample_source
from .solvers import SOLVER_BACKEND, BpdnOptions, certify_kkt, solve_block_bpdn

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_CONFIG = 2
EXIT_PARTIAL = 3


def _say(msg: str) -> None:
    print(msg, file=sys.stderr, flush=True)


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH", help="JSON config file")
    p.add_argument(
        "--set",
        metavar="KEY=VALUE",
        action="append",
        default=[],
        dest="overrides",
        help="override a config entry (dotted keys, repeatable)",
    )
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--trials", type=int, help="Monte Carlo trials per grid point")
    p.add_argument("--threads", type=int, help="worker processes (0 = auto)")


def _build_config(args) -> ExperimentConfig:
    cfg: dict = {}
    if args.config:
        with open(args.config) as fh:
            cfg = json.load(fh)
        if not isinstance(cfg, dict):
            raise ConfigurationError("config file must hold a JSON object")
    cfg = apply_dotted_overrides(cfg, args.overrides)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.trials is not None:
        cfg["trials"] = args.trials
    if args.threads is not None:
        cfg["threads"] = args.threads
    return ExperimentConfig.from_dict(cfg)


def _point_config(config: ExperimentConfig, fom: float, rate: float) -> ExperimentConfig:
    from dataclasses import replace

    return replace(config, fom_grid=(fom,), rate_grid=(rate,))


def _emit(obj) -> None:
    json.dump(obj, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


def _cmd_sweep(args) -> int:
    config = _build_config(args)
    out_dir = args.out or config.output_path or "out"
    if args.emit_trials:
        from dataclasses import replace

        config = replace(config, emit_trials=True)
    table = run_sweep(config, progress=_say)
    table.write(out_dir)
    n_bad = sum(1 for r in table.rows if r.error) + len(table.errors)
    _say(f"wrote {len(table.rows)} rows to {out_dir}/sweep.csv")
    print(out_dir)
    return EXIT_PARTIAL if n_bad else EXIT_OK


def _cmd_bounds(args) -> int:
    config = _point_config(_build_config(args), args.fom, args.rate)
    pre = _precompute_fom(config, 0)
    rp = _precompute_rate(config, pre, args.rate)
    _emit(
        {
            "fom": args.fom,
            "N": pre.N,
            "b_per_scalar": args.rate,
            "delta_k": pre.delta_k,
            "delta_2k": pre.delta_2k,
            "a": rp.margin_a,
            "beta": rp.beta,
            "alpha": rp.alpha,
            "applicable": rp.bound_bpdn is not None,
            "error_bound_bpdn": None if rp.bound_bpdn is None else rp.bound_bpdn.error_bound,
            "srnr_bound_bpdn_db": None
            if rp.bound_bpdn is None
            else 10 * math.log10(rp.bound_bpdn.srnr_bound),
            "error_bound_oracle": rp.bound_oracle.error_bound,
            "srnr_bound_oracle_db": 10 * math.log10(rp.bound_oracle.srnr_bound),
            "confidence": rp.bound_oracle.confidence,
            "epsilon_solver": rp.epsilon_solver,
        }
    )
    return EXIT_OK


def _cmd_rip(args) -> int:
    config = _build_config(args)
    N = config.n_for(args.fom)
    A = sample_sensing_matrix(N, config.model.M, (config.seed, 1, 0))
    k = args.k if args.k is not None else config.model.K
    probes = args.probes if args.probes is not None else config.rip_probes
    est = estimate_block_rip(
        A, config.model.Q, config.model.R, k, probes, (config.seed, 2, 0, k)
    )
    _emit(
        {
            "fom": args.fom,
            "N": N,
            "k": est.k,
            "delta": est.delta,
            "trials": est.trials,
            "sided": est.sided,
            "within_guarantee_range": est.delta < math.sqrt(2) - 1,
        }
    )
    return EXIT_OK


def _cmd_alloc(args) -> int:
    config = _point_config(_build_config(args), args.fom, args.rate)
    pre = _precompute_fom(config, 0)
    alloc = optimal_allocation(list(pre.masses), args.rate * config.model.M, pre.N)
    mom = noise_moments(
        alloc.delta2, alloc.delta4, pre.N, config.channel.sigma_m2, config.channel.sigma_c2
    )
    out = alloc.to_json_dict()
    out.update(
        {
            "fom": args.fom,
            "N": pre.N,
            "noise_mean": mom.mean,
            "noise_variance": mom.variance,
        }
    )
    _emit(out)
    return EXIT_OK


def _cmd_solve_one(args) -> int:
    config = _point_config(_build_config(args), args.fom, args.rate)
    pre = _precompute_fom(config, 0)
    rp = _precompute_rate(config, pre, args.rate)
    rec = run_trial(
        config,
        args.fom,
        args.rate,
        (config.seed, 3, 0, args.trial),
        pre.A,
        rp,
        trial_index=args.trial,
    )
    _emit(
        {
            "fom": rec.fom,
            "b_per_scalar": rec.b,
            "trial_index": rec.trial_index,
            "err_bpdn": rec.err_bpdn,
            "err_oracle": rec.err_oracle,
            "srnr_bpdn_db": 10 * math.log10(rec.srnr_bpdn),
            "srnr_oracle_db": 10 * math.log10(rec.srnr_oracle),
            "feasible_truth": rec.feasible_truth,
            "converged": rec.converged,
            "feasible_result": rec.feasible_result,
            "epsilon_solver": rp.epsilon_solver,
            "solver_backend": SOLVER_BACKEND,
        }
    )
    return EXIT_OK


def _validate_checks(corrupt: bool):
    """Yield (name, ok, detail) tuples for the self-check suite."""
    fudge = 1e-3 if corrupt else 0.0

    v21 = shape_constant(2, 1) + fudge
    want = (math.pi / 2.0) * math.sqrt(3.0)
    yield ("shape_constant(2,1)", abs(v21 - want) < 1e-12, f"{v21} vs {want}")
    yield ("shape_constant(2,2)", abs(shape_constant(2, 2) - 4.0) < 1e-12, "4")
    yield ("shape_constant(4,2)", abs(shape_constant(4, 2) - 36.0) < 1e-12, "36")

    eps = epsilon_radius(180, 1.0)
    yield ("epsilon_radius(180,1)", abs(eps - math.sqrt(18.0)) < 1e-12, f"{eps}")

    a = cantelli_margin(2.5, 0.5)
    p = exceedance_probability(a, 2.5)
    yield ("cantelli round trip", abs(p - 0.5) < 1e-12, f"{p}")

    rng = make_rng(11)
    from .gmvq import component_distortion, mixture_logdets
    from .model import SourceModel

    model = SourceModel.create(Q=4, R=10, K=1, rho2=1.0, theta2=1e-12)
    A = sample_sensing_matrix(20, 40, 11)
    masses = mixture_logdets(A, model, 0.0)
    alloc = optimal_allocation(masses, 40.0, 20)
    # Cell-budget optimality: each component's weighted marginal distortion
    # per codebook cell must equalize, i.e. w * Delta(b) * 2^-b is flat.
    marg = [
        m.weight * component_distortion(bb, 2, m.log_det, 20) * 2.0**-bb
        for m, bb in zip(masses, alloc.bits)
    ]
    spread = (max(marg) - min(marg)) / max(marg)
    yield ("allocation equalization", spread < 1e-9, f"relative spread {spread:.2e}")

    x = sample_source(model, rng)
    y = A.entries @ x.values
    rec = solve_block_bpdn(A, y, model.Q, BpdnOptions(epsilon=0.0))
    err = float(np.linalg.norm(rec.x_hat - x.values))
    yield ("noiseless exact recovery", err < 1e-4, f"error {err:.2e}")

    noise = rng.standard_normal(A.N)
    noise *= 0.05 / np.linalg.norm(noise)
    y_n = y + noise
    rec_n = solve_block_bpdn(A, y_n, model.Q, BpdnOptions(epsilon=0.05))
    kkt = certify_kkt(A, y_n, model.Q, 0.05, rec_n.x_hat, tol=1e-3)
    yield ("first-order certificate", kkt.ok, f"lambda {kkt.lambda_hat:.3g}")

    r1 = _seeded_draw(model, A, 5)
    r2 = _seeded_draw(model, A, 5)
    yield ("seeded determinism", r1 == r2, "bit-identical repeat")


def _seeded_draw(model, A, seed) -> tuple:
    """Tiny deterministic draw used by the validate command."""
    rng = make_rng((seed, 3, 0, 0))
    x = sample_source(model, rng)
    u = rng.uniform(-0.5, 0.5, A.N)
    return (float(x.values.sum()), float(u.sum()), x.component_index)


def _cmd_validate(args) -> int:
    failures = 0
    for name, ok, detail in _validate_checks(args.corrupt_constant):
        if ok:
            print(f"ok - {name}")
        else:
            failures += 1
            print(f"FAIL - {name}: {detail}")
    if failures:
        print(f"{failures} check(s) failed")
        return EXIT_VALIDATION
    print("all checks passed")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blockcs",
        description="Quantized block-sparse compressed sensing experiments.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="run the full (fom, rate) grid sweep")
    _add_config_flags(p)
    p.add_argument("--out", metavar="DIR", help="output directory (default: out)")
    p.add_argument(
        "--emit-trials", action="store_true", help="also write per-trial records"
    )
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("bounds", help="bound row for one (fom, rate) point")
    _add_config_flags(p)
    p.add_argument("--fom", type=float, required=True)
    p.add_argument("--rate", type=float, required=True)
    p.set_defaults(func=_cmd_bounds)

    p = sub.add_parser("rip", help="estimate the block-isometry constant")
    _add_config_flags(p)
    p.add_argument("--fom", type=float, required=True)
    p.add_argument("--k", type=int, help="block sparsity to probe (default: model K)")
    p.add_argument("--probes", type=int, help="number of random probes")
    p.set_defaults(func=_cmd_rip)

    p = sub.add_parser("alloc", help="rate allocation for one (fom, rate) point")
    _add_config_flags(p)
    p.add_argument("--fom", type=float, required=True)
    p.add_argument("--rate", type=float, required=True)
    p.set_defaults(func=_cmd_alloc)

    p = sub.add_parser("solve-one", help="run a single end-to-end trial")
    _add_config_flags(p)
    p.add_argument("--fom", type=float, required=True)
    p.add_argument("--rate", type=float, required=True)
    p.add_argument("--trial", type=int, default=0)
    p.set_defaults(func=_cmd_solve_one)

    p = sub.add_parser("validate", help="run fast internal self-checks")
    p.add_argument(
        "--corrupt-constant",
        action="store_true",
        help=argparse.SUPPRESS,  # test hook: force a failing check
    )
    p.set_defaults(func=_cmd_validate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        _say(f"config error: {exc}")
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        _say(f"config error: {exc}")
        return EXIT_CONFIG
    except json.JSONDecodeError as exc:
        _say(f"config error: invalid JSON: {exc}")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
