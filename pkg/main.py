import argparse
import asyncio
import logging
import os
import sys
from typing import List, Optional

import numpy as np
from dotenv import load_dotenv

from src.config import ModelConfig, config_to_dict, load_config
from src.dynamics import StepControl, hamiltonian_flow, scattering_extract, spectrum_drift
from src.errors import (
    CollisionError,
    ConfigError,
    HorizonError,
    IndexRangeError,
    SingularConfigurationError,
    StiffnessError,
)
from src.phase_space import PhasePoint, make_generator, sample_points
from src.poisson import kappa_suite
from src.registry import known_ids, parse_observable
from src.report import write_json
from src.trajectory_io import write_trajectory
from src.verification import run_verification

MAX_PARTICLES = 8

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2

DEFAULT_OUT = {
    "verify": "verification_report.json",
    "calibrate": "kappa_calibration.json",
    "evolve": "trajectory.csv",
    "scatter": "scattering.json",
}


def parse_vector(text: str) -> List[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Verification laboratory for the rational Ruijsenaars-Schneider model.")
    subparsers = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, default=None, help="Flat JSON configuration file.")
    common.add_argument("--seed", type=int, default=None, help="Seed of the PCG64 sampling generator.")
    common.add_argument("--jobs", type=int, default=None, help="Maximum number of suites running at once.")
    common.add_argument("--out", type=str, default=None, help="Output file.")
    common.add_argument("--convention", choices=["half", "literal"], default=None, help="Momentum exponent convention.")
    common.add_argument("--samples", type=int, default=None, help="Sampled points per suite.")

    subparsers.add_parser("verify", parents=[common], help="Run every verification suite and write a JSON report.")
    subparsers.add_parser("calibrate", parents=[common], help="Fit the bracket constant kappa and write it as JSON.")

    start = argparse.ArgumentParser(add_help=False)
    start.add_argument("--q", type=parse_vector, default=None, help="Start positions, e.g. --q=1,-1 (sampled if omitted).")
    start.add_argument("--p", type=parse_vector, default=None, help="Start momenta, e.g. --p=0.4,-0.4.")
    start.add_argument("--t-end", type=float, default=None, help="Final time.")
    start.add_argument("--n-out", type=int, default=1001, help="Number of output samples.")

    evolve_parser = subparsers.add_parser("evolve", parents=[common, start], help="Integrate the flow of an observable to CSV.")
    evolve_parser.add_argument("--observable", type=str, default="H", help="Observable id, e.g. H, I(2), C(2,1).")
    subparsers.add_parser("scatter", parents=[common, start], help="Extract asymptotic momenta of the h-flow as JSON.")
    return parser


def _env_int(name: str) -> Optional[int]:
    value = os.getenv(name)
    if not value:
        return None
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"{name} must be an integer, got {value!r}")


def resolve_config(args) -> ModelConfig:
    """CLI flags win over the environment, which wins over the file."""
    seed = args.seed if args.seed is not None else _env_int("RS_LAB_SEED")
    cfg = load_config(
        args.config or os.getenv("RS_LAB_CONFIG"),
        seed=seed,
        convention=args.convention,
        samples=args.samples,
    )
    if cfg.n > MAX_PARTICLES:
        raise ConfigError(f"invariant violated: n <= {MAX_PARTICLES} for the command line (got n={cfg.n})")
    return cfg


def resolve_jobs(args) -> int:
    jobs = args.jobs if args.jobs is not None else (_env_int("RS_LAB_JOBS") or 1)
    if jobs < 1:
        raise ConfigError(f"invariant violated: jobs >= 1 (got {jobs})")
    return jobs


def resolve_start(args, cfg: ModelConfig) -> PhasePoint:
    if args.q is None and args.p is None:
        return sample_points(cfg, 1, make_generator(cfg.seed))[0]
    if args.q is None or args.p is None:
        raise ConfigError("--q and --p must be given together")
    if len(args.q) != cfg.n or len(args.p) != cfg.n:
        raise ConfigError(f"--q and --p need n={cfg.n} entries each, got {len(args.q)} and {len(args.p)}")
    return PhasePoint(np.array(args.q), np.array(args.p)).validate(cfg)


async def run_verify(cfg: ModelConfig, jobs: int, out: str) -> int:
    report = await run_verification(cfg, jobs)
    write_json(out, report.to_dict())
    return EXIT_OK if report.passed else EXIT_FAILED


async def run_calibrate(cfg: ModelConfig, out: str) -> int:
    record, fit = await asyncio.to_thread(kappa_suite, cfg)
    write_json(out, {
        "config": config_to_dict(cfg),
        "convention": cfg.convention.value,
        "kappa": fit.kappa,
        "fit_residual": fit.residual,
        "rows": fit.rows,
        "expected": fit.expected,
        "findings": record.findings,
        "passed": record.passed,
    })
    logging.info(f"kappa = {fit.kappa:.10f} (expected {fit.expected:.1f})")
    return EXIT_OK if record.passed else EXIT_FAILED


async def run_evolve(cfg: ModelConfig, observable: str, start: PhasePoint, t_end: float, n_out: int, out: str) -> int:
    try:
        obs = parse_observable(observable, cfg)
    except IndexRangeError:
        logging.error(f"Valid observable ids for n={cfg.n}: {', '.join(known_ids(cfg))}")
        raise
    trajectory = await asyncio.to_thread(hamiltonian_flow, obs, start, cfg, t_end, StepControl(n_out=n_out))
    write_trajectory(out, trajectory)
    logging.info(f"Spectrum drift along the {obs.label} flow: {spectrum_drift(trajectory, cfg):.3e}")
    return EXIT_OK


async def run_scatter(cfg: ModelConfig, start: PhasePoint, t_end: float, n_out: int, out: str) -> int:
    result = await asyncio.to_thread(scattering_extract, start, cfg, t_end, StepControl(n_out=n_out))
    record = result.to_dict()
    record["start"] = {"q": start.q, "p": start.p}
    record["t_end"] = t_end
    write_json(out, record)
    return EXIT_OK if result.passed else EXIT_FAILED


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    logging.basicConfig(
        level=getattr(logging, os.getenv("RS_LAB_LOG_LEVEL", "INFO").upper(), logging.INFO),
        format='%(asctime)s - %(levelname)s - %(message)s',
    )
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK

    out = args.out or DEFAULT_OUT[args.command]
    try:
        cfg = resolve_config(args)
        if args.command == "verify":
            return asyncio.run(run_verify(cfg, resolve_jobs(args), out))
        if args.command == "calibrate":
            return asyncio.run(run_calibrate(cfg, out))
        start = resolve_start(args, cfg)
        t_end = args.t_end if args.t_end is not None else (50.0 if args.command == "evolve" else 200.0)
        if args.command == "evolve":
            return asyncio.run(run_evolve(cfg, args.observable, start, t_end, args.n_out, out))
        return asyncio.run(run_scatter(cfg, start, t_end, args.n_out, out))
    except (ConfigError, IndexRangeError, SingularConfigurationError) as e:
        logging.error(str(e))
        return EXIT_USAGE
    except HorizonError as e:
        logging.error(f"{e} (fit residual {e.residual:.3e}); rerun with a larger --t-end")
        write_json(out, {"error": str(e), "fit_residual": e.residual})
        return EXIT_FAILED
    except (CollisionError, StiffnessError, RuntimeError, ArithmeticError) as e:
        logging.error(f"{type(e).__name__}: {e}")
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
