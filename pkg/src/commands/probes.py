from __future__ import annotations

import argparse
import json
import logging
import math
from dataclasses import replace

import numpy as np

from ..algorithms.mean_estimation import outlier_persistence
from ..algorithms.regression import group_mle_density_probe
from ..algorithms.sgd_reference import NOISE_KINDS, NoisySgdSpec, sgd_bound_check
from ..core.errors import ConfigError
from ..core.rng import PROBE_STREAM, seeded_rng
from ..data.distributions import Regression
from ..harness.probes import dp_demo, lower_bound_probe, lower_bound_threshold
from ..harness.report import SGD_COLUMNS, emit, render_csv
from ..subset.probes import rss_success_probability, rss_vector_success_probability

from .base import CommandBase, CommandContext, add_output_arguments, add_run_arguments, load_run_config

logger = logging.getLogger(__name__)


def _dump(record: dict) -> str:
    return json.dumps(record, indent=2, sort_keys=True) + "\n"


class DensityProbeCommand(CommandBase):
    name = "regress-density-probe"
    help = "Histogram one coordinate of single-group least-squares estimates"

    def add_arguments(self, parser: argparse.ArgumentParser) -> None:
        add_run_arguments(parser, group_size=True)
        parser.add_argument("--trials", type=int, default=100_000)
        parser.add_argument("--coordinate", type=int, default=0, help="0-based coordinate to histogram")
        parser.add_argument("--window", type=float, default=0.25, help="half-width of the histogram around theta_i")
        parser.add_argument("--bins", type=int, default=20)

    def run(self, args: argparse.Namespace, context: CommandContext) -> int:
        cfg = load_run_config(args, context)
        spec = cfg.distribution_for("regression")
        if not isinstance(spec, Regression):
            raise ConfigError(f"the density probe needs a regression distribution, got {spec.variant}")
        if spec.dimension != cfg.d:
            raise ConfigError(f"distribution has dimension {spec.dimension}, config has d={cfg.d}")
        report = group_mle_density_probe(
            spec, cfg.group_size, args.coordinate, args.trials,
            seeded_rng(cfg.seed, PROBE_STREAM), window=args.window, bins=args.bins,
        )
        rows = [
            (lo, hi, density)
            for lo, hi, density in zip(report.edges, report.edges[1:], report.densities)
        ]
        emit(render_csv(("bin_lo", "bin_hi", "density"), rows), args.out)
        if args.json_out is not None:
            emit(_dump(report.to_dict()), args.json_out)
        return 0


class SgdCheckCommand(CommandBase):
    name = "sgd-check"
    help = "Average noisy-SGD losses over seeds and compare with 7*Gamma^2/(lambda^2 t)"

    def add_arguments(self, parser: argparse.ArgumentParser) -> None:
        parser.add_argument("--d", type=int, default=1)
        parser.add_argument("--T", type=int, default=10_000)
        parser.add_argument("--lam", type=float, default=1.0, help="strong-convexity modulus")
        parser.add_argument(
            "--Gamma", type=float, default=math.sqrt(2.0),
            help="gradient second-moment bound: E|g|^2 <= Gamma^2 while lam*|w - theta| <= Gamma",
        )
        parser.add_argument("--noise", choices=NOISE_KINDS, default="adversarial")
        parser.add_argument(
            "--noise-scale", type=float, default=None,
            help="RMS of the injected noise (default: the largest in-budget value)",
        )
        parser.add_argument("--budget-violating", action="store_true", help="allow a noise scale above the budget")
        parser.add_argument("--eta-scale", type=float, default=1.0)
        parser.add_argument("--start", type=float, default=0.0, help="w0 = theta + start in every coordinate")
        parser.add_argument("--seeds", type=int, default=200)
        parser.add_argument("--seed", type=int, default=0)
        add_output_arguments(parser)

    def run(self, args: argparse.Namespace, context: CommandContext) -> int:
        theta = np.zeros(args.d)
        spec = NoisySgdSpec(
            theta=theta,
            lam=args.lam,
            Gamma=args.Gamma,
            w0=theta + args.start,
            T=args.T,
            eta_scale=args.eta_scale,
            budget_violating=args.budget_violating,
        )
        if args.noise != "zero":
            scale = spec.noise_budget if args.noise_scale is None else args.noise_scale
            spec = replace(spec, noise=args.noise, noise_scale=scale)
        report = sgd_bound_check(spec, args.seeds, base_seed=args.seed)
        emit(render_csv(SGD_COLUMNS, report.rows()), args.out)
        if args.json_out is not None:
            emit(_dump({"seeds": report.seeds, "holds": report.holds, "first_violation": report.first_violation}),
                 args.json_out)
        if not report.holds and not args.budget_violating:
            logger.error("Mean loss exceeds the bound at t=%d", report.first_violation)
            return 1
        return 0


class RssProbeCommand(CommandBase):
    name = "rss-probe"
    help = "Probability that some subset of n random values lands near a random target"

    def add_arguments(self, parser: argparse.ArgumentParser) -> None:
        parser.add_argument("--n", type=int, nargs="+", default=[10, 15, 20, 25])
        parser.add_argument("--d", type=int, default=1, help="d > 1 switches to subset averages of Gaussian vectors")
        parser.add_argument("--epsilon", type=float, default=1e-3)
        parser.add_argument("--trials", type=int, default=500)
        parser.add_argument("--seed", type=int, default=0)
        add_output_arguments(parser)

    def run(self, args: argparse.Namespace, context: CommandContext) -> int:
        rows = []
        for n in args.n:
            rng = seeded_rng(args.seed, PROBE_STREAM)
            try:
                if args.d == 1:
                    probability = rss_success_probability(n, args.epsilon, args.trials, rng)
                else:
                    probability = rss_vector_success_probability(n, args.d, args.epsilon, args.trials, rng)
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
            rows.append((n, args.d, args.epsilon, args.trials, probability))
        emit(render_csv(("n", "d", "epsilon", "trials", "success_probability"), rows), args.out)
        return 0


class LowerBoundProbeCommand(CommandBase):
    name = "lower-bound-probe"
    help = "Failure rate of the best subset average when theta is known"

    def add_arguments(self, parser: argparse.ArgumentParser) -> None:
        parser.add_argument("--d", type=int, default=6)
        parser.add_argument("--m", type=int, nargs="+", default=[8])
        parser.add_argument("--epsilon", type=float, default=1e-4)
        parser.add_argument("--trials", type=int, default=500)
        parser.add_argument("--seed", type=int, default=0)
        add_output_arguments(parser)

    def run(self, args: argparse.Namespace, context: CommandContext) -> int:
        try:
            threshold = lower_bound_threshold(args.d, args.epsilon)
        except ValueError:
            threshold = None
        rows = []
        for m in args.m:
            try:
                failure = lower_bound_probe(args.d, m, args.epsilon, args.trials, seeded_rng(args.seed, PROBE_STREAM))
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
            rows.append((args.d, m, args.epsilon, args.trials, failure, threshold))
        emit(render_csv(("d", "m", "epsilon", "trials", "failure_probability", "threshold"), rows), args.out)
        return 0


class DpDemoCommand(CommandBase):
    name = "dp-demo"
    help = "Show that the retained state reveals which of two neighbouring batches arrived"

    def add_arguments(self, parser: argparse.ArgumentParser) -> None:
        parser.add_argument(
            "--outlier", action="store_true",
            help="print how an outlier in the first batch keeps steering later averages",
        )
        parser.add_argument("--outlier-value", type=float, default=50.0)
        parser.add_argument("--m", type=int, default=12)
        parser.add_argument("--rounds", type=int, default=20)
        parser.add_argument("--seed", type=int, default=0)
        add_output_arguments(parser)

    def run(self, args: argparse.Namespace, context: CommandContext) -> int:
        report = dp_demo()
        record = {"dp_demo": report.to_dict()}
        if args.outlier:
            persistence = outlier_persistence(args.m, args.rounds, args.outlier_value, args.seed)
            record["outlier_persistence"] = persistence.to_dict()
            rows = list(zip(persistence.rounds, persistence.with_outlier, persistence.without_outlier, persistence.gaps))
            table = render_csv(("round", "with_outlier", "without_outlier", "gap"), rows)
        else:
            rows = [
                (
                    " ".join(f"{v:g}" for v in case.batch),
                    case.held_out + 1,
                    case.target,
                    " ".join(f"{v:g}" for v in case.retained),
                )
                for case in report.cases
            ]
            table = render_csv(("batch", "R_index", "target", "retained"), rows)
        emit(table, args.out)
        if args.json_out is not None:
            emit(_dump(record), args.json_out)
        logger.info("Image sets disjoint: %s", report.disjoint)
        return 0


def probe_commands() -> list[CommandBase]:
    return [
        DensityProbeCommand(),
        SgdCheckCommand(),
        RssProbeCommand(),
        LowerBoundProbeCommand(),
        DpDemoCommand(),
    ]
