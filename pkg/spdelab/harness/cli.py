#!/usr/bin/env python3
"""
spdelab command line.

Runs one configured experiment, a named acceptance suite, or one of the equation shortcuts,
and writes results.csv / results.json / plotdata under the output directory.

Usage:
    spdelab run --config configs/bounds.toml
    spdelab verify bounds --threads 4
    spdelab resolvent --field sin:omega=1 --lambda 3
    spdelab catalog

Exit codes: 0 when every declared check passes, 1 on a failing check or a numerical error,
2 on an invalid configuration or argument.
"""

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Any, Optional

import numpy as np
from dotenv import load_dotenv
from pydantic import ValidationError

from spdelab.core.errors import ArgumentError, ConfigurationError, SpdeLabError
from spdelab.core.fields.catalog import builtin_fields
from spdelab.core.nonlinearity import NONLINEARITIES, build_nonlinearity
from spdelab.core.spectral import SpectralModel

from .config import LOG_LEVEL_ENV, ExperimentConfig, load_config, thread_budget
from .records import ResultRecord
from .runner import run_experiment
from .suites import SUITE_NAMES, SUITE_SEED, format_table, run_suite, with_seed

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_INVALID = 2


def _configure_logging(level: Optional[str]) -> None:
    load_dotenv()
    name = (level or os.getenv(LOG_LEVEL_ENV) or "INFO").upper()
    logging.basicConfig(level=getattr(logging, name, logging.INFO), format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def _revalidate(config: ExperimentConfig, experiment: dict[str, Any]) -> ExperimentConfig:
    """Overridden experiment fields go through the schema again."""
    data = config.model_dump(mode="json")
    data["experiment"].update(experiment)
    return ExperimentConfig.model_validate(data)


def _load_points(path: Optional[str]) -> Optional[list[list[float]]]:
    if path is None:
        return None
    try:
        points = np.loadtxt(path, delimiter=",", ndmin=2)
    except (OSError, ValueError) as e:
        raise ConfigurationError(f"cannot read probe points from {path}: {e}") from e
    return points.tolist()


def _report(record: ResultRecord, out_dir: Path) -> int:
    print(f"{record.experiment}: {len(record.metrics)} metrics, {record.wall_clock:.1f}s -> {out_dir}")
    for warning in record.warnings:
        print(f"  warning: {warning}")
    if record.passed:
        print("PASS")
        return EXIT_OK
    print("FAIL")
    for m in record.failures:
        print(f"  {m.name}: value={m.value!r} target={m.target!r} tolerance={m.tolerance!r} ({m.comparison})")
    return EXIT_FAILED


def _execute(config: ExperimentConfig, args: argparse.Namespace) -> int:
    config = with_seed(config, args.seed)
    threads = thread_budget(args.threads, config)
    out_root = Path(args.out or config.output.directory)
    record = run_experiment(config, threads=threads, out_root=out_root, dump_paths=getattr(args, "dump_paths", None))
    return _report(record, out_root / config.name)


def cmd_run(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    envelope = {
        key: value
        for key, value in (
            ("epsilon", args.epsilon),
            ("search_radius_inner", args.radius_inner),
            ("search_radius_outer", args.radius_outer),
            ("subspace_dims", args.subspace_dims),
        )
        if value is not None
    }
    if envelope:
        if config.experiment.kind != "envelope":
            raise ArgumentError(f"envelope flags {sorted(envelope)} given for a {config.experiment.kind} experiment")
        config = _revalidate(config, experiment=envelope)
    return _execute(config, args)


def _shortcut(name: str, experiment: dict[str, Any], args: argparse.Namespace, **run_defaults: Any) -> ExperimentConfig:
    run = {"seed": SUITE_SEED, **run_defaults}
    if args.n_paths is not None:
        run["n_paths"] = args.n_paths
    return ExperimentConfig.model_validate({"name": name, "run": run, "experiment": experiment})


def cmd_resolvent(args: argparse.Namespace) -> int:
    points = _load_points(args.probe_file)
    if args.alpha is None:
        experiment = {"kind": "resolvent", "field": args.field, "lam": args.lam, "points": points}
        return _execute(_shortcut("resolvent", experiment, args), args)
    # with a Hölder exponent the shortcut becomes the Schauder probe of u = R(lambda)f
    experiment = {"kind": "schauder", "field": args.field, "lam": args.lam, "alpha": args.alpha, "probe_points": points, "n_nodes": 8}
    return _execute(_shortcut("resolvent-schauder", experiment, args, n_paths=2000, n_inner=8, dt=2e-2), args)


def cmd_evolve(args: argparse.Namespace) -> int:
    experiment = {
        "kind": "evolve",
        "field": args.field,
        "t": args.t,
        "source": args.source,
        "points": _load_points(args.probe_file),
        "probe": args.alpha is not None,
        "alpha": args.alpha,
    }
    return _execute(_shortcut("evolve", experiment, args), args)


def cmd_schvar(args: argparse.Namespace) -> int:
    experiment = {"kind": "schvar", "field": args.field, "lam": args.lam, "delta": args.delta}
    return _execute(_shortcut("schvar", experiment, args), args)


def cmd_verify(args: argparse.Namespace) -> int:
    threads = thread_budget(args.threads)
    rows = run_suite(args.name, seed=args.seed, threads=threads, out_root=Path(args.out) if args.out else None)
    print(format_table(rows))
    failed = [row for row in rows if not row.passed]
    print(f"\n{len(rows) - len(failed)}/{len(rows)} experiments passed")
    return EXIT_OK if not failed else EXIT_FAILED


def cmd_catalog(args: argparse.Namespace) -> int:
    model = SpectralModel.create_default(n=args.n)
    print(f"Fields (model n={model.n}):")
    print(f"  {'name':<22} {'class':<7} {'sup':>8} {'seminorm':>9}  grad_R")
    for name, f in builtin_fields(model).items():
        sup = "-" if f.sup_bound is None else f"{f.sup_bound:.4g}"
        seminorm = "-" if f.holder_seminorm is None else f"{f.holder_seminorm:.4g}"
        print(f"  {name:<22} {f.declared_class.value:<7} {sup:>8} {seminorm:>9}  {'yes' if f.grad_R is not None else 'no'}")
    print("\nNonlinearities (unit amplitude):")
    for name in NONLINEARITIES:
        print(f"  {name:<22} M={build_nonlinearity(name).M:.6g}")
    return EXIT_OK


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, help="Override the master seed")
    parser.add_argument("--threads", type=int, help="Thread budget (default: SPDELAB_THREADS, then the config, then all cores)")
    parser.add_argument("--out", type=str, help="Output root directory (default: the config's output.directory)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spdelab",
        description="Monte-Carlo laboratory for semilinear SPDEs driven by additive noise",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  spdelab run --config configs/bounds.toml
  spdelab run --config configs/envelope.toml --epsilon 0.01 --subspace-dims 2
  spdelab run --config results/bounds/results.json --seed 7
  spdelab verify all --threads 8
  spdelab resolvent --field holder:alpha=0.5 --lambda 2 --alpha 0.5
  spdelab evolve --field sin:omega=1 --t 0.5 --probe-file points.csv
  spdelab schvar --lambda 2 --delta 0.05
  spdelab catalog
        """,
    )
    parser.add_argument("--log-level", type=str, help="Logging level (default: SPDELAB_LOG_LEVEL or INFO)")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Run one experiment from a TOML config or a previous results.json")
    run.add_argument("--config", required=True, help="Path to the experiment config")
    run.add_argument("--dump-paths", type=int, help="Write the first N simulated paths to paths.csv")
    _add_common(run)
    envelope = run.add_argument_group("envelope", "Overrides for envelope experiments")
    envelope.add_argument("--epsilon", type=float, help="Single epsilon at which f_eps(x0) is reported")
    envelope.add_argument("--radius-inner", type=float, help="Search radius of the inner infimum")
    envelope.add_argument("--radius-outer", type=float, help="Search radius of the outer supremum")
    envelope.add_argument("--subspace-dims", type=int, help="Number of H_R directions searched")
    run.set_defaults(handler=cmd_run)

    verify = sub.add_parser("verify", help="Run an acceptance suite at desk scale with pinned seeds")
    verify.add_argument("name", choices=SUITE_NAMES, help="Suite name")
    _add_common(verify)
    verify.set_defaults(handler=cmd_verify)

    catalog = sub.add_parser("catalog", help="List built-in fields and nonlinearities")
    catalog.add_argument("--n", type=int, default=8, help="Truncation dimension of the listing model")
    catalog.set_defaults(handler=cmd_catalog)

    resolvent = sub.add_parser("resolvent", help="u = R(lambda)f at the origin, or its Schauder probe with --alpha")
    resolvent.add_argument("--field", default="sin:omega=1", help="Field spec, e.g. holder:alpha=0.5")
    resolvent.add_argument("--lambda", dest="lam", type=float, default=2.0, help="Resolvent parameter (> 0)")
    resolvent.add_argument("--alpha", type=float, help="Hölder exponent; switches to the Schauder probe")
    resolvent.add_argument("--probe-file", type=str, help="CSV of extra states, one per row")
    resolvent.add_argument("--n-paths", type=int, help="Monte-Carlo paths")
    _add_common(resolvent)
    resolvent.set_defaults(handler=cmd_resolvent)

    evolve = sub.add_parser("evolve", help="v(t, x) of the backward problem, optionally with its Schauder probe")
    evolve.add_argument("--field", default="sin:omega=1", help="Terminal field spec")
    evolve.add_argument("--t", type=float, default=0.5, help="Time horizon (> 0)")
    evolve.add_argument("--source", type=float, help="Constant source term")
    evolve.add_argument("--alpha", type=float, help="Hölder exponent; enables the Schauder probe of D^2_R v")
    evolve.add_argument("--probe-file", type=str, help="CSV of extra states, one per row")
    evolve.add_argument("--n-paths", type=int, help="Monte-Carlo paths")
    _add_common(evolve)
    evolve.set_defaults(handler=cmd_evolve)

    schvar = sub.add_parser("schvar", help="Picard fixed point with a small constant drift")
    schvar.add_argument("--field", default="sin:omega=1", help="Right-hand side field spec")
    schvar.add_argument("--lambda", dest="lam", type=float, default=2.0, help="Resolvent parameter (> 0)")
    schvar.add_argument("--delta", type=float, default=0.05, help="Drift size")
    schvar.add_argument("--n-paths", type=int, help="Monte-Carlo paths")
    _add_common(schvar)
    schvar.set_defaults(handler=cmd_schvar)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging(args.log_level)
    try:
        return args.handler(args)
    except ValidationError as e:
        print(f"❌ Invalid configuration ({e.error_count()} errors):")
        for err in e.errors():
            location = ".".join(str(part) for part in err["loc"])
            print(f"  {location}: {err['msg']}")
        return EXIT_INVALID
    except (ConfigurationError, ArgumentError) as e:
        print(f"❌ {type(e).__name__}: {e}")
        return EXIT_INVALID
    except SpdeLabError as e:
        logger.error(f"Run aborted: {e}", extra={"handler": "cli", "op": args.command})
        print(f"❌ {type(e).__name__}: {e}")
        return EXIT_FAILED
    except KeyboardInterrupt:
        print("\n\n❌ Cancelled by user")
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
