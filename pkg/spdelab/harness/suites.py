"""Desk-scale acceptance suites with pinned seeds; `spdelab verify <suite>` runs them."""

import logging
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Optional

from spdelab.core.errors import SpdeLabError

from .config import ExperimentConfig
from .records import ResultRecord, inputs_hash, write_record
from .runner import run_experiment

logger = logging.getLogger(__name__)

SUITE_SEED = 20240601
X_OFF_ORIGIN = [0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]


def _config(name: str, experiment: dict[str, Any], run: Optional[dict[str, Any]] = None, nonlinearity: Optional[dict[str, Any]] = None) -> ExperimentConfig:
    return ExperimentConfig.model_validate(
        {
            "name": name,
            "model": {"n": 8, "q_eigs": "k^-2", "beta": 1.0, "rho": 0.5},
            "nonlinearity": nonlinearity or {"name": "zero"},
            "run": {"seed": SUITE_SEED, **(run or {})},
            "experiment": experiment,
        }
    )


def bounds_config() -> ExperimentConfig:
    return _config(
        "bounds",
        {"kind": "bounds", "t_end": 2.0, "dt": 1e-3, "orders": [1, 2, 3], "tol_dt": 0.02, "levels": 3},
        run={"n_paths": 1000},
        nonlinearity={"name": "radial-direction", "target_M": 0.1},
    )


def martingale_config() -> ExperimentConfig:
    return _config("martingale", {"kind": "martingale", "t_end": 1.0, "dt": 1e-2}, run={"n_paths": 10_000})


def bel_config() -> ExperimentConfig:
    return _config(
        "bel-oracle",
        {"kind": "bel-oracle", "field": "sin:omega=1", "x0": X_OFF_ORIGIN, "times": [0.1, 0.5, 1.0], "n_paths_d3": 10_000},
        run={"n_paths": 100_000, "dt": 1e-2},
    )


def decay_configs() -> list[ExperimentConfig]:
    grid = {"t_min": 1e-3, "t_max": 1e-1, "n_times": 9}
    run = {"n_paths": 3000}
    # the nested second-derivative estimator runs on a thinner probe set
    nested = {"n_random": 4, "n_directions": 2}
    return [
        _config("decay-buc-i1", {"kind": "decay", "field": "ramp:width=0.001", "order": 1, "method": "bel", "tolerance": 0.15, **grid}, run=run),
        _config(
            "decay-buc-i2",
            {"kind": "decay", "field": "ramp:width=0.001", "order": 2, "method": "bel", "tolerance": 0.2, **nested, **grid},
            run={**run, "n_inner": 8},
        ),
        _config("decay-xfrak-i1", {"kind": "decay", "field": "sin:omega=1", "order": 1, "method": "smooth", "tolerance": 0.1, **grid}, run=run),
        _config("decay-holder-i1", {"kind": "decay", "field": "holder:alpha=0.5", "order": 1, "method": "bel", "tolerance": 0.15, **grid}, run=run),
    ]


def envelope_config() -> ExperimentConfig:
    return _config("envelope", {"kind": "envelope", "field": "holder:alpha=0.5", "eps_min": 1e-3, "eps_max": 1e-1, "n_eps": 5})


def interp_config() -> ExperimentConfig:
    return _config("interp", {"kind": "interp", "field": "holder:alpha=0.5", "alpha": 0.5, "r_min_exp": -6, "r_max_exp": 0})


def resolvent_config() -> ExperimentConfig:
    return _config("resolvent", {"kind": "resolvent", "field": "sin:omega=1", "lam": 3.0, "x0": X_OFF_ORIGIN, "taus": [0.25, 0.5, 1.0]}, run={"n_paths": 4000})


def schauder_configs() -> list[ExperimentConfig]:
    # BEL maps on dyadic scales 2^-1..2^-4
    scales = {"method": "bel", "n_nodes": 8, "finest": 4, "coarsest": 1}
    return [
        _config(
            "schauder",
            {"kind": "schauder", "field": "holder:alpha=0.5", "lam": 2.0, "control_alpha": 0.9, **scales},
            run={"n_paths": 2000, "n_inner": 8, "dt": 2e-2},
        ),
        _config("zygmund", {"kind": "zygmund", "field": "ramp:width=0.001", "lam": 2.0, **scales}, run={"n_paths": 4000, "dt": 2e-2}),
    ]


def schvar_config() -> ExperimentConfig:
    return _config("schvar", {"kind": "schvar", "field": "sin:omega=1", "lam": 2.0, "delta": 0.05}, run={"n_paths": 2000})


SUITES: dict[str, Callable[[], list[ExperimentConfig]]] = {
    "bounds": lambda: [bounds_config(), *schauder_configs()],
    "martingale": lambda: [martingale_config()],
    "bel": lambda: [bel_config()],
    "decay": decay_configs,
    "envelope": lambda: [envelope_config()],
    "interp": lambda: [interp_config()],
    "resolvent": lambda: [resolvent_config()],
    "schauder": schauder_configs,
    "schvar": lambda: [schvar_config()],
}
SUITE_NAMES = (*SUITES, "determinism", "all")


def with_seed(config: ExperimentConfig, seed: Optional[int]) -> ExperimentConfig:
    if seed is None:
        return config
    return config.model_copy(update={"run": config.run.model_copy(update={"seed": seed})})


def determinism_record(seed: Optional[int], threads: int, out_root: Optional[Path]) -> ResultRecord:
    """The bounds run at one thread and at `threads` threads must give byte-identical results.csv."""
    config = with_seed(bounds_config(), seed)
    many = max(2, threads, os.cpu_count() or 1)
    with tempfile.TemporaryDirectory() as tmp:
        blobs = []
        for n in (1, many):
            run_experiment(config, threads=n, out_root=Path(tmp) / f"threads-{n}")
            blobs.append((Path(tmp) / f"threads-{n}" / config.name / "results.csv").read_bytes())
    record = ResultRecord(
        experiment="determinism",
        kind="determinism",
        config_hash=config.config_hash(),
        inputs_hash=inputs_hash(config.resolved()),
        seed=config.run.seed,
        threads=many,
        config=config.resolved(),
    )
    record.add_metric("csv_identical", float(blobs[0] == blobs[1]), target=1.0, comparison="min")
    record.add_detail("thread_counts", [1, many])
    if out_root is not None:
        write_record(record, Path(out_root) / "determinism")
    return record


@dataclass
class SuiteRow:
    suite: str
    experiment: str
    passed: bool
    failures: list[str]
    wall_clock: float
    error: Optional[str] = None


def run_suite(name: str, seed: Optional[int] = None, threads: int = 1, out_root: Optional[Path] = None) -> list[SuiteRow]:
    """Run one suite (or every suite for "all"); numeric errors become failed rows."""
    if name == "all":
        return [row for suite in (*SUITES, "determinism") for row in run_suite(suite, seed, threads, out_root)]
    if name == "determinism":
        record = determinism_record(seed, threads, out_root)
        return [SuiteRow(name, record.experiment, record.passed, [m.name for m in record.failures], record.wall_clock)]

    rows = []
    for config in SUITES[name]():
        config = with_seed(config, seed)
        try:
            record = run_experiment(config, threads=threads, out_root=None if out_root is None else Path(out_root) / name)
        except SpdeLabError as e:
            logger.error(f"{config.name} aborted: {e}", extra={"handler": "run_suite", "op": name})
            rows.append(SuiteRow(name, config.name, False, [], 0.0, error=f"{type(e).__name__}: {e}"))
            continue
        rows.append(SuiteRow(name, config.name, record.passed, [m.name for m in record.failures], record.wall_clock))
    return rows


def format_table(rows: list[SuiteRow]) -> str:
    header = f"{'suite':<12} {'experiment':<18} {'verdict':<8} {'seconds':>8}  failing"
    lines = [header, "-" * len(header)]
    for row in rows:
        failing = row.error or ", ".join(row.failures)
        lines.append(f"{row.suite:<12} {row.experiment:<18} {'PASS' if row.passed else 'FAIL':<8} {row.wall_clock:>8.1f}  {failing}")
    return "\n".join(lines)
