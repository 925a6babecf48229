import logging
import time
from pathlib import Path
from typing import Optional

from spdelab.applications.context import RunContext
from spdelab.applications.derivatives import BelOracleExperiment, DecayExperiment
from spdelab.applications.dynamics import BoundsExperiment, MartingaleExperiment
from spdelab.applications.equations import EvolveExperiment, ResolventExperiment, SchauderExperiment, SchvarExperiment, ZygmundExperiment
from spdelab.applications.regularization import EnvelopeExperiment, InterpolationExperiment
from spdelab.core.base import AbstractExperiment
from spdelab.core.spectral import compute_constants

from .config import ExperimentConfig
from .records import ResultRecord, inputs_hash, write_record

logger = logging.getLogger(__name__)

EXPERIMENTS: dict[str, type[AbstractExperiment]] = {
    cls.kind: cls
    for cls in (
        BoundsExperiment,
        MartingaleExperiment,
        BelOracleExperiment,
        DecayExperiment,
        EnvelopeExperiment,
        InterpolationExperiment,
        ResolventExperiment,
        SchauderExperiment,
        ZygmundExperiment,
        EvolveExperiment,
        SchvarExperiment,
    )
}


class _WarningCollector(logging.Handler):
    """Keeps every warning logged under `spdelab` while an experiment runs."""

    def __init__(self):
        super().__init__(level=logging.WARNING)
        self.messages: list[str] = []

    def emit(self, record: logging.LogRecord) -> None:
        self.messages.append(record.getMessage())


def build_context(config: ExperimentConfig, threads: int, out_dir: Optional[Path] = None, dump_paths: int = 0) -> RunContext:
    model = config.model.build()
    G = config.nonlinearity.build()
    return RunContext(
        name=config.name,
        block=config.experiment,
        model=model,
        G=G,
        params=config.run.mc_params(threads),
        threads=threads,
        x0=config.initial_state(model),
        out_dir=out_dir,
        dump_paths=dump_paths,
    )


def run_experiment(config: ExperimentConfig, threads: int = 1, out_root: Optional[Path] = None, dump_paths: Optional[int] = None) -> ResultRecord:
    """Run one configured experiment; with `out_root`, write its files to out_root/<name>/."""
    kind = config.experiment.kind
    out_dir = None if out_root is None else Path(out_root) / config.name
    resolved = config.resolved()
    record = ResultRecord(
        experiment=config.name,
        kind=kind,
        config_hash=config.config_hash(),
        inputs_hash=inputs_hash(resolved),
        seed=config.run.seed,
        threads=threads,
        config=resolved,
    )
    context = build_context(config, threads, out_dir, config.output.dump_paths if dump_paths is None else dump_paths)
    constants = compute_constants(context.model, context.G.M)
    record.add_detail("model", context.model.describe())
    record.add_detail("constants", constants.as_dict())
    record.add_detail("nonlinearity", context.G.describe())

    experiment = EXPERIMENTS[kind](context=context).setup(
        on_metric=record.add_metric,
        on_estimate=record.add_estimate,
        on_series=record.add_series,
        on_detail=record.add_detail,
    )
    collector = _WarningCollector()
    root = logging.getLogger("spdelab")
    root.addHandler(collector)
    logger.info(
        f"Running {kind} experiment {config.name} (seed={config.run.seed}, threads={threads}, zeta_R={constants.zeta_R:.4g})",
        extra={"handler": "run_experiment", "op": kind},
    )
    start = time.perf_counter()
    try:
        experiment.run()
    finally:
        root.removeHandler(collector)
        record.wall_clock = time.perf_counter() - start
        record.warnings = collector.messages

    verdict = "passed" if record.passed else f"failed {[m.name for m in record.failures]}"
    logger.info(f"Experiment {config.name} {verdict} in {record.wall_clock:.1f}s", extra={"handler": "run_experiment", "op": kind})
    if out_dir is not None:
        write_record(record, out_dir, config.output.formats)
    return record
