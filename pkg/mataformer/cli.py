"""Command-line entry point: ``mataformer [--data-dir DIR] <command> ...``

Exit codes: 0 success, 1 usage error, 2 bad data/config/checkpoint or missing
file, 3 numerical failure.
"""
import dataclasses
import json
import logging
import shutil
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional, Sequence

import click

from mataformer.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from mataformer.config import ExperimentConfig, load_config
from mataformer.consts import CONFIG_FILE, EVENTS_FILE, GAMMA_CUTOFF, INTERVALS_FILE
from mataformer.errors import CheckpointError, ConfigError, DataError, NumericalError
from mataformer.events import load_trajectories
from mataformer.horizon import field_rows, report_fields, write_fields_csv
from mataformer.labels import label_cohort, load_intervals, save_label_archive
from mataformer.metrics import beta_sweep, evaluate, parse_sweep
from mataformer.model import MataFormer
from mataformer.synth import generate_cohort, prevalence, write_cohort
from mataformer.training import (
    AblationMode,
    Dataset,
    balanced_patient_split,
    collate,
    fold_indices,
    fold_manifest,
    load_dataset,
    predict,
    run_ablation,
    train,
)

logger = logging.getLogger(__name__)

LABELS_FILE = "labels.npz"


@dataclass
class Context:
    data_dir: Path
    threads: int

    def path(self, given: Optional[Path], name: str) -> Path:
        return given if given is not None else self.data_dir / name

    def config(self, given: Optional[Path]) -> ExperimentConfig:
        if given is None and (self.data_dir / CONFIG_FILE).exists():
            given = self.data_dir / CONFIG_FILE
        return load_config(given)

    def labels(self) -> Optional[Path]:
        archive = self.data_dir / LABELS_FILE
        return archive if archive.exists() else None


def _emit(payload: Any, out: Optional[Path]) -> None:
    text = json.dumps(payload, indent=2)
    if out is None:
        click.echo(text)
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text + "\n", encoding="utf-8")
        logger.info("wrote %s", out)


def _int_list(value: str) -> list[int]:
    try:
        return [int(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise click.BadParameter(f"expected comma separated integers, got {value!r}")


def _with_epochs(config: ExperimentConfig, epochs: Optional[int]) -> ExperimentConfig:
    if epochs is None:
        return config
    return dataclasses.replace(config, train=dataclasses.replace(config.train, max_epochs=epochs)).validate()


PathOption = click.Path(path_type=Path)
config_option = click.option("--config", "config_path", type=PathOption, help="TOML configuration file")


@click.group()
@click.option("--data-dir", type=PathOption, default=Path("."), show_default=True, help="cohort directory")
@click.option(
    "--log-level",
    type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False),
    default="INFO",
    show_default=True,
)
@click.option("--threads", type=click.IntRange(min=1), default=1, show_default=True, help="worker threads")
@click.pass_context
def cli(ctx: click.Context, data_dir: Path, log_level: str, threads: int) -> None:
    logging.basicConfig(
        level=log_level.upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    ctx.obj = Context(data_dir=data_dir, threads=threads)


@cli.command()
@config_option
@click.option("--out-dir", type=PathOption, help="defaults to --data-dir")
@click.option("--seed", type=int, help="overrides synth.seed")
@click.pass_obj
def synth(obj: Context, config_path: Optional[Path], out_dir: Optional[Path], seed: Optional[int]) -> None:
    """Generate a synthetic cohort with planted trigger lags"""
    config = obj.config(config_path)
    synth_config = config.synth if seed is None else dataclasses.replace(config.synth, seed=seed)
    out = out_dir or obj.data_dir
    cohort = generate_cohort(synth_config, threads=obj.threads, separator=config.labels.separator)
    paths = write_cohort(out, cohort)
    if config_path is not None and config_path.resolve() != (out / CONFIG_FILE).resolve():
        shutil.copyfile(config_path, out / CONFIG_FILE)
    labels = label_cohort(cohort.trajectories, cohort.intervals, synth_config.n_risks, config.labels.horizons)
    _emit(
        {
            "patients": len(cohort.trajectories),
            "events": sum(len(t) for t in cohort.trajectories),
            "intervals": len(cohort.intervals),
            "prevalence": prevalence(labels, config.train.beta),
            "files": {name: str(p) for name, p in paths.items()},
        },
        None,
    )


@cli.command()
@config_option
@click.option("--events", type=PathOption)
@click.option("--intervals", type=PathOption)
@click.option("--horizons", help="comma separated hours, e.g. 6,12,24,48")
@click.option("--n-risks", type=click.IntRange(min=1), help="defaults to model.n_risks")
@click.option("--out", type=PathOption, help=f"defaults to <data-dir>/{LABELS_FILE}")
@click.pass_obj
def label(
    obj: Context,
    config_path: Optional[Path],
    events: Optional[Path],
    intervals: Optional[Path],
    horizons: Optional[str],
    n_risks: Optional[int],
    out: Optional[Path],
) -> None:
    """Build the soft-label archive from events and risk intervals"""
    config = obj.config(config_path)
    trajectories = load_trajectories(obj.path(events, EVENTS_FILE), config.labels.categories)
    hours = tuple(_int_list(horizons)) if horizons else config.labels.horizons
    if not hours or any(h <= 0 for h in hours):
        raise click.BadParameter(f"horizons must be positive, got {horizons!r}", param_hint="--horizons")
    labels = label_cohort(
        trajectories,
        load_intervals(obj.path(intervals, INTERVALS_FILE)),
        n_risks or config.model.n_risks,
        hours,
    )
    target = obj.path(out, LABELS_FILE)
    save_label_archive(target, labels)
    logger.info("wrote soft labels for %d patients to %s", len(labels), target)


@cli.command()
@config_option
@click.option("--events", type=PathOption)
@click.option("--folds", type=click.IntRange(min=2), help="defaults to train.folds")
@click.option("--seed", type=int, help="defaults to train.seed")
@click.option("--out", type=PathOption, help="manifest JSON, stdout when omitted")
@click.pass_obj
def split(
    obj: Context,
    config_path: Optional[Path],
    events: Optional[Path],
    folds: Optional[int],
    seed: Optional[int],
    out: Optional[Path],
) -> None:
    """Assign patients to event-balanced folds"""
    config = obj.config(config_path)
    folds = folds or config.train.folds
    seed = config.train.seed if seed is None else seed
    trajectories = load_trajectories(obj.path(events, EVENTS_FILE), config.labels.categories)
    assignment = balanced_patient_split(trajectories, folds, seed)
    _emit(fold_manifest(trajectories, assignment, folds, seed), out)


@cli.command("train")
@config_option
@click.option("--fold", type=click.IntRange(min=0), default=0, show_default=True, help="test fold")
@click.option("--epochs", type=click.IntRange(min=1), help="overrides train.max_epochs")
@click.option("--out", type=PathOption, required=True, help="output directory")
@click.pass_obj
def train_command(
    obj: Context, config_path: Optional[Path], fold: int, epochs: Optional[int], out: Path
) -> None:
    """Train on one fold; writes model.ckpt and history.jsonl"""
    config = _with_epochs(obj.config(config_path), epochs)
    folds = config.train.folds
    if fold >= folds:
        raise click.BadParameter(f"fold {fold} outside [0, {folds})", param_hint="--fold")
    dataset = load_dataset(obj.data_dir, config, obj.labels())
    assignment = balanced_patient_split(dataset.trajectories, folds, config.train.seed)
    train_idx, val_idx, _ = fold_indices(assignment, fold, folds)

    out.mkdir(parents=True, exist_ok=True)
    model = MataFormer(config.model)
    result = train(
        model,
        dataset.subset(train_idx),
        dataset.subset(val_idx),
        config.train,
        history_path=out / "history.jsonl",
        dump_dir=out,
    )
    save_checkpoint(
        out / "model.ckpt",
        model,
        config,
        extra={
            "fold": fold,
            "best_epoch": result.best_epoch,
            "best_score": result.best_score,
            "epochs": len(result.history),
        },
    )
    logger.info("best epoch %d (score %.4f), checkpoint in %s", result.best_epoch, result.best_score, out)


def _test_fold(obj: Context, checkpoint: Path, fold: Optional[int]) -> tuple[Checkpoint, int, Dataset]:
    ckpt = load_checkpoint(checkpoint)
    config = ckpt.config
    fold = int(ckpt.extra.get("fold", 0)) if fold is None else fold
    if not 0 <= fold < config.train.folds:
        raise click.BadParameter(f"fold {fold} outside [0, {config.train.folds})", param_hint="--fold")
    dataset = load_dataset(obj.data_dir, config, obj.labels())
    assignment = balanced_patient_split(dataset.trajectories, config.train.folds, config.train.seed)
    _, _, test_idx = fold_indices(assignment, fold, config.train.folds)
    return ckpt, fold, dataset.subset(test_idx)


@cli.command("eval")
@click.option("--checkpoint", type=PathOption, required=True)
@click.option("--fold", type=int, help="defaults to the fold the checkpoint was trained for")
@click.option("--beta", type=float, help="binarization threshold, defaults to train.beta")
@click.option("--beta-sweep", "sweep", help="start:stop:step, one metrics row per beta")
@click.option("--out", type=PathOption, help="metrics JSON, stdout when omitted")
@click.pass_obj
def eval_command(
    obj: Context,
    checkpoint: Path,
    fold: Optional[int],
    beta: Optional[float],
    sweep: Optional[str],
    out: Optional[Path],
) -> None:
    """Score a checkpoint on its test fold"""
    betas: Optional[list[float]] = None
    if sweep is not None:
        try:
            betas = parse_sweep(sweep)
        except ValueError as e:
            raise click.BadParameter(str(e), param_hint="--beta-sweep")
    ckpt, fold, test = _test_fold(obj, checkpoint, fold)
    beta = ckpt.config.train.beta if beta is None else beta
    if not 0 < beta < 1:
        raise click.BadParameter(f"beta must lie in (0, 1), got {beta}", param_hint="--beta")
    pred = predict(ckpt.model, test, ckpt.config.train.batch_size)
    payload: dict[str, Any] = {"checkpoint": str(checkpoint), "fold": fold, "patients": len(test)}
    if betas is not None:
        payload["sweep"] = beta_sweep(pred, test.targets(), betas)
    else:
        payload["beta"] = beta
        payload["metrics"] = evaluate(pred, test.targets(), beta)
    _emit(payload, out)


@cli.command()
@click.option("--checkpoint", type=PathOption, required=True)
@click.option("--gamma", type=click.FloatRange(min=0, min_open=True), default=GAMMA_CUTOFF, show_default=True)
@click.option("--fold", type=int, help="probe fold, defaults to the checkpoint's test fold")
@click.option("--probes", type=click.IntRange(min=1), default=32, show_default=True, help="probe patients")
@click.option("--bins", type=click.IntRange(min=1), default=20, show_default=True)
@click.option("--out", type=PathOption, help="report JSON, stdout when omitted")
@click.option("--csv", "csv_path", type=PathOption, help="also write receptive-field rows as CSV")
@click.pass_obj
def analyze(
    obj: Context,
    checkpoint: Path,
    gamma: float,
    fold: Optional[int],
    probes: int,
    bins: int,
    out: Optional[Path],
    csv_path: Optional[Path],
) -> None:
    """Report per-layer, per-head receptive fields of a checkpoint"""
    ckpt, fold, test = _test_fold(obj, checkpoint, fold)
    probe = test.subset(range(min(probes, len(test))))
    if len(probe) == 0:
        raise DataError(f"fold {fold} has no patients to probe")
    batch = collate(probe.trajectories, probe.labels)
    report = report_fields(ckpt.model, batch.x, batch.t, batch.lengths, gamma, bins)
    report.update(checkpoint=str(checkpoint), fold=fold, probes=len(probe))
    if csv_path is not None:
        write_fields_csv(csv_path, field_rows(report))
    _emit(report, out)


@cli.command()
@config_option
@click.option("--mode", type=click.Choice([m.value for m in AblationMode]), required=True)
@click.option("--seeds", default="0", show_default=True, help="comma separated model seeds")
@click.option("--folds", "test_folds", help="comma separated test folds, all when omitted")
@click.option("--epochs", type=click.IntRange(min=1), help="overrides train.max_epochs")
@click.option("--out", type=PathOption, help="report JSON, stdout when omitted")
@click.option("--runs-dir", type=PathOption, help="directory for per-run training histories")
@click.pass_obj
def ablate(
    obj: Context,
    config_path: Optional[Path],
    mode: str,
    seeds: str,
    test_folds: Optional[str],
    epochs: Optional[int],
    out: Optional[Path],
    runs_dir: Optional[Path],
) -> None:
    """Run an ablation grid over seeds and folds"""
    config = _with_epochs(obj.config(config_path), epochs)
    folds = _int_list(test_folds) if test_folds else None
    if folds is not None and any(not 0 <= f < config.train.folds for f in folds):
        raise click.BadParameter(f"folds must lie in [0, {config.train.folds})", param_hint="--folds")
    dataset = load_dataset(obj.data_dir, config, obj.labels())
    reports = run_ablation(dataset, mode, config, _int_list(seeds), folds, runs_dir)
    _emit({"mode": mode, "variants": [r.to_json() for r in reports]}, out)


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        cli.main(args=list(argv) if argv is not None else None, prog_name="mataformer", standalone_mode=False)
    except click.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.UsageError as e:
        e.show()
        return 1
    except click.ClickException as e:
        e.show()
        return 2
    except (DataError, ConfigError, CheckpointError) as e:
        click.echo(f"error: {e}", err=True)
        return 2
    except FileNotFoundError as e:
        click.echo(f"error: missing file {e.filename}", err=True)
        return 2
    except NumericalError as e:
        click.echo(f"numerical failure: {e}", err=True)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
