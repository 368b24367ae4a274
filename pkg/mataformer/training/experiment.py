import dataclasses
import itertools
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from mataformer.config import ExperimentConfig, LossMode, ResidualMode, TimeMode
from mataformer.metrics import MetricReport, aggregate, evaluate
from mataformer.model import MataFormer
from mataformer.training.data import Dataset
from mataformer.training.split import balanced_patient_split, fold_indices
from mataformer.training.trainer import predict, train

logger = logging.getLogger(__name__)

#: focal ablation grid
FOCAL_GAMMAS: tuple[float, ...] = (1.0, 2.0, 4.0)
FOCAL_ALPHAS: tuple[float, ...] = (0.25, 0.5, 0.75)


class AblationMode(str, Enum):
    MATA = "mata"
    SINUSOIDAL = "sinusoidal"
    NONE = "none"
    FOCAL = "focal"
    STATIC_PEAK = "static-peak"
    STATIC_SLOPE = "static-slope"


def ablation_variants(mode: AblationMode | str, base: ExperimentConfig) -> list[tuple[str, ExperimentConfig]]:
    """ablation_variants maps an ablation mode onto named experiment configs derived from base"""

    def with_model(**changes) -> ExperimentConfig:
        return dataclasses.replace(base, model=dataclasses.replace(base.model, **changes))

    match AblationMode(mode):
        case AblationMode.MATA:
            return [("mata", with_model(time_mode=TimeMode.MATA, residual_mode=ResidualMode.FULL))]
        case AblationMode.SINUSOIDAL:
            return [("sinusoidal", with_model(time_mode=TimeMode.SINUSOIDAL))]
        case AblationMode.NONE:
            return [("none", with_model(time_mode=TimeMode.NONE))]
        case AblationMode.STATIC_PEAK:
            return [("static-peak", with_model(time_mode=TimeMode.MATA, residual_mode=ResidualMode.STATIC_PEAK))]
        case AblationMode.STATIC_SLOPE:
            return [
                ("static-slope", with_model(time_mode=TimeMode.MATA, residual_mode=ResidualMode.STATIC_SLOPE))
            ]
        case AblationMode.FOCAL:
            return [
                (
                    f"focal-g{gamma:g}-a{alpha:g}",
                    dataclasses.replace(
                        base,
                        train=dataclasses.replace(
                            base.train,
                            loss_mode=LossMode.FOCAL,
                            focal_gamma=gamma,
                            focal_alpha=alpha,
                        ),
                    ),
                )
                for gamma, alpha in itertools.product(FOCAL_GAMMAS, FOCAL_ALPHAS)
            ]
    raise AssertionError(mode)  # unreachable, AblationMode() rejects unknown values


@dataclass
class RunResult:
    seed: int = field(kw_only=True)
    fold: int = field(kw_only=True)
    best_epoch: int = field(kw_only=True)
    epochs: int = field(kw_only=True)
    metrics: MetricReport = field(kw_only=True)


@dataclass
class ExperimentReport:
    """ExperimentReport holds the test metrics of every (seed, fold) run and their aggregate"""

    name: str = field(kw_only=True)
    runs: list[RunResult] = field(kw_only=True, default_factory=list)

    def summary(self) -> dict[str, dict]:
        return aggregate([r.metrics for r in self.runs])

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "runs": [dataclasses.asdict(r) for r in self.runs],
            "summary": self.summary(),
        }


def run_fold(
    dataset: Dataset,
    assignment: np.ndarray,
    test_fold: int,
    config: ExperimentConfig,
    seed: int,
    out_dir: Optional[Path] = None,
) -> RunResult:
    """run_fold trains on the training folds, early-stops on the validation fold and scores the test fold"""
    folds = config.train.folds
    train_idx, val_idx, test_idx = fold_indices(assignment, test_fold, folds)
    model = MataFormer(dataclasses.replace(config.model, seed=seed))
    train_config = dataclasses.replace(config.train, seed=seed)

    history_path = None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        history_path = out_dir / f"history-seed{seed}-fold{test_fold}.jsonl"
    result = train(
        model,
        dataset.subset(train_idx),
        dataset.subset(val_idx),
        train_config,
        history_path=history_path,
        dump_dir=out_dir or ".",
    )
    test = dataset.subset(test_idx)
    metrics = evaluate(predict(model, test, train_config.batch_size), test.targets(), train_config.beta)
    logger.info("seed %d fold %d: %s", seed, test_fold, metrics)
    return RunResult(
        seed=seed,
        fold=test_fold,
        best_epoch=result.best_epoch,
        epochs=len(result.history),
        metrics=metrics,
    )


def run_experiment(
    dataset: Dataset,
    config: ExperimentConfig,
    seeds: Sequence[int] = (0,),
    test_folds: Optional[Sequence[int]] = None,
    name: str = "mata",
    out_dir: Optional[str | Path] = None,
) -> ExperimentReport:
    """run_experiment trains and evaluates one config over every (seed, test fold) pair

    The patient split is fixed by ``config.train.seed`` so that all seeds and
    ablation variants see identical folds; ``seeds`` only vary initialization
    and batch order.
    """
    config.validate()
    folds = config.train.folds
    assignment = balanced_patient_split(dataset.trajectories, folds, config.train.seed)
    report = ExperimentReport(name=name)
    for seed in seeds:
        for test_fold in range(folds) if test_folds is None else test_folds:
            run_dir = Path(out_dir) / name if out_dir is not None else None
            report.runs.append(run_fold(dataset, assignment, test_fold, config, seed, run_dir))
    return report


def run_ablation(
    dataset: Dataset,
    mode: AblationMode | str,
    base: ExperimentConfig,
    seeds: Sequence[int] = (0,),
    test_folds: Optional[Sequence[int]] = None,
    out_dir: Optional[str | Path] = None,
) -> list[ExperimentReport]:
    return [
        run_experiment(dataset, config, seeds, test_folds, name=name, out_dir=out_dir)
        for name, config in ablation_variants(mode, base)
    ]
