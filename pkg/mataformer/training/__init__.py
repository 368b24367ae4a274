from .losses import bce_loss, compute_loss, focal_loss_soft, mse_loss
from .split import balanced_patient_split, fold_indices, fold_loads, fold_manifest, validation_fold
from .data import Batch, Dataset, collate, iterate_batches, load_dataset
from .trainer import TrainResult, build_optimizer, predict, train
from .experiment import (
    AblationMode,
    ExperimentReport,
    RunResult,
    ablation_variants,
    run_ablation,
    run_experiment,
    run_fold,
)
