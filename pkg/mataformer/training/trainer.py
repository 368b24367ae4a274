import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from mataformer.config import TrainConfig
from mataformer.errors import NumericalError
from mataformer.lib.optim import AdamW, ParamGroup, warmup_cosine_lr
from mataformer.lib.tensor import no_grad
from mataformer.metrics import MetricReport, evaluate
from mataformer.model import MataFormer
from mataformer.training.data import Batch, Dataset, iterate_batches
from mataformer.training.losses import compute_loss

logger = logging.getLogger(__name__)


@dataclass
class TrainResult:
    """TrainResult is the restored best model and the per-epoch history"""

    model: MataFormer = field(kw_only=True)
    history: list[dict] = field(kw_only=True, default_factory=list)
    best_epoch: int = field(kw_only=True, default=-1)
    best_score: float = field(kw_only=True, default=-math.inf)
    stopped_early: bool = field(kw_only=True, default=False)


def build_optimizer(model: MataFormer, config: TrainConfig) -> AdamW:
    """build_optimizer puts the backbone at base_lr and the residual projection networks at the multiplier"""
    groups = [ParamGroup(name="backbone", params=model.backbone_parameters(), lr_scale=1.0)]
    predictor = model.predictor_parameters()
    if predictor:
        groups.append(
            ParamGroup(
                name="predictor",
                params=predictor,
                lr_scale=config.predictor_lr_multiplier,
            )
        )
    return AdamW(groups, weight_decay=config.weight_decay)


def predict(model: MataFormer, data: Dataset, batch_size: int = 4) -> list[np.ndarray]:
    """predict returns one [L, R, K] prediction array per trajectory, in dataset order"""
    out: list[np.ndarray] = []
    with no_grad():
        for batch in iterate_batches(data, batch_size):
            pred = model(batch.x, batch.t, batch.lengths).data
            out.extend(pred[b, :n] for b, n in enumerate(batch.lengths))
    return out


def validation_report(model: MataFormer, data: Dataset, config: TrainConfig) -> MetricReport:
    return evaluate(predict(model, data, config.batch_size), data.targets(), config.beta)


def _dump_batch(dump_dir: Path, epoch: int, step: int, batch: Batch) -> Path:
    dump_dir.mkdir(parents=True, exist_ok=True)
    path = dump_dir / f"nan-batch-epoch{epoch}-step{step}.npz"
    np.savez(
        path,
        x=batch.x,
        t=batch.t,
        y=batch.y,
        lengths=batch.lengths,
        patient_ids=np.array(batch.patient_ids, dtype=str),
    )
    return path


def _score(report: MetricReport, val_loss: float) -> float:
    # validation folds without positives fall back to the (negated) loss
    value = report.get("sample_auprc")
    return float(value) if value is not None else -val_loss


def _validation_loss(model: MataFormer, data: Dataset, config: TrainConfig) -> float:
    total, count = 0.0, 0
    with no_grad():
        for batch in iterate_batches(data, config.batch_size):
            loss = compute_loss(model(batch.x, batch.t, batch.lengths), batch.y, batch.lengths, config)
            total += loss.item() * int(batch.lengths.sum())
            count += int(batch.lengths.sum())
    return total / max(count, 1)


def train(
    model: MataFormer,
    train_data: Dataset,
    val_data: Optional[Dataset],
    config: TrainConfig,
    history_path: Optional[str | Path] = None,
    dump_dir: str | Path = ".",
) -> TrainResult:
    """train fits the model with AdamW, warmup-cosine decay and early stopping

    Early stopping monitors validation sample-AUPRC at ``config.beta``; the
    best epoch's parameters are restored before returning. Each epoch appends
    one JSON line to ``history_path`` when given. A non-finite loss writes the
    offending batch to ``dump_dir`` and raises NumericalError.
    """
    config.validate()
    if len(train_data) == 0:
        raise ValueError("empty training set")
    rng = np.random.default_rng(config.seed)
    optimizer = build_optimizer(model, config)
    steps_per_epoch = math.ceil(len(train_data) / config.batch_size)
    total_steps = steps_per_epoch * config.max_epochs

    history_file = open(history_path, "w", encoding="utf-8") if history_path else None
    result = TrainResult(model=model)
    best_state = model.state_dict()
    waited = 0
    step = 0
    try:
        for epoch in range(config.max_epochs):
            started = time.monotonic()
            losses: list[float] = []
            for batch in iterate_batches(train_data, config.batch_size, rng):
                optimizer.set_lr(warmup_cosine_lr(step, total_steps, config.base_lr, config.warmup_ratio))
                optimizer.zero_grad()
                loss = compute_loss(model(batch.x, batch.t, batch.lengths), batch.y, batch.lengths, config)
                if not np.isfinite(loss.item()):
                    path = _dump_batch(Path(dump_dir), epoch, step, batch)
                    raise NumericalError(
                        "non-finite training loss",
                        where=f"epoch {epoch} step {step}",
                        dump_path=str(path),
                    )
                loss.backward()
                optimizer.step()
                losses.append(loss.item())
                step += 1

            record: dict = {
                "epoch": epoch,
                "loss": float(np.mean(losses)),
                "lr": optimizer.learning_rates(),
            }
            if val_data is not None and len(val_data) > 0:
                val_loss = _validation_loss(model, val_data, config)
                metrics = validation_report(model, val_data, config)
                score = _score(metrics, val_loss)
                record.update(val_loss=val_loss, metrics=metrics)
            else:
                score = -record["loss"]
            record["elapsed"] = time.monotonic() - started
            result.history.append(record)
            if history_file is not None:
                history_file.write(json.dumps(record) + "\n")
                history_file.flush()
            logger.info(
                "epoch %d loss %.6f score %.4f lr %s",
                epoch,
                record["loss"],
                score,
                record["lr"],
            )

            if score > result.best_score:
                result.best_score, result.best_epoch = score, epoch
                best_state = model.state_dict()
                waited = 0
            else:
                waited += 1
                if waited >= config.early_stop_patience:
                    logger.info("early stop after epoch %d, best epoch %d", epoch, result.best_epoch)
                    result.stopped_early = True
                    break
    finally:
        if history_file is not None:
            history_file.close()

    model.load_state_dict(best_state)
    return result
