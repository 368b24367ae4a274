"""Model checkpoints in a msgpack container.

Layout::

    {
      "format": "mataformer-checkpoint-1",
      "config": {"model": {...}, "train": {...}, "synth": {...}, "labels": {...}},
      "tensors": {name: {"shape": [...], "dtype": "<f8", "data": <bytes>}},
      "extra": {...}            # free-form, e.g. fold, seed, best epoch, metrics
    }
"""
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import msgpack
import numpy as np

from mataformer.config import (
    ExperimentConfig,
    LabelConfig,
    ModelConfig,
    config_from_dict,
    config_to_dict,
)
from mataformer.consts import CHECKPOINT_FORMAT
from mataformer.errors import CheckpointError, ConfigError, ShapeError
from mataformer.model import MataFormer


@dataclass
class Checkpoint:
    model: MataFormer = field(kw_only=True)
    config: ExperimentConfig = field(kw_only=True)
    extra: dict[str, Any] = field(kw_only=True, default_factory=dict)


def _encode(value: np.ndarray) -> dict[str, Any]:
    data = np.ascontiguousarray(value, dtype="<f8")
    return {"shape": list(data.shape), "dtype": "<f8", "data": data.tobytes()}


def _decode(name: str, raw: Any) -> np.ndarray:
    try:
        shape = tuple(int(n) for n in raw["shape"])
        return np.frombuffer(raw["data"], dtype=np.dtype(raw["dtype"])).reshape(shape).astype(np.float64)
    except (KeyError, TypeError, ValueError) as e:
        raise ValueError(f"tensor {name}: {e}")


def save_checkpoint(
    path: str | Path,
    model: MataFormer,
    config: Optional[ExperimentConfig] = None,
    extra: Optional[dict[str, Any]] = None,
) -> None:
    if config is None:
        config = ExperimentConfig(model=model.config, labels=LabelConfig(horizons=model.config.horizons))
    if config.model != model.config:
        raise ConfigError("model", "checkpoint config does not describe the model being saved")
    payload = {
        "format": CHECKPOINT_FORMAT,
        "config": config_to_dict(config),
        "tensors": {name: _encode(value) for name, value in model.state_dict().items()},
        "extra": extra or {},
    }
    with open(path, "wb") as f:
        f.write(msgpack.packb(payload, use_bin_type=True))


def load_checkpoint(path: str | Path, expected: Optional[ModelConfig] = None) -> Checkpoint:
    """load_checkpoint rebuilds the model from its stored config and weights

    When ``expected`` is given, the stored model config must equal it.
    """
    where = str(path)
    try:
        with open(path, "rb") as f:
            payload = msgpack.unpackb(f.read(), raw=False)
    except (msgpack.ExtraData, msgpack.FormatError, msgpack.StackError, ValueError) as e:
        raise CheckpointError(where, f"not a msgpack document: {e}")
    if not isinstance(payload, dict) or payload.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(where, f"missing format tag {CHECKPOINT_FORMAT!r}")

    try:
        config = config_from_dict(payload["config"])
    except (ConfigError, KeyError) as e:
        raise CheckpointError(where, f"bad config: {e}")
    if expected is not None and expected != config.model:
        raise CheckpointError(where, "model config does not match the requested config")

    model = MataFormer(config.model)
    try:
        state = {name: _decode(name, raw) for name, raw in payload["tensors"].items()}
        model.load_state_dict(state)
    except (KeyError, ValueError, ShapeError) as e:
        raise CheckpointError(where, f"weights do not fit the config: {e}")
    return Checkpoint(model=model, config=config, extra=payload.get("extra") or {})
