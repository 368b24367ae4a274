from .config import (
    ExperimentConfig,
    LabelConfig,
    ModelConfig,
    SynthConfig,
    TrainConfig,
    load_config,
)
from .events import EventRecord, Trajectory, load_trajectories, textualize
from .embeddings import EmbeddingStore
from .labels import RiskInterval, SoftLabelMatrix, build_label_matrix, label_cohort
from .attention import MataAttention
from .model import MataFormer
from .metrics import beta_sweep, evaluate
from .horizon import ReceptiveField, physical_bounds, report_fields
from .checkpoint import load_checkpoint, save_checkpoint

from . import consts
from . import errors
from . import lib
from . import training
from . import testing

VERSION = "0.1.0"
