from typing import Final

#: Seconds per hour, the unit boundary between timestamps and PSL displacements
SECONDS_PER_HOUR: Final[int] = 3600

#: Time scale of the log-distance geometry ln(|dt|/tau + 1), in seconds
TAU: Final[float] = 60.0
#: Upper bound of the peak offset mu, in log-distance units
GAMMA_MU: Final[float] = 10.0
#: Sensitivity of the peak residual in logit space
LAMBDA_MU: Final[float] = 4.0
#: Lower clamp on the projected decay rate alpha
ALPHA_FLOOR: Final[float] = 1e-4
#: Upper clamp on the projected decay rate alpha
ALPHA_LIMIT: Final[float] = 2.5
#: Baseline decay rate around which per-head priors are jittered
ALPHA_BASE: Final[float] = 1.0
#: Half width of the uniform jitter applied to alpha priors
ALPHA_JITTER: Final[float] = 0.05
#: Fraction of gamma_mu spanned by the tiled mu priors
MU_TILE_SPAN: Final[float] = 0.95
#: Probability clamp applied to mu_bar / gamma_mu before logit storage
MU_PROB_FLOOR: Final[float] = 0.05
MU_PROB_CEIL: Final[float] = 0.95
#: Hidden width of the residual projection network
PROJECTOR_HIDDEN: Final[int] = 64

#: Temporal scaling horizon of the sinusoidal encoding ablation (14 days)
TIME_ENCODING_HORIZON: Final[float] = 1209600.0
#: Embedding scale applied before adding the sinusoidal encoding
TIME_ENCODING_SCALE: Final[float] = 64.0

#: Clamp applied to predictions before taking logs in BCE/focal losses
PRED_CLAMP: Final[float] = 1e-7

#: Operational suppression cutoff Gamma (exp(-5) ~ 6.7e-3 relative attention)
GAMMA_CUTOFF: Final[float] = 5.0

#: Default PSL horizons in hours; sigma_k = k
DEFAULT_HORIZONS: Final[tuple[int, ...]] = (6, 12, 24, 48)
#: Default binarization threshold for evaluation
DEFAULT_BETA: Final[float] = 0.5

#: Default event categories; the set is configuration, not fixed
DEFAULT_CATEGORIES: Final[tuple[str, ...]] = (
    "Lab Test",
    "Vital Signs",
    "Nursing Notes",
    "Physician Notes",
    "Medication",
    "Procedure",
    "Diagnosis",
    "Imaging",
    "Fluid Balance",
    "Ventilator Settings",
    "Microbiology",
    "Transfer",
)

#: Magic prefix of the binary embedding file
EMBEDDING_MAGIC: Final[bytes] = b"MATAEMB1"
#: Norm deviation below which stored vectors are re-normalized instead of rejected
EMBEDDING_NORM_REPAIR: Final[float] = 1e-3

#: Format tag written into checkpoints
CHECKPOINT_FORMAT: Final[str] = "mataformer-checkpoint-1"

#: Standard file names inside a cohort directory
EVENTS_FILE: Final[str] = "events.jsonl"
INTERVALS_FILE: Final[str] = "intervals.jsonl"
EMBEDDINGS_FILE: Final[str] = "embeddings.bin"
CONFIG_FILE: Final[str] = "config.toml"
