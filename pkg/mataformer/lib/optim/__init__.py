from .adamw import AdamW, ParamGroup
from .schedule import warmup_cosine_lr, warmup_steps
