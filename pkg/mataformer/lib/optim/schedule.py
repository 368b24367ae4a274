import math


def warmup_steps(total_steps: int, warmup_ratio: float) -> int:
    """warmup_steps returns the number of linear warmup steps for a run"""
    return int(math.ceil(warmup_ratio * total_steps - 1e-9))


def warmup_cosine_lr(
    step: int, total_steps: int, base_lr: float, warmup_ratio: float
) -> float:
    """warmup_cosine_lr ramps linearly from 0 to base_lr, then decays to 0 on a half cosine

    Args:
        step: 0-based optimizer step
        total_steps: number of steps in the run
        base_lr: peak learning rate reached at the end of warmup
        warmup_ratio: fraction of total_steps spent warming up

    Returns:
        learning rate for this step; 0 at step 0 when warmup is on, 0 at total_steps

    """
    warmup = warmup_steps(total_steps, warmup_ratio)
    if step < warmup:
        return base_lr * step / warmup
    if total_steps <= warmup:
        return base_lr
    progress = min(1.0, (step - warmup) / (total_steps - warmup))
    return base_lr * 0.5 * (1.0 + math.cos(math.pi * progress))
