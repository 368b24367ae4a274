from .fixtures import (
    perturb_residual_network,
    random_batch,
    random_times,
    small_config,
    tiny_experiment,
    toy_trajectory,
    unit_rows,
)
from .oracles import (
    attention_loop_oracle,
    auroc_oracle,
    average_precision_oracle,
    brier_oracle,
    precision_at_k_oracle,
    psl_brute_force,
)
