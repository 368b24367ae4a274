from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from mataformer.attention import AttentionTrace, MataAttention, init_priors, sinusoidal_time_encoding
from mataformer.config import FeedForward, ModelConfig, TimeMode
from mataformer.consts import PROJECTOR_HIDDEN
from mataformer.errors import ConfigError, ShapeError
from mataformer.lib.tensor import Linear, Module, RMSNorm, Tensor, as_tensor, no_grad, silu


class FeedForwardBlock(Module):
    """FeedForwardBlock is the SiLU-gated FFN (gate * up, then down) or a plain two-layer FFN"""

    def __init__(self, d_model: int, d_ff: int, rng: np.random.Generator, kind: FeedForward):
        self.kind = kind
        if kind == FeedForward.GATED:
            self.gate = Linear(d_model, d_ff, rng, bias=False)
            self.up = Linear(d_model, d_ff, rng, bias=False)
            self.down = Linear(d_ff, d_model, rng, bias=False)
        else:
            self.up = Linear(d_model, d_ff, rng)
            self.down = Linear(d_ff, d_model, rng)

    def forward(self, x: Tensor) -> Tensor:
        if self.kind == FeedForward.GATED:
            return self.down(silu(self.gate(x)) * self.up(x))
        return self.down(silu(self.up(x)))


class Block(Module):
    """Block is a pre-norm transformer layer: x + attn(norm(x)), then x + ffn(norm(x))"""

    def __init__(self, config: ModelConfig, rng: np.random.Generator, index: int):
        temporal = None
        if config.time_mode == TimeMode.MATA:
            temporal = init_priors(
                config.n_heads,
                config.gamma_mu,
                config.alpha_base,
                head_dim=config.head_dim,
                lam=config.lam,
                residual_mode=config.residual_mode,
                rng=rng,
            )
        self.norm1 = RMSNorm(config.d_model)
        self.attn = MataAttention(
            config.d_model,
            config.n_heads,
            rng,
            temporal=temporal,
            tau=config.tau,
            name=f"layer {index}",
        )
        self.norm2 = RMSNorm(config.d_model)
        self.ffn = FeedForwardBlock(config.d_model, config.d_ff, rng, config.ffn)

    def trace(self, x: Tensor, t: np.ndarray, lengths: Optional[np.ndarray]) -> tuple[Tensor, AttentionTrace]:
        attn = self.attn.trace(self.norm1(x), t, lengths)
        x = x + attn.output
        return x + self.ffn(self.norm2(x)), attn


@dataclass
class ModelTrace:
    #: [B, S, R, K] predictions in (0, 1)
    output: Tensor = field(kw_only=True)
    #: one entry per layer
    layers: list[AttentionTrace] = field(kw_only=True, default_factory=list)


class MataFormer(Module):
    """MataFormer maps event embeddings [B, S, input_dim] and timestamps [B, S] to risks [B, S, R, K]"""

    def __init__(self, config: ModelConfig):
        self.config = config.validate()
        rng = np.random.default_rng(config.seed)
        self.input_proj = Linear(config.input_dim, config.d_model, rng)
        self.blocks = [Block(config, rng, i) for i in range(config.n_layers)]
        self.norm = RMSNorm(config.d_model)
        self.head = Linear(config.d_model, config.output_dim, rng)

    def predictor_parameters(self) -> list[Tensor]:
        return [
            p
            for block in self.blocks
            if block.attn.temporal is not None
            for p in block.attn.temporal.predictor_parameters()
        ]

    def backbone_parameters(self) -> list[Tensor]:
        predictor = {id(p) for p in self.predictor_parameters()}
        return [p for p in self.parameters() if id(p) not in predictor]

    def trace(self, x, t, lengths: Optional[np.ndarray] = None) -> ModelTrace:
        x = as_tensor(x)
        cfg = self.config
        if x.ndim != 3 or x.shape[-1] != cfg.input_dim:
            raise ShapeError("model input", ("B", "S", cfg.input_dim), x.shape)
        t = np.asarray(t)
        if t.shape != x.shape[:2]:
            raise ShapeError("timestamps", x.shape[:2], t.shape)
        if lengths is not None and np.asarray(lengths).shape != (x.shape[0],):
            raise ShapeError("lengths", (x.shape[0],), np.asarray(lengths).shape)

        if cfg.time_mode == TimeMode.SINUSOIDAL:
            x = x * cfg.time_encoding_scale + sinusoidal_time_encoding(
                t, cfg.input_dim, cfg.time_encoding_horizon
            )
        h = self.input_proj(x)
        layers = []
        for block in self.blocks:
            h, attn = block.trace(h, t, lengths)
            layers.append(attn)
        logits = self.head(self.norm(h))
        b, s, _ = logits.shape
        out = logits.sigmoid().reshape(b, s, cfg.n_risks, len(cfg.horizons))
        return ModelTrace(output=out, layers=layers)

    def forward(self, x, t, lengths: Optional[np.ndarray] = None) -> Tensor:
        return self.trace(x, t, lengths).output


@dataclass(frozen=True)
class ParameterCount:
    backbone: int = field(kw_only=True)
    #: residual projection networks, trained at the higher learning rate
    predictor: int = field(kw_only=True)

    @property
    def total(self) -> int:
        return self.backbone + self.predictor


def count_parameters(config: ModelConfig) -> ParameterCount:
    """count_parameters returns the exact trainable parameter count of a config

    Per layer, the predictor group is head_dim*64 + 64 (hidden layer with bias)
    plus 64*2 + 2 (output layer with bias); the per-head priors (2 per head) belong
    to the backbone.
    """
    d, d_ff = config.d_model, config.d_ff
    backbone = config.input_dim * d + d
    backbone += d + d * config.output_dim + config.output_dim

    per_layer = 2 * d + 4 * d * d
    if config.ffn == FeedForward.GATED:
        per_layer += 3 * d * d_ff
    else:
        per_layer += 2 * d * d_ff + d_ff + d
    predictor = 0
    if config.time_mode == TimeMode.MATA:
        per_layer += 2 * config.n_heads
        predictor = config.n_layers * (
            config.head_dim * PROJECTOR_HIDDEN + PROJECTOR_HIDDEN + PROJECTOR_HIDDEN * 2 + 2
        )
    return ParameterCount(backbone=backbone + config.n_layers * per_layer, predictor=predictor)


def probe_fields(
    model: MataFormer, x, t, lengths: Optional[np.ndarray] = None
) -> list[dict[str, np.ndarray]]:
    """probe_fields returns per-layer dynamic alpha and mu, each [B, H, S], for the given batch"""
    with no_grad():
        traced = model.trace(x, t, lengths)
    fields = []
    for block, layer in zip(model.blocks, traced.layers):
        if block.attn.temporal is None or layer.alpha is None or layer.mu is None:
            raise ConfigError("model.time_mode", "probing the receptive field needs time_mode=mata")
        fields.append({"alpha": layer.alpha, "mu": layer.mu})
    return fields
