"""Log-distance Laplacian temporal attention with query-conditioned shape parameters."""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import expit, logit

from mataformer.config import ResidualMode
from mataformer.consts import (
    ALPHA_FLOOR,
    ALPHA_JITTER,
    ALPHA_LIMIT,
    GAMMA_MU,
    LAMBDA_MU,
    MU_PROB_CEIL,
    MU_PROB_FLOOR,
    MU_TILE_SPAN,
    PROJECTOR_HIDDEN,
    TAU,
    TIME_ENCODING_HORIZON,
)
from mataformer.errors import NumericalError, ShapeError
from mataformer.lib.tensor import Linear, Module, Tensor, as_tensor, parameter, softmax_lastdim

# Residual columns are (delta_alpha, delta_mu)
_RESIDUAL_MASKS: dict[ResidualMode, np.ndarray] = {
    ResidualMode.FULL: np.array([1.0, 1.0]),
    ResidualMode.STATIC_PEAK: np.array([1.0, 0.0]),
    ResidualMode.STATIC_SLOPE: np.array([0.0, 1.0]),
    ResidualMode.STATIC: np.array([0.0, 0.0]),
}


def log_distance_matrix(t, tau: float = TAU) -> np.ndarray:
    """log_distance_matrix returns D[..., i, j] = ln(|t_i - t_j| / tau + 1)"""
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    t = np.asarray(t, dtype=np.float64)
    lag = np.abs(t[..., :, None] - t[..., None, :])
    return np.log1p(lag / tau)


def causal_mask(t) -> np.ndarray:
    """causal_mask is 0 where t_j <= t_i and -inf elsewhere; equal timestamps see each other"""
    t = np.asarray(t)
    visible = t[..., None, :] <= t[..., :, None]
    return np.where(visible, 0.0, -np.inf)


def key_padding_mask(lengths, seq_len: int) -> np.ndarray:
    """key_padding_mask returns [B, 1, 1, S], -inf on keys at or beyond each sequence length"""
    lengths = np.asarray(lengths)
    valid = np.arange(seq_len)[None, :] < lengths[:, None]
    return np.where(valid, 0.0, -np.inf)[:, None, None, :]


def project_alpha(alpha_bar, delta_alpha):
    """project_alpha maps a prior and residual to clamp(alpha_bar * exp(delta_alpha), 1e-4, 2.5)"""
    out = np.clip(np.asarray(alpha_bar) * np.exp(delta_alpha), ALPHA_FLOOR, ALPHA_LIMIT)
    return float(out) if np.ndim(out) == 0 else out


def _open_bounds(gamma_mu: float) -> tuple[float, float]:
    # mu stays strictly inside (0, gamma_mu) even where the sigmoid saturates
    return float(np.nextafter(0.0, 1.0)), float(np.nextafter(gamma_mu, 0.0))


def _project_mu_logit(mu_logit, delta_mu, lam: float, gamma_mu: float):
    p = np.clip(expit(np.asarray(mu_logit) + lam * np.asarray(delta_mu)), *_open_bounds(1.0))
    return np.clip(p * gamma_mu, *_open_bounds(gamma_mu))


def project_mu(mu_bar, delta_mu, lam: float = LAMBDA_MU, gamma_mu: float = GAMMA_MU):
    """project_mu applies the residual in logit space: sigmoid(logit(mu_bar/gamma_mu) + lam*delta_mu) * gamma_mu"""
    p = np.asarray(mu_bar, dtype=np.float64) / gamma_mu
    if np.any(p <= 0) or np.any(p >= 1):
        raise ValueError(f"mu_bar / gamma_mu must lie in (0, 1), got {p}")
    out = _project_mu_logit(logit(p), delta_mu, lam, gamma_mu)
    return float(out) if np.ndim(out) == 0 else out


def laplace_bias(D, alpha, mu) -> np.ndarray:
    """laplace_bias returns B[..., i, j] = -alpha_i * |D[..., i, j] - mu_i|"""
    alpha = np.asarray(alpha, dtype=np.float64)[..., None]
    mu = np.asarray(mu, dtype=np.float64)[..., None]
    return -alpha * np.abs(np.asarray(D) - mu)


def sinusoidal_time_encoding(t, d: int, horizon: float = TIME_ENCODING_HORIZON) -> np.ndarray:
    """sinusoidal_time_encoding returns [..., d] with sin/cos pairs at frequencies horizon^(-2j/d)"""
    if d <= 0 or d % 2 != 0:
        raise ValueError(f"time encoding dimension must be even and positive, got {d}")
    t = np.asarray(t, dtype=np.float64)[..., None]
    omega = horizon ** (-2.0 * np.arange(d // 2) / d)
    out = np.empty(t.shape[:-1] + (d,), dtype=np.float64)
    out[..., 0::2] = np.sin(omega * t)
    out[..., 1::2] = np.cos(omega * t)
    return out


class TemporalBiasParams(Module):
    """TemporalBiasParams holds per-head priors and the residual projection network F_phi

    F_phi is shared by the heads of one layer: Linear(head_dim -> 64) + tanh,
    then a Linear(64 -> 2) whose weight and bias start at zero, so every query starts
    at its head's static prior. The peak prior is stored as a logit.
    """

    def __init__(
        self,
        alpha_bar: np.ndarray,
        mu_logit: np.ndarray,
        hidden: Linear,
        out: Linear,
        *,
        gamma_mu: float = GAMMA_MU,
        lam: float = LAMBDA_MU,
        residual_mode: ResidualMode = ResidualMode.FULL,
    ):
        self.alpha_bar = parameter(np.asarray(alpha_bar, dtype=np.float64))
        self.mu_logit = parameter(np.asarray(mu_logit, dtype=np.float64))
        self.hidden = hidden
        self.out = out
        self.gamma_mu = gamma_mu
        self.lam = lam
        self.residual_mode = ResidualMode(residual_mode)
        self._mask = _RESIDUAL_MASKS[self.residual_mode]

    @property
    def n_heads(self) -> int:
        return self.alpha_bar.shape[0]

    @property
    def head_dim(self) -> int:
        return self.hidden.in_features

    def mu_bar(self) -> np.ndarray:
        return _project_mu_logit(self.mu_logit.data, 0.0, self.lam, self.gamma_mu)

    def predictor_parameters(self) -> list[Tensor]:
        return self.hidden.parameters() + self.out.parameters()

    def residuals(self, q: Tensor) -> Tensor:
        """residuals maps queries [..., head_dim] to (delta_alpha, delta_mu) in the last axis"""
        q = as_tensor(q)
        if q.shape[-1] != self.head_dim:
            raise ShapeError("query for residual projection", self.head_dim, q.shape[-1])
        return self.out(self.hidden(q).tanh()) * self._mask

    def project(self, delta_alpha: Tensor, delta_mu: Tensor) -> tuple[Tensor, Tensor]:
        """project turns [B, H, S] residuals into (alpha, mu) of the same shape"""
        heads = (1, self.n_heads, 1)
        alpha = (self.alpha_bar.reshape(heads) * delta_alpha.exp()).clamp(ALPHA_FLOOR, ALPHA_LIMIT)
        p = (self.mu_logit.reshape(heads) + delta_mu * self.lam).sigmoid().clamp(*_open_bounds(1.0))
        mu = (p * self.gamma_mu).clamp(*_open_bounds(self.gamma_mu))
        return alpha, mu

    def bias(self, alpha: Tensor, mu: Tensor, D: np.ndarray) -> Tensor:
        alpha4 = alpha.reshape(alpha.shape + (1,))
        mu4 = mu.reshape(mu.shape + (1,))
        return -(alpha4 * (as_tensor(D) - mu4).abs())

    def temporal_bias(self, q: Tensor, D: np.ndarray) -> tuple[Tensor, Tensor, Tensor]:
        """temporal_bias computes per-query (alpha, mu) and the [B, H, S, S] bias for queries [B, H, S, dh]"""
        res = self.residuals(q)
        alpha, mu = self.project(res[..., 0], res[..., 1])
        return alpha, mu, self.bias(alpha, mu, D)

    def static_bias(self, D: np.ndarray, batch: int = 1) -> Tensor:
        """static_bias is the bias every query sees when both residuals are zero"""
        zeros = Tensor(np.zeros((batch, self.n_heads, D.shape[-1])))
        alpha, mu = self.project(zeros, zeros)
        return self.bias(alpha, mu, D)


def init_priors(
    n_heads: int,
    gamma_mu: float = GAMMA_MU,
    alpha_base: float = 1.0,
    seed: int = 0,
    *,
    head_dim: int = 16,
    lam: float = LAMBDA_MU,
    residual_mode: ResidualMode = ResidualMode.FULL,
    rng: Optional[np.random.Generator] = None,
) -> TemporalBiasParams:
    """init_priors builds priors tiled over [0, 0.95 gamma_mu] with jittered slopes

    The implied probability mu_bar / gamma_mu is clamped to [0.05, 0.95]
    before it is stored as a logit. ``rng`` overrides ``seed`` when given.
    """
    if n_heads < 2:
        raise ValueError(f"need at least 2 heads to tile priors, got {n_heads}")
    rng = rng if rng is not None else np.random.default_rng(seed)
    tiles = np.arange(n_heads) / (n_heads - 1) * MU_TILE_SPAN
    probs = np.clip(tiles, MU_PROB_FLOOR, MU_PROB_CEIL)
    alpha_bar = alpha_base + rng.uniform(-ALPHA_JITTER, ALPHA_JITTER, n_heads)
    hidden = Linear(head_dim, PROJECTOR_HIDDEN, rng)
    out = Linear(PROJECTOR_HIDDEN, 2, rng, zero=True)
    return TemporalBiasParams(
        alpha_bar,
        logit(probs),
        hidden,
        out,
        gamma_mu=gamma_mu,
        lam=lam,
        residual_mode=residual_mode,
    )


def predict_residuals(q, params: TemporalBiasParams) -> tuple[float, float]:
    """predict_residuals evaluates F_phi on one per-head query vector"""
    q = np.asarray(q, dtype=np.float64)
    if q.ndim != 1:
        raise ShapeError("query", "a vector", q.shape)
    res = params.residuals(Tensor(q.reshape(1, -1))).data[0]
    return float(res[0]), float(res[1])


@dataclass
class AttentionTrace:
    """AttentionTrace is everything one attention layer computed for a batch"""

    output: Tensor = field(kw_only=True)
    #: [B, H, S, S] attention weights
    weights: np.ndarray = field(kw_only=True)
    #: [B, H, S] projected decay rates, None without a temporal bias
    alpha: Optional[np.ndarray] = field(kw_only=True, default=None)
    #: [B, H, S] projected peak offsets
    mu: Optional[np.ndarray] = field(kw_only=True, default=None)
    #: [B, H, S, S] temporal bias before masking
    bias: Optional[np.ndarray] = field(kw_only=True, default=None)


class MataAttention(Module):
    """MataAttention is multi-head attention with a Laplacian bias over log time lags

    When ``temporal`` is None the layer is plain causal attention (the
    time-agnostic and sinusoidal ablations); visibility still follows t_j <= t_i.
    """

    def __init__(
        self,
        d_model: int,
        n_heads: int,
        rng: np.random.Generator,
        temporal: Optional[TemporalBiasParams] = None,
        tau: float = TAU,
        name: str = "attention",
    ):
        if d_model % n_heads != 0:
            raise ShapeError("d_model", f"a multiple of n_heads={n_heads}", d_model)
        self.d_model = d_model
        self.n_heads = n_heads
        self.head_dim = d_model // n_heads
        self.tau = tau
        self.name = name
        self.wq = Linear(d_model, d_model, rng, bias=False)
        self.wk = Linear(d_model, d_model, rng, bias=False)
        self.wv = Linear(d_model, d_model, rng, bias=False)
        self.wo = Linear(d_model, d_model, rng, bias=False)
        self.temporal = temporal

    def _split_heads(self, x: Tensor) -> Tensor:
        b, s, _ = x.shape
        return x.reshape(b, s, self.n_heads, self.head_dim).transpose(0, 2, 1, 3)

    def trace(self, x: Tensor, t: np.ndarray, lengths: Optional[np.ndarray] = None) -> AttentionTrace:
        x = as_tensor(x)
        if x.ndim != 3 or x.shape[-1] != self.d_model:
            raise ShapeError(f"{self.name} input", ("B", "S", self.d_model), x.shape)
        b, s, _ = x.shape
        t = np.asarray(t)
        if t.shape != (b, s):
            raise ShapeError(f"{self.name} timestamps", (b, s), t.shape)

        q = self._split_heads(self.wq(x))
        k = self._split_heads(self.wk(x))
        v = self._split_heads(self.wv(x))
        scores = (q @ k.swapaxes(-1, -2)) * (1.0 / np.sqrt(self.head_dim))

        trace_alpha = trace_mu = trace_bias = None
        if self.temporal is not None:
            D = log_distance_matrix(t, self.tau)[:, None, :, :]
            alpha, mu, bias = self.temporal.temporal_bias(q, D)
            scores = scores + bias
            trace_alpha, trace_mu, trace_bias = alpha.data, mu.data, bias.data

        mask = causal_mask(t)[:, None, :, :]
        if lengths is not None:
            mask = mask + key_padding_mask(lengths, s)
        scores = scores + mask

        if np.isnan(scores.data).any():
            _, head, query, _ = np.argwhere(np.isnan(scores.data))[0]
            raise NumericalError(
                "NaN in attention scores", where=f"{self.name} head {head} query {query}"
            )
        weights = softmax_lastdim(scores)
        heads = weights @ v
        merged = heads.transpose(0, 2, 1, 3).reshape(b, s, self.d_model)
        return AttentionTrace(
            output=self.wo(merged),
            weights=weights.data,
            alpha=trace_alpha,
            mu=trace_mu,
            bias=trace_bias,
        )

    def forward(self, x: Tensor, t: np.ndarray, lengths: Optional[np.ndarray] = None) -> Tensor:
        return self.trace(x, t, lengths).output


def mata_attention_forward(
    x: Tensor,
    t: np.ndarray,
    attention: MataAttention,
    lengths: Optional[np.ndarray] = None,
) -> Tensor:
    """mata_attention_forward runs one biased attention layer on [B, S, d] inputs"""
    return attention(x, t, lengths)
