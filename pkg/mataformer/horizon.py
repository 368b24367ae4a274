"""Attention horizons: from Laplacian parameters (mu, alpha) to physical time windows.

A key at log-distance D receives bias -alpha * |D - mu|. Relative to the peak,
its attention weight is scaled by exp(-Gamma) once the penalty reaches Gamma,
so the effective band is |D - mu| <= X with X = Gamma / alpha. Inverting
D = ln(dt / tau + 1) turns the band into the physical window [t_min, t_max].
"""
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from mataformer.consts import ALPHA_FLOOR, ALPHA_LIMIT, GAMMA_CUTOFF, TAU
from mataformer.model import MataFormer, probe_fields


def relative_attention_ratio(gamma):
    """relative_attention_ratio is exp(-gamma), the weight left at penalty gamma relative to the peak"""
    gamma = np.asarray(gamma, dtype=np.float64)
    if np.any(gamma < 0):
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    out = np.exp(-gamma)
    return float(out) if out.ndim == 0 else out


def suppression_threshold(ratio: float) -> float:
    """suppression_threshold is the cutoff Gamma that leaves ``ratio`` of the peak weight"""
    if not 0 < ratio <= 1:
        raise ValueError(f"ratio must lie in (0, 1], got {ratio}")
    return float(-np.log(ratio))


def log_radius(alpha, gamma_cutoff: float = GAMMA_CUTOFF):
    alpha = np.asarray(alpha, dtype=np.float64)
    if np.any(alpha <= 0):
        raise ValueError("alpha must be positive")
    out = gamma_cutoff / alpha
    return float(out) if out.ndim == 0 else out


def physical_bounds(mu, alpha, gamma_cutoff: float = GAMMA_CUTOFF, tau: float = TAU):
    """physical_bounds returns (t_min, t_max) in seconds; t_min is rectified at 0"""
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    x = np.asarray(log_radius(alpha, gamma_cutoff))
    mu = np.asarray(mu, dtype=np.float64)
    t_min = np.maximum(0.0, tau * np.expm1(mu - x))
    t_max = tau * np.expm1(mu + x)
    if t_min.ndim == 0 and t_max.ndim == 0:
        return float(t_min), float(t_max)
    return t_min, t_max


def bandwidth(mu, alpha, gamma_cutoff: float = GAMMA_CUTOFF, tau: float = TAU):
    """bandwidth is tau * e^mu * (e^X - e^-X), the unrectified width of the physical window

    It is not t_max - t_min when the lower bound gets rectified. Since it is
    proportional to e^mu, its derivative in mu equals itself.
    """
    x = np.asarray(log_radius(alpha, gamma_cutoff))
    out = tau * np.exp(np.asarray(mu, dtype=np.float64)) * 2.0 * np.sinh(x)
    return float(out) if out.ndim == 0 else out


def mu_time_anchor(mu, tau: float = TAU):
    """mu_time_anchor is the physical lag tau * (e^mu - 1) whose log-distance equals mu"""
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    out = tau * np.expm1(np.asarray(mu, dtype=np.float64))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ReceptiveField:
    layer: int = field(kw_only=True)
    head: int = field(kw_only=True)
    mu: float = field(kw_only=True)
    alpha: float = field(kw_only=True)
    gamma_cutoff: float = field(kw_only=True, default=GAMMA_CUTOFF)
    #: log-distance radius Gamma / alpha
    X: float = field(kw_only=True)
    #: seconds
    t_min: float = field(kw_only=True)
    t_max: float = field(kw_only=True)
    #: unrectified bandwidth, seconds
    bandwidth: float = field(kw_only=True)

    @classmethod
    def at(
        cls,
        mu: float,
        alpha: float,
        layer: int = 0,
        head: int = 0,
        gamma_cutoff: float = GAMMA_CUTOFF,
        tau: float = TAU,
    ) -> "ReceptiveField":
        t_min, t_max = physical_bounds(mu, alpha, gamma_cutoff, tau)
        return cls(
            layer=layer,
            head=head,
            mu=float(mu),
            alpha=float(alpha),
            gamma_cutoff=gamma_cutoff,
            X=log_radius(alpha, gamma_cutoff),
            t_min=t_min,
            t_max=t_max,
            bandwidth=bandwidth(mu, alpha, gamma_cutoff, tau),
        )


CSV_COLUMNS: tuple[str, ...] = ("layer", "head", "mu", "alpha", "gamma_cutoff", "X", "t_min", "t_max", "bandwidth")


def _summary(values: np.ndarray, lo: float, hi: float, bins: int) -> dict[str, Any]:
    counts, edges = np.histogram(values, bins=bins, range=(lo, hi))
    return {
        "mean": float(values.mean()),
        "std": float(values.std()),
        "min": float(values.min()),
        "max": float(values.max()),
        "histogram": {"edges": edges.tolist(), "counts": counts.tolist()},
    }


def report_fields(
    model: MataFormer,
    x,
    t,
    lengths: Optional[np.ndarray] = None,
    gamma_cutoff: float = GAMMA_CUTOFF,
    bins: int = 20,
) -> dict[str, Any]:
    """report_fields summarizes static priors and dynamic (mu, alpha) per layer and head over probe queries

    Only valid (unpadded) query positions enter the distributions. Each head
    gets a receptive field at its static prior and at its mean dynamic
    parameters, plus histograms of mu, alpha and their joint distribution.
    """
    config = model.config
    fields = probe_fields(model, x, t, lengths)
    b, _, s = fields[0]["alpha"].shape if fields else (0, 0, 0)
    valid = np.ones((b, s), dtype=bool)
    if lengths is not None:
        valid = np.arange(s)[None, :] < np.asarray(lengths)[:, None]

    layers = []
    for index, (block, probed) in enumerate(zip(model.blocks, fields)):
        temporal = block.attn.temporal
        static_alpha = np.clip(temporal.alpha_bar.data, ALPHA_FLOOR, ALPHA_LIMIT)
        static_mu = temporal.mu_bar()
        heads = []
        for h in range(temporal.n_heads):
            alpha = probed["alpha"][:, h][valid]
            mu = probed["mu"][:, h][valid]
            joint, mu_edges, alpha_edges = np.histogram2d(
                mu, alpha, bins=bins, range=[[0.0, config.gamma_mu], [ALPHA_FLOOR, ALPHA_LIMIT]]
            )
            heads.append(
                {
                    "head": h,
                    "static": {
                        "mu": float(static_mu[h]),
                        "mu_probability": float(static_mu[h] / config.gamma_mu),
                        "alpha": float(static_alpha[h]),
                        "field": asdict(
                            ReceptiveField.at(static_mu[h], static_alpha[h], index, h, gamma_cutoff, config.tau)
                        ),
                    },
                    "dynamic": {
                        "queries": int(mu.size),
                        "mu": _summary(mu, 0.0, config.gamma_mu, bins),
                        "alpha": _summary(alpha, ALPHA_FLOOR, ALPHA_LIMIT, bins),
                        "joint": {
                            "mu_edges": mu_edges.tolist(),
                            "alpha_edges": alpha_edges.tolist(),
                            "counts": joint.astype(int).tolist(),
                        },
                        "field": asdict(
                            ReceptiveField.at(mu.mean(), alpha.mean(), index, h, gamma_cutoff, config.tau)
                        ),
                    },
                }
            )
        layers.append({"layer": index, "heads": heads})
    return {
        "gamma_cutoff": gamma_cutoff,
        "relative_attention": relative_attention_ratio(gamma_cutoff),
        "tau": config.tau,
        "layers": layers,
    }


def field_rows(report: dict[str, Any], which: str = "dynamic") -> list[ReceptiveField]:
    return [
        ReceptiveField(**head[which]["field"])
        for layer in report["layers"]
        for head in layer["heads"]
    ]


def write_fields_csv(path: str | Path, rows: Sequence[ReceptiveField]) -> None:
    table = np.array([[getattr(r, c) for c in CSV_COLUMNS] for r in rows], dtype=np.float64).reshape(
        -1, len(CSV_COLUMNS)
    )
    fmt = ["%d", "%d"] + ["%.10g"] * (len(CSV_COLUMNS) - 2)
    np.savetxt(path, table, delimiter=",", header=",".join(CSV_COLUMNS), comments="", fmt=fmt)
