"""SINR and link-layer success models."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .sphere import GeometryDomainError, SphereParams, SpherePoint, geodesic_distance

LINK_KINDS = ("threshold", "continuous", "fixed")


@dataclass(frozen=True)
class PhyParams:
    alpha: float = 4.0
    power_p: float = 1.0
    noise_n: float = 0.0
    beta_threshold: float = 10.0

    def __post_init__(self):
        if not self.alpha > 2:
            raise ValueError("path-loss exponent alpha must exceed 2")
        if not self.power_p > 0:
            raise ValueError("transmit power must be positive")
        if self.noise_n < 0:
            raise ValueError("noise power must be non-negative")


@dataclass(frozen=True)
class LinkModel:
    kind: str = "continuous"
    kappa: float = 1.0
    p_fixed: float = 1.0
    retransmissions: int = 0
    beta: float = 10.0

    def __post_init__(self):
        if self.kind not in LINK_KINDS:
            raise ValueError(f"link model kind must be one of {LINK_KINDS}, got {self.kind!r}")
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")
        if not 0 < self.p_fixed <= 1:
            raise ValueError("p_fixed must lie in (0, 1]")
        if self.retransmissions < 0 or int(self.retransmissions) != self.retransmissions:
            raise ValueError("retransmissions must be a non-negative integer")


def sinr_from_distances(d_signal, interference_sum, pp: PhyParams):
    """SINR given the signal distance and the unit-power interference sum sum_k d_k^-alpha."""
    d_signal = np.asarray(d_signal, dtype=float)
    if np.any(d_signal <= 0):
        raise GeometryDomainError("transmitter and receiver coincide")
    with np.errstate(divide="ignore"):
        return d_signal ** -pp.alpha / (pp.noise_n / pp.power_p + np.asarray(interference_sum, dtype=float))


def compute_sinr(rx: SpherePoint, tx: SpherePoint, interferers: Iterable[SpherePoint], pp: PhyParams,
                 sp: SphereParams) -> float:
    d = geodesic_distance(tx, rx, sp)
    if d <= 0:
        raise GeometryDomainError("transmitter and receiver coincide")
    signal = pp.power_p * d ** -pp.alpha
    interference = 0.0
    for k in interferers:
        dk = geodesic_distance(k, rx, sp)
        if dk <= 0:
            raise GeometryDomainError("an interferer sits on the receiver")
        interference += pp.power_p * dk ** -pp.alpha
    denom = pp.noise_n + interference
    return math.inf if denom == 0 else signal / denom


def success_prob(sinr, lm: LinkModel):
    """Per-attempt success mapped through the link model, then r retransmissions."""
    s = np.asarray(sinr, dtype=float)
    if lm.kind == "threshold":
        base = (s >= lm.beta).astype(float)
    elif lm.kind == "continuous":
        base = -np.expm1(-lm.kappa * s)
    else:
        base = np.full(s.shape, lm.p_fixed)
    if lm.retransmissions:
        base = 1.0 - (1.0 - base) ** (lm.retransmissions + 1)
    return float(base) if base.ndim == 0 else base


def hop_log_success(sinr, lm: LinkModel) -> np.ndarray:
    """log of success_prob, accurate when the failure probability is tiny."""
    s = np.asarray(sinr, dtype=float)
    r1 = lm.retransmissions + 1
    if lm.kind == "continuous":
        with np.errstate(divide="ignore"):
            return np.log1p(-np.exp(-lm.kappa * s * r1))
    with np.errstate(divide="ignore"):
        return np.log(np.asarray(success_prob(s, lm), dtype=float))


def route_success_prob(per_hop) -> float:
    p = np.asarray(list(per_hop), dtype=float)
    if np.any((p < 0) | (p > 1)):
        raise ValueError("per-hop probabilities must lie in [0, 1]")
    return float(np.prod(p))
