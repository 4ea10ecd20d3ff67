"""Closed-form constants, bounds and envelopes used to cross-check the simulation."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import integrate, optimize

from .sphere import GeometryDomainError


def solve_t0(eps1: float = 1.0 / 32) -> float:
    """Root of (1 - 16t/pi)/(8 - t) = 1/8 - eps1 on (0, pi/16)."""
    target = 0.125 - eps1
    if not 0 < target < 0.125:
        raise GeometryDomainError("eps1 must lie in (0, 1/8)")
    return optimize.brentq(lambda t: (1 - 16 * t / math.pi) / (8 - t) - target, 0.0, math.pi / 16,
                           xtol=1e-15, rtol=4 * np.finfo(float).eps)


def solve_m0(c1: float, eps2: float = 1.0 / 32) -> float:
    """Smallest M with 2(1 + c1)/M <= eps2."""
    if c1 < 0 or not 0 < eps2 < 1:
        raise GeometryDomainError("need c1 >= 0 and eps2 in (0, 1)")
    return 2.0 * (1.0 + c1) / eps2


def beta0(t0: float, M0: float, alpha: float) -> float:
    if not t0 > 0:
        raise GeometryDomainError("t0 must be positive")
    if not M0 > 9:
        raise GeometryDomainError("M0 must exceed 9")
    return ((M0 + 8.0) / t0) ** alpha


def beta1(M0: float, alpha: float) -> float:
    if not M0 > 16:
        raise GeometryDomainError("M0 must exceed 16")
    return 100.0 ** alpha * (M0 + 8.0) ** alpha


def log_phi_continuous(sinr: float, kappa: float = 1.0) -> float:
    """log(1 - exp(-kappa s)); stays finite where 1 - exp(-kappa s) rounds to 1."""
    return math.log1p(-math.exp(-kappa * sinr))


def expected_delta_L(delta: float, n: float) -> float:
    """E[delta^L] for L the geodesic distance between two uniform points on the sphere of area n."""
    if not 0 < delta <= 1:
        raise GeometryDomainError("delta must lie in (0, 1]")
    if not n > 0:
        raise GeometryDomainError("n must be positive")
    ld = math.log(delta)
    return 2 * math.pi * (1 + delta ** (math.sqrt(math.pi * n) / 2)) / (4 * math.pi + n * ld * ld)


def per_link_loss_budget(epsilon: float, n: float, rho_n: float) -> float:
    if not 0 < epsilon < 1:
        raise GeometryDomainError("epsilon must lie in (0, 1)")
    return math.sqrt(math.pi) * rho_n * epsilon / (8 * math.sqrt(n))


def throughput_upper_pi1(lambda_n: float, n: float, rho_n: float, phi_beta0: float) -> float:
    if not 0 < phi_beta0 < 1:
        raise GeometryDomainError("phi(beta0) must lie in (0, 1)")
    return throughput_upper_pi1_log(lambda_n, n, rho_n, math.log(phi_beta0))


def throughput_upper_pi1_log(lambda_n: float, n: float, rho_n: float, log_phi_beta0: float) -> float:
    """Same bound from log phi(beta0); infinite (vacuous) when the log underflows to 0."""
    if log_phi_beta0 > 0:
        raise GeometryDomainError("log phi(beta0) must be negative")
    if log_phi_beta0 == 0:
        return math.inf
    return lambda_n * 1024 * math.pi * rho_n ** 2 / (n * log_phi_beta0 ** 2)


def loss_bound_c1(log_phi_beta0: float) -> float:
    """Constant of the c/n form obtained with lambda_n = 1/(50 ln n) and rho_n^2 = 100 ln n."""
    return 2048 * math.pi / log_phi_beta0 ** 2


def loss_bound_c0(log_phi_beta0: float, rho_coef: float = 10.0) -> float:
    """Constant of the lambda_n c0 ln n / n form when rho_n = rho_coef sqrt(ln n)."""
    return 1024 * math.pi * rho_coef ** 2 / log_phi_beta0 ** 2


def kn_coefficients(alpha: float) -> tuple[float, float, float]:
    """a0, a1, a2 with K_n = V_n + 1 = a0 + a1 x + a2 x^2, x = (ln n)^(1/(alpha - 2))."""
    if not alpha > 2:
        raise GeometryDomainError("alpha must exceed 2")
    g = (256.0 / (alpha - 2.0)) ** (1.0 / (alpha - 2.0))
    return 9.0, 64.0 * g, 128.0 * g * g


def throughput_lower_pi2(n: float, alpha: float, epsilon: float, w_bandwidth: float = 1.0,
                         c5: float = 1.0) -> float:
    a0, a1, a2 = kn_coefficients(alpha)
    ln = math.log(n)
    x = ln ** (1.0 / (alpha - 2.0))
    return (1 - epsilon) * w_bandwidth / (c5 * math.sqrt(n * ln) * (a0 + a1 * x + a2 * x * x))


def pi2_envelope(n: float, alpha: float) -> float:
    """1 / (sqrt(n) (ln n)^((alpha + 2)/(2(alpha - 2)))), the asymptotic order of the pi2 goodput."""
    return 1.0 / (math.sqrt(n) * math.log(n) ** ((alpha + 2) / (2 * (alpha - 2))))


def ni_bound(L: float, rho_n: float, M: float, c1: float) -> float:
    if not M > 9:
        raise GeometryDomainError("M must exceed 9")
    return (L / rho_n) * 2 * (1 + c1) / M


def lemma1_bounds(L, rho_n: float):
    """(lower, upper) on the hop count of a straight-line route of length L."""
    L = np.asarray(L, dtype=float)
    return L / (8 * rho_n), 16 * L / (math.pi * rho_n)


def lemma2_bound(L, rho_n: float, t_frac: float):
    """Lower bound on the number of hops at least t_frac rho_n long."""
    return np.asarray(L, dtype=float) / rho_n * (1 - 16 * t_frac / math.pi) / (8 - t_frac)


# -------------------------------------------------------------- hop-count model

def crossing_hops(L, boundary_length: float, area: float):
    """Expected hop count of a straight route of length L: mean cell-boundary crossings, at least one.

    A random great-circle arc of length L crosses an edge network of total length B on a
    sphere of area A on average 2 L B / (pi A) times.
    """
    return np.maximum(1.0, 2.0 * np.asarray(L, dtype=float) * boundary_length / (math.pi * area))


def expected_success_fixed_p(p: float, n: float, boundary_length: float) -> float:
    """E_L[p^H(L)] under the pair-distance law with the crossing-count hop model."""
    k = math.sqrt(math.pi / n)
    lmax = math.sqrt(math.pi * n) / 2
    c = 2.0 * boundary_length / (math.pi * n)
    lp = math.log(p)

    def f(l):
        return math.exp(lp * max(1.0, c * l)) * k * math.sin(2 * k * l)

    knot = min(1.0 / c, lmax)
    a = integrate.quad(f, 0.0, knot, epsabs=1e-13, epsrel=1e-11, limit=200)[0]
    b = integrate.quad(f, knot, lmax, epsabs=1e-13, epsrel=1e-11, limit=200)[0] if knot < lmax else 0.0
    return a + b


# -------------------------------------------------------------- bundled constants

@dataclass(frozen=True)
class AnalysisConstants:
    alpha: float
    c1: float
    kappa: float
    rho_n: float
    epsilon: float
    t0: float
    M0: float
    beta0: float
    beta1: float
    log_phi_beta0: float
    log_delta: float
    c5: float = 1.0

    @property
    def delta(self) -> float:
        return math.exp(self.log_delta)

    @classmethod
    def build(cls, alpha: float, c1: float, rho_n: float, *, kappa: float = 1.0, epsilon: float = 0.05,
              eps1: float = 1.0 / 32, eps2: float = 1.0 / 32, c5: float = 1.0) -> "AnalysisConstants":
        if not 0 < epsilon < 1:
            raise GeometryDomainError("epsilon must lie in (0, 1)")
        t0 = solve_t0(eps1)
        M0 = solve_m0(c1, eps2)
        b0 = beta0(t0, M0, alpha)
        lphi = log_phi_continuous(b0, kappa)
        return cls(alpha, c1, kappa, rho_n, epsilon, t0, M0, b0, beta1(M0, alpha), lphi,
                   lphi / (16 * rho_n), c5)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["delta"] = self.delta
        return d

