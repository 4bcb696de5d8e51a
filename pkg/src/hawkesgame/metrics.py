"""Cooperator fraction and non-uniformity indices of the action counts."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .lattice import Lattice


@dataclass(frozen=True)
class GenerationStats:
    f_C: float
    mean_d: float
    sigma_d: float = math.nan
    gamma_1: Optional[float] = None
    r_d: float = math.nan


def fraction_cooperators(cooperate: np.ndarray) -> float:
    cooperate = np.asarray(cooperate, dtype=bool)
    if cooperate.size == 0:
        raise ValueError("empty population")
    return float(np.count_nonzero(cooperate)) / cooperate.size


def sigma_d(d, raw_variance: bool = False) -> float:
    """Sample standard deviation (ddof=1) of the action counts.

    ``raw_variance=True`` returns the unrooted sample variance instead.
    """
    d = np.asarray(d, dtype=np.float64)
    if d.size < 2:
        raise ValueError(f"need at least 2 counts, got {d.size}")
    var = float(np.var(d, ddof=1))
    return var if raw_variance else math.sqrt(var)


def fit_power_law(values, freqs) -> Optional[float]:
    """Decay exponent of ``freqs ~ values**-gamma`` by least squares in log-log space.

    Only points with value >= 1 and positive frequency enter the fit. Returns
    None when fewer than three such points remain.
    """
    x = np.asarray(values, dtype=np.float64)
    y = np.asarray(freqs, dtype=np.float64)
    keep = (x >= 1) & (y > 0)
    if np.count_nonzero(keep) < 3:
        return None
    lx, ly = np.log(x[keep]), np.log(y[keep])
    slope = np.polyfit(lx, ly, 1)[0]
    return float(-slope)


def fit_gamma1(d) -> Optional[float]:
    """Power-law exponent of the empirical distribution of counts ``d``."""
    d = np.asarray(d, dtype=np.int64)
    if d.size == 0:
        return None
    freqs = np.bincount(d)
    return fit_power_law(np.arange(len(freqs)), freqs)


def donation_correlation(d, lattice: Lattice) -> float:
    """Edge-wise correlation of neighbouring action counts.

    Evaluated in exact integer arithmetic up to the final division, so the
    degenerate all-equal case returns exactly 1 and a two-colouring returns
    exactly -1.
    """
    d = np.asarray(d, dtype=np.int64)
    if d.shape != (lattice.N,):
        raise ValueError(f"expected {lattice.N} counts, got shape {d.shape}")
    n = lattice.N
    n_e = lattice.n_edges
    s1 = int(d.sum())
    s2 = int((d * d).sum())
    u, v = lattice.edges[:, 0], lattice.edges[:, 1]
    se = int((d[u] * d[v]).sum())
    den = n_e * (n * s2 - s1 * s1)
    if den == 0:
        return 1.0
    # multiply through by N^2
    num = n * n * se - n_e * s1 * s1
    return num / den


def generation_stats(cooperate, d, lattice: Lattice, full: bool = True, sigma_raw: bool = False) -> GenerationStats:
    f_c = fraction_cooperators(cooperate)
    mean_d = float(np.mean(d))
    if not full:
        return GenerationStats(f_c, mean_d)
    return GenerationStats(
        f_C=f_c,
        mean_d=mean_d,
        sigma_d=sigma_d(d, raw_variance=sigma_raw),
        gamma_1=fit_gamma1(d),
        r_d=donation_correlation(d, lattice),
    )


def average_stats(stats: Sequence[GenerationStats]) -> GenerationStats:
    """Average per-generation stats; gamma_1 over the generations where it was fittable."""
    if not stats:
        raise ValueError("no generations to average")
    gammas = [s.gamma_1 for s in stats if s.gamma_1 is not None]
    return GenerationStats(
        f_C=float(np.mean([s.f_C for s in stats])),
        mean_d=float(np.mean([s.mean_d for s in stats])),
        sigma_d=float(np.mean([s.sigma_d for s in stats])),
        gamma_1=float(np.mean(gammas)) if gammas else None,
        r_d=float(np.mean([s.r_d for s in stats])),
    )
