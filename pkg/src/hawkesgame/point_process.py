"""Exponential-kernel Hawkes intensity, branching ratios and rate calibration.

The kernel used everywhere is

    g(tau) = alpha * nu * exp(-beta * nu * tau),   tau >= 0

so the area under it (the branching ratio) is alpha / beta whatever nu is.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Optional


class StationarityError(ValueError):
    """Raised when the excitation parameters admit a diverging process."""


class CaseKind(str, enum.Enum):
    STANDARD = "standard"
    POISSON = "poisson"
    ENDO = "endo"
    EXO = "exo"

    @classmethod
    def parse(cls, value: "str | CaseKind") -> "CaseKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            valid = ", ".join(c.value for c in cls)
            raise ValueError(f"unknown case {value!r}; expected one of: {valid}") from None

    @property
    def uses_hawkes(self) -> bool:
        return self is not CaseKind.STANDARD


@dataclass(frozen=True)
class KernelParams:
    """Population-wide excitation parameters.

    rho is the baseline rate, alpha_n / alpha_x the strengths of self and
    neighbour excitation, beta the decay ratio and nu the shape factor.
    """

    rho: float
    alpha_n: float = 0.0
    alpha_x: float = 0.0
    beta: float = 1.0
    nu: float = 1.0

    def __post_init__(self):
        if not self.rho >= 0:
            raise ValueError(f"rho must be >= 0, got {self.rho}")
        if not self.beta > 0:
            raise ValueError(f"beta must be > 0, got {self.beta}")
        if not self.nu > 0:
            raise ValueError(f"nu must be > 0, got {self.nu}")
        for name in ("alpha_n", "alpha_x"):
            a = getattr(self, name)
            if not 0 <= a < 1:
                raise ValueError(f"{name} must lie in [0, 1), got {a}")

    @property
    def decay(self) -> float:
        """Exponential decay rate of a single excitation, beta * nu."""
        return self.beta * self.nu

    def check_stationary(self, k: int) -> None:
        check_stationary(self.alpha_n, self.alpha_x, self.beta, k)


def kernel_eval(params: KernelParams, which: str, tau: float) -> float:
    """Contribution of one past event after elapsed time ``tau``.

    ``which`` selects the excitation strength: ``"endo"`` for the agent's own
    events, ``"exo"`` for a neighbour's.
    """
    if which == "endo":
        alpha = params.alpha_n
    elif which == "exo":
        alpha = params.alpha_x
    else:
        raise ValueError(f"which must be 'endo' or 'exo', got {which!r}")
    if tau < 0:
        return 0.0
    return alpha * params.nu * math.exp(-params.decay * tau)


def intensity_at(
    params: KernelParams,
    own_events: Iterable[float],
    neighbor_events: Iterable[float],
    t: float,
) -> float:
    """Evaluate the intensity at ``t`` by summing over the full history.

    This is the direct O(history) form; the sampler keeps a decayed
    accumulator instead. Every event time must be strictly before ``t``.
    """
    lam = params.rho
    for which, events in (("endo", own_events), ("exo", neighbor_events)):
        for s in events:
            if s >= t:
                raise ValueError(f"event at {s} is not before evaluation time {t}")
            lam += kernel_eval(params, which, t - s)
    return lam


def branching_ratio(alpha: float, beta: float, nu: float = 1.0) -> float:
    """Expected number of direct offspring per event, alpha / beta."""
    if not beta > 0:
        raise ValueError(f"beta must be > 0, got {beta}")
    if not nu > 0:
        raise ValueError(f"nu must be > 0, got {nu}")
    return alpha / beta


def expected_intensity_single(params: KernelParams) -> float:
    """Long-run event rate rho / (1 - gamma) of a single self-exciting agent."""
    gamma = branching_ratio(params.alpha_n, params.beta, params.nu)
    if gamma >= 1:
        raise StationarityError(f"branching ratio {gamma:g} >= 1; the process is not stationary")
    return params.rho / (1.0 - gamma)


def gershgorin_bounds(alpha_n: float, alpha_x: float, beta: float, k: int) -> tuple[float, float]:
    """Eigenvalue bounds of the lattice branching matrix.

    Every row of the matrix has alpha_n / beta on the diagonal and k
    off-diagonal entries alpha_x / beta, so there is a single Gershgorin disc.
    """
    if not beta > 0:
        raise ValueError(f"beta must be > 0, got {beta}")
    centre = alpha_n / beta
    radius = k * alpha_x / beta
    return centre - radius, centre + radius


def check_stationary(alpha_n: float, alpha_x: float, beta: float, k: int) -> None:
    lo, hi = gershgorin_bounds(alpha_n, alpha_x, beta, k)
    if hi >= 1 or lo <= -1:
        raise StationarityError(
            f"Gershgorin bound (alpha_n + k*alpha_x)/beta = ({alpha_n:g} + {k}*{alpha_x:g})/{beta:g} "
            f"= {hi:g} is not below 1; spectral radius of the branching matrix may reach 1"
        )


def calibrate_rho(target_rate: float, alpha_n: float, alpha_x: float, beta: float, k: int) -> float:
    """Baseline rate that makes every agent's mean rate equal ``target_rate``."""
    if not target_rate > 0:
        raise ValueError(f"target_rate must be > 0, got {target_rate}")
    check_stationary(alpha_n, alpha_x, beta, k)
    return target_rate * (1.0 - (alpha_n + k * alpha_x) / beta)


def lattice_expected_rate(params: KernelParams, k: int) -> float:
    """Mean per-agent rate on a k-regular lattice with uniform parameters."""
    check_stationary(params.alpha_n, params.alpha_x, params.beta, k)
    return params.rho / (1.0 - (params.alpha_n + k * params.alpha_x) / params.beta)


def default_beta(case: CaseKind, k: int) -> float:
    # beta = o_n + k*o_x, with the indicator fixed by the case rather than by alpha > 0,
    # so an Exo cell keeps beta = k even when alpha = 0.
    case = CaseKind.parse(case)
    return float(k) if case is CaseKind.EXO else 1.0


def params_for_case(
    case: "CaseKind | str",
    alpha: float,
    nu: float,
    k: int,
    target_rate: float = 1.0,
    beta: Optional[float] = None,
) -> Optional[KernelParams]:
    """Calibrated kernel parameters for one experimental case.

    Returns None for the standard model, which has no timing process.
    """
    case = CaseKind.parse(case)
    if case is CaseKind.STANDARD:
        return None
    if beta is None:
        beta = default_beta(case, k)
    alpha_n = alpha if case is CaseKind.ENDO else 0.0
    alpha_x = alpha if case is CaseKind.EXO else 0.0
    rho = calibrate_rho(target_rate, alpha_n, alpha_x, beta, k)
    return KernelParams(rho=rho, alpha_n=alpha_n, alpha_x=alpha_x, beta=beta, nu=nu)
