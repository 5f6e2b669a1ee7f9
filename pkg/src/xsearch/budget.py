"""Feedback control of the risk tolerance under a failure budget.

The tolerance ``rho`` is driven through its probit ``z = Phi^-1(rho)``. Each
step pulls ``z`` toward ``z_safe`` after a failure (harder when few failures
remain) and toward ``z_risk`` in proportion to remaining failures per
remaining evaluation.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

from scipy.stats import norm

Z_CLIP = 8.0


class Branch(str, enum.Enum):
    SAFE = "SAFE"
    RISKY = "RISKY"


@dataclass(frozen=True)
class ControllerConfig:
    rho_safe: float = 0.99
    rho_risk: float = 0.01
    rho_0: float = 0.1
    rho_b: float = 0.5

    def __post_init__(self):
        for name in ("rho_safe", "rho_risk", "rho_0", "rho_b"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ValueError(f"{name} must lie in (0, 1), got {v}")
        if not self.rho_risk < self.rho_b < self.rho_safe:
            raise ValueError("need rho_risk < rho_b < rho_safe")

    @property
    def z_safe(self) -> float:
        return float(norm.ppf(self.rho_safe))

    @property
    def z_risk(self) -> float:
        return float(norm.ppf(self.rho_risk))


@dataclass(frozen=True)
class BudgetState:
    """Remaining failures ``delta_b``, remaining evaluations ``delta_t``."""

    delta_b: int
    delta_t: int
    z: float
    t: int = 0

    @classmethod
    def initial(cls, budget: int, horizon: int, cfg: ControllerConfig) -> "BudgetState":
        if budget < 0 or horizon < 1:
            raise ValueError("need B >= 0 and T >= 1")
        return cls(budget, horizon, float(norm.ppf(cfg.rho_0)), 0)

    @property
    def rho(self) -> float:
        return float(norm.cdf(self.z))


def control_input(state: BudgetState, cfg: ControllerConfig, failure: bool) -> float:
    db, dt, z = state.delta_b, state.delta_t, state.z
    if db == 0:
        return cfg.z_safe - z
    if db > dt:
        return cfg.z_risk - z
    gamma = 1.0 if failure else 0.0
    return (cfg.z_safe - z) * gamma / db + (cfg.z_risk - z) * db / (2.0 * dt)


def update_rho(state: BudgetState, cfg: ControllerConfig, failure: bool) -> BudgetState:
    """One controller step; ``failure`` is the outcome of the last evaluation."""
    if state.delta_t <= 0:
        raise ValueError("no evaluations remain; the run is over")
    if state.delta_b == 0:
        z = cfg.z_safe  # deadbeat overrides land on the reference exactly
    elif state.delta_b > state.delta_t:
        z = cfg.z_risk
    else:
        z = state.z + control_input(state, cfg, failure)
    z = min(max(z, -Z_CLIP), Z_CLIP)
    delta_b = state.delta_b - 1 if (failure and state.delta_b > 0) else state.delta_b
    return replace(state, delta_b=delta_b, delta_t=state.delta_t - 1, z=z, t=state.t + 1)


def select_branch(state: BudgetState, cfg: ControllerConfig, safe_area_found: bool) -> Branch:
    if not safe_area_found:
        return Branch.RISKY
    return Branch.RISKY if state.rho <= cfg.rho_b else Branch.SAFE
