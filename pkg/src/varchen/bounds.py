"""Cheap eigenvalue bounds for the damped L-BFGS inverse-Hessian operator.

Every damped pair satisfies ``s @ y_hat >= (eta / tau_i) ||s||^2`` and
``||y_hat|| <= (L_g + 1 / tau_i) ||s||``, which is all the single-update
bound needs. Chaining it over the stored pairs gives ``(lambda_k, Lambda_k)``
in O(p) scalar work.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .memory import CurvaturePair

LG_MODES = ("per-pair", "running-max", "fixed")


@dataclass(frozen=True)
class SpectrumBounds:
    lambda_lo: float
    lambda_hi: float
    per_step_trace: tuple = field(default=())


@dataclass(frozen=True)
class MonitorConfig:
    lambda_min_limit: float = 1e-6
    lambda_max_limit: float = 1e6
    lg_mode: str = "running-max"
    lg_fixed: Optional[float] = None

    def __post_init__(self):
        if not 0.0 < self.lambda_min_limit < self.lambda_max_limit:
            raise ValueError("need 0 < lambda_min_limit < lambda_max_limit")
        if self.lg_mode not in LG_MODES:
            raise ValueError(f"unknown lg_mode {self.lg_mode!r}")
        if self.lg_mode == "fixed" and not (self.lg_fixed is not None and self.lg_fixed > 0):
            raise ValueError("fixed lg_mode needs a positive lg_fixed")


def lemma1_bounds(gamma: float, L_y: float, mu: float) -> tuple[float, float]:
    """Eigenvalue bounds for ``A = mu V V^T + rho s s^T``, ``V = I - rho s y^T``.

    Valid whenever ``s @ y >= gamma ||s||^2`` and ``||y|| <= L_y ||s||``
    (which together imply ``gamma <= L_y`` and hence ``lower <= upper``).
    """
    for name, v in (("gamma", gamma), ("L_y", L_y), ("mu", mu)):
        if not (np.isfinite(v) and v > 0):
            raise ValueError(f"{name} must be positive and finite, got {v}")
    shrink = mu / (1.0 + mu / gamma * L_y**2)
    lower = min(1.0 / L_y, shrink)
    upper = 1.0 / gamma + max(0.0, mu / gamma**2 * L_y**2 - shrink)
    return lower, upper


def estimate_lg(pairs: Sequence[CurvaturePair], mode: str = "running-max",
                fixed: Optional[float] = None):
    """Lipschitz estimate(s) of the stochastic gradient from stored pairs.

    ``per-pair`` returns a list (one ratio ``||y|| / ||s||`` per pair); the
    other modes return a single float.
    """
    if mode == "per-pair":
        return [p.lg_local for p in pairs]
    if mode == "running-max":
        return max((p.lg_local for p in pairs), default=0.0)
    if mode == "fixed":
        return float(fixed)
    raise ValueError(f"unknown lg_mode {mode!r}")


def theorem1_bounds(pairs: Sequence[CurvaturePair], tau_now: float, eta: float,
                    config: MonitorConfig) -> SpectrumBounds:
    """Recursive ``(lambda_k, Lambda_k)`` for the operator built from ``pairs``.

    The recursion is seeded with ``H0 = tau_now * I`` and walks the pairs
    oldest first (the innermost update of the L-BFGS product first). Each step
    uses that pair's frozen ``tau_i`` for its curvature and norm constants.
    The upper recursion is the relaxed one that subtracts the lower-bound
    term, so it only needs the running pair of bounds.
    """
    pairs = list(pairs)
    if not pairs:
        return SpectrumBounds(float(tau_now), float(tau_now), ())
    if config.lg_mode == "per-pair":
        lgs = [p.lg_local for p in pairs]
    else:
        lg = estimate_lg(pairs, config.lg_mode, config.lg_fixed)
        lgs = [lg] * len(pairs)

    mu1 = mu2 = float(tau_now)
    trace = []
    for h, (pair, lg) in enumerate(zip(pairs, lgs)):
        gamma = eta / pair.tau
        L = lg + 1.0 / pair.tau
        c = L * L / gamma
        lo = min(1.0 / L, mu1 / (1.0 + mu1 * c))
        hi = 1.0 / gamma + max(0.0, mu2 * c / gamma - mu1 / (1.0 + mu2 * c))
        mu1, mu2 = lo, hi
        trace.append((h, mu1, mu2))
    return SpectrumBounds(mu1, mu2, tuple(trace))


def check_and_flush(bounds: SpectrumBounds, config: MonitorConfig) -> str:
    """``"flush"`` when the bounds leave the admissible interval, else ``"keep"``."""
    if bounds.lambda_hi > config.lambda_max_limit or bounds.lambda_lo < config.lambda_min_limit:
        return "flush"
    return "keep"
