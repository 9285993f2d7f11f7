"""Damped limited-memory BFGS storage.

Curvature pairs are damped at construction time so that every stored pair
satisfies ``s @ y_hat >= eta * ||s||^2 / tau`` where ``tau`` is the scalar of
the initial inverse-Hessian ``H0 = tau * I`` in force when the pair was made.
Search directions come from the usual two-loop recursion over the damped
pairs.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

CLAMP_MODES = ("h0-scalar", "b0-scalar", "none")

# steps shorter than this, relative to 1 + ||x||, are not stored
MIN_STEP_REL = 1e-12


class DegenerateStepError(ValueError):
    """Raised when a curvature pair is requested for a zero step."""


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise ValueError("non-finite input")


@dataclass(frozen=True)
class CurvaturePair:
    s: np.ndarray
    y: np.ndarray
    y_hat: np.ndarray
    rho_hat: float
    theta: float
    tau: float
    lg_local: float


def compute_theta(s, y, tau: float, eta: float) -> float:
    """Powell-style damping coefficient with ``B0 = I / tau``.

    Returns 1 when ``s @ y >= eta * s @ B0 @ s``, otherwise the value that
    puts ``s @ y_hat`` exactly on the threshold.
    """
    s = np.asarray(s, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_finite(s, y, np.asarray(tau), np.asarray(eta))
    if not tau > 0:
        raise ValueError("tau must be positive")
    if not 0.0 < eta < 1.0:
        raise ValueError("eta must lie in (0, 1)")
    sBs = float(s @ s) / tau
    if sBs == 0.0:
        raise DegenerateStepError("zero step")
    sy = float(s @ y)
    if sy >= eta * sBs:
        return 1.0
    return (1.0 - eta) * sBs / (sBs - sy)


def damp_pair(s, y, tau: float, eta: float) -> CurvaturePair:
    s = np.array(s, dtype=float)
    y = np.array(y, dtype=float)
    theta = compute_theta(s, y, tau, eta)
    if theta == 1.0:
        y_hat = y.copy()
    else:
        y_hat = theta * y + (1.0 - theta) / tau * s
    s_norm = float(np.linalg.norm(s))
    return CurvaturePair(
        s=s,
        y=y,
        y_hat=y_hat,
        rho_hat=1.0 / float(s @ y_hat),
        theta=theta,
        tau=float(tau),
        lg_local=float(np.linalg.norm(y)) / s_norm,
    )


def scaling_parameter(s, y) -> float:
    """Raw ``y @ y / s @ y``; sign-unrestricted, ``inf`` when ``s @ y == 0``."""
    sy = float(np.dot(s, y))
    yy = float(np.dot(y, y))
    if sy == 0.0:
        return np.inf if yy > 0 else np.nan
    return yy / sy


def clamp_scaling(gamma: float, gamma_lo: float, gamma_hi: float) -> float:
    """``max(gamma_lo, min(gamma, gamma_hi))``; NaN maps to ``gamma_lo``."""
    if np.isnan(gamma):
        return gamma_lo
    return max(gamma_lo, min(gamma, gamma_hi))


class LbfgsMemory:
    """Bounded store of damped curvature pairs plus the current ``H0`` scalar.

    ``clamp_mode`` selects how the scaling parameter feeds ``H0 = tau * I``:

    ``h0-scalar``
        ``tau = clamp(s@y / y@y)`` (the clamp acts on the ``H0`` scalar).
    ``b0-scalar``
        ``tau = 1 / clamp(y@y / s@y)`` (the clamp acts on ``B0 = H0^-1``).
    ``none``
        ``tau = s@y / y@y`` unclamped, keeping the previous value whenever
        ``s@y <= 0``. Used by the SdLBFGS-VR baseline.
    """

    def __init__(self, memory_p: int = 5, eta: float = 0.25,
                 gamma_lo: float = 1e-4, gamma_hi: float = 1e4,
                 clamp_mode: str = "h0-scalar", tau0: float = 1.0):
        if memory_p < 1:
            raise ValueError("memory_p must be >= 1")
        if not 0.0 < eta < 1.0:
            raise ValueError("eta must lie in (0, 1)")
        if not 0.0 < gamma_lo < gamma_hi:
            raise ValueError("need 0 < gamma_lo < gamma_hi")
        if clamp_mode not in CLAMP_MODES:
            raise ValueError(f"unknown clamp mode {clamp_mode!r}")
        self.memory_p = int(memory_p)
        self.eta = float(eta)
        self.gamma_lo = float(gamma_lo)
        self.gamma_hi = float(gamma_hi)
        self.clamp_mode = clamp_mode
        self.current_tau = float(tau0)
        self.pairs: deque[CurvaturePair] = deque(maxlen=self.memory_p)

    def __len__(self):
        return len(self.pairs)

    def push_pair(self, pair: CurvaturePair) -> None:
        self.pairs.append(pair)

    def flush_to_most_recent(self) -> None:
        """Drop every pair except the newest one (no-op on empty memory)."""
        if len(self.pairs) > 1:
            newest = self.pairs[-1]
            self.pairs.clear()
            self.pairs.append(newest)

    def update_initial_scaling(self, s, y) -> float:
        """Recompute and store the ``H0`` scalar from the newest ``(s, y)``."""
        s = np.asarray(s, dtype=float)
        y = np.asarray(y, dtype=float)
        if not np.any(s):
            raise DegenerateStepError("zero step")
        if self.clamp_mode == "h0-scalar":
            yy = float(y @ y)
            raw = float(s @ y) / yy if yy > 0 else np.inf
            tau = clamp_scaling(raw, self.gamma_lo, self.gamma_hi)
        elif self.clamp_mode == "b0-scalar":
            gamma = clamp_scaling(scaling_parameter(s, y), self.gamma_lo, self.gamma_hi)
            tau = 1.0 / gamma
        else:
            sy = float(s @ y)
            yy = float(y @ y)
            tau = sy / yy if sy > 0 and yy > 0 else self.current_tau
            if not (np.isfinite(tau) and tau > 0):
                tau = self.current_tau
        self.current_tau = float(tau)
        return self.current_tau

    def add_step(self, s, y, x_norm: float = 0.0) -> Optional[CurvaturePair]:
        """Update the scaling from ``(s, y)``, damp the pair with it and store it.

        Returns the stored pair, or ``None`` when the step is too short (or
        non-finite) to give a usable pair; the memory is then left untouched.
        """
        s = np.asarray(s, dtype=float)
        y = np.asarray(y, dtype=float)
        if not (np.all(np.isfinite(s)) and np.all(np.isfinite(y))):
            return None
        if np.linalg.norm(s) <= MIN_STEP_REL * (1.0 + x_norm):
            return None
        tau = self.update_initial_scaling(s, y)
        pair = damp_pair(s, y, tau, self.eta)
        self.push_pair(pair)
        return pair

    def two_loop_direction(self, g) -> np.ndarray:
        """Return ``-H g`` for the damped L-BFGS operator held in memory."""
        g = np.asarray(g, dtype=float)
        _check_finite(g)
        return -apply_inverse_hessian(self.pairs, self.current_tau, g)


def apply_inverse_hessian(pairs: Iterable[CurvaturePair], tau: float, g) -> np.ndarray:
    """Two-loop recursion: ``H g`` with ``H0 = tau * I`` and pairs oldest first."""
    pairs = list(pairs)
    q = np.array(g, dtype=float)
    alphas = np.empty(len(pairs))
    for i in range(len(pairs) - 1, -1, -1):
        pr = pairs[i]
        alphas[i] = pr.rho_hat * float(pr.s @ q)
        q -= alphas[i] * pr.y_hat
    r = tau * q
    for i, pr in enumerate(pairs):
        b = pr.rho_hat * float(pr.y_hat @ r)
        r += (alphas[i] - b) * pr.s
    return r
