"""VARCHEN and its baselines (SdLBFGS-VR, SVRG, SGD) on finite-sum problems.

All four methods share one epoch loop: an anchor with the exact full
gradient at the start of every epoch, then minibatch steps until the epoch's
sample budget is spent. They differ only in how the direction is built:

``varchen``
    damped L-BFGS with clamped ``H0`` scaling; whenever the eigenvalue bounds
    leave ``[lambda_min, lambda_max]`` the memory is cut to its newest pair.
``sdlbfgs-vr``
    damped L-BFGS with the unclamped scaling ``s@y / y@y`` and no monitor
    (bounds are still computed and logged).
``svrg``
    ``H = I`` on the corrected gradient.
``sgd``
    ``H = I`` on the raw minibatch gradient; no anchors.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .bounds import MonitorConfig, SpectrumBounds, check_and_flush, theorem1_bounds
from .memory import LbfgsMemory
from .variance import BatchSampler, EpochAnchor, corrected_gradient

log = logging.getLogger(__name__)

METHODS = ("varchen", "sdlbfgs-vr", "svrg", "sgd")
SCHEDULES = ("constant", "harmonic", "power")
CURVATURE_GRADIENTS = ("raw", "corrected")


class ConfigError(ValueError):
    pass


def harmonic_cap(lambda_min: float, lambda_max: float, L: float) -> float:
    """Largest admissible ``c`` for ``alpha_k = c / (k + 1)``."""
    return lambda_min / (L * lambda_max)


@dataclass(frozen=True)
class Schedule:
    kind: str = "constant"
    alpha: float = 0.01
    c: float = 0.01
    beta: float = 0.75
    lambda_min: float = 1e-6
    lambda_max: float = 1e6
    L: float = 1.0

    def __call__(self, k: int) -> float:
        return step_size(self, k)


def step_size(schedule: Schedule, k: int) -> float:
    if k < 0:
        raise ValueError("k must be >= 0")
    if schedule.kind == "constant":
        return schedule.alpha
    if schedule.kind == "harmonic":
        return schedule.c / (k + 1)
    if schedule.kind == "power":
        # k^-beta is undefined at k = 0; the first step reuses k = 1
        k = max(k, 1)
        return schedule.lambda_min / (schedule.L * schedule.lambda_max**2) * k ** (-schedule.beta)
    raise ValueError(f"unknown schedule {schedule.kind!r}")


@dataclass
class OptimizerConfig:
    method: str = "varchen"
    memory: int = 5
    eta: float = 0.25
    lambda_min: float = 1e-6
    lambda_max: float = 1e6
    gamma_lo: float = 1e-4
    gamma_hi: float = 1e4
    clamp_mode: str = "h0-scalar"
    lg_mode: str = "running-max"
    lg_fixed: Optional[float] = None
    schedule: str = "constant"
    alpha: float = 0.01
    c: Optional[float] = None
    beta: float = 0.75
    lipschitz: Optional[float] = None
    epochs: int = 10
    batch_size: int = 10
    seed: int = 0
    sampling: str = "without-replacement"
    curvature_gradient: str = "raw"
    tol: Optional[float] = None

    def validate(self) -> "OptimizerConfig":
        def fail(msg):
            raise ConfigError(msg)

        if self.method not in METHODS:
            fail(f"method must be one of {METHODS}, got {self.method!r}")
        if self.schedule not in SCHEDULES:
            fail(f"schedule must be one of {SCHEDULES}, got {self.schedule!r}")
        if self.memory < 1:
            fail("memory must be >= 1")
        if not 0.0 < self.eta < 1.0:
            fail("eta must lie in (0, 1)")
        if not 0.0 < self.lambda_min < self.lambda_max:
            fail("need 0 < lambda_min < lambda_max")
        if self.method == "varchen" and not (
                self.lambda_min < self.gamma_lo < self.gamma_hi < self.lambda_max):
            fail("varchen needs lambda_min < gamma_lo < gamma_hi < lambda_max")
        if self.clamp_mode not in ("h0-scalar", "b0-scalar"):
            fail("clamp_mode must be h0-scalar or b0-scalar")
        if self.lg_mode not in ("per-pair", "running-max", "fixed"):
            fail("lg_mode must be per-pair, running-max or fixed")
        if self.lg_mode == "fixed" and not (self.lg_fixed and self.lg_fixed > 0):
            fail("lg_mode fixed needs a positive lg_fixed")
        if self.lipschitz is not None and not self.lipschitz > 0:
            fail("lipschitz must be positive")
        if self.schedule == "constant" and not self.alpha > 0:
            fail("alpha must be positive")
        if self.schedule == "harmonic" and self.c is not None:
            if not self.c > 0:
                fail("c must be positive")
            if self.lipschitz is not None:
                cap = harmonic_cap(self.lambda_min, self.lambda_max, self.lipschitz)
                if self.c > cap * (1 + 1e-12):
                    fail(f"harmonic c={self.c} exceeds lambda_min/(L lambda_max)={cap}")
        if self.schedule == "power" and not 0.5 < self.beta < 1.0:
            fail("power schedule needs beta in (0.5, 1)")
        if self.epochs < 1:
            fail("epochs must be >= 1")
        if self.batch_size < 1:
            fail("batch_size must be >= 1")
        if self.sampling not in ("without-replacement", "with-replacement"):
            fail("sampling must be without-replacement or with-replacement")
        if self.curvature_gradient not in CURVATURE_GRADIENTS:
            fail("curvature_gradient must be raw or corrected")
        if self.tol is not None and not self.tol > 0:
            fail("tol must be positive")
        return self

    def monitor_config(self) -> MonitorConfig:
        return MonitorConfig(self.lambda_min, self.lambda_max, self.lg_mode, self.lg_fixed)

    def make_schedule(self, L: float) -> Schedule:
        c = self.c if self.c is not None else harmonic_cap(self.lambda_min, self.lambda_max, L)
        return Schedule(self.schedule, self.alpha, c, self.beta, self.lambda_min, self.lambda_max, L)

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class IterationRecord:
    k: int
    epoch: int
    minibatch_loss: float
    grad_norm: float
    alpha: float
    lambda_k: float
    Lambda_k: float
    flush: bool
    wall_ms: float


@dataclass
class EpochRecord:
    epoch: int
    full_loss: float
    full_grad_norm: float
    val_metric: Optional[float]


@dataclass
class RunTrace:
    method: str
    iterations: list = field(default_factory=list)
    epochs: list = field(default_factory=list)
    status: str = "ok"
    diagnostic: str = ""
    x: Optional[np.ndarray] = None

    @property
    def flush_count(self) -> int:
        return sum(r.flush for r in self.iterations)

    @property
    def final_loss(self) -> float:
        if self.status == "diverged" or not self.epochs:
            return math.inf
        return self.epochs[-1].full_loss

    def column(self, name):
        return np.array([getattr(r, name) for r in self.iterations], dtype=float)

    def epoch_column(self, name):
        return np.array([getattr(r, name) for r in self.epochs], dtype=float)


class _Abort(Exception):
    pass


def _finite(*values):
    return all(np.all(np.isfinite(v)) for v in values)


class MonitoredMemory:
    """L-BFGS memory plus the per-iteration bound check of VARCHEN.

    :meth:`prepare` computes the bounds for the operator about to be applied,
    cuts the memory to its newest pair when they are out of range (if
    ``monitor`` is on) and recomputes them, so the returned bounds always
    describe the operator actually used for the direction.
    """

    def __init__(self, memory: LbfgsMemory, monitor: MonitorConfig, enabled: bool = True):
        self.memory = memory
        self.monitor = monitor
        self.enabled = enabled

    def bounds(self) -> SpectrumBounds:
        return theorem1_bounds(self.memory.pairs, self.memory.current_tau, self.memory.eta, self.monitor)

    def prepare(self) -> tuple[SpectrumBounds, bool]:
        bounds = self.bounds()
        flushed = False
        if (self.enabled and len(self.memory) > 1
                and check_and_flush(bounds, self.monitor) == "flush"):
            self.memory.flush_to_most_recent()
            flushed = True
            bounds = self.bounds()
        return bounds, flushed

    def direction(self, g) -> tuple[np.ndarray, SpectrumBounds, bool]:
        bounds, flushed = self.prepare()
        return self.memory.two_loop_direction(g), bounds, flushed


def _make_memory(config: OptimizerConfig) -> MonitoredMemory:
    if config.method == "varchen":
        mem = LbfgsMemory(config.memory, config.eta, config.gamma_lo, config.gamma_hi,
                          config.clamp_mode, tau0=1.0)
        return MonitoredMemory(mem, config.monitor_config(), enabled=True)
    mem = LbfgsMemory(config.memory, config.eta, config.gamma_lo, config.gamma_hi,
                      "none", tau0=1.0)
    return MonitoredMemory(mem, config.monitor_config(), enabled=False)


def run(problem, config: OptimizerConfig, x0=None) -> RunTrace:
    """Run one optimization and return its trace.

    Non-finite values or a non-descent direction stop the run with
    ``status="diverged"`` and a diagnostic message instead of raising.
    """
    config.validate()
    x = np.zeros(problem.dim) if x0 is None else np.array(x0, dtype=float)
    if x.shape != (problem.dim,):
        raise ConfigError(f"x0 has shape {x.shape}, problem dimension is {problem.dim}")

    method = config.method
    quasi_newton = method in ("varchen", "sdlbfgs-vr")
    mm = _make_memory(config) if quasi_newton else None
    sampler = BatchSampler(problem.n_samples, config.batch_size, config.seed, config.sampling)
    trace = RunTrace(method)
    t0 = time.perf_counter()
    lg_seen = 0.0

    def epoch_summary(epoch, x, g_full):
        rec = EpochRecord(epoch, problem.loss(x), float(np.linalg.norm(g_full)), problem.val_metric(x))
        trace.epochs.append(rec)
        if not _finite(rec.full_loss, rec.full_grad_norm):
            raise _Abort(f"non-finite full loss/gradient at epoch {epoch}")
        return rec

    k = 0
    try:
        g_full = problem.grad(x)
        epoch_summary(0, x, g_full)
        for epoch in range(1, config.epochs + 1):
            if config.lipschitz is not None:
                L = config.lipschitz
            elif lg_seen > 0:
                L = lg_seen
            else:
                L = getattr(problem, "lipschitz", None) or 1.0
            schedule = config.make_schedule(L)
            anchor = EpochAnchor(x.copy(), g_full, 0)

            for batch in sampler.epoch():
                g_batch = problem.grad(x, batch)
                if method == "sgd":
                    g_dir = g_batch
                else:
                    g_dir = corrected_gradient(problem, x, anchor, batch)
                batch_loss = problem.loss(x, batch)
                if not _finite(g_dir, batch_loss):
                    raise _Abort(f"non-finite gradient or loss at k={k}")

                if quasi_newton:
                    d, bounds, flushed = mm.direction(g_dir)
                    lam_lo, lam_hi = bounds.lambda_lo, bounds.lambda_hi
                else:
                    d, lam_lo, lam_hi, flushed = -g_dir, 1.0, 1.0, False

                slope = float(g_dir @ d)
                if np.any(g_dir) and not slope < 0:
                    raise _Abort(f"direction is not a descent direction at k={k} (g.d={slope:g})")

                alpha = step_size(schedule, k)
                x_new = x + alpha * d
                if not _finite(x_new):
                    raise _Abort(f"non-finite iterate at k={k}")

                if quasi_newton:
                    g_new = problem.grad(x_new, batch)
                    if config.curvature_gradient == "raw":
                        y = g_new - g_batch
                    else:
                        g_dir_new = corrected_gradient(problem, x_new, anchor, batch)
                        y = g_dir_new - g_dir
                    pair = mm.memory.add_step(x_new - x, y, float(np.linalg.norm(x)))
                    if pair is not None:
                        lg_seen = max(lg_seen, pair.lg_local)

                trace.iterations.append(IterationRecord(
                    k, epoch, float(batch_loss), float(np.linalg.norm(g_dir)), float(alpha),
                    float(lam_lo), float(lam_hi), bool(flushed),
                    (time.perf_counter() - t0) * 1e3))
                x = x_new
                k += 1
                anchor.samples_consumed += len(batch)

            g_full = problem.grad(x)
            rec = epoch_summary(epoch, x, g_full)
            if config.tol is not None and rec.full_grad_norm < config.tol:
                trace.status = "converged"
                break
    except _Abort as exc:
        trace.status = "diverged"
        trace.diagnostic = str(exc)
        log.warning("%s run stopped: %s", method, exc)
    trace.x = x
    return trace
