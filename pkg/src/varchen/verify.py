"""Randomized self-checks that compare the fast code paths with the dense oracle.

Each suite returns a :class:`SuiteResult`. The ``verify`` subcommand runs
them all; the sizes below are what it runs by default.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import bounds as _bounds
from . import oracle
from .datasets import synthetic_binary
from .memory import apply_inverse_hessian, damp_pair
from .problems import Quadratic, logistic_regression, sigmoid_svm, synthetic_illconditioned

DEFAULT_SIZES = {
    "containment": 1000,
    "single-update": 1000,
    "equivalence": 500,
    "curvature": 10_000,
    "gradient": 100,
}


@dataclass
class SuiteResult:
    name: str
    passed: int = 0
    total: int = 0
    worst: float = 0.0
    seconds: float = 0.0
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.total > 0 and self.passed == self.total

    def record(self, ok: bool, slack: float = 0.0, info=None):
        self.total += 1
        self.worst = max(self.worst, slack)
        if ok:
            self.passed += 1
        elif len(self.failures) < 5:
            self.failures.append(info)


def random_pair_stream(rng, n: int, p: int, tau_lo: float = 0.1, tau_hi: float = 10.0,
                       eta: float = 0.25):
    """``p`` damped pairs with random ``tau_i`` and a mix of good and bad curvature."""
    pairs = []
    lg_true = 0.0
    for _ in range(p):
        s = rng.standard_normal(n)
        M = rng.standard_normal((n, n))
        kind = rng.integers(3)
        if kind == 0:  # positive definite curvature
            y = (M @ M.T / n + 0.1 * np.eye(n)) @ s
        elif kind == 1:  # indefinite
            y = 0.5 * (M + M.T) @ s
        else:  # arbitrary, often s @ y < 0
            y = rng.standard_normal(n) * rng.uniform(0.1, 10.0)
        tau = float(np.exp(rng.uniform(np.log(tau_lo), np.log(tau_hi))))
        pairs.append(damp_pair(s, y, tau, eta))
        lg_true = max(lg_true, np.linalg.norm(y) / np.linalg.norm(s))
    tau_now = float(np.exp(rng.uniform(np.log(tau_lo), np.log(tau_hi))))
    return pairs, tau_now, lg_true


def containment_suite(cases: int = 1000, seed: int = 0, tol: float = 1e-8,
                      n_range=(2, 20), p_range=(1, 8), eta: float = 0.25) -> SuiteResult:
    """Oracle eigenvalues of the damped L-BFGS operator lie inside the recursive bounds."""
    res = SuiteResult("containment")
    t0 = time.perf_counter()
    rng = np.random.Generator(np.random.Philox(seed))
    for case in range(cases):
        n = int(rng.integers(n_range[0], n_range[1] + 1))
        p = int(rng.integers(p_range[0], p_range[1] + 1))
        pairs, tau_now, lg = random_pair_stream(rng, n, p, eta=eta)
        cfg = _bounds.MonitorConfig(1e-300, 1e300, "fixed", lg)
        b = _bounds.theorem1_bounds(pairs, tau_now, eta, cfg)
        eig = oracle.sym_eigenvalues(oracle.dense_inverse_hessian(pairs, tau_now, n))
        slack = max(b.lambda_lo - eig[0], eig[-1] - b.lambda_hi)
        res.record(b.lambda_lo - tol <= eig[0] and eig[-1] <= b.lambda_hi + tol, slack,
                   (case, n, p, b.lambda_lo, b.lambda_hi, eig[0], eig[-1]))
    res.seconds = time.perf_counter() - t0
    return res


def lemma_suite(cases: int = 1000, seed: int = 1, tol: float = 1e-8, eta: float = 0.25) -> SuiteResult:
    """Single update from ``mu * I`` against the closed-form bounds, for both ``mu`` seeds."""
    res = SuiteResult("single-update")
    t0 = time.perf_counter()
    rng = np.random.Generator(np.random.Philox(seed))
    for case in range(cases):
        n = int(rng.integers(2, 21))
        (pair,), _, lg = random_pair_stream(rng, n, 1, eta=eta)
        gamma = eta / pair.tau
        L_y = lg + 1.0 / pair.tau
        mu1 = float(np.exp(rng.uniform(np.log(0.1), np.log(10.0))))
        mu2 = mu1 * float(np.exp(rng.uniform(0.0, np.log(10.0))))
        ok, slack = True, -np.inf
        for mu in (mu1, mu2):
            lo, hi = _bounds.lemma1_bounds(gamma, L_y, mu)
            eig = oracle.sym_eigenvalues(oracle.dense_inverse_hessian([pair], mu, n))
            ok &= lo - tol <= eig[0] and eig[-1] <= hi + tol
            slack = max(slack, lo - eig[0], eig[-1] - hi)
        res.record(bool(ok), slack, (case, n))
    res.seconds = time.perf_counter() - t0
    return res


def equivalence_suite(cases: int = 500, seed: int = 2, rtol: float = 1e-10) -> SuiteResult:
    """Two-loop product equals the dense operator applied to ``g``."""
    res = SuiteResult("equivalence")
    t0 = time.perf_counter()
    rng = np.random.Generator(np.random.Philox(seed))
    for case in range(cases):
        n = int(rng.integers(2, 51))
        p = int(rng.integers(1, 11))
        pairs, tau_now, _ = random_pair_stream(rng, n, p)
        g = rng.standard_normal(n)
        Hg = oracle.dense_inverse_hessian(pairs, tau_now, n) @ g
        err = np.linalg.norm(apply_inverse_hessian(pairs, tau_now, g) - Hg) / np.linalg.norm(Hg)
        res.record(err <= rtol, err, (case, n, p, err))
    res.seconds = time.perf_counter() - t0
    return res


def curvature_suite(cases: int = 10_000, seed: int = 3, eta: float = 0.25) -> SuiteResult:
    """Damped pairs satisfy ``s @ y_hat >= eta ||s||^2 / tau``; undamped ones keep ``y``."""
    res = SuiteResult("curvature")
    t0 = time.perf_counter()
    rng = np.random.Generator(np.random.Philox(seed))
    for case in range(cases):
        n = int(rng.integers(1, 11))
        s = rng.standard_normal(n)
        y = rng.standard_normal(n) * rng.uniform(0.01, 10.0)
        tau = float(np.exp(rng.uniform(np.log(0.1), np.log(10.0))))
        pair = damp_pair(s, y, tau, eta)
        need = eta * float(s @ s) / tau
        ok = float(s @ pair.y_hat) >= need - 1e-12
        if float(s @ y) >= need:
            ok &= pair.theta == 1.0 and np.array_equal(pair.y_hat, y)
        res.record(bool(ok), need - float(s @ pair.y_hat), (case, n))
    res.seconds = time.perf_counter() - t0
    return res


def shipped_problems(seed: int = 0):
    ds = synthetic_binary(60, 8, seed=seed)
    A = np.diag(np.linspace(1.0, 10.0, 6))
    rng = np.random.Generator(np.random.Philox(seed))
    return {
        "logistic": logistic_regression(ds, l2=0.01),
        "sigmoid-svm": sigmoid_svm(ds, l2=0.01),
        "synthetic": synthetic_illconditioned(10, cond=1e2, nonconvex_mix=0.3, seed=seed, n_samples=40),
        "quadratic": Quadratic(A, rng.standard_normal((20, 6))),
    }


def gradient_suite(points: int = 100, seed: int = 4, rtol: float = 1e-6) -> SuiteResult:
    """Analytic full gradients against central differences with ``h = 1e-6 (1 + ||x||)``."""
    res = SuiteResult("gradient")
    t0 = time.perf_counter()
    rng = np.random.Generator(np.random.Philox(seed))
    for name, prob in shipped_problems(seed).items():
        for i in range(points):
            x = rng.standard_normal(prob.dim)
            h = 1e-6 * (1.0 + np.linalg.norm(x))
            fd = oracle.finite_diff_gradient(prob.loss, x, h)
            g = prob.grad(x)
            err = np.linalg.norm(g - fd) / max(np.linalg.norm(g), 1e-8)
            res.record(err <= rtol, err, (name, i, err))
    res.seconds = time.perf_counter() - t0
    return res


SUITES = {
    "containment": containment_suite,
    "single-update": lemma_suite,
    "equivalence": equivalence_suite,
    "curvature": curvature_suite,
    "gradient": gradient_suite,
}


def run_all(sizes=None, seed: int = 0) -> list[SuiteResult]:
    sizes = {**DEFAULT_SIZES, **(sizes or {})}
    return [fn(sizes[name], seed=seed + i) for i, (name, fn) in enumerate(SUITES.items())]
