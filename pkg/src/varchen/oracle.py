"""Brute-force verification helpers.

Nothing here is used while optimizing. The dense operator is rebuilt one
update at a time, eigenvalues come from a cyclic Jacobi sweep, and gradients
are checked with central differences.
"""

from __future__ import annotations

from typing import Iterable

import numpy as np

from .memory import CurvaturePair

MAX_ORACLE_DIM = 200


def _check_symmetric(H, tol=1e-12):
    H = np.asarray(H, dtype=float)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError("expected a square matrix")
    if H.shape[0] > MAX_ORACLE_DIM:
        raise ValueError(f"dense oracle is capped at n <= {MAX_ORACLE_DIM}")
    scale = max(1.0, float(np.max(np.abs(H)))) if H.size else 1.0
    if np.max(np.abs(H - H.T), initial=0.0) > tol * scale:
        raise ValueError("matrix is not symmetric")
    return H


def dense_damped_update(H, pair: CurvaturePair) -> np.ndarray:
    """``V H V^T + rho s s^T`` with ``V = I - rho s y_hat^T``."""
    H = np.asarray(H, dtype=float)
    n = H.shape[0]
    if pair.s.shape != (n,) or pair.y_hat.shape != (n,):
        raise ValueError("dimension mismatch between operator and pair")
    V = np.eye(n) - pair.rho_hat * np.outer(pair.s, pair.y_hat)
    out = V @ H @ V.T + pair.rho_hat * np.outer(pair.s, pair.s)
    return 0.5 * (out + out.T)


def dense_inverse_hessian(pairs: Iterable[CurvaturePair], tau: float, n: int) -> np.ndarray:
    """Explicit damped L-BFGS matrix: start from ``tau * I``, apply pairs oldest first."""
    H = tau * np.eye(n)
    for pair in pairs:
        H = dense_damped_update(H, pair)
    return H


def _round_robin(n):
    """Rounds of disjoint index pairs covering every (p, q) once (circle method)."""
    m = n + (n % 2)
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        rnd = []
        for i in range(m // 2):
            p, q = players[i], players[m - 1 - i]
            if p < n and q < n:
                rnd.append((min(p, q), max(p, q)))
        rounds.append(rnd)
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def jacobi_eigh(H, tol: float = 1e-12, max_sweeps: int = 60):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Rotations within a round act on disjoint index pairs, so each round is
    applied as one orthogonal matrix. Sweeps stop once the off-diagonal
    Frobenius norm is at most ``tol * ||H||_F``.

    Returns ``(eigenvalues ascending, eigenvectors as columns)``.
    """
    A = _check_symmetric(H).copy()
    n = A.shape[0]
    V = np.eye(n)
    if n <= 1:
        return np.diag(A).copy(), V
    fro = np.linalg.norm(A)
    if fro == 0.0:
        return np.zeros(n), V
    rounds = [np.array(r, dtype=int) for r in _round_robin(n)]
    for _ in range(max_sweeps):
        off = np.linalg.norm(A - np.diag(np.diag(A)))
        if off <= tol * fro:
            break
        for rnd in rounds:
            p, q = rnd[:, 0], rnd[:, 1]
            apq = A[p, q]
            active = np.abs(apq) > 0.0
            if not np.any(active):
                continue
            p, q, apq = p[active], q[active], apq[active]
            zeta = (A[q, q] - A[p, p]) / (2.0 * apq)
            t = np.sign(zeta) / (np.abs(zeta) + np.hypot(1.0, zeta))
            t[zeta == 0.0] = 1.0
            c = 1.0 / np.hypot(1.0, t)
            s = t * c
            J = np.eye(n)
            J[p, p] = c
            J[q, q] = c
            J[p, q] = s
            J[q, p] = -s
            A = J.T @ A @ J
            A = 0.5 * (A + A.T)
            V = V @ J
    w = np.diag(A).copy()
    order = np.argsort(w, kind="stable")
    return w[order], V[:, order]


def sym_eigenvalues(H, tol: float = 1e-12) -> np.ndarray:
    return jacobi_eigh(H, tol=tol)[0]


def finite_diff_gradient(fun, x, h: float = 1e-6) -> np.ndarray:
    """Central differences of a scalar function, one coordinate at a time."""
    if not h > 0:
        raise ValueError("h must be positive")
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    e = np.zeros_like(x)
    for j in range(x.size):
        e[j] = h
        g[j] = (fun(x + e) - fun(x - e)) / (2.0 * h)
        e[j] = 0.0
    return g
