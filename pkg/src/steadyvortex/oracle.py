"""Brute-force reference maximizer for tiny grids.

Projected gradient ascent on the discretized energy with random restarts.
Everything here is deliberately independent of the production path: the
Green matrix is a dense inverse of a locally assembled Laplacian, and the
projection onto ``{0 <= ω <= Λ, Σ ω h² = κ}`` is the exact sort-based
capped-simplex projection rather than a bisection.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GridTooLarge, Infeasible
from .variational import ProblemSpec

__all__ = ["OracleResult", "oracle_maximize", "project_capped", "dense_green"]

MAX_NODES = 100


@dataclass
class OracleResult:
    omega: np.ndarray
    energy: float
    restart_energies: list


def dense_green(d) -> np.ndarray:
    """Dense inverse of the 5-point ``-Δ`` assembled from lattice adjacency."""
    n = d.n
    a = 4.0 * np.eye(n)
    for i in range(n):
        for j in range(n):
            if i != j and np.abs(d.ij[i] - d.ij[j]).sum() == 1:
                a[i, j] = -1.0
    return np.linalg.inv(a / d.h**2)


def project_capped(y: np.ndarray, total: float, cap: float) -> np.ndarray:
    """Euclidean projection onto ``{0 <= x <= cap, Σ x = total}``.

    ``Σ clip(y - τ, 0, cap)`` is piecewise linear in ``τ`` with breakpoints at
    ``y`` and ``y - cap``; locate the segment by sorting and solve exactly.
    """
    y = np.asarray(y, dtype=float)
    n = len(y)
    if total < 0 or total > n * cap * (1 + 1e-12):
        raise Infeasible("projection target outside [0, n*cap]")
    bps = np.unique(np.concatenate([y, y - cap]))

    vals = np.clip(y[None, :] - bps[:, None], 0.0, cap).sum(axis=1)  # nonincreasing in tau
    # find consecutive breakpoints bracketing the target
    k = int(np.searchsorted(-vals, -total, side="left"))
    if k == 0:
        return np.clip(y - bps[0], 0.0, cap) if vals[0] == total else np.full(n, cap)
    if k >= len(bps):
        return np.zeros(n)
    t0, t1 = bps[k - 1], bps[k]
    g0, g1 = vals[k - 1], vals[k]
    tau = t0 if g0 == g1 else t0 + (g0 - total) * (t1 - t0) / (g0 - g1)
    return np.clip(y - tau, 0.0, cap)


def oracle_maximize(p: ProblemSpec, restarts: int = 10, steps: int = 100_000,
                    step0: float = 0.5, seed: int = 0) -> OracleResult:
    """Best of ``restarts`` projected-gradient ascents with steps ``step0 / sqrt(1 + k/1000)``.

    A run stops early once an update leaves the iterate unchanged to 1e-15.
    """
    d = p.domain
    if d.n > MAX_NODES:
        raise GridTooLarge(f"oracle limited to {MAX_NODES} nodes, domain has {d.n}")
    f = p.profile
    lam, h2 = p.lam, d.cell_area
    q = p.q.values
    green = dense_green(d)
    total = p.kappa / h2

    def value(w):
        return h2 * (0.5 * w @ green @ w + q @ w) - lam * h2 * float(np.sum(f.primitive(w / lam)))

    rng = np.random.default_rng(seed)
    best, best_e, energies = None, -np.inf, []
    for _ in range(restarts):
        w = project_capped(rng.uniform(0.0, lam, d.n), total, lam)
        for k in range(steps):
            grad = green @ w + q - f.inverse(w / lam)
            step = step0 * lam / np.sqrt(1.0 + k / 1000.0)
            nxt = project_capped(w + step * grad, total, lam)
            done = np.max(np.abs(nxt - w)) <= 1e-15 * (1 + lam)
            w = nxt
            if done:
                break
        e = value(w)
        energies.append(e)
        if e > best_e:
            best, best_e = w, e
    return OracleResult(best, best_e, energies)
