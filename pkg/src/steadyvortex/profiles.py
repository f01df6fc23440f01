"""Profile nonlinearities and vorticity-strength schedules.

A profile ``f`` vanishes on ``(-inf, 0]`` and increases on ``[0, inf)``; the
solver also needs its inverse ``f⁻¹`` (zero on ``(-inf, 0]``) and the
primitive ``F(s) = ∫₀ˢ f⁻¹``.  Power profiles ``f(s) = s₊ᵖ`` are exact;
tabulated profiles are piecewise linear with linear extrapolation past the
last knot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import InvalidKappa, InvalidSpec

__all__ = [
    "Profile",
    "StrengthSchedule",
    "HypothesisCheck",
    "ValidationReport",
    "check_hypotheses",
    "check_schedule",
    "load_table",
]


@dataclass(frozen=True)
class HypothesisCheck:
    name: str
    passed: bool
    worst: float
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[HypothesisCheck, ...]
    constants: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> HypothesisCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def failures(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]


def _pos(s):
    return np.maximum(np.asarray(s, dtype=float), 0.0)


@dataclass(frozen=True, eq=False)
class Profile:
    """Profile function ``f`` with inverse and primitive of the inverse."""

    kind: str
    p: float = 1.0
    table_s: Optional[np.ndarray] = None
    table_f: Optional[np.ndarray] = None

    @classmethod
    def power(cls, p: float) -> "Profile":
        if not p > 0:
            raise InvalidSpec(f"power profile exponent must be positive, got {p}")
        return cls("power", float(p))

    @classmethod
    def table(cls, s, fs) -> "Profile":
        s = np.asarray(s, dtype=float)
        fs = np.asarray(fs, dtype=float)
        if s.ndim != 1 or s.shape != fs.shape or len(s) < 2:
            raise InvalidSpec("table needs two equal-length columns with at least two rows")
        if np.any(np.diff(s) <= 0):
            raise InvalidSpec("table abscissae must be strictly increasing")
        return cls("table", table_s=s, table_f=fs)

    # -- tabulated helpers

    def _ext(self):
        """Knots extended by one far point so that ``np.interp`` extrapolates linearly."""
        s, fs = self.table_s, self.table_f
        slope = (fs[-1] - fs[-2]) / (s[-1] - s[-2])
        far = s[-1] + 1e6 * max(1.0, s[-1] - s[0])
        return np.append(s, far), np.append(fs, fs[-1] + slope * (far - s[-1]))

    # -- public evaluation

    def __call__(self, s):
        return self.eval(s)

    def eval(self, s):
        if self.kind == "power":
            return _pos(s) ** self.p
        xs, ys = self._ext()
        return np.interp(np.asarray(s, dtype=float), xs, ys, left=0.0)

    def inverse(self, s):
        if self.kind == "power":
            return _pos(s) ** (1.0 / self.p)
        xs, ys = self._ext()
        # inverse of the increasing branch on [0, inf); only meaningful under (H2)
        keep = xs >= 0
        ys_k, xs_k = ys[keep], xs[keep]
        if xs_k[0] > 0:
            xs_k = np.insert(xs_k, 0, 0.0)
            ys_k = np.insert(ys_k, 0, float(self.eval(0.0)))
        return np.where(np.asarray(s) <= 0, 0.0,
                        np.interp(_pos(s), ys_k, xs_k, left=0.0))

    def integral(self, s):
        """``∫₀ˢ f(r) dr`` for ``s >= 0``."""
        s = _pos(s)
        if self.kind == "power":
            return s ** (self.p + 1) / (self.p + 1)
        xs, ys = self._ext()
        return _pl_integral(xs, ys, s)

    def primitive(self, s):
        """``F(s) = ∫₀ˢ f⁻¹(r) dr``."""
        s = _pos(s)
        if self.kind == "power":
            return (self.p / (self.p + 1)) * s ** ((self.p + 1) / self.p)
        xs, ys = self._ext()
        keep = xs >= 0
        ys_k, xs_k = ys[keep], xs[keep]
        if xs_k[0] > 0:
            xs_k = np.insert(xs_k, 0, 0.0)
            ys_k = np.insert(ys_k, 0, float(self.eval(0.0)))
        # f⁻¹ is piecewise linear with knots (ys_k, xs_k), zero below ys_k[0]
        return _pl_integral(ys_k, xs_k, s, lower=max(ys_k[0], 0.0))

    @property
    def inverse_at_one(self) -> float:
        return float(self.inverse(1.0))

    @property
    def delta0(self) -> Optional[float]:
        return 1.0 / (self.p + 1) if self.kind == "power" else None

    @property
    def delta1(self) -> Optional[float]:
        return self.p / (self.p + 1) if self.kind == "power" else None


def _pl_integral(xk, yk, s, lower: float = 0.0):
    """Integral from ``lower`` to ``s`` of the piecewise-linear interpolant (xk, yk)."""
    s = np.asarray(s, dtype=float)
    grid = np.concatenate([[lower], xk[xk > lower]])
    vals = np.interp(grid, xk, yk)
    cum = np.concatenate([[0.0], np.cumsum(np.diff(grid) * (vals[1:] + vals[:-1]) / 2)])
    st = np.maximum(s, lower)
    k = np.clip(np.searchsorted(grid, st, side="right") - 1, 0, len(grid) - 1)
    left = grid[k]
    fl = vals[k]
    fs = np.interp(st, xk, yk)
    return cum[k] + (st - left) * (fl + fs) / 2


def load_table(path) -> Profile:
    """Two-column text file ``s f(s)``, strictly increasing ``s``."""
    data = np.loadtxt(Path(path), ndmin=2)
    if data.shape[1] != 2:
        raise InvalidSpec(f"{path}: expected two columns, found {data.shape[1]}")
    return Profile.table(data[:, 0], data[:, 1])


def check_hypotheses(f: Profile, s_max: float = 1.0, n_samples: int = 200) -> ValidationReport:
    """Sampled checks of (H1), (H2), (H3) and (H3)'.

    Failures are report entries, not exceptions.  For power profiles the exact
    constants ``delta0 = 1/(p+1)`` and ``delta1 = p/(p+1)`` are reported.
    """
    if not (s_max > 0 and n_samples >= 10):
        raise ValueError("need s_max > 0 and n_samples >= 10")
    neg = -s_max * np.arange(n_samples + 1) / n_samples  # includes s = 0
    f_neg = np.abs(np.asarray(f.eval(neg), dtype=float))
    h1 = HypothesisCheck("H1", bool(np.all(f_neg == 0.0)), float(f_neg.max()),
                         "f(s) = 0 for s <= 0")

    grid = s_max * np.arange(n_samples + 1) / n_samples
    fg = np.asarray(f.eval(grid), dtype=float)
    steps = np.diff(fg)
    h2 = HypothesisCheck("H2", bool(np.all(steps > 0) and np.all(np.isfinite(fg))),
                         float(steps.min()), "f strictly increasing on [0, s_max]")

    s = grid[1:]
    fs = fg[1:]
    with np.errstate(divide="ignore", invalid="ignore"):
        r3 = np.where(fs * s > 0, np.asarray(f.integral(s)) / (fs * s), np.inf)
    worst3 = float(np.max(r3))
    h3 = HypothesisCheck("H3", bool(0 < worst3 < 1), worst3,
                         "max over samples of ∫₀ˢf / (s f(s)) must lie in (0, 1)")

    y = fs[fs > 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.asarray(f.inverse(y))
        r3p = np.where(y * inv > 0, np.asarray(f.primitive(y)) / (y * inv), -np.inf)
    worst3p = float(np.min(r3p)) if len(r3p) else -np.inf
    h3p = HypothesisCheck("H3'", bool(0 < worst3p < 1), worst3p,
                          "min over samples of F(s) / (s f⁻¹(s)) must lie in (0, 1)")

    constants = {}
    if f.kind == "power":
        constants = {"delta0": f.delta0, "delta1": f.delta1}
    else:
        constants = {"delta0": worst3, "delta1": worst3p}
    return ValidationReport((h1, h2, h3, h3p), constants)


@dataclass(frozen=True)
class StrengthSchedule:
    """``Λ(κ)``: ``constant(a)`` or ``power(a, beta)`` meaning ``a κ^(-beta)``."""

    kind: str = "constant"
    a: float = 1.0
    beta: float = 0.0
    gamma0: float = 1.0

    def __post_init__(self):
        if self.kind not in ("constant", "power"):
            raise InvalidSpec(f"unknown schedule kind {self.kind!r}")
        if not self.a > 0:
            raise InvalidSpec(f"schedule amplitude must be positive, got {self.a}")
        if not self.gamma0 > 0:
            raise InvalidSpec(f"gamma0 must be positive, got {self.gamma0}")

    @classmethod
    def constant(cls, a: float = 1.0, gamma0: float = 1.0) -> "StrengthSchedule":
        return cls("constant", float(a), 0.0, gamma0)

    @classmethod
    def power(cls, a: float, beta: float, gamma0: float = 1.0) -> "StrengthSchedule":
        return cls("power", float(a), float(beta), gamma0)

    def __call__(self, kappa: float) -> float:
        if not kappa > 0:
            raise InvalidKappa(f"kappa must be positive, got {kappa}")
        if self.kind == "constant":
            return self.a
        return self.a * kappa ** (-self.beta)


def check_schedule(lam: StrengthSchedule, depth: int = 20) -> ValidationReport:
    """Monotone-trend proxies for (A1) and (A2) along ``κ = 2^-j``, ``j = 1..depth``."""
    kappas = 2.0 ** -np.arange(1, depth + 1)
    vals = np.array([lam(k) for k in kappas])
    a1 = vals / kappas
    a2 = vals * kappas ** lam.gamma0
    d1 = np.diff(a1)
    d2 = np.diff(a2)
    c1 = HypothesisCheck("A1", bool(np.all(d1 > 0)), float(d1.min()) if len(d1) else math.inf,
                         "Λ(κ)/κ increases as κ halves")
    c2 = HypothesisCheck("A2", bool(np.all(d2 < 0)), float(d2.max()) if len(d2) else -math.inf,
                         f"Λ(κ) κ^{lam.gamma0:g} decreases as κ halves")
    return ValidationReport((c1, c2), {"gamma0": lam.gamma0})
