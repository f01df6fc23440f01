"""Checks run on computed maximizers and κ-sweeps.

The asymptotic statements (multiplier gap, penalty and pairing terms over κ,
support distance to the maximum set of ``q``) are measured per κ and turned
into monotone-trend flags across a sweep.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Optional, Sequence

import numpy as np
from scipy.spatial import ConvexHull, QhullError, cKDTree
from scipy.spatial.distance import pdist

from .domain import Domain
from .elliptic import ScalarField, gradient, green_operator
from .errors import SteadyVortexError
from .variational import (
    MultiProblemSpec,
    ProblemSpec,
    maximize,
    maximize_multi,
    penalty,
)

__all__ = [
    "SupportMetrics",
    "SweepRow",
    "SweepResult",
    "MultiSweepResult",
    "test_functions",
    "weak_residual",
    "support_metrics",
    "maximum_set",
    "pairing_term",
    "kappa_sweep",
    "sweep_multi",
    "trend_flags",
    "sweep_csv",
    "CSV_HEADER",
]

CSV_HEADER = [
    "kappa", "mu", "qmax_minus_mu", "supp_diameter", "supp_dist_to_S", "patch_nodes",
    "penalty_over_kappa", "pairing_over_kappa", "weak_residual", "energy", "iterations",
    "converged",
]


# ------------------------------------------------------------ weak residual


def _bump(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - t[inside] ** 2))
    return out


def _bump_slope(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1
    ti = t[inside]
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - ti**2)) * (-2.0 * ti / (1.0 - ti**2) ** 2)
    return out


@dataclass(frozen=True)
class TestFunction:
    """Tensor bump on ``[cx ± ax] x [cy ± ay]``, scaled so that ``max |∇φ| = 1``."""

    __test__ = False  # not a pytest class

    cx: float
    cy: float
    ax: float
    ay: float
    scale: float

    def __call__(self, x, y):
        return self.scale * _bump((x - self.cx) / self.ax) * _bump((y - self.cy) / self.ay)


def _grad_max(ax: float, ay: float, m: int = 401) -> float:
    t = np.linspace(-1, 1, m)
    b, db = _bump(t), _bump_slope(t)
    gx = np.outer(b, db) / ax  # rows: y, cols: x
    gy = np.outer(db, b) / ay
    return float(np.sqrt(gx**2 + gy**2).max())


def test_functions(d: Domain, n_test: int = 1024, margin: float = 0.0625,
                   max_level: int = 5) -> list:
    """Bumps on dyadic subrectangles of the bounding box, coarse levels first.

    A subrectangle is kept if all four corners lie inside the domain shrunk by
    ``max(margin, 4h)``, which keeps every stencil touching ``φ`` inside the
    node set.
    """
    sp = d.spec
    if d.kind == "disk":
        bx, by, w, hgt = -1.0, -1.0, 2.0, 2.0
    else:
        bx, by, w, hgt = sp.x0, sp.y0, sp.width, sp.height
    shrink = max(margin, 4 * d.h)
    out = []
    for level in range(1, max_level + 1):
        m = 2**level
        ax, ay = w / m / 2, hgt / m / 2
        if min(ax, ay) < d.h:
            break
        scale = 1.0 / _grad_max(ax, ay)
        for j in range(m):
            for i in range(m):
                x0, y0 = bx + i * 2 * ax, by + j * 2 * ay
                corners = [[x0, y0], [x0 + 2 * ax, y0], [x0, y0 + 2 * ay], [x0 + 2 * ax, y0 + 2 * ay]]
                if np.all(d.contains(corners, margin=shrink)):
                    out.append(TestFunction(x0 + ax, y0 + ay, ax, ay, scale))
                    if len(out) == n_test:
                        return out
    return out


def weak_residual(d: Domain, omega, q, n_test: int = 1024, backend: str = "fd",
                  psi: Optional[np.ndarray] = None, family: Optional[list] = None) -> float:
    """``max_φ |Σ ω ∇⊥(Gω + q)·∇φ h²|`` over a fixed family of test functions.

    Both gradients are central differences on the lattice.
    """
    w = np.asarray(omega, dtype=float)
    if not np.any(w):
        return 0.0
    qv = np.asarray(getattr(q, "values", q), dtype=float)
    if psi is None:
        psi = green_operator(d, backend)(w)
    grad = gradient(d, psi + qv)
    vx, vy = grad[:, 1], -grad[:, 0]  # ∇⊥ψ = (∂₂ψ, -∂₁ψ)
    x, y = d.nodes[:, 0], d.nodes[:, 1]
    h = d.h
    fam = test_functions(d, n_test) if family is None else family
    worst = 0.0
    for phi in fam:
        near = (np.abs(x - phi.cx) < phi.ax + 1.5 * h) & (np.abs(y - phi.cy) < phi.ay + 1.5 * h)
        near &= w != 0
        if not np.any(near):
            continue
        xs, ys = x[near], y[near]
        px = (phi(xs + h, ys) - phi(xs - h, ys)) / (2 * h)
        py = (phi(xs, ys + h) - phi(xs, ys - h)) / (2 * h)
        val = abs(float(np.sum(w[near] * (vx[near] * px + vy[near] * py))) * d.cell_area)
        worst = max(worst, val)
    return worst


# ---------------------------------------------------------------- support


@dataclass(frozen=True)
class SupportMetrics:
    diameter: float
    dist_to_S: float
    node_count: int

    @property
    def empty(self) -> bool:
        return self.node_count == 0


def maximum_set(q: ScalarField, rel_tol: float = 1e-9) -> np.ndarray:
    """Boundary samples and nodes where ``q >= max q - rel_tol * osc(q)``."""
    d = q.domain
    vals = [q.values]
    pts = [d.nodes]
    if q.boundary is not None:
        vals.append(q.boundary[:-1])
        pts.append(d.boundary.points[:-1])
    v = np.concatenate(vals)
    p = np.vstack(pts)
    top, osc = float(v.max()), float(v.max() - v.min())
    return p[v >= top - rel_tol * osc]


def _diameter(pts: np.ndarray) -> float:
    if len(pts) < 2:
        return 0.0
    if len(pts) > 3:
        try:
            pts = pts[ConvexHull(pts).vertices]
        except QhullError:
            pass  # collinear or degenerate: fall through to all pairs
    return float(pdist(pts).max())


def support_metrics(d: Domain, omega, q: Optional[ScalarField] = None,
                    threshold_fraction: float = 1e-6, S: Optional[np.ndarray] = None) -> SupportMetrics:
    """Diameter of ``{ω > threshold * max ω}`` and its largest distance to ``S``.

    ``S`` defaults to :func:`maximum_set` of ``q``.  An empty support gives
    ``node_count = 0``, ``diameter = 0`` and ``dist_to_S = nan``.
    """
    if not 0 < threshold_fraction < 1:
        raise ValueError("threshold_fraction must lie in (0, 1)")
    w = np.asarray(omega, dtype=float)
    wmax = float(w.max()) if len(w) else 0.0
    if wmax <= 0:
        return SupportMetrics(0.0, math.nan, 0)
    pts = d.nodes[w > threshold_fraction * wmax]
    if S is None:
        if q is None:
            raise ValueError("need q or an explicit S")
        S = maximum_set(q)
    S = np.atleast_2d(np.asarray(S, dtype=float))
    dist, _ = cKDTree(S).query(pts)
    return SupportMetrics(_diameter(pts), float(dist.max()), len(pts))


def pairing_term(d: Domain, omega, u, mu: float) -> float:
    """``|⟨ω, u - μ⟩|`` with ``u = Gω + q``."""
    w = np.asarray(omega, dtype=float)
    return abs(float(np.dot(w, np.asarray(u, dtype=float) - mu)) * d.cell_area)


# ------------------------------------------------------------------ sweeps


@dataclass
class SweepRow:
    kappa: float
    mu: float
    qmax_minus_mu: float
    supp_diameter: float
    supp_dist_to_S: float
    patch_nodes: int
    penalty_over_kappa: float
    pairing_over_kappa: float
    weak_residual: float
    energy: float
    iterations: int
    converged: bool


TREND_COLUMNS = ("qmax_minus_mu", "penalty_over_kappa", "pairing_over_kappa", "supp_dist_to_S")


def trend_flags(rows: Sequence[SweepRow]) -> dict:
    """Strict decrease of each trend column over converged rows, plus a vacant patch tail."""
    good = [r for r in rows if r.converged]
    flags = {}
    for col in TREND_COLUMNS:
        vals = np.array([getattr(r, col) for r in good], dtype=float)
        flags[col] = bool(np.all(np.isfinite(vals)) and np.all(np.diff(vals) < 0))
    tail = math.ceil(len(good) / 2) if len(good) > 1 else 0
    flags["patch_nodes_tail"] = all(r.patch_nodes == 0 for r in good[len(good) - tail:])
    return flags


@dataclass
class SweepResult:
    rows: list
    errors: list  # (kappa, message)
    flags: dict
    solutions: list = field(default_factory=list, repr=False)

    @property
    def ok(self) -> bool:
        return not self.errors and all(r.converged for r in self.rows) and all(self.flags.values())


@dataclass
class MultiSweepResult:
    site_rows: list  # one list of SweepRow per site
    errors: list
    flags: list  # one dict per site
    solutions: list = field(default_factory=list, repr=False)

    @property
    def ok(self) -> bool:
        return (not self.errors and all(r.converged for rows in self.site_rows for r in rows)
                and all(all(fl.values()) for fl in self.flags))


def _check_decreasing(values, what: str) -> None:
    v = list(values)
    if not v:
        raise ValueError(f"{what} must not be empty")
    if any(b >= a for a, b in zip(v, v[1:])):
        raise ValueError(f"{what} must be strictly decreasing")


def _solve_one(p: ProblemSpec, kappa: float, omega0=None):
    try:
        pk = p.with_kappa(float(kappa))
        return pk, maximize(pk, omega0), None
    except SteadyVortexError as exc:
        return None, None, f"{type(exc).__name__}: {exc}"


def kappa_sweep(p: ProblemSpec, kappas: Sequence[float], warm_start: bool = True,
                n_test: int = 1024, threshold_fraction: float = 1e-6,
                S: Optional[np.ndarray] = None, workers: int = 1) -> SweepResult:
    """Solve for each κ in a decreasing list, warm-starting from the previous field.

    With ``workers > 1`` every κ is solved from a cold start in a thread pool;
    ``warm_start`` is then ignored.  Rows are reported in sweep order either way.
    """
    _check_decreasing(kappas, "kappas")
    d, q = p.domain, p.q
    S = maximum_set(q) if S is None else S
    qmax = q.max_closure()
    family = test_functions(d, n_test)
    if workers > 1:
        green_operator(d, p.backend)  # factorize once before the threads share it
        with ThreadPoolExecutor(max_workers=workers) as pool:
            solved = list(pool.map(lambda k: _solve_one(p, k), kappas))
    else:
        solved, prev = [], None
        for kappa in kappas:
            pk, sol, err = _solve_one(p, kappa, prev if warm_start else None)
            if sol is not None and sol.converged:
                prev = sol.omega
            solved.append((pk, sol, err))
    rows, errors, sols = [], [], []
    for kappa, (pk, sol, err) in zip(kappas, solved):
        if err is not None:
            errors.append((float(kappa), err))
            continue
        u = sol.psi + q.values
        sm = support_metrics(d, sol.omega, threshold_fraction=threshold_fraction, S=S)
        rows.append(SweepRow(
            kappa=float(kappa),
            mu=sol.mu,
            qmax_minus_mu=qmax - sol.mu,
            supp_diameter=sm.diameter,
            supp_dist_to_S=sm.dist_to_S,
            patch_nodes=sol.patch_nodes,
            penalty_over_kappa=penalty(d, sol.omega, sol.lam, pk.profile) / kappa,
            pairing_over_kappa=pairing_term(d, sol.omega, u, sol.mu) / kappa,
            weak_residual=weak_residual(d, sol.omega, q, psi=sol.psi, family=family),
            energy=sol.energy,
            iterations=sol.iterations,
            converged=sol.converged,
        ))
        sols.append(sol)
    return SweepResult(rows, errors, trend_flags(rows), sols)


def sweep_multi(p: MultiProblemSpec, kappa_scales: Sequence[float], warm_start: bool = True,
                n_test: int = 1024, threshold_fraction: float = 1e-6) -> MultiSweepResult:
    """Scale the base circulation vector by each factor; per-site columns use ``q(x̄_i)`` and ``{x̄_i}``."""
    _check_decreasing(kappa_scales, "kappa_scales")
    d, q = p.domain, p.q
    k = len(p.sites)
    centers = [np.array(s.site.center) for s in p.sites]
    qsite = [q.value_at(c) for c in centers]
    family = test_functions(d, n_test)
    site_rows = [[] for _ in range(k)]
    errors, sols = [], []
    prev = None
    for scale in kappa_scales:
        try:
            ps = p.scaled(float(scale))
            sol = maximize_multi(ps, prev if warm_start else None)
        except SteadyVortexError as exc:
            errors.append((float(scale), f"{type(exc).__name__}: {exc}"))
            continue
        if sol.converged:
            prev = sol.components
        u = sol.psi + q.values
        wr = weak_residual(d, sol.omega, q, psi=sol.psi, family=family)
        for i, (s, m) in enumerate(zip(ps.sites, ps.masks)):
            comp = sol.components[i]
            sm = support_metrics(d, comp, threshold_fraction=threshold_fraction, S=centers[i])
            site_rows[i].append(SweepRow(
                kappa=s.kappa,
                mu=float(sol.mu[i]),
                qmax_minus_mu=qsite[i] - float(sol.mu[i]),
                supp_diameter=sm.diameter,
                supp_dist_to_S=sm.dist_to_S,
                patch_nodes=int(sol.patch_nodes[i]),
                penalty_over_kappa=penalty(d, comp[m], s.lam, s.profile) / s.kappa,
                pairing_over_kappa=pairing_term(d, comp, u, float(sol.mu[i])) / s.kappa,
                weak_residual=wr,
                energy=sol.energy,
                iterations=sol.iterations,
                converged=sol.converged,
            ))
        sols.append(sol)
    return MultiSweepResult(site_rows, errors, [trend_flags(r) for r in site_rows], sols)


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def sweep_csv(rows: Sequence[SweepRow]) -> str:
    """CSV text with the fixed header, full double precision, rows in sweep order."""
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(CSV_HEADER)
    for r in rows:
        rec = asdict(r)
        wr.writerow([_fmt(rec[name]) for name in CSV_HEADER])
    return buf.getvalue()
