"""Penalized energy maximization over box- and mass-constrained vorticity.

For a single vortex the admissible fields satisfy ``0 <= ω <= Λ(κ)`` and
``∫ω = κ``; the functional is

    E(ω) = ½⟨ω, Gω⟩ + ⟨q, ω⟩ - Λ(κ) ∫ F(ω / Λ(κ)).

Maximizers are fixed points of the bathtub map ``ω ↦ min(Λ f((Gω + q - μ)₊), Λ)``
where ``μ`` enforces the mass constraint.  :func:`maximize` runs a damped
Picard iteration on that map and only accepts steps that do not decrease
``E``; since ``G`` is positive semidefinite and the penalty is convex, every
damped bathtub step is an ascent step, so the safeguard only guards against
roundoff.

The multi-vortex variant constrains each component to its own ball and
solves one multiplier per site.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .domain import Domain, VortexSite, ball_mask, validate_sites
from .elliptic import FD, ScalarField, green_operator
from .errors import BoxViolation, Infeasible, InvalidSpec, NoRoot, SiteInfeasible
from .profiles import Profile, StrengthSchedule

__all__ = [
    "SolverControls",
    "ProblemSpec",
    "SiteSpec",
    "MultiProblemSpec",
    "Solution",
    "MultiSolution",
    "FeasibilityReport",
    "mass",
    "penalty",
    "energy",
    "multi_energy",
    "multiplier_solve",
    "bathtub_update",
    "maximize",
    "maximize_multi",
    "feasibility_check",
    "first_order_residuals",
]

log = logging.getLogger(__name__)

ASCENT_SLACK = 1e-14
BOX_SLACK = 1e-12


@dataclass(frozen=True)
class SolverControls:
    max_iters: int = 500
    theta0: float = 0.5
    tol: float = 1e-8
    bisection_tol: float = 1e-12
    theta_floor: float = 1.0 / 64

    def __post_init__(self):
        if self.max_iters < 0:
            raise InvalidSpec("max_iters must be nonnegative")
        if not (0 < self.theta_floor <= self.theta0 <= 1):
            raise InvalidSpec("need 0 < theta_floor <= theta0 <= 1")
        if not (self.tol > 0 and self.bisection_tol > 0):
            raise InvalidSpec("tolerances must be positive")


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    domain: Domain
    q: ScalarField
    profile: Profile
    schedule: StrengthSchedule
    kappa: float
    backend: str = FD
    controls: SolverControls = SolverControls()

    def __post_init__(self):
        if not self.kappa > 0:
            raise InvalidSpec(f"kappa must be positive, got {self.kappa}")
        if self.q.domain is not self.domain:
            raise InvalidSpec("background flow lives on a different domain")
        cap = self.lam * self.domain.discrete_area
        if self.kappa > cap * (1 + 1e-12):
            raise Infeasible(f"kappa={self.kappa} exceeds the capacity Λ(κ)|D| = {cap}")

    @property
    def lam(self) -> float:
        return self.schedule(self.kappa)

    def with_kappa(self, kappa: float) -> "ProblemSpec":
        return ProblemSpec(self.domain, self.q, self.profile, self.schedule, kappa,
                           self.backend, self.controls)

    def with_q(self, q: ScalarField) -> "ProblemSpec":
        return ProblemSpec(self.domain, q, self.profile, self.schedule, self.kappa,
                           self.backend, self.controls)


@dataclass(frozen=True, eq=False)
class SiteSpec:
    site: VortexSite
    kappa: float
    profile: Profile = Profile.power(1.0)
    schedule: StrengthSchedule = StrengthSchedule.constant(1.0)

    @property
    def lam(self) -> float:
        return self.schedule(self.kappa)


@dataclass(frozen=True, eq=False)
class MultiProblemSpec:
    domain: Domain
    q: ScalarField
    sites: tuple[SiteSpec, ...]
    alpha: float = 1.0
    backend: str = FD
    controls: SolverControls = SolverControls()
    masks: tuple[np.ndarray, ...] = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "sites", tuple(self.sites))
        if not self.sites:
            raise InvalidSpec("at least one site is required")
        kap = np.array([s.kappa for s in self.sites])
        if not np.all(kap > 0):
            raise InvalidSpec("all site circulations must be positive")
        if kap.max() / kap.min() > self.alpha * (1 + 1e-12):
            raise InvalidSpec(
                f"circulation ratio {kap.max() / kap.min():g} exceeds the cone parameter {self.alpha:g}")
        validate_sites(self.domain, [s.site for s in self.sites])
        masks = tuple(ball_mask(self.domain, s.site) for s in self.sites)
        for k, (s, m) in enumerate(zip(self.sites, masks)):
            cap = s.lam * len(m) * self.domain.cell_area
            if s.kappa > cap * (1 + 1e-12):
                raise SiteInfeasible(f"site {k}: kappa={s.kappa} exceeds its ball capacity {cap}")
        object.__setattr__(self, "masks", masks)

    @property
    def kappas(self) -> np.ndarray:
        return np.array([s.kappa for s in self.sites])

    def scaled(self, factor: float) -> "MultiProblemSpec":
        sites = tuple(SiteSpec(s.site, s.kappa * factor, s.profile, s.schedule) for s in self.sites)
        return MultiProblemSpec(self.domain, self.q, sites, self.alpha, self.backend, self.controls)


@dataclass(eq=False)
class Solution:
    omega: np.ndarray
    mu: float
    kappa: float
    lam: float
    energy_trace: list
    iterations: int
    converged: bool
    fixed_point_residual: float
    patch_nodes: int
    psi: np.ndarray  # Green potential of omega
    degenerate: bool = False
    warnings: list = field(default_factory=list)

    @property
    def energy(self) -> float:
        return self.energy_trace[-1]


@dataclass(eq=False)
class MultiSolution:
    omega: np.ndarray
    components: list  # per-site node arrays (full length, zero off the ball)
    mu: np.ndarray
    kappas: np.ndarray
    lams: np.ndarray
    energy_trace: list
    iterations: int
    converged: bool
    fixed_point_residual: float
    patch_nodes: np.ndarray
    psi: np.ndarray
    site_residuals: np.ndarray
    degenerate: bool = False
    warnings: list = field(default_factory=list)

    @property
    def energy(self) -> float:
        return self.energy_trace[-1]


# ---------------------------------------------------------------- functionals


def mass(d: Domain, omega) -> float:
    return float(np.sum(omega) * d.cell_area)


def _check_box(omega: np.ndarray, lam: float) -> None:
    lo = float(np.min(omega)) if len(omega) else 0.0
    hi = float(np.max(omega)) if len(omega) else 0.0
    if lo < -BOX_SLACK * lam or hi > lam * (1 + BOX_SLACK):
        raise BoxViolation(f"field range [{lo:.3e}, {hi:.3e}] leaves [0, {lam}]")


def penalty(d: Domain, omega, lam: float, f: Profile) -> float:
    """``Λ ∫ F(ω/Λ)`` by midpoint quadrature; ``lam`` is the value ``Λ(κ)``."""
    w = np.asarray(omega, dtype=float)
    _check_box(w, lam)
    return float(lam * np.sum(f.primitive(w / lam)) * d.cell_area)


def energy(d: Domain, omega, q, lam: float, f: Profile, backend: str = FD,
           psi: Optional[np.ndarray] = None) -> float:
    w = np.asarray(omega, dtype=float)
    qv = np.asarray(getattr(q, "values", q), dtype=float)
    if psi is None:
        psi = green_operator(d, backend)(w)
    quad = 0.5 * float(np.dot(w, psi)) * d.cell_area
    lin = float(np.dot(qv, w)) * d.cell_area
    return quad + lin - penalty(d, w, lam, f)


def multi_energy(p: MultiProblemSpec, components: Sequence[np.ndarray],
                 psi: Optional[np.ndarray] = None) -> float:
    d = p.domain
    total = np.sum(components, axis=0)
    if psi is None:
        psi = green_operator(d, p.backend)(total)
    val = 0.5 * float(np.dot(total, psi)) * d.cell_area + float(np.dot(p.q.values, total)) * d.cell_area
    for s, m, w in zip(p.sites, p.masks, components):
        val -= penalty(d, w[m], s.lam, s.profile)
    return val


# ------------------------------------------------------------- bathtub step


def bathtub_update(u, mu: float, lam: float, f: Profile) -> np.ndarray:
    """``min(Λ f((u - μ)₊), Λ)`` pointwise."""
    s = np.maximum(np.asarray(u, dtype=float) - mu, 0.0)
    return lam * np.minimum(f.eval(s), 1.0)


def multiplier_solve(u, kappa: float, lam: float, f: Profile, cell_area: float,
                     tol: float = 1e-12, return_flag: bool = False):
    """Find ``μ`` with ``Σ bathtub_update(u, μ) h² = κ`` by bisection.

    The mass is continuous and nonincreasing in ``μ``.  The initial bracket is
    ``[min u - f⁻¹(1) - 1, max u]``.  If the mass equals ``κ`` on a whole
    interval (flat ``u``), its midpoint is returned and flagged.
    """
    u = np.asarray(u, dtype=float)
    n = len(u)
    cap = lam * n * cell_area
    if not kappa > 0:
        raise Infeasible(f"kappa must be positive, got {kappa}")
    if kappa > cap * (1 + 1e-12):
        raise Infeasible(f"kappa={kappa} exceeds the maximal mass {cap}")
    finv1 = f.inverse_at_one
    umin, umax = float(u.min()), float(u.max())
    if kappa >= cap * (1 - 1e-14):
        mu = umin - finv1
        return (mu, False) if return_flag else mu

    def m(mu):
        return float(np.sum(bathtub_update(u, mu, lam, f))) * cell_area

    lo, hi = umin - finv1 - 1.0, umax
    for _ in range(64):
        if m(lo) >= kappa:
            break
        lo -= 2.0 * (hi - lo)
    else:
        raise NoRoot("could not bracket the multiplier")

    a, b = lo, hi
    while b - a > tol:
        mid = 0.5 * (a + b)
        if mid == a or mid == b:
            break
        if m(mid) >= kappa:
            a = mid
        else:
            b = mid
    mu_right = 0.5 * (a + b)
    degenerate = False
    if m(a) == kappa:
        # mass is constant on an interval ending at mu_right; find its left end
        c, e = lo, a
        while e - c > tol:
            mid = 0.5 * (c + e)
            if mid == c or mid == e:
                break
            if m(mid) > kappa:
                c = mid
            else:
                e = mid
        mu_left = 0.5 * (c + e)
        if mu_right - mu_left > 2 * tol:
            degenerate = True
            mu_right = 0.5 * (mu_left + mu_right)
    return (mu_right, degenerate) if return_flag else mu_right


def _restore_mass(w: np.ndarray, kappa: float, lam: float, cell_area: float, tol: float) -> np.ndarray:
    """Multiplicative rescale to mass ``κ``, re-clip, then one additive correction if needed."""
    total = float(np.sum(w)) * cell_area
    if total > 0:
        w = w * (kappa / total)
    w = np.clip(w, 0.0, lam)
    if abs(float(np.sum(w)) * cell_area - kappa) <= tol * kappa:
        return w
    support = w > 0
    if not np.any(support):
        support = np.ones_like(w, dtype=bool)

    def shifted(c):
        out = w.copy()
        out[support] = np.clip(w[support] + c, 0.0, lam)
        return out

    a, b = -lam, lam
    for _ in range(200):
        mid = 0.5 * (a + b)
        if float(np.sum(shifted(mid))) * cell_area >= kappa:
            b = mid
        else:
            a = mid
    return shifted(b)


# ----------------------------------------------------------------- solvers


def _initial(d: Domain, idx: np.ndarray, kappa: float, lam: float) -> np.ndarray:
    w = np.zeros(d.n)
    w[idx] = kappa / (len(idx) * d.cell_area)
    return np.minimum(w, lam)


def maximize(p: ProblemSpec, omega0: Optional[np.ndarray] = None) -> Solution:
    """Damped bathtub fixed-point iteration with energy-ascent acceptance.

    Returns the last accepted iterate; ``converged`` is False if
    ``max_iters`` accepted steps did not reach the fixed-point tolerance.
    """
    d, f, c = p.domain, p.profile, p.controls
    lam, kappa, h2 = p.lam, p.kappa, d.cell_area
    q = p.q.values
    op = green_operator(d, p.backend)
    finv1 = f.inverse_at_one
    warnings: list = []

    if omega0 is None:
        w = _initial(d, np.arange(d.n), kappa, lam)
    else:
        w = _restore_mass(np.clip(np.asarray(omega0, dtype=float), 0.0, lam), kappa, lam, h2, c.tol)
    psi = op(w)
    e = energy(d, w, q, lam, f, psi=psi)
    trace = [e]
    it = 0
    polished = False
    while True:
        u = psi + q
        mu, flat = multiplier_solve(u, kappa, lam, f, h2, c.bisection_tol, return_flag=True)
        star = bathtub_update(u, mu, lam, f)
        res = float(np.max(np.abs(w - star)))
        mass_err = abs(mass(d, w) - kappa)
        degenerate = flat
        converged = res <= c.tol * lam and mass_err <= c.tol * kappa
        if (converged and polished) or it >= c.max_iters:
            break
        # once within tolerance, take one undamped step so the iterate is exactly in bathtub form
        polished = converged
        theta = 1.0 if converged else c.theta0
        while True:
            cand = _restore_mass((1 - theta) * w + theta * star, kappa, lam, h2, c.tol)
            psi_c = op(cand)
            e_c = energy(d, cand, q, lam, f, psi=psi_c)
            if e_c >= e - ASCENT_SLACK * (1 + abs(e)):
                break
            theta *= 0.5
            if theta < c.theta_floor:
                msg = f"iteration {it + 1}: energy decreased by {e - e_c:.3e}; step accepted at damping floor"
                warnings.append(msg)
                log.warning(msg)
                break
        w, psi, e = cand, psi_c, e_c
        trace.append(e)
        it += 1

    patch = int(np.count_nonzero(u - mu >= finv1))
    if not converged:
        log.info("maximize: not converged after %d iterations (residual %.3e)", it, res)
    return Solution(w, float(mu), kappa, lam, trace, it, bool(converged), res, patch, psi,
                    degenerate, warnings)


def maximize_multi(p: MultiProblemSpec, omega0: Optional[Sequence[np.ndarray]] = None) -> MultiSolution:
    """Per-site damped bathtub iteration coupled through ``u = G(Σ ω_i) + q``."""
    d, c = p.domain, p.controls
    h2 = d.cell_area
    q = p.q.values
    op = green_operator(d, p.backend)
    k = len(p.sites)
    warnings: list = []

    comps = []
    for i, (s, m) in enumerate(zip(p.sites, p.masks)):
        if omega0 is None:
            comps.append(_initial(d, m, s.kappa, s.lam))
        else:
            w = np.zeros(d.n)
            w[m] = _restore_mass(np.clip(np.asarray(omega0[i], dtype=float)[m], 0.0, s.lam),
                                 s.kappa, s.lam, h2, c.tol)
            comps.append(w)
    psi = op(np.sum(comps, axis=0))
    e = multi_energy(p, comps, psi)
    trace = [e]
    it = 0
    polished = False
    while True:
        u = psi + q
        mus = np.empty(k)
        stars = []
        res_i = np.empty(k)
        mass_ok = True
        degenerate = False
        for i, (s, m) in enumerate(zip(p.sites, p.masks)):
            mu, flat = multiplier_solve(u[m], s.kappa, s.lam, s.profile, h2, c.bisection_tol,
                                        return_flag=True)
            degenerate |= flat
            st = np.zeros(d.n)
            st[m] = bathtub_update(u[m], mu, s.lam, s.profile)
            mus[i] = mu
            stars.append(st)
            res_i[i] = float(np.max(np.abs(comps[i] - st)))
            mass_ok &= abs(mass(d, comps[i]) - s.kappa) <= c.tol * s.kappa
        converged = bool(mass_ok and all(res_i[i] <= c.tol * s.lam for i, s in enumerate(p.sites)))
        if (converged and polished) or it >= c.max_iters:
            break
        polished = converged
        theta = 1.0 if converged else c.theta0
        while True:
            cand = []
            for i, (s, m) in enumerate(zip(p.sites, p.masks)):
                w = np.zeros(d.n)
                w[m] = _restore_mass((1 - theta) * comps[i][m] + theta * stars[i][m],
                                     s.kappa, s.lam, h2, c.tol)
                cand.append(w)
            psi_c = op(np.sum(cand, axis=0))
            e_c = multi_energy(p, cand, psi_c)
            if e_c >= e - ASCENT_SLACK * (1 + abs(e)):
                break
            theta *= 0.5
            if theta < c.theta_floor:
                msg = f"iteration {it + 1}: energy decreased by {e - e_c:.3e}; step accepted at damping floor"
                warnings.append(msg)
                log.warning(msg)
                break
        comps, psi, e = cand, psi_c, e_c
        trace.append(e)
        it += 1

    patch = np.array([int(np.count_nonzero(u[m] - mus[i] >= s.profile.inverse_at_one))
                      for i, (s, m) in enumerate(zip(p.sites, p.masks))])
    lams = np.array([s.lam for s in p.sites])
    return MultiSolution(np.sum(comps, axis=0), comps, mus, p.kappas, lams, trace, it, converged,
                         float(res_i.max()), patch, psi, res_i, degenerate, warnings)


# -------------------------------------------------------------- diagnostics


@dataclass(frozen=True)
class FeasibilityReport:
    checks: dict  # name -> (passed, worst violation)

    @property
    def passed(self) -> bool:
        return all(ok for ok, _ in self.checks.values())

    def __getitem__(self, name):
        return self.checks[name]


def feasibility_check(omega, p, tol: Optional[float] = None) -> FeasibilityReport:
    """Box, mass and (multi-site) support constraints, each with its worst violation.

    ``omega`` is a node array for a single problem, or a sequence of per-site
    components for a :class:`MultiProblemSpec`.
    """
    d = p.domain
    tol = p.controls.tol if tol is None else tol
    checks = {}
    if isinstance(p, ProblemSpec):
        w = np.asarray(omega, dtype=float)
        lam = p.lam
        box = max(0.0, -float(w.min()), float(w.max()) - lam)
        checks["box"] = (box <= BOX_SLACK * lam, box)
        merr = abs(mass(d, w) - p.kappa)
        checks["mass"] = (merr <= tol * p.kappa, merr)
        return FeasibilityReport(checks)

    comps = [np.asarray(w, dtype=float) for w in omega]
    box = merr_ok = True
    worst_box = worst_mass = worst_supp = 0.0
    supp_ok = True
    for s, m, w in zip(p.sites, p.masks, comps):
        vb = max(0.0, -float(w.min()), float(w.max()) - s.lam)
        worst_box = max(worst_box, vb)
        box &= vb <= BOX_SLACK * s.lam
        vm = abs(mass(d, w) - s.kappa)
        worst_mass = max(worst_mass, vm)
        merr_ok &= vm <= tol * s.kappa
        outside = np.ones(d.n, dtype=bool)
        outside[m] = False
        leak = float(np.max(np.abs(w[outside]))) if np.any(outside) else 0.0
        worst_supp = max(worst_supp, leak)
        supp_ok &= leak == 0.0
    checks["box"] = (bool(box), worst_box)
    checks["mass"] = (bool(merr_ok), worst_mass)
    checks["support"] = (bool(supp_ok), worst_supp)
    return FeasibilityReport(checks)


def first_order_residuals(omega, u, mu: float, lam: float, f: Profile) -> dict:
    """Violations of the bathtub optimality conditions.

    * saturated nodes (``ω = Λ``): ``u - μ >= f⁻¹(1)``
    * interior nodes (``0 < ω < Λ``): ``u - μ = f⁻¹(ω/Λ)``
    * vacant nodes (``ω = 0``): ``u - μ <= 0``
    """
    w = np.asarray(omega, dtype=float)
    t = np.asarray(u, dtype=float) - mu
    sat = w >= lam
    vac = w <= 0
    mid = ~sat & ~vac
    finv1 = f.inverse_at_one
    out = {
        "saturated": float(np.max(np.maximum(finv1 - t[sat], 0.0), initial=0.0)),
        "interior": float(np.max(np.abs(t[mid] - f.inverse(w[mid] / lam)), initial=0.0)),
        "vacant": float(np.max(np.maximum(t[vac], 0.0), initial=0.0)),
    }
    return out
