"""Green operator, discrete harmonic extension and the background flow.

Fields are plain numpy arrays of node values in domain node order.  The
background flow additionally carries its boundary trace, so it is wrapped in
:class:`ScalarField`.

Two backends apply the Green operator of ``-Δ`` with zero Dirichlet data:

* ``"fd"``: sparse 5-point Laplacian, factorized once per domain (SuperLU).
* ``"disk-kernel"``: direct summation of the unit-disk Green function built by
  the method of images, with the self-cell log singularity integrated by a
  fixed 16x16 midpoint rule.
"""

from __future__ import annotations

import threading
import weakref
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
from scipy.integrate import cumulative_trapezoid
from scipy.sparse.linalg import splu

from .domain import DISK, OFFSETS, Domain
from .errors import BackendMismatch, CompatibilityViolation, SolveFailure

__all__ = [
    "FD",
    "DISK_KERNEL",
    "ScalarField",
    "laplacian",
    "green_apply",
    "green_operator",
    "dirichlet_extend",
    "harmonic_from_flux",
    "gradient",
    "velocity_field",
    "disk_green",
    "flux_compatibility",
]

FD = "fd"
DISK_KERNEL = "disk-kernel"
BACKENDS = (FD, DISK_KERNEL)

SOLVE_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Node values over a domain, optionally with a trace on the boundary samples."""

    domain: Domain
    values: np.ndarray
    boundary: Optional[np.ndarray] = None
    exact: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.domain.n,):
            raise ValueError(f"expected {self.domain.n} node values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", v)
        if self.boundary is not None:
            b = _closed_samples(self.domain, self.boundary)
            object.__setattr__(self, "boundary", b)

    def max_closure(self) -> float:
        """Maximum over interior nodes and boundary samples."""
        m = float(self.values.max())
        if self.boundary is not None:
            m = max(m, float(self.boundary.max()))
        return m

    def shifted(self, c: float) -> "ScalarField":
        b = None if self.boundary is None else self.boundary + c
        ex = None if self.exact is None else (lambda x, y, f=self.exact: f(x, y) + c)
        return ScalarField(self.domain, self.values + c, b, ex)

    def value_at(self, point) -> float:
        """Evaluate at an arbitrary point of the closed domain.

        Uses the analytic expression when one is attached; otherwise the
        boundary trace for points on the boundary, else the nearest node.
        """
        x, y = float(point[0]), float(point[1])
        if self.exact is not None:
            return float(self.exact(np.array(x), np.array(y)))
        d = self.domain
        if self.boundary is not None and not d.contains([[x, y]], margin=d.h / 2)[0]:
            s = d.boundary_param([[x, y]])
            return float(_periodic_interp(d, s, self.boundary)[0])
        k = int(np.argmin(np.hypot(d.nodes[:, 0] - x, d.nodes[:, 1] - y)))
        return float(self.values[k])


def _closed_samples(d: Domain, samples) -> np.ndarray:
    b = np.asarray(samples, dtype=float)
    m = len(d.boundary)
    if b.shape == (m - 1,):
        b = np.append(b, b[0])
    if b.shape != (m,):
        raise ValueError(f"expected {m - 1} or {m} boundary samples, got shape {b.shape}")
    return b


def _periodic_interp(d: Domain, s, closed_values) -> np.ndarray:
    bs = d.boundary.s
    return np.interp(s, bs[:-1], closed_values[:-1], period=d.boundary.perimeter)


# ---------------------------------------------------------------- FD backend


def laplacian(d: Domain) -> sp.csc_matrix:
    """5-point discrete ``-Δ`` with zero Dirichlet data, scaled by ``1/h**2`` (SPD)."""
    n = d.n
    rows = [np.arange(n)]
    cols = [np.arange(n)]
    vals = [np.full(n, 4.0)]
    for k in range(4):
        nb = d.neighbors[k]
        ok = nb >= 0
        rows.append(np.flatnonzero(ok))
        cols.append(nb[ok])
        vals.append(np.full(int(ok.sum()), -1.0))
    a = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )
    return (a.tocsc() / (d.h * d.h)).tocsc()


class FDGreen:
    """Factorized 5-point Laplacian; immutable once built."""

    def __init__(self, d: Domain):
        self.domain = d
        self.matrix = laplacian(d)
        self._lu = splu(self.matrix, permc_spec="MMD_AT_PLUS_A")
        self._norm = float(abs(self.matrix).sum(axis=1).max())

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Direct solve plus one step of iterative refinement.

        The tolerance applies to the normwise backward error
        ``|b - Ax| / (|A| |x| + |b|)`` (infinity norms).
        """
        rhs = np.asarray(rhs, dtype=float)
        x = self._lu.solve(rhs)
        r = rhs - self.matrix @ x
        x += self._lu.solve(r)
        r = rhs - self.matrix @ x
        scale = self._norm * np.max(np.abs(x), initial=0.0) + np.max(np.abs(rhs), initial=0.0)
        if scale > 0:
            res = np.max(np.abs(r)) / scale
            if not res <= SOLVE_RTOL:
                raise SolveFailure(f"backward error {res:.3e} exceeds {SOLVE_RTOL}")
        return x

    def __call__(self, omega: np.ndarray) -> np.ndarray:
        return self.solve(omega)


# ------------------------------------------------------- disk kernel backend


def disk_green(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Unit-disk Dirichlet Green function for ``-Δ``; ``x`` (..., 2), ``y`` (..., 2).

    ``G(x, y) = -(1/2π) [ln|x - y| - ln(|x| |x/|x|² - y|)]`` with the image
    term written as ``|x|² |x/|x|² - y|² = 1 - 2 x·y + |x|² |y|²``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r2 = np.sum((x - y) ** 2, axis=-1)
    xy = np.sum(x * y, axis=-1)
    img = 1.0 - 2.0 * xy + np.sum(x * x, axis=-1) * np.sum(y * y, axis=-1)
    return -(np.log(r2) - np.log(img)) / (4 * np.pi)


def _self_cell_log_integral(h: float, m: int = 16) -> float:
    """``∫_cell -(1/2π) ln|x_c - y| dy`` over an h-by-h cell centred at x_c."""
    t = (np.arange(m) + 0.5) / m - 0.5
    dx, dy = np.meshgrid(t * h, t * h)
    return float(-np.sum(np.log(np.hypot(dx, dy))) * (h / m) ** 2 / (2 * np.pi))


class DiskKernelGreen:
    """Direct summation with the method-of-images kernel, evaluated in row blocks."""

    DENSE_LIMIT = 4000
    BLOCK = 256

    def __init__(self, d: Domain):
        if d.kind != DISK:
            raise BackendMismatch("disk-kernel backend requires the unit disk")
        self.domain = d
        x = d.nodes
        r2 = np.sum(x * x, axis=1)
        # self cell: singular log part by quadrature, smooth image part at the centre
        self.diag = _self_cell_log_integral(d.h) + d.cell_area * np.log(1.0 - r2) / (2 * np.pi)
        self._dense = self._block(0, d.n) if d.n <= self.DENSE_LIMIT else None

    def _block(self, start: int, stop: int) -> np.ndarray:
        d = self.domain
        x = d.nodes
        xb = x[start:stop]
        dx = xb[:, None, 0] - x[None, :, 0]
        dy = xb[:, None, 1] - x[None, :, 1]
        r2 = dx * dx + dy * dy
        rows = np.arange(stop - start)
        r2[rows, rows + start] = 1.0
        nx2 = np.sum(xb * xb, axis=1)[:, None]
        ny2 = np.sum(x * x, axis=1)[None, :]
        img = 1.0 - 2.0 * (xb[:, None, 0] * x[None, :, 0] + xb[:, None, 1] * x[None, :, 1]) + nx2 * ny2
        g = (np.log(img) - np.log(r2)) * (d.cell_area / (4 * np.pi))
        g[rows, rows + start] = self.diag[start:stop]
        return g

    def __call__(self, omega: np.ndarray) -> np.ndarray:
        omega = np.asarray(omega, dtype=float)
        if self._dense is not None:
            return self._dense @ omega
        out = np.empty(self.domain.n)
        for start in range(0, self.domain.n, self.BLOCK):
            stop = min(start + self.BLOCK, self.domain.n)
            out[start:stop] = self._block(start, stop) @ omega
        return out


_CACHE: "weakref.WeakKeyDictionary[Domain, dict]" = weakref.WeakKeyDictionary()
_CACHE_LOCK = threading.Lock()


def green_operator(d: Domain, backend: str = FD):
    """Shared (cached) operator object for ``d``; safe to call concurrently."""
    if backend not in BACKENDS:
        raise ValueError(f"unknown backend {backend!r}")
    if backend == DISK_KERNEL and d.kind != DISK:
        raise BackendMismatch("disk-kernel backend requires the unit disk")
    with _CACHE_LOCK:
        ops = _CACHE.setdefault(d, {})
        if backend not in ops:
            ops[backend] = FDGreen(d) if backend == FD else DiskKernelGreen(d)
        return ops[backend]


def green_apply(d: Domain, omega, backend: str = FD) -> np.ndarray:
    """Apply the Green operator: returns ``ψ`` with ``-Δψ = ω`` and ``ψ = 0`` on the boundary."""
    w = np.asarray(getattr(omega, "values", omega), dtype=float)
    if w.shape != (d.n,):
        raise ValueError(f"expected {d.n} node values, got shape {w.shape}")
    return green_operator(d, backend)(w)


# ----------------------------------------------------- harmonic background


def _exterior_stencil_points(d: Domain):
    """Node indices and coordinates of every off-domain 5-point neighbour."""
    idx, pts = [], []
    for k, (di, dj) in enumerate(OFFSETS):
        missing = np.flatnonzero(d.neighbors[k] < 0)
        idx.append(missing)
        pts.append(d.nodes[missing] + d.h * np.array([di, dj], dtype=float))
    return np.concatenate(idx), np.vstack(pts)


def dirichlet_extend(d: Domain, bdata) -> ScalarField:
    """Discrete harmonic field whose stencil boundary points carry ``bdata``.

    ``bdata`` is given at the boundary samples; each exterior stencil point
    takes the (periodic, linear) interpolant at its nearest boundary position.
    """
    closed = _closed_samples(d, bdata)
    idx, pts = _exterior_stencil_points(d)
    g = _periodic_interp(d, d.boundary_param(pts), closed)
    rhs = np.bincount(idx, weights=g, minlength=d.n) / (d.h * d.h)
    op = green_operator(d, FD)
    return ScalarField(d, op.solve(rhs), closed)


def flux_compatibility(d: Domain, g) -> float:
    """Return ``∮ g dσ`` by the trapezoid rule on the closed boundary polyline."""
    closed = _closed_samples(d, g)
    return float(np.trapezoid(closed, d.boundary.s))


def harmonic_from_flux(d: Domain, g) -> ScalarField:
    """Harmonic ``q`` with ``∇⊥q·n = g`` on the boundary, normalized to zero boundary mean.

    Since ``∇⊥q·n`` is the counterclockwise tangential derivative of ``q``, the
    boundary trace is the arclength antiderivative of ``g``.
    """
    closed = _closed_samples(d, g)
    s = d.boundary.s
    total = flux_compatibility(d, closed)
    scale = d.boundary.perimeter * max(float(np.max(np.abs(closed))), 1e-300)
    if abs(total) > 1e-10 * scale:
        raise CompatibilityViolation(f"boundary flux integrates to {total:.3e}, not 0")
    trace = cumulative_trapezoid(closed, s, initial=0.0)
    # remove the O(roundoff) drift so the trace closes, then zero the mean
    trace -= s / s[-1] * trace[-1]
    trace -= np.trapezoid(trace, s) / s[-1]
    return dirichlet_extend(d, trace)


# ------------------------------------------------------------------ velocity


def gradient(d: Domain, values) -> np.ndarray:
    """(N, 2) finite-difference gradient: central, one-sided next to the boundary."""
    v = np.asarray(values, dtype=float)
    out = np.zeros((d.n, 2))
    h = d.h
    nb = d.neighbors
    for axis, (plus, minus) in enumerate(((0, 1), (2, 3))):
        ip, im = nb[plus], nb[minus]
        hp, hm = ip >= 0, im >= 0
        both = hp & hm
        out[both, axis] = (v[ip[both]] - v[im[both]]) / (2 * h)
        only_p = hp & ~hm
        out[only_p, axis] = (v[ip[only_p]] - v[only_p]) / h
        only_m = hm & ~hp
        out[only_m, axis] = (v[only_m] - v[im[only_m]]) / h
    return out


def perp(vec: np.ndarray) -> np.ndarray:
    """Clockwise rotation by π/2: ``(a, b) -> (b, -a)``."""
    return np.column_stack([vec[:, 1], -vec[:, 0]])


def velocity_field(d: Domain, omega, q, backend: str = FD) -> np.ndarray:
    """Velocity ``∇⊥(q + Gω)`` at the nodes, shape (N, 2)."""
    qv = np.asarray(getattr(q, "values", q), dtype=float)
    psi = qv + green_apply(d, omega, backend)
    return perp(gradient(d, psi))
