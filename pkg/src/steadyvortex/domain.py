"""Discrete computational domains.

Two kinds are supported: an axis-aligned rectangle and the unit disk.  Both
are sampled on a uniform square lattice of spacing ``h``; the interior nodes
carry midpoint quadrature weight ``h**2`` and the boundary is stored as a
closed, counterclockwise polyline with arclength coordinates.

The disk keeps only lattice points with ``|x| < 1 - h/2`` so that every
5-point stencil stays inside the continuous disk; neighbours that are not
nodes act as (stair-step) Dirichlet boundary points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import InvalidSpec, SpacingTooCoarse

__all__ = [
    "DomainSpec",
    "Boundary",
    "Domain",
    "VortexSite",
    "build_domain",
    "ball_mask",
    "validate_sites",
    "OFFSETS",
]

RECTANGLE = "rectangle"
DISK = "disk"

# east, west, north, south
OFFSETS = ((1, 0), (-1, 0), (0, 1), (0, -1))


@dataclass(frozen=True)
class DomainSpec:
    """Continuous domain description: a rectangle or the unit disk."""

    kind: str = DISK
    x0: float = 0.0
    y0: float = 0.0
    width: float = 1.0
    height: float = 1.0

    def __post_init__(self):
        if self.kind not in (RECTANGLE, DISK):
            raise InvalidSpec(f"unknown domain kind {self.kind!r}")
        if self.kind == RECTANGLE and not (self.width > 0 and self.height > 0):
            raise InvalidSpec(
                f"rectangle dimensions must be positive, got {self.width} x {self.height}"
            )

    @classmethod
    def rectangle(cls, x0=0.0, y0=0.0, width=1.0, height=1.0) -> "DomainSpec":
        return cls(RECTANGLE, float(x0), float(y0), float(width), float(height))

    @classmethod
    def disk(cls) -> "DomainSpec":
        return cls(DISK)

    @property
    def area(self) -> float:
        return math.pi if self.kind == DISK else self.width * self.height

    @property
    def diameter(self) -> float:
        return 2.0 if self.kind == DISK else math.hypot(self.width, self.height)

    @property
    def perimeter(self) -> float:
        return 2 * math.pi if self.kind == DISK else 2 * (self.width + self.height)


@dataclass(frozen=True, eq=False)
class Boundary:
    """Closed counterclockwise polyline; the last sample repeats the first."""

    points: np.ndarray  # (M+1, 2)
    s: np.ndarray  # (M+1,), s[0] = 0, s[-1] = perimeter
    normals: np.ndarray  # (M+1, 2), outward

    @property
    def perimeter(self) -> float:
        return float(self.s[-1])

    def __len__(self) -> int:
        return len(self.s)


@dataclass(frozen=True, eq=False)
class Domain:
    spec: DomainSpec
    h: float
    nodes: np.ndarray  # (N, 2), row-major by y then x
    ij: np.ndarray  # (N, 2) lattice indices (column, row)
    origin: tuple[float, float]  # position of lattice index (0, 0)
    shape: tuple[int, int]  # (nx, ny) lattice extent
    boundary: Boundary
    _index: np.ndarray = field(repr=False)  # (ny + 2, nx + 2), padded, -1 off-domain

    @property
    def kind(self) -> str:
        return self.spec.kind

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def cell_area(self) -> float:
        return self.h * self.h

    @property
    def discrete_area(self) -> float:
        return self.n * self.cell_area

    @property
    def diameter(self) -> float:
        return self.spec.diameter

    def lattice_index(self, i, j) -> np.ndarray:
        """Node index at lattice position ``(i, j)``, or -1 if that point is not a node."""
        i = np.asarray(i)
        j = np.asarray(j)
        nx, ny = self.shape
        ok = (i >= -1) & (i <= nx) & (j >= -1) & (j <= ny)
        out = np.full(np.broadcast(i, j).shape, -1, dtype=np.int64)
        ii = np.where(ok, i, -1) + 1
        jj = np.where(ok, j, -1) + 1
        out[...] = np.where(ok, self._index[jj, ii], -1)
        return out

    @cached_property
    def neighbors(self) -> np.ndarray:
        """(4, N) neighbour indices in ``OFFSETS`` order, -1 where the neighbour is off-domain."""
        out = np.empty((4, self.n), dtype=np.int64)
        for k, (di, dj) in enumerate(OFFSETS):
            out[k] = self.lattice_index(self.ij[:, 0] + di, self.ij[:, 1] + dj)
        return out

    def contains(self, points, margin: float = 0.0) -> np.ndarray:
        """True where points lie strictly inside the continuous domain shrunk by ``margin``."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        if self.kind == DISK:
            return np.hypot(p[:, 0], p[:, 1]) < 1.0 - margin
        sp = self.spec
        return (
            (p[:, 0] > sp.x0 + margin)
            & (p[:, 0] < sp.x0 + sp.width - margin)
            & (p[:, 1] > sp.y0 + margin)
            & (p[:, 1] < sp.y0 + sp.height - margin)
        )

    def boundary_param(self, points) -> np.ndarray:
        """Arclength coordinate of the boundary point nearest to each of ``points``."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        if self.kind == DISK:
            return np.mod(np.arctan2(p[:, 1], p[:, 0]), 2 * np.pi)
        sp = self.spec
        x = np.clip(p[:, 0], sp.x0, sp.x0 + sp.width) - sp.x0
        y = np.clip(p[:, 1], sp.y0, sp.y0 + sp.height) - sp.y0
        w, hh = sp.width, sp.height
        # distance to bottom, right, top, left sides and arclength on each
        dist = np.stack([np.abs(p[:, 1] - sp.y0), np.abs(p[:, 0] - sp.x0 - w),
                         np.abs(p[:, 1] - sp.y0 - hh), np.abs(p[:, 0] - sp.x0)])
        s_side = np.stack([x, w + y, w + hh + (w - x), 2 * w + hh + (hh - y)])
        side = np.argmin(dist, axis=0)
        return s_side[side, np.arange(len(p))]

    def distance_to_closure(self, point) -> float:
        c = np.asarray(point, dtype=float)
        if self.kind == DISK:
            return max(float(np.hypot(*c)) - 1.0, 0.0)
        sp = self.spec
        dx = max(sp.x0 - c[0], 0.0, c[0] - sp.x0 - sp.width)
        dy = max(sp.y0 - c[1], 0.0, c[1] - sp.y0 - sp.height)
        return math.hypot(dx, dy)


@dataclass(frozen=True)
class VortexSite:
    center: tuple[float, float]
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        if self.radius < 0:
            raise InvalidSpec(f"site radius must be nonnegative, got {self.radius}")


def _rectangle_boundary(sp: DomainSpec, h: float) -> Boundary:
    corners = [(sp.x0, sp.y0), (sp.x0 + sp.width, sp.y0),
               (sp.x0 + sp.width, sp.y0 + sp.height), (sp.x0, sp.y0 + sp.height)]
    outward = [(0.0, -1.0), (1.0, 0.0), (0.0, 1.0), (-1.0, 0.0)]
    pts, ss, nrm = [], [], []
    s0 = 0.0
    for k in range(4):
        a = np.array(corners[k])
        b = np.array(corners[(k + 1) % 4])
        length = float(np.linalg.norm(b - a))
        m = max(1, math.ceil(length / h - 1e-9))
        t = np.arange(m) / m
        pts.append(a + t[:, None] * (b - a))
        ss.append(s0 + t * length)
        nrm.append(np.tile(outward[k], (m, 1)))
        s0 += length
    pts.append(np.array([corners[0]]))
    ss.append(np.array([s0]))
    nrm.append(np.array([outward[0]]))
    return Boundary(np.vstack(pts), np.concatenate(ss), np.vstack(nrm))


def _disk_boundary(h: float) -> Boundary:
    m = math.ceil(2 * math.pi / h)
    theta = 2 * np.pi * np.arange(m + 1) / m
    theta[-1] = 2 * np.pi
    pts = np.column_stack([np.cos(theta), np.sin(theta)])
    pts[-1] = pts[0]
    return Boundary(pts, theta, pts.copy())


def build_domain(spec: DomainSpec, h: float) -> Domain:
    """Discretize ``spec`` with lattice spacing ``h``.

    Raises
    ------
    InvalidSpec
        If ``h`` is not positive.
    SpacingTooCoarse
        If no lattice point falls strictly inside the domain.
    """
    h = float(h)
    if not (h > 0 and math.isfinite(h)):
        raise InvalidSpec(f"grid spacing must be positive, got {h}")

    if spec.kind == RECTANGLE:
        mx = math.ceil(spec.width / h - 1e-9) - 1
        my = math.ceil(spec.height / h - 1e-9) - 1
        if mx < 1 or my < 1:
            raise SpacingTooCoarse(f"no interior node for h={h} on {spec}")
        origin = (spec.x0 + h, spec.y0 + h)
        nx, ny = mx, my
        jj, ii = np.meshgrid(np.arange(ny), np.arange(nx), indexing="ij")
        ij = np.column_stack([ii.ravel(), jj.ravel()])
        boundary = _rectangle_boundary(spec, h)
    else:
        rmax = 1.0 - h / 2
        k = math.ceil(rmax / h) - 1
        while (k + 1) * h < rmax:
            k += 1
        if k < 0:
            raise SpacingTooCoarse(f"no interior node for h={h} on the unit disk")
        lattice = np.arange(-k, k + 1)
        jj, ii = np.meshgrid(lattice, lattice, indexing="ij")
        inside = (ii * h) ** 2 + (jj * h) ** 2 < rmax * rmax
        ij = np.column_stack([ii[inside], jj[inside]]) + k
        origin = (-k * h, -k * h)
        nx = ny = 2 * k + 1
        boundary = _disk_boundary(h)

    nodes = np.column_stack([origin[0] + ij[:, 0] * h, origin[1] + ij[:, 1] * h])
    index = np.full((ny + 2, nx + 2), -1, dtype=np.int64)
    index[ij[:, 1] + 1, ij[:, 0] + 1] = np.arange(len(ij))
    return Domain(spec, h, nodes, ij, origin, (nx, ny), boundary, index)


def ball_mask(d: Domain, site: VortexSite) -> np.ndarray:
    """Indices of the nodes with ``|x - center| < radius``."""
    dist = np.hypot(d.nodes[:, 0] - site.center[0], d.nodes[:, 1] - site.center[1])
    return np.flatnonzero(dist < site.radius)


def validate_sites(d: Domain, sites: Sequence[VortexSite]) -> None:
    """Check that every ball meets the closed domain and that balls are pairwise disjoint."""
    for k, s in enumerate(sites):
        if not d.distance_to_closure(s.center) < s.radius:
            raise InvalidSpec(f"site {k} ball B({s.center}, {s.radius}) misses the domain")
    for a in range(len(sites)):
        for b in range(a + 1, len(sites)):
            sa, sb = sites[a], sites[b]
            gap = math.dist(sa.center, sb.center)
            if gap < sa.radius + sb.radius:
                raise InvalidSpec(f"sites {a} and {b} have overlapping balls")
