"""Text formats for node fields and solution sidecars.

Field file::

    nx ny h x0 y0 kind
    v_0
    v_1
    ...

``(x0, y0)`` is the position of lattice index ``(0, 0)`` and ``nx ny`` the
lattice extent; values follow domain node order at 17 significant digits,
which round-trips doubles exactly.  The sidecar is ``key=value`` lines.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .domain import DISK, RECTANGLE, Domain, DomainSpec, build_domain
from .errors import InvalidSpec

__all__ = [
    "FieldFile",
    "format_field",
    "write_field",
    "read_field",
    "format_sidecar",
    "write_sidecar",
    "read_sidecar",
    "field_csv",
]


def _g(v: float) -> str:
    return format(float(v), ".17g")


@dataclass(frozen=True, eq=False)
class FieldFile:
    nx: int
    ny: int
    h: float
    x0: float
    y0: float
    kind: str
    values: np.ndarray

    def domain(self) -> Domain:
        """Rebuild the domain the field was sampled on."""
        if self.kind == DISK:
            spec = DomainSpec.disk()
        else:
            spec = DomainSpec.rectangle(self.x0 - self.h, self.y0 - self.h,
                                        (self.nx + 1) * self.h, (self.ny + 1) * self.h)
        d = build_domain(spec, self.h)
        if d.n != len(self.values) or d.shape != (self.nx, self.ny):
            raise InvalidSpec(
                f"header describes {d.n} nodes on a {d.shape} lattice, file has {len(self.values)} values")
        return d


def format_field(d: Domain, values) -> str:
    v = np.asarray(values, dtype=float)
    if v.shape != (d.n,):
        raise ValueError(f"expected {d.n} node values, got shape {v.shape}")
    nx, ny = d.shape
    head = f"{nx} {ny} {_g(d.h)} {_g(d.origin[0])} {_g(d.origin[1])} {d.kind}"
    return "\n".join([head] + [_g(x) for x in v]) + "\n"


def write_field(path, d: Domain, values) -> Path:
    path = Path(path)
    path.write_text(format_field(d, values))
    return path


def read_field(path) -> FieldFile:
    lines = Path(path).read_text().split("\n")
    parts = lines[0].split()
    if len(parts) != 6:
        raise InvalidSpec(f"{path}: header must be 'nx ny h x0 y0 kind', got {lines[0]!r}")
    nx, ny = int(parts[0]), int(parts[1])
    h, x0, y0 = (float(t) for t in parts[2:5])
    kind = parts[5]
    if kind not in (RECTANGLE, DISK):
        raise InvalidSpec(f"{path}: unknown domain kind {kind!r}")
    vals = np.array([float(t) for t in lines[1:] if t.strip()], dtype=float)
    return FieldFile(nx, ny, h, x0, y0, kind, vals)


def field_csv(f: FieldFile) -> str:
    """``x,y,value`` rows at node positions."""
    d = f.domain()
    out = ["x,y,value"]
    for (x, y), v in zip(d.nodes, f.values):
        out.append(f"{_g(x)},{_g(y)},{_g(v)}")
    return "\n".join(out) + "\n"


def format_sidecar(mu, kappa, iterations: int, converged: bool, patch_nodes,
                   site_mu: Optional[np.ndarray] = None) -> str:
    lines = [
        f"mu={_g(mu)}",
        f"kappa={_g(kappa)}",
        f"iterations={int(iterations)}",
        f"converged={1 if converged else 0}",
        f"patch_nodes={int(patch_nodes)}",
    ]
    if site_mu is not None:
        lines += [f"mu_{i + 1}={_g(m)}" for i, m in enumerate(site_mu)]
    return "\n".join(lines) + "\n"


def write_sidecar(path, **kw) -> Path:
    path = Path(path)
    path.write_text(format_sidecar(**kw))
    return path


def read_sidecar(path) -> dict:
    out = {}
    for line in Path(path).read_text().splitlines():
        if line.strip():
            key, _, val = line.partition("=")
            out[key.strip()] = val.strip()
    return out
