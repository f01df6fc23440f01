"""Run configuration: one JSON document per run.

Example (single vortex on the unit disk)::

    {
      "domain": {"kind": "disk", "h": 0.015625},
      "q": {"kind": "flux", "modes": [{"k": 1, "sin": -1.0}]},
      "profile": {"kind": "power", "p": 1},
      "lambda": {"kind": "constant", "a": 1.0},
      "kappa": 0.05
    }

Exactly one of ``kappa`` (single solve), ``kappas`` (sweep) or ``sites``
(multi-site, optionally swept with ``kappa_scales``) must be present.
Unknown keys are rejected so that a misspelt tolerance cannot pass silently.
"""

from __future__ import annotations

import difflib
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .domain import DISK, RECTANGLE, Domain, DomainSpec, VortexSite, build_domain
from .elliptic import BACKENDS, FD, ScalarField, dirichlet_extend, harmonic_from_flux
from .errors import InvalidSpec, SteadyVortexError
from .profiles import Profile, StrengthSchedule, load_table
from .variational import MultiProblemSpec, ProblemSpec, SiteSpec, SolverControls

__all__ = ["RunConfig", "ParseError", "ValidationError", "parse_config", "load_config", "build_q",
           "ANALYTIC_Q"]


class ParseError(InvalidSpec):
    """Malformed document, unknown key or wrong value type."""


class ValidationError(InvalidSpec):
    """All constraint violations found in an otherwise well-formed document."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


ANALYTIC_Q = {
    "0": lambda x, y: 0.0 * x,
    "x1": lambda x, y: 1.0 * x,
    "x2": lambda x, y: 1.0 * y,
    "x1^2-x2^2": lambda x, y: x * x - y * y,
    "2x1x2": lambda x, y: 2.0 * x * y,
}

SCHEMA = {
    "domain": {"kind", "h", "x0", "y0", "width", "height"},
    "q": {"kind", "expr", "modes", "const", "shift"},
    "profile": {"kind", "p", "path"},
    "lambda": {"kind", "a", "beta", "gamma0"},
    "solver": {"max_iters", "theta0", "tol", "bisection_tol", "theta_floor", "backend"},
    "output": {"dir", "name"},
    "diagnostics": {"support_threshold", "n_test", "argmax"},
}
SCALARS = {"kappa", "kappas", "sites", "alpha", "kappa_scales", "seed", "parallel"}
TOP = set(SCHEMA) | SCALARS
SITE_KEYS = {"center", "radius", "kappa", "profile", "lambda"}
MODE_KEYS = {"k", "cos", "sin"}


@dataclass(eq=False)
class RunConfig:
    """A validated run description.

    ``kind`` is ``"single"``, ``"sweep"``, ``"multi"`` or ``"multi-sweep"``.
    ``problem`` is a :class:`ProblemSpec` (single and sweep; for a sweep it
    carries the smallest κ) or a :class:`MultiProblemSpec`.
    """

    kind: str
    problem: object
    kappas: Optional[list] = None
    kappa_scales: Optional[list] = None
    output_dir: str = "out"
    name: str = "omega"
    seed: int = 0
    n_test: int = 1024
    support_threshold: float = 1e-6
    argmax: Optional[np.ndarray] = None
    parallel: bool = False
    raw: dict = field(default_factory=dict, repr=False)
    source: Optional[Path] = None

    @property
    def domain(self) -> Domain:
        return self.problem.domain

    @property
    def profiles(self) -> list:
        if isinstance(self.problem, MultiProblemSpec):
            return [s.profile for s in self.problem.sites]
        return [self.problem.profile]

    @property
    def schedules(self) -> list:
        if isinstance(self.problem, MultiProblemSpec):
            return [s.schedule for s in self.problem.sites]
        return [self.problem.schedule]


# ------------------------------------------------------------------ parsing


def _line_of(text: str, key: str) -> int:
    m = re.search(r'"' + re.escape(key) + r'"\s*:', text)
    return text.count("\n", 0, m.start()) + 1 if m else 0


def _unknown(text: str, key: str, allowed, where: str) -> ParseError:
    hint = difflib.get_close_matches(key, sorted(allowed), n=1)
    msg = f"line {_line_of(text, key)}: unknown key {key!r} in {where}"
    if hint:
        msg += f"; did you mean {hint[0]!r}?"
    return ParseError(msg)


def _no_dupes(pairs):
    out = {}
    for k, v in pairs:
        if k in out:
            raise ParseError(f"duplicate key {k!r}")
        out[k] = v
    return out


def _check_keys(text, obj, allowed, where):
    if not isinstance(obj, dict):
        raise ParseError(f"{where} must be an object, got {type(obj).__name__}")
    for k in obj:
        if k not in allowed:
            raise _unknown(text, k, allowed, where)


def _num(obj, key, where, default=None, integer=False):
    if key not in obj:
        return default
    v = obj[key]
    ok = isinstance(v, int) if integer else isinstance(v, (int, float))
    if isinstance(v, bool) or not ok:
        kind = "an integer" if integer else "a number"
        raise ParseError(f"{where}.{key} must be {kind}, got {v!r}")
    return v


def _str(obj, key, where, default=None):
    if key not in obj:
        return default
    v = obj[key]
    if not isinstance(v, str):
        raise ParseError(f"{where}.{key} must be a string, got {v!r}")
    return v


def _numlist(obj, key):
    v = obj[key]
    if not isinstance(v, list) or any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in v):
        raise ParseError(f"{key} must be a list of numbers")
    return [float(x) for x in v]


def load_config(path) -> dict:
    """Read and structurally check the document; returns the raw dict."""
    path = Path(path)
    text = path.read_text()
    try:
        doc = json.loads(text, object_pairs_hook=_no_dupes)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    _check_keys(text, doc, TOP, "top level")
    for sec, keys in SCHEMA.items():
        if sec in doc:
            _check_keys(text, doc[sec], keys, sec)
    if "q" in doc:
        for m in doc["q"].get("modes", []):
            _check_keys(text, m, MODE_KEYS, "q.modes[]")
    if "sites" in doc:
        if not isinstance(doc["sites"], list):
            raise ParseError("sites must be a list")
        for s in doc["sites"]:
            _check_keys(text, s, SITE_KEYS, "sites[]")
            for sec in ("profile", "lambda"):
                if sec in s:
                    _check_keys(text, s[sec], SCHEMA[sec], f"sites[].{sec}")
    return doc


# --------------------------------------------------------------- validation


def _build_domain(sec, errs) -> Optional[Domain]:
    kind = _str(sec, "kind", "domain", DISK)
    h = _num(sec, "h", "domain")
    if h is None or not h > 0:
        errs.append(f"domain.h must be a positive number, got {h!r}")
        return None
    try:
        if kind == DISK:
            for k in ("x0", "y0", "width", "height"):
                if k in sec:
                    errs.append(f"domain.{k} is not used for the unit disk")
            spec = DomainSpec.disk()
        elif kind == RECTANGLE:
            spec = DomainSpec.rectangle(_num(sec, "x0", "domain", 0.0), _num(sec, "y0", "domain", 0.0),
                                        _num(sec, "width", "domain", 1.0), _num(sec, "height", "domain", 1.0))
        else:
            errs.append(f"domain.kind must be 'disk' or 'rectangle', got {kind!r}")
            return None
        return build_domain(spec, h)
    except SteadyVortexError as exc:
        errs.append(f"domain: {exc}")
        return None


def _fourier(d: Domain, sec, errs, where) -> np.ndarray:
    """Boundary samples of ``const + Σ cos_k cos(2πk s/P) + sin_k sin(2πk s/P)``."""
    t = 2 * np.pi * d.boundary.s / d.boundary.perimeter
    vals = np.full_like(t, float(_num(sec, "const", where, 0.0)))
    modes = sec.get("modes", [])
    if not isinstance(modes, list) or not modes and "const" not in sec:
        errs.append(f"{where}.modes must be a non-empty list")
        return vals
    for m in modes:
        k = _num(m, "k", f"{where}.modes[]", integer=True)
        if k is None or k < 1:
            errs.append(f"{where}.modes[].k must be a positive integer, got {k!r}")
            continue
        vals = vals + _num(m, "cos", f"{where}.modes[]", 0.0) * np.cos(k * t)
        vals = vals + _num(m, "sin", f"{where}.modes[]", 0.0) * np.sin(k * t)
    return vals


def build_q(d: Domain, sec: dict, errs: Optional[list] = None) -> Optional[ScalarField]:
    """Background flow from an analytic harmonic expression, boundary flux or Dirichlet data."""
    own = errs is None
    errs = [] if own else errs
    kind = _str(sec, "kind", "q", "analytic")
    shift = float(_num(sec, "shift", "q", 0.0))
    q = None
    if kind == "analytic":
        expr = _str(sec, "expr", "q", "x1")
        fn = ANALYTIC_Q.get(expr)
        if fn is None:
            errs.append(f"q.expr must be one of {sorted(ANALYTIC_Q)}, got {expr!r}")
        else:
            x, y = d.nodes.T
            bp = d.boundary.points
            q = ScalarField(d, fn(x, y), fn(bp[:, 0], bp[:, 1]), fn)
    elif kind in ("flux", "dirichlet"):
        if "expr" in sec:
            errs.append(f"q.expr is only used with kind 'analytic'")
        samples = _fourier(d, sec, errs, "q")
        try:
            q = harmonic_from_flux(d, samples) if kind == "flux" else dirichlet_extend(d, samples)
        except SteadyVortexError as exc:
            errs.append(f"q: {exc}")
    else:
        errs.append(f"q.kind must be 'analytic', 'flux' or 'dirichlet', got {kind!r}")
    if q is not None and shift:
        q = q.shifted(shift)
    if own and errs:
        raise ValidationError(errs)
    return q


def _profile(sec, errs, base: Path, where="profile") -> Optional[Profile]:
    kind = _str(sec, "kind", where, "power")
    try:
        if kind == "power":
            if "path" in sec:
                errs.append(f"{where}.path is only used with kind 'table'")
            return Profile.power(float(_num(sec, "p", where, 1.0)))
        if kind == "table":
            path = _str(sec, "path", where)
            if path is None:
                errs.append(f"{where}.path is required for a tabulated profile")
                return None
            p = Path(path)
            return load_table(p if p.is_absolute() else base / p)
        errs.append(f"{where}.kind must be 'power' or 'table', got {kind!r}")
    except (SteadyVortexError, OSError, ValueError) as exc:
        errs.append(f"{where}: {exc}")
    return None


def _schedule(sec, errs, where="lambda") -> Optional[StrengthSchedule]:
    kind = _str(sec, "kind", where, "constant")
    a = float(_num(sec, "a", where, 1.0))
    beta = float(_num(sec, "beta", where, 0.0))
    g0 = float(_num(sec, "gamma0", where, 1.0))
    if kind == "constant" and beta:
        errs.append(f"{where}.beta is only used with kind 'power'")
    if kind == "power" and not 0 <= beta < 1:
        errs.append(f"{where}.beta must lie in [0, 1), got {beta}")
    try:
        return StrengthSchedule(kind, a, beta if kind == "power" else 0.0, g0)
    except SteadyVortexError as exc:
        errs.append(f"{where}: {exc}")
        return None


def _controls(sec, errs) -> tuple[Optional[SolverControls], str]:
    backend = _str(sec, "backend", "solver", FD)
    if backend not in BACKENDS:
        errs.append(f"solver.backend must be one of {list(BACKENDS)}, got {backend!r}")
        backend = FD
    kw = {}
    for key, integer in (("max_iters", True), ("theta0", False), ("tol", False),
                         ("bisection_tol", False), ("theta_floor", False)):
        v = _num(sec, key, "solver", integer=integer)
        if v is not None:
            kw[key] = v
    try:
        return SolverControls(**kw), backend
    except SteadyVortexError as exc:
        errs.append(f"solver: {exc}")
        return None, backend


def _positive(v, name, errs) -> bool:
    if not (isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v) and v > 0):
        errs.append(f"{name} must be a positive number, got {v!r}")
        return False
    return True


def _decreasing(vals, name, errs) -> bool:
    if not vals:
        errs.append(f"{name} must not be empty")
        return False
    ok = all(_positive(v, f"{name} entry", errs) for v in vals)
    if ok and any(b >= a for a, b in zip(vals, vals[1:])):
        errs.append(f"{name} must be strictly decreasing")
        ok = False
    return ok


def parse_config(path) -> RunConfig:
    """Parse and validate a run configuration.

    Raises
    ------
    ParseError
        Malformed JSON, unknown keys (with a close-match suggestion) or wrongly typed values.
    ValidationError
        Every violated constraint, collected in ``.violations``.
    """
    path = Path(path)
    doc = load_config(path)
    base = path.parent
    errs: list[str] = []

    modes = [k for k in ("kappa", "kappas", "sites") if k in doc]
    if len(modes) != 1:
        errs.append("exactly one of 'kappa', 'kappas' or 'sites' is required"
                    + (f", found {modes}" if modes else ""))
    if "domain" not in doc:
        errs.append("missing section 'domain'")
    if "kappa_scales" in doc and "sites" not in doc:
        errs.append("kappa_scales is only used together with sites")
    if "alpha" in doc and "sites" not in doc:
        errs.append("alpha is only used together with sites")

    d = _build_domain(doc.get("domain", {}), errs) if "domain" in doc else None
    q = build_q(d, doc.get("q", {}), errs) if d is not None else None
    prof = _profile(doc.get("profile", {}), errs, base)
    sched = _schedule(doc.get("lambda", {}), errs)
    ctrl, backend = _controls(doc.get("solver", {}), errs)

    out = doc.get("output", {})
    diag = doc.get("diagnostics", {})
    seed = _num(doc, "seed", "top level", 0, integer=True)
    n_test = _num(diag, "n_test", "diagnostics", 1024, integer=True)
    thr = float(_num(diag, "support_threshold", "diagnostics", 1e-6))
    if n_test < 1:
        errs.append(f"diagnostics.n_test must be at least 1, got {n_test}")
    if not 0 < thr < 1:
        errs.append(f"diagnostics.support_threshold must lie in (0, 1), got {thr}")
    argmax = diag.get("argmax")
    if argmax is not None:
        pts = np.asarray(argmax, dtype=float) if isinstance(argmax, list) else None
        if pts is None or pts.ndim != 2 or pts.shape[1] != 2 or len(pts) == 0:
            raise ParseError("diagnostics.argmax must be a non-empty list of [x, y] points")
        argmax = pts
    parallel = doc.get("parallel", False)
    if not isinstance(parallel, bool):
        raise ParseError(f"parallel must be true or false, got {parallel!r}")

    kind, kappas, scales = None, None, None
    kappa = None
    if "kappa" in doc:
        kind = "single"
        kappa = doc["kappa"]
        _positive(kappa, "kappa", errs)
    elif "kappas" in doc:
        kind = "sweep"
        kappas = _numlist(doc, "kappas")
        if _decreasing(kappas, "kappas", errs):
            kappa = kappas[-1]
    elif "sites" in doc:
        kind = "multi"
        if not doc["sites"]:
            errs.append("sites must not be empty")
        if "kappa_scales" in doc:
            kind = "multi-sweep"
            scales = _numlist(doc, "kappa_scales")
            _decreasing(scales, "kappa_scales", errs)
        alpha = _num(doc, "alpha", "top level", 1.0)
        if not alpha >= 1:
            errs.append(f"alpha must be at least 1, got {alpha}")

    site_specs = []
    if kind in ("multi", "multi-sweep"):
        for i, s in enumerate(doc["sites"]):
            where = f"sites[{i}]"
            c = s.get("center")
            if not (isinstance(c, list) and len(c) == 2
                    and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in c)):
                errs.append(f"{where}.center must be a pair of numbers")
                continue
            r = s.get("radius")
            k = s.get("kappa")
            if not (_positive(r, f"{where}.radius", errs) & _positive(k, f"{where}.kappa", errs)):
                continue
            sp_ = _profile(s["profile"], errs, base, f"{where}.profile") if "profile" in s else prof
            sl = _schedule(s["lambda"], errs, f"{where}.lambda") if "lambda" in s else sched
            if sp_ is None or sl is None:
                continue
            site_specs.append(SiteSpec(VortexSite((float(c[0]), float(c[1])), float(r)), float(k), sp_, sl))

    if errs:
        raise ValidationError(errs)

    try:
        if kind in ("single", "sweep"):
            problem = ProblemSpec(d, q, prof, sched, float(kappa), backend, ctrl)
        else:
            problem = MultiProblemSpec(d, q, tuple(site_specs), float(alpha), backend, ctrl)
    except SteadyVortexError as exc:
        raise ValidationError([f"{type(exc).__name__}: {exc}"]) from None

    return RunConfig(
        kind=kind,
        problem=problem,
        kappas=kappas,
        kappa_scales=scales,
        output_dir=_str(out, "dir", "output", "out"),
        name=_str(out, "name", "output", "omega"),
        seed=seed,
        n_test=n_test,
        support_threshold=thr,
        argmax=argmax,
        parallel=parallel,
        raw=doc,
        source=path,
    )
