"""Command-line entry point: ``steadyvortex {solve,sweep,verify,export}``.

Exit codes: 0 success, 1 error or failed check, 2 solver did not converge
(artifacts are still written).  ``STEADYVORTEX_OUTDIR`` overrides the output
directory named in the configuration.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .config import ParseError, RunConfig, ValidationError, parse_config
from .diagnostics import kappa_sweep, sweep_csv, sweep_multi
from .domain import DomainSpec, build_domain
from .elliptic import DISK_KERNEL, FD, ScalarField, green_apply, laplacian
from .errors import SteadyVortexError
from .fieldio import field_csv, format_field, read_field, write_field, write_sidecar
from .oracle import oracle_maximize
from .profiles import check_hypotheses, check_schedule
from .variational import MultiProblemSpec, ProblemSpec, feasibility_check, maximize, maximize_multi

log = logging.getLogger("steadyvortex")

OUTDIR_ENV = "STEADYVORTEX_OUTDIR"
EXIT_OK, EXIT_ERROR, EXIT_NOT_CONVERGED = 0, 1, 2


def output_dir(cfg: RunConfig) -> Path:
    out = Path(os.environ.get(OUTDIR_ENV) or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_solution(out: Path, stem: str, cfg_problem, sol) -> Path:
    d = cfg_problem.domain
    fpath = write_field(out / f"{stem}.field", d, sol.omega)
    if isinstance(cfg_problem, MultiProblemSpec):
        write_sidecar(out / f"{stem}.sidecar", mu=float(np.mean(sol.mu)), kappa=float(sol.kappas.sum()),
                      iterations=sol.iterations, converged=sol.converged,
                      patch_nodes=int(sol.patch_nodes.sum()), site_mu=sol.mu)
    else:
        write_sidecar(out / f"{stem}.sidecar", mu=sol.mu, kappa=sol.kappa, iterations=sol.iterations,
                      converged=sol.converged, patch_nodes=sol.patch_nodes)
    return fpath


# ------------------------------------------------------------------ commands


def cmd_solve(cfg: RunConfig) -> int:
    p = cfg.problem
    if cfg.kind == "sweep":
        log.error("configuration lists several kappas; use the 'sweep' command")
        return EXIT_ERROR
    multi = isinstance(p, MultiProblemSpec)
    sol = maximize_multi(p) if multi else maximize(p)
    out = output_dir(cfg)
    fpath = _write_solution(out, cfg.name, p, sol)
    rep = feasibility_check(sol.components if multi else sol.omega, p)
    mu = " ".join(f"{m:.10g}" for m in np.atleast_1d(sol.mu))
    print(f"converged={int(sol.converged)} iterations={sol.iterations} mu={mu} energy={sol.energy:.12g} "
          f"residual={sol.fixed_point_residual:.3e} patch_nodes={int(np.sum(sol.patch_nodes))} "
          f"feasible={int(rep.passed)} field={fpath}")
    for msg in sol.warnings:
        log.warning(msg)
    if not sol.converged:
        return EXIT_NOT_CONVERGED
    if not rep.passed:
        bad = [k for k, (ok, _) in rep.checks.items() if not ok]
        log.error("feasibility check failed: %s", ", ".join(bad))
        return EXIT_ERROR
    return EXIT_OK


def _print_flags(flags: dict, label: str = "") -> None:
    for k, v in flags.items():
        print(f"{label}{k:<22s} {'PASS' if v else 'FAIL'}")


def cmd_sweep(cfg: RunConfig) -> int:
    out = output_dir(cfg)
    workers = (os.cpu_count() or 1) if cfg.parallel else 1
    if cfg.kind == "sweep":
        res = kappa_sweep(cfg.problem, cfg.kappas, warm_start=not cfg.parallel, n_test=cfg.n_test,
                          threshold_fraction=cfg.support_threshold, S=cfg.argmax,
                          workers=workers)
        (out / "sweep.csv").write_text(sweep_csv(res.rows))
        for i, sol in enumerate(res.solutions):
            _write_solution(out, f"{cfg.name}_k{i:02d}", cfg.problem, sol)
        for kappa, msg in res.errors:
            print(f"kappa={kappa:g} failed: {msg}")
        _print_flags(res.flags)
        rows = res.rows
    elif cfg.kind == "multi-sweep":
        res = sweep_multi(cfg.problem, cfg.kappa_scales, n_test=cfg.n_test,
                          threshold_fraction=cfg.support_threshold)
        for i, rows_i in enumerate(res.site_rows):
            (out / f"sweep_site{i + 1}.csv").write_text(sweep_csv(rows_i))
        for i, sol in enumerate(res.solutions):
            _write_solution(out, f"{cfg.name}_k{i:02d}", cfg.problem, sol)
        for scale, msg in res.errors:
            print(f"scale={scale:g} failed: {msg}")
        for i, fl in enumerate(res.flags):
            _print_flags(fl, f"site{i + 1} ")
        rows = [r for rows_i in res.site_rows for r in rows_i]
    else:
        log.error("configuration has no 'kappas' or 'kappa_scales' list to sweep")
        return EXIT_ERROR
    print(f"rows={len(rows)} errors={len(res.errors)} ok={int(res.ok)} dir={out}")
    if res.ok:
        return EXIT_OK
    if not all(r.converged for r in rows):
        return EXIT_NOT_CONVERGED
    return EXIT_ERROR


def _elliptic_checks(cfg: RunConfig) -> list:
    checks = []
    # manufactured solution on the unit square
    sq = build_domain(DomainSpec.rectangle(), 1 / 32)
    x, y = sq.nodes.T
    exact = np.sin(np.pi * x) * np.sin(np.pi * y)
    err = float(np.max(np.abs(green_apply(sq, 2 * np.pi**2 * exact) - exact)))
    checks.append(("green_manufactured", err <= 2e-3, err, "unit square, h=1/32, sup error <= 2e-3"))

    d, backend = cfg.domain, cfg.problem.backend
    rng = np.random.default_rng(cfg.seed)
    a, b = rng.random(d.n), rng.random(d.n)
    ga, gb = green_apply(d, a, backend), green_apply(d, b, backend)
    asym = abs(a @ gb - b @ ga) / abs(a @ gb)
    checks.append(("green_symmetric", asym <= 1e-10, asym, f"{backend} backend, relative defect <= 1e-10"))
    g1 = green_apply(d, np.ones(d.n), backend)
    checks.append(("green_positive", bool(g1.min() > 0), float(g1.min()), "G applied to 1 is positive"))

    q = cfg.problem.q
    full = np.all(d.neighbors >= 0, axis=0)
    lq = (laplacian(d) @ q.values)[full] * d.cell_area
    worst = float(np.max(np.abs(lq), initial=0.0))
    scale = max(1.0, float(np.max(np.abs(q.values))))
    checks.append(("q_harmonic", worst <= 1e-10 * scale, worst, "discrete Laplacian of q at full-stencil nodes"))

    if backend == DISK_KERNEL:
        gap = float(np.max(np.abs(green_apply(d, np.ones(d.n), FD) - g1)))
        bound = max(1e-2, 5 * d.h)
        checks.append(("backend_agreement", gap <= bound, gap, f"fd vs disk-kernel on ω=1, <= {bound:g}"))
    return checks


def _oracle_check(cfg: RunConfig) -> tuple:
    prof, sched = cfg.profiles[0], cfg.schedules[0]
    d = build_domain(DomainSpec.rectangle(), 1 / 7)
    x = d.nodes[:, 0]
    bp = d.boundary.points
    q = ScalarField(d, x.copy(), bp[:, 0].copy())
    try:
        p = ProblemSpec(d, q, prof, sched, 0.1 * d.discrete_area)
        e_sol = maximize(p).energy
        e_orc = oracle_maximize(p, seed=cfg.seed).energy
    except SteadyVortexError as exc:
        return ("oracle_6x6", False, float("nan"), f"{type(exc).__name__}: {exc}")
    gap = e_orc - e_sol
    return ("oracle_6x6", gap <= 1e-8, gap, "oracle energy minus solver energy <= 1e-8")


def cmd_verify(cfg: RunConfig) -> int:
    rows = []
    for i, prof in enumerate(cfg.profiles):
        tag = "" if len(cfg.profiles) == 1 else f"[{i + 1}]"
        # a table is checked over its full abscissa range
        s_max = float(prof.table_s[-1]) if prof.kind == "table" and prof.table_s[-1] > 0 else 1.0
        rep = check_hypotheses(prof, s_max=s_max)
        rows += [(c.name + tag, c.passed, c.worst, c.detail) for c in rep.checks]
    advisory = []
    for i, sched in enumerate(cfg.schedules):
        tag = "" if len(cfg.schedules) == 1 else f"[{i + 1}]"
        advisory += [(c.name + tag, c.passed, c.worst, c.detail + " (advisory)")
                     for c in check_schedule(sched).checks]
    try:
        rows += _elliptic_checks(cfg)
    except SteadyVortexError as exc:
        rows.append(("elliptic", False, float("nan"), f"{type(exc).__name__}: {exc}"))
    rows.append(_oracle_check(cfg))

    width = max(len(r[0]) for r in rows + advisory)
    for name, ok, worst, detail in rows + advisory:
        print(f"{name:<{width}s}  {'PASS' if ok else 'FAIL'}  {worst:12.4e}  {detail}")
    failed = [r[0] for r in rows if not r[1]]
    print(f"checks={len(rows)} failed={len(failed)}" + (f" ({', '.join(failed)})" if failed else ""))
    return EXIT_OK if not failed else EXIT_ERROR


def cmd_export(field: str, fmt: str, out: Optional[str] = None) -> int:
    f = read_field(field)
    text = field_csv(f) if fmt == "csv" else format_field(f.domain(), f.values)
    if out:
        Path(out).write_text(text)
        return EXIT_OK
    try:
        sys.stdout.write(text)
        sys.stdout.flush()
    except BrokenPipeError:
        # reader closed early (e.g. piped into head)
        sys.stdout = open(os.devnull, "w")
    return EXIT_OK


# ---------------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="steadyvortex",
                                 description="Concentrated steady vortex patches by energy maximization.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, helptext in (("solve", "maximize for one κ (or one site vector) and write the field"),
                           ("sweep", "solve along a decreasing κ list and write the CSV"),
                           ("verify", "hypothesis checks, elliptic self-tests and the oracle comparison")):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("config", help="JSON run configuration")
    ex = sub.add_parser("export", help="convert a field file")
    ex.add_argument("--field", required=True, help="field file written by solve or sweep")
    ex.add_argument("--format", choices=("text", "csv"), default="text")
    ex.add_argument("--out", help="write here instead of stdout")
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "export":
            return cmd_export(args.field, args.format, args.out)
        cfg = parse_config(args.config)
        return {"solve": cmd_solve, "sweep": cmd_sweep, "verify": cmd_verify}[args.command](cfg)
    except (ParseError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (SteadyVortexError, OSError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
