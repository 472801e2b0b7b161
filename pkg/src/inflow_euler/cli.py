"""Command-line entry point: ``inflow-euler <subcommand> [options]``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 certificate or check violation.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from typing import List, Optional

import numpy as np

from . import combinatorics, estimates, pressure, report, solver, suites
from .config import DRIVERS, ConfigError, RunConfig, load_config, resolve_auto_schedule
from .grid_field import ConditioningError
from .norms import FAMILY_LABELS, NormParams, ScheduleError, grad_embedding_ratio
from .pressure import CompatibilityError, SingularTauError

log = logging.getLogger("inflow_euler")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_CERTIFICATE = 0, 2, 3, 4

SUBCOMMANDS = ("solve", "picard", "verify-combinatorics", "check-pressure", "check-product",
               "check-apriori", "report")

NUMERIC_ERRORS = (ConditioningError, solver.InvariantError, solver.BlowUpError, solver.CFLError,
                  solver.PicardDivergenceError, CompatibilityError, SingularTauError,
                  FloatingPointError, ZeroDivisionError)


def _config(args) -> RunConfig:
    over = {}
    if args.driver:
        over["driver"] = args.driver
    if args.boundary_form:
        over["boundary_form"] = args.boundary_form
    if args.seed is not None:
        over["seed"] = args.seed
    if args.max_order is not None:
        over["norms.n_max"] = args.max_order
    if args.out:
        over["output.dir"] = args.out
    return load_config(args.config, over)


def _out(args, cfg: Optional[RunConfig] = None) -> str:
    d = args.out or (cfg.out_dir if cfg else "out")
    os.makedirs(d, exist_ok=True)
    return d


def _standalone_hash(args, name: str) -> str:
    import hashlib

    key = json.dumps({"command": name, "range": args.range, "seed": args.seed,
                      "max_order": args.max_order}, sort_keys=True)
    return hashlib.sha256(key.encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# subcommands


def cmd_solve(args) -> int:
    cfg = _config(args)
    if cfg.driver == "picard":
        return cmd_picard(args, cfg)
    cfg, _, _ = resolve_auto_schedule(cfg)
    out = _out(args, cfg)
    h = cfg.config_hash
    arts = _solve(cfg, out, h)
    report.write_manifest(out, "solve", h, cfg.seed, arts, {"T0": cfg.T0, "M": cfg.schedule.M})
    return EXIT_OK


def _solve(cfg: RunConfig, out: str, h: str, figures: bool = False) -> List[str]:
    traj = solver.run(cfg.v0_grid(), cfg.ubar_field(), cfg.schedule, cfg.dt, cfg.params,
                      boundary_form=cfg.boundary_form, norm_every=cfg.norm_every, store_every=0,
                      balance_every=cfg.balance_every, blowup_factor=cfg.blowup_factor,
                      checkpoint_every=cfg.checkpoint_every,
                      checkpoint_dir=os.path.join(out, "checkpoints"))
    arts = [report.write_csv(os.path.join(out, "norm_series.csv"), solver.SERIES_HEADER,
                             traj.series, h)]
    data = np.array(traj.series)
    for j, name in enumerate(solver.SERIES_HEADER[2:], start=2):
        arts.append(report.write_dat(os.path.join(out, f"series_{name}.dat"), data[:, 0], data[:, j],
                                     f"t {name}", h))
    if traj.balance:
        arts.append(report.write_csv(os.path.join(out, "energy_balance.csv"),
                                     ("t", "power", "flux", "residual", "scale"), traj.balance, h))
    arts.extend(traj.checkpoints)
    if figures:
        fams = {FAMILY_LABELS[f]: data[:, j] for j, f in enumerate(("X", "Xt", "Y", "Yt", "Yb", "Hr"), 2)}
        arts.append(report.plot_norm_series(os.path.join(out, "norm_series.png"), data[:, 0], fams,
                                            f"{cfg.scenario}"))
    return arts


def cmd_picard(args, cfg: Optional[RunConfig] = None) -> int:
    cfg = cfg or _config(args)
    cfg, A, C0 = resolve_auto_schedule(cfg)
    out = _out(args, cfg)
    h = cfg.config_hash
    arts, summary = _picard(cfg, out, h, A, C0)
    report.write_manifest(out, "picard", h, cfg.seed, arts, summary)
    return EXIT_OK


def _picard(cfg: RunConfig, out: str, h: str, A: float, C0: float, figures: bool = False):
    v0, ub = cfg.v0_grid(), cfg.ubar_field()
    res = solver.picard_run(v0, ub, cfg.schedule, int(cfg.picard["n_iters"]), cfg.params, A=A, C0=C0,
                            n_nodes=int(cfg.picard["n_nodes"]), boundary_form=cfg.boundary_form)
    tr = res.trace
    dt = min(cfg.dt, cfg.T0 / 4)
    rk = solver.run(v0, ub, cfg.schedule, dt, cfg.params, boundary_form=cfg.boundary_form,
                    record_norms=False, store_every=0)
    gap = (rk.final - res.final).l2_norm()
    arts = [report.write_csv(os.path.join(out, "picard_trace.csv"), solver.TRACE_HEADER, tr.rows(), h),
            report.write_dat(os.path.join(out, "picard_composite.dat"),
                             range(1, len(tr) + 1), tr.composite, "n composite", h)]
    if figures:
        arts.append(report.plot_decay(os.path.join(out, "picard_composite.png"), range(1, len(tr) + 1),
                                      tr.composite, "iterate n", "a_n + M b_n", "successive approximation"))
    summary = {"M": tr.M, "T0": tr.T0, "A": A, "C0": C0, "rho": tr.rho,
               "uniform_bound_holds": tr.uniform_bound_holds, "rk4_gap": gap, "iterations": len(tr)}
    return arts, summary


def cmd_verify_combinatorics(args) -> int:
    n = args.range or 200
    out = _out(args)
    h = _standalone_hash(args, "verify-combinatorics")
    reps = combinatorics.ledger(n_max=n)
    path = os.path.join(out, "certificates.json")
    with open(path, "w") as fh:
        json.dump([r.to_dict() for r in reps], fh, indent=2)
        fh.write("\n")
    rows = [(r.name, r.range_desc, r.instances, len(r.violations), "" if r.sup is None else str(r.sup),
             int(r.verified)) for r in reps]
    csv = report.write_csv(os.path.join(out, "certificates.csv"),
                           ("inequality", "range", "instances", "violations", "sup", "verified"), rows, h)
    bad = [r for r in reps if not r.verified]
    for r in reps:
        print(f"{'ok  ' if r.verified else 'FAIL'} {r.name} [{r.range_desc}] instances={r.instances}"
              f" violations={len(r.violations)}")
    report.write_manifest(out, "verify-combinatorics", h, 0, [path, csv],
                          {"violating_certificates": [r.name + " " + r.range_desc for r in bad]})
    return EXIT_CERTIFICATE if bad else EXIT_OK


def cmd_check_pressure(args) -> int:
    out = _out(args)
    h = _standalone_hash(args, "check-pressure")
    arts, ok = _check_pressure(args, out, h)
    report.write_manifest(out, "check-pressure", h, args.seed or 0, arts)
    return EXIT_OK if ok else EXIT_CERTIFICATE


def _check_pressure(args, out: str, h: str, figures: bool = False):
    rows = pressure.manufactured_suite()
    arts = [report.write_csv(os.path.join(out, "pressure_manufactured.csv"),
                             pressure.MANUFACTURED_HEADER, rows, h),
            report.write_dat(os.path.join(out, "pressure_decay.dat"), [r[1] for r in rows],
                             [r[2] for r in rows], "P rel_l2_error", h)]
    if figures:
        arts.append(report.plot_decay(os.path.join(out, "pressure_decay.png"), [r[1] for r in rows],
                                      [r[2] for r in rows], "P", "relative L2 error", "tau solve"))
    ok = all(r[2] < 1e-10 for r in rows if r[1] >= 16)
    for r in rows:
        print(f"P={r[1]:3d}  rel error {r[2]:.3e}")
    n_max = args.max_order or 8
    est_rows = []
    for i, u in enumerate(suites.pressure_suite(seed=args.seed)):
        p = NormParams(tau=0.1, eps=0.1, n_max=n_max)
        ratio = pressure.pressure_estimate_ratio(-u, u, -u, u.comp2, p)
        est_rows.append((i, ratio, p.tau, p.n_max))
    arts.append(report.write_csv(os.path.join(out, "pressure_estimate.csv"),
                                 ("field", "ratio", "tau", "n_max"), est_rows, h))
    print(f"pressure estimate: max ratio {max(r[1] for r in est_rows):.6e} over {len(est_rows)} fields")
    return arts, ok


def cmd_check_product(args) -> int:
    out = _out(args)
    h = _standalone_hash(args, "check-product")
    n_max = args.max_order or 10
    ms = []
    for i, (u, v) in enumerate(suites.product_suite(seed=args.seed)):
        p = NormParams(tau=0.1, eps=0.1, n_max=n_max)
        ms.append(estimates.product_estimate_ratio(u, v, p, fields=f"pair{i}"))
    emb = []
    for i, u in enumerate(suites.embedding_suite(seed=args.seed)):
        p = NormParams(tau=0.1, eps=0.1, n_max=n_max)
        emb.append((i, grad_embedding_ratio(u, p), p.n_max))
    arts = [report.write_csv(os.path.join(out, "product_estimate.csv"), estimates.EST_CSV_HEADER,
                             [m.row() for m in ms], h),
            report.write_csv(os.path.join(out, "embedding.csv"), ("field", "ratio", "n_max"), emb, h)]
    C = estimates.fitted_constant(ms)
    print(f"product estimate: fitted constant {C:.6e}; embedding max {max(e[1] for e in emb):.6e}")
    finite = all(math.isfinite(m.ratio) for m in ms) and all(math.isfinite(e[1]) for e in emb)
    report.write_manifest(out, "check-product", h, args.seed or 0, arts, {"product_constant": C})
    return EXIT_OK if finite else EXIT_CERTIFICATE


def cmd_check_apriori(args) -> int:
    cfg = _config(args)
    cfg, _, _ = resolve_auto_schedule(cfg)
    out = _out(args, cfg)
    h = cfg.config_hash
    limit = 1e-3 * cfg.schedule.tau0 / cfg.schedule.M
    dt = min(cfg.dt, limit)
    ub = cfg.ubar_field()
    traj = solver.run(cfg.v0_grid(), ub, cfg.schedule, dt, cfg.params, boundary_form=cfg.boundary_form,
                      record_norms=False)
    n = len(traj.times)
    if abs(traj.times[-1] - traj.times[-2] - dt) > 1e-12 * dt:
        n -= 1  # the final landing step is shorter
    ms = estimates.apriori_check(traj.times[:n], traj.states[:n], cfg.schedule, ub, cfg.params)
    arts = [report.write_csv(os.path.join(out, "apriori.csv"), ("t",) + estimates.EST_CSV_HEADER,
                             [(m.extra["t"],) + m.row() for m in ms], h)]
    C = estimates.fitted_constant(ms)
    print(f"a priori: fitted constant {C:.6e} over {len(ms)} samples")
    report.write_manifest(out, "check-apriori", h, cfg.seed, arts, {"apriori_constant": C})
    return EXIT_OK


def cmd_report(args) -> int:
    cfg = _config(args)
    cfg, A, C0 = resolve_auto_schedule(cfg)
    out = _out(args, cfg)
    h = cfg.config_hash
    arts = _solve(cfg, out, h, figures=True)
    summary = {}
    if cfg.driver == "picard":
        more, summary = _picard(cfg, out, h, A, C0, figures=True)
        arts += more
    more, ok = _check_pressure(args, out, h, figures=True)
    arts += more
    summary["pressure_ok"] = ok
    report.write_manifest(out, "report", h, cfg.seed, arts, summary)
    return EXIT_OK if ok else EXIT_CERTIFICATE


HANDLERS = {
    "solve": cmd_solve,
    "picard": cmd_picard,
    "verify-combinatorics": cmd_verify_combinatorics,
    "check-pressure": cmd_check_pressure,
    "check-product": cmd_check_product,
    "check-apriori": cmd_check_apriori,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="inflow-euler",
                                 description="Analytic-norm instrument for channel Euler flow with inflow.")
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", metavar="PATH", help="YAML run configuration")
    ap.add_argument("--out", metavar="DIR", help="output directory")
    ap.add_argument("--max-order", type=int, metavar="N", help="truncation order N_max of the norms")
    ap.add_argument("--range", type=int, metavar="N", help="index range of the certificate sweeps")
    ap.add_argument("--driver", choices=DRIVERS, help="time driver")
    ap.add_argument("--boundary-form", choices=("paper", "full-trace"), help="pressure wall data")
    ap.add_argument("--seed", type=int, metavar="N", help="seed of the random suites")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return HANDLERS[args.subcommand](args)
    except (ConfigError, ScheduleError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERIC_ERRORS as exc:
        print(f"numerical failure ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
