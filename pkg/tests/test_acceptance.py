"""Acceptance criteria 1-10, each printing one PASS/FAIL line."""

import math
import os
import time

import pytest

from inflow_euler import combinatorics as cb
from inflow_euler import estimates as es
from inflow_euler import pressure as pr
from inflow_euler import solver as S
from inflow_euler import suites
from inflow_euler.config import ConfigError, load_config, parse_config, resolve_auto_schedule
from inflow_euler.grid_field import VectorGridField
from inflow_euler.mode_field import ModeField, Sin, VectorModeField
from inflow_euler.norms import NormParams, RadiusSchedule, grad_embedding_ratio

CONFIGS = os.path.join(os.path.dirname(__file__), os.pardir, "configs")
P8 = NormParams(n_max=8)


@pytest.fixture
def verdict(capsys):
    def emit(n, checks):
        ok = all(v for _, v in checks)
        bad = [name for name, v in checks if not v]
        with capsys.disabled():
            print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'}"
                  + ("" if ok else f"  [failed: {'; '.join(bad)}]"))
        assert ok, bad
    return emit


def rel_change(a, b):
    return abs(b - a) / abs(a)


def test_criterion_01_certificates(verdict):
    t = time.perf_counter()
    reps = cb.ledger(n_max=200, rs=(3, 4, 5), binomial_max=30, elementary_max=1000, komatsu_max=10)
    elapsed = time.perf_counter() - t
    checks = [(f"{r.name} [{r.range_desc}] violations={r.violations}", r.verified) for r in reps
              if not r.name.startswith("sup")]
    checks.append((f"runtime {elapsed:.1f}s < 30s", elapsed < 30))
    verdict(1, checks)


def test_criterion_02_sup_attained_early(verdict):
    checks = []
    for r in (3, 4, 5):
        for which in ("al", "ah"):
            a, b = cb.sup_over(which, 200, r), cb.sup_over(which, 400, r)
            checks.append((f"{which} r={r}: {a.sup} vs {b.sup}", a.sup == b.sup))
    verdict(2, checks)


def test_criterion_03_pressure_solver(verdict):
    t = time.perf_counter()
    rows = pr.manufactured_suite(2, (8, 16, 24, 32))
    err = {P: e for _, P, e, *_ in rows}
    agree = pr.mode_grid_agreement(2, 24)
    elapsed = time.perf_counter() - t
    verdict(3, [
        ("error < 1e-10 for P >= 16", all(e < 1e-10 for P, e in err.items() if P >= 16)),
        (f"error(8)/error(16) = {err[8] / err[16]:.2e} > 1e3", err[8] / err[16] > 1e3),
        (f"mode/grid agreement {agree:.2e} < 1e-8", agree < 1e-8),
        ("zero mean to 1e-12", all(row[5] < 1e-12 for row in rows)),
        (f"runtime {elapsed:.2f}s < 5s", elapsed < 5),
    ])


def test_criterion_04_pressure_estimate(verdict):
    us = suites.pressure_suite(20)

    def worst(p):
        return max(pr.pressure_estimate_ratio(-u, u, -u, u.comp2, p) for u in us)

    base = NormParams(tau=0.1, eps=0.1, n_max=8)
    a, b, c = worst(base), worst(base.with_(n_max=10)), worst(base.with_(tau=0.05))
    verdict(4, [
        (f"finite ({a:.4e})", math.isfinite(a) and a > 0),
        (f"N_max 8->10 change {rel_change(a, b):.2%} < 10%", rel_change(a, b) < 0.10),
        (f"tau halving change {rel_change(a, c):.2%} < 10%", rel_change(a, c) < 0.10),
    ])


def test_criterion_05_product_estimate(verdict):
    pairs = suites.product_suite(10)
    p = NormParams(tau=0.1, eps=0.1, n_max=10)
    defects = []
    for u, v in pairs:
        for alpha in [(1, 0), (0, 1), (2, 1), (1, 3), (3, 2)]:
            for w in (v.comp1, v.comp2):
                d, ref = es.leibniz_defect(u, w, alpha)
                defects.append(d / ref if ref else d)
    a = [es.product_estimate_ratio(u, v, p).ratio for u, v in pairs]
    b = [es.product_estimate_ratio(u, v, p.with_(n_max=12)).ratio for u, v in pairs]
    ca, cb_ = max(a), max(b)
    const = VectorModeField(ModeField.constant(1.7), ModeField.constant(-0.4))
    w = ModeField.sin_x1(2, Sin(3), 0.8) + ModeField.cos_x1(1, Sin(1))
    zero = all(not es.s_alpha(const, w, al) for al in [(1, 0), (0, 1), (2, 2), (4, 1)])
    verdict(5, [
        (f"Leibniz defect {max(defects):.2e} <= 1e-9", max(defects) <= 1e-9),
        ("ratios finite", all(math.isfinite(x) for x in a + b)),
        (f"N_max 10->12 change {rel_change(ca, cb_):.2%} < 20%", rel_change(ca, cb_) < 0.20),
        ("S_alpha(const, w) == 0 exactly", zero),
    ])


def test_criterion_06_embedding(verdict):
    us = suites.embedding_suite(10)
    a = max(grad_embedding_ratio(u, NormParams(tau=0.1, n_max=10)) for u in us)
    b = max(grad_embedding_ratio(u, NormParams(tau=0.1, n_max=12)) for u in us)
    verdict(6, [
        (f"bounded ({a:.4e})", 0 < a < math.inf),
        (f"N_max 10->12 change {rel_change(a, b):.2%} < 5%", rel_change(a, b) < 0.05),
    ])


PSI = ModeField.sin_x1(1, Sin(1), 0.02) + ModeField.cos_x1(2, Sin(2), 0.01)


def test_criterion_07_solver_invariants(verdict):
    t = time.perf_counter()
    wavy = load_config(os.path.join(CONFIGS, "wavy_inflow.yaml"))
    ub = wavy.ubar_field()
    seen = []
    v = VectorGridField.from_mode(VectorModeField.from_stream(PSI), 8, 32)
    traj = S.run(v, ub, RadiusSchedule(0.1, 4.0, 2.5e-4), 2.5e-5, P8, record_norms=False,
                 balance_every=2, callback=lambda st: seen.append(st.diagnostics))
    inv = max(max(d["div"], d["trace"]) for d in seen)
    bal = max(abs(res) / scale for *_, res, scale in traj.balance)

    zero = S.run(VectorGridField.zeros(2, 8), VectorModeField(ModeField.constant(0.5), ModeField()),
                 RadiusSchedule(1.0, 1.0, 1.0), 1e-3, P8, record_norms=False, store_every=0).final

    K, P = 8, 24
    v0 = VectorGridField.from_mode(VectorModeField.from_stream(ModeField.sin_x1(1, Sin(1), 0.3)), K, P)
    u1 = VectorModeField(ModeField.constant(1.0), ModeField())
    sch = RadiusSchedule(0.2, 2.0, 0.1)
    f = [S.run(v0, u1, sch, dt, P8, record_norms=False, store_every=0).final
         for dt in (0.01, 0.005, 0.0025)]
    ratio = (f[0] - f[1]).l2_norm() / (f[1] - f[2]).l2_norm()

    g = load_config(os.path.join(CONFIGS, "galilean.yaml"))
    vg = VectorGridField.from_mode(VectorModeField.from_stream(PSI), g.K, g.P)
    c = g.ubar["U"]
    a = S.run(vg, g.ubar_field(), g.schedule, g.dt, P8, record_norms=False, store_every=0).final
    b = S.run(vg, None, g.schedule, g.dt, P8, record_norms=False, store_every=0).final
    gal = (a - b.shift_x1(c * g.T0)).l2_norm()
    elapsed = time.perf_counter() - t
    verdict(7, [
        (f"invariants {inv:.2e} <= 1e-9 over {len(seen)} steps", inv <= 1e-9 and len(seen) == 10),
        (f"zero data {zero.l2_norm():.2e} <= 1e-10 after 1000 steps", zero.l2_norm() <= 1e-10),
        (f"self-convergence ratio {ratio:.4f} in 16 +- 20%", abs(ratio - 16) <= 3.2),
        (f"Galilean difference {gal:.2e} < 1e-6 (K={g.K}, P={g.P}, t={g.T0})",
         gal < 1e-6 and (g.K, g.P, g.T0) == (16, 32, 0.1)),
        (f"energy balance {bal:.2e} <= 1e-6", bal <= 1e-6),
        (f"runtime {elapsed:.0f}s < 180s", elapsed < 180),
    ])


def test_criterion_08_apriori(verdict):
    cfg = load_config(os.path.join(CONFIGS, "wavy_inflow.yaml"))
    ub, v0 = cfg.ubar_field(), cfg.v0_mode()
    consts = []
    for K, P in [(8, 24), (16, 48)]:
        traj = S.run(VectorGridField.from_mode(v0, K, P), ub, cfg.schedule, cfg.dt, cfg.params,
                     record_norms=False)
        ms = es.apriori_check(traj.times, traj.states, cfg.schedule, ub, cfg.params)
        assert len(ms) == len(traj.times) - 2 and not any(m.vacuous for m in ms)
        consts.append(es.fitted_constant(ms))
    verdict(8, [
        (f"single bounded constant {consts[0]:.4e}", 0 < consts[0] < math.inf),
        (f"resolution doubling change {rel_change(*consts):.2%} < 25%", rel_change(*consts) < 0.25),
    ])


def test_criterion_09_picard(verdict):
    cfg, A, C0 = resolve_auto_schedule(load_config(os.path.join(CONFIGS, "picard.yaml")))
    v0, ub = cfg.v0_grid(), cfg.ubar_field()
    n = int(cfg.picard["n_iters"])
    rhos, checks = [], []
    for factor in (1.0, 2.0):
        sch = S.picard_schedule(cfg.schedule.tau0, A, C0, factor)
        res = S.picard_run(v0, ub, sch, n, cfg.params, A=A, C0=C0, stop_at_floor=False)
        tr = res.trace
        rhos.append(tr.rho)
        checks.append((f"factor {factor}: rho {tr.rho:.3e} < 1", tr.rho < 1))
        checks.append((f"factor {factor}: uniform bound against A = {A:.4e}", tr.uniform_bound_holds))
        if factor == 1.0:
            rk = S.run(v0, ub, sch, sch.T0 / 4, cfg.params, record_norms=False, store_every=0).final
            gap = (rk - res.final).l2_norm() / max(1.0, rk.l2_norm())
            checks.append((f"RK4 gap {gap:.2e} <= 1e-6", gap <= 1e-6))
    checks.append((f"doubling M reduces rho ({rhos[0]:.3e} -> {rhos[1]:.3e})", rhos[1] < rhos[0]))
    verdict(9, checks)


def test_criterion_10_schedule(verdict):
    try:
        parse_config("schedule: {tau0: 0.1, M: 4}\ntime: {T0: 0.026}\n")
        refused = False
    except ConfigError as exc:
        refused = "radius constraint" in str(exc)
    sch = RadiusSchedule(0.2, 2.0, 0.1)
    traj = S.run(VectorGridField.zeros(2, 8), None, sch, 0.03, P8, norm_every=1)
    verdict(10, [
        ("T0 > tau0/M refused", refused),
        (f"halts at t = {traj.times[-1]!r}", traj.times[-1] == sch.T0),
        ("final radius exactly 0", sch.tau(traj.times[-1]) == 0.0 and traj.series[-1][1] == 0.0),
    ])
