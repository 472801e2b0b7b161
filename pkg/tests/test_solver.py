"""Time stepping of the shifted system and the successive-approximation driver."""

import math

import numpy as np
import pytest

from inflow_euler import grid_field as gf
from inflow_euler import mode_field as mf
from inflow_euler import pressure as pr
from inflow_euler import solver as S
from inflow_euler.config import build_ubar
from inflow_euler.grid_field import VectorGridField
from inflow_euler.mode_field import Cos, ModeField, Sin, VectorModeField
from inflow_euler.norms import NormParams, RadiusSchedule

P8 = NormParams(n_max=8)
ZERO = ModeField()
WAVY = build_ubar({"family": "wavy-inflow", "U": 1.0, "c": 0.3, "a": 0.05})


def uniform(c1, c2=0.0) -> VectorModeField:
    return VectorModeField(ModeField.constant(c1), ModeField.constant(c2))


def stream_velocity(psi: ModeField, K: int, P: int) -> VectorGridField:
    return VectorGridField.from_mode(VectorModeField.from_stream(psi), K, P)


PSI = ModeField.sin_x1(1, Sin(1), 0.02) + ModeField.cos_x1(2, Sin(2), 0.01)


def mode_rhs(v: VectorModeField, ubar: VectorModeField) -> VectorModeField:
    """-(u.grad)u - grad p in exact algebra with the closed-form pressure."""
    u = v + ubar
    p = pr.solve_neumann_mode(pr.build_pressure_problem(v, ubar)).p
    return VectorModeField(-mf.advect(u, u.comp1) - mf.differentiate(p, 1),
                           -mf.advect(u, u.comp2) - mf.differentiate(p, 2))


class TestRhs:
    def test_uniform_background_zero(self):
        r = S.rhs_shifted(VectorGridField.zeros(4, 16), uniform(0.8))
        assert r.l2_norm() < 1e-14

    def test_background_only_matches_mode(self):
        K, P = 6, 40
        ubar = uniform(1.0, 0.3) + VectorModeField.from_stream(ModeField.sin_x1(1, Cos(1), 0.05))
        g = S.rhs_shifted(VectorGridField.zeros(K, P), ubar)
        ref = VectorGridField.from_mode(mode_rhs(VectorModeField(ZERO, ZERO), ubar), K, P)
        assert (g - ref).l2_norm() <= 1e-8 * max(1.0, ref.l2_norm())

    def test_homogeneous_matches_mode(self):
        K, P = 8, 32
        v = VectorModeField.from_stream(ModeField.sin_x1(1, Sin(1), 0.3) + ModeField.cos_x1(1, Sin(2), 0.1))
        g = S.rhs_shifted(VectorGridField.from_mode(v, K, P), None)
        ref = VectorGridField.from_mode(mode_rhs(v, VectorModeField(ZERO, ZERO)), K, P)
        assert (g - ref).l2_norm() <= 1e-8 * max(1.0, ref.l2_norm())

    def test_rhs_keeps_invariants(self):
        v = stream_velocity(PSI, 8, 32)
        r = S.rhs_shifted(v, WAVY)
        assert r.divergence_norm() <= 1e-9 * max(1.0, r.l2_norm())
        assert r.normal_trace_norm() <= 1e-9 * max(1.0, r.l2_norm())

    def test_paper_form_leaks_normal_velocity(self):
        v = stream_velocity(PSI, 8, 32)
        r = S.rhs_shifted(v, WAVY, boundary_form="paper")
        assert r.normal_trace_norm() > 1e-6


class TestStep:
    def test_zero_stays_zero(self):
        sch = RadiusSchedule(1.0, 1.0, 1.0)
        traj = S.run(VectorGridField.zeros(2, 8), uniform(0.5), sch, 1e-3, P8,
                     record_norms=False, store_every=0)
        assert len(traj.times) == 1 and traj.times[0] == 1.0
        assert traj.final.l2_norm() <= 1e-10

    def test_invariants_each_step(self):
        seen = []
        sch = RadiusSchedule(0.1, 4.0, 2.5e-4)
        S.run(stream_velocity(PSI, 8, 32), WAVY, sch, 2.5e-5, P8, record_norms=False,
              callback=lambda st: seen.append(st.diagnostics))
        assert len(seen) == 10
        assert all(d["div"] <= 1e-9 and d["trace"] <= 1e-9 for d in seen)

    def test_galilean_shift(self):
        K, P, c = 16, 32, 0.5
        v0 = stream_velocity(PSI, K, P)
        sch = RadiusSchedule(0.2, 2.0, 0.1)
        a = S.run(v0, uniform(c), sch, 0.01, P8, record_norms=False, store_every=0).final
        b = S.run(v0, None, sch, 0.01, P8, record_norms=False, store_every=0).final
        assert (a - b.shift_x1(c * 0.1)).l2_norm() < 1e-6

    def test_self_convergence(self):
        K, P = 8, 24
        v0 = stream_velocity(ModeField.sin_x1(1, Sin(1), 0.3), K, P)
        sch = RadiusSchedule(0.2, 2.0, 0.1)
        f = [S.run(v0, uniform(1.0), sch, dt, P8, record_norms=False, store_every=0).final
             for dt in (0.01, 0.005, 0.0025)]
        ratio = (f[0] - f[1]).l2_norm() / (f[1] - f[2]).l2_norm()
        assert abs(ratio - 16) <= 0.2 * 16

    def test_cfl_refused(self):
        state = S.SolverState(0.0, VectorGridField.zeros(4, 16), 0.1)
        with pytest.raises(S.CFLError):
            S.step_rk4(state, 1.0, uniform(1.0))

    def test_invariant_error_payload(self):
        bad = VectorGridField(gf.GridField(2, 8), gf.GridField(2, 8) + 1.0)
        with pytest.raises(S.InvariantError) as e:
            S.check_invariants(bad, 0.0)
        assert e.value.payload["trace"] > 0


class TestEnergy:
    def test_balance_wavy(self):
        v = stream_velocity(PSI, 8, 32)
        eb = S.energy_balance(v, S.Background(WAVY, 8, 32))
        assert abs(eb["residual"]) <= 1e-6 * eb["scale"]

    def test_balance_along_run(self):
        sch = RadiusSchedule(0.1, 4.0, 2.5e-4)
        traj = S.run(stream_velocity(PSI, 8, 32), WAVY, sch, 2.5e-5, P8, record_norms=False,
                     balance_every=5)
        assert traj.balance
        assert all(abs(res) <= 1e-6 * scale for _, _, _, res, scale in traj.balance)


class TestRun:
    def test_halts_at_radius_end(self):
        sch = RadiusSchedule(0.2, 2.0, 0.1)
        traj = S.run(VectorGridField.zeros(2, 8), None, sch, 0.03, P8, norm_every=1)
        assert traj.times[-1] == 0.1
        assert traj.series[-1][1] == 0.0
        assert all(row[1] > 0 for row in traj.series[:-1])

    def test_series_columns(self):
        sch = RadiusSchedule(0.1, 4.0, 1e-4)
        traj = S.run(stream_velocity(PSI, 8, 32), WAVY, sch, 2.5e-5, P8, norm_every=2)
        assert all(len(r) == len(S.SERIES_HEADER) for r in traj.series)
        assert all(v >= 0 for r in traj.series for v in r[2:8])

    def test_zero_series(self):
        sch = RadiusSchedule(0.1, 10.0, 0.01)
        traj = S.run(VectorGridField.zeros(2, 8), None, sch, 1e-3, P8, norm_every=5)
        assert all(v == 0 for r in traj.series for v in r[2:10])

    def test_blowup_guard(self):
        sch = RadiusSchedule(0.1, 4.0, 1e-4)
        with pytest.raises(S.BlowUpError):
            S.run(stream_velocity(PSI, 8, 32), WAVY, sch, 2.5e-5, P8, blowup_factor=0.5, blowup_floor=0.0)

    def test_checkpoints(self, tmp_path):
        sch = RadiusSchedule(0.1, 4.0, 1e-4)
        v0 = stream_velocity(PSI, 8, 32)
        traj = S.run(v0, WAVY, sch, 2.5e-5, P8, record_norms=False, checkpoint_every=2,
                     checkpoint_dir=str(tmp_path))
        with open(traj.checkpoints[-1], "rb") as fh:
            fields, meta = gf.read_checkpoint(fh)
        assert meta["t"] == 1e-4 and meta["M"] == 4.0
        assert np.array_equal(fields[0].coeffs, traj.final.comp1.coeffs)

    def test_bad_dt(self):
        with pytest.raises(ValueError):
            S.run(VectorGridField.zeros(2, 8), None, RadiusSchedule(0.1, 1.0, 0.1), 0.0, P8)


class TestPicard:
    def test_zero(self):
        sch = RadiusSchedule(0.1, 10.0, 0.01)
        r = S.picard_run(VectorGridField.zeros(2, 8), None, sch, 3, P8, stop_at_floor=False)
        assert r.trace.a == [0.0] * 3 and r.trace.b == [0.0] * 3
        assert len(r.trace) == 3

    def test_needs_two_iterations(self):
        with pytest.raises(ValueError):
            S.picard_run(VectorGridField.zeros(2, 8), None, RadiusSchedule(0.1, 10.0, 0.01), 1, P8)

    def test_integration_matrix_exact_on_polynomials(self):
        T0, n = 0.3, 8
        t = S.time_nodes(T0, n)
        Smat = S.integration_matrix(T0, n)
        assert np.allclose(Smat @ (3 * t ** 2), t ** 3, atol=1e-14)
        assert t[0] == 0 and math.isclose(t[-1], T0)

    def test_schedule_rule(self):
        s = S.picard_schedule(0.1, 10.0, 0.05, factor=2.0)
        assert math.isclose(s.M, 12.0) and math.isclose(s.T0, 0.1 / 12.0)
        assert S.picard_schedule(0.1, 0.1, 0.1).M == 1.0

    def test_contraction_and_agreement(self):
        K, P = 8, 32
        v0 = stream_velocity(PSI, K, P)
        A = S.picard_constant_A(v0, WAVY, RadiusSchedule(0.1, 1.0, 0.1), P8)
        C0 = 0.0025
        rhos = []
        for factor in (1.0, 2.0):
            sch = S.picard_schedule(0.1, A, C0, factor)
            res = S.picard_run(v0, WAVY, sch, 6, P8, A=A, C0=C0)
            tr = res.trace
            assert tr.ratios() and tr.rho < 1
            assert tr.uniform_bound_holds
            assert all(x >= 0 for x in tr.a + tr.b)
            rhos.append(tr.rho)
        assert rhos[1] < rhos[0]
        sch = S.picard_schedule(0.1, A, C0, 1.0)
        res = S.picard_run(v0, WAVY, sch, 8, P8, A=A, C0=C0, stop_at_floor=False)
        rk = S.run(v0, WAVY, sch, sch.T0 / 4, P8, record_norms=False, store_every=0).final
        assert (rk - res.final).l2_norm() <= 1e-6 * max(1.0, rk.l2_norm())

    def test_trace_rows(self):
        tr = S.IterationTrace(M=2.0, T0=0.1, A=1.0, C0=0.0, a=[1.0, 0.1], b=[0.5, 0.05],
                              resolved=[True, True], bound_lhs=[0.5, 0.5])
        assert tr.composite == [2.0, 0.2]
        assert tr.rho == pytest.approx(0.1)
        assert [r[0] for r in tr.rows()] == [1, 2]
