"""Truncated analytic norms, derivative tables and the radius schedule."""

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from inflow_euler import grid_field as gf
from inflow_euler import norms
from inflow_euler.grid_field import ConditioningError, VectorGridField
from inflow_euler.mode_field import Cos, ModeField, One, Sin, VectorModeField
from inflow_euler.norms import FAMILIES, NormParams, RadiusSchedule, ScheduleError

PI = math.pi
SIN1 = ModeField.sin_x1(1, One())


class TestParams:
    @pytest.mark.parametrize("kw", [dict(r=2), dict(eps=0.0), dict(eps=1.0), dict(r=3, n_max=4), dict(tau=-0.1)])
    def test_rejected(self, kw):
        with pytest.raises(ValueError):
            NormParams(**kw)


class TestCoefficients:
    def test_x_30(self):
        assert math.isclose(norms.coeff_flat((3, 0), NormParams(tau=0.5)), 4.5, rel_tol=1e-15)

    def test_x_31(self):
        assert math.isclose(norms.coeff_flat((3, 1), NormParams(tau=0.5)), 2 / 15, rel_tol=1e-14)
        exact = norms.coeff_flat_exact((3, 1), 3, Fraction(1, 2), Fraction(1, 10))
        assert exact == Fraction(2, 15)

    def test_y_40(self):
        assert math.isclose(norms.coeff_flat((4, 0), NormParams(tau=1.0), "Y"), 32 / 3, rel_tol=1e-15)

    def test_below_threshold(self):
        with pytest.raises(ValueError):
            norms.coeff_flat((2, 0), NormParams())
        with pytest.raises(ValueError):
            norms.coeff_flat((3, 0), NormParams(), "Y")

    @given(st.integers(3, 20), st.integers(0, 20), st.floats(0.01, 1.0), st.floats(0.0, 1.0))
    @settings(max_examples=50, deadline=None)
    def test_tau_monotone(self, a1, a2, tau, shrink):
        p = NormParams(tau=tau)
        a = (a1, a2)
        assert norms.coeff_flat(a, p.with_(tau=tau * shrink)) <= norms.coeff_flat(a, p)


class TestDerivativeTable:
    def test_zero(self):
        t = norms.derivative_table(ModeField(), 6)
        assert all(v == 0 for v in t.entries.values())

    def test_sin_x1(self):
        t = norms.derivative_table(SIN1, 10)
        for j in range(11):
            assert math.isclose(t[(j, 0)], (2 * PI) ** j / math.sqrt(2), rel_tol=1e-13)

    def test_sin_x2(self):
        t = norms.derivative_table(ModeField.mode(0, Sin(1)), 4)
        assert math.isclose(t[(0, 2)], PI ** 2 / math.sqrt(2), rel_tol=1e-13)
        assert math.isclose(t[(0, 0)], 1 / math.sqrt(2), rel_tol=1e-14)

    def test_grid_cap_error_names_order(self):
        f = gf.from_mode(ModeField.cos_x1(1, Sin(2)), 2, 24)
        cap = norms.conditioning_cap(f)
        assert 4 <= cap < 24
        with pytest.raises(ConditioningError, match=str(cap)):
            norms.derivative_table(f, cap + 1)

    def test_vector_is_root_sum_square(self):
        a, b = ModeField.mode(0, Sin(1)), ModeField.cos_x1(1, Cos(1))
        tv = norms.derivative_table(VectorModeField(a, b), 5)
        ta, tb = norms.derivative_table(a, 5), norms.derivative_table(b, 5)
        for k in tv.entries:
            assert math.isclose(tv[k], math.hypot(ta[k], tb[k]), rel_tol=1e-14)


class TestNorm:
    def test_zero(self):
        for w in FAMILIES:
            assert norms.norm(ModeField(), NormParams(), w) == 0

    def test_sin_x1_sum(self):
        # independent sum of (j^r / j!) tau^(j-r) (2 pi)^j / sqrt 2, j = 3..12
        p = NormParams(r=3, tau=0.1, eps=0.5, n_max=12)
        ref = math.fsum(j ** 3 / math.factorial(j) * 0.1 ** (j - 3) * (2 * PI) ** j / math.sqrt(2)
                        for j in range(3, 13))
        assert math.isclose(norms.norm(SIN1, p, "X"), ref, rel_tol=1e-13)

    def test_composites(self):
        p = NormParams(tau=0.2, n_max=8)
        u = ModeField.sin_x1(1, Cos(1))
        d = norms.all_norms(u, p)
        assert math.isclose(d["Xt"], d["X"] + d["Hr"])
        assert math.isclose(d["Yt"], 0.2 * d["Y"] + d["Hr"])
        assert math.isclose(d["Yb"], d["Y"] + d["Hr"])

    def test_monotone_instance(self):
        u = ModeField.sin_x1(1, Cos(1))
        assert norms.norm(u, NormParams(tau=0.25)) <= norms.norm(u, NormParams(tau=0.5))

    @given(st.floats(0.01, 0.5), st.floats(0.0, 1.0), st.floats(0.01, 0.9), st.floats(0.0, 1.0))
    @settings(max_examples=40, deadline=None)
    def test_tau_and_eps_monotone(self, tau, st_, eps, se):
        u = ModeField.sin_x1(1, Cos(2)) + ModeField.mode(0, Sin(1))
        t = norms.derivative_table(u, 10)
        p = NormParams(tau=tau, eps=eps, n_max=10)
        for w in ("X", "Y"):
            full = norms.norm_from_table(t, p, w)
            assert norms.norm_from_table(t, p.with_(tau=tau * st_), w) <= full * (1 + 1e-14)
            assert norms.norm_from_table(t, p.with_(eps=max(eps * se, 1e-6)), w) <= full * (1 + 1e-14)

    @given(st.integers(0, 3), st.integers(1, 3), st.floats(-1, 1), st.integers(0, 3), st.integers(0, 3),
           st.floats(-1, 1))
    @settings(max_examples=40, deadline=None)
    def test_triangle(self, k1, m1, a1, k2, m2, a2):
        u, v = ModeField.sin_x1(k1, Sin(m1), a1), ModeField.cos_x1(k2, Cos(m2), a2)
        p = NormParams(tau=0.1, n_max=8)
        for w in FAMILIES:
            assert norms.norm(u + v, p, w) <= norms.norm(u, p, w) + norms.norm(v, p, w) + 1e-12


class TestModeGridConsistency:
    @pytest.mark.parametrize("u", [
        ModeField.sin_x1(1, Cos(1)),
        ModeField.cos_x1(2, Sin(2), 0.5) + ModeField.mode(0, Cos(1), 0.2),
    ])
    def test_agree(self, u):
        g = gf.from_mode(u, 3, 32)
        n = norms.conditioning_cap(g)
        assert n >= 6
        tg, tm = norms.derivative_table(g, n), norms.derivative_table(u, n)
        p = NormParams(tau=0.1, n_max=n)
        for w in FAMILIES:
            assert math.isclose(norms.norm(tg, p, w), norms.norm(tm, p, w), rel_tol=1e-8)


class TestEmbedding:
    def test_sin_finite(self):
        r = norms.grad_embedding_ratio(SIN1, NormParams(tau=0.1))
        assert 0 < r < math.inf

    def test_constant(self):
        assert norms.grad_embedding_ratio(ModeField.constant(2.0), NormParams()) == 0

    def test_zero_raises(self):
        with pytest.raises(ZeroDivisionError):
            norms.grad_embedding_ratio(ModeField(), NormParams())

    def test_stable_under_truncation(self):
        u = ModeField.sin_x1(1, Sin(1))
        a = norms.grad_embedding_ratio(u, NormParams(tau=0.1, n_max=10))
        b = norms.grad_embedding_ratio(u, NormParams(tau=0.1, n_max=12))
        assert abs(b - a) / a < 0.05


class TestSchedule:
    def test_tau_linear(self):
        s = RadiusSchedule(0.2, 2.0, 0.1)
        assert s.tau(0.0) == 0.2
        assert math.isclose(s.tau(0.05), 0.1)
        assert s.tau(0.1) == 0.0

    def test_rejects_long_horizon(self):
        with pytest.raises(ScheduleError, match="radius constraint"):
            RadiusSchedule(0.2, 2.0, 0.2)

    def test_rejects_small_M(self):
        with pytest.raises(ScheduleError):
            RadiusSchedule(0.2, 0.5, 0.1)

    def test_beyond_end(self):
        with pytest.raises(ScheduleError):
            RadiusSchedule(0.2, 2.0, 0.1).tau(0.2)

    @given(st.floats(0.01, 1), st.floats(1, 50), st.floats(0.01, 1.0))
    @settings(max_examples=50, deadline=None)
    def test_positive_before_end(self, tau0, M, frac):
        s = RadiusSchedule(tau0, M, tau0 / M)
        ts = np.linspace(0, s.T0, 11)[:-1] * frac
        assert np.all(s.tau(ts) > 0)
        assert s.tau(s.T0) == 0.0


class TestRows:
    def test_csv_rows(self):
        rows = norms.norm_rows(SIN1, NormParams(tau=0.1), time=0.5)
        assert [r[2] for r in rows] == ["X", "X~", "Y", "Y~", "Y-", "Hr"]
        assert all(r[0] == 0.5 and r[1] == 0.1 and r[4] >= 0 for r in rows)
