"""Fourier x Chebyshev grid fields: transforms, derivatives, dealiased products."""

import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from inflow_euler import grid_field as gf
from inflow_euler import mode_field as mf
from inflow_euler.grid_field import AliasingWarning, GridField, VectorGridField
from inflow_euler.mode_field import Cos, ModeField, Sin, VectorModeField

PI = math.pi


def grid_of(fn, K, P):
    x1 = np.arange(2 * K + 1) / (2 * K + 1)
    X1, X2 = np.meshgrid(x1, gf.lobatto_points(P), indexing="ij")
    return GridField.from_values(fn(X1, X2).astype(complex)), X1, X2


def rel(a: GridField, b: GridField) -> float:
    return (a - b).l2_norm() / max(b.l2_norm(), 1e-300)


small_trig = st.lists(
    st.tuples(st.integers(-2, 2), st.one_of(st.builds(Cos, st.integers(0, 3)), st.builds(Sin, st.integers(1, 3))),
              st.floats(-1, 1)),
    min_size=1, max_size=3).map(ModeField)


class TestShape:
    def test_wrong_shape_rejected(self):
        with pytest.raises(ValueError):
            GridField(2, 4, np.zeros((4, 5)))

    @given(st.integers(0, 4), st.integers(2, 12), st.integers(0, 2 ** 31))
    @settings(max_examples=30, deadline=None)
    def test_round_trip(self, K, P, seed):
        rng = np.random.default_rng(seed)
        c = rng.standard_normal((2 * K + 1, P + 1)) + 1j * rng.standard_normal((2 * K + 1, P + 1))
        f = GridField(K, P, c)
        g = GridField.from_values(f.values())
        assert np.max(np.abs(g.coeffs - c)) <= 1e-12 * np.max(np.abs(c))


class TestDiff:
    def test_constant_to_zero(self):
        f = GridField(3, 8) + 2.5
        assert gf.diff(f, 1).l2_norm() == 0
        assert gf.diff(f, 2).l2_norm() < 1e-15

    def test_sin_x1(self):
        f, X1, _ = grid_of(lambda x1, x2: np.sin(2 * PI * x1), 2, 4)
        d = gf.diff(f, 1).values()
        assert np.max(np.abs(d - 2 * PI * np.cos(2 * PI * X1))) < 1e-10

    def test_x2_squared(self):
        f, _, _ = grid_of(lambda x1, x2: x2 ** 2, 1, 4)
        d = gf.diff(gf.diff(f, 2), 2).values()
        assert np.max(np.abs(d - 2.0)) < 1e-10

    @given(small_trig)
    @settings(max_examples=30, deadline=None)
    def test_axes_commute(self, m):
        f = gf.from_mode(m, 3, 16)
        a = gf.diff(gf.diff(f, 1), 2)
        b = gf.diff(gf.diff(f, 2), 1)
        assert (a - b).l2_norm() <= 1e-10 * max(1.0, a.l2_norm())

    def test_matches_mode_derivative(self):
        m = ModeField.cos_x1(2, Sin(3), 0.7) + ModeField.mode(-1, Cos(2), 0.3j)
        g = gf.derivative(gf.from_mode(m, 3, 24), (1, 2))
        exact = gf.from_mode(mf.differentiate(mf.differentiate(mf.differentiate(m, 1), 2), 2), 3, 24)
        assert rel(g, exact) < 1e-11

    def test_error_estimate_grows_with_order(self):
        f = gf.from_mode(ModeField.mode(0, Sin(2)), 1, 24)
        e = [gf.diff_error_estimate(f, (0, j)) for j in range(1, 6)]
        assert all(b > a for a, b in zip(e, e[1:]))


class TestProduct:
    def test_identity_and_zero(self):
        f = gf.from_mode(ModeField.cos_x1(1, Sin(1)), 2, 8)
        one = GridField(2, 8) + 1.0
        assert rel(f * one, f) < 1e-14
        assert (f * GridField(2, 8)).l2_norm() == 0

    @given(small_trig, small_trig)
    @settings(max_examples=30, deadline=None)
    def test_mode_oracle(self, a, b):
        K, P = 4, 32
        prod = gf.product(gf.from_mode(a, K, P), gf.from_mode(b, K, P))
        exact = gf.from_mode(mf.multiply(a, b), K, P)
        assert (prod - exact).l2_norm() <= 1e-11 * max(1.0, exact.l2_norm())

    def test_dealiasing_truncates_cleanly(self):
        # |k| = 2 + 2 exceeds K = 3: the product keeps only the resolved part
        a = ModeField.mode(2, Cos(0))
        prod = gf.product(gf.from_mode(a, 3, 4), gf.from_mode(a, 3, 4))
        assert prod.l2_norm() < 1e-14


class TestFromMode:
    def test_zero(self):
        assert gf.from_mode(ModeField(), 2, 6).l2_norm() == 0

    def test_sin_pi_x2_random_points(self):
        f = gf.from_mode(ModeField.mode(0, Sin(1)), 1, 16)
        rng = np.random.default_rng(7)
        x1, x2 = rng.random(100), rng.random(100)
        assert np.max(np.abs(f(x1, x2) - np.sin(PI * x2))) < 1e-12

    def test_aliasing_flagged(self):
        m = ModeField.mode(5, Cos(0))
        with pytest.warns(AliasingWarning):
            gf.from_mode(m, 4, 8)
        assert gf.sampling_report(m, 4, 8).k_exceeded
        assert gf.sampling_report(m, 5, 8).resolved


class TestNorms:
    @given(small_trig)
    @settings(max_examples=30, deadline=None)
    def test_parseval_gram_vs_quadrature(self, m):
        f = gf.from_mode(m, 2, 12)
        a, b = f.l2_norm(), f.quadrature_l2_norm()
        assert abs(a - b) <= 1e-11 * max(1.0, a)

    def test_matches_mode_norm(self):
        m = ModeField.cos_x1(1, Sin(2), 1.5) + ModeField.constant(0.2)
        assert abs(gf.from_mode(m, 2, 24).l2_norm() - mf.l2_norm(m)) < 1e-13

    def test_mean(self):
        f = gf.from_mode(ModeField.constant(3.0) + ModeField.mode(0, Cos(2)), 1, 24)
        assert abs(f.mean() - 3.0) < 1e-14


class TestVector:
    def test_stream_solenoidal_and_impermeable(self):
        psi = ModeField.sin_x1(1, Sin(2), 0.4) + ModeField.cos_x1(2, Sin(1), 0.1)
        v = VectorGridField.from_stream(gf.from_mode(psi, 3, 16))
        assert v.divergence_norm() < 1e-12
        assert v.normal_trace_norm() < 1e-12

    def test_mode_vector_agrees(self):
        psi = ModeField.sin_x1(1, Sin(2), 0.4)
        a = VectorGridField.from_mode(VectorModeField.from_stream(psi), 2, 24)
        b = VectorGridField.from_stream(gf.from_mode(psi, 2, 24))
        assert (a - b).l2_norm() < 1e-12

    def test_shift_x1(self):
        v = VectorGridField.from_mode(VectorModeField(ModeField.cos_x1(1, Cos(0)), ModeField()), 2, 4)
        w = v.shift_x1(0.25)
        x2 = np.array([0.3])
        assert abs(w.comp1(np.array([0.25]), x2)[0] - 1.0) < 1e-14


class TestCheckpoint:
    def test_round_trip(self):
        rng = np.random.default_rng(1)
        fields = [GridField(2, 5, rng.standard_normal((5, 6)) + 1j * rng.standard_normal((5, 6)))
                  for _ in range(2)]
        buf = io.BytesIO()
        gf.write_checkpoint(buf, fields, 0.125, (0.05, 0.1, 2.0, 0.05))
        assert len(buf.getvalue()) == 64 + 2 * 5 * 6 * 16
        buf.seek(0)
        back, meta = gf.read_checkpoint(buf)
        assert all(np.array_equal(a.coeffs, b.coeffs) for a, b in zip(fields, back))
        assert meta == {"t": 0.125, "tau": 0.05, "tau0": 0.1, "M": 2.0, "T0": 0.05}

    def test_bad_magic(self):
        with pytest.raises(ValueError):
            gf.read_checkpoint(io.BytesIO(b"\0" * 64))
