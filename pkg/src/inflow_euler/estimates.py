"""Measured constants for the product, commutator and a priori inequalities.

Every inequality of the form lhs <~ rhs is reported as an EstimateMeasurement
holding both sides and their ratio; the hidden constants are never assumed.
Trig-pure mode fields are handled exactly in the dense exponential form
(TrigArray); grid fields use dealiased products.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import grid_field as gf
from .grid_field import ConditioningError, GridField, VectorGridField
from .mode_field import ModeField, TrigArray, VectorModeField
from .norms import NormParams, RadiusSchedule, coeff_flat, conditioning_cap, is_grid, multi_indices, norm

# rhs below this without a vacuous flag is refused
VACUOUS_RHS = 1e-14

EST_CSV_HEADER = ("estimate", "lhs", "rhs", "ratio", "vacuous", "r", "tau", "eps", "n_max", "fields")


@dataclass
class EstimateMeasurement:
    name: str
    lhs: float
    rhs: float
    params: NormParams
    fields: str = ""
    vacuous: bool = False
    extra: Dict[str, float] = field(default_factory=dict)

    @property
    def ratio(self) -> float:
        if self.rhs > 0:
            return self.lhs / self.rhs
        return 0.0 if self.vacuous else math.nan

    def row(self) -> tuple:
        p = self.params
        return (self.name, self.lhs, self.rhs, self.ratio, int(self.vacuous), p.r, p.tau, p.eps, p.n_max, self.fields)


def _measurement(name, lhs, rhs, p, fields="", **extra) -> EstimateMeasurement:
    if rhs < VACUOUS_RHS:
        if abs(lhs) < VACUOUS_RHS:
            return EstimateMeasurement(name, lhs, rhs, p, fields, vacuous=True, extra=extra)
        raise ZeroDivisionError(f"{name}: right side {rhs:.3e} vanishes while lhs = {lhs:.3e}")
    return EstimateMeasurement(name, lhs, rhs, p, fields, extra=extra)


# ---------------------------------------------------------------------------
# backend: TrigArray for mode fields, GridField for grid fields


class _Trig:
    @staticmethod
    def lift(f: ModeField) -> TrigArray:
        return TrigArray.from_mode(f) if f else TrigArray.zeros()

    @staticmethod
    def d(f: TrigArray, alpha) -> TrigArray:
        return f.derivative(alpha)

    @staticmethod
    def mul(f: TrigArray, g: TrigArray) -> TrigArray:
        return f * g

    @staticmethod
    def norm(f: TrigArray) -> float:
        return f.norm()

    @staticmethod
    def lower(f: TrigArray) -> ModeField:
        return f.to_mode()


class _Spectral:
    """Coefficients of a trig-pure field with lazily computed samples."""

    __slots__ = ("c", "_v", "owner")

    def __init__(self, owner, c=None, v=None):
        self.owner, self.c, self._v = owner, c, v

    @property
    def coeffs(self) -> np.ndarray:
        if self.c is None:
            self.c = self.owner._coeffs(self._v)
        return self.c

    @property
    def values(self) -> np.ndarray:
        if self._v is None:
            self._v = self.owner._values(self.c)
        return self._v

    def __add__(self, other: "_Spectral") -> "_Spectral":
        return _Spectral(self.owner, v=self.values + other.values)

    def __sub__(self, other: "_Spectral") -> "_Spectral":
        return _Spectral(self.owner, v=self.values - other.values)

    def __mul__(self, c) -> "_Spectral":
        if self._v is not None:
            return _Spectral(self.owner, v=self._v * c)
        return _Spectral(self.owner, c=self.c * c)


class _TrigPhys:
    """Trig-pure fields sampled on a grid fine enough for exact quadratic products.

    exp(i pi m x2) is 2-periodic, so samples on [0, 1) x [0, 2) with
    4K + 1 and 4M + 1 points hold every product of two inputs exactly.
    Derivatives act on coefficients, so fields without content stay exactly zero.
    """

    def __init__(self, fields):
        comps = [c for f in fields for c in _components(f)]
        K = max((c.max_k for c in comps), default=0)
        M = max((c.max_vertical_index for c in comps if c), default=0)
        self.K, self.M = 2 * K, 2 * M
        self.n1, self.n2 = 2 * self.K + 1, 2 * self.M + 1
        self.f1 = 1j * gf.TWO_PI * np.arange(-self.K, self.K + 1)
        self.f2 = 1j * math.pi * np.arange(-self.M, self.M + 1)

    def _values(self, c: np.ndarray) -> np.ndarray:
        return np.fft.ifft2(np.fft.ifftshift(c)) * (self.n1 * self.n2)

    def _coeffs(self, v: np.ndarray) -> np.ndarray:
        return np.fft.fftshift(np.fft.fft2(v)) / (self.n1 * self.n2)

    def lift(self, f: ModeField) -> _Spectral:
        if not f:
            return _Spectral(self, c=np.zeros((self.n1, self.n2), dtype=complex))
        return _Spectral(self, c=TrigArray.from_mode(f).padded(self.K, self.M).c)

    def d(self, f: _Spectral, alpha) -> _Spectral:
        if alpha[0] == alpha[1] == 0:
            return f
        return _Spectral(self, c=f.coeffs * np.outer(self.f1 ** alpha[0], self.f2 ** alpha[1]))

    def mul(self, f: _Spectral, g: _Spectral) -> _Spectral:
        return _Spectral(self, v=f.values * g.values)

    def norm(self, f: _Spectral) -> float:
        return TrigArray(f.coeffs).norm()

    def lower(self, f: _Spectral) -> ModeField:
        return TrigArray(f.coeffs).to_mode()


class _Grid:
    @staticmethod
    def lift(f: GridField) -> GridField:
        return f.trimmed()

    @staticmethod
    def d(f: GridField, alpha) -> GridField:
        return gf.derivative(f, alpha)

    @staticmethod
    def mul(f: GridField, g: GridField) -> GridField:
        return gf.product(f, g)

    @staticmethod
    def norm(f: GridField) -> float:
        return f.l2_norm()

    @staticmethod
    def lower(f: GridField) -> GridField:
        return f


def _backend(u, *others, exact: bool = False):
    if is_grid(u):
        return _Grid
    return _Trig if exact else _TrigPhys((u,) + others)


def _components(u) -> list:
    if isinstance(u, (VectorModeField, VectorGridField)):
        return [u.comp1, u.comp2]
    return [u]


def _vec_norm(B, parts) -> float:
    return math.sqrt(sum(B.norm(x) ** 2 for x in parts))


class _Derivs:
    """Memoised derivatives of the lifted components of a field."""

    def __init__(self, B, comps):
        self.B = B
        self.base = [B.lift(c) for c in comps]
        self.cache: Dict[Tuple[int, Tuple[int, int]], object] = {}

    def __call__(self, i: int, alpha) -> object:
        key = (i, tuple(alpha))
        if key not in self.cache:
            self.cache[key] = self.B.d(self.base[i], alpha)
        return self.cache[key]


def _add(a, b):
    return b if a is None else a + b


def _s_alpha_parts(B, du: _Derivs, dw: _Derivs, nw: int, alpha) -> list:
    a1, a2 = alpha
    out = [None] * nw
    for b1 in range(a1 + 1):
        for b2 in range(a2 + 1):
            if b1 == b2 == 0:
                continue
            c = math.comb(a1, b1) * math.comb(a2, b2)
            rest = (a1 - b1, a2 - b2)
            for j in range(nw):
                for i, e in ((0, (1, 0)), (1, (0, 1))):
                    t = B.mul(du(i, (b1, b2)), dw(j, (rest[0] + e[0], rest[1] + e[1])))
                    out[j] = _add(out[j], t * c)
    return out


def _check_cap(u, order: int):
    if is_grid(u):
        cap = conditioning_cap(u, limit=order)
        if cap < order:
            raise ConditioningError(order, cap)


def s_alpha(u, w, alpha):
    """S_alpha(u, w) = sum_{0 < beta <= alpha} C(alpha, beta) (d^beta u . grad) d^(alpha - beta) w.

    u is a vector field; w a scalar or vector field of the same representation.
    """
    alpha = tuple(alpha)
    if sum(alpha) < 1:
        raise ValueError("S_alpha needs |alpha| >= 1")
    B = _backend(u, w, exact=True)
    _check_cap(u, sum(alpha))
    _check_cap(w, sum(alpha) + 1)
    wc = _components(w)
    parts = _s_alpha_parts(B, _Derivs(B, _components(u)), _Derivs(B, wc), len(wc), alpha)
    parts = [B.lower(x) if x is not None else _zero_like(wc[0]) for x in parts]
    if len(parts) == 1:
        return parts[0]
    return (VectorGridField if is_grid(u) else VectorModeField)(parts[0], parts[1])


def _zero_like(f):
    return GridField(f.K, f.P) if isinstance(f, GridField) else ModeField()


def advection(u, w):
    """(u . grad) w in the representation of the inputs."""
    B = _backend(u, w, exact=True)
    du, dw = _Derivs(B, _components(u)), _Derivs(B, _components(w))
    parts = []
    for j in range(len(_components(w))):
        parts.append(B.mul(du(0, (0, 0)), dw(j, (1, 0))) + B.mul(du(1, (0, 0)), dw(j, (0, 1))))
    parts = [B.lower(x) for x in parts]
    if len(parts) == 1:
        return parts[0]
    return (VectorGridField if is_grid(u) else VectorModeField)(parts[0], parts[1])


def leibniz_defect(u, w, alpha) -> Tuple[float, float]:
    """(||d^a(u.grad w) - (u.grad) d^a w - S_a(u, w)||, ||d^a(u.grad w)||)."""
    B = _backend(u, w)
    uc, wc = _components(u), _components(w)
    du, dw = _Derivs(B, uc), _Derivs(B, wc)
    S = _s_alpha_parts(B, du, dw, len(wc), alpha)
    lhs_parts, diff_parts = [], []
    for j in range(len(wc)):
        adv = B.mul(du(0, (0, 0)), dw(j, (1, 0))) + B.mul(du(1, (0, 0)), dw(j, (0, 1)))
        d_adv = B.d(adv, alpha)
        a1, a2 = alpha
        transport = (B.mul(du(0, (0, 0)), dw(j, (a1 + 1, a2))) + B.mul(du(1, (0, 0)), dw(j, (a1, a2 + 1))))
        lhs_parts.append(d_adv)
        diff_parts.append(d_adv - transport - S[j])
    return _vec_norm(B, diff_parts), _vec_norm(B, lhs_parts)


# ---------------------------------------------------------------------------


def product_lhs(u, v, p: NormParams) -> float:
    B = _backend(u, v)
    _check_cap(u, p.n_max)
    _check_cap(v, p.n_max + 1)
    vc = _components(v)
    du, dv = _Derivs(B, _components(u)), _Derivs(B, vc)
    total = 0.0
    for n in range(p.r, p.n_max + 1):
        for alpha in multi_indices(n):
            parts = [x for x in _s_alpha_parts(B, du, dv, len(vc), alpha) if x is not None]
            total += coeff_flat(alpha, p, "X") * _vec_norm(B, parts)
    return total


def product_estimate_ratio(u, v, p: NormParams, fields: str = "") -> EstimateMeasurement:
    """sum c_a ||S_a(u, v)||  vs  ||v||_Y~ ||u||_X~ + ||v||_X~ ||u||_Y~."""
    rhs = norm(v, p, "Yt") * norm(u, p, "Xt") + norm(v, p, "Xt") * norm(u, p, "Yt")
    lhs = product_lhs(u, v, p)
    return _measurement("product", lhs, rhs, p, fields)


def _pair_products(B, du: _Derivs, dv: _Derivs, nu: int, nv: int):
    """All products d_j u_a * d_i v_b, labelled."""
    out = []
    for a in range(nu):
        for b in range(nv):
            for j, ej in ((1, (1, 0)), (2, (0, 1))):
                for i, ei in ((1, (1, 0)), (2, (0, 1))):
                    out.append((f"d{j}u{a + 1}*d{i}v{b + 1}", B.mul(du(a, ej), dv(b, ei))))
    return out


def tangential_reduced_product(u, v, p: NormParams) -> Tuple[float, str]:
    """max over index pairs of sum_{a2 >= 2} c_a ||d^(a1, a2-2) grad(d_j u d_i v)||."""
    B = _backend(u, v)
    uc, vc = _components(u), _components(v)
    best, arg = 0.0, ""
    for label, prod in _pair_products(B, _Derivs(B, uc), _Derivs(B, vc), len(uc), len(vc)):
        s = 0.0
        for n in range(p.r, p.n_max + 1):
            for alpha in multi_indices(n):
                if alpha[1] < 2:
                    continue
                base = (alpha[0], alpha[1] - 2)
                g = [B.d(prod, (base[0] + 1, base[1])), B.d(prod, (base[0], base[1] + 1))]
                s += coeff_flat(alpha, p, "X") * _vec_norm(B, g)
        if s > best:
            best, arg = s, label
    return best, arg


def _tangential_weight(n: int, p: NormParams) -> float:
    """sum over |alpha| = n of c_alpha (the summand only depends on |alpha|)."""
    return sum(coeff_flat(a, p, "X") for a in multi_indices(n))


def pure_tangential_product(u, v, p: NormParams) -> Tuple[float, str]:
    """max over index pairs of sum_{|a| >= r} c_a ||d1^(|a|-1)(d_j u d_i v)||."""
    B = _backend(u, v)
    uc, vc = _components(u), _components(v)
    best, arg = 0.0, ""
    for label, prod in _pair_products(B, _Derivs(B, uc), _Derivs(B, vc), len(uc), len(vc)):
        s = sum(_tangential_weight(n, p) * B.norm(B.d(prod, (n - 1, 0))) for n in range(p.r, p.n_max + 1))
        if s > best:
            best, arg = s, label
    return best, arg


def tangential_h1_product(u, v, p: NormParams) -> float:
    """sum_{|a| >= r} c_a ||d1^(|a|-1)(u . grad v)||_H1 with the additive H1 norm."""
    adv = advection(u, v)
    B = _backend(adv)
    lifted = [B.lift(c) for c in _components(adv)]
    s = 0.0
    for n in range(p.r, p.n_max + 1):
        h1 = 0.0
        for e in ((0, 0), (1, 0), (0, 1)):
            h1 += _vec_norm(B, [B.d(c, (n - 1 + e[0], e[1])) for c in lifted])
        s += _tangential_weight(n, p) * h1
    return s


def corollary_ratios(u, v, p: NormParams, fields: str = "") -> List[EstimateMeasurement]:
    """The four related product estimates, named by what they measure."""
    _check_cap(u, p.n_max + 1)
    _check_cap(v, p.n_max + 1)
    ux, vx = norm(u, p, "Xt"), norm(v, p, "Xt")
    uy, vy = norm(u, p, "Yb"), norm(v, p, "Yb")
    out = []
    lhs, arg = tangential_reduced_product(u, v, p)
    out.append(_measurement("tangential_reduced_product", lhs, ux * vx, p, f"{fields} {arg}".strip()))
    lhs, arg = pure_tangential_product(u, v, p)
    out.append(_measurement("pure_tangential_product", lhs, ux * vx, p, f"{fields} {arg}".strip()))
    out.append(_measurement("tangential_h1_product", tangential_h1_product(u, v, p), ux * vy, p, fields))
    out.append(_measurement("advection_x_norm", norm(advection(u, v), p, "X"), ux * vy + uy * vx, p, fields))
    return out


# ---------------------------------------------------------------------------
# a priori inequality along a trajectory


def apriori_rhs(v, ubar, p: NormParams) -> float:
    vx, vyt, vyb = norm(v, p, "Xt"), norm(v, p, "Yt"), norm(v, p, "Yb")
    ux, uyb = norm(ubar, p, "Xt"), norm(ubar, p, "Yb")
    return vx * vyt + uyb * vx + ux * vyb + ux * uyb


def apriori_check(times: Sequence[float], states: Sequence, schedule: RadiusSchedule, ubar,
                  p: NormParams, max_dt_fraction: float = 1e-3,
                  ubar_norms: Optional[Tuple[float, float]] = None) -> List[EstimateMeasurement]:
    """Centered-difference measurement of d/dt ||v||_X~ + M ||v||_Y against the a priori right side.

    ``times`` must be uniformly spaced with step <= max_dt_fraction * tau0 / M.
    ``ubar`` is evaluated at each sample's radius; pass ``ubar_norms`` = None.
    """
    times = np.asarray(times, dtype=float)
    if len(times) < 3:
        raise ValueError("need at least three samples")
    dt = np.diff(times)
    if not np.allclose(dt, dt[0], rtol=1e-9, atol=0):
        raise ValueError("apriori_check needs uniform sampling")
    limit = max_dt_fraction * schedule.tau0 / schedule.M
    if dt[0] > limit * (1 + 1e-12):
        raise ValueError(f"sampling too coarse: dt = {dt[0]:.3e} > {limit:.3e}")
    taus = [schedule.tau(t) for t in times]
    xt = [norm(v, p.with_(tau=tau), "Xt") for v, tau in zip(states, taus)]
    out = []
    for i in range(1, len(times) - 1):
        pi = p.with_(tau=taus[i])
        v = states[i]
        lhs = (xt[i + 1] - xt[i - 1]) / (2 * dt[0]) + schedule.M * norm(v, pi, "Y")
        rhs = apriori_rhs(v, ubar, pi)
        m = _measurement("apriori", lhs, rhs, pi, f"t={times[i]:.6g}")
        m.extra["t"] = float(times[i])
        out.append(m)
    return out


def fitted_constant(ms: Sequence[EstimateMeasurement]) -> float:
    """Smallest C with lhs <= C rhs across non-vacuous measurements."""
    vals = [m.ratio for m in ms if not m.vacuous]
    return max(vals) if vals else 0.0


def transport_diagnostic(ubar, v, alpha) -> float:
    """||ubar||_inf ||d^a v|| ||grad d^a v||, logged only."""
    B = _backend(v, v)
    if is_grid(ubar):
        sup = max(np.max(np.abs(c.values())) for c in _components(ubar))
    else:
        x = np.linspace(0, 1, 65)
        X1, X2 = np.meshgrid(x, x, indexing="ij")
        sup = max(np.max(np.abs(c(X1, X2))) for c in _components(ubar))
    dv = _Derivs(B, _components(v))
    a = tuple(alpha)
    n0 = _vec_norm(B, [dv(j, a) for j in range(len(dv.base))])
    n1 = _vec_norm(B, [dv(j, (a[0] + e[0], a[1] + e[1])) for j in range(len(dv.base)) for e in ((1, 0), (0, 1))])
    return float(sup * n0 * n1)
