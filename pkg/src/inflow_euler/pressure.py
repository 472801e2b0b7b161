"""Neumann problem for the channel pressure.

    Delta p = rhs          in T x (0, 1)
    d2 p    = g_top        on x2 = 1
    d2 p    = g_bottom     on x2 = 0
    integral of p = 0

Boundary data are values of d2 p (not of the outward derivative), stored as
x1-Fourier coefficients.  Solvability requires
integral(rhs) = g_top[k=0] - g_bottom[k=0].
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Union

import numpy as np
import scipy.linalg

from . import grid_field as gf
from . import mode_field as mf
from .grid_field import GridField, VectorGridField
from .mode_field import Cos, Cosh, ModeField, Pow, VectorModeField, VerticalBasis
from .norms import NormParams, norm

BOUNDARY_FORMS = ("full-trace", "paper")

# defect above which the k = 0 imbalance is an error rather than roundoff
COMPAT_TOL = 1e-8


class CompatibilityError(ValueError):
    def __init__(self, defect: float, tol: float):
        super().__init__(f"Neumann data incompatible: integral(rhs) - flux = {defect:.6e} exceeds {tol:.1e}")
        self.defect = defect
        self.tol = tol


class SingularTauError(RuntimeError):
    pass


@dataclass
class NeumannProblem:
    rhs: Union[ModeField, GridField]
    g_bottom: Union[Dict[int, complex], np.ndarray]
    g_top: Union[Dict[int, complex], np.ndarray]
    boundary_form: str = "full-trace"

    @property
    def is_grid(self) -> bool:
        return isinstance(self.rhs, GridField)

    def rhs_integral(self) -> complex:
        if self.is_grid:
            return self.rhs.mean()
        return sum(a * vertical_mean(vb) for k, vb, a in self.rhs.terms() if k == 0)

    def flux(self) -> complex:
        if self.is_grid:
            K = self.rhs.K
            return complex(self.g_top[K] - self.g_bottom[K])
        return self.g_top.get(0, 0j) - self.g_bottom.get(0, 0j)

    @property
    def defect(self) -> float:
        """integral(rhs) - (top flux - bottom flux); real part, the imaginary part must vanish too."""
        d = self.rhs_integral() - self.flux()
        return float(d.real) if abs(d.imag) <= 1e-15 * max(1.0, abs(d)) else float(abs(d))


@dataclass
class PressureSolution:
    p: Union[ModeField, GridField]
    interior_residual: float
    boundary_residual: float
    mean: float
    defect_removed: float = 0.0
    info: dict = field(default_factory=dict)

    def gradient(self):
        if isinstance(self.p, GridField):
            return VectorGridField(gf.diff(self.p, 1), gf.diff(self.p, 2))
        return VectorModeField(mf.differentiate(self.p, 1), mf.differentiate(self.p, 2))


def vertical_mean(vb: VerticalBasis) -> float:
    """Exact integral over (0, 1) of a vertical basis function."""
    m = vb.param
    if vb.tag == "pow":
        return 1.0 / (m + 1)
    if vb.tag == "cos":
        return 1.0 if m == 0 else 0.0
    if vb.tag == "sin":
        return (1.0 - (-1.0) ** m) / (m * math.pi)
    if vb.tag == "cosh":
        return (math.sinh(m * (1 - vb.anchor)) + math.sinh(m * vb.anchor)) / m
    if vb.tag == "sinh":
        return (math.cosh(m * (1 - vb.anchor)) - math.cosh(m * vb.anchor)) / m
    raise ValueError(vb.tag)


def field_mean(f: ModeField) -> complex:
    return complex(sum(a * vertical_mean(vb) for k, vb, a in f.terms() if k == 0))


# ---------------------------------------------------------------------------
# assembling the problem


def grad_colon(f1, f2):
    """sum_ij d_i f1_j d_j f2_i, in the representation of the inputs."""
    if isinstance(f1, VectorGridField):
        d = lambda f, i: gf.diff(f, i)
        prod = gf.product
    else:
        d = mf.differentiate
        prod = mf.multiply
    a, b = (f1.comp1, f1.comp2), (f2.comp1, f2.comp2)
    out = None
    for i in (1, 2):
        for j in (1, 2):
            t = prod(d(a[j - 1], i), d(b[i - 1], j))
            out = t if out is None else out + t
    return out


def advect_scalar(u, w):
    """(u . grad) w for a vector field u and a scalar w."""
    if isinstance(u, VectorGridField):
        return gf.product(u.comp1, gf.diff(w, 1)) + gf.product(u.comp2, gf.diff(w, 2))
    return mf.advect(u, w)


def _traces(f) -> tuple:
    if isinstance(f, GridField):
        return f.wall("bottom"), f.wall("top")
    return mf.boundary_trace(f, "bottom"), mf.boundary_trace(f, "top")


def _to_representation(ubar, like):
    if isinstance(like, VectorGridField) and isinstance(ubar, VectorModeField):
        return VectorGridField.from_mode(ubar, like.K, like.P)
    return ubar


def build_pressure_problem(v, ubar, boundary_form: str = "full-trace", rhs_form: str = "gradient",
                           tol: Optional[float] = None) -> NeumannProblem:
    """Pressure problem of the shifted system for u = v + ubar.

    rhs_form 'gradient' uses -grad u : grad u; 'divergence' uses div(-(u.grad)u),
    equal in the continuum and exactly compatible with the full-trace data in
    the discrete setting.

    boundary_form 'full-trace': d2 p = -(u . grad) u2 on both walls.
    boundary_form 'paper':      d2 p = -(ubar . grad)(ubar2 + v2) on both walls.
    The two differ by v1 d1 ubar2 on the walls.
    """
    if boundary_form not in BOUNDARY_FORMS:
        raise ValueError(f"boundary_form must be one of {BOUNDARY_FORMS}")
    ubar = _to_representation(ubar, v)
    u = v + ubar
    if rhs_form == "gradient":
        rhs = -1.0 * grad_colon(u, u)
    elif rhs_form == "divergence":
        n1, n2 = -1.0 * advect_scalar(u, u.comp1), -1.0 * advect_scalar(u, u.comp2)
        if isinstance(u, VectorGridField):
            rhs = gf.diff(n1, 1) + gf.diff(n2, 2)
        else:
            rhs = mf.differentiate(n1, 1) + mf.differentiate(n2, 2)
    else:
        raise ValueError("rhs_form must be 'gradient' or 'divergence'")
    if boundary_form == "full-trace":
        g = -1.0 * advect_scalar(u, u.comp2)
    else:
        g = -1.0 * advect_scalar(ubar, ubar.comp2 + v.comp2)
    gb, gt = _traces(g)
    pb = NeumannProblem(rhs, gb, gt, boundary_form)
    if tol is not None and abs(pb.defect) > tol:
        raise CompatibilityError(pb.defect, tol)
    return pb


def build_bilinear_problem(f1, f2, g1, g2) -> NeumannProblem:
    """Delta p = grad f1 : grad f2, d2 p = g1 . grad g2 on the walls (g1 vector, g2 scalar)."""
    rhs = grad_colon(f1, f2)
    gb, gt = _traces(advect_scalar(g1, g2))
    return NeumannProblem(rhs, gb, gt)


# ---------------------------------------------------------------------------
# closed-form solve for trig-pure data


def _particular_term(k: int, vb: VerticalBasis, a: complex):
    lam2 = (mf.TWO_PI * k) ** 2
    if vb.tag in ("cos", "sin"):
        return [(k, vb, -a / ((vb.param * math.pi) ** 2 + lam2))]
    if vb.tag == "pow" and vb.param == 0:
        if k == 0:
            return [(0, Pow(2), a / 2.0)]
        return [(k, vb, -a / lam2)]
    raise mf.NotTrigPureError(f"closed-form solve needs trig-pure data, got {vb.label()}")


def _derivative_at(f: ModeField, k: int, side: str) -> complex:
    return mf.boundary_trace(mf.differentiate(f, 2), side).get(k, 0j)


def solve_neumann_mode(pb: NeumannProblem, tol: float = 1e-10) -> PressureSolution:
    if pb.is_grid:
        raise TypeError("solve_neumann_mode needs a ModeField problem")
    f = pb.rhs
    if not f.is_trig_pure:
        raise mf.NotTrigPureError("solve_neumann_mode needs a trig-pure right side")
    scale = max(mf.l2_norm(f), mf.trace_l2(pb.g_top), mf.trace_l2(pb.g_bottom), 1.0)
    if abs(pb.defect) > tol * scale:
        raise CompatibilityError(pb.defect, tol * scale)
    part = ModeField([t for k, vb, a in f.terms() for t in _particular_term(k, vb, a)])
    ks = set(f.wavenumbers()) | set(pb.g_top) | set(pb.g_bottom)
    terms = []
    for k in sorted(ks):
        a_top = pb.g_top.get(k, 0j) - _derivative_at(part, k, "top")
        a_bot = pb.g_bottom.get(k, 0j) - _derivative_at(part, k, "bottom")
        if k == 0:
            # A + B x2: B from the bottom wall, the top wall then holds by compatibility
            terms.append((0, Pow(1), a_bot))
        else:
            lam = mf.TWO_PI * abs(k)
            den = lam * math.sinh(lam)
            terms.append((k, Cosh(lam, 0), a_top / den))
            terms.append((k, Cosh(lam, 1), -a_bot / den))
    p = part + ModeField(terms)
    p = p - ModeField.constant(field_mean(p))
    res = mf.differentiate(mf.differentiate(p, 1), 1) + mf.differentiate(mf.differentiate(p, 2), 2) - f
    dp = mf.differentiate(p, 2)
    bres = max(_trace_diff(mf.boundary_trace(dp, "top"), pb.g_top),
               _trace_diff(mf.boundary_trace(dp, "bottom"), pb.g_bottom))
    return PressureSolution(p, mf.l2_norm(res), bres, abs(field_mean(p)), pb.defect)


def _trace_diff(a: Dict[int, complex], b: Dict[int, complex]) -> float:
    keys = set(a) | set(b)
    return math.sqrt(sum(abs(a.get(k, 0j) - b.get(k, 0j)) ** 2 for k in keys))


# ---------------------------------------------------------------------------
# Chebyshev tau solve


@functools.lru_cache(maxsize=512)
def _tau_factor(P: int, kk: int):
    """LU factors of the tau matrix for |k| = kk (for k = 0 the unknowns are a_1..a_P)."""
    D = gf.cheb_diff_matrix(P)
    D2 = D @ D
    p = np.arange(P + 1)
    top = 2.0 * p ** 2
    bot = 2.0 * (-1.0) ** (p + 1) * p ** 2
    if kk == 0:
        A = np.vstack([D2[:P - 2, 1:], top[None, 1:], bot[None, 1:]])
    else:
        lam2 = (gf.TWO_PI * kk) ** 2
        L = D2 - lam2 * np.eye(P + 1)
        A = np.vstack([L[:P - 1], top[None, :], bot[None, :]])
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > 1e14:
        raise SingularTauError(f"tau matrix for |k|={kk}, P={P} is singular (cond {cond:.2e})")
    return scipy.linalg.lu_factor(A)


def solve_neumann_grid(pb: NeumannProblem, tol: float = COMPAT_TOL) -> PressureSolution:
    """Per-k tau solve; the k = 0 imbalance is removed from the mean of the right side first."""
    f = pb.rhs
    K, P = f.K, f.P
    if P < 4:
        raise ValueError("tau solve needs P >= 4")
    defect = pb.defect
    if abs(defect) > tol:
        raise CompatibilityError(defect, tol)
    fc = f.coeffs.copy()
    fc[K, 0] -= pb.rhs_integral() - pb.flux()
    gt = np.asarray(pb.g_top, dtype=complex)
    gb = np.asarray(pb.g_bottom, dtype=complex)
    out = np.zeros_like(fc)
    w = gf.cheb_integrals(P)
    for kk in range(K + 1):
        lu = _tau_factor(P, kk)
        idx = [K + kk] if kk == 0 else [K - kk, K + kk]
        if kk == 0:
            b = np.concatenate([fc[K, :P - 2], [gt[K], gb[K]]])
            a = scipy.linalg.lu_solve(lu, b)
            out[K, 1:] = a
            out[K, 0] = -(w[1:] @ a) / w[0]
        else:
            B = np.stack([np.concatenate([fc[i, :P - 1], [gt[i], gb[i]]]) for i in idx], axis=1)
            A = scipy.linalg.lu_solve(lu, B)
            for col, i in enumerate(idx):
                out[i] = A[:, col]
    p = GridField(K, P, out)
    lap = gf.diff(p, 1, 2) + gf.diff(p, 2, 2)
    fixed = GridField(K, P, fc)
    interior = (lap - fixed).l2_norm()
    dp = gf.diff(p, 2)
    bres = max(np.max(np.abs(dp.wall("top") - gt)), np.max(np.abs(dp.wall("bottom") - gb)))
    return PressureSolution(p, interior, float(bres), abs(p.mean()), defect,
                            info={"rhs_norm": f.l2_norm()})


def solve_neumann(pb: NeumannProblem, **kw) -> PressureSolution:
    return solve_neumann_grid(pb, **kw) if pb.is_grid else solve_neumann_mode(pb, **kw)


# ---------------------------------------------------------------------------


def pressure_estimate_ratio(f1, f2, g1, g2, p: NormParams) -> float:
    """||grad p||_X / (||f1||_X~ ||f2||_X~ + ||g1||_X~ ||g2||_Y-) for the bilinear Neumann problem."""
    rhs_side = norm(f1, p, "Xt") * norm(f2, p, "Xt") + norm(g1, p, "Xt") * norm(g2, p, "Yb")
    if rhs_side == 0:
        raise ZeroDivisionError("pressure_estimate_ratio: right side vanishes")
    sol = solve_neumann(build_bilinear_problem(f1, f2, g1, g2))
    return norm(sol.gradient(), p, "X") / rhs_side


# ---------------------------------------------------------------------------
# manufactured solution


MANUFACTURED_HEADER = ("K", "P", "rel_l2_error", "interior_residual", "boundary_residual", "mean")


def manufactured_field() -> ModeField:
    """p = cos(2 pi x1) cos(pi x2): zero mean, zero Neumann data on both walls."""
    return ModeField.cos_x1(1, Cos(1))


def manufactured_problem(K: Optional[int] = None, P: Optional[int] = None) -> NeumannProblem:
    p = manufactured_field()
    lap = mf.differentiate(mf.differentiate(p, 1), 1) + mf.differentiate(mf.differentiate(p, 2), 2)
    if K is None:
        return NeumannProblem(lap, {}, {})
    zero = np.zeros(2 * K + 1, dtype=complex)
    return NeumannProblem(gf.from_mode(lap, K, P), zero, zero.copy())


def manufactured_suite(K: int = 2, Ps=(8, 12, 16, 24, 32)) -> List[tuple]:
    """Relative L2 error of the tau solve against the exact pressure, per P."""
    rows = []
    for P in Ps:
        exact = gf.from_mode(manufactured_field(), K, P)
        sol = solve_neumann_grid(manufactured_problem(K, P))
        err = (sol.p - exact).l2_norm() / exact.l2_norm()
        rows.append((K, P, err, sol.interior_residual, sol.boundary_residual, sol.mean))
    return rows


def mode_grid_agreement(K: int = 2, P: int = 24) -> float:
    """Relative L2 gap between the closed-form and tau solutions of the manufactured problem."""
    pm = solve_neumann_mode(manufactured_problem()).p
    pg = solve_neumann_grid(manufactured_problem(K, P)).p
    ref = gf.from_mode(pm, K, P)
    return (pg - ref).l2_norm() / ref.l2_norm()
