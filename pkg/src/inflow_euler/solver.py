"""Time integration of the shifted Euler system in the channel.

With u = v + ubar and ubar steady, the unknown v solves

    d_t v = -(u . grad) u - grad p,   div v = 0,   v2 = 0 on the walls.

Two drivers are provided: classical RK4 with a pressure solve per stage
(``run``), and the successive-approximation scheme with the right side frozen at
the previous iterate (``picard_run``), which reports contraction diagnostics.
"""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from numpy.polynomial import chebyshev as C

from . import grid_field as gf
from .grid_field import GridField, VectorGridField
from .mode_field import VectorModeField
from .norms import (FAMILIES, NormParams, RadiusSchedule, derivative_table, norm_error_from_table,
                    norm_from_table)
from .pressure import build_pressure_problem, solve_neumann_grid

log = logging.getLogger(__name__)

INVARIANT_TOL = 1e-9
SERIES_HEADER = ("t", "tau", "X", "Xt", "Y", "Yt", "Yb", "Hr", "div", "trace", "energy")


class InvariantError(RuntimeError):
    """An accepted step broke solenoidality or impermeability."""

    def __init__(self, message: str, payload: Optional[dict] = None):
        super().__init__(message)
        self.payload = payload or {}


class BlowUpError(RuntimeError):
    def __init__(self, t: float, value: float, ceiling: float):
        super().__init__(f"norm X~ = {value:.3e} exceeds the ceiling {ceiling:.3e} at t = {t:.6g}")
        self.t, self.value, self.ceiling = t, value, ceiling


class CFLError(ValueError):
    pass


class PicardDivergenceError(RuntimeError):
    def __init__(self, trace: "IterationTrace"):
        super().__init__("Picard iterates diverge: composite grew on two consecutive iterations")
        self.trace = trace


# ---------------------------------------------------------------------------
# right side


class Background:
    """A steady ubar together with its samples on one (K, P) grid."""

    def __init__(self, ubar, K: int, P: int):
        self.exact = ubar if isinstance(ubar, VectorModeField) else None
        if isinstance(ubar, VectorGridField):
            self.grid = ubar.resample(K, P)
        else:
            self.grid = VectorGridField.from_mode(ubar, K, P)
        self.K, self.P = K, P

    @classmethod
    def zero(cls, K: int, P: int) -> "Background":
        return cls(VectorGridField.zeros(K, P), K, P)


def _as_background(ubar, v: VectorGridField) -> Background:
    if isinstance(ubar, Background):
        if (ubar.K, ubar.P) != (v.K, v.P):
            raise ValueError("background sampled on a different grid")
        return ubar
    if ubar is None:
        return Background.zero(v.K, v.P)
    return Background(ubar, v.K, v.P)


def _advect(u: VectorGridField, w: GridField) -> GridField:
    return gf.product(u.comp1, gf.diff(w, 1)) + gf.product(u.comp2, gf.diff(w, 2))


@dataclass
class RhsResult:
    rhs: VectorGridField
    nonlinear: VectorGridField
    pressure: GridField


def rhs_full(v: VectorGridField, ubar, boundary_form: str = "full-trace") -> RhsResult:
    bg = _as_background(ubar, v)
    u = v + bg.grid
    n = VectorGridField(-1.0 * _advect(u, u.comp1), -1.0 * _advect(u, u.comp2))
    pb = build_pressure_problem(v, bg.grid, boundary_form=boundary_form, rhs_form="divergence")
    sol = solve_neumann_grid(pb)
    p = sol.p
    rhs = VectorGridField(n.comp1 - gf.diff(p, 1), n.comp2 - gf.diff(p, 2))
    return RhsResult(rhs, n, p)


def rhs_shifted(v: VectorGridField, ubar, boundary_form: str = "full-trace") -> VectorGridField:
    """-(u . grad) u - grad p for u = v + ubar, with dealiased products and a tau pressure solve."""
    return rhs_full(v, ubar, boundary_form).rhs


# ---------------------------------------------------------------------------
# states and diagnostics


def divergence_norm(v: VectorGridField) -> float:
    return v.divergence_norm()


def trace_norm(v: VectorGridField) -> float:
    return v.normal_trace_norm()


def check_invariants(v: VectorGridField, t: float, tol: float = INVARIANT_TOL) -> Dict[str, float]:
    scale = max(1.0, v.l2_norm())
    d, tr = divergence_norm(v), trace_norm(v)
    if d > tol * scale or tr > tol * scale:
        raise InvariantError(
            f"invariant violated at t = {t:.6g}: div = {d:.3e}, trace = {tr:.3e} (limit {tol * scale:.3e})",
            {"t": t, "div": d, "trace": tr, "scale": scale})
    return {"div": d, "trace": tr}


def energy(v: VectorGridField, bg: Background) -> float:
    u = v + bg.grid
    return 0.5 * u.l2_norm() ** 2


def _wall_integral(factors: Sequence[np.ndarray], K: int) -> float:
    """x1-mean of a product of traces given by Fourier coefficients k = -K..K."""
    n = 4 * K + 2
    out = np.ones(n, dtype=complex)
    for c in factors:
        full = np.zeros(n, dtype=complex)
        ks = np.arange(-K, K + 1)
        full[ks % n] = c
        out = out * np.fft.ifft(full) * n
    return float(np.mean(out).real)


def energy_balance(v: VectorGridField, bg: Background, boundary_form: str = "full-trace") -> Dict[str, float]:
    """Power Re<u, d_t v> against the boundary flux of (|u|^2 / 2 + p) u.n.

    Returns the two terms, their sum, and the scale |<u, N>| + |<u, grad p>|.
    """
    res = rhs_full(v, bg, boundary_form)
    u = v + bg.grid
    power = u.inner(res.rhs).real
    grad_p = VectorGridField(gf.diff(res.pressure, 1), gf.diff(res.pressure, 2))
    scale = abs(u.inner(res.nonlinear).real) + abs(u.inner(grad_p).real)
    K = v.K
    flux = 0.0
    for side, sign in (("top", 1.0), ("bottom", -1.0)):
        u1, u2, p = u.comp1.wall(side), u.comp2.wall(side), res.pressure.wall(side)
        kinetic = 0.5 * (_wall_integral([u1, u1, u2], K) + _wall_integral([u2, u2, u2], K))
        flux += sign * (kinetic + _wall_integral([p, u2], K))
    return {"power": power, "flux": flux, "residual": power + flux, "scale": scale}


@dataclass
class SolverState:
    t: float
    v: VectorGridField
    tau: float
    diagnostics: Dict[str, float] = field(default_factory=dict)
    norms: Optional[Dict[str, float]] = None


def cfl_limit(v: VectorGridField, bg: Background) -> float:
    """Largest dt with dt * max(|u1| / h1 + |u2| / h2) <= 0.5, h2 the local Lobatto spacing."""
    u = v + bg.grid
    h1 = 1.0 / (2 * v.K + 1)
    gaps = np.abs(np.diff(gf.lobatto_points(v.P)))
    h2 = np.minimum(np.concatenate([gaps, [np.inf]]), np.concatenate([[np.inf], gaps]))
    rate = np.abs(u.comp1.values()) / h1 + np.abs(u.comp2.values()) / h2[None, :]
    m = float(np.max(rate))
    return math.inf if m == 0 else 0.5 / m


def step_rk4(state: SolverState, dt: float, ubar, schedule: Optional[RadiusSchedule] = None,
             boundary_form: str = "full-trace", check_cfl: bool = True,
             check: bool = True) -> SolverState:
    """One classical RK4 step with a pressure solve in every stage."""
    v = state.v
    bg = _as_background(ubar, v)
    if check_cfl:
        lim = cfl_limit(v, bg)
        if dt > lim * (1 + 1e-12):
            raise CFLError(f"dt = {dt:.3e} exceeds the CFL limit {lim:.3e}")
    f = lambda w: rhs_shifted(w, bg, boundary_form)
    k1 = f(v)
    k2 = f(v + k1 * (0.5 * dt))
    k3 = f(v + k2 * (0.5 * dt))
    k4 = f(v + k3 * dt)
    new = v + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
    t = state.t + dt
    tau = schedule.tau(t) if schedule is not None else state.tau
    diag = check_invariants(new, t) if check else {}
    return SolverState(t, new, tau, diag)


# ---------------------------------------------------------------------------
# trajectory driver


@dataclass
class Trajectory:
    schedule: RadiusSchedule
    params: NormParams
    times: List[float] = field(default_factory=list)
    states: List[VectorGridField] = field(default_factory=list)
    series: List[tuple] = field(default_factory=list)
    balance: List[tuple] = field(default_factory=list)
    checkpoints: List[str] = field(default_factory=list)

    @property
    def final(self) -> VectorGridField:
        return self.states[-1]


def norm_report(v: VectorGridField, p: NormParams, check_cap: bool = True) -> Dict[str, float]:
    t = derivative_table(v, p.n_max, check_cap=check_cap)
    return {w: norm_from_table(t, p, w) for w in FAMILIES}


def _series_row(t: float, tau: float, v: VectorGridField, bg: Background, p: NormParams) -> tuple:
    nr = norm_report(v, p.with_(tau=tau))
    return (t, tau, *(nr[w] for w in FAMILIES), divergence_norm(v), trace_norm(v), energy(v, bg))


def run(v0: VectorGridField, ubar, schedule: RadiusSchedule, dt: float, params: NormParams,
        boundary_form: str = "full-trace", norm_every: int = 1, store_every: int = 1,
        balance_every: int = 0, blowup_factor: float = 1e3, blowup_floor: float = 1e6,
        checkpoint_every: int = 0, checkpoint_dir: Optional[str] = None,
        check_cfl: bool = True, record_norms: bool = True,
        callback: Optional[Callable[[SolverState], None]] = None) -> Trajectory:
    """Integrate from t = 0 to t = T0, landing exactly on T0.

    The norm series is evaluated at tau(t) every ``norm_every`` steps and at the
    final time.  The run aborts once X~ exceeds max(blowup_factor * X~(0),
    blowup_floor).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    bg = _as_background(ubar, v0)
    check_invariants(v0, 0.0)
    traj = Trajectory(schedule, params)
    T0 = schedule.T0
    n_full = int(math.floor(T0 / dt * (1 + 1e-12)))
    steps = [dt] * n_full
    rest = T0 - n_full * dt
    if rest > 1e-12 * T0:
        steps.append(rest)
    ceiling = None
    state = SolverState(0.0, v0, schedule.tau(0.0))

    def record(i: int, final: bool):
        nonlocal ceiling
        if (store_every and i % store_every == 0) or final:
            traj.times.append(state.t)
            traj.states.append(state.v)
        if record_norms and (i % norm_every == 0 or final):
            row = _series_row(state.t, state.tau, state.v, bg, params)
            traj.series.append(row)
            xt = row[3]
            if ceiling is None:
                ceiling = max(blowup_factor * xt, blowup_floor)
            elif xt > ceiling:
                raise BlowUpError(state.t, xt, ceiling)
        if balance_every and (i % balance_every == 0 or final):
            eb = energy_balance(state.v, bg, boundary_form)
            traj.balance.append((state.t, eb["power"], eb["flux"], eb["residual"], eb["scale"]))
        if checkpoint_every and checkpoint_dir and (i % checkpoint_every == 0 or final):
            os.makedirs(checkpoint_dir, exist_ok=True)
            path = os.path.join(checkpoint_dir, f"state_{i:06d}.ieck")
            with open(path, "wb") as fh:
                gf.write_checkpoint(fh, [state.v.comp1, state.v.comp2], state.t,
                                    (state.tau, schedule.tau0, schedule.M, schedule.T0))
            traj.checkpoints.append(path)

    record(0, len(steps) == 0)
    for i, h in enumerate(steps, start=1):
        state = step_rk4(state, h, bg, schedule, boundary_form, check_cfl)
        # times from the step count, not accumulated sums; the last lands on T0
        state.t = T0 if i == len(steps) else i * dt
        state.tau = schedule.tau(state.t)
        record(i, i == len(steps))
        if callback is not None:
            callback(state)
    log.info("run finished at t = %.6g, tau = %.3g after %d steps", state.t, state.tau, len(steps))
    return traj


# ---------------------------------------------------------------------------
# successive approximation


def time_nodes(T0: float, n: int) -> np.ndarray:
    """Chebyshev-Lobatto nodes on [0, T0], increasing."""
    j = np.arange(n)
    return 0.5 * T0 * (1 - np.cos(np.pi * j / (n - 1)))


def integration_matrix(T0: float, n: int) -> np.ndarray:
    """S with (S f)_j = int_0^{t_j} of the polynomial interpolant of f."""
    s = -np.cos(np.pi * np.arange(n) / (n - 1))
    V = C.chebvander(s, n - 1)
    Vinv = np.linalg.inv(V)
    S = np.empty((n, n))
    for col in range(n):
        ci = C.chebint(Vinv[:, col], lbnd=-1)
        S[:, col] = C.chebval(s, ci) * (0.5 * T0)
    return S


@dataclass
class IterationTrace:
    M: float
    T0: float
    A: float
    C0: float
    a: List[float] = field(default_factory=list)
    b: List[float] = field(default_factory=list)
    resolved: List[bool] = field(default_factory=list)
    bound_lhs: List[float] = field(default_factory=list)
    floor: float = 0.0

    @property
    def composite(self) -> List[float]:
        return [x + self.M * y for x, y in zip(self.a, self.b)]

    def __len__(self) -> int:
        return len(self.a)

    def ratios(self) -> List[float]:
        """composite_{n+1} / composite_n over resolved iterates above the floor."""
        c = self.composite
        out = []
        for i in range(len(c) - 1):
            if (self.resolved[i] and self.resolved[i + 1]
                    and c[i] > self.floor and c[i + 1] > self.floor):
                out.append(c[i + 1] / c[i])
        return out

    @property
    def rho(self) -> float:
        r = self.ratios()
        return max(r) if r else 0.0

    @property
    def uniform_bound_holds(self) -> bool:
        return all(x <= self.A * (1 + 1e-12) for x in self.bound_lhs)

    def rows(self) -> List[tuple]:
        c = self.composite
        return [(n + 1, self.a[n], self.b[n], c[n], self.bound_lhs[n], self.A, int(self.resolved[n]))
                for n in range(len(self.a))]


TRACE_HEADER = ("n", "a_n", "b_n", "composite", "uniform_lhs", "A", "resolved")


@dataclass
class PicardResult:
    trace: IterationTrace
    times: np.ndarray
    iterates: List[VectorGridField]  # last iterate at each node
    schedule: RadiusSchedule

    @property
    def final(self) -> VectorGridField:
        return self.iterates[-1]


def _stack(vs: Sequence[VectorGridField]) -> np.ndarray:
    return np.stack([np.stack([v.comp1.coeffs, v.comp2.coeffs]) for v in vs])


def _unstack(arr: np.ndarray, K: int, P: int) -> List[VectorGridField]:
    return [VectorGridField(GridField(K, P, a[0].copy()), GridField(K, P, a[1].copy())) for a in arr]


def _time_norms(vs: Sequence[VectorGridField], taus: np.ndarray, weights: np.ndarray,
                p: NormParams, noise: float = 0.0, rtol: float = 1e-2):
    """(sup X~, int Y-, resolved) for a sampled trajectory.

    Resolution is judged on the aggregated values: the error estimates of the
    derivative entries are pushed through the same sums.
    """
    xs, ys, xe, ye = [], [], [], []
    for v, tau in zip(vs, taus):
        t = derivative_table(v, p.n_max, check_cap=False, noise=noise)
        pt = p.with_(tau=float(tau))
        xs.append(norm_from_table(t, pt, "Xt"))
        ys.append(norm_from_table(t, pt, "Yb"))
        xe.append(norm_error_from_table(t, pt, "Xt"))
        ye.append(norm_error_from_table(t, pt, "Yb"))
    i = int(np.argmax(xs))
    a, b = xs[i], float(weights @ np.asarray(ys))
    b_err = float(np.abs(weights) @ np.asarray(ye))
    resolved = xe[i] <= rtol * a and b_err <= rtol * b
    return a, b, resolved


def picard_constant_A(v0, bg_exact, schedule: RadiusSchedule, p: NormParams) -> float:
    """3 ||v0||_Y-(tau0) + sup_t ||ubar||_Y-(tau(t)); the sup sits at tau0 since the norm grows with tau."""
    p0 = p.with_(tau=schedule.tau0)
    ub = 0.0 if bg_exact is None else norm_from_table(derivative_table(bg_exact, p.n_max), p0, "Yb")
    return 3 * norm_from_table(derivative_table(v0, p.n_max), p0, "Yb") + ub


def picard_run(v0: VectorGridField, ubar, schedule: RadiusSchedule, n_iters: int, params: NormParams,
               A: Optional[float] = None, C0: float = 0.0, n_nodes: int = 16,
               boundary_form: str = "full-trace", floor_rel: float = 1e-11,
               stop_at_floor: bool = True) -> PicardResult:
    """Successive approximation v(n+1)(t) = v0 + int_0^t F(v(n)), v(0) = v0, on Chebyshev time nodes."""
    if n_iters < 2:
        raise ValueError("n_iters must be >= 2")
    bg = _as_background(ubar, v0)
    check_invariants(v0, 0.0)
    M, T0 = schedule.M, schedule.T0
    t = time_nodes(T0, n_nodes)
    taus = np.array([schedule.tau(x) for x in t])
    S = integration_matrix(T0, n_nodes)
    w = S[-1]
    if A is None:
        A = picard_constant_A(v0, bg.exact, schedule, params)
    trace = IterationTrace(M, T0, A, C0)
    K, P = v0.K, v0.P
    base = _stack([v0])[0]
    cur = np.broadcast_to(base, (n_nodes,) + base.shape).copy()
    scale = None
    for n in range(n_iters):
        F = _stack([rhs_shifted(v, bg, boundary_form) for v in _unstack(cur, K, P)])
        new = base[None] + np.tensordot(S, F, axes=(1, 0))
        new_fields = _unstack(new, K, P)
        diff = _unstack(new - cur, K, P)
        # the difference inherits the roundoff of the iterates themselves
        noise = gf.NOISE_FLOOR * math.sqrt(n_nodes) * float(np.abs(new).max(initial=0.0))
        a, b, ok = _time_norms(diff, taus, w, params, noise)
        vx, vy, _ = _time_norms(new_fields, taus, w, params)
        trace.a.append(a)
        trace.b.append(b)
        trace.resolved.append(ok)
        trace.bound_lhs.append(vx + M * vy)
        if scale is None:
            scale = max(vx + M * vy, a + M * b)
            trace.floor = floor_rel * scale
        cur = new
        c = trace.composite
        if len(c) >= 3 and c[-1] > c[-2] > c[-3] and c[-2] > trace.floor:
            raise PicardDivergenceError(trace)
        if stop_at_floor and (c[-1] <= trace.floor or not ok) and len(c) >= 2:
            break
    check_invariants(_unstack(cur, K, P)[-1], T0)
    return PicardResult(trace, t, _unstack(cur, K, P), schedule)


def measured_C0(fields: Sequence, params: NormParams) -> float:
    """Largest product-estimate ratio over ordered pairs of the given fields (non-vacuous only)."""
    from .estimates import product_estimate_ratio

    out = 0.0
    for u in fields:
        for v in fields:
            m = product_estimate_ratio(u, v, params)
            if not m.vacuous:
                out = max(out, m.ratio)
    return out


def picard_schedule(tau0: float, A: float, C0: float, factor: float = 1.0) -> RadiusSchedule:
    """M = factor * max(1, 12 C0 A) and T0 = min(1, tau0) / M."""
    M = factor * max(1.0, 12.0 * C0 * A)
    return RadiusSchedule(tau0, M, min(1.0, tau0) / M)
