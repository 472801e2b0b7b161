"""Truncated analytic norms with a shrinking radius.

For a field u, a regularity index r >= 3, a radius tau and a vertical weight eps,

    X(u)  = sum_{|a| >= r}   |a|^r     / |a|! * tau^(|a|-r)   * eps^a2 * ||d^a u||
    Y(u)  = sum_{|a| >= r+1} |a|^(r+1) / |a|! * tau^(|a|-r-1) * eps^a2 * ||d^a u||
    Hr(u) = sum_{|a| <= r} ||d^a u||

and X~ = X + Hr, Y~ = tau Y + Hr, Y- = Y + Hr.  All sums stop at |a| = N_max.
For vector fields ||d^a v|| is the L2 norm of the vector, i.e. the root of the
summed squares of the component norms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Tuple, Union

import numpy as np

from . import grid_field as gf
from . import mode_field as mf
from .grid_field import ConditioningError, GridField, VectorGridField
from .mode_field import ModeField, VectorModeField

FAMILIES = ("X", "Xt", "Y", "Yt", "Yb", "Hr")
FAMILY_LABELS = {"X": "X", "Xt": "X~", "Y": "Y", "Yt": "Y~", "Yb": "Y-", "Hr": "Hr"}

DEFAULT_NMAX_MODE = 12
DEFAULT_NMAX_GRID = 8
DEFAULT_EPS = 0.1

Field = Union[ModeField, VectorModeField, GridField, VectorGridField]
MultiIndex = Tuple[int, int]


class ScheduleError(ValueError):
    pass


@dataclass(frozen=True)
class NormParams:
    r: int = 3
    tau: float = 0.1
    eps: float = DEFAULT_EPS
    n_max: int = DEFAULT_NMAX_MODE

    def __post_init__(self):
        if int(self.r) != self.r or self.r < 3:
            raise ValueError(f"r must be an integer >= 3, got {self.r}")
        if not self.tau >= 0:
            raise ValueError(f"tau must be nonnegative, got {self.tau}")
        if not 0 < self.eps < 1:
            raise ValueError(f"eps must lie in (0, 1), got {self.eps}")
        if self.n_max < self.r + 2:
            raise ValueError(f"n_max = {self.n_max} must be >= r + 2 = {self.r + 2}")

    def with_(self, **kw) -> "NormParams":
        d = dict(r=self.r, tau=self.tau, eps=self.eps, n_max=self.n_max)
        d.update(kw)
        return NormParams(**d)


@dataclass(frozen=True)
class RadiusSchedule:
    """tau(t) = tau0 - M t on [0, T0], with T0 <= tau0 / M."""

    tau0: float
    M: float
    T0: float

    def __post_init__(self):
        if not self.tau0 > 0:
            raise ScheduleError(f"tau0 must be positive, got {self.tau0}")
        if self.M < 1:
            raise ScheduleError(f"M must be >= 1, got {self.M}")
        if not self.T0 > 0:
            raise ScheduleError(f"T0 must be positive, got {self.T0}")
        if self.T0 > self.tau0 / self.M * (1 + 1e-14):
            raise ScheduleError(
                f"radius constraint violated: T0 = {self.T0} > tau0/M = {self.tau0 / self.M}")

    @property
    def t_end(self) -> float:
        return self.T0

    @property
    def exhausts_radius(self) -> bool:
        return math.isclose(self.T0, self.tau0 / self.M, rel_tol=1e-14)

    def tau(self, t):
        """Radius at time t; exactly zero at t = tau0/M."""
        t = np.asarray(t, dtype=float)
        tau = self.tau0 - self.M * t
        if self.exhausts_radius:
            tau = np.where(np.isclose(t, self.T0, rtol=0, atol=1e-15 * max(self.T0, 1)), 0.0, tau)
        if np.any(tau < -1e-14 * self.tau0):
            raise ScheduleError(f"time beyond the radius schedule (tau < 0 at t = {np.max(t)})")
        tau = np.maximum(tau, 0.0)
        return float(tau) if tau.ndim == 0 else tau


def multi_indices(n: int) -> List[MultiIndex]:
    """All (a1, a2) with a1 + a2 = n, ordered by a2."""
    return [(n - a2, a2) for a2 in range(n + 1)]


def coeff_flat(alpha: MultiIndex, p: NormParams, family: str = "X") -> float:
    n = alpha[0] + alpha[1]
    if family == "X":
        if n < p.r:
            raise ValueError(f"X coefficient needs |alpha| >= r = {p.r}, got {n}")
        return n ** p.r / math.factorial(n) * p.tau ** (n - p.r) * p.eps ** alpha[1]
    if family == "Y":
        if n < p.r + 1:
            raise ValueError(f"Y coefficient needs |alpha| >= r + 1 = {p.r + 1}, got {n}")
        return n ** (p.r + 1) / math.factorial(n) * p.tau ** (n - p.r - 1) * p.eps ** alpha[1]
    raise ValueError(f"family must be 'X' or 'Y', got {family!r}")


def coeff_flat_exact(alpha: MultiIndex, r: int, tau: Fraction, eps: Fraction, family: str = "X") -> Fraction:
    """Rational version of coeff_flat, for checks with exact arithmetic."""
    n = alpha[0] + alpha[1]
    s = 0 if family == "X" else 1
    if n < r + s:
        raise ValueError("|alpha| below the family threshold")
    return Fraction(n ** (r + s), math.factorial(n)) * Fraction(tau) ** (n - r - s) * Fraction(eps) ** alpha[1]


# ---------------------------------------------------------------------------


@dataclass
class DerivativeTable:
    n_max: int
    entries: Dict[MultiIndex, float]
    errors: Dict[MultiIndex, float] = field(default_factory=dict)
    cap: Optional[int] = None
    source: str = "mode"

    def __getitem__(self, alpha: MultiIndex) -> float:
        return self.entries[tuple(alpha)]

    def order_max(self, n: int) -> float:
        return max(self.entries[a] for a in multi_indices(n))

    def restricted(self, n_max: int) -> "DerivativeTable":
        if n_max > self.n_max:
            raise ValueError(f"table only holds orders <= {self.n_max}")
        keep = {a: v for a, v in self.entries.items() if sum(a) <= n_max}
        errs = {a: v for a, v in self.errors.items() if sum(a) <= n_max}
        return DerivativeTable(n_max, keep, errs, self.cap, self.source)

    def shifted(self, axis: int) -> "DerivativeTable":
        """Table of d_axis u, from this one (one order lower)."""
        e = (1, 0) if axis == 1 else (0, 1)
        ent = {a: self.entries[(a[0] + e[0], a[1] + e[1])]
               for a in self.entries if sum(a) <= self.n_max - 1}
        err = {a: self.errors.get((a[0] + e[0], a[1] + e[1]), 0.0) for a in ent}
        return DerivativeTable(self.n_max - 1, ent, err, self.cap, self.source)


def _scalar_components(u: Field) -> list:
    if isinstance(u, (VectorModeField, VectorGridField)):
        return [u.comp1, u.comp2]
    if isinstance(u, (ModeField, GridField)):
        return [u]
    raise TypeError(f"unsupported field type {type(u).__name__}")


def is_grid(u: Field) -> bool:
    return isinstance(u, (GridField, VectorGridField))


def default_n_max(u: Field) -> int:
    return DEFAULT_NMAX_GRID if is_grid(u) else DEFAULT_NMAX_MODE


def _mode_table(f: ModeField, n_max: int) -> Dict[MultiIndex, float]:
    out = {}
    row = f
    for a1 in range(n_max + 1):
        g = row
        for a2 in range(n_max - a1 + 1):
            out[(a1, a2)] = mf.l2_norm(g)
            g = mf.differentiate(g, 2)
        row = mf.differentiate(row, 1)
    return out


def _grid_table(f: GridField, n_max: int, floor: float = gf.NOISE_FLOOR) -> Dict[MultiIndex, float]:
    g = f.trimmed(floor)
    G = gf.cheb_gram(f.P)
    ks = 1j * gf.TWO_PI * np.arange(-f.K, f.K + 1)
    out = {}
    for a1 in range(n_max + 1):
        c = g.coeffs * (ks ** a1)[:, None]
        for a2 in range(n_max - a1 + 1):
            q = np.einsum("kp,pq,kq->", c.conj(), G, c).real
            out[(a1, a2)] = math.sqrt(max(q, 0.0))
            c = gf.cheb_diff_coeffs(c)
    return out


def conditioning_cap(u: Field, rtol: float = 1e-2, limit: int = 24) -> int:
    """Largest order (at most limit) for which every component's derivatives are trustworthy."""
    if not is_grid(u):
        return limit
    return derivative_table(u, limit, rtol=rtol, check_cap=False).cap


def _cap_from_table(entries, errors, n_max: int, rtol: float) -> int:
    scale = entries[(0, 0)]
    if scale == 0:
        return n_max
    cap = 0
    for n in range(1, n_max + 1):
        if any(errors[a] > rtol * max(entries[a], scale) for a in multi_indices(n)):
            return cap
        cap = n
    return cap


def _relative_floor(f: GridField, noise: float) -> Optional[float]:
    """Trim level relative to max|c|; None when the component is all noise."""
    top = float(np.abs(f.coeffs).max(initial=0.0))
    if noise <= 0:
        return gf.NOISE_FLOOR
    if top <= noise:
        return None
    return max(gf.NOISE_FLOOR, noise / top)


def derivative_table(u: Field, n_max: Optional[int] = None, rtol: float = 1e-2,
                     check_cap: bool = True, noise: float = 0.0) -> DerivativeTable:
    """All ||d^a u|| for |a| <= n_max.

    Mode fields are differentiated exactly.  Grid fields are differentiated
    spectrally after trimming the roundoff tail; orders beyond the conditioning
    cap (estimated relative error above rtol) are refused.  ``noise`` is an
    absolute coefficient noise level, for fields obtained by cancellation
    (differences of nearby states); components below it count as zero.
    """
    if n_max is None:
        n_max = default_n_max(u)
    comps = _scalar_components(u)
    if is_grid(u):
        floors = [_relative_floor(c, noise) for c in comps]
        zero = {a: 0.0 for n in range(n_max + 1) for a in multi_indices(n)}
        tabs = [zero if fl is None else _grid_table(c, n_max, fl) for c, fl in zip(comps, floors)]
        errs_c = [zero if fl is None else {a: gf.diff_error_estimate(c, a, fl) for a in tabs[0]}
                  for c, fl in zip(comps, floors)]
        errors = {a: math.sqrt(sum(e[a] ** 2 for e in errs_c)) for a in tabs[0]}
        entries = {a: math.sqrt(sum(t[a] ** 2 for t in tabs)) for a in tabs[0]}
        # each component must be trustworthy on its own scale
        cap = min(_cap_from_table(t, e, n_max, rtol) for t, e in zip(tabs, errs_c))
        if check_cap and cap < n_max:
            raise ConditioningError(n_max, cap)
        return DerivativeTable(n_max, entries, errors, cap, "grid")
    tabs = [_mode_table(c, n_max) for c in comps]
    entries = {a: math.sqrt(sum(t[a] ** 2 for t in tabs)) for a in tabs[0]}
    return DerivativeTable(n_max, entries, {a: 0.0 for a in entries}, None, "mode")


def _as_table(u, n_max=None) -> DerivativeTable:
    if isinstance(u, DerivativeTable):
        return u if n_max is None or n_max == u.n_max else u.restricted(n_max)
    return derivative_table(u, n_max)


def norm_from_table(t: DerivativeTable, p: NormParams, which: str) -> float:
    n_max = t.n_max
    if which == "Hr":
        return sum(t.entries[a] for n in range(min(p.r, n_max) + 1) for a in multi_indices(n))
    if which == "X":
        return sum(coeff_flat(a, p, "X") * t.entries[a]
                   for n in range(p.r, n_max + 1) for a in multi_indices(n))
    if which == "Y":
        return sum(coeff_flat(a, p, "Y") * t.entries[a]
                   for n in range(p.r + 1, n_max + 1) for a in multi_indices(n))
    if which == "Xt":
        return norm_from_table(t, p, "X") + norm_from_table(t, p, "Hr")
    if which == "Yt":
        return p.tau * norm_from_table(t, p, "Y") + norm_from_table(t, p, "Hr")
    if which == "Yb":
        return norm_from_table(t, p, "Y") + norm_from_table(t, p, "Hr")
    raise ValueError(f"unknown norm family {which!r}; expected one of {FAMILIES}")


def norm_error_from_table(t: DerivativeTable, p: NormParams, which: str) -> float:
    """The norm sum applied to the per-entry error estimates (zero for mode tables)."""
    if not t.errors:
        return 0.0
    return norm_from_table(DerivativeTable(t.n_max, t.errors), p, _canonical(which))


def norm(u, p: NormParams, which: str = "X") -> float:
    """Truncated norm of a field (or of a precomputed DerivativeTable) at order p.n_max."""
    which = _canonical(which)
    return norm_from_table(_as_table(u, p.n_max), p, which)


def all_norms(u, p: NormParams) -> Dict[str, float]:
    t = _as_table(u, p.n_max)
    return {w: norm_from_table(t, p, w) for w in FAMILIES}


def _canonical(which: str) -> str:
    alias = {"X~": "Xt", "Y~": "Yt", "Y-": "Yb", "Ybar": "Yb", "Xtilde": "Xt", "Ytilde": "Yt", "H^r": "Hr"}
    return alias.get(which, which)


def tail_bound(t: DerivativeTable, p: NormParams, which: str = "X") -> float:
    """Heuristic size of the first omitted order.

    (N+2) * c_{N+1} * m_{N+1}, where c_{N+1} is the largest order-(N+1)
    coefficient and m_{N+1} = m_N^2 / m_{N-1} extrapolates the per-order
    maximum ||d^a u|| geometrically.  An honesty indicator, not a bound proved
    for every field.
    """
    n = t.n_max
    family = "Y" if _canonical(which) in ("Y", "Yt", "Yb") else "X"
    m_n, m_prev = t.order_max(n), t.order_max(n - 1)
    if m_n == 0:
        return 0.0
    m_next = m_n * m_n / m_prev if m_prev > 0 else m_n
    c = coeff_flat((n + 1, 0), p, family)
    if _canonical(which) == "Yt":
        c *= p.tau
    return (n + 2) * c * m_next


def grad_embedding_ratio(u, p: NormParams) -> float:
    """(||d1 u||_X~ + ||d2 u||_X~) / ||u||_Y- with the gradient tables at order N_max - 1."""
    t = _as_table(u, p.n_max)
    den = norm_from_table(t, p, "Yb")
    if den == 0:
        raise ZeroDivisionError("grad_embedding_ratio: ||u||_Y- vanishes")
    pg = p.with_(n_max=p.n_max - 1) if p.n_max - 1 >= p.r + 2 else None
    if pg is None:
        raise ValueError("n_max too small for the gradient tables")
    num = sum(norm_from_table(t.shifted(ax), pg, "Xt") for ax in (1, 2))
    return num / den


# ---------------------------------------------------------------------------
# CSV rows


NORM_CSV_HEADER = ("time", "tau", "family", "value", "truncation_tail_bound")


def norm_rows(u, p: NormParams, time: float = 0.0,
              families: Iterable[str] = FAMILIES) -> List[tuple]:
    t = _as_table(u, p.n_max)
    rows = []
    for w in families:
        w = _canonical(w)
        tail = 0.0 if w == "Hr" else tail_bound(t, p, w)
        rows.append((time, p.tau, FAMILY_LABELS[w], norm_from_table(t, p, w), tail))
    return rows
