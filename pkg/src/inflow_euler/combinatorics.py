"""Exact certification of the index inequalities behind the product estimate.

Everything here is integer or Fraction arithmetic; no floats.  Sweeps run in a
fixed lexicographic order so reports are reproducible byte for byte.

Exponents of tau in the low and high coefficients (n = |alpha|, b = |beta|,
d = n - b, x+ = max(x, 0)):

    low : (n - r) - (b - r)+/2 - (b + 2 - r)+/2 - (d + 1 - r - 1)+
    high: (n - r) - (b - r - 1)+ - (d + 1 - r)+/2 - (d + 3 - r)+/2
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, List, Optional, Sequence, Tuple


class PreconditionError(ValueError):
    pass


def _pos(x) -> int:
    return x if x > 0 else 0


@dataclass(frozen=True)
class ExponentClaim:
    case: str
    indices: Tuple[int, ...]
    exponent: Fraction
    claimed: int

    @property
    def holds(self) -> bool:
        return self.exponent >= self.claimed


@dataclass
class CertificateReport:
    name: str
    range_desc: str
    instances: int = 0
    violations: List[tuple] = field(default_factory=list)
    sup: Optional[Fraction] = None
    argsup: Optional[tuple] = None
    note: str = ""

    @property
    def verified(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "inequality": self.name,
            "range": self.range_desc,
            "instances": self.instances,
            "violations": [list(map(str, v)) for v in self.violations[:20]],
            "violation_count": len(self.violations),
            "sup": None if self.sup is None else str(self.sup),
            "argsup": None if self.argsup is None else list(self.argsup),
            "verified": self.verified,
            "note": self.note,
        }


# ---------------------------------------------------------------------------
# tau exponents


def _check_low(n: int, b: int, r: int):
    if not (0 < b and 2 * b <= n and n >= r):
        raise PreconditionError(f"low sum needs 0 < |beta| <= |alpha|/2 and |alpha| >= r; got {(n, b, r)}")


def _check_high(n: int, b: int, r: int):
    if not (2 * b > n and b <= n and n >= r):
        raise PreconditionError(f"high sum needs |alpha|/2 < |beta| <= |alpha| and |alpha| >= r; got {(n, b, r)}")


def bl_exponent(n: int, b: int, r: int) -> Fraction:
    """Exponent of tau in the low coefficient."""
    _check_low(n, b, r)
    return (Fraction(n - r) - Fraction(_pos(b - r), 2) - Fraction(_pos(b + 2 - r), 2)
            - _pos(n - b + 1 - r - 1))


def bl_exponent_unclamped(n: int, b: int, r: int) -> Fraction:
    """Low exponent with the clamps of the beta terms dropped and no third factor.

    This is the bound n - b - 1 obtained when |alpha - beta| <= r - 1 by
    subtracting (b - r)/2 and (b + 2 - r)/2 without clamping.  It is not a
    lower bound for bl_exponent when b < r; both are >= 0 in that branch.
    """
    _check_low(n, b, r)
    return Fraction(n - r) - Fraction(b - r, 2) - Fraction(b + 2 - r, 2)


def bh_exponent(n: int, b: int, r: int) -> Fraction:
    """Exponent of tau in the high coefficient."""
    _check_high(n, b, r)
    d = n - b
    return (Fraction(n - r) - _pos(b - r - 1) - Fraction(_pos(d + 1 - r), 2)
            - Fraction(_pos(d + 3 - r), 2))


def bl_claim(n: int, b: int, r: int) -> ExponentClaim:
    e = bl_exponent(n, b, r)
    far = n - b >= r
    return ExponentClaim("low, |alpha-beta| >= r" if far else "low, |alpha-beta| <= r-1",
                         (n, b, r), e, 1 if far else 0)


def bh_claim(n: int, b: int, r: int) -> ExponentClaim:
    e = bh_exponent(n, b, r)
    big = b >= r + 1
    return ExponentClaim("high, |beta| >= r+1" if big else "high, |beta| <= r", (n, b, r), e, 1 if big else 0)


def _low_pairs(n_max: int, r: int) -> Iterator[Tuple[int, int]]:
    for n in range(r, n_max + 1):
        for b in range(1, n // 2 + 1):
            yield n, b


def _high_pairs(n_max: int, r: int) -> Iterator[Tuple[int, int]]:
    for n in range(r, n_max + 1):
        for b in range(n // 2 + 1, n + 1):
            yield n, b


def verify_bl(n_max: int = 200, r: int = 3) -> CertificateReport:
    rep = CertificateReport("tau exponent, low sum", f"r={r}, r <= |alpha| <= {n_max}, 0 < |beta| <= |alpha|/2")
    for n, b in _low_pairs(n_max, r):
        c = bl_claim(n, b, r)
        rep.instances += 1
        if not c.holds:
            rep.violations.append((c.case, c.indices, c.exponent))
    return rep


def verify_bh(n_max: int = 200, r: int = 3) -> CertificateReport:
    rep = CertificateReport("tau exponent, high sum", f"r={r}, r <= |alpha| <= {n_max}, |alpha|/2 < |beta| <= |alpha|")
    for n, b in _high_pairs(n_max, r):
        c = bh_claim(n, b, r)
        rep.instances += 1
        if not c.holds:
            rep.violations.append((c.case, c.indices, c.exponent))
    return rep


def curved_claims(s: int, t: int, r: int) -> ExponentClaim:
    """Two-case table with (i + j, n + l) = (s, t) in place of (|alpha|, |beta|)."""
    if s < r or t <= 0 or t > s:
        raise PreconditionError(f"need i+j >= r and 0 < n+l <= i+j; got {(s, t, r)}")
    if 2 * t <= s:
        e = (Fraction(s - r) - Fraction(_pos(t - r), 2) - Fraction(_pos(t + 2 - r), 2) - _pos(s - t - r))
        far = s - t >= r
        return ExponentClaim("curved low, i+j-n-l >= r" if far else "curved low, i+j-n-l <= r-1",
                             (s, t, r), e, 1 if far else 0)
    e = (Fraction(s - r) - _pos(t - r - 1) - Fraction(_pos(s - t + 1 - r), 2) - Fraction(_pos(s - t + 3 - r), 2))
    big = t >= r + 1
    return ExponentClaim("curved high, n+l >= r+1" if big else "curved high, n+l <= r", (s, t, r), e, 1 if big else 0)


def verify_curved_exponents(n_max: int = 200, r: int = 3) -> CertificateReport:
    """Exponents depend on (i, j, n, l) only through s = i + j and t = n + l."""
    rep = CertificateReport("tau exponent, curved table", f"r={r}, r <= i+j <= {n_max}, 0 < n+l <= i+j",
                            note="enumerated over (i+j, n+l); the exponents depend on nothing else")
    for s in range(r, n_max + 1):
        for t in range(1, s + 1):
            c = curved_claims(s, t, r)
            rep.instances += 1
            if not c.holds:
                rep.violations.append((c.case, c.indices, c.exponent))
    return rep


# ---------------------------------------------------------------------------
# factorial coefficients (certified through their squares)


def al_squared(n: int, b: int, r: int) -> Fraction:
    """a_l^2 from the factorial definition with |gamma| = 2, |kappa| = 1."""
    _check_low(n, b, r)
    d = n - b
    first = Fraction(n ** r, math.factorial(b) * math.factorial(d))
    middle = Fraction(math.factorial(b) * math.factorial(b + 2), b ** r * (b + 2) ** r)
    last = Fraction(math.factorial(d + 1), (d + 1) ** (r + 1))
    return first * first * middle * last * last


def ah_squared(n: int, b: int, r: int) -> Fraction:
    """a_h^2 from the factorial definition with |gamma| = 2, |kappa| = 1."""
    _check_high(n, b, r)
    d = n - b
    first = Fraction(n ** r, math.factorial(b) * math.factorial(d))
    middle = Fraction(math.factorial(b), b ** (r + 1))
    last = Fraction(math.factorial(d + 1) * math.factorial(d + 3), (d + 1) ** r * (d + 3) ** r)
    return first * first * middle * middle * last


def al_squared_reduced(n: int, b: int, r: int) -> Fraction:
    """Same value as al_squared with the factorials cancelled."""
    d = n - b
    return Fraction(n ** (2 * r) * (b + 1) * (b + 2), (d + 1) ** (2 * r) * b ** r * (b + 2) ** r)


def ah_squared_reduced(n: int, b: int, r: int) -> Fraction:
    """Same value as ah_squared with the factorials cancelled."""
    d = n - b
    return Fraction(n ** (2 * r) * (d + 1) ** 2 * (d + 2) * (d + 3),
                    b ** (2 * r + 2) * (d + 1) ** r * (d + 3) ** r)


def al_value(n: int, b: int, r: int) -> Fraction:
    """Exact a_l^2; a_l itself is its square root."""
    return al_squared(n, b, r)


def ah_value(n: int, b: int, r: int) -> Fraction:
    """Exact a_h^2; a_h itself is its square root."""
    return ah_squared(n, b, r)


def sup_over(which: str, n_max: int = 200, r: int = 3) -> CertificateReport:
    """Exact supremum of a_l^2 or a_h^2 over r <= |alpha| <= n_max, ties broken by first index."""
    if which == "al":
        pairs, fn = _low_pairs(n_max, r), al_squared_reduced
    elif which == "ah":
        pairs, fn = _high_pairs(n_max, r), ah_squared_reduced
    else:
        raise ValueError("which must be 'al' or 'ah'")
    rep = CertificateReport(f"sup of {which}^2", f"r={r}, r <= |alpha| <= {n_max}",
                            note="empirical certificate: finite, attained early, stable under range doubling")
    for n, b in pairs:
        v = fn(n, b, r)
        rep.instances += 1
        if rep.sup is None or v > rep.sup:
            rep.sup, rep.argsup = v, (n, b)
    return rep


def order_envelope(which: str, n_max: int = 200, r: int = 3) -> List[Fraction]:
    """max over |beta| of the squared coefficient, for each |alpha| = r..n_max."""
    fn, lo = (al_squared_reduced, True) if which == "al" else (ah_squared_reduced, False)
    out = []
    for n in range(r, n_max + 1):
        bs = range(1, n // 2 + 1) if lo else range(n // 2 + 1, n + 1)
        out.append(max((fn(n, b, r) for b in bs), default=Fraction(0)))
    return out


def verify_envelope(which: str, n_max: int = 200, r: int = 3, settle: int = 50) -> CertificateReport:
    """Per-order maxima beyond |alpha| = settle never exceed the overall supremum and do not grow.

    'Do not grow' means every order beyond settle is at most the largest
    value seen in the first settle orders, and the envelope over the second
    half of the range is at most the envelope over the first half.
    """
    env = order_envelope(which, n_max, r)
    rep = CertificateReport(f"envelope of {which}^2", f"r={r}, r <= |alpha| <= {n_max}, settle={settle}")
    head = max(env[:max(settle - r + 1, 1)])
    half = len(env) // 2
    for i, v in enumerate(env):
        rep.instances += 1
        if v > head:
            rep.violations.append(("exceeds early max", (i + r,), v))
    if max(env[half:]) > max(env[:half]):
        rep.violations.append(("late half above early half", (half + r,), max(env[half:])))
    rep.sup = head
    return rep


# ---------------------------------------------------------------------------
# eps exponents


def _admissible(alpha, beta, gamma, kappa):
    if len(alpha) != 2 or len(beta) != 2 or len(gamma) != 2 or len(kappa) != 2:
        raise PreconditionError("multi-indices must have two components")
    if min(*alpha, *beta, *gamma, *kappa) < 0:
        raise PreconditionError("multi-index components must be nonnegative")
    if sum(gamma) != 2 or sum(kappa) != 1:
        raise PreconditionError("need |gamma| = 2 and |kappa| = 1")
    if beta[0] > alpha[0] or beta[1] > alpha[1]:
        raise PreconditionError("need beta <= alpha componentwise")


def eps_exponent_twice(alpha, beta, gamma, kappa, r: int) -> int:
    """Twice the total eps exponent for the branch selected by |beta| vs |alpha|/2."""
    _admissible(alpha, beta, gamma, kappa)
    na, nb = sum(alpha), sum(beta)
    d2 = alpha[1] - beta[1] + kappa[1]
    nd = na - nb + 1
    if 2 * nb <= na:
        e = (2 * alpha[1] - beta[1] * (nb >= r) - (beta[1] + gamma[1]) * (nb + 2 >= r)
             - 2 * d2 * (nd >= r + 1))
    else:
        e = (2 * alpha[1] - 2 * beta[1] * (nb >= r + 1) - d2 * (nd >= r)
             - (d2 + gamma[1]) * (nd + 2 >= r))
    return e


def verify_epsilon_bound(alpha, beta, gamma, kappa, r: int, eps=Fraction(1, 10)) -> bool:
    """eps-power bound: exponent >= -gamma2/2 - kappa2 >= -2, so the product is <= eps^-2.

    Checked as integers (doubled exponents) and, for the given eps, as the
    exact rational inequality eps^(2E) <= eps^(-4).
    """
    eps = Fraction(eps)
    if not 0 < eps < 1:
        raise PreconditionError("eps must lie in (0, 1)")
    e2 = eps_exponent_twice(alpha, beta, gamma, kappa, r)
    lower2 = -gamma[1] - 2 * kappa[1]
    return e2 >= lower2 and lower2 >= -4 and eps ** e2 <= eps ** -4


GAMMAS = ((2, 0), (1, 1), (0, 2))
KAPPAS = ((1, 0), (0, 1))


def verify_epsilon_sweep(n_max: int = 40, r: int = 3) -> CertificateReport:
    rep = CertificateReport("eps exponent", f"r={r}, |alpha| <= {n_max}, all beta <= alpha, |gamma|=2, |kappa|=1")
    for n in range(n_max + 1):
        for a1 in range(n, -1, -1):
            alpha = (a1, n - a1)
            for b1 in range(alpha[0] + 1):
                for b2 in range(alpha[1] + 1):
                    if b1 + b2 == 0:
                        continue
                    beta = (b1, b2)
                    for gamma in GAMMAS:
                        for kappa in KAPPAS:
                            rep.instances += 1
                            e2 = eps_exponent_twice(alpha, beta, gamma, kappa, r)
                            if e2 < -gamma[1] - 2 * kappa[1]:
                                rep.violations.append((alpha, beta, gamma, kappa, Fraction(e2, 2)))
    return rep


# ---------------------------------------------------------------------------
# identities and elementary inequalities


def sub_multi_indices(alpha: Sequence[int], k: int) -> Iterator[Tuple[int, ...]]:
    for a in itertools.product(*(range(x + 1) for x in alpha)):
        if sum(a) == k:
            yield a


def komatsu_sum(alpha: Sequence[int], k: int) -> int:
    return sum(math.prod(math.comb(x, y) for x, y in zip(alpha, a)) for a in sub_multi_indices(alpha, k))


def verify_komatsu_identity(alpha: Sequence[int], k: int) -> bool:
    m = sum(alpha)
    if not 0 <= k <= m:
        raise PreconditionError(f"need 0 <= k <= |alpha| = {m}")
    return komatsu_sum(alpha, k) == math.comb(m, k)


def verify_komatsu_sweep(m_max: int = 10) -> CertificateReport:
    rep = CertificateReport("sub-multi-index binomial identity", f"dimension 2, |alpha| <= {m_max}, 0 <= k <= |alpha|")
    for m in range(m_max + 1):
        for a1 in range(m, -1, -1):
            for k in range(m + 1):
                rep.instances += 1
                if not verify_komatsu_identity((a1, m - a1), k):
                    rep.violations.append(((a1, m - a1), k))
    return rep


def verify_binomial_inequality(m: int, l: int, i: int, j: int) -> bool:
    if not (min(m, l) >= 0 and i >= m + 2 and j >= l):
        raise PreconditionError(f"need i >= m + 2 and j >= l; got {(m, l, i, j)}")
    return math.comb(m + 2 + l, m + 2) <= math.comb(i + j, i)


def verify_binomial_sweep(n_max: int = 30) -> CertificateReport:
    rep = CertificateReport("binomial monotonicity", f"0 <= m, l, i, j <= {n_max}, i >= m+2, j >= l")
    for m in range(n_max + 1):
        for l in range(n_max + 1):
            lhs = math.comb(m + 2 + l, m + 2)
            for i in range(m + 2, n_max + 1):
                for j in range(l, n_max + 1):
                    rep.instances += 1
                    if lhs > math.comb(i + j, i):
                        rep.violations.append((m, l, i, j))
    return rep


def verify_elementary_inequality(a: int, b: int) -> bool:
    """a / b <= 2 (a - b), checked as a <= 2 b (a - b)."""
    if not (isinstance(a, int) and isinstance(b, int) and a >= b + 1 >= 2):
        raise PreconditionError(f"need integers with a >= b + 1 >= 2; got {(a, b)}")
    return Fraction(a, b) <= 2 * (a - b)


def verify_elementary_sweep(n_max: int = 1000) -> CertificateReport:
    rep = CertificateReport("a/b <= 2(a-b)", f"1 <= b < a <= {n_max}")
    for b in range(1, n_max + 1):
        for a in range(b + 1, n_max + 1):
            rep.instances += 1
            if a > 2 * b * (a - b):
                rep.violations.append((a, b))
    return rep


# ---------------------------------------------------------------------------


def ledger(n_max: int = 200, rs: Sequence[int] = (3, 4, 5), binomial_max: int = 30,
           elementary_max: int = 1000, komatsu_max: int = 10) -> List[CertificateReport]:
    """Every certificate at the given ranges, in a fixed order."""
    out: List[CertificateReport] = []
    for r in rs:
        out.append(verify_bl(n_max, r))
        out.append(verify_bh(n_max, r))
        out.append(verify_curved_exponents(n_max, r))
    for r in rs:
        for which in ("al", "ah"):
            small = sup_over(which, n_max, r)
            big = sup_over(which, 2 * n_max, r)
            rep = CertificateReport(f"sup of {which}^2 stable under doubling",
                                    f"r={r}, |alpha| <= {n_max} vs <= {2 * n_max}",
                                    instances=small.instances + big.instances,
                                    sup=small.sup, argsup=small.argsup)
            if small.sup != big.sup:
                rep.violations.append(("sup changed", small.sup, big.sup))
            out.append(rep)
    out.append(verify_komatsu_sweep(komatsu_max))
    out.append(verify_binomial_sweep(binomial_max))
    out.append(verify_elementary_sweep(elementary_max))
    return out
