"""Exact separable-mode fields on the periodic channel T x (0, 1).

A :class:`ModeField` is a finite sum of terms ``amp * exp(2 pi i k x1) * phi(x2)``
where ``phi`` is one of the vertical basis functions of :class:`VerticalBasis`.
The x1 period is 1.  Derivatives are closed form; products of trig-pure fields
are computed with product-to-sum identities.

Vertical basis functions
------------------------
``cos``   cos(m pi x2),  m >= 1           (m = 0 normalizes to ``pow`` 0)
``sin``   sin(m pi x2),  m >= 1
``cosh``  cosh(mu (x2 - anchor)),  anchor in {0, 1}
``sinh``  sinh(mu (x2 - anchor))
``pow``   x2**n,  n >= 0                  (``One`` is n = 0, ``X2`` is n = 1)

Hyperbolic terms anchored at the top wall keep Neumann lifts with large
wavenumbers well conditioned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Tuple

import numpy as np
from scipy.signal import convolve2d

TWO_PI = 2.0 * math.pi

TRIG_TAGS = ("cos", "sin")
HYPERBOLIC_TAGS = ("cosh", "sinh")


class NotTrigPureError(ValueError):
    """Raised when an operation needs a trig-pure field and got something else."""


@dataclass(frozen=True, order=True)
class VerticalBasis:
    tag: str
    param: float
    anchor: int = 0

    def __post_init__(self):
        if self.tag not in ("cos", "sin", "cosh", "sinh", "pow"):
            raise ValueError(f"unknown vertical basis tag {self.tag!r}")
        if self.tag in ("cos", "sin", "pow"):
            if int(self.param) != self.param:
                raise ValueError(f"{self.tag} needs an integer parameter, got {self.param}")
            object.__setattr__(self, "param", int(self.param))
        if self.anchor not in (0, 1):
            raise ValueError("anchor must be 0 or 1")
        if self.tag not in HYPERBOLIC_TAGS and self.anchor != 0:
            raise ValueError("only hyperbolic terms carry an anchor")

    @property
    def is_trig(self) -> bool:
        return self.tag in TRIG_TAGS or (self.tag == "pow" and self.param == 0)

    @property
    def frequency_index(self) -> int:
        if self.tag in HYPERBOLIC_TAGS:
            return int(math.ceil(abs(self.param)))
        return int(self.param)

    def __call__(self, x2):
        x2 = np.asarray(x2, dtype=float)
        if self.tag == "cos":
            return np.cos(self.param * math.pi * x2)
        if self.tag == "sin":
            return np.sin(self.param * math.pi * x2)
        if self.tag == "cosh":
            return np.cosh(self.param * (x2 - self.anchor))
        if self.tag == "sinh":
            return np.sinh(self.param * (x2 - self.anchor))
        return x2 ** self.param

    def at_wall(self, side: str) -> float:
        """Exact value at x2 = 0 ('bottom') or x2 = 1 ('top')."""
        x = _side_coordinate(side)
        if self.tag == "cos":
            return 1.0 if x == 0 else (-1.0) ** self.param
        if self.tag == "sin":
            return 0.0
        if self.tag == "pow":
            return 1.0 if self.param == 0 else float(x)
        return float(self(float(x)))

    def derivative(self) -> List[Tuple["VerticalBasis", float]]:
        m = self.param
        if self.tag == "cos":
            return [(Sin(m), -m * math.pi)]
        if self.tag == "sin":
            return [(Cos(m), m * math.pi)]
        if self.tag == "cosh":
            return [(Sinh(m, self.anchor), m)]
        if self.tag == "sinh":
            return [(Cosh(m, self.anchor), m)]
        if m == 0:
            return []
        return [(Pow(m - 1), float(m))]

    def label(self) -> str:
        if self.tag in HYPERBOLIC_TAGS and self.anchor == 1:
            return f"{self.tag}@1"
        return self.tag


def Cos(m: int) -> VerticalBasis:
    return VerticalBasis("cos", m)


def Sin(m: int) -> VerticalBasis:
    return VerticalBasis("sin", m)


def Cosh(mu: float, anchor: int = 0) -> VerticalBasis:
    return VerticalBasis("cosh", float(mu), anchor)


def Sinh(mu: float, anchor: int = 0) -> VerticalBasis:
    return VerticalBasis("sinh", float(mu), anchor)


def Pow(n: int) -> VerticalBasis:
    return VerticalBasis("pow", n)


def One() -> VerticalBasis:
    return Pow(0)


def X2() -> VerticalBasis:
    return Pow(1)


def _side_coordinate(side: str) -> int:
    if side == "bottom":
        return 0
    if side == "top":
        return 1
    raise ValueError(f"side must be 'bottom' or 'top', got {side!r}")


def _normalize(vb: VerticalBasis, amp: complex) -> Optional[Tuple[VerticalBasis, complex]]:
    tag, p = vb.tag, vb.param
    if tag == "cos":
        return (One(), amp) if p == 0 else (Cos(abs(p)), amp)
    if tag == "sin":
        if p == 0:
            return None
        return (Sin(-p), -amp) if p < 0 else (vb, amp)
    if tag == "cosh":
        return (One(), amp) if p == 0 else (Cosh(abs(p), vb.anchor), amp)
    if tag == "sinh":
        if p == 0:
            return None
        return (Sinh(-p, vb.anchor), -amp) if p < 0 else (vb, amp)
    if p < 0:
        raise ValueError("negative power")
    return vb, amp


Key = Tuple[int, VerticalBasis]


class ModeField:
    """Finite sum of separable modes; value semantics, never mutated after build."""

    __slots__ = ("_terms",)

    def __init__(self, terms: Iterable[Tuple[int, VerticalBasis, complex]] = ()):
        acc: Dict[Key, complex] = {}
        for k, vb, amp in terms:
            norm = _normalize(vb, complex(amp))
            if norm is None:
                continue
            vb, amp = norm
            key = (int(k), vb)
            acc[key] = acc.get(key, 0j) + amp
        self._terms = {key: a for key, a in sorted(acc.items()) if a != 0}

    # construction helpers -------------------------------------------------
    @classmethod
    def zero(cls) -> "ModeField":
        return cls()

    @classmethod
    def constant(cls, c: complex) -> "ModeField":
        return cls([(0, One(), c)])

    @classmethod
    def mode(cls, k: int, vb: VerticalBasis, amp: complex = 1.0) -> "ModeField":
        return cls([(k, vb, amp)])

    @classmethod
    def cos_x1(cls, k: int, vb: VerticalBasis, amp: float = 1.0) -> "ModeField":
        """amp * cos(2 pi k x1) * vb(x2) as a conjugate-symmetric pair."""
        if k == 0:
            return cls([(0, vb, amp)])
        return cls([(k, vb, amp / 2), (-k, vb, amp / 2)])

    @classmethod
    def sin_x1(cls, k: int, vb: VerticalBasis, amp: float = 1.0) -> "ModeField":
        if k == 0:
            return cls()
        return cls([(k, vb, amp / 2j), (-k, vb, -amp / 2j)])

    # container protocol ---------------------------------------------------
    def terms(self) -> Iterator[Tuple[int, VerticalBasis, complex]]:
        for (k, vb), a in self._terms.items():
            yield k, vb, a

    def items(self):
        return self._terms.items()

    def __len__(self) -> int:
        return len(self._terms)

    def __bool__(self) -> bool:
        return bool(self._terms)

    def __repr__(self) -> str:
        body = ", ".join(f"({k}, {vb.label()}({vb.param}), {a:.6g})" for k, vb, a in self.terms())
        return f"ModeField([{body}])"

    def amplitude(self, k: int, vb: VerticalBasis) -> complex:
        norm = _normalize(vb, 1.0)
        if norm is None:
            return 0j
        return self._terms.get((k, norm[0]), 0j) * norm[1]

    @property
    def is_trig_pure(self) -> bool:
        return all(vb.is_trig for (_, vb) in self._terms)

    @property
    def max_k(self) -> int:
        return max((abs(k) for k, _ in self._terms), default=0)

    @property
    def max_vertical_index(self) -> int:
        return max((vb.frequency_index for _, vb in self._terms), default=0)

    # arithmetic ------------------------------------------------------------
    def __add__(self, other: "ModeField") -> "ModeField":
        if not isinstance(other, ModeField):
            return NotImplemented
        return ModeField(list(self.terms()) + list(other.terms()))

    def __sub__(self, other: "ModeField") -> "ModeField":
        return self + (-1.0) * other

    def __neg__(self) -> "ModeField":
        return (-1.0) * self

    def __mul__(self, c):
        if isinstance(c, ModeField):
            return multiply(self, c)
        return ModeField((k, vb, a * c) for k, vb, a in self.terms())

    __rmul__ = __mul__

    def conj(self) -> "ModeField":
        return ModeField((-k, vb, a.conjugate()) for k, vb, a in self.terms())

    def is_real(self, rtol: float = 1e-13) -> bool:
        """True when the k-spectrum is conjugate symmetric (real-valued field)."""
        scale = max((abs(a) for a in self._terms.values()), default=0.0)
        return all(abs(a - self.amplitude(-k, vb).conjugate()) <= rtol * scale
                   for k, vb, a in self.terms())

    def chop(self, rtol: float = 0.0, atol: float = 0.0) -> "ModeField":
        scale = max((abs(a) for a in self._terms.values()), default=0.0)
        cut = max(atol, rtol * scale)
        return ModeField((k, vb, a) for k, vb, a in self.terms() if abs(a) > cut)

    def is_zero(self, rtol: float = 0.0, scale: Optional[float] = None) -> bool:
        if scale is None:
            return not self._terms
        return all(abs(a) <= rtol * scale for a in self._terms.values())

    # evaluation ------------------------------------------------------------
    def __call__(self, x1, x2):
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        out = np.zeros(np.broadcast(x1, x2).shape, dtype=complex)
        for k, vb, a in self.terms():
            out = out + a * np.exp(1j * TWO_PI * k * x1) * vb(x2)
        return out

    def vertical_profile(self, k: int, x2) -> np.ndarray:
        x2 = np.asarray(x2, dtype=float)
        out = np.zeros(x2.shape, dtype=complex)
        for kk, vb, a in self.terms():
            if kk == k:
                out = out + a * vb(x2)
        return out

    def wavenumbers(self) -> List[int]:
        return sorted({k for k, _ in self._terms})

    def split_trig(self) -> Tuple["ModeField", "ModeField"]:
        trig = ModeField((k, vb, a) for k, vb, a in self.terms() if vb.is_trig)
        rest = ModeField((k, vb, a) for k, vb, a in self.terms() if not vb.is_trig)
        return trig, rest

    # serialization ------------------------------------------------------------
    def to_text(self) -> str:
        lines = ["# k basis param amp_re amp_im"]
        for k, vb, a in self.terms():
            lines.append(f"{k} {vb.label()} {vb.param!r} {a.real!r} {a.imag!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ModeField":
        terms = []
        for raw in text.splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            k, label, param, re_, im_ = line.split()
            tag, _, anchor = label.partition("@")
            p = float(param)
            vb = VerticalBasis(tag, int(p) if tag in ("cos", "sin", "pow") else p, int(anchor or 0))
            terms.append((int(k), vb, complex(float(re_), float(im_))))
        return cls(terms)


# ---------------------------------------------------------------------------
# operations


def differentiate(f: ModeField, axis: int) -> ModeField:
    """Exact term-wise derivative along x1 (axis 1) or x2 (axis 2)."""
    if axis == 1:
        return ModeField((k, vb, a * (TWO_PI * k) * 1j) for k, vb, a in f.terms() if k != 0)
    if axis == 2:
        out = []
        for k, vb, a in f.terms():
            for dvb, fac in vb.derivative():
                out.append((k, dvb, a * fac))
        return ModeField(out)
    raise ValueError(f"axis must be 1 or 2, got {axis}")


def derivative(f: ModeField, alpha: Tuple[int, int]) -> ModeField:
    for _ in range(alpha[0]):
        f = differentiate(f, 1)
    for _ in range(alpha[1]):
        f = differentiate(f, 2)
    return f


def _vertical_product(a: VerticalBasis, b: VerticalBasis) -> List[Tuple[VerticalBasis, float]]:
    if a.tag == "pow":  # One
        return [(b, 1.0)]
    if b.tag == "pow":
        return [(a, 1.0)]
    m, n = a.param, b.param
    if a.tag == "cos" and b.tag == "cos":
        return [(Cos(m - n), 0.5), (Cos(m + n), 0.5)]
    if a.tag == "sin" and b.tag == "sin":
        return [(Cos(m - n), 0.5), (Cos(m + n), -0.5)]
    if a.tag == "sin" and b.tag == "cos":
        return [(Sin(m + n), 0.5), (Sin(m - n), 0.5)]
    return [(Sin(m + n), 0.5), (Sin(n - m), 0.5)]


def multiply(f: ModeField, g: ModeField) -> ModeField:
    """Exact product of trig-pure fields via product-to-sum identities."""
    if not (f.is_trig_pure and g.is_trig_pure):
        raise NotTrigPureError("multiply needs trig-pure operands; project first")
    out = []
    for k, vb, a in f.terms():
        for l, wb, b in g.terms():
            for pb, c in _vertical_product(vb, wb):
                out.append((k + l, pb, a * b * c))
    return ModeField(out)


def _gauss_legendre_01(q: int) -> Tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(q)
    return 0.5 * (x + 1.0), 0.5 * w


def quadrature_nodes(*fields: ModeField) -> int:
    return 2 * max((f.max_vertical_index for f in fields), default=0) + 32


def l2_inner(f: ModeField, g: ModeField) -> complex:
    """Integral over the channel of f * conj(g)."""
    ft, fr = f.split_trig()
    gt, gr = g.split_trig()
    total = TrigArray.from_mode(ft).inner(TrigArray.from_mode(gt)) if (ft and gt) else 0j
    if not (fr or gr):
        return total
    x, w = _gauss_legendre_01(quadrature_nodes(f, g))
    for k in set(f.wavenumbers()) & set(g.wavenumbers()):
        fk_t, fk_r = ft.vertical_profile(k, x), fr.vertical_profile(k, x)
        gk = g.vertical_profile(k, x)
        gk_r = gr.vertical_profile(k, x)
        total += np.sum(w * (fk_t * np.conj(gk_r) + fk_r * np.conj(gk)))
    return complex(total)


def l2_norm(f: ModeField) -> float:
    if not f:
        return 0.0
    if f.is_trig_pure:
        return TrigArray.from_mode(f).norm()
    x, w = _gauss_legendre_01(quadrature_nodes(f))
    total = 0.0
    for k in f.wavenumbers():
        prof = f.vertical_profile(k, x)
        total += float(np.sum(w * np.abs(prof) ** 2))
    return math.sqrt(total)


def boundary_trace(f: ModeField, side: str) -> Dict[int, complex]:
    """x1-Fourier coefficients of f(., 0) or f(., 1); zero entries omitted."""
    out: Dict[int, complex] = {}
    for k, vb, a in f.terms():
        val = vb.at_wall(side)
        if val != 0.0:
            out[k] = out.get(k, 0j) + a * val
    return {k: v for k, v in sorted(out.items()) if v != 0}


def trace_l2(trace: Mapping[int, complex]) -> float:
    return math.sqrt(sum(abs(v) ** 2 for v in trace.values()))


@dataclass(frozen=True)
class VectorModeField:
    comp1: ModeField
    comp2: ModeField

    @classmethod
    def from_stream(cls, psi: ModeField) -> "VectorModeField":
        """Velocity (d2 psi, -d1 psi)."""
        return cls(differentiate(psi, 2), -differentiate(psi, 1))

    @classmethod
    def zero(cls) -> "VectorModeField":
        return cls(ModeField(), ModeField())

    def __iter__(self):
        yield self.comp1
        yield self.comp2

    def __add__(self, other: "VectorModeField") -> "VectorModeField":
        return VectorModeField(self.comp1 + other.comp1, self.comp2 + other.comp2)

    def __sub__(self, other: "VectorModeField") -> "VectorModeField":
        return VectorModeField(self.comp1 - other.comp1, self.comp2 - other.comp2)

    def __mul__(self, c) -> "VectorModeField":
        return VectorModeField(self.comp1 * c, self.comp2 * c)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def scale(self) -> float:
        return max((abs(a) for c in self for _, _, a in c.terms()), default=0.0)

    def divergence(self) -> ModeField:
        return differentiate(self.comp1, 1) + differentiate(self.comp2, 2)

    def is_divergence_free(self, rtol: float = 1e-14) -> bool:
        """Divergence cancels term-wise up to last-bit rounding of the factors."""
        div = self.divergence()
        scale = max(self.scale(), 1.0) * (TWO_PI * (self.comp1.max_k + 1)
                                          + math.pi * (self.comp2.max_vertical_index + 1))
        return div.is_zero(rtol=rtol, scale=scale)

    def normal_trace(self, side: str) -> Dict[int, complex]:
        return boundary_trace(self.comp2, side)

    def is_impermeable(self) -> bool:
        return not self.normal_trace("bottom") and not self.normal_trace("top")

    @property
    def is_trig_pure(self) -> bool:
        return self.comp1.is_trig_pure and self.comp2.is_trig_pure

    def derivative(self, alpha) -> "VectorModeField":
        return VectorModeField(derivative(self.comp1, alpha), derivative(self.comp2, alpha))

    def l2_norm(self) -> float:
        return math.hypot(l2_norm(self.comp1), l2_norm(self.comp2))


def advect(u: VectorModeField, w: ModeField) -> ModeField:
    """(u . grad) w for trig-pure operands."""
    return multiply(u.comp1, differentiate(w, 1)) + multiply(u.comp2, differentiate(w, 2))


# ---------------------------------------------------------------------------
# dense exponential form of trig-pure fields


def _odd_gram(m: np.ndarray) -> np.ndarray:
    """G[n, m] = integral_0^1 exp(i pi (m - n) x) dx."""
    d = m[None, :] - m[:, None]
    out = np.zeros(d.shape, dtype=complex)
    out[d == 0] = 1.0
    odd = (d % 2) != 0
    out[odd] = 2j / (math.pi * d[odd])
    return out


class TrigArray:
    """Trig-pure field as coefficients of exp(2 pi i k x1) exp(i pi m x2).

    ``c[k + K, m + M]`` for |k| <= K, |m| <= M.  cos(m pi x2) and sin(m pi x2)
    map to exponential pairs, so products become 2-D convolutions; every
    operation here is exact up to floating-point rounding.
    """

    __slots__ = ("c",)

    def __init__(self, c: np.ndarray):
        c = np.asarray(c, dtype=complex)
        if c.ndim != 2 or c.shape[0] % 2 == 0 or c.shape[1] % 2 == 0:
            raise ValueError("TrigArray needs odd-sized 2-D coefficients")
        self.c = c

    @property
    def K(self) -> int:
        return self.c.shape[0] // 2

    @property
    def M(self) -> int:
        return self.c.shape[1] // 2

    @classmethod
    def zeros(cls, K: int = 0, M: int = 0) -> "TrigArray":
        return cls(np.zeros((2 * K + 1, 2 * M + 1), dtype=complex))

    @classmethod
    def from_mode(cls, f: ModeField) -> "TrigArray":
        if not f.is_trig_pure:
            raise NotTrigPureError("TrigArray holds trig-pure fields only")
        K, M = f.max_k, f.max_vertical_index
        c = np.zeros((2 * K + 1, 2 * M + 1), dtype=complex)
        for k, vb, a in f.terms():
            i = k + K
            if vb.tag == "pow":
                c[i, M] += a
            elif vb.tag == "cos":
                c[i, M + vb.param] += a / 2
                c[i, M - vb.param] += a / 2
            else:
                c[i, M + vb.param] += a / 2j
                c[i, M - vb.param] -= a / 2j
        return cls(c)

    def to_mode(self) -> ModeField:
        K, M = self.K, self.M
        terms = []
        for i in range(2 * K + 1):
            k = i - K
            row = self.c[i]
            if row[M] != 0:
                terms.append((k, One(), row[M]))
            for m in range(1, M + 1):
                ap, am = row[M + m], row[M - m]
                if ap != 0 or am != 0:
                    terms.append((k, Cos(m), ap + am))
                    terms.append((k, Sin(m), 1j * (ap - am)))
        return ModeField(terms)

    def padded(self, K: int, M: int) -> "TrigArray":
        if K < self.K or M < self.M:
            raise ValueError("cannot pad to a smaller shape")
        out = np.zeros((2 * K + 1, 2 * M + 1), dtype=complex)
        out[K - self.K:K + self.K + 1, M - self.M:M + self.M + 1] = self.c
        return TrigArray(out)

    def __add__(self, other: "TrigArray") -> "TrigArray":
        K, M = max(self.K, other.K), max(self.M, other.M)
        return TrigArray(self.padded(K, M).c + other.padded(K, M).c)

    def __sub__(self, other: "TrigArray") -> "TrigArray":
        return self + other * -1.0

    def __mul__(self, other):
        if isinstance(other, TrigArray):
            return TrigArray(convolve2d(self.c, other.c, mode="full"))
        return TrigArray(self.c * other)

    __rmul__ = __mul__

    def diff(self, axis: int, order: int = 1) -> "TrigArray":
        if order == 0:
            return self
        if axis == 1:
            fac = (1j * TWO_PI * np.arange(-self.K, self.K + 1)) ** order
            return TrigArray(self.c * fac[:, None])
        if axis == 2:
            fac = (1j * math.pi * np.arange(-self.M, self.M + 1)) ** order
            return TrigArray(self.c * fac[None, :])
        raise ValueError(f"axis must be 1 or 2, got {axis}")

    def derivative(self, alpha) -> "TrigArray":
        return self.diff(1, alpha[0]).diff(2, alpha[1])

    def inner(self, other: "TrigArray") -> complex:
        K, M = max(self.K, other.K), max(self.M, other.M)
        a, b = self.padded(K, M).c, other.padded(K, M).c
        G = _odd_gram(np.arange(-M, M + 1))
        return complex(np.einsum("kn,nm,km->", b.conj(), G, a))

    def norm(self) -> float:
        return math.sqrt(max(self.inner(self).real, 0.0))

    def __call__(self, x1, x2):
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        e1 = np.exp(1j * TWO_PI * np.multiply.outer(x1, np.arange(-self.K, self.K + 1)))
        e2 = np.exp(1j * math.pi * np.multiply.outer(x2, np.arange(-self.M, self.M + 1)))
        return np.einsum("...k,km,...m->...", e1, self.c, e2)
