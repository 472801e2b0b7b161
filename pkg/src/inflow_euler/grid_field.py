"""Fourier (x1) x Chebyshev (x2) representation used by the time-dependent solver.

Coefficients ``coeffs[k + K, p]`` multiply ``exp(2 pi i k x1) T_p(2 x2 - 1)``.
Physical samples live on ``2K + 1`` equispaced x1 points and on the ``P + 1``
Chebyshev-Gauss-Lobatto points ``s_j = cos(pi j / P)`` (so row 0 is the top
wall x2 = 1 and row P the bottom wall x2 = 0).
"""

from __future__ import annotations

import functools
import math
import struct
import warnings
from dataclasses import dataclass
from typing import BinaryIO, Dict, Optional, Sequence, Tuple

import numpy as np
import scipy.fft

from .mode_field import ModeField, VectorModeField

TWO_PI = 2.0 * math.pi
EPS = np.finfo(float).eps

# trailing coefficients below this fraction of the largest one are roundoff
NOISE_FLOOR = 4 * EPS


class AliasingWarning(UserWarning):
    pass


class ConditioningError(ValueError):
    def __init__(self, requested: int, cap: int):
        super().__init__(f"derivative order {requested} exceeds the conditioning cap; "
                         f"max trustworthy order is {cap}")
        self.requested = requested
        self.cap = cap


# ---------------------------------------------------------------------------
# 1-D Chebyshev helpers on [0, 1]


def lobatto_points(P: int) -> np.ndarray:
    """x2 coordinates of the Chebyshev-Gauss-Lobatto points, top wall first."""
    return 0.5 * (np.cos(np.pi * np.arange(P + 1) / P) + 1.0)


def cheb_forward(values: np.ndarray, axis: int = -1) -> np.ndarray:
    """Lobatto samples -> Chebyshev coefficients (DCT-I)."""
    P = values.shape[axis] - 1
    a = scipy.fft.dct(values, type=1, axis=axis) / P
    a = np.moveaxis(a, axis, -1).copy()
    a[..., 0] *= 0.5
    a[..., -1] *= 0.5
    return np.moveaxis(a, -1, axis)


def cheb_backward(coeffs: np.ndarray, axis: int = -1) -> np.ndarray:
    """Chebyshev coefficients -> Lobatto samples (inverse of cheb_forward)."""
    a = np.moveaxis(np.asarray(coeffs), axis, -1).copy()
    a[..., 0] *= 2.0
    a[..., -1] *= 2.0
    v = scipy.fft.dct(a, type=1, axis=-1) * 0.5
    return np.moveaxis(v, -1, axis)


def cheb_diff_coeffs(a: np.ndarray) -> np.ndarray:
    """d/dx2 of a Chebyshev series along the last axis (includes the map factor 2)."""
    P = a.shape[-1] - 1
    b = np.zeros_like(a)
    if P == 0:
        return b
    b[..., P - 1] = 2 * P * a[..., P]
    for p in range(P - 1, 0, -1):
        b[..., p - 1] = (b[..., p + 1] if p + 1 <= P else 0) + 2 * p * a[..., p]
    b[..., 0] *= 0.5
    return 2.0 * b


@functools.lru_cache(maxsize=64)
def cheb_diff_matrix(P: int) -> np.ndarray:
    """Coefficient-space d/dx2 on degree <= P polynomials."""
    return cheb_diff_coeffs(np.eye(P + 1)).T


@functools.lru_cache(maxsize=64)
def cheb_gram(P: int) -> np.ndarray:
    """G[p, q] = integral_0^1 T_p T_q dx2."""
    def I(n):
        return 0.0 if n % 2 else 1.0 / (1.0 - n * n)
    G = np.empty((P + 1, P + 1))
    for p in range(P + 1):
        for q in range(P + 1):
            G[p, q] = 0.5 * (I(p + q) + I(abs(p - q)))
    return G


@functools.lru_cache(maxsize=64)
def cheb_integrals(P: int) -> np.ndarray:
    """w[p] = integral_0^1 T_p dx2."""
    n = np.arange(P + 1)
    w = np.zeros(P + 1)
    even = n % 2 == 0
    w[even] = 1.0 / (1.0 - n[even] ** 2)
    return w


@functools.lru_cache(maxsize=64)
def clenshaw_curtis_weights(P: int) -> np.ndarray:
    """Quadrature weights on [0, 1] for the Lobatto points of lobatto_points(P)."""
    # integrate the interpolant: weights = cheb_forward(I)^T integrals
    return cheb_forward(np.eye(P + 1), axis=0).T @ cheb_integrals(P)


@functools.lru_cache(maxsize=256)
def diff_operator_norm(P: int, order: int) -> float:
    """2-norm of (d/dx2)^order from coefficient l2 to L2(0, 1)."""
    if order == 0:
        return float(np.sqrt(np.linalg.norm(cheb_gram(P), 2)))
    D = np.linalg.matrix_power(cheb_diff_matrix(P), order)
    G = cheb_gram(P)
    return float(np.sqrt(np.linalg.norm(D.T @ G @ D, 2)))


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SamplingReport:
    max_k: int
    k_exceeded: bool
    cheb_tail: float

    @property
    def resolved(self) -> bool:
        return not self.k_exceeded and self.cheb_tail <= 1e-13


class GridField:
    """Complex coefficient array of shape (2K + 1, P + 1)."""

    __slots__ = ("K", "P", "coeffs")

    def __init__(self, K: int, P: int, coeffs: Optional[np.ndarray] = None):
        if coeffs is None:
            coeffs = np.zeros((2 * K + 1, P + 1), dtype=complex)
        coeffs = np.asarray(coeffs, dtype=complex)
        if coeffs.shape != (2 * K + 1, P + 1):
            raise ValueError(f"coefficient shape {coeffs.shape} does not match "
                             f"(2K+1, P+1) = {(2 * K + 1, P + 1)}")
        self.K, self.P, self.coeffs = K, P, coeffs

    @property
    def shape(self) -> Tuple[int, int]:
        return self.K, self.P

    def like(self, coeffs: np.ndarray) -> "GridField":
        return GridField(self.K, self.P, coeffs)

    def copy(self) -> "GridField":
        return self.like(self.coeffs.copy())

    def _check(self, other: "GridField"):
        if (self.K, self.P) != (other.K, other.P):
            raise ValueError(f"resolution mismatch {self.shape} vs {other.shape}")

    def __add__(self, other):
        if isinstance(other, GridField):
            self._check(other)
            return self.like(self.coeffs + other.coeffs)
        c = self.coeffs.copy()
        c[self.K, 0] += other
        return self.like(c)

    def __sub__(self, other):
        return self + (-1.0) * other

    def __neg__(self):
        return self.like(-self.coeffs)

    def __mul__(self, other):
        if isinstance(other, GridField):
            return product(self, other)
        return self.like(self.coeffs * other)

    __rmul__ = __mul__

    # physical space -----------------------------------------------------------
    def x1_points(self) -> np.ndarray:
        return np.arange(2 * self.K + 1) / (2 * self.K + 1)

    def x2_points(self) -> np.ndarray:
        return lobatto_points(self.P)

    def values(self) -> np.ndarray:
        """Samples on the (x1, x2) collocation grid, shape (2K + 1, P + 1)."""
        return to_values(self.coeffs, 2 * self.K + 1, self.P)

    @classmethod
    def from_values(cls, values: np.ndarray) -> "GridField":
        n1, n2 = values.shape
        if n1 % 2 == 0:
            raise ValueError("x1 sample count must be odd (2K + 1)")
        K, P = n1 // 2, n2 - 1
        c = np.fft.fftshift(np.fft.fft(values, axis=0) / n1, axes=0)
        return cls(K, P, cheb_forward(c, axis=1))

    def __call__(self, x1, x2):
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        ks = np.arange(-self.K, self.K + 1)
        e1 = np.exp(1j * TWO_PI * np.multiply.outer(x1, ks))
        s = 2.0 * x2 - 1.0
        T = np.polynomial.chebyshev.chebvander(s, self.P)
        return np.einsum("...k,kp,...p->...", e1, self.coeffs, T)

    def wall(self, side: str) -> np.ndarray:
        """x1-Fourier coefficients of the trace at x2 = 0 or 1."""
        if side == "top":
            return self.coeffs.sum(axis=1)
        if side == "bottom":
            sign = (-1.0) ** np.arange(self.P + 1)
            return self.coeffs @ sign
        raise ValueError(f"side must be 'bottom' or 'top', got {side!r}")

    def mean(self) -> complex:
        return complex(self.coeffs[self.K] @ cheb_integrals(self.P))

    def l2_norm(self) -> float:
        """Coefficient-space L2 norm (exact Chebyshev Gram matrix)."""
        return math.sqrt(max(self.inner(self).real, 0.0))

    def inner(self, other: "GridField") -> complex:
        self._check(other)
        G = cheb_gram(self.P)
        return complex(np.einsum("kp,pq,kq->", other.coeffs.conj(), G, self.coeffs))

    def quadrature_l2_norm(self) -> float:
        """L2 norm by Clenshaw-Curtis quadrature on a doubled Lobatto grid."""
        vals = to_values(pad(self, self.K, 2 * self.P).coeffs, 2 * self.K + 1, 2 * self.P)
        w = clenshaw_curtis_weights(2 * self.P)
        return math.sqrt(float(np.mean(np.abs(vals) ** 2 @ w)))

    def is_real(self, rtol: float = 1e-12) -> bool:
        flipped = self.coeffs[::-1].conj()
        return np.max(np.abs(self.coeffs - flipped), initial=0.0) <= rtol * max(
            np.max(np.abs(self.coeffs), initial=0.0), 1e-300)

    def real_part(self) -> "GridField":
        return self.like(0.5 * (self.coeffs + self.coeffs[::-1].conj()))

    def effective_support(self, floor: float = NOISE_FLOOR) -> Tuple[int, int]:
        """Largest |k| and p whose coefficients rise above floor * max."""
        mag = np.abs(self.coeffs)
        top = mag.max(initial=0.0)
        if top == 0:
            return 0, 0
        big = mag > floor * top
        ks = np.nonzero(big.any(axis=1))[0] - self.K
        ps = np.nonzero(big.any(axis=0))[0]
        return int(np.abs(ks).max()), int(ps.max())

    def trimmed(self, floor: float = NOISE_FLOOR) -> "GridField":
        """Zero the roundoff tail beyond the effective support (interior entries kept)."""
        k_eff, p_eff = self.effective_support(floor)
        c = np.zeros_like(self.coeffs)
        sl = slice(self.K - k_eff, self.K + k_eff + 1)
        c[sl, :p_eff + 1] = self.coeffs[sl, :p_eff + 1]
        return self.like(c)

    def __repr__(self):
        return f"GridField(K={self.K}, P={self.P}, |c|max={np.abs(self.coeffs).max():.3e})"


def to_values(coeffs: np.ndarray, n1: int, P: int) -> np.ndarray:
    """Evaluate (2K+1, P+1) coefficients on n1 equispaced x1 points x Lobatto(P)."""
    K = coeffs.shape[0] // 2
    if coeffs.shape[1] != P + 1:
        raise ValueError("Chebyshev degree mismatch")
    spec = np.zeros((n1, P + 1), dtype=complex)
    ks = np.arange(-K, K + 1)
    np.add.at(spec, ks % n1, coeffs)
    v = np.fft.ifft(spec, axis=0) * n1
    return cheb_backward(v, axis=1)


def from_values_n1(values: np.ndarray, K: int) -> np.ndarray:
    """Physical values on n1 >= 2K + 1 points -> (2K + 1, P + 1) coefficients."""
    n1 = values.shape[0]
    spec = np.fft.fft(values, axis=0) / n1
    ks = np.arange(-K, K + 1)
    return cheb_forward(spec[ks % n1], axis=1)


def pad(f: GridField, K: int, P: int) -> GridField:
    c = np.zeros((2 * K + 1, P + 1), dtype=complex)
    c[K - f.K:K + f.K + 1, :f.P + 1] = f.coeffs
    return GridField(K, P, c)


def truncate(f: GridField, K: int, P: int) -> GridField:
    return GridField(K, P, f.coeffs[f.K - K:f.K + K + 1, :P + 1].copy())


def resample(f: GridField, K: int, P: int) -> GridField:
    """Zero-pad or truncate to a new resolution."""
    c = np.zeros((2 * K + 1, P + 1), dtype=complex)
    kk, pp = min(K, f.K), min(P, f.P)
    c[K - kk:K + kk + 1, :pp + 1] = f.coeffs[f.K - kk:f.K + kk + 1, :pp + 1]
    return GridField(K, P, c)


# ---------------------------------------------------------------------------
# operations


def diff(f: GridField, axis: int, order: int = 1) -> GridField:
    c = f.coeffs
    if axis == 1:
        fac = (1j * TWO_PI * np.arange(-f.K, f.K + 1)) ** order
        return f.like(c * fac[:, None])
    if axis == 2:
        for _ in range(order):
            c = cheb_diff_coeffs(c)
        return f.like(c)
    raise ValueError(f"axis must be 1 or 2, got {axis}")


def derivative(f: GridField, alpha: Sequence[int]) -> GridField:
    return diff(diff(f, 1, alpha[0]), 2, alpha[1])


def dealiased_size(K: int) -> int:
    """x1 sample count for the 3/2 rule: products of |k| <= K modes do not alias."""
    return 3 * K + 1 if K else 1


def product(f: GridField, g: GridField) -> GridField:
    """Pointwise product on a 3/2-padded x1 grid and a doubled Lobatto grid, truncated back."""
    f._check(g)
    K, P = f.K, f.P
    n1, P2 = dealiased_size(K), 2 * P
    fv = to_values(np.pad(f.coeffs, ((0, 0), (0, P))), n1, P2)
    gv = to_values(np.pad(g.coeffs, ((0, 0), (0, P))), n1, P2)
    c = from_values_n1(fv * gv, K)
    return GridField(K, P, c[:, :P + 1])


def product_values(fields: Sequence[GridField], K: int, P: int) -> list:
    """Values of several fields on the dealiasing grid of (K, P)."""
    n1, P2 = dealiased_size(K), 2 * P
    return [to_values(np.pad(f.coeffs, ((0, 0), (0, P2 - f.P))), n1, P2) for f in fields]


def values_to_field(values: np.ndarray, K: int, P: int) -> GridField:
    return GridField(K, P, from_values_n1(values, K)[:, :P + 1])


def sampling_report(f: ModeField, K: int, P: int) -> SamplingReport:
    g = _sample(f, K, P)
    tail = np.abs(g.coeffs[:, -2:]).max(initial=0.0) / max(np.abs(g.coeffs).max(initial=0.0), 1e-300)
    return SamplingReport(max_k=f.max_k, k_exceeded=f.max_k > K, cheb_tail=float(tail))


def _sample(f: ModeField, K: int, P: int) -> GridField:
    x1 = np.arange(2 * K + 1) / (2 * K + 1)
    x2 = lobatto_points(P)
    X1, X2 = np.meshgrid(x1, x2, indexing="ij")
    return GridField.from_values(f(X1, X2))


def from_mode(f: ModeField, K: int, P: int) -> GridField:
    """Sample a ModeField at the collocation points and transform."""
    if f.max_k > K:
        warnings.warn(f"mode field has |k| = {f.max_k} > K = {K}; x1 content aliases",
                      AliasingWarning, stacklevel=2)
    if not f:
        return GridField(K, P)
    return _sample(f, K, P)


# ---------------------------------------------------------------------------
# conditioning of repeated differentiation


def diff_error_estimate(f: GridField, alpha: Sequence[int], floor: float = NOISE_FLOOR) -> float:
    """Absolute roundoff estimate for ||d^alpha f|| on the tail-trimmed field.

    Retained coefficients carry errors of size floor * max|c|; the estimate
    propagates them through the Fourier factor (2 pi K_eff)^a1 and the
    Chebyshev operator norm of (d/dx2)^a2 on degree P_eff.
    """
    k_eff, p_eff = f.effective_support(floor)
    mag = np.abs(f.coeffs)
    cmax = mag.max(initial=0.0)
    # an unresolved tail adds truncation error of its own size
    tail = mag[:, -2:].max(initial=0.0) if p_eff >= f.P - 1 else 0.0
    base = max(floor * cmax, tail) * math.sqrt(2 * k_eff + 1)
    # Fourier multipliers are exact on k = 0
    return base * (TWO_PI * k_eff) ** alpha[0] * diff_operator_norm(max(p_eff, 1), alpha[1])


def order_error_estimates(f: GridField, n_max: int) -> Dict[Tuple[int, int], float]:
    return {(a1, n - a1): diff_error_estimate(f, (a1, n - a1))
            for n in range(n_max + 1) for a1 in range(n + 1)}


def max_trustworthy_order(f: GridField, rtol: float = 1e-2, limit: int = 24) -> int:
    """Largest N such that every |alpha| <= N derivative has estimated relative error <= rtol."""
    g = f.trimmed()
    scale = g.l2_norm()
    if scale == 0:
        return limit
    cap = 0
    for n in range(1, limit + 1):
        for a1 in range(n + 1):
            alpha = (a1, n - a1)
            ref = max(derivative(g, alpha).l2_norm(), scale)
            if diff_error_estimate(f, alpha) > rtol * ref:
                return cap
        cap = n
    return cap


# ---------------------------------------------------------------------------


@dataclass
class VectorGridField:
    comp1: GridField
    comp2: GridField

    def __post_init__(self):
        self.comp1._check(self.comp2)

    @classmethod
    def zeros(cls, K: int, P: int) -> "VectorGridField":
        return cls(GridField(K, P), GridField(K, P))

    @classmethod
    def from_mode(cls, v: VectorModeField, K: int, P: int) -> "VectorGridField":
        return cls(from_mode(v.comp1, K, P), from_mode(v.comp2, K, P))

    @classmethod
    def from_stream(cls, psi: GridField) -> "VectorGridField":
        return cls(diff(psi, 2), -diff(psi, 1))

    @property
    def K(self) -> int:
        return self.comp1.K

    @property
    def P(self) -> int:
        return self.comp1.P

    def __iter__(self):
        yield self.comp1
        yield self.comp2

    def __add__(self, other: "VectorGridField") -> "VectorGridField":
        return VectorGridField(self.comp1 + other.comp1, self.comp2 + other.comp2)

    def __sub__(self, other: "VectorGridField") -> "VectorGridField":
        return VectorGridField(self.comp1 - other.comp1, self.comp2 - other.comp2)

    def __mul__(self, c) -> "VectorGridField":
        return VectorGridField(self.comp1 * c, self.comp2 * c)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def copy(self) -> "VectorGridField":
        return VectorGridField(self.comp1.copy(), self.comp2.copy())

    def divergence(self) -> GridField:
        return diff(self.comp1, 1) + diff(self.comp2, 2)

    def divergence_norm(self) -> float:
        return self.divergence().l2_norm()

    def normal_trace_norm(self) -> float:
        top, bot = self.comp2.wall("top"), self.comp2.wall("bottom")
        return math.sqrt(float(np.sum(np.abs(top) ** 2) + np.sum(np.abs(bot) ** 2)))

    def l2_norm(self) -> float:
        return math.hypot(self.comp1.l2_norm(), self.comp2.l2_norm())

    def inner(self, other: "VectorGridField") -> complex:
        return self.comp1.inner(other.comp1) + self.comp2.inner(other.comp2)

    def resample(self, K: int, P: int) -> "VectorGridField":
        return VectorGridField(resample(self.comp1, K, P), resample(self.comp2, K, P))

    def real_part(self) -> "VectorGridField":
        return VectorGridField(self.comp1.real_part(), self.comp2.real_part())

    def shift_x1(self, d: float) -> "VectorGridField":
        """Translate by d along x1: f(x1 - d)."""
        phase = np.exp(-1j * TWO_PI * np.arange(-self.K, self.K + 1) * d)[:, None]
        return VectorGridField(self.comp1.like(self.comp1.coeffs * phase),
                               self.comp2.like(self.comp2.coeffs * phase))


# ---------------------------------------------------------------------------
# checkpoint format
#
# All little-endian.  Header (64 bytes):
#   0  4s   magic b"IECK"
#   4  u32  format version (1)
#   8  u32  K
#  12  u32  P
#  16  u32  number of components C
#  20  u32  reserved (0)
#  24  f64  time t
#  32  f64  current radius tau
#  40  f64  tau0
#  48  f64  M (radius decay rate)
#  56  f64  T0
# Body: C blocks of (2K+1)*(P+1) complex numbers, each stored as two f64
# (real, imag); k runs -K..K (slow), p runs 0..P (fast).

CHECKPOINT_MAGIC = b"IECK"
_HEADER = struct.Struct("<4sIIIII5d")


def write_checkpoint(stream: BinaryIO, fields: Sequence[GridField], t: float,
                     schedule: Tuple[float, float, float, float]):
    """schedule = (tau, tau0, M, T0)."""
    K, P = fields[0].K, fields[0].P
    for f in fields:
        if (f.K, f.P) != (K, P):
            raise ValueError("all checkpoint components must share (K, P)")
    stream.write(_HEADER.pack(CHECKPOINT_MAGIC, 1, K, P, len(fields), 0, t, *schedule))
    for f in fields:
        stream.write(np.ascontiguousarray(f.coeffs, dtype="<c16").tobytes())


def read_checkpoint(stream: BinaryIO):
    head = stream.read(_HEADER.size)
    magic, version, K, P, C, _, t, tau, tau0, M, T0 = _HEADER.unpack(head)
    if magic != CHECKPOINT_MAGIC or version != 1:
        raise ValueError("not a checkpoint file")
    n = (2 * K + 1) * (P + 1)
    fields = []
    for _ in range(C):
        buf = stream.read(16 * n)
        arr = np.frombuffer(buf, dtype="<c16").reshape(2 * K + 1, P + 1).astype(complex)
        fields.append(GridField(K, P, arr))
    return fields, {"t": t, "tau": tau, "tau0": tau0, "M": M, "T0": T0}
