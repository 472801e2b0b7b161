"""Seeded families of closed-form fields used by the measurement harness."""

from __future__ import annotations

from typing import List, Optional

import numpy as np

from .mode_field import Cos, ModeField, One, Sin, VectorModeField

DEFAULT_SEED = 20240611


def _rng(seed: Optional[int]) -> np.random.Generator:
    return np.random.default_rng(DEFAULT_SEED if seed is None else seed)


def random_stream(rng: np.random.Generator, k_max: int = 3, m_max: int = 3, n_terms: int = 3,
                  amp: float = 1.0) -> ModeField:
    """Sum of amp * {cos|sin}(2 pi k x1) sin(m pi x2) with random (k, m) and weights.

    The stream function vanishes on both walls, so its velocity is impermeable.
    """
    psi = ModeField()
    for _ in range(n_terms):
        k = int(rng.integers(0, k_max + 1))
        m = int(rng.integers(1, m_max + 1))
        a = amp * float(rng.uniform(-1, 1)) / max(1, k + m)
        if k == 0 or rng.random() < 0.5:
            psi = psi + ModeField.cos_x1(k, Sin(m), a)
        else:
            psi = psi + ModeField.sin_x1(k, Sin(m), a)
    return psi


def random_velocity(rng: np.random.Generator, **kw) -> VectorModeField:
    return VectorModeField.from_stream(random_stream(rng, **kw))


def random_trig_field(rng: np.random.Generator, k_max: int = 3, m_max: int = 3,
                      n_terms: int = 3) -> VectorModeField:
    """Trig-pure vector field with frequencies <= 3 (not necessarily solenoidal)."""
    comps = []
    for _ in range(2):
        f = ModeField()
        for _ in range(n_terms):
            k = int(rng.integers(0, k_max + 1))
            m = int(rng.integers(0, m_max + 1))
            vb = One() if m == 0 else (Cos(m) if rng.random() < 0.5 else Sin(m))
            a = float(rng.uniform(-1, 1))
            f = f + (ModeField.cos_x1(k, vb, a) if rng.random() < 0.5 else ModeField.sin_x1(k, vb, a))
        comps.append(f)
    return VectorModeField(*comps)


def pressure_suite(n: int = 20, seed: Optional[int] = None) -> List[VectorModeField]:
    """Low-mode solenoidal fields u = (U, c) + curl psi; the crossflow c makes the wall data nonzero."""
    rng = _rng(seed)
    out = []
    for _ in range(n):
        U, c = float(rng.uniform(-1, 1)), float(rng.uniform(0.1, 1.0))
        base = VectorModeField(ModeField.constant(U), ModeField.constant(c))
        out.append(base + random_velocity(rng))
    return out


def product_suite(n: int = 10, seed: Optional[int] = None) -> List[tuple]:
    rng = _rng(seed)
    return [(random_trig_field(rng), random_trig_field(rng)) for _ in range(n)]


def embedding_suite(n: int = 10, seed: Optional[int] = None) -> List[VectorModeField]:
    rng = _rng(seed)
    return [random_trig_field(rng) for _ in range(n)]
