"""Deterministic low-discrepancy sampling of box interiors (Halton)."""

from __future__ import annotations

import numpy as np

from .geometry import BoxDomain

_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def _halton(index: int, base: int) -> float:
    f, r = 1.0, 0.0
    while index > 0:
        f /= base
        r += f * (index % base)
        index //= base
    return r


def halton_points(n: int, dim: int, seed: int = 0) -> np.ndarray:
    """n points in (0,1)^dim; the seed offsets the sequence start."""
    if dim > len(_PRIMES):
        raise ValueError(f"dimension {dim} exceeds supported maximum {len(_PRIMES)}")
    start = 1 + (seed % 100_003) * 41
    return np.array(
        [[_halton(start + i, _PRIMES[d]) for d in range(dim)] for i in range(n)]
    )


def sample_box(box: BoxDomain, n: int, seed: int = 0, margin: float = 0.05) -> np.ndarray:
    """n quasi-random points in the box shrunk by `margin` per side."""
    inner = box.shrink(2 * margin) if margin > 0 else box
    lo = np.asarray(inner.lower)
    up = np.asarray(inner.upper)
    u = halton_points(n, box.dim, seed)
    return lo + u * (up - lo)


def sample_interval(a: float, b: float, n: int, seed: int = 0, margin: float = 0.05) -> np.ndarray:
    w = b - a
    u = halton_points(n, 1, seed)[:, 0]
    return a + margin * w + u * (1 - 2 * margin) * w
