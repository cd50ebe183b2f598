"""Seeded sample points shared across the geometry tests."""

import numpy as np


def box_points(box, n: int, seed: int = 0, shrink: float = 1.0) -> list[tuple[float, ...]]:
    rng = np.random.default_rng(seed)
    lo = np.array([b[0] for b in box], dtype=float) * shrink
    hi = np.array([b[1] for b in box], dtype=float) * shrink
    return [tuple(float(v) for v in p) for p in lo + (hi - lo) * rng.random((n, len(box)))]


def grid_points(box, n: int) -> list[tuple[float, ...]]:
    axes = [np.linspace(lo, hi, n) for lo, hi in box]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, len(box))
    return [tuple(float(v) for v in p) for p in mesh]
