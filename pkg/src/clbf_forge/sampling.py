"""Seeded low-discrepancy sampling: boxes, sphere directions, ray grids.

Everything here is deterministic given (dimension, count, seed) so that
validation sweeps and reports are reproducible byte for byte.
"""

from __future__ import annotations

import numpy as np
from scipy.stats import norm, qmc

__all__ = ["box_samples", "sphere_directions", "golden_angles"]

_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def box_samples(box, n: int, seed: int = 0) -> np.ndarray:
    """n quasi-random (Halton) points inside an axis-aligned box.

    box is a (d, 2) array of [low, high] rows.
    """
    box = np.asarray(box, dtype=float)
    d = box.shape[0]
    sampler = qmc.Halton(d=d, scramble=True, seed=seed)
    u = sampler.random(n)
    return box[:, 0] + u * (box[:, 1] - box[:, 0])


def golden_angles(n: int, offset: float = 0.0) -> np.ndarray:
    """n quasi-uniform angles in [0, 2*pi) from the golden-ratio sequence."""
    k = np.arange(n)
    return 2.0 * np.pi * np.mod(offset + k * _GOLDEN, 1.0)


def sphere_directions(dim: int, n: int, seed: int = 0, lattice: bool = True) -> np.ndarray:
    """n quasi-uniform unit vectors in R^dim.

    For dim 2 the default is the equally spaced angular lattice starting at
    angle 0, which deliberately includes the coordinate axes; lattice=False
    switches to the golden-ratio sequence (useful when callers need to draw
    an open-ended stream of distinct directions). Higher dimensions map
    scrambled Halton points through the Gaussian inverse CDF and normalise.
    """
    if dim < 1:
        raise ValueError("dimension must be >= 1")
    if dim == 1:
        signs = np.array([1.0 if k % 2 == 0 else -1.0 for k in range(n)])
        return signs.reshape(-1, 1)
    if dim == 2:
        if lattice:
            ang = 2.0 * np.pi * np.arange(n) / max(n, 1)
        else:
            ang = golden_angles(n, offset=_GOLDEN * (seed + 1))
        return np.column_stack([np.cos(ang), np.sin(ang)])
    sampler = qmc.Halton(d=dim, scramble=True, seed=seed)
    u = sampler.random(n)
    z = norm.ppf(np.clip(u, 1e-12, 1 - 1e-12))
    norms = np.linalg.norm(z, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    return z / norms
