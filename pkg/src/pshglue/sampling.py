"""Seeded sample generation.

All randomness goes through :func:`make_rng`, which wraps numpy's PCG64
generator (a permuted linear congruential generator). Given the same seed the
streams are identical across platforms, so every report is reproducible.
"Random point in a ball" always means rejection sampling from the enclosing
cube in the real coordinates ``(Re z_1..Re z_n, Im z_1..Im z_n)``.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError


def make_rng(seed: int) -> np.random.Generator:
    if seed is None:
        raise ConfigError("a seed is mandatory for randomized sampling")
    return np.random.Generator(np.random.PCG64(int(seed)))


def real_to_complex(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    n = x.shape[-1] // 2
    return x[..., :n] + 1j * x[..., n:]


def complex_to_real(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    return np.concatenate([z.real, z.imag], axis=-1)


def ball_samples(rng: np.random.Generator, dim: int, count: int, radius: float = 1.0,
                 center=None, inner_radius: float = 0.0) -> np.ndarray:
    """``count`` points of C^dim in the (annular) ball, shape ``(count, dim)``."""
    if count <= 0:
        return np.zeros((0, dim), dtype=complex)
    c = np.zeros(dim, dtype=complex) if center is None else np.asarray(center, dtype=complex)
    out = []
    have = 0
    while have < count:
        batch = rng.uniform(-radius, radius, size=(max(2 * (count - have), 16), 2 * dim))
        r = np.linalg.norm(batch, axis=1)
        keep = batch[(r <= radius) & (r >= inner_radius)]
        out.append(keep)
        have += len(keep)
    pts = np.concatenate(out)[:count]
    return real_to_complex(pts) + c


def sphere_samples(rng: np.random.Generator, dim: int, count: int) -> np.ndarray:
    """Uniform points on the unit sphere of C^dim (Gaussian normalisation)."""
    g = rng.standard_normal((count, 2 * dim))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return real_to_complex(g)


def grid_in_ball(resolution: int, dim: int, radius: float, max_points: int | None = None,
                 rng: np.random.Generator | None = None) -> np.ndarray:
    """Tensor grid ``linspace(-R, R, resolution)^(2 dim)`` restricted to the closed ball.

    When more than ``max_points`` survive, a seeded subsample (kept in grid order)
    is returned.
    """
    axis = np.linspace(-radius, radius, resolution)
    mesh = np.stack(np.meshgrid(*([axis] * (2 * dim)), indexing="ij"), axis=-1)
    pts = mesh.reshape(-1, 2 * dim)
    pts = pts[np.einsum("ij,ij->i", pts, pts) <= radius * radius]
    if max_points is not None and len(pts) > max_points:
        if rng is None:
            raise ConfigError("subsampling a grid needs a seeded rng")
        idx = np.sort(rng.choice(len(pts), size=max_points, replace=False))
        pts = pts[idx]
    return real_to_complex(pts)


def random_unitary(rng: np.random.Generator, n: int) -> np.ndarray:
    z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))
