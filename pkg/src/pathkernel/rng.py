"""Counter-addressable Gaussian increment streams.

Every Brownian increment is a pure function of the address
``(master_seed, path_index, step, coordinate)``.  Each path owns a Philox
stream keyed by ``(master_seed, path_index)``; each step consumes exactly
``dim`` draws, and a draw is one raw 64-bit Philox output mapped through the
inverse normal CDF.  Because consumption per draw is fixed, any step block
can be regenerated in isolation by jumping the Philox counter, so results do
not depend on execution order, chunking, or worker count, and two runs with
the same master seed see identical noise at matching addresses (the
common-random-numbers coupling used by the finite-difference oracle).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

_U53 = 2.0**-53
_SHIFT = np.uint64(11)
_RAWS_PER_COUNTER = 4  # Philox-4x64 emits four 64-bit words per counter tick


def _check_address(master_seed: int, path_index: int) -> None:
    if not 0 <= int(master_seed) < 2**64:
        raise ValueError(f"master_seed must be a 64-bit unsigned integer, got {master_seed}")
    if not 0 <= int(path_index) < 2**64:
        raise ValueError(f"path_index must be a 64-bit unsigned integer, got {path_index}")


def _key(master_seed: int, path_index: int) -> np.ndarray:
    return np.array([master_seed, path_index], dtype=np.uint64)


def _raw_to_normal(raw: np.ndarray) -> np.ndarray:
    # Top 53 bits -> midpoint uniform in (0, 1); never 0 or 1, symmetric
    # around 1/2, so the normals have exactly zero-mean lattice symmetry.
    u = ((raw >> _SHIFT).astype(np.float64) + 0.5) * _U53
    return ndtri(u)


def standard_normals(master_seed: int, path_index: int, start_draw: int, n_draws: int) -> np.ndarray:
    """Draws ``start_draw .. start_draw + n_draws - 1`` of a path's normal stream."""
    _check_address(master_seed, path_index)
    if start_draw < 0 or n_draws < 0:
        raise ValueError("draw indices must be nonnegative")
    skip, offset = divmod(start_draw, _RAWS_PER_COUNTER)
    bitgen = np.random.Philox(key=_key(master_seed, path_index), counter=skip)
    raw = bitgen.random_raw(offset + n_draws)[offset:]
    return _raw_to_normal(raw)


@dataclass
class RngStream:
    """Address of one path's increment source.

    ``step_counter`` advances by one per :func:`gaussian_increment` call; the
    same (master_seed, path_index, step) always reproduces the same vector.
    """

    master_seed: int
    path_index: int = 0
    step_counter: int = 0


def gaussian_increment(stream: RngStream, dt: float, dim: int) -> np.ndarray:
    """One step's Brownian increment: ``dim`` i.i.d. draws from N(0, dt).

    Advances ``stream.step_counter`` by one.
    """
    if not dt > 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    z = standard_normals(stream.master_seed, stream.path_index, stream.step_counter * dim, dim)
    stream.step_counter += 1
    return np.sqrt(dt) * z


def path_increments(
    master_seed: int,
    path_index: int,
    n_steps: int,
    dim: int,
    dt: float,
    start_step: int = 0,
) -> np.ndarray:
    """Increment block of shape ``(n_steps, dim)`` for one path.

    Bit-identical to stacking :func:`gaussian_increment` over the same steps.
    """
    if not dt > 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    z = standard_normals(master_seed, path_index, start_step * dim, n_steps * dim)
    return np.sqrt(dt) * z.reshape(n_steps, dim)


class SequentialPathRng:
    """Forward-only reader of one path's increment stream.

    Reuses a single Philox instance, so long orbits pay no per-step setup
    cost; the values are the addressed ones (same as :func:`path_increments`).
    """

    def __init__(self, master_seed: int, path_index: int, dim: int, dt: float):
        _check_address(master_seed, path_index)
        if dim < 1:
            raise ValueError(f"dim must be >= 1, got {dim}")
        if not dt > 0.0:
            raise ValueError(f"dt must be positive, got {dt}")
        self.master_seed = master_seed
        self.path_index = path_index
        self.dim = dim
        self._sqrt_dt = np.sqrt(dt)
        self._bitgen = np.random.Philox(key=_key(master_seed, path_index))
        self.step = 0

    def next_increment(self) -> np.ndarray:
        raw = self._bitgen.random_raw(self.dim)
        self.step += 1
        return self._sqrt_dt * _raw_to_normal(raw)

    def next_block(self, n_steps: int) -> np.ndarray:
        """Increments for the next ``n_steps`` steps, shape ``(n_steps, dim)``."""
        raw = self._bitgen.random_raw(n_steps * self.dim)
        self.step += n_steps
        return self._sqrt_dt * _raw_to_normal(raw).reshape(n_steps, self.dim)
