"""Reproducible Gaussian noise: one counter-based Philox stream per (replication, lane, particle).

Particle ``i`` of replication ``r`` always sees the same sequence of normals,
whatever ``N`` is and however the draws are chunked, so scheme runs and
reference runs built from the same seed are exactly coupled.
"""

from __future__ import annotations

import numpy as np

SCHEME_LANE = 0  # Brownian increments of the particle scheme
AUX_LANE = 1  # extra normals for exact transitions in reference runs
INIT_LANE = 2  # initial-condition sampling

_MAX_PARTICLES = 2**32
_MAX_REPLICATIONS = 2**30
_BLOCK_ELEMENTS = 2**22


def particle_generator(seed: int, replication: int, particle: int, lane: int = SCHEME_LANE) -> np.random.Generator:
    if not 0 <= particle < _MAX_PARTICLES:
        raise ValueError(f"particle index out of range: {particle}")
    if not 0 <= replication < _MAX_REPLICATIONS:
        raise ValueError(f"replication index out of range: {replication}")
    if not 0 <= lane < 4:
        raise ValueError(f"lane out of range: {lane}")
    key = [int(seed) & 0xFFFF_FFFF_FFFF_FFFF, (replication << 34) | (lane << 32) | particle]
    return np.random.Generator(np.random.Philox(key=key))


class GaussianStreams:
    """Sequential standard normals for a set of particles, drawn in step blocks.

    ``next_block(s)`` returns an array of shape ``(s, len(particles))``.
    """

    def __init__(self, seed: int, replication: int, particles, lane: int = SCHEME_LANE):
        self.particles = np.asarray(particles, dtype=np.int64)
        self._gens = [particle_generator(seed, replication, int(i), lane) for i in self.particles]

    @classmethod
    def for_cloud(cls, seed: int, replication: int, n_particles: int, lane: int = SCHEME_LANE) -> "GaussianStreams":
        return cls(seed, replication, range(n_particles), lane)

    def __len__(self) -> int:
        return len(self._gens)

    def block_size(self) -> int:
        return max(1, _BLOCK_ELEMENTS // max(1, len(self._gens)))

    def next_block(self, steps: int) -> np.ndarray:
        out = np.empty((steps, len(self._gens)))
        for j, gen in enumerate(self._gens):
            out[:, j] = gen.standard_normal(steps)
        return out

    def iter_steps(self, n_steps: int):
        """Yield one length-``N`` normal vector per step."""
        done = 0
        size = self.block_size()
        while done < n_steps:
            s = min(size, n_steps - done)
            block = self.next_block(s)
            yield from block
            done += s


def initial_generator(seed: int, replication: int) -> np.random.Generator:
    return particle_generator(seed, replication, 0, INIT_LANE)
