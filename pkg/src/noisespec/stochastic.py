"""Discretized Gaussian white-noise biases.

Each (master_seed, trajectory, qubit) triple owns an independent PCG64
stream derived through ``numpy.random.SeedSequence`` spawn keys, so a path
never depends on which other paths were drawn or in which order.  The bias
is held constant over a step with value sqrt(2 D / dt) * eta, eta ~ N(0, 1),
which reproduces <eps(t) eps(t')> = 2 D delta(t - t') in the dt -> 0 limit.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAX_STEPS = 1 << 31
PATH_MAGIC = b"NSPATH01"
_HEADER = struct.Struct("<8sdQQQ")


class NoiseError(ValueError):
    pass


@dataclass(frozen=True)
class NoiseSpec:
    intensity_d: float = 0.0
    master_seed: int = 0

    def __post_init__(self):
        if not np.isfinite(self.intensity_d) or self.intensity_d < 0:
            raise NoiseError(f"noise intensity must be >= 0, got {self.intensity_d}")
        if not 0 <= int(self.master_seed) < 2**64:
            raise NoiseError("master_seed must fit in 64 unsigned bits")

    def amplitude(self, dt: float) -> float:
        """Per-step standard deviation of each bias."""
        return float(np.sqrt(2.0 * self.intensity_d / dt))


@dataclass
class NoisePath:
    dt: float
    samples: np.ndarray  # shape (n_steps, 2): columns eps1, eps2
    seed: int = 0
    trajectory: int = 0

    @property
    def n_steps(self) -> int:
        return self.samples.shape[0]


def stream(master_seed: int, trajectory: int, qubit: int) -> np.random.Generator:
    """Independent generator for one qubit of one trajectory."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(trajectory), int(qubit)))
    return np.random.Generator(np.random.PCG64(ss))


class BiasStream:
    """Chunked bias source for one trajectory.

    Successive ``draw`` calls continue the same two streams, so chunking
    does not change the sequence.
    """

    def __init__(self, spec: NoiseSpec, dt: float, trajectory: int):
        self.amp = spec.amplitude(dt)
        self._gens = (stream(spec.master_seed, trajectory, 1),
                      stream(spec.master_seed, trajectory, 2))

    def draw(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        e1 = self._gens[0].standard_normal(n)
        e2 = self._gens[1].standard_normal(n)
        return self.amp * e1, self.amp * e2


def generate_path(spec: NoiseSpec, dt: float, n_steps: int, trajectory: int = 0) -> NoisePath:
    if not dt > 0:
        raise NoiseError("dt must be positive")
    if n_steps < 1:
        raise NoiseError("n_steps must be >= 1")
    if n_steps > MAX_STEPS:
        raise NoiseError(f"n_steps={n_steps} exceeds the recording budget of {MAX_STEPS}")
    e1, e2 = BiasStream(spec, dt, trajectory).draw(n_steps)
    return NoisePath(dt, np.column_stack([e1, e2]), spec.master_seed, trajectory)


def noise_statistics(path: NoisePath):
    """Empirical (mean1, mean2, var1, var2, cross_covariance)."""
    x = path.samples
    if x.shape[0] == 0:
        raise NoiseError("empty path")
    m = x.mean(axis=0)
    d = x - m
    var = (d * d).mean(axis=0)
    cov = float((d[:, 0] * d[:, 1]).mean())
    return float(m[0]), float(m[1]), float(var[0]), float(var[1]), cov


def write_path(path: NoisePath, filename) -> None:
    """Little-endian dump: header (magic, dt, n_steps, seed, trajectory) then
    n_steps interleaved (eps1, eps2) float64 pairs."""
    header = _HEADER.pack(PATH_MAGIC, path.dt, path.n_steps, path.seed, path.trajectory)
    body = np.ascontiguousarray(path.samples, dtype="<f8").tobytes()
    Path(filename).write_bytes(header + body)


def read_path(filename) -> NoisePath:
    raw = Path(filename).read_bytes()
    magic, dt, n, seed, traj = _HEADER.unpack_from(raw)
    if magic != PATH_MAGIC:
        raise NoiseError(f"{filename}: not a noise path file")
    samples = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if samples.size != 2 * n:
        raise NoiseError(f"{filename}: truncated ({samples.size} values, expected {2 * n})")
    return NoisePath(dt, samples.reshape(n, 2).astype(np.float64), seed, traj)
