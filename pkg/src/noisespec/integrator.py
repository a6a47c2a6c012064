"""Time stepping of the Bloch tensor.

Noisy runs use Euler-Maruyama (Ito) with the per-step bias from
``stochastic``; the noise-free reference uses classical RK4.  Both kernels
are compiled with numba and release the GIL so that the ensemble runner can
spread trajectories over threads.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numba
import numpy as np

from .model import COMPONENTS, INDEX, SystemParams, _rhs_into, thermal_state
from .stochastic import BiasStream, NoisePath, NoiseSpec

DEFAULT_COMPONENTS = ("0x", "0z", "x0", "z0")
CHUNK = 1 << 16


class IntegrationError(RuntimeError):
    """Non-finite state during integration."""

    def __init__(self, step, msg=None):
        self.step = step
        super().__init__(msg or f"integration diverged at step {step}")


class ConfigError(ValueError):
    pass


@dataclass
class SimConfig:
    dt: float = 0.005
    t_max: float = 2000.0
    record_stride: int = 10
    n_trajectories: int = 1
    initial_state: np.ndarray | None = None
    burn_in: float = 50.0
    components: tuple = DEFAULT_COMPONENTS
    memory_budget: int = 2 << 30  # bytes of recorded samples

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigError("sim.dt must be positive")
        if not self.t_max >= self.dt:
            raise ConfigError("sim.t_max must be >= sim.dt")
        if int(self.record_stride) < 1:
            raise ConfigError("sim.record_stride must be >= 1")
        if int(self.n_trajectories) < 1:
            raise ConfigError("sim.n_trajectories must be >= 1")
        if self.burn_in < 0:
            raise ConfigError("sim.burn_in must be >= 0")
        if self.components == "all":
            self.components = COMPONENTS
        self.components = tuple(self.components)
        bad = [c for c in self.components if c not in INDEX]
        if bad:
            raise ConfigError(f"sim.components: unknown component(s) {bad}")
        self.record_stride = int(self.record_stride)
        self.n_trajectories = int(self.n_trajectories)

    @property
    def dt_record(self) -> float:
        return self.dt * self.record_stride

    @property
    def n_steps(self) -> int:
        return int(round(self.t_max / self.dt))

    @property
    def burn_steps(self) -> int:
        return int(round(self.burn_in / self.dt))

    @property
    def n_records(self) -> int:
        return max(0, (self.n_steps - self.burn_steps) // self.record_stride)

    def check_stability(self, params: SystemParams):
        limit = 0.1 / params.max_rate
        if self.dt > limit:
            raise ConfigError(f"sim.dt={self.dt} exceeds the stability bound {limit:.4g}")

    def check_memory(self):
        need = 8 * self.n_records * len(self.components) * self.n_trajectories
        if need > self.memory_budget:
            raise ConfigError(
                f"recording needs {need} bytes, over the budget of {self.memory_budget}; "
                "raise sim.record_stride or record fewer components")


@dataclass
class Trajectory:
    dt_record: float
    data: np.ndarray  # (n_records, n_components)
    components: tuple
    t0: float = 0.0
    index: int = 0
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt_record * np.arange(self.data.shape[0])

    def series(self, component: str) -> np.ndarray:
        try:
            return self.data[:, self.components.index(component)]
        except ValueError:
            raise KeyError(f"component {component!r} was not recorded") from None

    def __len__(self):
        return self.data.shape[0]


# -- kernels --------------------------------------------------------------

@numba.njit(cache=True, nogil=True)
def _em_run(s, p, e1, e2, dt, step0, burn, stride, idx, out):
    """Advance ``s`` in place by len(e1) Euler-Maruyama steps.

    Returns -1 on success or the (global) index of the first bad step.
    """
    ds = np.empty(15)
    n_out = out.shape[0]
    for i in range(e1.shape[0]):
        _rhs_into(s, p, e1[i], e2[i], ds)
        acc = 0.0
        for k in range(15):
            s[k] += dt * ds[k]
            acc += s[k]
        n = step0 + i + 1
        if not np.isfinite(acc):
            return n
        if n > burn and (n - burn) % stride == 0:
            r = (n - burn) // stride - 1
            if r < n_out:
                for k in range(idx.shape[0]):
                    out[r, k] = s[idx[k]]
    return -1


@numba.njit(cache=True, nogil=True)
def _rk4_run(s, p, e1, e2, dt, n_steps, burn, stride, idx, out):
    k1 = np.empty(15)
    k2 = np.empty(15)
    k3 = np.empty(15)
    k4 = np.empty(15)
    tmp = np.empty(15)
    n_out = out.shape[0]
    for i in range(n_steps):
        _rhs_into(s, p, e1, e2, k1)
        for k in range(15):
            tmp[k] = s[k] + 0.5 * dt * k1[k]
        _rhs_into(tmp, p, e1, e2, k2)
        for k in range(15):
            tmp[k] = s[k] + 0.5 * dt * k2[k]
        _rhs_into(tmp, p, e1, e2, k3)
        for k in range(15):
            tmp[k] = s[k] + dt * k3[k]
        _rhs_into(tmp, p, e1, e2, k4)
        acc = 0.0
        for k in range(15):
            s[k] += dt / 6.0 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k])
            acc += s[k]
        n = i + 1
        if not np.isfinite(acc):
            return n
        if n > burn and (n - burn) % stride == 0:
            r = (n - burn) // stride - 1
            if r < n_out:
                for k in range(idx.shape[0]):
                    out[r, k] = s[idx[k]]
    return -1


def _component_index(components):
    return np.array([INDEX[c] for c in components], dtype=np.int64)


def _initial(state, params):
    s = thermal_state(params) if state is None else np.array(state, dtype=np.float64)
    if s.shape != (15,) or not np.all(np.isfinite(s)):
        raise ConfigError("initial state must be 15 finite components")
    return s


# -- public API -------------------------------------------------------------

def step_euler_maruyama(state, params: SystemParams, bias, dt: float, step_index: int = 0):
    """One Ito step: state + dt * rhs(state, bias).

    ``bias`` already carries the sqrt(2D/dt) amplitude.
    """
    s = np.array(state, dtype=np.float64)
    ds = np.empty(15)
    _rhs_into(s, params.as_array(), float(bias[0]), float(bias[1]), ds)
    s += dt * ds
    if not np.all(np.isfinite(s)):
        raise IntegrationError(step_index)
    return s


def integrate_deterministic(state, params: SystemParams, fixed_bias=(0.0, 0.0), dt=0.005,
                            t_max=10.0, record_stride=1, burn_in=0.0, components=COMPONENTS):
    """RK4 integration at constant bias; records every ``record_stride`` steps."""
    cfg = SimConfig(dt=dt, t_max=t_max, record_stride=record_stride, burn_in=burn_in,
                    components=components)
    s = _initial(state, params)
    idx = _component_index(cfg.components)
    out = np.full((cfg.n_records, idx.size), np.nan)
    bad = _rk4_run(s, params.as_array(), float(fixed_bias[0]), float(fixed_bias[1]),
                   cfg.dt, cfg.n_steps, cfg.burn_steps, cfg.record_stride, idx, out)
    if bad >= 0:
        raise IntegrationError(bad)
    return Trajectory(cfg.dt_record, out, cfg.components,
                      t0=cfg.burn_steps * dt + cfg.dt_record, meta={"final_state": s})


def integrate_path(state, params: SystemParams, path: NoisePath, record_stride=1,
                   burn_in=0.0, components=COMPONENTS):
    """Euler-Maruyama along a given bias path (replay, common-noise studies)."""
    cfg = SimConfig(dt=path.dt, t_max=path.n_steps * path.dt, record_stride=record_stride,
                    burn_in=burn_in, components=components)
    s = _initial(state, params)
    idx = _component_index(cfg.components)
    out = np.full((cfg.n_records, idx.size), np.nan)
    e = np.ascontiguousarray(path.samples.T)
    bad = _em_run(s, params.as_array(), e[0], e[1], cfg.dt, 0, cfg.burn_steps,
                  cfg.record_stride, idx, out)
    if bad >= 0:
        raise IntegrationError(bad)
    return Trajectory(cfg.dt_record, out, cfg.components, t0=cfg.burn_steps * cfg.dt + cfg.dt_record,
                      index=path.trajectory, seed=path.seed, meta={"final_state": s})


def run_trajectory(config: SimConfig, params: SystemParams, noise: NoiseSpec, index: int):
    s = _initial(config.initial_state, params)
    p = params.as_array()
    idx = _component_index(config.components)
    out = np.full((config.n_records, idx.size), np.nan)
    bias = BiasStream(noise, config.dt, index)
    n_total = config.burn_steps + config.n_records * config.record_stride
    done = 0
    while done < n_total:
        n = min(CHUNK, n_total - done)
        e1, e2 = bias.draw(n)
        bad = _em_run(s, p, e1, e2, config.dt, done, config.burn_steps,
                      config.record_stride, idx, out)
        if bad >= 0:
            raise IntegrationError(bad, f"trajectory {index} diverged at step {bad}")
        done += n
    return Trajectory(config.dt_record, out, config.components,
                      t0=config.burn_steps * config.dt + config.dt_record,
                      index=index, seed=noise.master_seed, meta={"final_state": s})


def run_ensemble(config: SimConfig, params: SystemParams, noise: NoiseSpec, workers: int = 1,
                 indices=None):
    """Independent trajectories; output does not depend on ``workers``."""
    config.check_stability(params)
    config.check_memory()
    if indices is None:
        indices = range(config.n_trajectories)
    indices = list(indices)
    if workers <= 1:
        return [run_trajectory(config, params, noise, i) for i in indices]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda i: run_trajectory(config, params, noise, i), indices))
