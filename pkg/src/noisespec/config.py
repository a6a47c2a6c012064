"""Run configuration: INI files with [system], [noise], [sim], [spectral],
[analysis] and [output] sections, presets, and ``section.key=value``
overrides.

Energies, rates and the noise intensity are normalized by ``system.delta1``
on load, so a file may use any energy unit; times (``sim.*``) are always in
units of 1/delta1.
"""
from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .integrator import ConfigError, SimConfig
from .model import ModelError, SystemParams
from .stochastic import NoiseError, NoiseSpec

PRESETS = {
    "fig2": {
        "system.delta": "1.0",
        "system.g": "0.5",
        "system.gamma_phi": "0.1",
        "system.gamma_r": "0.1",
        "noise.d": "0.013",
        "spectral.d_values": "0.013, 0.04",
    },
    "fig3": {
        "system.delta": "1.0",
        "system.gamma_phi": "0.1",
        "system.gamma_r": "0.1",
        "noise.d": "0.013",
        "analysis.g_grid": ", ".join(f"{g:.1f}" for g in np.linspace(-1.5, 1.5, 31)),
    },
}

DEFAULTS = {
    "system": {"delta1": "1.0", "delta2": "1.0", "g": "0.0", "gamma_phi1": "0.0",
               "gamma_phi2": "0.0", "gamma_r1": "0.0", "gamma_r2": "0.0",
               "z_t1": "1.0", "z_t2": "1.0"},
    "noise": {"d": "0.0", "seed": "0"},
    "sim": {"dt": "0.005", "t_max": "2000", "record_stride": "10", "n_trajectories": "64",
            "burn_in": "50", "components": "0x, 0z, x0, z0"},
    "spectral": {"components": "0x, 0z", "segment_length": "4096", "window": "hann",
                 "overlap": "0.5", "d_values": ""},
    "analysis": {"floor": "0.2", "tol_nu": "", "g_grid": "", "noise_check_steps": "1000000"},
    "output": {"dir": "out", "format": "csv"},
}

# shorthand keys that set both qubits
_PAIRS = {"delta": ("delta1", "delta2"), "gamma_phi": ("gamma_phi1", "gamma_phi2"),
          "gamma_r": ("gamma_r1", "gamma_r2"), "z_t": ("z_t1", "z_t2")}


@dataclass
class RunConfig:
    params: SystemParams
    noise: NoiseSpec
    sim: SimConfig
    spectral_components: tuple = ("0x", "0z")
    segment_length: int | None = 4096
    window: str = "hann"
    overlap: float = 0.5
    d_values: tuple = ()
    peak_floor: float = 0.2
    tol_nu: float | None = None
    g_grid: tuple = ()
    noise_check_steps: int = 1_000_000
    out_dir: Path = Path("out")
    formats: tuple = ("csv",)
    raw: dict = field(default_factory=dict)

    def to_ini(self) -> str:
        cp = configparser.ConfigParser()
        cp.read_dict(self.raw)
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()


def _floats(text):
    return tuple(float(v) for v in text.replace(",", " ").split())


def _split_key(key):
    if "." not in key:
        raise ConfigError(f"override {key!r} must look like section.key")
    section, name = key.split(".", 1)
    if section not in DEFAULTS:
        raise ConfigError(f"unknown config section {section!r}")
    return section, name


def _apply(raw, key, value):
    section, name = _split_key(key)
    if name in _PAIRS and section == "system":
        for k in _PAIRS[name]:
            raw[section][k] = value
        return
    if name not in DEFAULTS[section]:
        raise ConfigError(f"unknown config key {section}.{name}")
    raw[section][name] = value


def load(path=None, preset=None, overrides=(), seed=None, out=None) -> RunConfig:
    raw = {s: dict(v) for s, v in DEFAULTS.items()}
    if preset:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        for k, v in PRESETS[preset].items():
            _apply(raw, k, v)
    if path:
        cp = configparser.ConfigParser()
        try:
            with open(path) as fh:
                cp.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        for section in cp.sections():
            if section == "run":
                continue
            for k, v in cp.items(section):
                _apply(raw, f"{section}.{k}", v)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        _apply(raw, k.strip(), v.strip())
    if seed is not None:
        raw["noise"]["seed"] = str(seed)
    if out is not None:
        raw["output"]["dir"] = str(out)
    return build(raw)


def _field(raw, section, key, conv):
    text = raw[section][key]
    try:
        return conv(text)
    except ValueError as exc:
        raise ConfigError(f"{section}.{key}: cannot parse {text!r} ({exc})") from None


def build(raw) -> RunConfig:
    f = lambda s, k: _field(raw, s, k, float)  # noqa: E731
    try:
        unit = f("system", "delta1")
        if not unit > 0:
            raise ConfigError("system.delta1 must be positive")
        params = SystemParams(*(f("system", k) for k in DEFAULTS["system"])).scaled(unit)
        noise = NoiseSpec(f("noise", "d") / unit, _field(raw, "noise", "seed", lambda t: int(t, 0)))
        comps = tuple(c.strip() for c in raw["sim"]["components"].replace(",", " ").split())
        sim = SimConfig(dt=f("sim", "dt"), t_max=f("sim", "t_max"),
                        record_stride=_field(raw, "sim", "record_stride", int),
                        n_trajectories=_field(raw, "sim", "n_trajectories", int),
                        burn_in=f("sim", "burn_in"),
                        components=comps if comps != ("all",) else "all")
    except (ModelError, NoiseError) as exc:
        raise ConfigError(str(exc)) from None

    spec_comps = tuple(raw["spectral"]["components"].replace(",", " ").split())
    missing = [c for c in spec_comps if c not in sim.components]
    if missing:
        sim.components = sim.components + tuple(missing)
    seg = raw["spectral"]["segment_length"].strip()
    segment_length = None if seg in ("", "none", "None") else _field(raw, "spectral", "segment_length", int)
    tol = raw["analysis"]["tol_nu"].strip()
    fmt = tuple(x.strip() for x in raw["output"]["format"].replace(",", " ").split())
    if fmt == ("both",):
        fmt = ("csv", "bin")
    if not set(fmt) <= {"csv", "bin"}:
        raise ConfigError(f"output.format: expected csv, bin or both, got {raw['output']['format']!r}")
    return RunConfig(
        params=params, noise=noise, sim=sim,
        spectral_components=spec_comps,
        segment_length=segment_length,
        window=raw["spectral"]["window"].strip(),
        overlap=f("spectral", "overlap"),
        d_values=tuple(d / unit for d in _field(raw, "spectral", "d_values", _floats)),
        peak_floor=f("analysis", "floor"),
        tol_nu=float(tol) if tol else None,
        g_grid=tuple(g / unit for g in _field(raw, "analysis", "g_grid", _floats)),
        noise_check_steps=_field(raw, "analysis", "noise_check_steps", int),
        out_dir=Path(raw["output"]["dir"]),
        formats=fmt,
        raw={s: dict(v) for s, v in raw.items()},
    )
