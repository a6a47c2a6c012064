"""File formats: CSV tables (17 significant digits), gnuplot plot data
(8 digits), binary trajectories, key-value reports and run manifests."""
from __future__ import annotations

import csv
import struct
import subprocess
from pathlib import Path

import numpy as np

from . import __version__
from .integrator import Trajectory
from .spectral import Spectrum

TRAJ_MAGIC = b"NSTRAJ01"
_TRAJ_HEADER = struct.Struct("<8sdQQQQ")


def fmt(x) -> str:
    return f"{x:.17g}"


def write_table(filename, header, rows, digits=17):
    with open(filename, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([f"{v:.{digits}g}" if isinstance(v, (float, np.floating)) else v for v in row])


def read_table(filename):
    with open(filename, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{filename}: empty file")
    header = rows[0]
    data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=np.float64)
    return header, data.reshape(-1, len(header))


def write_plot_data(filename, columns, names):
    """Whitespace-separated columns with a commented header, 8 digits."""
    with open(filename, "w") as fh:
        fh.write("# " + " ".join(names) + "\n")
        for row in zip(*columns):
            fh.write(" ".join(f"{v:.8g}" for v in row) + "\n")


# -- trajectories -------------------------------------------------------------

def write_trajectory_csv(tr: Trajectory, filename):
    rows = np.column_stack([tr.times, tr.data])
    write_table(filename, ["t", *tr.components], rows.tolist())


def read_trajectory_csv(filename, index=0) -> Trajectory:
    header, data = read_table(filename)
    if header[0] != "t" or data.shape[0] < 2:
        raise ValueError(f"{filename}: not a trajectory table")
    t = data[:, 0]
    return Trajectory(float(t[1] - t[0]), data[:, 1:].copy(), tuple(header[1:]), t0=float(t[0]),
                      index=index)


def write_trajectory_bin(tr: Trajectory, filename):
    """Header (magic, dt_record, n_records, seed, trajectory, n_components),
    then two ASCII bytes per component name, then row-major float64 data,
    all little-endian."""
    n, m = tr.data.shape
    head = _TRAJ_HEADER.pack(TRAJ_MAGIC, tr.dt_record, n, tr.seed or 0, tr.index, m)
    names = "".join(tr.components).encode("ascii")
    body = np.ascontiguousarray(tr.data, dtype="<f8").tobytes()
    t0 = struct.pack("<d", tr.t0)
    Path(filename).write_bytes(head + names + t0 + body)


def read_trajectory_bin(filename) -> Trajectory:
    raw = Path(filename).read_bytes()
    magic, dt, n, seed, index, m = _TRAJ_HEADER.unpack_from(raw)
    if magic != TRAJ_MAGIC:
        raise ValueError(f"{filename}: not a trajectory file")
    off = _TRAJ_HEADER.size
    names = raw[off:off + 2 * m].decode("ascii")
    off += 2 * m
    (t0,) = struct.unpack_from("<d", raw, off)
    off += 8
    data = np.frombuffer(raw, dtype="<f8", offset=off).reshape(n, m).astype(np.float64)
    comps = tuple(names[2 * i:2 * i + 2] for i in range(m))
    return Trajectory(dt, data, comps, t0=t0, index=index, seed=seed)


def load_trajectory(filename, index=0) -> Trajectory:
    if str(filename).endswith(".bin"):
        return read_trajectory_bin(filename)
    return read_trajectory_csv(filename, index)


# -- spectra ------------------------------------------------------------------

def write_spectrum(sp: Spectrum, stem):
    csv_path, dat_path = Path(f"{stem}.csv"), Path(f"{stem}.dat")
    write_table(csv_path, ["nu", "omega", "psd"],
                np.column_stack([sp.frequencies, sp.omega, sp.psd]).tolist())
    write_plot_data(dat_path, [sp.frequencies, sp.psd], ["nu", "psd"])
    return csv_path


def read_spectrum(filename, component="") -> Spectrum:
    header, data = read_table(filename)
    if header[:3] != ["nu", "omega", "psd"]:
        raise ValueError(f"{filename}: expected columns nu, omega, psd")
    if data.shape[0] < 3:
        raise ValueError(f"{filename}: spectrum has fewer than 3 bins")
    return Spectrum(data[:, 0], data[:, 2], component or Path(filename).stem,
                    segment_length=2 * (data.shape[0] - 1))


# -- reports ------------------------------------------------------------------

def write_report(filename, items: dict):
    """Plain ``key = value`` lines; floats at 17 significant digits."""
    with open(filename, "w") as fh:
        for k, v in items.items():
            if isinstance(v, (float, np.floating)):
                v = fmt(float(v))
            fh.write(f"{k} = {v}\n")


def read_report(filename) -> dict:
    out = {}
    for line in Path(filename).read_text().splitlines():
        if "=" in line and not line.startswith("#"):
            k, v = line.split("=", 1)
            out[k.strip()] = v.strip()
    return out


def version_string() -> str:
    """Package version, with ``git describe`` appended when available."""
    try:
        desc = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"],
                              cwd=Path(__file__).parent, capture_output=True, text=True,
                              timeout=5)
        if desc.returncode == 0 and desc.stdout.strip():
            return f"{__version__}+{desc.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def write_manifest(out_dir, config, command, extra=None):
    """The run's full configuration as a loadable INI file plus a [run] section."""
    path = Path(out_dir) / "manifest.ini"
    lines = [config.to_ini().rstrip(), "", "[run]", f"command = {command}",
             f"version = {version_string()}"]
    for k, v in (extra or {}).items():
        lines.append(f"{k} = {v}")
    path.write_text("\n".join(lines) + "\n")
    return path
