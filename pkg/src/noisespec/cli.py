"""Command-line front end.

    noisespec simulate    --preset fig2 --out runs/fig2
    noisespec spectrum    --preset fig2 --out runs/fig2
    noisespec estimate    runs/fig2/spectrum_0x_D0.013.csv runs/fig2/spectrum_0z_D0.013.csv
    noisespec correlate   --preset fig3 --out runs/fig3
    noisespec noise-check --set noise.d=0.04 --set sim.dt=0.01

Exit codes: 0 success, 2 configuration error, 3 numerical divergence,
4 insufficient data.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import export
from .analysis import (
    CorrelationError,
    InfeasibleError,
    InsufficientDataError,
    Peak,
    PeakSet,
    correlation_sweep,
    detect_peaks,
    invert_parameters,
    pearson_r,
    transition_frequencies,
)
from .integrator import ConfigError, IntegrationError, run_ensemble
from .model import ModelError
from .spectral import SpectralError, estimate_psd, liouvillian_lines, periodogram_average
from .stochastic import NoiseError, generate_path, noise_statistics, write_path

log = logging.getLogger("noisespec")

EXIT_CONFIG, EXIT_DIVERGED, EXIT_DATA = 2, 3, 4


def _out(rc) -> Path:
    rc.out_dir.mkdir(parents=True, exist_ok=True)
    return rc.out_dir


def _d_tag(d):
    return f"D{d:g}"


def _write_trajectories(out, trajs, formats, tag=""):
    paths = []
    for tr in trajs:
        for ext in formats:
            path = out / f"traj{tag}_{tr.index:04d}.{ext}"
            writer = export.write_trajectory_csv if ext == "csv" else export.write_trajectory_bin
            writer(tr, path)
            paths.append(path)
    return paths


def cmd_simulate(rc, args):
    out = _out(rc)
    trajs = run_ensemble(rc.sim, rc.params, rc.noise, workers=args.workers)
    paths = _write_trajectories(out, trajs, rc.formats)
    export.write_manifest(out, rc, "simulate", {"n_files": len(paths)})
    print(f"wrote {len(paths)} trajectory file(s) to {out}")
    return 0


def _peak_line(peaks):
    return ", ".join(f"{p.nu:.4f}" for p in peaks) or "none"


def cmd_spectrum(rc, args):
    out = _out(rc)
    if args.sinusoid_selftest:
        n, dt, k0, amp = 4096, 0.05, 200, 1.5
        nu0 = k0 / (n * dt)
        x = amp * np.cos(2 * np.pi * nu0 * dt * np.arange(n))
        nu, psd, _ = periodogram_average(x, dt, n, window="rect", detrend=True)
        total = float(psd.sum() * (nu[1] - nu[0]))
        report = {"nu0": nu0, "amplitude": amp, "total_power": total,
                  "expected_power": amp * amp / 2, "peak_nu": float(nu[np.argmax(psd)]),
                  "relative_error": abs(total - amp * amp / 2) / (amp * amp / 2)}
        export.write_report(out / "parseval.txt", report)
        for k, v in report.items():
            print(f"{k} = {v:.12g}")
        return 0
    if args.lines:
        sp = liouvillian_lines(rc.params)
        peaks = detect_peaks(sp, rc.peak_floor)
        export.write_spectrum(sp, out / "lines")
        ts = transition_frequencies(rc.params.delta1, rc.params.g)
        print("line positions (nu):", _peak_line(peaks))
        print("transitions    (nu):", ", ".join(f"{v:.4f}" for v in ts.nus))
        print(f"bin width: {sp.d_nu:.6g}")
        return 0

    if args.input:
        groups = {"input": [export.load_trajectory(f, i) for i, f in enumerate(args.input)]}
    else:
        d_values = rc.d_values or (rc.noise.intensity_d,)
        groups = {}
        for d in d_values:
            groups[_d_tag(d)] = run_ensemble(rc.sim, rc.params, replace(rc.noise, intensity_d=d),
                                             workers=args.workers)
    for tag, trajs in groups.items():
        for comp in rc.spectral_components:
            sp = estimate_psd(trajs, comp, rc.segment_length, rc.window, rc.overlap)
            path = export.write_spectrum(sp, out / f"spectrum_{comp}_{tag}")
            peaks = detect_peaks(sp, rc.peak_floor)
            print(f"{path.name}: peaks at nu = {_peak_line(peaks)}")
    export.write_manifest(out, rc, "spectrum")
    return 0


def cmd_estimate(rc, args):
    out = _out(rc)
    if args.peaks:
        nus = [float(v) for v in args.peaks.replace(",", " ").split()]
        sets = [PeakSet([Peak(v, 1.0, 1.0, 0.0, "given") for v in nus], 0.0, "given")]
    else:
        if not args.spectra:
            raise InsufficientDataError("no spectrum files given")
        sets = []
        for f in args.spectra:
            sp = export.read_spectrum(f)
            ps = detect_peaks(sp, rc.peak_floor)
            print(f"{Path(f).name}: peaks at nu = {_peak_line(ps)}")
            sets.append(ps)
    est = invert_parameters(sets[0], sets[1] if len(sets) > 1 else None, tol_nu=rc.tol_nu)
    model = transition_frequencies(est.delta_hat, est.g_hat_magnitude).nus
    report = {"delta_hat": est.delta_hat, "g_hat_magnitude": est.g_hat_magnitude,
              "g_sign": "undetermined", "residual_omega_rms": est.residual}
    for role, nu in est.assignment.items():
        report[f"peak.{role}"] = nu
    for k, v in est.consistency.items():
        report[f"identity.{k}"] = v
    for name, c in est.control.items():
        for k, v in c.items():
            report[f"control.{name}.{k}"] = v
    export.write_report(out / "estimate.txt", report)
    rows = [[i + 1, float(est.assignment.get(r, np.nan)), float(model[i])]
            for i, r in enumerate(("nu1", "nu2", "nu3", "nu4"))]
    export.write_table(out / "estimate.csv", ["transition", "nu_peak", "nu_model"], rows)
    print(f"delta_hat = {est.delta_hat:.6f}")
    print(f"|g_hat|   = {est.g_hat_magnitude:.6f}  (sign: undetermined from spectra)")
    print(f"residual  = {est.residual:.3g}")
    return 0


def cmd_correlate(rc, args):
    out = _out(rc)
    if args.selftest:
        x = np.sin(np.linspace(0, 20, 1001))
        res = pearson_r(x, x)
        print(f"self-correlation r = {res.r:.17g}")
        return 0 if res.r == 1.0 else 1
    if args.g is not None:
        grid = [args.g / float(rc.raw["system"]["delta1"])]
    else:
        grid = list(rc.g_grid) or [rc.params.g]
    results = correlation_sweep(grid, rc.params, rc.noise, rc.sim, workers=args.workers)
    header = ["g", "r", "n", "n_trajectories", "n_eff", "stderr", "null_band"]
    rows = [[r.g_value, r.r, r.n, r.n_trajectories, float(r.n_eff), float(r.stderr or 0.0),
             r.null_band] for r in results]
    export.write_table(out / "correlation.csv", header, rows)
    export.write_plot_data(out / "correlation.dat", [[r.g_value for r in results],
                                                     [r.r for r in results]], ["g", "r"])
    for r in results:
        flag = " (null band)" if abs(r.r) < r.null_band else ""
        print(f"g = {r.g_value:+.3f}  r = {r.r:+.4f} +- {r.stderr or 0:.4f}{flag}")
    export.write_manifest(out, rc, "correlate")
    return 0


def cmd_noise_check(rc, args):
    out = _out(rc)
    dt, n = rc.sim.dt, rc.noise_check_steps
    path = generate_path(rc.noise, dt, n, trajectory=args.trajectory)
    m1, m2, v1, v2, cov = noise_statistics(path)
    theory = 2 * rc.noise.intensity_d / dt
    report = {"d": rc.noise.intensity_d, "dt": dt, "n_steps": n,
              "mean1": m1, "mean2": m2, "var1": v1, "var2": v2,
              "var_theory": theory, "cross_covariance": cov,
              "mean_band": 4 * np.sqrt(theory / n), "cross_band": 4 / np.sqrt(n) * theory}
    export.write_report(out / "noise_check.txt", report)
    if args.dump:
        write_path(path, args.dump)
    for k, v in report.items():
        print(f"{k} = {v:.8g}" if isinstance(v, float) else f"{k} = {v}")
    return 0


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="INI configuration file")
    common.add_argument("--preset", choices=sorted(cfgmod.PRESETS))
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--workers", type=int, default=1, metavar="N",
                        help="threads for trajectories (results do not depend on N)")
    common.add_argument("--seed", type=lambda s: int(s, 0), metavar="U64")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        dest="overrides", help="override a config field, e.g. system.g=0.7")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="noisespec", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="run the noisy ensemble")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("spectrum", parents=[common], help="power spectral densities")
    s.add_argument("--input", nargs="+", metavar="FILE", help="trajectory files instead of simulating")
    s.add_argument("--sinusoid-selftest", action="store_true", help="Parseval check on a sinusoid")
    s.add_argument("--lines", action="store_true", help="noise-free line spectrum of the Hamiltonian")
    s.set_defaults(func=cmd_spectrum)

    s = sub.add_parser("estimate", parents=[common], help="recover delta and |g| from spectra")
    s.add_argument("spectra", nargs="*", metavar="SPECTRUM_CSV",
                   help="primary spectrum, then optional control spectrum")
    s.add_argument("--peaks", help="comma-separated peak frequencies (nu) instead of spectra")
    s.set_defaults(func=cmd_estimate)

    s = sub.add_parser("correlate", parents=[common], help="Pearson r between the qubits")
    s.add_argument("--g", type=float, help="single coupling value instead of analysis.g_grid")
    s.add_argument("--selftest", action="store_true", help="identical-series check (r = 1)")
    s.set_defaults(func=cmd_correlate)

    s = sub.add_parser("noise-check", parents=[common], help="moments of a generated noise path")
    s.add_argument("--trajectory", type=int, default=0)
    s.add_argument("--dump", metavar="FILE", help="also write the path in binary form")
    s.set_defaults(func=cmd_noise_check)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        rc = cfgmod.load(args.config, args.preset, args.overrides, args.seed, args.out)
        return args.func(rc, args)
    except (ConfigError, ModelError, NoiseError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IntegrationError as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (InsufficientDataError, InfeasibleError, SpectralError, CorrelationError,
            KeyError, ValueError, OSError) as exc:
        print(f"insufficient data: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
