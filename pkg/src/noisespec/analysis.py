"""From spectra and time series to Hamiltonian parameters.

The four transition frequencies of two identical coupled qubits,

    omega1 = 2|g|,  omega2,3 = R -+ |g|,  omega4 = 2R,  R = sqrt(delta^2 + g^2),

are linear in (R, |g|), so a peak-to-transition assignment fixes the
parameters by linear least squares.  The sign of g is invisible in the
spectra and is read off the inter-qubit Pearson coefficient instead.
"""
from __future__ import annotations

import itertools
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import signal

from .integrator import SimConfig, run_ensemble
from .model import SystemParams
from .spectral import Spectrum
from .stochastic import NoiseSpec

ROLES = ("nu1", "nu2", "nu3", "nu4")
# omega = DESIGN @ (R, |g|)
DESIGN = np.array([[0.0, 2.0], [1.0, -1.0], [1.0, 1.0], [2.0, 0.0]])


class InsufficientDataError(ValueError):
    pass


class InfeasibleError(ValueError):
    pass


@dataclass(frozen=True)
class TransitionSet:
    omega1: float
    omega2: float
    omega3: float
    omega4: float

    @property
    def omegas(self) -> np.ndarray:
        return np.array([self.omega1, self.omega2, self.omega3, self.omega4])

    @property
    def nus(self) -> np.ndarray:
        return self.omegas / (2 * np.pi)


def transition_frequencies(delta: float, g: float) -> TransitionSet:
    if not delta > 0:
        raise ValueError("delta must be positive")
    r = np.hypot(delta, g)
    a = abs(g)
    return TransitionSet(2 * a, r - a, r + a, 2 * r)


def hamiltonian_gaps(eigenvalues, tol=1e-9) -> np.ndarray:
    """Distinct positive pairwise differences of a spectrum, ascending.

    Gaps within ``tol`` of each other count once (their mean is kept).
    """
    e = np.asarray(eigenvalues)
    gaps = np.sort(np.abs(e[:, None] - e[None, :])[np.triu_indices(e.size, 1)])
    gaps = gaps[gaps > tol]
    groups = []
    for v in gaps:
        if groups and v - groups[-1][-1] <= tol:
            groups[-1].append(v)
        else:
            groups.append([v])
    return np.array([np.mean(g) for g in groups])


# -- peaks ----------------------------------------------------------------

@dataclass(frozen=True)
class Peak:
    nu: float
    height: float
    prominence: float
    width: float
    source: str = ""


@dataclass
class PeakSet:
    peaks: list
    d_nu: float = 0.0
    component: str = ""

    def __len__(self):
        return len(self.peaks)

    def __iter__(self):
        return iter(self.peaks)

    @property
    def nus(self) -> np.ndarray:
        return np.array([p.nu for p in self.peaks])


def detect_peaks(spectrum: Spectrum, floor=0.2, max_peaks=6, nu_min=None,
                 min_rel_height=1e-3) -> PeakSet:
    """Local maxima of log10(psd) whose prominence exceeds ``floor`` decades
    and whose height is at least ``min_rel_height`` times the spectrum maximum.

    The height gate keeps deep nulls of a noisy periodogram from lending
    large log-prominence to background fluctuations.  Positions are refined by a parabola through the three log-PSD samples
    around each maximum.  The DC bin, the bins below ``nu_min`` (default two
    bins) and the Nyquist bin are never reported.
    """
    nu = spectrum.frequencies
    d_nu = spectrum.d_nu
    psd = np.asarray(spectrum.psd, dtype=np.float64)
    if psd.max() <= 0:
        return PeakSet([], d_nu, spectrum.component)
    logp = np.log10(np.maximum(psd, psd.max() * 1e-30))
    lo = max(1, int(np.ceil((2 * d_nu if nu_min is None else nu_min) / d_nu)))
    if lo >= psd.size - 2:
        return PeakSet([], d_nu, spectrum.component)
    top = psd[lo:-1].max()
    idx, props = signal.find_peaks(logp[lo:-1], prominence=floor,
                                   height=np.log10(top * min_rel_height))
    idx = idx + lo
    peaks = []
    if idx.size:
        widths = signal.peak_widths(psd, idx, rel_height=0.5)[0] * d_nu
        for i, prom, wid in zip(idx, props["prominences"], widths):
            y0, y1, y2 = logp[i - 1], logp[i], logp[i + 1]
            denom = y0 - 2 * y1 + y2
            shift = 0.5 * (y0 - y2) / denom if denom < 0 else 0.0
            peaks.append(Peak(float(nu[i] + shift * d_nu), float(psd[i]), float(prom),
                              float(wid), spectrum.component))
    peaks.sort(key=lambda p: -p.prominence)
    peaks = sorted(peaks[:max_peaks], key=lambda p: p.nu)
    return PeakSet(peaks, d_nu, spectrum.component)


# -- inversion --------------------------------------------------------------

@dataclass
class Fit:
    delta: float
    g: float
    residual: float
    assignment: dict  # role -> Peak


@dataclass
class EstimatedParams:
    delta_hat: float
    g_hat_magnitude: float
    g_sign: int | None
    residual: float
    assignment: dict
    consistency: dict = field(default_factory=dict)
    control: dict = field(default_factory=dict)

    @property
    def g_hat(self) -> float | None:
        if self.g_sign is None:
            return None
        return self.g_sign * self.g_hat_magnitude


def allowed_roles(source: str):
    """Transitions visible in the spectrum of a component, or None if unknown.

    sigma_x (x) sigma_x conserves the parity of the number of excitations, so
    components with an odd number of x/y factors connect the two parity
    blocks (nu2, nu3) while the others stay inside a block (nu1, nu4).
    """
    comps = [t for t in re.split(r"[^0xyz]+", source or "") if len(t) == 2 and t != "00"]
    if not comps:
        return None
    odd = {sum(ch in "xy" for ch in c) % 2 for c in comps}
    if len(odd) != 1:
        return None
    return ("nu2", "nu3") if odd.pop() else ("nu1", "nu4")


def closed_form_seed(omegas: dict):
    """(delta, |g|) from a pair of assigned transitions, or None."""
    o = omegas
    g = R = None
    if "nu1" in o:
        g = o["nu1"] / 2
    elif "nu2" in o and "nu3" in o:
        g = (o["nu3"] - o["nu2"]) / 2
    if "nu4" in o:
        R = o["nu4"] / 2
    elif "nu2" in o and "nu3" in o:
        R = (o["nu2"] + o["nu3"]) / 2
    if g is not None and R is None:
        if "nu2" in o:
            R = o["nu2"] + g
        elif "nu3" in o:
            R = o["nu3"] - g
    if g is None and R is not None:
        if "nu2" in o:
            g = R - o["nu2"]
        elif "nu3" in o:
            g = o["nu3"] - R
    if g is None or R is None or R * R - g * g <= 0:
        return None
    return float(np.sqrt(R * R - g * g)), float(g)


def fit_assignment(omegas: dict):
    """Least-squares (delta, |g|, rms misfit) for {role: omega}; None if infeasible."""
    rows = [ROLES.index(r) for r in omegas]
    a = DESIGN[rows]
    b = np.array(list(omegas.values()))
    if np.linalg.matrix_rank(a) < 2:
        return None
    (R, g), *_ = np.linalg.lstsq(a, b, rcond=None)
    if g < 0:
        g = 0.0
        R = float(a[:, 0] @ b / (a[:, 0] @ a[:, 0]))
    if R * R - g * g <= 0:
        return None
    resid = a @ np.array([R, g]) - b
    return float(np.sqrt(R * R - g * g)), float(g), float(np.sqrt(np.mean(resid ** 2)))


def merge_peaks(peak_sets, tol):
    """Union of peak lists; peaks closer than ``tol`` collapse to the more prominent."""
    pool = sorted((p for ps in peak_sets for p in ps), key=lambda p: -p.prominence)
    kept = []
    for p in pool:
        if all(abs(p.nu - q.nu) > tol for q in kept):
            kept.append(p)
    return sorted(kept, key=lambda p: p.nu)


def best_assignment(peaks, tol_nu):
    """Exhaustive search over injective maps from transitions to peaks.

    Among assignments whose worst peak misfit is within ``tol_nu`` the one
    using the most peaks wins.  Ties are broken by the number of roles that
    contradict each peak's selection rule (peaks of unknown origin are
    treated as x-type, after known ones), then by the RMS misfit.
    """
    peaks = list(peaks)
    best = None
    best_key = None
    options = [None] + list(range(len(peaks)))
    for choice in itertools.product(options, repeat=4):
        used = [c for c in choice if c is not None]
        if len(used) < 2 or len(set(used)) != len(used):
            continue
        omegas = {ROLES[k]: 2 * np.pi * peaks[c].nu for k, c in enumerate(choice) if c is not None}
        fit = fit_assignment(omegas)
        if fit is None:
            continue
        delta, g, rms = fit
        model = transition_frequencies(delta, g).nus
        worst = max(abs(model[ROLES.index(r)] - w / (2 * np.pi)) for r, w in omegas.items())
        if worst > tol_nu:
            continue
        known = unknown = 0
        for k, c in enumerate(choice):
            if c is None:
                continue
            allowed = allowed_roles(peaks[c].source)
            if allowed is None:
                unknown += ROLES[k] not in ("nu2", "nu3")
            else:
                known += ROLES[k] not in allowed
        key = (-len(used), known, unknown, rms)
        if best_key is None or key < best_key:
            best_key = key
            best = Fit(delta, g, rms, {ROLES[k]: peaks[c] for k, c in enumerate(choice) if c is not None})
    return best


def invert_parameters(peaks_x: PeakSet, peaks_z: PeakSet | None = None, tol_nu=None) -> EstimatedParams:
    """Recover (delta, |g|) from spectral peaks.

    The union of both peak sets is fitted; each set is also fitted alone and
    the other set's prediction quality is reported under ``control``.
    ``tol_nu`` defaults to two frequency bins (at least 0.005).
    """
    sets = [ps for ps in (peaks_x, peaks_z) if ps is not None]
    d_nu = max((ps.d_nu for ps in sets), default=0.0)
    tol = tol_nu if tol_nu is not None else max(2 * d_nu, 0.005)
    union = merge_peaks(sets, tol / 2)
    if len(union) < 2:
        found = ", ".join(f"{p.nu:.4f}" for p in union) or "none"
        raise InsufficientDataError(f"need at least 2 peaks, found {len(union)}: {found}")
    fit = best_assignment(union, tol)
    if fit is None:
        raise InfeasibleError(
            "no assignment of peaks " + ", ".join(f"{p.nu:.4f}" for p in union)
            + " to transitions gives a positive delta^2")
    model = transition_frequencies(fit.delta, fit.g)
    om = {r: 2 * np.pi * p.nu for r, p in fit.assignment.items()}
    consistency = {}
    if {"nu1", "nu2", "nu3"} <= om.keys():
        consistency["omega1 - (omega3 - omega2)"] = om["nu1"] - (om["nu3"] - om["nu2"])
    if {"nu2", "nu3", "nu4"} <= om.keys():
        consistency["omega4 - (omega2 + omega3)"] = om["nu4"] - (om["nu2"] + om["nu3"])

    control = {}
    if len(sets) == 2:
        for name, own, other in (("x", sets[0], sets[1]), ("z", sets[1], sets[0])):
            if len(own) < 2:
                continue
            f = best_assignment(merge_peaks([own], tol / 2), tol)
            if f is None:
                continue
            pred = transition_frequencies(f.delta, f.g).nus
            misses = [float(np.min(np.abs(pred - p.nu))) for p in other]
            control[name] = {"delta": f.delta, "g": f.g, "residual": f.residual,
                             "other_max_miss_nu": max(misses) if misses else float("nan")}
    return EstimatedParams(fit.delta, fit.g, None, fit.residual,
                           {r: p.nu for r, p in fit.assignment.items()},
                           consistency, control)


# -- correlations -------------------------------------------------------------

class CorrelationError(ValueError):
    pass


@dataclass
class CorrelationResult:
    """``n`` is the length of each correlated series; ensemble results also
    carry the trajectory count and the summed Bartlett effective size."""

    r: float
    n: int
    g_value: float | None = None
    n_trajectories: int = 1
    n_eff: float | None = None
    stderr: float | None = None
    r_each: np.ndarray | None = None

    @property
    def null_band(self) -> float:
        return 3.0 / np.sqrt(self.n)


def pearson_r(x, y, g_value=None) -> CorrelationResult:
    """Sample Pearson coefficient written with raw sums."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise CorrelationError("series must be 1-D and of equal length")
    n = x.size
    if n < 2:
        raise CorrelationError("need at least two samples")
    # shift by the first sample: leaves r unchanged, avoids cancellation
    x = x - x[0]
    y = y - y[0]
    sx, sy = x.sum(), y.sum()
    vx = n * (x @ x) - sx * sx
    vy = n * (y @ y) - sy * sy
    if not (vx > 0 and vy > 0):
        raise CorrelationError("zero variance: correlation undefined")
    r = (n * (x @ y) - sx * sy) / (np.sqrt(vy) * np.sqrt(vx))
    return CorrelationResult(float(np.clip(r, -1.0, 1.0)), n, g_value)


def effective_samples(x, y, max_lag=None) -> float:
    """Bartlett effective sample size for the correlation of two series.

    n / (1 + 2 sum_k rho_x(k) rho_y(k)), the autocorrelation sum truncated
    at the first lag where either autocorrelation turns negative.
    """
    x = np.asarray(x, dtype=np.float64) - np.mean(x)
    y = np.asarray(y, dtype=np.float64) - np.mean(y)
    n = x.size
    m = 1 << int(np.ceil(np.log2(2 * n)))
    ax = np.fft.irfft(np.abs(np.fft.rfft(x, m)) ** 2)[:n]
    ay = np.fft.irfft(np.abs(np.fft.rfft(y, m)) ** 2)[:n]
    ax /= ax[0]
    ay /= ay[0]
    max_lag = n // 4 if max_lag is None else max_lag
    total = 0.0
    for k in range(1, max_lag):
        if ax[k] < 0 or ay[k] < 0:
            break
        total += ax[k] * ay[k]
    return n / (1.0 + 2.0 * total)


def ensemble_correlation(trajectories, a="0x", b="x0", g_value=None) -> CorrelationResult:
    """Mean of per-trajectory Pearson coefficients between components a and b."""
    rs, neffs, n = [], 0.0, None
    for tr in trajectories:
        x, y = tr.series(a), tr.series(b)
        rs.append(pearson_r(x, y).r)
        n = x.size
        neffs += effective_samples(x, y)
    rs = np.array(rs)
    se = rs.std(ddof=1) / np.sqrt(rs.size) if rs.size > 1 else None
    return CorrelationResult(float(rs.mean()), n, g_value, rs.size, neffs, se, rs)


def correlation_sweep(g_grid, params: SystemParams, noise: NoiseSpec, config: SimConfig,
                      workers=1):
    """Ensemble-averaged r(Pi_0x, Pi_x0) for each coupling in ``g_grid``.

    Every g value reuses the same noise seeds (paired comparison).
    """
    cfg = replace(config, components=tuple(sorted(set(config.components) | {"0x", "x0"})))

    def one(g):
        p = replace(params, g=float(g))
        trs = run_ensemble(cfg, p, noise, workers=1)
        return ensemble_correlation(trs, g_value=float(g))

    g_grid = [float(g) for g in g_grid]
    if workers <= 1:
        return [one(g) for g in g_grid]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, g_grid))
