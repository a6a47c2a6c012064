"""Power spectral density of recorded Bloch-tensor components.

Conventions: the frequency axis is nu (cycles per unit time, omega = 2 pi nu);
the PSD is one-sided, so that sum(psd) * d_nu equals the variance of the
mean-removed series for a rectangular window and a single segment.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .integrator import integrate_deterministic
from .model import COMPONENTS, SystemParams, from_density_matrix


class SpectralError(ValueError):
    pass


@dataclass
class Spectrum:
    frequencies: np.ndarray
    psd: np.ndarray
    component: str = ""
    segment_length: int = 0
    window: str = "hann"
    n_ensemble: int = 1
    n_segments: int = 1
    stderr: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def d_nu(self) -> float:
        return float(self.frequencies[1] - self.frequencies[0])

    @property
    def omega(self) -> np.ndarray:
        return 2 * np.pi * self.frequencies

    def total_power(self) -> float:
        return float(self.psd.sum() * self.d_nu)


def _is_pow2(n):
    return n >= 1 and n & (n - 1) == 0


def fft(x) -> np.ndarray:
    """Iterative radix-2 decimation-in-time FFT along the last axis."""
    a = np.asarray(x, dtype=np.complex128)
    n = a.shape[-1]
    if not _is_pow2(n):
        raise SpectralError(f"FFT length must be a power of two, got {n}")
    bits = n.bit_length() - 1
    rev = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        rev |= ((np.arange(n) >> b) & 1) << (bits - 1 - b)
    a = a[..., rev]
    lead = a.shape[:-1]
    m = 2
    while m <= n:
        h = m // 2
        w = np.exp(-2j * np.pi * np.arange(h) / m)
        blocks = a.reshape(*lead, n // m, m)
        even = blocks[..., :h]
        odd = blocks[..., h:] * w
        a = np.concatenate([even + odd, even - odd], axis=-1).reshape(*lead, n)
        m *= 2
    return a


def ifft(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.complex128)
    return np.conj(fft(np.conj(x))) / x.shape[-1]


def fft_real(series) -> np.ndarray:
    """One-sided DFT (n/2 + 1 bins) of a real sequence of power-of-two length."""
    x = np.asarray(series, dtype=np.float64)
    return fft(x)[..., : x.shape[-1] // 2 + 1]


def get_window(name: str, n: int) -> np.ndarray:
    if name in ("rect", "rectangular", "boxcar", None):
        return np.ones(n)
    if name == "hann":
        # periodic form, the usual choice for spectral averaging
        return 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(n) / n)
    raise SpectralError(f"unknown window {name!r}")


def _segments(x, nperseg, step):
    n_seg = 1 + (x.shape[-1] - nperseg) // step
    starts = step * np.arange(n_seg)
    return x[starts[:, None] + np.arange(nperseg)]


def periodogram_average(series, dt, nperseg, window="hann", overlap=0.5, detrend=True):
    """Welch average for one series; returns (nu, psd, n_segments)."""
    x = np.asarray(series, dtype=np.float64)
    if not _is_pow2(nperseg):
        raise SpectralError(f"segment length must be a power of two, got {nperseg}")
    if x.size < nperseg:
        raise SpectralError(f"series has {x.size} samples, fewer than one segment ({nperseg})")
    step = max(1, int(round(nperseg * (1 - overlap))))
    segs = _segments(x, nperseg, step)
    if detrend:
        segs = segs - segs.mean(axis=1, keepdims=True)
    w = get_window(window, nperseg)
    spec = np.abs(fft_real(segs * w)) ** 2
    scale = dt / np.sum(w * w)
    psd = spec.mean(axis=0) * scale
    psd[1:-1] *= 2  # fold negative frequencies; DC and Nyquist appear once
    nu = np.arange(nperseg // 2 + 1) / (nperseg * dt)
    return nu, psd, segs.shape[0]


def estimate_psd(trajectories, component: str, segment_length=4096, window="hann",
                 overlap=0.5, detrend=True) -> Spectrum:
    """Ensemble-averaged Welch PSD of one recorded component.

    ``segment_length=None`` uses a single segment spanning the largest
    power-of-two prefix of each series.
    """
    trajectories = list(trajectories)
    if not trajectories:
        raise SpectralError("no trajectories")
    dt = trajectories[0].dt_record
    psds = []
    nu = n_seg = None
    for tr in trajectories:
        if not np.isclose(tr.dt_record, dt, rtol=1e-12):
            raise SpectralError("trajectories have different sampling intervals")
        x = tr.series(component)
        nps = segment_length
        if nps is None:
            nps = 1 << (x.size.bit_length() - 1)
        nu, p, n_seg = periodogram_average(x, dt, nps, window, overlap, detrend)
        psds.append(p)
    psds = np.array(psds)
    stderr = psds.std(axis=0, ddof=1) / np.sqrt(len(psds)) if len(psds) > 1 else None
    return Spectrum(nu, psds.mean(axis=0), component, 2 * (nu.size - 1), window,
                    len(psds), n_seg, stderr, meta={"dt_record": dt})


def combine(spectra, component=None) -> Spectrum:
    """Sum of PSDs sharing a frequency grid."""
    spectra = list(spectra)
    base = spectra[0]
    for s in spectra[1:]:
        if s.frequencies.shape != base.frequencies.shape or not np.allclose(s.frequencies, base.frequencies):
            raise SpectralError("spectra have different frequency grids")
    total = np.sum([s.psd for s in spectra], axis=0)
    name = component or "+".join(s.component for s in spectra)
    return replace(base, psd=total, component=name, stderr=None)


def generic_state(seed=12345) -> np.ndarray:
    """Bloch tensor of a fixed random pure state; all 15 components non-zero."""
    rng = np.random.default_rng(seed)
    psi = rng.normal(size=4) + 1j * rng.normal(size=4)
    psi /= np.linalg.norm(psi)
    return from_density_matrix(np.outer(psi, psi.conj()))


def liouvillian_lines(params: SystemParams, dt=0.005, t_max=4096 * 0.05, record_stride=10,
                      components=("0x", "0z"), window="hann") -> Spectrum:
    """Noise-free, dissipation-free line spectrum from a generic start.

    Rates in ``params`` are set to zero; the PSDs of ``components`` are
    summed over a single segment covering the run.
    """
    clean = replace(params, gamma_phi1=0.0, gamma_phi2=0.0, gamma_r1=0.0, gamma_r2=0.0)
    tr = integrate_deterministic(generic_state(), clean, (0.0, 0.0), dt, t_max,
                                 record_stride=record_stride, components=COMPONENTS)
    spectra = [estimate_psd([tr], c, segment_length=None, window=window) for c in components]
    return combine(spectra)
