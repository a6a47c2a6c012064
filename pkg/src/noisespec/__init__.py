"""Noise spectroscopy of two coupled qubits driven by classical white noise."""

__version__ = "0.1.0"

from .model import (  # noqa: E402
    COMPONENTS,
    SystemParams,
    build_hamiltonian,
    deterministic_rhs,
    eigen_oracle,
    product_state,
    thermal_state,
)
from .stochastic import NoisePath, NoiseSpec, generate_path, noise_statistics  # noqa: E402
from .integrator import (  # noqa: E402
    SimConfig,
    Trajectory,
    integrate_deterministic,
    run_ensemble,
    step_euler_maruyama,
)
from .spectral import Spectrum, estimate_psd, fft_real, liouvillian_lines  # noqa: E402
from .analysis import (  # noqa: E402
    correlation_sweep,
    detect_peaks,
    invert_parameters,
    pearson_r,
    transition_frequencies,
)
