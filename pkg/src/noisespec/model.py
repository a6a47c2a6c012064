"""Two-qubit model: parameters, Bloch-tensor state, equations of motion and
the 4x4 Hamiltonian with its eigenvalue oracle.

The state is the 15-vector of Pauli-product expectation values

    Pi_ab = Tr[(sigma_a (x) sigma_b) rho],   a, b in {0, x, y, z},

with Pi_00 = 1 implicit.  The first index belongs to qubit 1 and the second
to qubit 2, so the (Pi_0x, Pi_0y, Pi_0z) sector precesses with delta2 and the
(Pi_x0, Pi_y0, Pi_z0) sector with delta1.
"""
from __future__ import annotations

from dataclasses import dataclass, astuple

import numba
import numpy as np

COMPONENTS = (
    "0x", "0y", "0z",
    "x0", "y0", "z0",
    "xx", "xy", "yx",
    "xz", "zx", "yy",
    "yz", "zy", "zz",
)
INDEX = {name: i for i, name in enumerate(COMPONENTS)}
MIXED = tuple(INDEX[c] for c in COMPONENTS if "0" not in c)

(I0X, I0Y, I0Z, IX0, IY0, IZ0, IXX, IXY, IYX,
 IXZ, IZX, IYY, IYZ, IZY, IZZ) = range(15)

PAULI = {
    "0": np.eye(2, dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}


class ModelError(ValueError):
    """Invalid parameters or non-finite input."""


@dataclass(frozen=True)
class SystemParams:
    """Hamiltonian and dissipation parameters (hbar = 1).

    ``g`` is signed; the relaxation rates are the ones pulling the diagonal
    components toward ``z_t1``, ``z_t2``.
    """

    delta1: float = 1.0
    delta2: float = 1.0
    g: float = 0.0
    gamma_phi1: float = 0.0
    gamma_phi2: float = 0.0
    gamma_r1: float = 0.0
    gamma_r2: float = 0.0
    z_t1: float = 1.0
    z_t2: float = 1.0

    def __post_init__(self):
        vals = astuple(self)
        if not all(np.isfinite(v) for v in vals):
            raise ModelError(f"non-finite parameter in {self}")
        if self.delta1 <= 0 or self.delta2 <= 0:
            raise ModelError("tunneling splittings must be positive")
        if min(self.gamma_phi1, self.gamma_phi2, self.gamma_r1, self.gamma_r2) < 0:
            raise ModelError("rates must be non-negative")
        if abs(self.z_t1) > 1 or abs(self.z_t2) > 1:
            raise ModelError("equilibrium values must lie in [-1, 1]")

    @classmethod
    def symmetric(cls, delta=1.0, g=0.0, gamma_phi=0.0, gamma_r=0.0, z_t=1.0):
        """Identical qubits sharing every parameter."""
        return cls(delta, delta, g, gamma_phi, gamma_phi, gamma_r, gamma_r, z_t, z_t)

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=np.float64)

    def scaled(self, unit: float) -> "SystemParams":
        """Express energies and rates in units of ``unit``."""
        return SystemParams(
            self.delta1 / unit, self.delta2 / unit, self.g / unit,
            self.gamma_phi1 / unit, self.gamma_phi2 / unit,
            self.gamma_r1 / unit, self.gamma_r2 / unit,
            self.z_t1, self.z_t2,
        )

    @property
    def max_rate(self) -> float:
        return max(self.delta1, self.delta2, abs(self.g), self.gamma_phi1,
                   self.gamma_phi2, self.gamma_r1, self.gamma_r2)


@numba.njit(cache=True, nogil=True)
def _rhs_into(s, p, e1, e2, out):
    d1, d2, g = p[0], p[1], p[2]
    gp1, gp2, gr1, gr2 = p[3], p[4], p[5], p[6]
    zt1, zt2 = p[7], p[8]
    g2 = 2.0 * g

    out[0] = d2 * s[1] - gp2 * s[0]
    out[1] = -d2 * s[0] + e2 * s[2] - g2 * s[9] - gp2 * s[1]
    out[2] = -e2 * s[1] + g2 * s[7] - gr2 * (s[2] - zt2)

    out[3] = d1 * s[4] - gp1 * s[3]
    out[4] = -d1 * s[3] + e1 * s[5] - g2 * s[10] - gp1 * s[4]
    out[5] = -e1 * s[4] + g2 * s[8] - gr1 * (s[5] - zt1)

    out[6] = d2 * s[7] + d1 * s[8] - (gp1 + gp2) * s[6]
    out[7] = -g2 * s[2] - d2 * s[6] + d1 * s[11] + e2 * s[9] - (gp1 + gp2) * s[7]
    # the e1 term couples to Pi_zx: this is what -i[H, rho] yields
    out[8] = -g2 * s[5] - d1 * s[6] + d2 * s[11] + e1 * s[10] - (gp1 + gp2) * s[8]
    out[9] = g2 * s[1] - e2 * s[7] + d1 * s[12] - (gp1 + gr2) * s[9]
    out[10] = g2 * s[4] - e1 * s[8] + d2 * s[13] - (gp2 + gr1) * s[10]

    out[11] = -d1 * s[7] - d2 * s[8] + e2 * s[12] + e1 * s[13] - (gp1 + gp2) * s[11]

    out[12] = -d1 * s[9] - e2 * s[11] + e1 * s[14] - (gp1 + gr2) * s[12]
    out[13] = -d2 * s[10] - e1 * s[11] + e2 * s[14] - (gr1 + gp2) * s[13]

    out[14] = -e1 * s[12] - e2 * s[13] - (gr1 + gr2) * (s[14] - zt1 * zt2)


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise ModelError("non-finite input")


def deterministic_rhs(state, params: SystemParams, bias=(0.0, 0.0)) -> np.ndarray:
    """Time derivative of the Bloch tensor at fixed biases ``(eps1, eps2)``."""
    s = np.asarray(state, dtype=np.float64)
    if s.shape != (15,):
        raise ModelError(f"state must have 15 components, got shape {s.shape}")
    e1, e2 = (float(b) for b in bias)
    _check_finite(s, np.array([e1, e2]))
    out = np.empty(15)
    _rhs_into(s, params.as_array(), e1, e2, out)
    return out


def linear_form(params: SystemParams):
    """Return ``(A0, A1, A2, c)`` with rhs = (A0 + eps1*A1 + eps2*A2) @ s + c."""
    p = params.as_array()
    out = np.empty(15)
    zero = np.zeros(15)
    _rhs_into(zero, p, 0.0, 0.0, out)
    c = out.copy()
    mats = []
    for e1, e2 in ((0.0, 0.0), (1.0, 0.0), (0.0, 1.0)):
        m = np.empty((15, 15))
        for j in range(15):
            col = np.zeros(15)
            col[j] = 1.0
            _rhs_into(col, p, e1, e2, out)
            m[:, j] = out - c
        mats.append(m)
    a0, a1, a2 = mats
    return a0, a1 - a0, a2 - a0, c


# -- states ---------------------------------------------------------------

def thermal_state(params: SystemParams) -> np.ndarray:
    """Fixed point of the uncoupled, unbiased dynamics."""
    s = np.zeros(15)
    s[I0Z] = params.z_t2
    s[IZ0] = params.z_t1
    s[IZZ] = params.z_t1 * params.z_t2
    return s


def product_state(bloch1, bloch2) -> np.ndarray:
    """Embed two single-qubit Bloch vectors with all mixed components zero.

    ``bloch1`` fills the (Pi_x0, Pi_y0, Pi_z0) sector, ``bloch2`` the
    (Pi_0x, Pi_0y, Pi_0z) sector.
    """
    b1 = np.asarray(bloch1, dtype=np.float64)
    b2 = np.asarray(bloch2, dtype=np.float64)
    for b in (b1, b2):
        if b.shape != (3,):
            raise ModelError("Bloch vectors must have 3 components")
        if np.linalg.norm(b) > 1 + 1e-12:
            raise ModelError(f"Bloch vector norm exceeds 1: {b}")
    s = np.zeros(15)
    s[IX0:IZ0 + 1] = b1
    s[I0X:I0Z + 1] = b2
    return s


def to_density_matrix(state) -> np.ndarray:
    s = np.asarray(state, dtype=np.float64)
    rho = 0.25 * np.kron(PAULI["0"], PAULI["0"])
    for v, name in zip(s, COMPONENTS):
        rho = rho + 0.25 * v * np.kron(PAULI[name[0]], PAULI[name[1]])
    return rho


def from_density_matrix(rho) -> np.ndarray:
    rho = np.asarray(rho)
    return np.array([
        np.trace(np.kron(PAULI[n[0]], PAULI[n[1]]) @ rho).real for n in COMPONENTS
    ])


def purity(state) -> float:
    """Tr rho^2 = (1 + |Pi|^2) / 4."""
    s = np.asarray(state, dtype=np.float64)
    return 0.25 * (1.0 + float(s @ s))


# -- Hamiltonian ------------------------------------------------------------

def build_hamiltonian(params: SystemParams, bias=(0.0, 0.0)) -> np.ndarray:
    """Real symmetric 4x4 Hamiltonian in the sigma_z product basis.

    Basis order |00>, |01>, |10>, |11> with |0> the +1 eigenstate of sigma_z.
    """
    e1, e2 = (float(b) for b in bias)
    _check_finite(np.array([e1, e2]))
    d1, d2, g = params.delta1, params.delta2, params.g
    h = np.zeros((4, 4))
    zs = ((1, 1), (1, -1), (-1, 1), (-1, -1))
    for i, (z1, z2) in enumerate(zs):
        h[i, i] = -0.5 * (d1 * z1 + d2 * z2)
    # sigma_x on qubit 1 flips the high bit, on qubit 2 the low bit
    for i in range(4):
        h[i, i ^ 2] += -0.5 * e1
        h[i, i ^ 1] += -0.5 * e2
        h[i, i ^ 3] += g
    return h


def eigen_oracle(h, tol=1e-14, max_sweeps=100) -> np.ndarray:
    """Ascending eigenvalues of a real symmetric matrix by cyclic Jacobi rotations."""
    a = np.array(h, dtype=np.float64)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ModelError("matrix must be square")
    scale = max(np.abs(a).max(), 1.0)
    if np.abs(a - a.T).max() > 1e-12 * scale:
        raise ModelError("matrix is not symmetric")
    a = 0.5 * (a + a.T)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.tril(a, -1) ** 2))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rot = np.eye(n)
                rot[p, p] = rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
    else:
        raise ModelError("Jacobi iteration did not converge")
    return np.sort(np.diag(a))
