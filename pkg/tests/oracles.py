"""Reference computations that share no code path with the package."""
import itertools

import numpy as np

P = {
    "0": np.eye(2, dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}
NAMES = ["0x", "0y", "0z", "x0", "y0", "z0", "xx", "xy", "yx",
         "xz", "zx", "yy", "yz", "zy", "zz"]
OPS = {n: np.kron(P[n[0]], P[n[1]]) for n in NAMES}


def hamiltonian_kron(d1, d2, g, e1, e2):
    i2 = P["0"]
    return (-0.5 * (d1 * np.kron(P["z"], i2) + d2 * np.kron(i2, P["z"]))
            - 0.5 * (e1 * np.kron(P["x"], i2) + e2 * np.kron(i2, P["x"]))
            + g * np.kron(P["x"], P["x"]))


def rho_from_bloch(s):
    rho = np.eye(4, dtype=complex) / 4
    for v, n in zip(s, NAMES):
        rho += v * OPS[n] / 4
    return rho


def bloch_from_rho(rho):
    return np.array([np.trace(OPS[n] @ rho).real for n in NAMES])


def dissipator(rho, gp1, gp2, gr1, gr2, zt1, zt2):
    """Component-wise decay: rate(a on qubit 1) + rate(b on qubit 2), with
    rate(x) = rate(y) = dephasing and rate(z) = relaxation, toward the
    thermal values of the z-type components."""
    r1 = {"0": 0.0, "x": gp1, "y": gp1, "z": gr1}
    r2 = {"0": 0.0, "x": gp2, "y": gp2, "z": gr2}
    target = {"0z": zt2, "z0": zt1, "zz": zt1 * zt2}
    out = np.zeros((4, 4), dtype=complex)
    for n in NAMES:
        pi = np.trace(OPS[n] @ rho).real
        out -= 0.25 * (r1[n[0]] + r2[n[1]]) * (pi - target.get(n, 0.0)) * OPS[n]
    return out


def rhs_density(s, p, bias):
    """d(Pi)/dt via -i[H, rho] + dissipator in 4x4 matrix form."""
    d1, d2, g, gp1, gp2, gr1, gr2, zt1, zt2 = p
    h = hamiltonian_kron(d1, d2, g, *bias)
    rho = rho_from_bloch(s)
    drho = -1j * (h @ rho - rho @ h) + dissipator(rho, gp1, gp2, gr1, gr2, zt1, zt2)
    return bloch_from_rho(drho)


def dft(x):
    x = np.asarray(x, dtype=complex)
    n = x.size
    k = np.arange(n)
    return np.array([np.sum(x * np.exp(-2j * np.pi * m * k / n)) for m in range(n)])


def charpoly_eigs(a):
    """Eigenvalues from Faddeev-LeVerrier coefficients, polished by Newton."""
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    coeffs = [1.0]
    m = np.zeros_like(a)
    for k in range(1, n + 1):
        m = a @ m + coeffs[-1] * np.eye(n)
        coeffs.append(-np.trace(a @ m) / k)
    roots = np.sort(np.roots(coeffs).real)
    dp = np.polyder(coeffs)
    for _ in range(20):
        step = np.polyval(coeffs, roots) / np.where(np.polyval(dp, roots) == 0, 1, np.polyval(dp, roots))
        roots = roots - np.where(np.isfinite(step), step, 0)
    return np.sort(roots)


def all_gaps(eigs):
    return np.sort([abs(a - b) for a, b in itertools.combinations(eigs, 2)])


def random_params(rng):
    return (rng.uniform(0.5, 2), rng.uniform(0.5, 2), rng.uniform(-1.5, 1.5),
            rng.uniform(0, 0.3), rng.uniform(0, 0.3), rng.uniform(0, 0.3), rng.uniform(0, 0.3),
            rng.uniform(-1, 1), rng.uniform(-1, 1))
