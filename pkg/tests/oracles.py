"""Independent re-implementations used as test oracles.

These follow the defining formulas term by term with explicit inverses and
loops, sharing no code with the package.
"""

import cmath
import math

import numpy as np


def steering(angle, n, ratio=0.5):
    return np.array([cmath.exp(-2j * math.pi * k * ratio * math.sin(angle)) for k in range(n)])


def kappa(eta, b):
    return eta**2 / (1 - eta**2 / (3 * b**2))


def covariances(n, thetas, s_vars, phis, v_vars, noise, ratio=0.5):
    cx = noise * np.eye(n, dtype=complex)
    for t, v in zip(thetas, s_vars):
        a = steering(t, n, ratio)
        cx += v * np.outer(a, a.conj())
    for t, v in zip(phis, v_vars):
        a = steering(t, n, ratio)
        cx += v * np.outer(a, a.conj())
    csx = np.array([v * steering(t, n, ratio).conj() for t, v in zip(thetas, s_vars)])
    gamma = csx @ np.linalg.inv(cx)
    return cx, csx, gamma


def quant_term(A, cx, eta, b):
    if b is None:
        return 0.0
    P = A.shape[0]
    return 2 * kappa(eta, b) * np.trace(A @ cx @ A.conj().T).real / (3 * b**2 * P)


def ex_mse(A, cx, gamma, eta=3.0, b=16):
    P = A.shape[0]
    r = A @ cx @ A.conj().T + quant_term(A, cx, eta, b) * np.eye(P)
    m = gamma @ cx @ gamma.conj().T - gamma @ cx @ A.conj().T @ np.linalg.inv(r) @ A @ cx @ gamma.conj().T
    return np.trace(m).real


def mse_full(A, B, cs, cx, csx, eta=3.0, b=16):
    q = quant_term(A, cx, eta, b)
    m = cs - 2 * csx @ A.conj().T @ B.conj().T + B @ A @ cx @ A.conj().T @ B.conj().T + q * B @ B.conj().T
    return np.trace(m).real


def fd_gradient(f, A, h=1e-6):
    """Central differences: df/dRe + j df/dIm, entry by entry."""
    G = np.zeros_like(A, dtype=complex)
    for idx in np.ndindex(A.shape):
        E = np.zeros_like(A, dtype=complex)
        E[idx] = h
        dre = (f(A + E) - f(A - E)) / (2 * h)
        dim = (f(A + 1j * E) - f(A - 1j * E)) / (2 * h)
        G[idx] = dre + 1j * dim
    return G


def nearest_point(value, points):
    """Brute-force nearest point; ties to smallest modulus, then smallest phase."""
    best = None
    for p in points:
        key = (round(abs(value - p), 12), round(abs(p), 12), cmath.phase(p))
        if best is None or key < best[0]:
            best = (key, p)
    return best[1]
