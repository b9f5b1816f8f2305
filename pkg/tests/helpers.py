"""Shared test utilities. Closed forms here are cross-checks only."""

import numpy as np

from qroof.states import hermitian_part


def wootters_eof(rho):
    """Two-qubit entanglement of formation (bits) from the concurrence formula."""
    sy = np.array([[0, -1j], [1j, 0]])
    yy = np.kron(sy, sy)
    r = rho @ yy @ rho.conj() @ yy
    lam = np.sqrt(np.clip(np.sort(np.linalg.eigvals(r).real)[::-1], 0, None))
    c = max(0.0, lam[0] - lam[1] - lam[2] - lam[3])
    x = (1 + np.sqrt(1 - c * c)) / 2
    if x >= 1:
        return 0.0
    return float(-x * np.log2(x) - (1 - x) * np.log2(1 - x))


def random_hermitian(d, rng):
    a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return hermitian_part(a)


def entropy_bits(rho):
    mu = np.linalg.eigvalsh(rho)
    mu = mu[mu > 1e-15]
    return float(-np.sum(mu * np.log2(mu)))
