"""Brute-force entanglement of formation for two-qubit Werner states.

Run once, before the main tests, to freeze ``tests/data/werner_oracle.json``:

    python tests/oracles/werner_oracle.py

Independent of the qroof optimizers: each restart draws a complex Gaussian
``m x 4`` matrix ``Z``, maps it to an isometry by the polar factor
``Z (Z^H Z)^{-1/2}``, and minimizes the average reduced entropy of the induced
pure decomposition with scipy's L-BFGS using jax gradients. Werner states are
built here from their definition, not from the package.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import jax
import jax.numpy as jnp
import numpy as np
from scipy.optimize import minimize

jax.config.update("jax_enable_x64", True)

WEIGHTS = (0.5, 0.7, 0.9)
RESTARTS = 512
ATOMS = 16
SEED = 20240601
OUT = Path(__file__).resolve().parents[1] / "data" / "werner_oracle.json"


def werner(p):
    psi = np.array([0.0, 1.0, -1.0, 0.0]) / np.sqrt(2.0)
    return p * np.outer(psi, psi) + (1 - p) * np.eye(4) / 4


def make_objective(rho):
    lam, vec = np.linalg.eigh(rho)
    keep = lam > 1e-12
    factor = jnp.asarray(vec[:, keep] * np.sqrt(lam[keep]))
    r = int(keep.sum())

    def avg_entropy(z):
        zc = (z[: ATOMS * r] + 1j * z[ATOMS * r :]).reshape(ATOMS, r)
        s, u = jnp.linalg.eigh(zc.conj().T @ zc)
        iso = zc @ (u * (1.0 / jnp.sqrt(s))) @ u.conj().T
        vecs = iso @ factor.T  # rows: unnormalized atoms
        m = vecs.reshape(ATOMS, 2, 2)
        red = jnp.einsum("kij,klj->kil", m, m.conj())
        mu = jnp.clip(jnp.linalg.eigvalsh(red), 1e-300, None)
        w = jnp.clip(jnp.sum(mu, axis=1), 1e-300, None)
        # sum_k w_k H(red_k / w_k)
        return -jnp.sum(mu * jnp.log2(mu)) + jnp.sum(w * jnp.log2(w))

    return jax.jit(jax.value_and_grad(avg_entropy)), r


def oracle_value(p, rng):
    fun, r = make_objective(werner(p))

    def f(z):
        v, g = fun(jnp.asarray(z))
        return float(v), np.asarray(g, dtype=float)

    best = np.inf
    for _ in range(RESTARTS):
        z0 = rng.standard_normal(2 * ATOMS * r)
        res = minimize(f, z0, jac=True, method="L-BFGS-B", options={"maxiter": 3000, "ftol": 1e-15, "gtol": 1e-10})
        best = min(best, res.fun)
    return best


def main():
    rng = np.random.default_rng(SEED)
    rows = []
    for p in WEIGHTS:
        v = oracle_value(p, rng)
        rows.append({"p": p, "eof": v})
        print(f"p={p}: {v:.12f}", file=sys.stderr)
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps({"restarts": RESTARTS, "atoms": ATOMS, "seed": SEED, "values": rows}, indent=2) + "\n")


if __name__ == "__main__":
    main()
