"""Finite ensembles of states and the decompositions hulls and roofs optimize over."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .states import RANK_TOL, ShapeError, StateError, as_state, hermitian_part, projector, trace_norm

WEIGHT_FLOOR = 1e-12


class Ensemble:
    """A finite list of ``(weight, state)`` atoms.

    States are pure vectors ``(d,)`` or density matrices ``(d, d)`` and may be
    mixed within one ensemble. Weights are renormalized after atoms below
    ``WEIGHT_FLOOR`` are dropped.
    """

    def __init__(self, weights, states, *, validate=True):
        w = np.asarray(weights, dtype=float).ravel()
        states = [np.asarray(s, dtype=complex) for s in states]
        if len(states) == 0 or len(states) != w.size:
            raise ShapeError("ensemble needs one weight per atom and at least one atom")
        if np.any(w < 0):
            raise StateError("ensemble weights must be nonnegative")
        if validate and abs(w.sum() - 1.0) > 1e-10:
            raise StateError(f"ensemble weights sum to {w.sum():.12g}, expected 1")
        dims = {s.shape[0] for s in states}
        if len(dims) != 1:
            raise ShapeError(f"ensemble atoms have mixed dimensions {sorted(dims)}")
        keep = w >= WEIGHT_FLOOR
        if not keep.any():
            raise StateError("all ensemble weights are below the weight floor")
        w = w[keep]
        states = [s for s, k in zip(states, keep) if k]
        if validate:
            for s in states:
                if s.ndim == 1:
                    if abs(np.linalg.norm(s) - 1) > 1e-8:
                        raise StateError("pure atom is not normalized")
                else:
                    as_state(s)
        self.weights = w / w.sum()
        self.states = tuple(s if s.ndim == 1 else hermitian_part(s) for s in states)
        self.dim = states[0].shape[0]

    def __len__(self):
        return len(self.states)

    def __iter__(self):
        return iter(zip(self.weights, self.states))

    def __repr__(self):
        return f"Ensemble(atoms={len(self)}, dim={self.dim})"

    def density(self, i) -> np.ndarray:
        s = self.states[i]
        return projector(s) if s.ndim == 1 else s

    def densities(self) -> np.ndarray:
        return np.stack([self.density(i) for i in range(len(self))])

    @property
    def is_pure(self) -> bool:
        return all(s.ndim == 1 for s in self.states)

    def barycenter(self) -> np.ndarray:
        return barycenter(self)

    def average(self, f) -> float:
        """Ensemble average ``sum_i w_i f(rho_i)``."""
        return float(sum(w * f(self.density(i)) for i, w in enumerate(self.weights)))


def barycenter(e: Ensemble) -> np.ndarray:
    return hermitian_part(np.einsum("i,ijk->jk", e.weights, e.densities()))


@dataclass(frozen=True)
class Support:
    """Spectral data of a state restricted to its support."""

    eigvals: np.ndarray  # (r,)
    eigvecs: np.ndarray  # (d, r)

    @property
    def rank(self) -> int:
        return self.eigvals.size

    @property
    def sqrt_factor(self) -> np.ndarray:
        """``E diag(sqrt(lambda))`` so that ``rho = F F^dagger``."""
        return self.eigvecs * np.sqrt(self.eigvals)


def support(rho, rank_tol=RANK_TOL) -> Support:
    vals, vecs = np.linalg.eigh(hermitian_part(rho))
    idx = np.where(vals > rank_tol)[0][::-1]
    return Support(vals[idx], vecs[:, idx])


def check_isometry(v, tol=1e-10) -> np.ndarray:
    v = np.asarray(v, dtype=complex)
    if v.ndim != 2 or v.shape[0] < v.shape[1]:
        raise ShapeError(f"isometry must be tall, got shape {v.shape}")
    dev = np.max(np.abs(v.conj().T @ v - np.eye(v.shape[1])))
    if dev > tol:
        raise StateError(f"columns are not orthonormal (deviation {dev:.3g})")
    return v


def random_isometry(rows: int, cols: int, seed=None) -> np.ndarray:
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    g = rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))
    q, r = np.linalg.qr(g)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def pure_decomposition(rho, v) -> Ensemble:
    """Pure-state decomposition of ``rho`` parameterized by an ``m x r`` isometry.

    Atom ``i`` is ``sum_j V[i, j] sqrt(lambda_j) |e_j>`` normalized, with weight
    equal to its squared norm.
    """
    rho = as_state(rho)
    sup = support(rho)
    v = check_isometry(v)
    if v.shape[1] != sup.rank:
        raise ShapeError(f"isometry has {v.shape[1]} columns but rank(rho) = {sup.rank}")
    tilde = v @ sup.sqrt_factor.T  # rows are unnormalized atoms
    w = np.sum(np.abs(tilde) ** 2, axis=1)
    keep = w >= WEIGHT_FLOOR
    vecs = tilde[keep] / np.sqrt(w[keep])[:, None]
    return Ensemble(w[keep] / w[keep].sum(), list(vecs), validate=False)


def check_povm(povm, dim, tol=1e-9) -> list:
    elems = [hermitian_part(m) for m in povm]
    if not elems:
        raise StateError("POVM must have at least one element")
    for m in elems:
        if m.shape != (dim, dim):
            raise ShapeError(f"POVM element has shape {m.shape}, expected {(dim, dim)}")
        if np.linalg.eigvalsh(m)[0] < -1e-10:
            raise StateError("POVM element is not positive semidefinite")
    return elems


def mixed_decomposition(rho, povm) -> Ensemble:
    """Decomposition ``w_i = Tr(sqrt(rho) M_i sqrt(rho))``, ``rho_i = sqrt(rho) M_i sqrt(rho) / w_i``.

    ``povm`` elements act on the full space; only their compression to the
    support of ``rho`` matters, and that compression must sum to the support
    identity.
    """
    rho = as_state(rho)
    sup = support(rho)
    elems = check_povm(povm, rho.shape[0])
    e = sup.eigvecs
    total = sum(e.conj().T @ m @ e for m in elems)
    dev = np.max(np.abs(total - np.eye(sup.rank)))
    if dev > 1e-9:
        raise StateError(f"POVM is not complete on the support of rho (deviation {dev:.3g})")
    sq = sup.sqrt_factor @ e.conj().T
    atoms = [hermitian_part(sq @ m @ sq.conj().T) for m in elems]
    w = np.array([np.trace(a).real for a in atoms])
    keep = w >= WEIGHT_FLOOR
    states = [a / wi for a, wi, k in zip(atoms, w, keep) if k]
    return Ensemble(w[keep] / w[keep].sum(), states, validate=False)


def random_povm(dim: int, n_elements: int, rank: int = 1, seed=None) -> list:
    """POVM of ``n_elements`` rank-``rank`` elements from a random isometry."""
    v = random_isometry(n_elements * rank, dim, seed)
    blocks = v.reshape(n_elements, rank, dim)
    return [b.conj().T @ b for b in blocks]


def coarse_grain(e: Ensemble, cell_diameter: float, splitter=None) -> Ensemble:
    """Merge nearby atoms while keeping the barycenter.

    Atoms are assigned greedily in order: an atom joins the first existing
    cluster whose members all lie within ``cell_diameter`` (trace norm) of it,
    otherwise it opens a new cluster. Each cluster is replaced by its total
    weight and weighted mean state.

    ``splitter`` is an optional ``(H, c)`` pair; atoms with ``Tr(H rho) <= c``
    are never clustered with atoms above ``c``.
    """
    if cell_diameter <= 0:
        raise ValueError("cell_diameter must be positive")
    rhos = e.densities()
    side = np.zeros(len(e), dtype=int)
    if splitter is not None:
        h, c = splitter
        h = np.asarray(h, dtype=complex)
        if h.ndim == 1:
            h = np.diag(h)
        energies = np.einsum("jk,ikj->i", h, rhos).real
        side = (energies > c).astype(int)
    clusters: list[list[int]] = []
    for i in range(len(e)):
        for cl in clusters:
            if side[cl[0]] == side[i] and all(trace_norm(rhos[i] - rhos[j]) <= cell_diameter for j in cl):
                cl.append(i)
                break
        else:
            clusters.append([i])
    weights, states = [], []
    for cl in clusters:
        wc = e.weights[cl]
        weights.append(wc.sum())
        if len(cl) == 1:
            states.append(e.states[cl[0]])
        else:
            states.append(hermitian_part(np.einsum("i,ijk->jk", wc, rhos[cl]) / wc.sum()))
    return Ensemble(np.array(weights), states, validate=False)
