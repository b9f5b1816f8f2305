"""Density matrices, bipartite structure, energy observables and seeded sampling.

States are plain ``numpy`` arrays: a density matrix is a ``(d, d)`` complex
array, a pure state a ``(d,)`` complex vector. Validation helpers repair
round-off (Hermitian symmetrization) and reject anything beyond tolerance.

Composite index convention: ``|i>_A (x) |j>_B`` is row ``i * dim_B + j``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

HERM_TOL = 1e-8
PSD_TOL = 1e-9
TRACE_TOL = 1e-8
NORM_TOL = 1e-8
EIG_FLOOR = 1e-12
RANK_TOL = 1e-10


class StateError(ValueError):
    """Input is not a valid state (or operator) within tolerance."""


class ShapeError(ValueError):
    """Dimensions of the arguments do not fit together."""


class ConstraintError(ValueError):
    """An energy constraint cannot be satisfied."""


@dataclass(frozen=True)
class BipartiteShape:
    dim_A: int
    dim_B: int

    def __post_init__(self):
        if int(self.dim_A) < 1 or int(self.dim_B) < 1:
            raise ShapeError(f"factor dimensions must be positive, got {self.dim_A}x{self.dim_B}")

    @property
    def dim(self) -> int:
        return self.dim_A * self.dim_B

    @classmethod
    def parse(cls, text: str) -> "BipartiteShape":
        try:
            a, b = text.lower().split("x")
            return cls(int(a), int(b))
        except ValueError as exc:
            raise ShapeError(f"cannot parse bipartite dims {text!r}, expected e.g. '2x2'") from exc

    def swapped(self) -> "BipartiteShape":
        return BipartiteShape(self.dim_B, self.dim_A)


def hermitian_part(a):
    a = np.asarray(a, dtype=complex)
    return 0.5 * (a + np.swapaxes(a, -1, -2).conj())


def as_state(rho, *, herm_tol=HERM_TOL, psd_tol=PSD_TOL, trace_tol=TRACE_TOL) -> np.ndarray:
    """Validate a density matrix and return its Hermitian-symmetrized copy.

    A 1-D input is treated as a pure state vector and promoted to its projector.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim == 1:
        return projector(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1] or rho.shape[0] == 0:
        raise ShapeError(f"density matrix must be square, got shape {rho.shape}")
    dev = np.max(np.abs(rho - rho.conj().T))
    if dev > herm_tol:
        raise StateError(f"matrix is not Hermitian (deviation {dev:.3g})")
    rho = hermitian_part(rho)
    tr = np.trace(rho).real
    if abs(tr - 1.0) > trace_tol:
        raise StateError(f"trace is {tr:.12g}, expected 1")
    lam_min = np.linalg.eigvalsh(rho)[0]
    if lam_min < -psd_tol:
        raise StateError(f"matrix has negative eigenvalue {lam_min:.3g}")
    return rho


def as_pure(psi, *, norm_tol=NORM_TOL) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    if psi.ndim != 1 or psi.size == 0:
        raise ShapeError(f"pure state must be a non-empty vector, got shape {psi.shape}")
    nrm = np.linalg.norm(psi)
    if abs(nrm - 1.0) > norm_tol:
        raise StateError(f"state vector has norm {nrm:.12g}, expected 1")
    return psi / nrm


def projector(psi) -> np.ndarray:
    psi = as_pure(psi)
    return np.outer(psi, psi.conj())


def is_pure(rho, tol=1e-9) -> bool:
    rho = np.asarray(rho)
    if rho.ndim == 1:
        return True
    return abs(np.real(np.trace(rho @ rho)) - 1.0) <= tol


def trace_norm(a) -> float:
    """Trace norm of a Hermitian matrix (sum of |eigenvalues|)."""
    return float(np.abs(np.linalg.eigvalsh(hermitian_part(a))).sum())


def spectrum(rho) -> np.ndarray:
    """Eigenvalues of a state, clipped at zero, ascending."""
    return np.clip(np.linalg.eigvalsh(hermitian_part(rho)), 0.0, None)


def _check_shape(omega, shape: BipartiteShape):
    if omega.shape[-1] != shape.dim:
        raise ShapeError(f"state of dimension {omega.shape[-1]} does not match {shape.dim_A}x{shape.dim_B}")


def partial_trace(omega, shape: BipartiteShape, keep: str = "A") -> np.ndarray:
    """Reduced state on the kept factor.

    ``keep`` is ``"A"`` (trace out B) or ``"B"`` (trace out A). Works on a
    stack of matrices ``(..., d, d)`` without validation; single matrices are
    validated as states.
    """
    omega = np.asarray(omega, dtype=complex)
    if omega.ndim == 1:
        omega = projector(omega)
    _check_shape(omega, shape)
    if omega.ndim == 2:
        omega = as_state(omega)
    lead = omega.shape[:-2]
    t = omega.reshape(lead + (shape.dim_A, shape.dim_B, shape.dim_A, shape.dim_B))
    if keep in ("A", "keep_A"):
        return np.einsum("...ijkj->...ik", t)
    if keep in ("B", "keep_B"):
        return np.einsum("...ijil->...jl", t)
    raise ValueError(f"keep must be 'A' or 'B', got {keep!r}")


def mean_energy(rho, hamiltonian) -> float:
    """``Tr(H rho)`` for a positive semidefinite observable ``H``."""
    rho = as_state(rho)
    h = np.asarray(hamiltonian, dtype=complex)
    if h.shape != rho.shape:
        raise ShapeError(f"observable of shape {h.shape} does not match state of shape {rho.shape}")
    return float(np.real(np.trace(h @ rho)))


def check_constraint_operator(h) -> np.ndarray:
    h = np.asarray(h, dtype=complex)
    if h.ndim == 1:
        h = np.diag(h)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ShapeError(f"constraint operator must be square, got {h.shape}")
    if np.max(np.abs(h - h.conj().T)) > HERM_TOL:
        raise StateError("constraint operator is not Hermitian")
    h = hermitian_part(h)
    if np.linalg.eigvalsh(h)[0] < -PSD_TOL:
        raise StateError("constraint operator must be positive semidefinite")
    return h


def ground_state(h) -> tuple[float, np.ndarray]:
    vals, vecs = np.linalg.eigh(check_constraint_operator(h))
    return float(vals[0]), vecs[:, 0]


# ---------------------------------------------------------------- sampling


def _rng(seed):
    return np.random.default_rng(seed)


def _ginibre(rng, rows, cols):
    return (rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))) / np.sqrt(2)


def random_unitary(d: int, seed=None) -> np.ndarray:
    rng = seed if isinstance(seed, np.random.Generator) else _rng(seed)
    q, r = np.linalg.qr(_ginibre(rng, d, d))
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def haar_pure(dim: int, seed=None) -> np.ndarray:
    rng = seed if isinstance(seed, np.random.Generator) else _rng(seed)
    v = _ginibre(rng, dim, 1)[:, 0]
    return v / np.linalg.norm(v)


def induced_mixed(dim: int, rank: int | None = None, seed=None) -> np.ndarray:
    """Random state of the given rank from the induced (Hilbert-Schmidt type) measure."""
    rng = seed if isinstance(seed, np.random.Generator) else _rng(seed)
    rank = dim if rank is None else int(rank)
    if not 1 <= rank <= dim:
        raise ShapeError(f"rank must be in [1, {dim}], got {rank}")
    g = _ginibre(rng, dim, rank)
    rho = g @ g.conj().T
    return hermitian_part(rho / np.trace(rho).real)


def separable_mixture(shape: BipartiteShape, k_terms: int, seed=None, *, return_ensemble=False):
    """Convex combination of ``k_terms`` random product pure states.

    With ``return_ensemble=True`` the generating ensemble is returned alongside.
    """
    from .ensembles import Ensemble

    rng = seed if isinstance(seed, np.random.Generator) else _rng(seed)
    w = rng.dirichlet(np.ones(k_terms))
    vecs = [np.kron(haar_pure(shape.dim_A, rng), haar_pure(shape.dim_B, rng)) for _ in range(k_terms)]
    ens = Ensemble(w, vecs)
    rho = ens.barycenter()
    return (rho, ens) if return_ensemble else rho


def energy_constrained(hamiltonian, h: float, seed=None, rank: int | None = None) -> np.ndarray:
    """Random state with ``Tr(H rho) <= h``.

    A random mixed state is drawn; if it violates the bound it is mixed with a
    ground state of ``H`` just enough to satisfy it.
    """
    hm = check_constraint_operator(hamiltonian)
    e0, g = ground_state(hm)
    if h < e0 - 1e-12:
        raise ConstraintError(f"energy bound {h} is below the ground energy {e0}")
    rho = induced_mixed(hm.shape[0], rank, seed)
    e = float(np.real(np.trace(hm @ rho)))
    if e > h:
        t = (e - h) / (e - e0)
        rho = (1 - t) * rho + t * np.outer(g, g.conj())
    return hermitian_part(rho)


def sample_state(kind: str, dims, seed=None, **kwargs) -> np.ndarray:
    """Dispatch to a sampler by name.

    ``kind`` is one of ``haar_pure``, ``induced_mixed`` (``rank=``),
    ``separable_mixture`` (``k_terms=``), ``energy_constrained``
    (``hamiltonian=``, ``h=``). ``dims`` is an int or ``(dA, dB)``.
    """
    if isinstance(dims, BipartiteShape):
        shape = dims
    elif np.ndim(dims) == 0:
        shape = BipartiteShape(int(dims), 1)
    else:
        dims = list(dims)
        shape = BipartiteShape(int(dims[0]), int(dims[1]) if len(dims) > 1 else 1)
    if kind == "haar_pure":
        return haar_pure(shape.dim, seed)
    if kind == "induced_mixed":
        return induced_mixed(shape.dim, kwargs.get("rank"), seed)
    if kind == "separable_mixture":
        return separable_mixture(shape, kwargs.get("k_terms", 3), seed)
    if kind == "energy_constrained":
        return energy_constrained(kwargs["hamiltonian"], kwargs["h"], seed, kwargs.get("rank"))
    raise ValueError(f"unknown sampler {kind!r}")


def bell_state(kind: str = "phi+") -> np.ndarray:
    s = 1 / np.sqrt(2)
    vecs = {
        "phi+": [s, 0, 0, s],
        "phi-": [s, 0, 0, -s],
        "psi+": [0, s, s, 0],
        "psi-": [0, s, -s, 0],
    }
    return np.array(vecs[kind], dtype=complex)


def werner_state(p: float) -> np.ndarray:
    """Two-qubit Werner state ``p |psi-><psi-| + (1 - p) I/4``."""
    psi = bell_state("psi-")
    return p * np.outer(psi, psi.conj()) + (1 - p) * np.eye(4) / 4


def permute_subsystems(omega, dims, perm) -> np.ndarray:
    """Reorder tensor factors of a matrix acting on ``prod(dims)``."""
    omega = np.asarray(omega)
    n = len(dims)
    t = omega.reshape(tuple(dims) * 2)
    t = t.transpose(list(perm) + [p + n for p in perm])
    d = int(np.prod(dims))
    return t.reshape(d, d)
