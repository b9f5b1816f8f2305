"""Channels, finite-outcome instruments and local operations on bipartite states."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .convexify import OptimizerConfig
from .ensembles import Ensemble, random_isometry
from .monotones import InputError, MonotoneSpec, entanglement_monotone
from .states import BipartiteShape, ShapeError, StateError, as_state, hermitian_part

PROB_FLOOR = 1e-10
COMPLETENESS_TOL = 1e-9


def _completeness(kraus, tol=COMPLETENESS_TOL):
    ks = np.asarray(kraus, dtype=complex)
    total = np.einsum("kji,kjl->il", ks.conj(), ks)
    dev = np.max(np.abs(total - np.eye(ks.shape[2])))
    if dev > tol:
        raise StateError(f"Kraus operators are not trace preserving (deviation {dev:.3g})")


@dataclass(frozen=True, eq=False)
class QuantumChannel:
    kraus: np.ndarray  # (n_kraus, d_out, d_in)

    def __post_init__(self):
        ks = np.asarray(self.kraus, dtype=complex)
        if ks.ndim == 2:
            ks = ks[None]
        if ks.ndim != 3 or ks.shape[0] == 0:
            raise ShapeError("channel needs a non-empty list of Kraus matrices")
        _completeness(ks)
        object.__setattr__(self, "kraus", ks)

    @property
    def d_in(self):
        return self.kraus.shape[2]

    @property
    def d_out(self):
        return self.kraus.shape[1]

    def __call__(self, rho):
        return apply_channel(self, rho)


@dataclass(frozen=True, eq=False)
class Instrument:
    outcomes: tuple  # each an array (n_kraus, d, d)
    labels: tuple = field(default=())

    def __post_init__(self):
        outs = tuple(np.asarray(o, dtype=complex).reshape((-1,) + np.shape(o)[-2:]) for o in self.outcomes)
        if not outs or any(o.shape[0] == 0 for o in outs):
            raise ShapeError("instrument needs at least one outcome with Kraus matrices")
        _completeness(np.concatenate(outs))
        object.__setattr__(self, "outcomes", outs)

    @property
    def dim(self):
        return self.outcomes[0].shape[2]

    def all_kraus(self):
        return np.concatenate(self.outcomes)

    def as_channel(self) -> QuantumChannel:
        return QuantumChannel(self.all_kraus())


def as_channel(ch) -> QuantumChannel:
    return ch if isinstance(ch, QuantumChannel) else QuantumChannel(np.asarray(ch))


def apply_kraus(kraus, rho):
    ks = np.asarray(kraus, dtype=complex)
    return hermitian_part(np.einsum("kij,jl,kml->im", ks, rho, ks.conj()))


def apply_channel(ch: QuantumChannel, rho) -> np.ndarray:
    ch = as_channel(ch)
    rho = as_state(rho)
    if rho.shape[0] != ch.d_in:
        raise ShapeError(f"channel input dimension {ch.d_in} does not match state dimension {rho.shape[0]}")
    return apply_kraus(ch.kraus, rho)


def apply_instrument(inst: Instrument, omega, prob_floor=PROB_FLOOR):
    """Outcome probabilities and posterior states ``[(p_i, omega_i), ...]``.

    Outcomes with probability below ``prob_floor`` are dropped.
    """
    omega = as_state(omega)
    if omega.shape[0] != inst.dim:
        raise ShapeError(f"instrument acts on dimension {inst.dim}, state has {omega.shape[0]}")
    out = []
    for ks in inst.outcomes:
        un = apply_kraus(ks, omega)
        p = float(np.trace(un).real)
        if p >= prob_floor:
            out.append((p, un / p))
    return out


def nonselective(inst: Instrument, omega) -> np.ndarray:
    return apply_kraus(inst.all_kraus(), as_state(omega))


def identity_channel(d: int) -> QuantumChannel:
    return QuantumChannel(np.eye(d)[None])


def depolarizing_channel(d: int) -> QuantumChannel:
    """Completely depolarizing channel, Kraus ``|i><j| / sqrt(d)``."""
    ks = []
    for i in range(d):
        for j in range(d):
            k = np.zeros((d, d), dtype=complex)
            k[i, j] = 1 / np.sqrt(d)
            ks.append(k)
    return QuantumChannel(np.array(ks))


def random_channel(d_in: int, d_out: int = None, n_kraus: int = 2, seed=None) -> QuantumChannel:
    d_out = d_out or d_in
    v = random_isometry(n_kraus * d_out, d_in, seed)
    return QuantumChannel(v.reshape(n_kraus, d_out, d_in))


def random_instrument(d: int, n_outcomes: int = 2, kraus_per_outcome: int = 1, seed=None) -> Instrument:
    v = random_isometry(n_outcomes * kraus_per_outcome * d, d, seed)
    ks = v.reshape(n_outcomes, kraus_per_outcome, d, d)
    return Instrument(tuple(ks))


def projective_measurement(d: int) -> Instrument:
    return Instrument(tuple(np.eye(d)[i][None, :, None] * np.eye(d)[i][None, None, :] for i in range(d)))


def lift_local(inner: Instrument, side: str, shape: BipartiteShape) -> Instrument:
    """Tensor every Kraus matrix with the identity on the other factor."""
    if side not in ("A", "B"):
        raise ValueError("side must be 'A' or 'B'")
    want = shape.dim_A if side == "A" else shape.dim_B
    if inner.dim != want:
        raise ShapeError(f"instrument acts on dimension {inner.dim}, factor {side} has {want}")
    other = np.eye(shape.dim_B if side == "A" else shape.dim_A)
    outs = []
    for ks in inner.outcomes:
        if side == "A":
            outs.append(np.stack([np.kron(k, other) for k in ks]))
        else:
            outs.append(np.stack([np.kron(other, k) for k in ks]))
    return Instrument(tuple(outs), inner.labels)


def is_product_operator(k, shape: BipartiteShape, tol=1e-9) -> bool:
    """Operator Schmidt rank one, i.e. ``k = X (x) Y``."""
    t = np.asarray(k).reshape(shape.dim_A, shape.dim_B, shape.dim_A, shape.dim_B)
    mat = t.transpose(0, 2, 1, 3).reshape(shape.dim_A**2, shape.dim_B**2)
    s = np.linalg.svd(mat, compute_uv=False)
    return bool(s.size < 2 or s[1] <= tol * max(s[0], 1.0))


def is_local(inst: Instrument, shape: BipartiteShape) -> bool:
    return all(is_product_operator(k, shape) for k in inst.all_kraus())


def truncation_instrument(n: int, shape: BipartiteShape, k_max: int) -> Instrument:
    """Local measurement projecting A onto its first ``n`` levels, then level by level.

    Outcome 1 is ``(sum_{i<n} |i><i|) (x) I``; outcome ``k`` (``2 <= k <= k_max``)
    is ``|n+k-2><n+k-2| (x) I`` in zero-based levels. Remaining levels of A are
    collected in one final outcome so the measurement is complete.
    """
    da = shape.dim_A
    if n < 1 or k_max < 1:
        raise ValueError("n and k_max must be positive")
    if n > da or n + k_max - 1 > da:
        raise ShapeError(f"n + k_max - 1 = {n + k_max - 1} exceeds dim_A = {da}")
    projs = [np.diag([1.0] * n + [0.0] * (da - n))]
    for k in range(2, k_max + 1):
        p = np.zeros((da, da))
        p[n + k - 2, n + k - 2] = 1.0
        projs.append(p)
    used = n + k_max - 1
    if used < da:
        projs.append(np.diag([0.0] * used + [1.0] * (da - used)))
    return lift_local(Instrument(tuple(p[None] for p in projs)), "A", shape)


# ------------------------------------------------------------ monotonicity


def transport_witness(witness: Ensemble, kraus) -> Ensemble:
    """Pure decomposition of ``sum_l K_l omega K_l^dagger / p`` carried over from one of ``omega``."""
    w, states = [], []
    for wj, psi in witness:
        for k in kraus:
            phi = np.sqrt(wj) * (k @ psi)
            nrm = np.vdot(phi, phi).real
            if nrm > 1e-14:
                w.append(nrm)
                states.append(phi / np.sqrt(nrm))
    w = np.array(w)
    return Ensemble(w / w.sum(), states, validate=False)


@dataclass
class MonotonicityReport:
    lhs: float
    rhs: float
    satisfied: bool
    retried: bool
    mode: str
    outcome_values: list
    probabilities: list
    witnesses: dict = field(repr=False, default_factory=dict)


def monotonicity_check(spec: MonotoneSpec, omega, inst: Instrument, mode="selective",
                       cfg: OptimizerConfig = None, axiom_tol=5e-3, lhs_boost=2) -> MonotonicityReport:
    """Check ``E(omega) >= sum_i p_i E(omega_i)`` (selective) or ``E(omega) >= E(Phi(omega))``.

    ``E(omega)`` is computed with ``lhs_boost`` times the restarts. Each
    right-hand roof is also seeded with ``omega``'s witness pushed through
    the instrument, a feasible decomposition of the posterior state. A
    violation beyond ``axiom_tol`` triggers one recomputation with four
    times the restarts before it is reported.
    """
    if mode not in ("selective", "nonselective"):
        raise ValueError("mode must be 'selective' or 'nonselective'")
    if not is_local(inst, spec.shape):
        raise InputError("instrument is not local; the monotonicity axiom does not apply")
    cfg = cfg or OptimizerConfig()
    omega = as_state(omega)

    def run(c):
        left = entanglement_monotone(spec, omega, c.boosted(lhs_boost))
        wits = {"omega": left.witness}
        if mode == "selective":
            probs, vals = [], []
            for i, ks in enumerate(inst.outcomes):
                un = apply_kraus(ks, omega)
                p = float(np.trace(un).real)
                if p < PROB_FLOOR:
                    continue
                seed = transport_witness(left.witness, ks)
                r = entanglement_monotone(spec, un / p, c, inits=[seed])
                probs.append(p)
                vals.append(r.value)
                wits[f"outcome_{i}"] = r.witness
            rhs = float(np.dot(probs, vals))
        else:
            probs = [1.0]
            seed = transport_witness(left.witness, inst.all_kraus())
            r = entanglement_monotone(spec, nonselective(inst, omega), c, inits=[seed])
            vals = [r.value]
            wits["output"] = r.witness
            rhs = r.value
        return left.value, rhs, probs, vals, wits

    lhs, rhs, probs, vals, wits = run(cfg)
    retried = False
    if lhs < rhs - axiom_tol:
        retried = True
        lhs, rhs, probs, vals, wits = run(cfg.boosted(4))
    return MonotonicityReport(lhs, rhs, lhs >= rhs - axiom_tol, retried, mode, vals, probs, wits)
