"""Convex-roof entanglement monotones and the probes built on them.

``E^f(omega)`` is the convex roof of ``psi -> f(Tr_B |psi><psi|)``. The
concrete families are entanglement of formation (``f = H``), the Renyi
monotones (``f = R_p``), the alpha-tangles (``f = 2(1 - Tr rho^alpha)``) and
the truncated monotones built from ``H_n``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from .convexify import HullResult, OptimizerConfig, convex_roof
from .ensembles import Ensemble, random_isometry
from .functionals import SpectralFunctional
from .objectives import SpectralObjective, StateObjective, channel_objective, objective_for, partial_trace_objective
from .states import (
    RANK_TOL,
    BipartiteShape,
    ConstraintError,
    ShapeError,
    as_state,
    check_constraint_operator,
    energy_constrained,
    hermitian_part,
    permute_subsystems,
    trace_norm,
)
from .stiefel import minimize_stiefel


@dataclass(frozen=True)
class MonotoneSpec:
    base_functional: SpectralFunctional
    shape: BipartiteShape
    traced_side: str = "trace_out_B"

    def __post_init__(self):
        if self.traced_side not in ("trace_out_B", "trace_out_A"):
            raise ValueError("traced_side must be 'trace_out_B' or 'trace_out_A'")

    @property
    def keep(self) -> str:
        return "A" if self.traced_side == "trace_out_B" else "B"

    @property
    def reduced_dim(self) -> int:
        return self.shape.dim_A if self.keep == "A" else self.shape.dim_B

    @classmethod
    def parse(cls, text: str, shape: BipartiteShape, log_base=2.0):
        """``eof`` or any functional descriptor (``renyi:p=0.5``, ``alpha:a=2``, ``hn:n=2``)."""
        f = SpectralFunctional.parse("H" if text == "eof" else text, log_base)
        return cls(f, shape)

    def objective(self) -> StateObjective:
        inner = objective_for(self.base_functional, self.reduced_dim)
        return partial_trace_objective(inner, self.shape, self.keep)


@dataclass(frozen=True)
class EnergyConstraint:
    hamiltonian: np.ndarray
    h: float

    def lifted(self, shape: BipartiteShape) -> np.ndarray:
        """``H (x) I_B`` on the composite space."""
        hm = check_constraint_operator(self.hamiltonian)
        if hm.shape[0] != shape.dim_A:
            raise ShapeError("constraint operator must act on the A factor")
        if self.h < np.linalg.eigvalsh(hm)[0] - 1e-12:
            raise ConstraintError(f"energy bound {self.h} is below the ground energy")
        return np.kron(hm, np.eye(shape.dim_B))


def eof_spec(shape: BipartiteShape, log_base=2.0) -> MonotoneSpec:
    return MonotoneSpec(SpectralFunctional.von_neumann(log_base), shape)


def _check_omega(spec: MonotoneSpec, omega):
    omega = as_state(omega)
    if omega.shape[0] != spec.shape.dim:
        raise ShapeError(f"state of dimension {omega.shape[0]} does not match {spec.shape.dim_A}x{spec.shape.dim_B}")
    return omega


def entanglement_monotone(spec: MonotoneSpec, omega, cfg: OptimizerConfig = None, *, inits=()) -> HullResult:
    """Upper bound on ``E^f(omega)`` with a pure-state witness ensemble.

    Exact (single atom) on pure states. Values are floored at zero.
    """
    omega = _check_omega(spec, omega)
    res = convex_roof(spec.objective(), omega, cfg, inits=inits)
    res.value = max(res.value, 0.0)
    return res


def reduced_value(spec: MonotoneSpec, psi) -> float:
    """``f(Tr_B |psi><psi|)`` for a pure bipartite state."""
    from .states import partial_trace

    return spec.base_functional(partial_trace(psi, spec.shape, spec.keep))


# ------------------------------------------------------------ truncated entropy


class TruncatedEntropyObjective(StateObjective):
    """``H_n`` by direct search over rank-``<= n`` decompositions, as a batched objective.

    An independent numerical route to the closed form used by
    ``SpectralFunctional.truncated_entropy``; every value is attained by an
    explicit decomposition and so is a lower bound.

    For each input ``sigma`` it maximizes ``sum_j phi_H(B_j sigma B_j^dagger)``
    over ``K`` blocks ``B_j`` (``n x d``) with ``sum_j B_j^dagger B_j = I``:
    the atoms ``sqrt(sigma) B_j^dagger B_j sqrt(sigma)`` have rank ``<= n``
    and share the spectra of ``B_j sigma B_j^dagger``. The search runs in the
    eigenbasis of ``sigma`` and is warm-started from the solution found for
    the nearest previously seen spectrum. Gradients follow from the
    envelope theorem at the best blocks.
    """

    def __init__(self, n: int, dim: int, log_base=2.0, blocks=None, cold_starts=2, max_iters=400, tol=1e-11):
        self.n = int(n)
        self.dim = dim
        self.h = SpectralObjective(SpectralFunctional.von_neumann(log_base), self.n)
        self.full = SpectralObjective(SpectralFunctional.von_neumann(log_base), dim)
        self.blocks = blocks or math.ceil(dim * dim / self.n)
        rows = self.blocks * self.n
        self.cold = [self._partition_start()] + [random_isometry(rows, dim, 1000 + j) for j in range(cold_starts - 1)]
        self.max_iters = max_iters
        self.tol = tol
        self._cache_spec = np.zeros((0, dim))
        self._cache_x = np.zeros((0, rows, dim), dtype=complex)

    def _partition_start(self):
        x = np.zeros((self.blocks * self.n, self.dim), dtype=complex)
        for i in range(self.dim):
            x[i, i] = 1.0
        return x

    def _remember(self, spec, x, limit=4096):
        self._cache_spec = np.concatenate([self._cache_spec, spec])[-limit:]
        self._cache_x = np.concatenate([self._cache_x, x])[-limit:]

    def _inner(self, mu):
        """Best block isometries (eigenbasis coordinates) for spectra ``mu`` (``(B, d)``, descending)."""
        b, d = mu.shape
        kb, n = self.blocks, self.n
        starts = [np.broadcast_to(c, (b,) + c.shape) for c in self.cold]
        if len(self._cache_spec):
            dist = np.sum((mu[:, None, :] - self._cache_spec[None]) ** 2, axis=-1)
            starts.insert(0, self._cache_x[np.argmin(dist, axis=1)])
        s = len(starts)
        x0 = np.concatenate(starts)  # start-major
        mus = np.tile(mu, (s, 1))

        def fun(xb, idx):
            m = mus[idx]
            blk = xb.reshape(-1, kb, n, d)
            tau = np.einsum("qkad,qd,qkbd->qkab", blk, m, blk.conj())
            v, g = self.h(tau.reshape(-1, n, n))
            grad = -2.0 * np.einsum("qkab,qkbd,qd->qkad", g.reshape(-1, kb, n, n), blk, m)
            return -v.reshape(-1, kb).sum(1), grad.reshape(xb.shape)

        res = minimize_stiefel(fun, x0, max_iters=self.max_iters, tol=self.tol, indexed=True)
        vals = -res.fun.reshape(s, b)
        best = np.argmax(vals, axis=0)
        xs = res.x.reshape(s, b, kb * n, d)[best, np.arange(b)]
        self._remember(mu, xs)
        return vals[best, np.arange(b)], xs

    def __call__(self, sigma):
        mu, u = np.linalg.eigh(sigma)
        mu = np.clip(mu[:, ::-1], 0.0, None)
        u = u[:, :, ::-1]
        rank = np.sum(mu > RANK_TOL * np.maximum(mu.sum(-1, keepdims=True), 1e-300), axis=-1)
        low = rank <= self.n
        vals = np.zeros(sigma.shape[0])
        grads = np.zeros_like(sigma)
        if low.any():
            vals[low], grads[low] = self.full(sigma[low])
        hi = np.flatnonzero(~low)
        if hi.size:
            v, xs = self._inner(mu[hi])
            blk = xs.reshape(hi.size, self.blocks, self.n, self.dim)
            tau = np.einsum("qkad,qd,qkbd->qkab", blk, mu[hi], blk.conj())
            _, g = self.h(tau.reshape(-1, self.n, self.n))
            g = g.reshape(hi.size, self.blocks, self.n, self.n)
            ge = np.einsum("qkad,qkab,qkbe->qde", blk.conj(), g, blk)
            uh = u[hi]
            vals[hi] = v
            grads[hi] = uh @ ge @ np.swapaxes(uh, -1, -2).conj()
        return vals, grads


def truncated_entropy(rho, n: int, cfg: OptimizerConfig = None, log_base=2.0, method="closed") -> float:
    """``H_n(rho)``, clamped to ``[0, log n]``.

    ``method="closed"`` evaluates the exact dual formula; ``method="search"``
    maximizes over rank-``<= n`` decompositions numerically (a lower bound).
    """
    rho = as_state(rho)
    d = rho.shape[0]
    if n < 1:
        raise ValueError("n must be positive")
    if method == "closed":
        v = SpectralFunctional.truncated_entropy(n, log_base)(rho)
    elif method == "search":
        obj = TruncatedEntropyObjective(n, d, log_base, cold_starts=2 + (cfg.restarts if cfg else 4))
        v = float(obj(rho[None])[0][0])
    else:
        raise ValueError("method must be 'closed' or 'search'")
    return min(max(v, 0.0), math.log(n) / math.log(log_base))


def eof_truncated(omega, shape: BipartiteShape, n: int, cfg: OptimizerConfig = None, *, inits=(), log_base=2.0):
    """Upper bound on ``E^n_F``, the roof of ``H_n`` of the reduced state."""
    spec = MonotoneSpec(SpectralFunctional.truncated_entropy(n, log_base), shape)
    return entanglement_monotone(spec, omega, cfg, inits=inits)


# ------------------------------------------------------------ axioms and probes


def ppt_entangled(omega, shape: BipartiteShape, tol=1e-9) -> bool:
    """True when the partial transpose has a negative eigenvalue (certified entanglement)."""
    t = np.asarray(omega).reshape(shape.dim_A, shape.dim_B, shape.dim_A, shape.dim_B)
    pt = t.transpose(0, 3, 2, 1).reshape(shape.dim, shape.dim)
    return bool(np.linalg.eigvalsh(hermitian_part(pt))[0] < -tol)


def _product_witness(e1: Ensemble, e2: Ensemble, shape: BipartiteShape) -> Ensemble:
    dims = [shape.dim_A, shape.dim_B, shape.dim_A, shape.dim_B]
    w, states = [], []
    for w1, s1 in e1:
        for w2, s2 in e2:
            v = np.kron(s1, s2).reshape(dims).transpose(0, 2, 1, 3).ravel()
            w.append(w1 * w2)
            states.append(v)
    return Ensemble(np.array(w), states, validate=False)


def tensor_pair(omega1, omega2, shape: BipartiteShape):
    """``omega1 (x) omega2`` reordered to ``(A1 A2)(B1 B2)`` and its shape."""
    joint = np.kron(omega1, omega2)
    dims = [shape.dim_A, shape.dim_B, shape.dim_A, shape.dim_B]
    return permute_subsystems(joint, dims, [0, 2, 1, 3]), BipartiteShape(shape.dim_A**2, shape.dim_B**2)


@dataclass
class SubadditivityReport:
    lhs: float
    rhs: float
    e1: float
    e2: float
    satisfied: bool
    retried: bool
    witnesses: dict = field(repr=False, default_factory=dict)


class InputError(ValueError):
    """The requested check does not apply to these inputs."""


def subadditivity_check(spec: MonotoneSpec, omega1, omega2, cfg: OptimizerConfig = None, tol=5e-3):
    """Compare ``E(omega1 (x) omega2)`` with ``E(omega1) + E(omega2)``.

    The joint roof is seeded with the product of the two single-copy
    witnesses. On a violation everything is recomputed with four times the
    restarts before it is reported.
    """
    if not spec.base_functional.is_subadditive:
        raise InputError(f"{spec.base_functional.describe()} is not subadditive")
    cfg = cfg or OptimizerConfig()
    omega1, omega2 = _check_omega(spec, omega1), _check_omega(spec, omega2)
    joint, jshape = tensor_pair(omega1, omega2, spec.shape)
    jspec = MonotoneSpec(spec.base_functional, jshape, spec.traced_side)

    def run(c):
        r1 = entanglement_monotone(spec, omega1, c)
        r2 = entanglement_monotone(spec, omega2, c)
        seed = _product_witness(r1.witness, r2.witness, spec.shape)
        r12 = entanglement_monotone(jspec, joint, c, inits=[seed])
        return r1, r2, r12

    r1, r2, r12 = run(cfg)
    retried = False
    if r12.value > r1.value + r2.value + tol:
        retried = True
        r1, r2, r12 = run(cfg.boosted(4))
    rhs = r1.value + r2.value
    return SubadditivityReport(
        r12.value, rhs, r1.value, r2.value, r12.value <= rhs + tol, retried,
        {"joint": r12.witness, "first": r1.witness, "second": r2.witness},
    )


@dataclass
class ContinuityTable:
    rows: list  # (separation, pair, value, value_shifted, gap)
    max_gap: dict
    nonincreasing: bool

    def to_csv(self) -> str:
        lines = ["param,value,converged,gap"]
        for sep in sorted(self.max_gap):
            lines.append(f"{sep:.9g},{self.max_gap[sep]:.9g},true,{self.max_gap[sep]:.9g}")
        return "\n".join(lines) + "\n"


def energy_continuity_probe(
    spec: MonotoneSpec,
    constraint: EnergyConstraint,
    n_pairs: int,
    max_sep: float,
    cfg: OptimizerConfig = None,
    *,
    schedule=None,
    seed=0,
    rank=None,
    noise=2e-3,
):
    """Gaps ``|E(omega) - E(omega')|`` for nearby states of bounded mean energy.

    For each pair a base state ``omega`` and a direction state ``sigma`` are
    drawn inside the constraint set; ``omega' = (1 - t) omega + t sigma``
    with ``t`` chosen so ``||omega - omega'||_1`` equals each separation in
    the (decreasing) schedule. The profile of maximum gaps should not grow as
    the separation shrinks, up to ``noise``.
    """
    cfg = cfg or OptimizerConfig()
    hl = constraint.lifted(spec.shape)
    schedule = sorted(schedule or [max_sep, max_sep / 2, max_sep / 4], reverse=True)
    if schedule[0] > max_sep + 1e-15:
        raise ValueError("schedule exceeds max_sep")
    rows = []
    for i in range(n_pairs):
        omega = energy_constrained(hl, constraint.h, seed + 2 * i, rank)
        sigma = energy_constrained(hl, constraint.h, seed + 2 * i + 1, rank)
        dist = trace_norm(omega - sigma)
        base = entanglement_monotone(spec, omega, cfg)
        for sep in schedule:
            t = min(sep / dist, 1.0) if dist > 0 else 0.0
            shifted = hermitian_part((1 - t) * omega + t * sigma)
            other = entanglement_monotone(spec, shifted, cfg, inits=[base.witness] if t == 0 else [])
            rows.append((sep, i, base.value, other.value, abs(base.value - other.value)))
    max_gap = {sep: max(r[4] for r in rows if r[0] == sep) for sep in schedule}
    prof = [max_gap[s] for s in schedule]
    ok = all(b <= a + noise for a, b in zip(prof, prof[1:]))
    return ContinuityTable(rows, max_gap, bool(ok))


# ------------------------------------------------------------ Holevo capacity


@dataclass
class CapacityResult:
    per_p: list  # (p, chi_p)
    extrapolated: float
    chi_oracle: float
    witnesses: dict = field(repr=False, default_factory=dict)


def _ground(hm):
    vals, vecs = np.linalg.eigh(hm)
    return vals[0], vecs[:, 0]


def repair_ensemble(weights, states, hamiltonian, h):
    """Mix in a ground state so the barycenter meets ``Tr(H rho) <= h``."""
    hm = check_constraint_operator(hamiltonian)
    rho = sum(w * s for w, s in zip(weights, states))
    e = float(np.real(np.trace(hm @ rho)))
    if e <= h:
        return list(weights), list(states)
    e0, g = _ground(hm)
    t = (e - h) / (e - e0)
    return [(1 - t) * w for w in weights] + [t], list(states) + [np.outer(g, g.conj())]


def chi_value(f, kraus, weights, states) -> float:
    """``f(Phi(avg)) - sum_i w_i f(Phi(rho_i))`` for a spectral ``f``."""
    from .locc import apply_kraus

    rho = hermitian_part(sum(w * s for w, s in zip(weights, states)))
    out = f(apply_kraus(kraus, rho / np.trace(rho).real))
    return float(out - sum(w * f(apply_kraus(kraus, s)) for w, s in zip(weights, states) if w > 0))


def _chi_p_search(kraus, p, d_in, d_out, cfg, constraint, seeds=(), log_base=2.0):
    """Maximize the order-``p`` output Renyi chi quantity jointly over ensembles.

    ``sup_rho [R_p(Phi(rho)) - co(R_p o Phi)(rho)]`` equals the supremum over
    all finite ensembles of ``R_p(Phi(avg)) - avg R_p(Phi(rho_i))``, so the
    outer supremum and the inner hull are optimized together. Atoms are
    ``A_i A_i^dagger`` with the ``A_i`` stacked into one unit vector.
    """
    from .objectives import PenaltyObjective

    f = SpectralFunctional.renyi(p, log_base)
    obj = channel_objective(SpectralObjective(f, d_out), kraus)
    m, k = d_in * d_in, d_in
    pen = None
    if constraint is not None:
        pen = PenaltyObjective(check_constraint_operator(constraint.hamiltonian), constraint.h, 1e4)

    def fun(xb):
        b = xb.shape[0]
        a = xb.reshape(b, m, d_in, k)
        sig = a @ np.swapaxes(a, -1, -2).conj()
        bar = sig.sum(1)
        vb, gb = obj(bar)
        vi, gi = obj(sig.reshape(b * m, d_in, d_in))
        val = -vb + vi.reshape(b, m).sum(1)
        g = -gb[:, None] + gi.reshape(b, m, d_in, d_in)
        if pen is not None:
            vp, gp = pen(bar)
            val = val + vp
            g = g + gp[:, None]
        grad = 2.0 * g @ a
        return val, grad.reshape(b, m * d_in * k, 1)

    starts = []
    for s in seeds:
        starts.append(s)
    for j in range(cfg.restarts):
        starts.append(random_isometry(m * d_in * k, 1, cfg.seed + j))
    res = minimize_stiefel(fun, np.stack(starts), max_iters=cfg.max_iters, tol=cfg.tol)
    best = int(np.argmin(res.fun))
    a = res.x[best].reshape(m, d_in, k)
    sig = a @ np.swapaxes(a, -1, -2).conj()
    w = np.trace(sig, axis1=-2, axis2=-1).real
    keep = w > 1e-14
    weights = list(w[keep] / w[keep].sum())
    states = [hermitian_part(s / wi) for s, wi in zip(sig[keep], w[keep])]
    if constraint is not None:
        weights, states = repair_ensemble(weights, states, constraint.hamiltonian, constraint.h)
    value = chi_value(f, kraus, weights, states)
    return value, (weights, states), res.x[best]


def chi_oracle(kraus, constraint=None, restarts=8, seed=0, log_base=2.0) -> tuple:
    """Holevo chi maximized directly with scipy over pure-state input ensembles.

    Independent of the Stiefel machinery: ``d_in^2`` unnormalized input
    vectors and softmax weights are optimized with L-BFGS (numerical
    gradients) under a quadratic energy penalty, followed by the same
    ground-state repair. Returns ``(value, (weights, states))``.
    """
    from .locc import apply_kraus

    ks = np.asarray(kraus, dtype=complex)
    d = ks.shape[2]
    m = d * d
    hfun = SpectralFunctional.von_neumann(log_base)
    hm = None if constraint is None else check_constraint_operator(constraint.hamiltonian)

    def unpack(z):
        vecs = (z[: m * d] + 1j * z[m * d : 2 * m * d]).reshape(m, d)
        vecs = vecs / np.linalg.norm(vecs, axis=1, keepdims=True)
        logits = z[2 * m * d :]
        w = np.exp(logits - logits.max())
        return w / w.sum(), [np.outer(v, v.conj()) for v in vecs]

    def out_entropy(rho):
        mu = np.clip(np.linalg.eigvalsh(apply_kraus(ks, rho)), 0, None)
        mu = mu[mu > 1e-15]
        return float(-np.sum(mu * np.log(mu)) / np.log(log_base))

    def neg_chi(z):
        w, states = unpack(z)
        rho = sum(wi * s for wi, s in zip(w, states))
        val = out_entropy(rho) - sum(wi * out_entropy(s) for wi, s in zip(w, states))
        if hm is not None:
            ex = max(np.real(np.trace(hm @ rho)) - constraint.h, 0.0)
            val -= 1e4 * ex**2
        return -val

    rng = np.random.default_rng(seed)
    best = None
    for _ in range(restarts):
        z0 = np.concatenate([rng.standard_normal(2 * m * d), 0.1 * rng.standard_normal(m)])
        res = minimize(neg_chi, z0, method="L-BFGS-B")
        if best is None or res.fun < best.fun:
            best = res
    w, states = unpack(best.x)
    if constraint is not None:
        w, states = repair_ensemble(list(w), states, constraint.hamiltonian, constraint.h)
    return chi_value(hfun, ks, w, states), (list(w), states)


def holevo_capacity_estimate(channel, constraint: Optional[EnergyConstraint] = None, p_schedule=None,
                             cfg: OptimizerConfig = None, *, log_base=2.0, oracle_restarts=8) -> CapacityResult:
    """Holevo capacity from the Renyi family ``p -> 1+`` and from a direct chi search.

    For each ``p`` the order-``p`` chi quantity is maximized (seeded with the
    optimum at the previous, larger ``p``); the value at the smallest ``p`` is
    the estimate. The direct chi oracle runs first and independently.
    """
    from .locc import as_channel

    ch = as_channel(channel)
    cfg = cfg or OptimizerConfig(restarts=8)
    ps = list(p_schedule or [2.0, 1.5, 1.2, 1.1, 1.05, 1.02, 1.01])
    if any(p <= 1 for p in ps) or any(b >= a for a, b in zip(ps, ps[1:])):
        raise ValueError("p_schedule must be strictly decreasing and > 1")
    d_out, d_in = ch.kraus.shape[1], ch.kraus.shape[2]
    if constraint is not None:
        hm = check_constraint_operator(constraint.hamiltonian)
        if hm.shape[0] != d_in:
            raise ShapeError(f"constraint operator has dimension {hm.shape[0]}, channel input has {d_in}")
        if constraint.h < _ground(hm)[0] - 1e-12:
            raise ConstraintError(f"energy bound {constraint.h} is below the ground energy")
    oracle, oracle_ens = chi_oracle(ch.kraus, constraint, oracle_restarts, cfg.seed, log_base)
    per_p = []
    seeds = []
    wit = {"chi_oracle": oracle_ens}
    for p in ps:
        v, ens, x = _chi_p_search(ch.kraus, p, d_in, d_out, cfg, constraint, seeds, log_base)
        seeds = [x]
        per_p.append((p, max(v, 0.0)))
        wit[p] = ens
    return CapacityResult(per_p, per_p[-1][1], max(oracle, 0.0), wit)
