"""Convex hulls, convex roofs and Fenchel (bi)conjugates of functions on states.

Hulls and roofs are infima over decompositions of a target state; each
decomposition is encoded by an isometry ``V`` acting on the support of the
target, so every point the optimizer visits is feasible. Reported values are
recomputed from the returned witness ensemble and are therefore genuine upper
bounds on the exact hull or roof, whatever the quality of the search.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .ensembles import WEIGHT_FLOOR, Ensemble, random_isometry, support
from .functionals import SpectralFunctional
from .objectives import LinearObjective, PenaltyObjective, StateObjective, SumObjective, objective_for
from .states import ConstraintError, ShapeError, StateError, as_state, check_constraint_operator, hermitian_part
from .stiefel import minimize_stiefel, retract


@dataclass(frozen=True)
class OptimizerConfig:
    restarts: int = 32
    max_iters: int = 2000
    tol: float = 1e-8
    seed: int = 0
    ensemble_size_override: Optional[int] = None

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")

    def boosted(self, factor: int) -> "OptimizerConfig":
        return replace(self, restarts=self.restarts * factor)

    def with_seed(self, seed: int) -> "OptimizerConfig":
        return replace(self, seed=int(seed))


@dataclass
class HullResult:
    value: float
    witness: Ensemble
    iterations_used: int
    converged: bool

    def to_dict(self):
        from .io import ensemble_to_dict

        return {
            "value": self.value,
            "converged": bool(self.converged),
            "iterations": int(self.iterations_used),
            "witness": ensemble_to_dict(self.witness),
        }


NEIGHBOURHOOD = (1e-5, 1e-4, 1e-3)


class SandwichError(RuntimeError):
    """The closure estimate exceeds the hull value: the dual search overshot."""


# ------------------------------------------------------------ decompositions


def _check_finite(obj: StateObjective, rho):
    v, _ = obj(rho[None])
    if not np.all(np.isfinite(v)):
        raise StateError("function takes an infinite value; only finite functions are supported")


def _isometry_from_ensemble(e: Ensemble, sqrt_factor, m, k):
    """Express a decomposition of the target as rows of the isometry ``V``."""
    pinv = np.linalg.pinv(sqrt_factor)
    r = sqrt_factor.shape[1]
    if len(e) > m:
        raise ShapeError(f"initial ensemble has {len(e)} atoms, more than the {m} available")
    x = np.zeros((m, k, r), dtype=complex)
    for i, (w, s) in enumerate(e):
        if s.ndim == 1:
            cols = np.sqrt(w) * s[:, None]
        else:
            mu, u = np.linalg.eigh(s)
            order = np.argsort(mu)[::-1][:k]
            cols = u[:, order] * np.sqrt(np.clip(mu[order], 0, None) * w)
        blk = (pinv @ cols).T  # (cols, r)
        x[i, : blk.shape[0]] = blk
    x = x.reshape(m * k, r)
    return retract(x[None])[0]


def _spectral_start(m, k, r):
    x = np.zeros((m * k, r), dtype=complex)
    for i in range(r):
        x[i * k, i] = 1.0
    return x


def _trivial_start(m, k, r):
    x = np.zeros((m * k, r), dtype=complex)
    x[:r, :r] = np.eye(r)
    return x


def optimize_decomposition(obj: StateObjective, rho, cfg: OptimizerConfig, *, m, k, inits=(), extra_starts=()):
    """Minimize ``sum_i phi(A_i A_i^dagger)`` over decompositions of ``rho``.

    Atom ``i`` is ``A_i = F V_i^T`` with ``F`` the square-root factor of
    ``rho`` on its support and ``V`` an ``(m k) x r`` isometry split into
    ``k``-row blocks; ``k = 1`` gives pure-state decompositions.
    """
    sup = support(rho)
    r = sup.rank
    F = sup.sqrt_factor
    d = F.shape[0]
    if m * k < r:
        raise ShapeError(f"{m} atoms of rank {k} cannot decompose a rank-{r} state")

    def fun(xb):
        b = xb.shape[0]
        a = np.einsum("dr,bmkr->bmdk", F, xb.reshape(b, m, k, r))
        sig = a @ np.swapaxes(a, -1, -2).conj()
        vals, g = obj(sig.reshape(b * m, d, d))
        grad_a = 2.0 * (g.reshape(b, m, d, d) @ a)
        y = np.einsum("bmdk,dr->bmkr", grad_a, F.conj())
        return vals.reshape(b, m).sum(1), y.reshape(b, m * k, r)

    starts = [_isometry_from_ensemble(e, F, m, k) for e in inits]
    starts += [np.asarray(s, dtype=complex) for s in extra_starts]
    starts.append(_spectral_start(m, k, r))
    for j in range(1, cfg.restarts):
        starts.append(random_isometry(m * k, r, cfg.seed + j))
    res = minimize_stiefel(fun, np.stack(starts), max_iters=cfg.max_iters, tol=cfg.tol)
    best = int(np.argmin(res.fun))  # first index wins ties
    xb = res.x[best].reshape(m, k, r)
    atoms = np.einsum("dr,mkr->mdk", F, xb)
    return atoms, int(res.iterations[best]), bool(res.converged[best])


def _witness(atoms, pure: bool) -> Ensemble:
    sig = atoms @ np.swapaxes(atoms, -1, -2).conj()
    w = np.trace(sig, axis1=-2, axis2=-1).real
    keep = w >= WEIGHT_FLOOR
    if pure:
        states = [atoms[i, :, 0] / np.sqrt(w[i]) for i in np.flatnonzero(keep)]
    else:
        states = [hermitian_part(sig[i] / w[i]) for i in np.flatnonzero(keep)]
    return Ensemble(w[keep] / w[keep].sum(), states, validate=False)


def witness_value(obj: StateObjective, e: Ensemble) -> float:
    """Ensemble average of the objective's function."""
    vals, _ = obj(e.densities())
    return float(np.dot(e.weights, vals))


def _resolve(f, d):
    return objective_for(f, d)


def convex_hull(f, rho, cfg: OptimizerConfig = None, *, inits: Sequence[Ensemble] = (), elements=None) -> HullResult:
    """Upper bound on the convex hull ``co f(rho)`` with a mixed-state witness.

    The search runs over decompositions ``sqrt(rho) M_i sqrt(rho)`` for POVMs
    ``{M_i}`` on the support of ``rho`` with ``r^2`` full-rank elements
    (``r = rank(rho)``); ``elements`` or ``cfg.ensemble_size_override``
    changes the element count.
    """
    cfg = cfg or OptimizerConfig()
    rho = as_state(rho)
    obj = _resolve(f, rho.shape[0])
    _check_finite(obj, rho)
    r = support(rho).rank
    m = elements or cfg.ensemble_size_override or max(r * r, 1)
    m = max(m, r, *(len(e) for e in inits)) if inits else max(m, r)
    trivial = _trivial_start(m, r, r)
    atoms, iters, conv = optimize_decomposition(obj, rho, cfg, m=m, k=r, inits=inits, extra_starts=[trivial])
    wit = _witness(atoms, pure=False)
    return HullResult(witness_value(obj, wit), wit, iters, conv)


def convex_roof(f, rho, cfg: OptimizerConfig = None, *, inits: Sequence[Ensemble] = (), size=None) -> HullResult:
    """Upper bound on the convex roof of ``f`` restricted to pure states.

    ``f`` may be a :class:`SpectralFunctional`, an objective, or a callable on
    density matrices; only its values on pure states matter. The default
    ensemble size is ``rank(rho)**2``.
    """
    cfg = cfg or OptimizerConfig()
    rho = as_state(rho)
    obj = _resolve(f, rho.shape[0])
    sup = support(rho)
    r = sup.rank
    if r == 1:
        psi = sup.eigvecs[:, 0]
        wit = Ensemble([1.0], [psi], validate=False)
        return HullResult(witness_value(obj, wit), wit, 0, True)
    m = size or cfg.ensemble_size_override or r * r
    m = max([m, r] + [len(e) for e in inits])
    atoms, iters, conv = optimize_decomposition(obj, rho, cfg, m=m, k=1, inits=inits)
    wit = _witness(atoms, pure=True)
    return HullResult(witness_value(obj, wit), wit, iters, conv)


# ------------------------------------------------------------ Fenchel duality


def check_dual_operator(a, norm_cap=None) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError("dual operator must be a square matrix")
    if np.max(np.abs(a - a.conj().T)) > 1e-8:
        raise StateError("dual operator must be Hermitian")
    a = hermitian_part(a)
    ev = np.linalg.eigvalsh(a)
    if ev[0] < -1e-9:
        raise StateError("dual operator must be positive semidefinite")
    if norm_cap is not None and ev[-1] > norm_cap + 1e-9:
        raise StateError(f"dual operator exceeds the norm cap {norm_cap}")
    return a


def _state_search(obj: StateObjective, d, cfg: OptimizerConfig, seeds=()):
    """Minimize ``obj`` over all states ``W W^dagger`` with ``||W||_F = 1``."""

    def fun(xb):
        b = xb.shape[0]
        w = xb.reshape(b, d, d)
        sig = w @ np.swapaxes(w, -1, -2).conj()
        v, g = obj(sig)
        return v, (2.0 * g @ w).reshape(b, d * d, 1)

    starts = []
    for s in seeds:
        s = np.asarray(s, dtype=complex)
        if s.ndim == 1:
            w = np.zeros((d, d), dtype=complex)
            w[:, 0] = s / np.linalg.norm(s)
        else:
            mu, u = np.linalg.eigh(hermitian_part(s))
            w = u * np.sqrt(np.clip(mu, 0, None))
            w = w / np.linalg.norm(w)
        starts.append(w.reshape(d * d, 1))
    for j in range(cfg.restarts):
        starts.append(random_isometry(d * d, 1, cfg.seed + j))
    res = minimize_stiefel(fun, np.stack(starts), max_iters=cfg.max_iters, tol=cfg.tol)
    best = int(np.argmin(res.fun))
    w = res.x[best].reshape(d, d)
    rho = hermitian_part(w @ w.conj().T)
    return rho / np.trace(rho).real, bool(res.converged[best])


def fenchel_conjugate(f, a, cfg: OptimizerConfig = None, *, seeds=(), return_maximizer=False):
    """Lower bound on ``f*(A) = sup_rho [Tr(A rho) - f(rho)]``.

    With ``return_maximizer=True`` returns ``(value, rho)``.
    """
    cfg = cfg or OptimizerConfig()
    a = check_dual_operator(a)
    d = a.shape[0]
    fobj = _resolve(f, d)
    obj = SumObjective([fobj, LinearObjective(a)], [1.0, -1.0])
    _, vecs = np.linalg.eigh(a)
    cands = list(seeds) + [vecs[:, j] for j in range(d)[::-1]] + [np.eye(d) / d]
    rho, _ = _state_search(obj, d, cfg, cands)
    # the supremum of a discontinuous f may only be approached: probe slight mixtures too
    probes = [rho] + [(1 - t) * rho + t * np.eye(d) / d for t in NEIGHBOURHOOD]
    vals = np.einsum("ij,bji->b", a, np.stack(probes)).real - fobj(np.stack(probes))[0]
    j = int(np.argmax(vals))
    return (float(vals[j]), probes[j]) if return_maximizer else float(vals[j])


@dataclass
class BiconjugateResult:
    value: float
    upper_bound: float
    dual_operator: np.ndarray
    rounds: int
    converged: bool
    hull_value: Optional[float] = None


def _master_problem(rho, cuts, cap):
    """``max_A min_j Tr(A (rho - sigma_j)) + f_j`` over ``0 <= A <= cap I``."""
    import cvxpy as cp

    d = rho.shape[0]
    a = cp.Variable((d, d), hermitian=True)
    t = cp.Variable()
    cons = [a >> 0, cap * np.eye(d) - a >> 0]
    for s, fv in cuts:
        cons.append(t <= cp.real(cp.trace(a @ (rho - s))) + fv)
    prob = cp.Problem(cp.Maximize(t), cons)
    # an inaccurate master solution only moves the next query point; bounds are recomputed exactly
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        prob.solve(solver=cp.CLARABEL)
        if a.value is None:
            prob.solve(solver=cp.SCS, eps=1e-9)
    return hermitian_part(a.value), float(prob.value)


def _cut_bound(a, rho, cuts):
    return min(float(np.real(np.trace(a @ (rho - s)))) + fv for s, fv in cuts)


def fenchel_biconjugate(
    f,
    rho,
    cfg: OptimizerConfig = None,
    *,
    norm_cap=None,
    max_rounds=80,
    gap_tol=1e-4,
    sandwich_tol=2e-3,
    hull_value=None,
    check_sandwich=True,
) -> BiconjugateResult:
    """Estimate the convex closure ``f**(rho)`` by a cutting-plane dual ascent.

    Alternates between a master problem over dual operators ``0 <= A <= cap``
    (solved as an SDP over the cuts gathered so far) and a conjugate search at
    the proposed ``A``, whose maximizer contributes a new cut. Stops when the
    master bound and the best dual value agree within ``gap_tol``.

    The estimate is cross-checked against ``convex_hull(f, rho)`` (or the
    supplied ``hull_value``); exceeding it by more than ``sandwich_tol``
    raises :class:`SandwichError`.
    """
    cfg = cfg or OptimizerConfig()
    rho = as_state(rho)
    d = rho.shape[0]
    fobj = _resolve(f, d)
    _check_finite(fobj, rho)
    if norm_cap is None:
        scale = f.scale(d) if isinstance(f, SpectralFunctional) else 1.0
        norm_cap = 64.0 * scale
    inner = replace(cfg, restarts=max(2, min(cfg.restarts, 6)))

    def fval(s):
        return float(fobj(s[None])[0][0])

    cuts = []
    seeds = [np.eye(d) / d, rho] + [np.eye(d)[:, j] for j in range(d)]
    for s in seeds:
        s = np.outer(s, s.conj()) if np.ndim(s) == 1 else s
        cuts.append((s, fval(s)))
    visited = []
    a = np.zeros((d, d), dtype=complex)
    prev = None
    upper = math.inf
    converged = False
    rounds = 0
    best = -math.inf
    for rounds in range(1, max_rounds + 1):
        sub = inner.with_seed(cfg.seed + 7919 * rounds)
        _, s = fenchel_conjugate(fobj, a, sub, seeds=[] if prev is None else [prev], return_maximizer=True)
        prev = s
        cuts.append((s, fval(s)))
        visited.append(a)
        best = max(_cut_bound(v, rho, cuts) for v in visited)
        a_next, upper = _master_problem(rho, cuts, norm_cap)
        if upper - best <= gap_tol:
            converged = True
            break
        a = _clip_eig(a_next, 0.0, norm_cap)
    bounds = [_cut_bound(v, rho, cuts) for v in visited]
    j = int(np.argmax(bounds))
    result = BiconjugateResult(bounds[j], upper, visited[j], rounds, converged)
    if check_sandwich:
        if hull_value is None:
            hull_value = convex_hull(fobj, rho, cfg).value
        result.hull_value = hull_value
        if result.value > hull_value + sandwich_tol:
            raise SandwichError(f"closure estimate {result.value:.6g} exceeds hull value {hull_value:.6g}")
    return result


def _clip_eig(a, lo, hi):
    mu, u = np.linalg.eigh(hermitian_part(a))
    return hermitian_part((u * np.clip(mu, lo, hi)) @ u.conj().T)


# ------------------------------------------------------------ probes


@dataclass
class ConvergenceRow:
    n: object
    state_id: int
    value: float
    deficit: float


@dataclass
class ConvergenceTable:
    rows: list
    nondecreasing: bool

    def to_csv(self) -> str:
        lines = ["n,state_id,value,deficit"]
        for r in self.rows:
            lines.append(f"{r.n},{r.state_id},{r.value:.9g},{r.deficit:.9g}")
        return "\n".join(lines) + "\n"


class MonotonicityError(ValueError):
    """A supposedly increasing family is not pointwise increasing."""


def monotone_limit_probe(
    family: Callable,
    limit,
    states,
    n_schedule,
    cfg: OptimizerConfig = None,
    *,
    solver=None,
    check_states=(),
    tol=None,
    evaluate=None,
) -> ConvergenceTable:
    """Closure estimates ``c_n(rho)`` of an increasing family ``f_n`` and their deficits.

    ``family(n)`` returns ``f_n`` and ``limit`` is ``f_0 = sup_n f_n``. The
    closure is estimated by ``solver`` (default :func:`convex_hull`). Values
    are computed from the limit downwards, each search seeded with the witness
    found for the next larger index, so the estimates inherit the ordering of
    the family.

    Pointwise ordering ``f_n <= f_{n+1} <= f_0`` is checked on ``check_states``
    (with ``evaluate(f, state)``) and raises :class:`MonotonicityError`.
    """
    cfg = cfg or OptimizerConfig()
    solver = solver or convex_hull
    tol = 2 * 1e-3 if tol is None else tol
    ns = list(n_schedule)
    evaluate = evaluate or (lambda fn, s: fn(s))
    for s in check_states:
        prev = None
        for n in ns:
            v = evaluate(family(n), s)
            if prev is not None and v < prev - 1e-9:
                raise MonotonicityError(f"family decreases between indices at n={n}")
            prev = v
        if prev is not None and prev > evaluate(limit, s) + 1e-9:
            raise MonotonicityError("family exceeds its limit")
    rows = []
    ok = True
    for sid, rho in enumerate(states):
        top = solver(limit, rho, cfg)
        seed = [top.witness]
        vals = {}
        for n in reversed(ns):
            res = solver(family(n), rho, cfg, inits=seed)
            vals[n] = res.value
            seed = [res.witness]
        series = [vals[n] for n in ns]
        ok &= all(b >= a - tol for a, b in zip(series, series[1:]))
        for n in ns:
            rows.append(ConvergenceRow(n, sid, vals[n], top.value - vals[n]))
    return ConvergenceTable(rows, bool(ok))


@dataclass
class JensenReport:
    lhs: float
    rhs: float
    satisfied: bool


def jensen_check(f, e: Ensemble, direction: str = "convex", tol: float = 1e-9) -> JensenReport:
    """Compare ``f(barycenter)`` (lhs) with the ensemble average (rhs)."""
    lhs = float(f(e.barycenter()))
    rhs = e.average(f)
    if direction == "convex":
        ok = lhs <= rhs + tol
    elif direction == "concave":
        ok = lhs >= rhs - tol
    elif direction == "affine":
        ok = abs(lhs - rhs) <= tol
    else:
        raise ValueError("direction must be 'convex', 'concave' or 'affine'")
    return JensenReport(lhs, rhs, bool(ok))


def constrained_max(f, hamiltonian, c, cfg: OptimizerConfig, seeds=()):
    """Lower bound on ``sup f`` over states with ``Tr(H rho) <= c``; returns ``(value, rho)``."""
    h = check_constraint_operator(hamiltonian)
    d = h.shape[0]
    vals, vecs = np.linalg.eigh(h)
    if c < vals[0] - 1e-12:
        raise ConstraintError(f"bound {c} is below the ground energy {vals[0]}")
    g = vecs[:, 0]
    fobj = _resolve(f, d)
    cands = list(seeds) + [g]
    if np.trace(h).real / d <= c:
        cands.append(np.eye(d) / d)
    rho = None
    for mu in (1e2, 1e4, 1e6):
        obj = SumObjective([fobj, PenaltyObjective(h, c, mu)], [-1.0, 1.0])
        rho, _ = _state_search(obj, d, cfg, cands)
        cands = [rho] + cands
    e = float(np.real(np.trace(h @ rho)))
    if e > c:
        t = (e - c) / (e - vals[0])
        rho = (1 - t) * rho + t * np.outer(g, g.conj())
    rho = hermitian_part(rho)
    return float(fobj(rho[None])[0][0]), rho


def growth_ratio_estimate(f, hamiltonian, c_grid, cfg: OptimizerConfig = None):
    """Rows ``(c, sup_estimate, sup_estimate / c)`` of ``f`` over ``{Tr(H rho) <= c}``.

    Each level is seeded with the maximizer of the previous (smaller) one,
    so the estimates are non-decreasing in ``c``.
    """
    cfg = cfg or OptimizerConfig(restarts=8)
    grid = [float(c) for c in c_grid]
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("c_grid must be strictly increasing")
    rows = []
    seeds = []
    best_rho = None
    for c in grid:
        v, rho = constrained_max(f, hamiltonian, c, cfg, seeds)
        if rows and v < rows[-1][1]:
            v, rho = rows[-1][1], best_rho
        best_rho = rho
        seeds = [rho]
        rows.append((c, v, v / c if c > 0 else math.inf))
    return rows
