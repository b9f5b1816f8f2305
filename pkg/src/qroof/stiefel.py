"""Batched Riemannian gradient descent on complex Stiefel manifolds.

A batch of independent problems ``X[p]`` (each ``N x r`` with orthonormal
columns) is minimized together; each problem keeps its own step size and
convergence state, so results do not depend on what else is in the batch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ARMIJO = 1e-4
MAX_BACKTRACKS = 40
STALL_ITERS = 3


@dataclass
class StiefelResult:
    x: np.ndarray
    fun: np.ndarray
    iterations: np.ndarray
    converged: np.ndarray


def _herm(a):
    return 0.5 * (a + np.swapaxes(a, -1, -2).conj())


def _inner(a, b):
    return np.real(np.sum(a.conj() * b, axis=(-2, -1)))


def retract(y):
    """QR retraction with the diagonal of ``R`` made positive."""
    q, r = np.linalg.qr(y)
    d = np.diagonal(r, axis1=-2, axis2=-1)
    mag = np.abs(d)
    ph = np.where(mag > 0, d / np.where(mag > 0, mag, 1.0), 1.0)
    return q * ph[..., None, :]


def project_tangent(x, g):
    return g - x @ _herm(np.swapaxes(x, -1, -2).conj() @ g)


def minimize_stiefel(fun, x0, *, max_iters=2000, tol=1e-8, gtol=1e-10, max_step=1e4, indexed=False):
    """Minimize ``fun`` over each problem in the batch ``x0`` of shape ``(P, N, r)``.

    ``fun(X)`` takes any sub-batch ``(B, N, r)`` and returns values ``(B,)`` and
    Euclidean gradients ``(B, N, r)`` (with respect to ``Re <G, dX>``). Steps use
    Barzilai-Borwein lengths guarded by Armijo backtracking. A problem is
    converged once its relative decrease stays below ``tol`` for a few
    iterations or its Riemannian gradient norm drops under ``gtol``.

    With ``indexed=True`` the call is ``fun(X, idx)`` where ``idx`` lists the
    problems in the sub-batch.
    """
    x = np.array(x0, dtype=complex, copy=True)
    p = x.shape[0]
    call = fun if indexed else (lambda xb, idx: fun(xb))
    f, g = call(x, np.arange(p))
    f = np.asarray(f, dtype=float).copy()
    rg = project_tangent(x, g)
    gn2 = _inner(rg, rg)
    step = 1.0 / np.maximum(np.sqrt(gn2), 1.0)
    iters = np.zeros(p, dtype=int)
    stall = np.zeros(p, dtype=int)
    active = gn2 > gtol**2
    converged = ~active

    for it in range(max_iters):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        xa, fa, rga, gna = x[idx], f[idx], rg[idx], gn2[idx]
        t = step[idx].copy()
        x_new, f_new, g_new = xa.copy(), fa.copy(), np.zeros_like(xa)
        moved = np.zeros(idx.size, dtype=bool)
        pending = np.arange(idx.size)
        for _ in range(MAX_BACKTRACKS):
            xt = retract(xa[pending] - t[pending, None, None] * rga[pending])
            ft, gt = call(xt, idx[pending])
            ok = ft <= fa[pending] - ARMIJO * t[pending] * gna[pending]
            hit = pending[ok]
            x_new[hit], f_new[hit], g_new[hit] = xt[ok], ft[ok], gt[ok]
            moved[hit] = True
            pending = pending[~ok]
            if pending.size == 0:
                break
            t[pending] *= 0.5
        iters[idx] += 1
        # no admissible step: numerically stationary
        stuck = idx[~moved]
        active[stuck] = False
        converged[stuck] = True

        mv = np.flatnonzero(moved)
        if mv.size == 0:
            continue
        gi = idx[mv]
        rg_new = project_tangent(x_new[mv], g_new[mv])
        s = x_new[mv] - xa[mv]
        y = rg_new - rga[mv]
        sy = _inner(s, y)
        ss = _inner(s, s)
        yy = _inner(y, y)
        bb = np.where(it % 2 == 0, ss / np.where(sy > 0, sy, 1.0), sy / np.where(yy > 0, yy, 1.0))
        bb = np.where(sy > 0, bb, 2.0 * t[mv])
        step[gi] = np.clip(bb, 1e-12, max_step)

        decrease = fa[mv] - f_new[mv]
        small = decrease <= tol * (1.0 + np.abs(f_new[mv]))
        stall[gi] = np.where(small, stall[gi] + 1, 0)
        x[gi], f[gi], rg[gi] = x_new[mv], f_new[mv], rg_new
        gn2[gi] = _inner(rg_new, rg_new)
        done = (stall[gi] >= STALL_ITERS) | (gn2[gi] <= gtol**2)
        active[gi[done]] = False
        converged[gi[done]] = True

    return StiefelResult(x=x, fun=f, iterations=iters, converged=converged)
