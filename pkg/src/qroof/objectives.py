"""Batched objectives on unnormalized states, with matrix gradients.

An objective maps a stack of PSD matrices ``sigma`` (shape ``(B, n, n)``) to
``phi(sigma) = Tr(sigma) * f(sigma / Tr(sigma))`` together with the Hermitian
gradient ``G`` such that ``d phi = Re Tr(G d sigma)``. Using the degree-1
homogeneous extension lets decomposition weights and atom states be
optimized jointly.
"""

from __future__ import annotations

import numpy as np

from .functionals import MATCH_TOL, SpectralFunctional
from .states import BipartiteShape, hermitian_part

TINY = 1e-300


def _from_eig(vecs, diag):
    return (vecs * diag[..., None, :]) @ np.swapaxes(vecs, -1, -2).conj()


class StateObjective:
    dim: int

    def __call__(self, sigma):
        raise NotImplementedError

    def values(self, sigma):
        return self(sigma)[0]


class SpectralObjective(StateObjective):
    def __init__(self, f: SpectralFunctional, dim: int):
        if not f.is_spectral:
            raise TypeError(f"{f.kind} is not a plain spectral functional")
        self.f = f
        self.dim = dim

    def __call__(self, sigma):
        mu, u = np.linalg.eigh(sigma)
        mu = np.clip(mu, 0.0, None)
        w = mu.sum(-1)
        ok = w > TINY
        # zero-trace rows get a placeholder spectrum; their value and gradient are zeroed below
        x = np.where(ok[:, None], mu / np.where(ok, w, 1.0)[:, None], 1.0 / mu.shape[-1])
        fx = self.f.from_spectrum(x)
        df = self.f.spectrum_gradient(x)
        g = fx[:, None] + df - np.sum(x * df, axis=-1, keepdims=True)
        g = np.where(ok[:, None], g, 0.0)
        return np.where(ok, w * fx, 0.0), _from_eig(u, g)


class IndicatorObjective(StateObjective):
    """Characteristic function of one pure state; locally constant."""

    def __init__(self, target, dim):
        self.target = np.asarray(target, dtype=complex)
        self.dim = dim

    def __call__(self, sigma):
        w = np.trace(sigma, axis1=-2, axis2=-1).real
        ok = w > TINY
        rho = sigma / np.where(ok, w, 1.0)[:, None, None]
        proj = np.outer(self.target, self.target.conj())
        dist = np.abs(np.linalg.eigvalsh(hermitian_part(rho - proj))).sum(-1)
        fx = np.where(dist <= MATCH_TOL, 1.0, 0.0)
        grad = fx[:, None, None] * np.eye(self.dim)
        return np.where(ok, w * fx, 0.0), grad


class CallableObjective(StateObjective):
    """Arbitrary state function; gradients by central finite differences."""

    def __init__(self, func, dim, h=1e-6):
        self.func = func
        self.dim = dim
        self.h = h
        basis = []
        for i in range(dim):
            for j in range(dim):
                e = np.zeros((dim, dim), dtype=complex)
                if i == j:
                    e[i, i] = 1
                elif i < j:
                    e[i, j] = e[j, i] = 1 / np.sqrt(2)
                else:
                    e[i, j], e[j, i] = 1j / np.sqrt(2), -1j / np.sqrt(2)
                basis.append(e)
        self.basis = basis

    def _f(self, rho):
        return float(self.func(hermitian_part(rho)))

    def __call__(self, sigma):
        b = sigma.shape[0]
        vals = np.zeros(b)
        grads = np.zeros_like(sigma)
        for k in range(b):
            w = np.trace(sigma[k]).real
            if w <= TINY:
                continue
            rho = sigma[k] / w
            fx = self._f(rho)
            gr = np.zeros((self.dim, self.dim), dtype=complex)
            for e in self.basis:
                d = (self._f(rho + self.h * e) - self._f(rho - self.h * e)) / (2 * self.h)
                gr += d * e
            # Euler correction makes the extension homogeneous of degree one
            gr += (fx - np.trace(gr @ rho).real) * np.eye(self.dim)
            vals[k] = w * fx
            grads[k] = gr
        return vals, grads


class MappedObjective(StateObjective):
    """``phi(L(sigma))`` for a linear positive map ``L`` given with its adjoint."""

    def __init__(self, inner: StateObjective, apply, adjoint, dim):
        self.inner = inner
        self.apply = apply
        self.adjoint = adjoint
        self.dim = dim

    def __call__(self, sigma):
        v, g = self.inner(self.apply(sigma))
        return v, self.adjoint(g)


def partial_trace_objective(inner: StateObjective, shape: BipartiteShape, keep="A"):
    da, db = shape.dim_A, shape.dim_B

    if keep == "A":

        def apply(s):
            return np.einsum("bijkj->bik", s.reshape(-1, da, db, da, db))

        def adjoint(g):
            return np.einsum("bik,jl->bijkl", g, np.eye(db)).reshape(-1, da * db, da * db)

    else:

        def apply(s):
            return np.einsum("bijil->bjl", s.reshape(-1, da, db, da, db))

        def adjoint(g):
            return np.einsum("ik,bjl->bijkl", np.eye(da), g).reshape(-1, da * db, da * db)

    return MappedObjective(inner, apply, adjoint, shape.dim)


def channel_objective(inner: StateObjective, kraus):
    ks = np.asarray(kraus, dtype=complex)
    ksh = np.swapaxes(ks, -1, -2).conj()

    def apply(s):
        return np.einsum("kij,bjl,klm->bim", ks, s, ksh)

    def adjoint(g):
        return np.einsum("kij,bjl,klm->bim", ksh, g, ks)

    return MappedObjective(inner, apply, adjoint, ks.shape[2])


class LinearObjective(StateObjective):
    """``Tr(A sigma)``."""

    def __init__(self, a):
        self.a = hermitian_part(a)
        self.dim = self.a.shape[0]

    def __call__(self, sigma):
        v = np.einsum("ij,bji->b", self.a, sigma).real
        return v, np.broadcast_to(self.a, sigma.shape).copy()


class SumObjective(StateObjective):
    def __init__(self, terms, coeffs=None):
        self.terms = list(terms)
        self.coeffs = [1.0] * len(self.terms) if coeffs is None else list(coeffs)
        self.dim = self.terms[0].dim

    def __call__(self, sigma):
        v = 0.0
        g = 0.0
        for c, t in zip(self.coeffs, self.terms):
            tv, tg = t(sigma)
            v = v + c * tv
            g = g + c * tg
        return v, g


class PenaltyObjective(StateObjective):
    """``mu * max(0, Tr(H sigma) - c)^2``; meant for normalized ``sigma``."""

    def __init__(self, h, c, mu):
        self.h = hermitian_part(h)
        self.c = c
        self.mu = mu
        self.dim = self.h.shape[0]

    def __call__(self, sigma):
        e = np.einsum("ij,bji->b", self.h, sigma).real
        ex = np.maximum(e - self.c, 0.0)
        return self.mu * ex**2, (2 * self.mu * ex)[:, None, None] * self.h


def objective_for(f, dim: int) -> StateObjective:
    """Adapt a functional, objective, or plain callable on density matrices."""
    if isinstance(f, StateObjective):
        return f
    if isinstance(f, SpectralFunctional):
        if f.kind == "pure_indicator":
            return IndicatorObjective(f.target, dim)
        return SpectralObjective(f, dim)
    if callable(f):
        return CallableObjective(f, dim)
    raise TypeError(f"cannot build an objective from {type(f).__name__}")
