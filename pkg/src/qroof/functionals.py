"""Unitarily invariant functions of states, evaluated on eigenvalues.

Every kind exposes its value on a normalized spectrum and the gradient of
that value with respect to the spectrum; the optimizers build matrix
gradients from the latter.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .states import EIG_FLOOR, RANK_TOL, StateError, as_pure, as_state, spectrum, trace_norm

KINDS = ("von_neumann", "renyi", "alpha_tangle", "truncated_entropy", "pure_indicator", "custom")
RENYI_VN_WINDOW = 1e-6
MATCH_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class SpectralFunctional:
    """A function ``f(rho)`` depending only on the spectrum of ``rho``.

    ``pure_indicator`` is the one exception: it is 1 at a target pure state
    and 0 everywhere else. Build instances with the classmethods rather than directly.
    """

    kind: str
    param: Optional[float] = None
    target: Optional[np.ndarray] = field(default=None, repr=False)
    func: Optional[Callable] = field(default=None, repr=False)
    log_base: float = 2.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown functional kind {self.kind!r}")
        if not self.log_base > 1:
            raise ValueError("log_base must exceed 1")
        if self.kind == "renyi" and not self.param >= 0:
            raise ValueError("Renyi order must be >= 0")
        if self.kind == "alpha_tangle" and not self.param > 1:
            raise ValueError("alpha must exceed 1")
        if self.kind == "truncated_entropy" and not (int(self.param) == self.param and self.param >= 1):
            raise ValueError("truncation rank n must be a positive integer")

    # construction -------------------------------------------------------

    @classmethod
    def von_neumann(cls, log_base=2.0):
        return cls("von_neumann", log_base=log_base)

    @classmethod
    def renyi(cls, p, log_base=2.0):
        return cls("renyi", float(p), log_base=log_base)

    @classmethod
    def alpha_tangle(cls, alpha):
        return cls("alpha_tangle", float(alpha))

    @classmethod
    def truncated_entropy(cls, n, log_base=2.0):
        return cls("truncated_entropy", int(n), log_base=log_base)

    @classmethod
    def pure_indicator(cls, target):
        return cls("pure_indicator", target=as_pure(target))

    @classmethod
    def custom(cls, func, log_base=2.0):
        return cls("custom", func=func, log_base=log_base)

    @classmethod
    def parse(cls, text: str, log_base=2.0, loader=None):
        """Parse ``H | renyi:p=<x> | alpha:a=<x> | hn:n=<k> | indicator:state=<path>``."""
        text = text.strip()
        if text in ("H", "eof", "vn", "von_neumann"):
            return cls.von_neumann(log_base)
        name, _, arg = text.partition(":")
        key, _, value = arg.partition("=")
        if not value:
            raise ValueError(f"malformed functional descriptor {text!r}")
        if name == "renyi" and key == "p":
            return cls.renyi(float(value), log_base)
        if name == "alpha" and key == "a":
            return cls.alpha_tangle(float(value))
        if name == "hn" and key == "n":
            return cls.truncated_entropy(int(value), log_base)
        if name == "indicator" and key == "state":
            if loader is None:
                from .io import load_pure

                loader = load_pure
            return cls.pure_indicator(loader(value))
        raise ValueError(f"malformed functional descriptor {text!r}")

    def describe(self) -> str:
        if self.kind == "von_neumann":
            return "H"
        if self.kind == "renyi":
            return f"renyi:p={self.param:g}"
        if self.kind == "alpha_tangle":
            return f"alpha:a={self.param:g}"
        if self.kind == "truncated_entropy":
            return f"hn:n={int(self.param)}"
        return self.kind

    # properties ---------------------------------------------------------

    @property
    def _ln(self):
        return np.log(self.log_base)

    @property
    def is_spectral(self) -> bool:
        return self.kind != "pure_indicator"

    @property
    def vanishes_exactly_on_pure(self) -> bool:
        """Zero on pure states and positive on mixed ones."""
        if self.kind == "renyi":
            return self.param <= 1
        return self.kind in ("von_neumann", "alpha_tangle", "truncated_entropy")

    @property
    def is_concave(self) -> bool:
        if self.kind == "renyi":
            return self.param <= 1
        return self.kind in ("von_neumann", "alpha_tangle", "truncated_entropy")

    @property
    def is_subadditive(self) -> bool:
        if self.kind == "renyi":
            return self.param <= 1
        return self.kind in ("von_neumann", "truncated_entropy")

    def scale(self, dim: int) -> float:
        """Rough magnitude of ``f`` on ``dim``-dimensional states."""
        if self.kind in ("alpha_tangle", "pure_indicator"):
            return 2.0
        return max(np.log(dim) / self._ln, 1.0)

    # evaluation ---------------------------------------------------------

    def from_spectrum(self, x) -> np.ndarray:
        """Value on normalized eigenvalue vectors ``x`` (last axis)."""
        x = np.clip(np.asarray(x, dtype=float), 0.0, None)
        k = self.kind
        if k == "von_neumann":
            safe = np.where(x > EIG_FLOOR, x, 1.0)
            return -np.sum(np.where(x > EIG_FLOOR, x * np.log(safe), 0.0), axis=-1) / self._ln
        if k == "renyi":
            p = self.param
            if abs(p - 1.0) < RENYI_VN_WINDOW:
                return SpectralFunctional.von_neumann(self.log_base).from_spectrum(x)
            if p == 0:
                return np.log(np.sum(x > RANK_TOL, axis=-1)) / self._ln
            xs = np.where(x > EIG_FLOOR, x, 0.0)
            return np.log(np.sum(xs**p, axis=-1)) / ((1 - p) * self._ln)
        if k == "alpha_tangle":
            return 2.0 * (1.0 - np.sum(x**self.param, axis=-1))
        if k == "truncated_entropy":
            if self.param >= x.shape[-1]:
                return SpectralFunctional.von_neumann(self.log_base).from_spectrum(x)
            lam = self._truncation_weights(x)
            return np.sum(np.where(x > EIG_FLOOR, x * lam, 0.0), axis=-1)
        if k == "custom":
            rows = np.atleast_2d(x).reshape(-1, np.shape(x)[-1])
            out = np.array([float(self.func(row)) for row in rows])
            return out.reshape(np.shape(x)[:-1])
        raise TypeError(f"{k} is not evaluated from a spectrum")

    def spectrum_gradient(self, x) -> np.ndarray:
        """Partial derivatives of :meth:`from_spectrum` in each eigenvalue."""
        x = np.clip(np.asarray(x, dtype=float), 0.0, None)
        xf = np.maximum(x, EIG_FLOOR)
        k = self.kind
        if k == "von_neumann" or (k == "renyi" and abs(self.param - 1.0) < RENYI_VN_WINDOW):
            return -(np.log(xf) + 1.0) / self._ln
        if k == "renyi":
            p = self.param
            if p == 0:
                return np.zeros_like(x)
            s = np.sum(np.where(x > EIG_FLOOR, x, 0.0) ** p, axis=-1, keepdims=True)
            return p * xf ** (p - 1) / (s * (1 - p) * self._ln)
        if k == "alpha_tangle":
            return -2.0 * self.param * xf ** (self.param - 1)
        if k == "truncated_entropy":
            return self._truncation_weights(x)
        if k == "custom":
            return _fd_spectrum_gradient(self.from_spectrum, x)
        raise TypeError(f"{k} has no spectral gradient")

    def _truncation_weights(self, x):
        """Optimal dual weights ``lambda = -log t`` for ``H_n``, aligned with ``x``.

        ``H_n(x) = min lambda.x`` over ``lambda`` with ``sum_{k in S} base^-lambda_k <= 1``
        for every ``n``-subset ``S``. With ``x`` sorted decreasingly, ``t`` is the
        decreasing regression of ``(x_1, ..., x_{n-1}, x_n + ... + x_d)``, extended
        by ``t_k = t_n`` beyond ``n``. The same weights certify the value for
        non-diagonal decompositions (Peierls inequality on each atom's support).
        """
        n = int(self.param)
        d = x.shape[-1]
        if n >= d:
            return -(np.log(np.maximum(x, EIG_FLOOR)) + 1.0) / self._ln
        order = np.argsort(-x, axis=-1)
        xs = np.take_along_axis(x, order, axis=-1)
        w = np.concatenate([xs[..., : n - 1], xs[..., n - 1 :].sum(-1, keepdims=True)], axis=-1)
        w = w / np.maximum(w.sum(-1, keepdims=True), EIG_FLOOR)
        t = _decreasing_regression(w)
        t = np.concatenate([t, np.repeat(t[..., -1:], d - n, axis=-1)], axis=-1)
        lam_sorted = -np.log(np.maximum(t, EIG_FLOOR)) / self._ln
        lam = np.empty_like(lam_sorted)
        np.put_along_axis(lam, order, lam_sorted, axis=-1)
        return lam

    def __call__(self, rho) -> float:
        return eval_functional(self, rho)


def _decreasing_regression(w):
    """Least-squares non-increasing fit of each row: ``t_k = min_{i<=k} max_{j>=k} mean(w[i..j])``."""
    n = w.shape[-1]
    c = np.concatenate([np.zeros(w.shape[:-1] + (1,)), np.cumsum(w, axis=-1)], axis=-1)
    i = np.arange(n)[:, None]
    j = np.arange(n)[None, :]
    mean = (c[..., None, 1:] - c[..., :-1, None]) / np.maximum(j - i + 1, 1)
    mean = np.where(j >= i, mean, -np.inf)
    t = np.empty_like(w)
    for k in range(n):
        t[..., k] = np.min(np.max(np.where(j >= k, mean, -np.inf)[..., : k + 1, :], axis=-1), axis=-1)
    return t


def _fd_spectrum_gradient(fun, x, h=1e-6):
    g = np.zeros_like(x)
    for j in range(x.shape[-1]):
        e = np.zeros(x.shape[-1])
        e[j] = h
        lo = np.clip(x - e, 0, None)
        g[..., j] = (fun(x + e) - fun(lo)) / (x + e - lo)[..., j]
    return g


def eval_functional(f: SpectralFunctional, rho) -> float:
    """Evaluate ``f`` at a state (matrix, or pure vector)."""
    rho = as_state(rho)
    if f.kind == "pure_indicator":
        target = np.outer(f.target, f.target.conj())
        if target.shape != rho.shape:
            raise StateError("indicator target and state dimensions differ")
        return 1.0 if trace_norm(rho - target) <= MATCH_TOL else 0.0
    value = float(f.from_spectrum(spectrum(rho)))
    return max(value, 0.0) if f.kind != "custom" else value
