"""JSON readers and writers for states, ensembles, channels and results.

Complex numbers are ``[re, im]`` pairs. Matrices are row-major lists of rows.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .ensembles import Ensemble
from .states import StateError, as_pure, as_state

SCHEMA_VERSION = 1


class FormatError(ValueError):
    """A file does not follow the expected JSON layout."""


def _c(z):
    return [float(np.real(z)), float(np.imag(z))]


def _from_pairs(obj, what):
    try:
        arr = np.asarray(obj, dtype=float)
    except (TypeError, ValueError) as exc:
        raise FormatError(f"{what}: entries must be [re, im] pairs") from exc
    if arr.shape[-1:] != (2,):
        raise FormatError(f"{what}: entries must be [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def matrix_to_list(m):
    return [[_c(z) for z in row] for row in np.asarray(m)]


def vector_to_list(v):
    return [_c(z) for z in np.asarray(v)]


def state_to_dict(state, dims=None) -> dict:
    state = np.asarray(state)
    dims = list(dims) if dims is not None else [state.shape[0]]
    if state.ndim == 1:
        return {"dims": dims, "vector": vector_to_list(state)}
    return {"dims": dims, "matrix": matrix_to_list(state)}


def state_from_dict(obj, *, what="state"):
    """Return ``(array, dims)``; vectors stay vectors."""
    if not isinstance(obj, dict) or "dims" not in obj:
        raise FormatError(f"{what}: expected an object with 'dims'")
    dims = [int(x) for x in obj["dims"]]
    total = int(np.prod(dims))
    if "matrix" in obj:
        m = _from_pairs(obj["matrix"], what)
        if m.shape != (total, total):
            raise FormatError(f"{what}: matrix shape {m.shape} does not match dims {dims}")
        return as_state(m), dims
    if "vector" in obj:
        v = _from_pairs(obj["vector"], what)
        if v.shape != (total,):
            raise FormatError(f"{what}: vector length {v.shape} does not match dims {dims}")
        return as_pure(v), dims
    raise FormatError(f"{what}: expected 'matrix' or 'vector'")


def _read(path):
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}:{exc.lineno}: malformed JSON ({exc.msg})") from exc


def _wrap(path, fn):
    try:
        return fn(_read(path))
    except (FormatError, StateError) as exc:
        msg = str(exc)
        raise type(exc)(msg if msg.startswith(str(path)) else f"{path}: {msg}") from exc


def load_state(path):
    """Density matrix (pure vectors promoted) and dims from a state file."""
    arr, dims = _wrap(path, lambda o: state_from_dict(o, what="state"))
    return (as_state(arr) if arr.ndim == 1 else arr), dims


def load_pure(path):
    arr, _ = _wrap(path, lambda o: state_from_dict(o, what="state"))
    if arr.ndim != 1:
        raise FormatError(f"{path}: expected a pure state 'vector'")
    return arr


def save_json(obj, path):
    Path(path).write_text(json.dumps(obj, indent=2) + "\n")


def save_state(state, path, dims=None):
    save_json(state_to_dict(state, dims), path)


def ensemble_to_dict(e: Ensemble) -> dict:
    return {"atoms": [{"weight": float(w), "state": state_to_dict(s)} for w, s in e]}


def ensemble_from_dict(obj) -> Ensemble:
    if not isinstance(obj, dict) or "atoms" not in obj:
        raise FormatError("ensemble: expected an object with 'atoms'")
    weights, states = [], []
    for i, atom in enumerate(obj["atoms"]):
        weights.append(float(atom["weight"]))
        states.append(state_from_dict(atom["state"], what=f"atom {i}")[0])
    return Ensemble(weights, states)


def load_ensemble(path) -> Ensemble:
    return _wrap(path, ensemble_from_dict)


def channel_to_dict(ch) -> dict:
    return {"kraus": [matrix_to_list(k) for k in ch.kraus]}


def channel_from_dict(obj):
    from .locc import QuantumChannel

    if not isinstance(obj, dict) or "kraus" not in obj:
        raise FormatError("channel: expected an object with 'kraus'")
    return QuantumChannel(np.array([_from_pairs(k, "kraus") for k in obj["kraus"]]))


def load_channel(path):
    return _wrap(path, channel_from_dict)


def instrument_to_dict(inst) -> dict:
    return {"outcomes": [[matrix_to_list(k) for k in ks] for ks in inst.outcomes]}


def instrument_from_dict(obj):
    from .locc import Instrument

    if not isinstance(obj, dict) or "outcomes" not in obj:
        raise FormatError("instrument: expected an object with 'outcomes'")
    return Instrument(tuple(np.array([_from_pairs(k, "kraus") for k in ks]) for ks in obj["outcomes"]))


def load_instrument(path):
    return _wrap(path, instrument_from_dict)


def hull_result_from_dict(obj):
    from .convexify import HullResult

    return HullResult(float(obj["value"]), ensemble_from_dict(obj["witness"]), int(obj["iterations"]), bool(obj["converged"]))


def load_matrix(path):
    """Hermitian operator stored as ``{"dims": [...], "matrix": ...}`` without state checks."""

    def read(o):
        if "matrix" not in o:
            raise FormatError("operator: expected 'matrix'")
        return _from_pairs(o["matrix"], "operator")

    return _wrap(path, read)
