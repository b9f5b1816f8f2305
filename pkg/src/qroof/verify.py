"""Seeded verification suites.

Each suite is a list of independent trials. Trial ``i`` of a run with seed
``s`` draws everything from ``SeedSequence([s, i])``, so a trial's outcome does
not depend on how many trials run or in which process. Results are always
reported in trial order.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .convexify import OptimizerConfig, convex_hull, convex_roof, fenchel_biconjugate, jensen_check, monotone_limit_probe
from .ensembles import Ensemble
from .functionals import SpectralFunctional
from .io import SCHEMA_VERSION, ensemble_to_dict
from .locc import lift_local, monotonicity_check, random_instrument
from .monotones import (
    EnergyConstraint,
    MonotoneSpec,
    eof_spec,
    energy_continuity_probe,
    subadditivity_check,
)
from .states import BipartiteShape, haar_pure, induced_mixed, projector

SUITES = ("jensen", "concavity", "roof-hull", "closure-gap", "locc", "subadd", "convergence", "energy-continuity")

DEFAULT_TRIALS = {
    "jensen": 1000,
    "concavity": 200,
    "roof-hull": 50,
    "closure-gap": 5,
    "locc": 200,
    "subadd": 100,
    "convergence": 20,
    "energy-continuity": 4,
}


@dataclass
class TrialResult:
    index: int
    passed: bool
    values: dict
    witnesses: dict = field(default_factory=dict)

    def to_dict(self, with_witnesses=False):
        out = {"index": self.index, "passed": self.passed, "values": self.values}
        if with_witnesses and self.witnesses:
            out["witnesses"] = self.witnesses
        return out


@dataclass
class SuiteReport:
    suite: str
    seed: int
    trials: list

    @property
    def passed(self) -> bool:
        return all(t.passed for t in self.trials)

    @property
    def failures(self) -> list:
        return [t for t in self.trials if not t.passed]

    def to_dict(self):
        return {
            "schema_version": SCHEMA_VERSION,
            "suite": self.suite,
            "seed": self.seed,
            "n_trials": len(self.trials),
            "n_passed": sum(t.passed for t in self.trials),
            "passed": self.passed,
            "trials": [t.to_dict(with_witnesses=not t.passed) for t in self.trials],
        }


def trial_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


def _int_seed(rng):
    return int(rng.integers(2**31 - 1))


def _random_ensemble(rng, dim=None, size=None):
    dim = dim or int(rng.integers(2, 5))
    size = size or int(rng.integers(2, 7))
    w = rng.dirichlet(np.ones(size))
    states = []
    for _ in range(size):
        if rng.random() < 0.5:
            states.append(haar_pure(dim, rng))
        else:
            states.append(induced_mixed(dim, int(rng.integers(1, dim + 1)), rng))
    return Ensemble(w, states)


def _witnesses(**ens):
    return {k: ensemble_to_dict(e) for k, e in ens.items() if e is not None}


# ------------------------------------------------------------------ trials


def _jensen(index, seed, cfg):
    rng = trial_rng(seed, index)
    e = _random_ensemble(rng)
    h = SpectralFunctional.von_neumann()
    neg = SpectralFunctional.custom(lambda x: -h.from_spectrum(x))
    a = rng.standard_normal((e.dim, e.dim)) + 1j * rng.standard_normal((e.dim, e.dim))
    a = a + a.conj().T

    def lin(rho):
        return float(np.real(np.trace(a @ rho)))

    r1 = jensen_check(h, e, "concave", 1e-9)
    r2 = jensen_check(neg, e, "convex", 1e-9)
    r3 = jensen_check(lin, e, "affine", 1e-12)
    values = {
        "H_barycenter": r1.lhs, "H_average": r1.rhs,
        "negH_barycenter": r2.lhs, "negH_average": r2.rhs,
        "linear_gap": r3.lhs - r3.rhs,
    }
    return TrialResult(index, r1.satisfied and r2.satisfied and r3.satisfied, values)


CONCAVE_FAMILY = (
    ("H", SpectralFunctional.von_neumann()),
    ("renyi:p=0.5", SpectralFunctional.renyi(0.5)),
    ("alpha:a=2", SpectralFunctional.alpha_tangle(2.0)),
    ("hn:n=2", SpectralFunctional.truncated_entropy(2)),
)


def _concavity(index, seed, cfg):
    rng = trial_rng(seed, index)
    e = _random_ensemble(rng)
    values, ok = {}, True
    for name, f in CONCAVE_FAMILY:
        r = jensen_check(f, e, "concave", 1e-9)
        values[name] = r.lhs - r.rhs
        ok &= r.satisfied
    return TrialResult(index, ok, values)


def _roof_hull(index, seed, cfg):
    rng = trial_rng(seed, index)
    rho = induced_mixed(3, int(rng.integers(2, 4)), rng)
    c = cfg.with_seed(_int_seed(rng))
    h = SpectralFunctional.von_neumann()
    hull = convex_hull(h, rho, c)
    roof = convex_roof(h, rho, c)
    gap = abs(hull.value - roof.value)
    ok = gap <= 2e-3
    return TrialResult(index, ok, {"hull": hull.value, "roof": roof.value, "gap": gap},
                       {} if ok else _witnesses(hull=hull.witness, roof=roof.witness))


def _closure_gap(index, seed, cfg):
    rng = trial_rng(seed, index)
    psi = haar_pure(int(rng.integers(2, 4)), rng)
    f = SpectralFunctional.pure_indicator(psi)
    c = cfg.with_seed(_int_seed(rng))
    hull = convex_hull(f, projector(psi), c)
    closure = fenchel_biconjugate(f, projector(psi), c, hull_value=hull.value)
    ok = abs(hull.value - 1.0) <= 1e-9 and closure.value <= 1e-2
    return TrialResult(index, ok, {"hull": hull.value, "closure": closure.value, "rounds": closure.rounds})


def _locc(index, seed, cfg):
    rng = trial_rng(seed, index)
    shape = BipartiteShape(2, 2)
    omega = induced_mixed(4, int(rng.integers(1, 5)), rng)
    side = "A" if rng.random() < 0.5 else "B"
    inner = random_instrument(2, int(rng.integers(2, 4)), int(rng.integers(1, 3)), _int_seed(rng))
    inst = lift_local(inner, side, shape)
    mode = "selective" if rng.random() < 0.75 else "nonselective"
    r = monotonicity_check(eof_spec(shape), omega, inst, mode, cfg.with_seed(_int_seed(rng)))
    values = {"lhs": r.lhs, "rhs": r.rhs, "side": side, "mode": mode, "retried": r.retried}
    return TrialResult(index, r.satisfied, values, {} if r.satisfied else _witnesses(**r.witnesses))


def _subadd(index, seed, cfg):
    rng = trial_rng(seed, index)
    shape = BipartiteShape(2, 2)
    w1 = induced_mixed(4, int(rng.integers(1, 3)), rng)
    w2 = induced_mixed(4, int(rng.integers(1, 3)), rng)
    r = subadditivity_check(eof_spec(shape), w1, w2, cfg.with_seed(_int_seed(rng)))
    values = {"joint": r.lhs, "sum": r.rhs, "first": r.e1, "second": r.e2, "retried": r.retried}
    return TrialResult(index, r.satisfied, values, {} if r.satisfied else _witnesses(**r.witnesses))


def _convergence(index, seed, cfg):
    rng = trial_rng(seed, index)
    shape = BipartiteShape(3, 3)
    omega = induced_mixed(9, int(rng.integers(2, 5)), rng)
    c = cfg.with_seed(_int_seed(rng))

    def family(n):
        return MonotoneSpec(SpectralFunctional.truncated_entropy(n), shape).objective()

    table = monotone_limit_probe(family, eof_spec(shape).objective(), [omega], [1, 2, 3], c, solver=convex_roof)
    vals = {f"n={r.n}": r.value for r in table.rows}
    deficit = table.rows[-1].deficit
    vals["deficit"] = deficit
    ok = table.nondecreasing and abs(deficit) <= 1e-2
    return TrialResult(index, ok, vals)


def _energy_continuity(index, seed, cfg):
    rng = trial_rng(seed, index)
    shape = BipartiteShape(3, 3)
    con = EnergyConstraint(np.diag([0.0, 1.0, 2.0]), 1.0)
    table = energy_continuity_probe(eof_spec(shape), con, 1, 0.2, cfg.with_seed(_int_seed(rng)),
                                    schedule=[0.2, 0.1, 0.05], seed=_int_seed(rng), rank=3)
    vals = {f"sep={k:g}": v for k, v in sorted(table.max_gap.items(), reverse=True)}
    return TrialResult(index, table.nonincreasing, vals)


TRIALS = {
    "jensen": _jensen,
    "concavity": _concavity,
    "roof-hull": _roof_hull,
    "closure-gap": _closure_gap,
    "locc": _locc,
    "subadd": _subadd,
    "convergence": _convergence,
    "energy-continuity": _energy_continuity,
}


def _run_one(args):
    suite, index, seed, cfg = args
    return TRIALS[suite](index, seed, cfg)


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get("QROOF_THREADS", "1")))
    except ValueError:
        return 1


def run_suite(suite: str, trials: int = None, seed: int = 0, cfg: OptimizerConfig = None, threads: int = None) -> SuiteReport:
    """Run ``trials`` seeded trials of a suite; parallel across processes when ``threads > 1``."""
    if suite not in TRIALS:
        raise ValueError(f"unknown suite {suite!r}; choose from {', '.join(SUITES)}")
    trials = DEFAULT_TRIALS[suite] if trials is None else int(trials)
    if trials < 1:
        raise ValueError("trials must be positive")
    cfg = cfg or OptimizerConfig()
    threads = thread_count() if threads is None else threads
    jobs = [(suite, i, seed, cfg) for i in range(trials)]
    if threads > 1 and trials > 1:
        with ProcessPoolExecutor(max_workers=min(threads, trials)) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]
    return SuiteReport(suite, seed, results)


def value_fields(report: SuiteReport) -> list:
    """The numeric outcome of every trial, for reproducibility comparisons."""
    return [t.values for t in report.trials]
