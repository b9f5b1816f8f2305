"""The twelve acceptance criteria, each with its tolerance and time budget.

Every test records a ``criterion N PASS|FAIL ...`` line that is printed in
the terminal summary, then asserts.
"""

import json
import math
import time
from pathlib import Path

import numpy as np

from qroof.convexify import convex_hull, fenchel_biconjugate
from qroof.ensembles import Ensemble, coarse_grain
from qroof.functionals import SpectralFunctional as SF
from qroof.locc import depolarizing_channel, identity_channel
from qroof.monotones import MonotoneSpec, entanglement_monotone, eof_spec, holevo_capacity_estimate
from qroof.states import BipartiteShape, bell_state, haar_pure, induced_mixed, projector, separable_mixture, werner_state
from qroof.verify import run_suite, trial_rng, value_fields

QUBITS = BipartiteShape(2, 2)
ORACLE = json.loads((Path(__file__).parent / "data" / "werner_oracle.json").read_text())


class Clock:
    def __init__(self, budget):
        self.budget = budget
        self.start = time.perf_counter()

    @property
    def elapsed(self):
        return time.perf_counter() - self.start

    @property
    def in_budget(self):
        return self.elapsed < self.budget


def _finish(record, n, title, ok, detail, clock):
    ok = bool(ok and clock.in_budget)
    limit = f"{clock.budget:g}s" if math.isfinite(clock.budget) else "no limit"
    record(f"criterion {n} {'PASS' if ok else 'FAIL'} {title}: {detail} ({clock.elapsed:.1f}s, budget {limit})")
    assert ok, f"{title}: {detail}, {clock.elapsed:.1f}s"


def _failures(report):
    text = ", ".join(f"#{t.index} {t.values}" for t in report.failures[:3])
    return f"; first failures: {text}" if text else ""


def test_criterion_01_bell_values(acceptance_line):
    clock = Clock(3.0)
    parts, ok = [], True
    for desc in ("eof", "alpha:a=2", "renyi:p=0.5"):
        t0 = time.perf_counter()
        v = entanglement_monotone(MonotoneSpec.parse(desc, QUBITS), bell_state()).value
        dt = time.perf_counter() - t0
        ok &= abs(v - 1.0) <= 1e-6 and dt < 1.0
        parts.append(f"{desc}={v:.9f} in {dt:.3f}s")
    _finish(acceptance_line, 1, "Bell-state values", ok, "; ".join(parts), clock)


def test_criterion_02_separable_certification(acceptance_line):
    clock = Clock(120.0)
    vals = []
    for s in range(50):
        rng = np.random.default_rng(s)
        rho = separable_mixture(QUBITS, int(rng.integers(1, 5)), seed=rng)
        vals.append(entanglement_monotone(eof_spec(QUBITS), rho).value)
    worst = max(vals)
    _finish(acceptance_line, 2, "separable certification", worst <= 5e-3, f"max E_F {worst:.2e} over 50 states", clock)


def test_criterion_03_hull_roof_coincidence(acceptance_line):
    clock = Clock(300.0)
    report = run_suite("roof-hull", 50, seed=3, threads=None)
    worst = max(t.values["gap"] for t in report.trials)
    _finish(acceptance_line, 3, "hull/roof coincidence", report.passed,
            f"max gap {worst:.2e} over 50 qutrit states{_failures(report)}", clock)


def test_criterion_04_closure_gap(acceptance_line):
    clock = Clock(60.0)
    psi = haar_pure(2, 4)
    f = SF.pure_indicator(psi)
    hull = convex_hull(f, projector(psi)).value
    closure = fenchel_biconjugate(f, projector(psi), hull_value=hull).value
    ok = abs(hull - 1.0) <= 1e-12 and closure <= 1e-2
    _finish(acceptance_line, 4, "closure gap", ok, f"hull {hull:.12f}, biconjugate {closure:.2e}", clock)


def test_criterion_05_jensen_suite(acceptance_line):
    clock = Clock(60.0)
    report = run_suite("jensen", 1000, seed=5, threads=None)
    worst = max(abs(t.values["linear_gap"]) for t in report.trials)
    _finish(acceptance_line, 5, "Jensen suite", report.passed,
            f"{len(report.trials) - len(report.failures)}/1000 passed, max affine gap {worst:.1e}{_failures(report)}", clock)


def test_criterion_06_monotone_convergence(acceptance_line):
    clock = Clock(600.0)
    report = run_suite("convergence", 20, seed=6, threads=None)
    worst = max(abs(t.values["deficit"]) for t in report.trials)
    _finish(acceptance_line, 6, "monotone convergence", report.passed,
            f"{20 - len(report.failures)}/20 passed, max deficit at n=3 {worst:.2e}{_failures(report)}", clock)


def test_criterion_07_locc_monotonicity(acceptance_line):
    clock = Clock(900.0)
    report = run_suite("locc", 200, seed=7, threads=None)
    retried = sum(t.values["retried"] for t in report.trials)
    _finish(acceptance_line, 7, "LOCC monotonicity", report.passed,
            f"{len(report.failures)} violations in 200 trials, {retried} retried{_failures(report)}", clock)


def test_criterion_08_subadditivity(acceptance_line):
    clock = Clock(600.0)
    report = run_suite("subadd", 100, seed=8, threads=None)
    worst = max(t.values["joint"] - t.values["sum"] for t in report.trials)
    _finish(acceptance_line, 8, "subadditivity", report.passed,
            f"{len(report.failures)} violations in 100 pairs, max excess {worst:.2e}{_failures(report)}", clock)


def test_criterion_09_holevo_capacity(acceptance_line):
    clock = Clock(300.0)
    ident = holevo_capacity_estimate(identity_channel(2))
    depol = holevo_capacity_estimate(depolarizing_channel(2))
    ok = (abs(ident.extrapolated - 1) <= 1e-2 and abs(ident.chi_oracle - 1) <= 1e-2
          and abs(depol.extrapolated) <= 1e-2 and abs(depol.chi_oracle) <= 1e-2)
    detail = (f"identity {ident.extrapolated:.5f}/{ident.chi_oracle:.5f}, "
              f"depolarizing {depol.extrapolated:.5f}/{depol.chi_oracle:.5f}")
    _finish(acceptance_line, 9, "Holevo capacity", ok, detail, clock)


def test_criterion_10_werner_oracle(acceptance_line):
    clock = Clock(300.0)
    diffs = []
    for row in ORACLE["values"]:
        v = entanglement_monotone(eof_spec(QUBITS), werner_state(row["p"])).value
        diffs.append((row["p"], abs(v - row["eof"])))
    worst = max(d for _, d in diffs)
    detail = ", ".join(f"p={p}: {d:.1e}" for p, d in diffs)
    _finish(acceptance_line, 10, "Werner EoF vs oracle", worst <= 1e-3, detail, clock)


def test_criterion_11_coarse_graining(acceptance_line):
    clock = Clock(60.0)
    max_bary, max_weight = 0.0, 0.0
    for i in range(100):
        rng = trial_rng(11, i)
        d = int(rng.integers(2, 5))
        n = int(rng.integers(5, 40))
        h = np.diag(np.arange(d, dtype=float))
        thr = float(rng.uniform(0, d - 1))
        e = Ensemble(rng.dirichlet(np.ones(n)), [induced_mixed(d, int(rng.integers(1, d + 1)), rng) for _ in range(n)])
        out = coarse_grain(e, float(rng.uniform(0.05, 1.5)), splitter=(h, thr))

        def low(ens):
            return math.fsum(w for w, s in zip(ens.weights, ens.densities()) if np.trace(h @ s).real <= thr)

        max_bary = max(max_bary, float(np.max(np.abs(out.barycenter() - e.barycenter()))))
        max_weight = max(max_weight, abs(low(out) - low(e)))
    # summation order leaves at most a few ulps
    ok = max_bary <= 1e-12 and max_weight <= 1e-15
    _finish(acceptance_line, 11, "coarse-graining", ok,
            f"barycenter drift {max_bary:.1e}, split weight drift {max_weight:.1e}", clock)


BATTERY = {
    "jensen": 20, "concavity": 10, "roof-hull": 2, "closure-gap": 1,
    "locc": 2, "subadd": 2, "convergence": 1, "energy-continuity": 1,
}


def _battery(seed):
    return json.dumps({s: value_fields(run_suite(s, n, seed=seed, threads=None)) for s, n in BATTERY.items()},
                      sort_keys=True).encode()


def test_criterion_12_determinism(acceptance_line):
    clock = Clock(math.inf)
    first, second = _battery(12), _battery(12)
    _finish(acceptance_line, 12, "determinism", first == second,
            f"{len(first)} bytes of value fields, identical={first == second}", clock)
