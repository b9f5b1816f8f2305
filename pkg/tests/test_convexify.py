import math

import numpy as np
import pytest
from scipy.optimize import brentq

from helpers import random_hermitian
from qroof.convexify import (
    MonotonicityError,
    OptimizerConfig,
    SandwichError,
    check_dual_operator,
    convex_hull,
    convex_roof,
    fenchel_biconjugate,
    fenchel_conjugate,
    growth_ratio_estimate,
    jensen_check,
    monotone_limit_probe,
    witness_value,
)
from qroof.ensembles import Ensemble
from qroof.functionals import SpectralFunctional as SF
from qroof.locc import random_channel
from qroof.monotones import eof_spec
from qroof.objectives import SpectralObjective, channel_objective, objective_for
from qroof.states import BipartiteShape, StateError, bell_state, haar_pure, induced_mixed, projector

H = SF.von_neumann()
NEG_H = SF.custom(lambda x: -H.from_spectrum(x))
# positive on pure states and not convex: hulls are nontrivial
BUMP = SF.custom(lambda x: (np.max(x) - 0.6) ** 2)
FAST = OptimizerConfig(restarts=8)


def _certified(f, rho, res):
    assert np.allclose(res.witness.barycenter(), rho, atol=1e-9)
    assert res.value == pytest.approx(witness_value(objective_for(f, rho.shape[0]), res.witness), abs=1e-9)


def test_config_validation():
    with pytest.raises(ValueError):
        OptimizerConfig(restarts=0)
    with pytest.raises(ValueError):
        OptimizerConfig(tol=0)
    cfg = OptimizerConfig(restarts=4, seed=3)
    assert cfg.boosted(4).restarts == 16 and cfg.with_seed(9).seed == 9


def test_hull_of_convex_function_is_itself():
    rho = induced_mixed(3, None, 2)
    res = convex_hull(NEG_H, rho, FAST)
    assert res.value == pytest.approx(NEG_H(rho), abs=1e-9)
    _certified(NEG_H, rho, res)


def test_hull_of_indicator_at_its_point():
    psi = haar_pure(3, 5)
    res = convex_hull(SF.pure_indicator(psi), projector(psi))
    assert res.value == pytest.approx(1.0, abs=1e-12)
    assert len(res.witness) == 1


@pytest.mark.parametrize("seed", range(3))
def test_hull_of_entropy_on_qubit_vanishes(seed):
    rho = induced_mixed(2, None, seed)
    res = convex_hull(H, rho)
    assert res.value <= 1e-6
    _certified(H, rho, res)


def test_hull_below_function():
    for s in range(5):
        rho = induced_mixed(2, None, s)
        res = convex_hull(BUMP, rho, FAST)
        assert res.value <= BUMP(rho) + 1e-9
        _certified(BUMP, rho, res)


def test_roof_on_pure_state_is_exact():
    psi = haar_pure(4, 1)
    obj = eof_spec(BipartiteShape(2, 2)).objective()
    res = convex_roof(obj, projector(psi))
    assert len(res.witness) == 1
    assert res.value == pytest.approx(obj(projector(psi)[None])[0][0], abs=1e-15)


def test_roof_of_constant_and_zero():
    const = SF.custom(lambda x: 0.3)
    for s in range(3):
        rho = induced_mixed(3, None, s)
        assert convex_roof(const, rho, FAST).value == pytest.approx(0.3, abs=1e-9)
        assert convex_roof(H, rho, FAST).value == pytest.approx(0.0, abs=1e-9)


def test_roof_dominates_hull():
    for s in range(4):
        rho = induced_mixed(2, None, 10 + s)
        assert convex_roof(BUMP, rho, FAST).value >= convex_hull(BUMP, rho, FAST).value - 1e-9


@pytest.mark.parametrize("f", [H, SF.renyi(0.5), SF.alpha_tangle(2.0)], ids=lambda f: f.describe())
def test_hull_roof_coincide_for_concave(f):
    for s in range(3):
        rho = induced_mixed(3, None, 20 + s)
        assert abs(convex_hull(f, rho, FAST).value - convex_roof(f, rho, FAST).value) <= 2e-3


def test_hull_convex_along_segment():
    a, b = induced_mixed(2, None, 1), induced_mixed(2, None, 2)
    ha, hb = convex_hull(BUMP, a, FAST).value, convex_hull(BUMP, b, FAST).value
    for t in (0.25, 0.5, 0.75):
        mid = convex_hull(BUMP, t * a + (1 - t) * b, FAST).value
        assert mid <= t * ha + (1 - t) * hb + 2e-3


def test_hull_witness_passes_jensen():
    rho = induced_mixed(2, None, 6)
    res = convex_hull(BUMP, rho, FAST)
    rep = jensen_check(lambda r: convex_hull(BUMP, r, FAST).value, res.witness, "convex", 2e-3)
    assert rep.satisfied


def test_deterministic():
    rho = induced_mixed(3, 2, 8)
    a = convex_roof(SF.alpha_tangle(2), rho, OptimizerConfig(restarts=6, seed=4))
    b = convex_roof(SF.alpha_tangle(2), rho, OptimizerConfig(restarts=6, seed=4))
    assert a.value == b.value


def test_hull_result_json_fields():
    d = convex_hull(H, np.eye(2) / 2, FAST).to_dict()
    assert set(d) == {"value", "converged", "iterations", "witness"}


# ------------------------------------------------------------------ conjugates


def test_conjugate_at_zero():
    for f in (H, SF.renyi(0.5), NEG_H):
        expected = -min(0.0, NEG_H(np.eye(2) / 2)) if f is NEG_H else 0.0
        assert fenchel_conjugate(f, np.zeros((2, 2)), FAST) == pytest.approx(expected, abs=1e-7)


def test_conjugate_of_zero_is_top_eigenvalue():
    zero = SF.custom(lambda x: 0.0)
    a = np.diag([0.2, 0.0, 0.7])
    assert fenchel_conjugate(zero, a, FAST) == pytest.approx(0.7, abs=1e-8)


def test_conjugate_matches_bloch_grid():
    a = np.diag([0.0, 1.0])
    best = -np.inf
    for r in np.linspace(0, 1, 101):
        for th in np.linspace(0, np.pi, 61):
            lam = np.array([(1 + r) / 2, (1 - r) / 2])
            ent = -sum(x * math.log2(x) for x in lam if x > 0)
            # <1|rho|1> for Bloch vector of length r at polar angle th (phi irrelevant)
            best = max(best, (1 - r * math.cos(th)) / 2 - ent)
    assert fenchel_conjugate(H, a) == pytest.approx(best, abs=1e-4)


def test_dual_operator_checks():
    with pytest.raises(StateError):
        check_dual_operator(np.diag([1.0, -1.0]))
    with pytest.raises(StateError):
        check_dual_operator(np.diag([1.0, 5.0]), norm_cap=2.0)


def test_biconjugate_of_convex_function():
    rho = induced_mixed(2, None, 4)
    b = fenchel_biconjugate(NEG_H, rho)
    assert b.value == pytest.approx(NEG_H(rho), abs=1e-3)
    assert b.value <= b.upper_bound + 1e-9


def test_closure_gap_for_indicator():
    psi = haar_pure(2, 3)
    f = SF.pure_indicator(psi)
    assert convex_hull(f, projector(psi)).value == pytest.approx(1.0, abs=1e-12)
    assert fenchel_biconjugate(f, projector(psi)).value <= 1e-2


def test_closure_equals_roof_at_bell():
    obj = eof_spec(BipartiteShape(2, 2)).objective()
    bell = projector(bell_state())
    b = fenchel_biconjugate(obj, bell)
    assert b.value == pytest.approx(convex_roof(obj, bell).value, abs=2e-3)


def test_closure_at_pure_state_equals_function():
    psi = haar_pure(3, 1)
    b = fenchel_biconjugate(SF.renyi(0.5), projector(psi))
    assert abs(b.value - 0.0) <= 2e-3


def test_sandwich_violation_raises():
    with pytest.raises(SandwichError):
        fenchel_biconjugate(NEG_H, induced_mixed(2, None, 1), hull_value=-5.0)


# ------------------------------------------------------------------ probes


def test_limit_probe_constant_family():
    rho = [induced_mixed(2, None, s) for s in range(2)]
    table = monotone_limit_probe(lambda n: BUMP, BUMP, rho, [1, 2, 3], FAST)
    assert table.nondecreasing
    assert all(abs(r.deficit) <= 1e-9 for r in table.rows)
    assert table.to_csv().splitlines()[0] == "n,state_id,value,deficit"


def test_limit_probe_renyi_to_entropy_through_channel():
    ch = random_channel(2, 2, 2, seed=3)

    def family(n):
        return channel_objective(SpectralObjective(SF.renyi(1 + 1 / n), 2), ch.kraus)

    limit = channel_objective(SpectralObjective(H, 2), ch.kraus)
    rho = induced_mixed(2, None, 5)
    table = monotone_limit_probe(family, limit, [rho], [1, 2, 4, 8], FAST)
    deficits = [r.deficit for r in table.rows]
    assert table.nondecreasing
    assert all(b <= a + 2e-3 for a, b in zip(deficits, deficits[1:]))


def test_limit_probe_rejects_decreasing_family():
    with pytest.raises(MonotonicityError):
        monotone_limit_probe(lambda n: SF.renyi(n), H, [], [1, 2, 3], check_states=[induced_mixed(3, None, 0)])


def test_jensen_directions():
    rng = np.random.default_rng(0)
    e = Ensemble(rng.dirichlet(np.ones(4)), [induced_mixed(3, None, rng) for _ in range(4)])
    a = random_hermitian(3, rng)
    assert jensen_check(lambda r: np.trace(a @ r).real, e, "affine", 1e-12).satisfied
    assert jensen_check(H, e, "concave").satisfied
    assert jensen_check(NEG_H, e, "convex").satisfied
    assert not jensen_check(H, e, "convex").satisfied
    with pytest.raises(ValueError):
        jensen_check(H, e, "sideways")


def _gibbs_entropy(levels, c):
    beta = brentq(lambda b: levels @ np.exp(-b * levels) / np.exp(-b * levels).sum() - c, -50, 50)
    p = np.exp(-beta * levels)
    p /= p.sum()
    return float(-(p * np.log2(p)).sum())


def test_growth_ratio():
    levels = np.array([0.0, 1.0, 2.0])
    h = np.diag(levels)
    one = SF.custom(lambda x: 1.0)
    rows = growth_ratio_estimate(one, h, [0.5, 1.0, 2.0], FAST)
    assert [r[2] for r in rows] == pytest.approx([2.0, 1.0, 0.5], abs=1e-9)
    grid = [0.2, 0.6, 1.0]
    rows = growth_ratio_estimate(H, h, grid, OptimizerConfig(restarts=2))
    assert [r[1] for r in rows] == pytest.approx([_gibbs_entropy(levels, c) for c in grid], abs=1e-6)
    with pytest.raises(ValueError):
        growth_ratio_estimate(H, h, [1.0, 0.5])
