import math

import numpy as np
import pytest

from factorlab.core import AtomicMeasureSpace, ExponentProfile, Instance, OperatorMatrix, inequality_ratio
from factorlab.errors import BudgetError
from factorlab.oracle import brute_force_constant, estimate_best_constant, verify_scalar_inequality

from fixtures import averaging_instance, diag_instance, grid_levels_for, identity_instance, random_positive_instance

# Closed form: T_1 f T_2 g = 2 f g pointwise, so the ratio is 2<f,g>/(|f||g|) <= 2.
DIAG_RATIO = 2.0


def one_atom_identity():
    return identity_instance(n=1)


def _witness_consistent(inst, est):
    assert inequality_ratio(inst, est.witness) == pytest.approx(est.lower_bound, rel=1e-10)


def test_brute_force_one_atom_identity():
    est = brute_force_constant(one_atom_identity(), 4)
    assert est.lower_bound == pytest.approx(1.0, abs=1e-15)
    assert est.method == "exhaustive"


@pytest.mark.parametrize("gamma,p", [((1.0, 1.0), (2.0, 2.0)), ((0.5, 1.5), (1.0, 3.0)), ((2.0, 1.0), (4.0, 2.0))])
def test_brute_force_averaging_is_one(gamma, p):
    inst = averaging_instance(n=3, m=2, gamma=gamma, p=p, r=(1.0, 1.0))
    est = brute_force_constant(inst, 8)
    assert est.lower_bound == pytest.approx(1.0, abs=1e-12)
    _witness_consistent(inst, est)


def test_brute_force_diag_frozen():
    est = brute_force_constant(diag_instance(), 12)
    assert est.lower_bound == pytest.approx(DIAG_RATIO, rel=1e-10)
    assert est.constant == pytest.approx(math.sqrt(2), rel=1e-10)
    _witness_consistent(diag_instance(), est)


def test_brute_force_budget_refusal():
    inst = identity_instance(n=9)
    with pytest.raises(BudgetError, match="budget") as info:
        brute_force_constant(inst, 20)
    assert info.value.required > 1e8


def test_positivity_shortcut_never_lowers_max():
    rng = np.random.default_rng(5)
    for _ in range(6):
        inst = random_positive_instance(rng, d=2, max_dim=2)
        pos = brute_force_constant(inst, 8)
        signed = brute_force_constant(inst, 8, signed=True)
        assert pos.lower_bound >= signed.lower_bound * (1 - 1e-9)


def test_ascent_identity_any_seed():
    for seed in (0, 1, 99):
        est = estimate_best_constant(identity_instance(), 3000, seed)
        assert abs(est.lower_bound - 1.0) <= 1e-9


def test_ascent_averaging():
    est = estimate_best_constant(averaging_instance(r=(1.0, 1.0)), 2000, 0)
    assert est.lower_bound == pytest.approx(1.0, abs=1e-6)


def test_ascent_matches_brute_force_random_3x3():
    rng = np.random.default_rng(42)
    x = AtomicMeasureSpace(rng.uniform(0.5, 2, 3))
    ops = [OperatorMatrix(x, x, rng.uniform(0, 1, (3, 3)), True) for _ in range(2)]
    inst = Instance(x, ops, ExponentProfile.from_theta([0.4, 0.6], [1.5, 2.0], [2.0, 3.0]))
    brute = brute_force_constant(inst, 12)
    est = estimate_best_constant(inst, 20_000, seed=42)
    assert est.lower_bound >= brute.lower_bound - 1e-6
    _witness_consistent(inst, est)


def test_oracle_agreement_random_instances():
    rng = np.random.default_rng(11)
    for _ in range(5):
        inst = random_positive_instance(rng, max_dim=3)
        brute = brute_force_constant(inst, grid_levels_for(inst, 200_000))
        est = estimate_best_constant(inst, 100_000, seed=3)
        assert abs(est.lower_bound - brute.lower_bound) <= 1e-3 * brute.lower_bound


def test_ascent_deterministic_and_monotone_in_budget():
    inst = random_positive_instance(np.random.default_rng(8), d=3, max_dim=4)
    a = estimate_best_constant(inst, 4000, seed=7)
    b = estimate_best_constant(inst, 4000, seed=7)
    c = estimate_best_constant(inst, 12_000, seed=7)
    assert a.lower_bound == b.lower_bound
    assert c.lower_bound >= a.lower_bound


def test_ascent_rejects_empty_budget():
    with pytest.raises(ValueError):
        estimate_best_constant(identity_instance(), 0)


def test_verify_scalar_identity_passes():
    rep = verify_scalar_inequality(identity_instance(), 1.0, 10_000, seed=0)
    assert rep.ok and rep.max_ratio <= 1 + 1e-12


def test_verify_scalar_identity_half_fails():
    inst = identity_instance()
    rep = verify_scalar_inequality(inst, 0.5, 2000, seed=0)
    assert not rep.ok and rep.witness is not None
    assert inequality_ratio(inst, rep.witness) > 0.25


def test_verify_scalar_averaging_passes():
    rep = verify_scalar_inequality(averaging_instance(r=(1.0, 1.0)), 1.0, 5000, seed=2)
    assert rep.ok
