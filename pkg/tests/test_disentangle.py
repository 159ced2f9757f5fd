import math

import numpy as np
import pytest

from factorlab.core import (
    AtomicMeasureSpace,
    Certificate,
    ExponentProfile,
    Instance,
    OperatorMatrix,
    geometric_mean_floor,
    lp_norm,
)
from factorlab.disentangle import (
    ConstraintFamily,
    augmented_instance,
    cap_schedule,
    disentangle,
    duality_certificate,
    feasibility_solve,
    maurey_exponents,
    maurey_factorise,
    required_cap,
    verify_certificate,
)
from factorlab.errors import AdmissibilityError, SaturationError, StructuralError
from factorlab.oracle import brute_force_constant
from factorlab.separation import separation_oracle, weighted_value

from fixtures import averaging_instance, identity_instance


def _one_atom(values, p=(1.0, 1.0)):
    """Family g_j = (values[j]) on a single atom, generated by f = (1)."""
    x = AtomicMeasureSpace([1.0])
    fam = ConstraintFamily.empty(2)
    for j, v in enumerate(values):
        fam.add(j, OperatorMatrix(x, x, [[v ** (1.0 / p[j])]], True), p[j], 1.0, np.ones(1))
    prof = ExponentProfile.from_theta([0.5, 0.5], p, [1.0, 1.0])
    return x, prof, fam


# feasibility_solve

def test_feasibility_one_atom_closed_form():
    x, prof, fam = _one_atom([2.0, 0.5])
    res = feasibility_solve(x, prof, fam, A=1.0)
    assert res.feasible
    assert np.allclose(res.log_weights[:, 0], [-math.log(2), math.log(2)], atol=1e-8)


def test_feasibility_identity_basis_family():
    x = AtomicMeasureSpace([1.0])
    fam = ConstraintFamily.empty(2)
    for j in range(2):
        fam.add(j, OperatorMatrix(x, x, [[1.0]], True), 2.0, 2.0, np.ones(1))
    res = feasibility_solve(x, ExponentProfile([1.0, 1.0], [2.0, 2.0], [2.0, 2.0]), fam, A=1.0)
    assert res.feasible and np.allclose(res.weights, 1.0, atol=1e-8)


def test_feasibility_half_constant_is_infeasible():
    x, prof, fam = _one_atom([2.0, 0.5])
    res = feasibility_solve(x, prof, fam, A=0.5)
    assert not res.feasible
    # minimise max(4 phi_1, phi_2) subject to phi_1 phi_2 >= 1: the optimal level is 2
    assert res.dual_bound == pytest.approx(2.0, rel=1e-8)
    assert res.dual_bound <= res.level * (1 + 1e-12)


def test_feasibility_requires_nonempty_families():
    x = AtomicMeasureSpace([1.0])
    with pytest.raises(StructuralError):
        feasibility_solve(x, ExponentProfile([1.0, 1.0], [2.0, 2.0], [2.0, 2.0]), ConstraintFamily.empty(2), 1.0)


def test_adding_constraint_never_lowers_level():
    rng = np.random.default_rng(4)
    x = AtomicMeasureSpace(rng.uniform(0.5, 2, 4))
    y = AtomicMeasureSpace(np.ones(3))
    ops = [OperatorMatrix(x, y, rng.uniform(0, 1, (4, 3)), True) for _ in range(2)]
    prof = ExponentProfile.from_theta([0.5, 0.5], [2.0, 1.5], [2.0, 2.0])
    fam = ConstraintFamily.empty(2)
    for j in range(2):
        fam.add(j, ops[j], prof.p[j], prof.r[j], np.eye(3)[0])
    prev = feasibility_solve(x, prof, fam, 1.0)
    for k in range(6):
        j = k % 2
        fam.add(j, ops[j], prof.p[j], prof.r[j], rng.uniform(0, 1, 3))
        cur = feasibility_solve(x, prof, fam, 1.0)
        # level >= new optimum >= old optimum >= old dual bound
        assert cur.level >= prev.dual_bound * (1 - 1e-12)
        assert cur.dual_bound >= prev.dual_bound * (1 - 1e-8)
        prev = cur


def test_constraint_member_reproduced_by_generator():
    x = AtomicMeasureSpace([1.0, 2.0])
    y = AtomicMeasureSpace([1.0, 1.0, 3.0])
    op = OperatorMatrix(x, y, [[1, -2, 0.5], [0, 1, 1]])
    fam = ConstraintFamily.empty(1)
    f = np.array([0.3, -1.0, 2.0])
    g = fam.add(0, op, 1.5, 3.0, f)
    direct = np.abs(op.entries @ f) ** 1.5 / lp_norm(f, 3.0, y) ** 1.5
    assert np.allclose(g, direct, rtol=1e-12)


# separation_oracle

def test_separation_diagonal_weight():
    sp = AtomicMeasureSpace([1, 1])
    res = separation_oracle(OperatorMatrix(sp, sp, np.eye(2)), [1, 2], 2, 2)
    assert res.method == "eigen-exact"
    assert res.achieved == pytest.approx(2.0, rel=1e-12)
    assert np.allclose(np.abs(res.violating_input) / np.linalg.norm(res.violating_input), [0, 1], atol=1e-6)


def test_separation_identity_unit_weight():
    sp = AtomicMeasureSpace([1, 1])
    res = separation_oracle(OperatorMatrix(sp, sp, np.eye(2)), [1, 1], 2, 2)
    assert res.achieved == pytest.approx(1.0, rel=1e-12)


def test_separation_orthogonal_matrix():
    sp = AtomicMeasureSpace([1, 1])
    T = OperatorMatrix(sp, sp, np.array([[1, 1], [1, -1]]) / math.sqrt(2))
    res = separation_oracle(T, [1, 1], 2, 2)
    assert res.achieved == pytest.approx(1.0, rel=1e-12)


def test_separation_value_reproducible():
    rng = np.random.default_rng(3)
    x, y = AtomicMeasureSpace(rng.uniform(0.5, 2, 4)), AtomicMeasureSpace(rng.uniform(0.5, 2, 3))
    T = OperatorMatrix(x, y, rng.standard_normal((4, 3)))
    phi = rng.uniform(0.1, 2, 4)
    for p, r in [(1.0, 1.5), (1.5, 3.0), (0.7, 1.0), (2.0, 2.0)]:
        res = separation_oracle(T, phi, p, r, seed=1)
        assert weighted_value(T, phi, p, r, res.violating_input) == pytest.approx(res.achieved, rel=1e-10)


# disentangle

@pytest.mark.parametrize("gamma,p,r", [
    ((1.0, 1.0), (2.0, 2.0), (2.0, 2.0)),
    ((0.5, 0.25), (1.0, 0.5), (1.0, 1.0)),
    ((1.0, 2.0), (3.0, 3.0), (math.inf, 4.0)),
    ((0.2, 1.6), (1.0, 2.0), (1.5, 2.0)),
])
def test_averaging_certifies_with_unit_weights(gamma, p, r):
    inst = averaging_instance(gamma=gamma, p=p, r=r)
    rep = disentangle(inst, A=1.0, cap=1.0)
    assert rep.certified
    assert np.allclose(rep.certificate.phi, 1.0, atol=1e-8)


def test_identity_certifies_with_floor():
    inst = identity_instance()
    rep = disentangle(inst, A=1.0, cap=1.0)
    assert rep.certified
    assert geometric_mean_floor(rep.certificate, inst.profile, inst.space_x) >= 1 - 1e-8


def test_random_positive_exact_constant():
    rng = np.random.default_rng(42)
    x = AtomicMeasureSpace(rng.uniform(0.5, 2, 3))
    ops = [OperatorMatrix(x, x, rng.uniform(0, 1, (3, 3)), True) for _ in range(2)]
    inst = Instance(x, ops, ExponentProfile.from_theta([0.3, 0.7], [1.2, 2.5], [2.0, 3.0]))
    A = brute_force_constant(inst, 12).constant
    rep = disentangle(inst, A=A)
    assert rep.certified and rep.cap <= 1 + 1e-4
    assert max(rep.certificate.per_index_constants(inst.profile)) <= (1 + 1e-4) * A
    assert verify_certificate(inst, rep.certificate).ok


def test_refuses_positive_beyond_range():
    inst = identity_instance(p=(3.0, 1.5), r=(2.0, 2.0), gamma=(1.5, 0.75))
    with pytest.raises(AdmissibilityError, match="p_j <= r_j"):
        disentangle(inst, A=1.0)


def test_refuses_general_boundary_exponent():
    x = AtomicMeasureSpace([1, 1])
    ops = [OperatorMatrix(x, x, [[1, 1], [1, -1]]) for _ in range(2)]
    inst = Instance(x, ops, ExponentProfile([0.75, 0.75], [1.5, 1.5], [1.5, 1.5]))
    with pytest.raises(AdmissibilityError, match="strictly"):
        disentangle(inst, A=1.0)


def test_refuses_general_p_above_two():
    x = AtomicMeasureSpace([1, 1])
    ops = [OperatorMatrix(x, x, [[1, 1], [1, -1]]) for _ in range(2)]
    inst = Instance(x, ops, ExponentProfile([1.5, 0.5], [3.0, 1.0], [3.0, 3.0]))
    with pytest.raises(AdmissibilityError, match="p_j <= 2"):
        disentangle(inst, A=1.0)


def test_refuses_non_saturating():
    x = AtomicMeasureSpace([1, 1])
    ops = [OperatorMatrix(x, x, [[1, 0], [0, 0]], True), OperatorMatrix(x, x, np.eye(2), True)]
    inst = Instance(x, ops, ExponentProfile([1.0, 1.0], [2.0, 2.0], [2.0, 2.0]))
    with pytest.raises(SaturationError, match="row 1"):
        disentangle(inst, A=1.0)


def test_general_operator_certifies_with_some_cap():
    rng = np.random.default_rng(9)
    x = AtomicMeasureSpace(np.ones(3))
    ops = [OperatorMatrix(x, x, rng.standard_normal((3, 3))) for _ in range(2)]
    inst = Instance(x, ops, ExponentProfile.from_theta([0.5, 0.5], [1.0, 2.0], [1.5, 2.0]))
    rep = disentangle(inst, seed=2)
    assert rep.certified and rep.cap in cap_schedule()
    assert verify_certificate(inst, rep.certificate).ok


def test_explore_bypasses_admissibility():
    # p_j > r_j is refused by default; on atoms the identity still admits phi = 1
    inst = identity_instance(n=3, p=(4.0, 4.0), r=(1.0, 1.0), gamma=(2.0, 2.0))
    with pytest.raises(AdmissibilityError):
        disentangle(inst, A=1.0)
    rep = disentangle(inst, A=1.0, explore=True, max_rounds=40)
    assert rep.certified
    assert rep.cap <= 1 + 1e-4


def test_cap_schedule_shape():
    caps = cap_schedule()
    assert caps[0] == 1 + 1e-4 and caps[-1] == 2.0 ** 10 and len(caps) == 11


def test_required_cap_brackets_best_constant():
    rng = np.random.default_rng(1)
    x = AtomicMeasureSpace(rng.uniform(0.5, 2, 3))
    ops = [OperatorMatrix(x, x, rng.uniform(0, 1, (3, 3)), True) for _ in range(2)]
    inst = Instance(x, ops, ExponentProfile.from_theta([0.5, 0.5], [2.0, 1.0], [2.0, 1.0]))
    lo, hi = required_cap(inst).best_constant
    brute = brute_force_constant(inst, 12).constant
    assert lo <= hi * (1 + 1e-12)
    assert brute <= hi * (1 + 1e-9)
    assert brute == pytest.approx(lo, rel=1e-5)


# verify_certificate

def test_verify_unit_weights_on_averaging():
    inst = averaging_instance(r=(1.0, 1.0))
    rep = verify_certificate(inst, Certificate(np.ones((2, 3)), 1.0))
    assert rep.ok
    assert rep.geometric_residual <= 1e-12
    assert max(rep.separation) <= 1 + 1e-12


def test_verify_zeroed_atom_fails():
    inst = averaging_instance(r=(1.0, 1.0))
    phi = np.ones((2, 3))
    phi[0, 1] = 0.0
    rep = verify_certificate(inst, Certificate(phi, 1.0))
    assert not rep.ok and rep.worst_atom == 1 and rep.geometric_floor == 0.0


def test_verify_detects_too_small_constant():
    inst = identity_instance()
    rep = verify_certificate(inst, Certificate(np.ones((2, 2)), 0.9))
    assert not rep.ok and max(rep.separation) > 1


def test_verify_shape_mismatch():
    with pytest.raises(StructuralError):
        verify_certificate(identity_instance(), Certificate(np.ones((2, 3)), 1.0))


# L^q bounds with q > 1: reweighting by G

def _lq(inst, q):
    return inst.with_profile(ExponentProfile(inst.profile.gamma, inst.profile.p, inst.profile.r, q=q), 1.0)


def test_duality_one_atom_reduces_to_disentangle():
    inst = _lq(identity_instance(n=1), 2.0)
    cert, rep = duality_certificate(inst, [1.0])
    base = disentangle(identity_instance(n=1), A=1.0)
    assert rep.certified and np.array_equal(cert.phi, base.certificate.phi)


def test_duality_averaging_unit_weight():
    inst = averaging_instance(q=2.0)
    G = np.array([1.0, 2.0, 0.5])
    G = G / lp_norm(G, 2.0, inst.space_x)
    cert, rep = duality_certificate(inst, G)
    assert rep.certified
    # the weights are not unique; each g_j is a multiple of G and together they dominate G
    for g in cert.phi:
        ratio = g / G
        assert np.allclose(ratio, ratio[0], rtol=1e-9)
    floor = np.exp(inst.profile.theta @ np.log(cert.phi))
    assert np.all(floor >= G * (1 - 1e-8))
    # g_j = G itself is also a valid choice
    reduced = averaging_instance().with_measure(inst.space_x.weights * G)
    assert verify_certificate(reduced, Certificate(np.ones((2, 3)), 1.0)).ok


def test_duality_drops_zero_atoms():
    inst = _lq(identity_instance(), 2.0)
    cert, rep = duality_certificate(inst, [1.0, 0.0])
    assert rep.certified
    assert np.all(cert.phi[:, 1] == 0.0) and np.all(cert.phi[:, 0] > 0)


def test_duality_constant_weight_is_scaled_disentangle():
    rng = np.random.default_rng(6)
    x = AtomicMeasureSpace(rng.uniform(0.5, 2, 3))
    ops = [OperatorMatrix(x, x, rng.uniform(0, 1, (3, 3)), True) for _ in range(2)]
    prof = ExponentProfile.from_theta([0.5, 0.5], [2.0, 1.5], [2.0, 2.0])
    base = Instance(x, ops, prof)
    c = 3.0
    G = np.full(3, c)
    gnorm = lp_norm(G, 2.0, x)
    inst = base.with_profile(ExponentProfile(prof.gamma, prof.p, prof.r, q=2.0), 1.3)
    cert, rep = duality_certificate(inst, G, seed=4)
    direct = disentangle(base.with_measure(x.weights * (G / gnorm)), A=1.3, seed=4)
    assert rep.certified and direct.certified
    assert np.array_equal(cert.phi, direct.certificate.phi * c)


def test_duality_rejects_zero_weight():
    with pytest.raises(StructuralError):
        duality_certificate(_lq(identity_instance(), 2.0), [0.0, 0.0])


def test_duality_requires_q_above_one():
    with pytest.raises(StructuralError):
        duality_certificate(identity_instance(), [1.0, 1.0])


# L^q bounds with q < 1: augmentation

def test_maurey_one_atom_single_identity():
    x = AtomicMeasureSpace([1.0])
    inst = Instance(x, [OperatorMatrix(x, x, [[1.0]], True)], ExponentProfile([1.0], [1.0], [1.0], q=0.5), 1.0)
    res = maurey_factorise(inst)
    assert res.report.certified
    assert np.allclose(res.certificate.phi, 1.0, atol=1e-8)
    assert res.consistency_residual <= 1e-6


def test_maurey_averaging_constant_weights():
    res = maurey_factorise(averaging_instance(q=0.5))
    assert res.report.certified
    g = res.certificate.phi
    assert np.allclose(g, g[:, :1], rtol=1e-9)
    assert res.dual_norm >= 1 - 1e-6 and res.consistency_residual <= 1e-6


def test_maurey_exponent_arithmetic():
    last, tilde = maurey_exponents([0.25, 0.75], 1.0 / 3.0)
    assert last == pytest.approx(2.0, abs=1e-15)
    assert tilde.sum() == pytest.approx(1.0, abs=1e-15)


def test_augmented_instance_constant():
    inst = averaging_instance()
    aug = augmented_instance(inst, 0.5, 2.0)
    assert aug.d == 3
    assert aug.known_constant ** aug.profile.gamma.sum() == pytest.approx(2.0 ** 0.5, rel=1e-12)


def test_maurey_rejects_q_out_of_range():
    with pytest.raises(StructuralError):
        maurey_factorise(averaging_instance(), q=1.5)
