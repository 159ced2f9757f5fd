"""Property-based checks of the invariants each module promises."""
import math

import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from factorlab.core import (
    AtomicMeasureSpace,
    Certificate,
    ExponentProfile,
    evaluate_lhs,
    geometric_mean_floor,
    inequality_ratio,
    lp_norm,
)
from factorlab.counterexamples import TrigPolynomial, convolve, rudin_shapiro, trig_poly_norm
from factorlab.disentangle import ConstraintFamily, feasibility_solve
from factorlab.vector import jensen_check, khintchine_check, stable_sample

from fixtures import random_positive_instance

FAST = settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
SLOW = settings(max_examples=12, deadline=None, suppress_health_check=[HealthCheck.too_slow])

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
positive = st.floats(1e-3, 1e3, allow_nan=False, allow_infinity=False)
seeds = st.integers(0, 2 ** 32 - 1)


@st.composite
def vectors_with_space(draw, count=2):
    n = draw(st.integers(1, 8))
    w = draw(arrays(float, n, elements=positive))
    vs = [draw(arrays(float, n, elements=finite)) for _ in range(count)]
    return AtomicMeasureSpace(w), vs


@FAST
@given(vectors_with_space(), st.floats(1.0, 8.0))
def test_triangle_inequality(data, p):
    sp, (f, g) = data
    assert lp_norm(f + g, p, sp) <= (lp_norm(f, p, sp) + lp_norm(g, p, sp)) * (1 + 1e-12) + 1e-12


@FAST
@given(vectors_with_space())
def test_triangle_inequality_sup(data):
    sp, (f, g) = data
    assert lp_norm(f + g, math.inf, sp) <= lp_norm(f, math.inf, sp) + lp_norm(g, math.inf, sp)


@FAST
@given(vectors_with_space(), st.floats(0.1, 0.99))
def test_power_subadditive_below_one(data, p):
    sp, (f, g) = data
    lhs = lp_norm(f + g, p, sp) ** p
    rhs = lp_norm(f, p, sp) ** p + lp_norm(g, p, sp) ** p
    assert lhs <= rhs * (1 + 1e-10) + 1e-12


@FAST
@given(vectors_with_space(count=1))
def test_l1_norm_is_plain_sum(data):
    sp, (f,) = data
    assert lp_norm(f, 1.0, sp, weight=np.ones_like(f)) == float(np.sum(np.abs(f) * sp.weights))


@FAST
@given(seeds, st.floats(0.05, 20.0), st.integers(0, 2))
def test_lhs_homogeneity(seed, lam, j):
    rng = np.random.default_rng(seed)
    inst = random_positive_instance(rng, d=3)
    fs = [rng.standard_normal(m) for m in inst.source_dims()]
    base = evaluate_lhs(inst, fs)
    scaled = list(fs)
    scaled[j] = lam * fs[j]
    assert math.isclose(evaluate_lhs(inst, scaled), lam ** inst.profile.gamma[j] * base, rel_tol=1e-10, abs_tol=1e-300)


@FAST
@given(seeds, st.floats(0.05, 20.0))
def test_ratio_scale_invariant(seed, lam):
    rng = np.random.default_rng(seed)
    inst = random_positive_instance(rng)
    fs = [rng.standard_normal(m) for m in inst.source_dims()]
    assert math.isclose(inequality_ratio(inst, [lam * f for f in fs]), inequality_ratio(inst, fs), rel_tol=1e-10)


@FAST
@given(seeds)
def test_floor_invariant_under_balanced_rescaling(seed):
    rng = np.random.default_rng(seed)
    d, n = 3, 5
    theta = rng.dirichlet(np.ones(d))
    prof = ExponentProfile.from_theta(theta, np.ones(d), np.ones(d))
    phi = rng.uniform(0.1, 3.0, (d, n))
    logc = rng.standard_normal(d)
    logc -= (theta @ logc) / theta.sum() * np.ones(d)  # prod c_j^theta_j = 1
    sp = AtomicMeasureSpace(np.ones(n))
    a = geometric_mean_floor(Certificate(phi, 1.0), prof, sp)
    b = geometric_mean_floor(Certificate(phi * np.exp(logc)[:, None], 1.0), prof, sp)
    assert math.isclose(a, b, rel_tol=1e-12)


@FAST
@given(st.integers(0, 10), st.integers(0, 40))
def test_parseval_exact_rudin_shapiro(m, shift):
    P = rudin_shapiro(m)[0].modulate(shift)
    assert abs(trig_poly_norm(P, 2) - 2 ** (m / 2)) <= 1e-12 * 2 ** (m / 2)


@FAST
@given(arrays(complex, st.integers(1, 64), elements=st.complex_numbers(max_magnitude=10, allow_nan=False)),
       st.integers(0, 16))
def test_parseval_grid_matches_coefficients(coef, shift):
    P = TrigPolynomial(coef, shift)
    grid = 8 * 2 ** int(math.ceil(math.log2(coef.size + shift + 1)))
    samples = P.samples(grid)
    grid_norm = float(np.sqrt(np.mean(np.abs(samples) ** 2)))
    assert math.isclose(grid_norm, P.parseval_norm(), rel_tol=1e-10, abs_tol=1e-12)


@FAST
@given(st.integers(0, 9), st.integers(0, 9))
def test_rs_pair_conservation(m, _):
    P, Q = rudin_shapiro(m)
    P1, Q1 = rudin_shapiro(m + 1)
    grid = 16 * 2 ** (m + 1)
    lhs = np.abs(P1.samples(grid)) ** 2 + np.abs(Q1.samples(grid)) ** 2
    rhs = 2 * (np.abs(P.samples(grid)) ** 2 + np.abs(Q.samples(grid)) ** 2)
    assert np.max(np.abs(lhs - rhs)) <= 1e-9 * np.max(rhs)


@FAST
@given(arrays(float, st.integers(1, 16), elements=st.floats(-5, 5)), st.integers(0, 8))
def test_convolution_with_full_block_is_identity(coef, shift):
    P = TrigPolynomial(coef, shift)
    block = TrigPolynomial(np.ones(coef.size + shift))
    assert np.array_equal(convolve(P, block).coefficients, P.coefficients.astype(complex))


@FAST
@given(st.floats(0.2, 2.0), st.integers(1, 5000), seeds)
def test_stable_sampler_deterministic(p, n, seed):
    a = stable_sample(p, n, seed)
    b = stable_sample(p, n, seed)
    assert np.array_equal(a, b) and np.all(np.isfinite(a))


@FAST
@given(arrays(float, st.integers(1, 12), elements=st.floats(-10, 10)), st.floats(1.0, 2.0))
def test_khintchine_sandwich(a, q):
    if not np.any(a):
        return
    r = khintchine_check(a, q).estimate
    assert 2 ** -0.5 * (1 - 1e-12) <= r <= 1 + 1e-12


@FAST
@given(arrays(float, st.integers(1, 12), elements=st.floats(-10, 10)))
def test_khintchine_second_moment(a):
    if not np.any(a):
        return
    assert abs(khintchine_check(a, 2.0).estimate - 1.0) <= 1e-12


@FAST
@given(st.floats(0.01, 0.99), seeds)
def test_jensen_step(theta, seed):
    assert jensen_check(theta, samples=2000, seed=seed)["ok"]


@SLOW
@given(seeds)
def test_adding_constraints_is_monotone(seed):
    rng = np.random.default_rng(seed)
    inst = random_positive_instance(rng, d=2, max_dim=3)
    prof = inst.profile
    fam = ConstraintFamily.empty(2)
    for j, op in enumerate(inst.operators):
        fam.add(j, op, prof.p[j], prof.r[j], np.ones(op.source.atom_count))
    prev = feasibility_solve(inst.space_x, prof, fam, 1.0)
    for k in range(4):
        j = k % 2
        op = inst.operators[j]
        fam.add(j, op, prof.p[j], prof.r[j], rng.uniform(0, 1, op.source.atom_count) + 1e-3)
        cur = feasibility_solve(inst.space_x, prof, fam, 1.0)
        # level >= new optimum >= old optimum >= old dual bound
        assert cur.level >= prev.dual_bound * (1 - 1e-12)
        assert cur.dual_bound >= prev.dual_bound * (1 - 1e-8)
        prev = cur
