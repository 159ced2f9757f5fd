"""Monte Carlo and exact checks around vector-valued inequalities.

Covers the upgrade from a scalar multilinear bound to its l^p-sum version for
positive operators, Khintchine averages, symmetric p-stable variables, and
empirical Rademacher-type ratios of finite-dimensional l^r spaces.
"""
from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np
from scipy.special import gammaln

from ._rng import stream
from .core import Instance
from .errors import StructuralError

ENUMERATION_LIMIT = 20
VECTOR_ENUMERATION_LIMIT = 16
CHUNK = 1 << 16


# ---------------------------------------------------------------------------
# vector-valued multilinear form


def _check_vector_input(inst: Instance, vin):
    if len(vin) != inst.d:
        raise StructuralError(f"expected {inst.d} blocks of inputs, got {len(vin)}")
    out = []
    counts = set()
    for j, (F, op) in enumerate(zip(vin, inst.operators)):
        F = np.asarray(F, dtype=float)
        if F.ndim == 1:
            F = F[None, :]
        if F.ndim != 2 or F.shape[1] != op.source.atom_count:
            raise StructuralError(f"block {j} must have shape (N, {op.source.atom_count}), got {F.shape}")
        counts.add(F.shape[0])
        out.append(F)
    if len(counts) != 1:
        # shorter blocks are padded with zero functions
        n = max(counts)
        out = [np.vstack([F, np.zeros((n - F.shape[0], F.shape[1]))]) for F in out]
    return out


def vector_lhs(inst: Instance, vin) -> float:
    """int_X prod_j (sum_k |T_j f_jk|^{p_j})^{theta_j} dmu; ``vin[j]`` has shape (N, m_j)."""
    vin = _check_vector_input(inst, vin)
    prof = inst.profile
    total = np.ones(inst.space_x.atom_count)
    for F, op, p, th in zip(vin, inst.operators, prof.p, prof.theta):
        s = np.sum(np.abs(F @ op.entries.T) ** p, axis=0)
        total = total * s ** th
    return float(np.sum(total * inst.space_x.weights))


def vector_rhs(inst: Instance, vin, B: float) -> float:
    """B * prod_j (sum_k ||f_jk||_{r_j}^{p_j})^{theta_j}."""
    vin = _check_vector_input(inst, vin)
    prof = inst.profile
    out = float(B)
    for F, op, p, r, th in zip(vin, inst.operators, prof.p, prof.r, prof.theta):
        out *= float(np.sum(_row_norms(F, r, op.source.weights) ** p)) ** th
    return out


def _row_norms(F, r, nu):
    a = np.abs(F)
    if math.isinf(r):
        return a.max(axis=-1)
    return np.sum(a ** r * nu, axis=-1) ** (1.0 / r)


@dataclass(frozen=True, eq=False)
class VectorCheckReport:
    trials: int
    N: int
    violations: int
    max_ratio: float
    majorant_failures: int
    convexity_failures: int
    witness: list | None

    @property
    def ok(self) -> bool:
        return self.violations == 0 and self.majorant_failures == 0 and self.convexity_failures == 0


def _draw_blocks(rng, shape):
    """Signed test inputs: Gaussian, Cauchy and sparse draws in equal thirds."""
    C = shape[0]
    out = rng.standard_normal(shape)
    k = C // 3
    out[k:2 * k] = rng.standard_cauchy((k,) + shape[1:])
    sparse = rng.random((C - 2 * k,) + shape[1:]) < 0.3
    out[2 * k:] *= sparse
    return out


def scalar_to_vector_check(inst: Instance, B: float, N: int, trials: int = 10_000, seed: int = 0,
                           rel_tol: float = 1e-9, chunk: int = 1024) -> VectorCheckReport:
    """Sample vector inputs and test the l^p-sum bound with constant ``B``.

    ``B`` is the scalar constant in the form
    ``int prod_j |T_j f_j|^{p_j theta_j} <= B prod_j ||f_j||^{p_j theta_j}``.
    Besides the bound itself, the two intermediate steps of the upgrade are
    checked on every sample: the pointwise majorant
    ``sum_k |T_j f_jk|^{p_j} <= (T_j F_j)^{p_j}`` with
    ``F_j = (sum_k |f_jk|^{p_j})^{1/p_j}``, and the convexity estimate
    ``||F_j||_{r_j}^{p_j} <= sum_k ||f_jk||_{r_j}^{p_j}``.
    """
    prof = inst.profile
    if not inst.positive:
        raise StructuralError("scalar_to_vector_check needs positive operators")
    for j in range(inst.d):
        if prof.p[j] < 1:
            raise StructuralError(f"index {j}: the pointwise majorant needs p_j >= 1 (got {prof.p[j]:g})")
        if prof.p[j] > prof.r[j]:
            raise StructuralError(f"index {j}: needs p_j <= r_j")
    if N < 1:
        raise ValueError("N must be positive")
    mu = inst.space_x.weights
    slack = 1.0 + rel_tol
    violations = maj_fail = conv_fail = 0
    max_ratio = 0.0
    witness = None
    done = 0
    c_index = 0
    while done < trials:
        C = min(chunk, trials - done)
        rng = stream(seed, 0x3C, c_index)
        blocks = [_draw_blocks(rng, (C, N, op.source.atom_count)) for op in inst.operators]
        lhs_pt = np.ones((C, mu.size))
        maj_pt = np.ones((C, mu.size))
        rhs = np.full(C, float(B))
        for F, op, p, r, th in zip(blocks, inst.operators, prof.p, prof.r, prof.theta):
            nu = op.source.weights
            TF = np.abs(F @ op.entries.T)  # (C, N, n)
            s = np.sum(TF ** p, axis=1)
            big_F = np.sum(np.abs(F) ** p, axis=1) ** (1.0 / p)  # (C, m)
            maj = (big_F @ op.entries.T) ** p
            maj_fail += int(np.sum(np.any(s > maj * slack + 1e-300, axis=1)))
            norms_k = _row_norms(F, r, nu)  # (C, N)
            sum_norms = np.sum(norms_k ** p, axis=1)
            big_norm = _row_norms(big_F, r, nu) ** p
            conv_fail += int(np.sum(big_norm > sum_norms * slack))
            lhs_pt *= s ** th
            maj_pt *= maj ** th
            rhs *= sum_norms ** th
        lhs = lhs_pt @ mu
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(rhs > 0, lhs / rhs * B, 0.0)
        bad = lhs > rhs * slack
        violations += int(bad.sum())
        k = int(np.argmax(ratio))
        if ratio[k] > max_ratio:
            max_ratio = float(ratio[k])
            if bad[k]:
                witness = [b[k].tolist() for b in blocks]
        done += C
        c_index += 1
    return VectorCheckReport(trials, N, violations, max_ratio, maj_fail, conv_fail, witness)


# ---------------------------------------------------------------------------
# Rademacher averages


def sign_sums(a) -> np.ndarray:
    """All 2^N values of sum_k eps_k a_k, in a fixed order."""
    sums = np.zeros(1)
    for x in np.asarray(a, dtype=float):
        sums = np.concatenate([sums + x, sums - x])
    return sums


def rademacher_sample(N: int, n: int, seed: int = 0) -> np.ndarray:
    """n independent rows of N uniform signs."""
    rng = stream(seed, 0x7A)
    return np.where(rng.random((n, N)) < 0.5, -1.0, 1.0)


@dataclass(frozen=True, eq=False)
class RatioEstimate:
    estimate: float
    stderr: float
    samples: int
    seed: int
    exact: bool
    reference: float | None = None

    def as_row(self) -> dict:
        return {"estimate": self.estimate, "stderr": self.stderr, "samples": self.samples, "seed": self.seed}


def _moment_ratio(values, q, scale):
    """(mean |v|^q)^{1/q} / scale with a delta-method standard error."""
    x = np.abs(values) ** q
    m = float(np.mean(x))
    n = x.size
    se_m = float(np.std(x, ddof=1)) / math.sqrt(n) if n > 1 else 0.0
    est = m ** (1.0 / q) / scale
    se = (m ** (1.0 / q - 1.0) / q) * se_m / scale if m > 0 else 0.0
    return est, se


def khintchine_check(a, q: float, samples: int = 100_000, seed: int = 0) -> RatioEstimate:
    """(E|sum_k eps_k a_k|^q)^{1/q} / ||a||_2.

    Exact by enumeration of all sign patterns when len(a) <= 20, otherwise a
    Monte Carlo mean over ``samples`` draws.
    """
    a = np.asarray(a, dtype=float)
    if not q > 0:
        raise ValueError("q must be positive")
    top = float(np.max(np.abs(a))) if a.size else 0.0
    if top == 0:
        raise ValueError("coefficients must not all vanish")
    a = a / top  # the ratio is scale invariant; this avoids underflow
    norm2 = float(np.sqrt(np.sum(a * a)))
    if a.size <= ENUMERATION_LIMIT:
        s = np.abs(sign_sums(a))
        if q == 2.0:
            # E|S|^2 = ||a||^2 exactly; avoid rounding in the cancellation
            m = float(np.mean(s * s))
        else:
            m = float(np.mean(s ** q))
        return RatioEstimate(m ** (1.0 / q) / norm2, 0.0, int(s.size), seed, True)
    total = []
    done = 0
    c = 0
    while done < samples:
        C = min(CHUNK, samples - done)
        rng = stream(seed, 0x7B, c)
        eps = np.where(rng.random((C, a.size)) < 0.5, -1.0, 1.0)
        total.append(eps @ a)
        done += C
        c += 1
    est, se = _moment_ratio(np.concatenate(total), q, norm2)
    return RatioEstimate(est, se, samples, seed, False)


# ---------------------------------------------------------------------------
# symmetric p-stable variables


def stable_sample(p: float, n: int, seed: int = 0) -> np.ndarray:
    """n draws with characteristic function exp(-|t|^p), 0 < p <= 2.

    Chambers-Mallows-Stuck transform of a uniform angle and an exponential
    variable; p = 1 uses the tangent form and p = 2 a Gaussian of variance 2.
    Draws are produced in fixed-size chunks, each from its own stream.
    """
    p = float(p)
    if not 0 < p <= 2:
        raise ValueError(f"stability index must lie in (0, 2], got {p}")
    out = np.empty(n)
    for c, start in enumerate(range(0, n, CHUNK)):
        C = min(CHUNK, n - start)
        rng = stream(seed, 0x57AB, c)
        if p == 2.0:
            out[start:start + C] = math.sqrt(2.0) * rng.standard_normal(C)
            continue
        V = (rng.random(C) - 0.5) * math.pi
        if p == 1.0:
            out[start:start + C] = np.tan(V)
            continue
        W = rng.standard_exponential(C)
        out[start:start + C] = (np.sin(p * V) / np.cos(V) ** (1.0 / p)
                                * (np.cos((1.0 - p) * V) / W) ** ((1.0 - p) / p))
    return out


def stable_moment(p: float, q: float) -> float:
    """E|X|^q for X with characteristic function exp(-|t|^p), 0 < q < p."""
    if not 0 < q < p <= 2:
        if not (p == 2 and 0 < q):
            raise ValueError("need 0 < q < p <= 2")
    log_m = (q * math.log(2.0) + gammaln((1.0 + q) / 2.0) + gammaln(1.0 - q / p)
             - 0.5 * math.log(math.pi) - gammaln(1.0 - q / 2.0))
    return math.exp(log_m)


def stable_equivalence_check(p: float, q: float, a, samples: int = 100_000, seed: int = 0) -> RatioEstimate:
    """(E|sum_k X_k a_k|^q)^{1/q} / ||a||_p for independent p-stable X_k.

    Stability makes the ratio equal to (E|X|^q)^{1/q} whatever ``a`` is;
    that value is returned as ``reference``.
    """
    if not 0 < q < p <= 2:
        raise ValueError("need 0 < q < p <= 2")
    a = np.asarray(a, dtype=float)
    top = float(np.max(np.abs(a))) if a.size else 0.0
    if top == 0:
        raise ValueError("coefficients must not all vanish")
    a = a / top
    norm = float(np.sum(np.abs(a) ** p) ** (1.0 / p))
    X = stable_sample(p, samples * a.size, seed).reshape(samples, a.size)
    est, se = _moment_ratio(X @ a, q, norm)
    return RatioEstimate(est, se, samples, seed, False, reference=stable_moment(p, q) ** (1.0 / q))


def characteristic_check(p: float, t, samples: int = 100_000, seed: int = 0):
    """Empirical mean of cos(t X) against exp(-|t|^p), with standard errors."""
    X = stable_sample(p, samples, seed)
    rows = []
    for tt in np.atleast_1d(np.asarray(t, dtype=float)):
        c = np.cos(tt * X)
        rows.append({"t": float(tt), "estimate": float(c.mean()),
                     "stderr": float(c.std(ddof=1) / math.sqrt(samples)),
                     "expected": math.exp(-abs(tt) ** p)})
    return rows


# ---------------------------------------------------------------------------
# Rademacher type of finite-dimensional l^r


def rademacher_type_ratio(F, r: float, p: float, weights=None) -> float:
    """(E ||sum_k eps_k F_k||_r^p)^{1/p} / (sum_k ||F_k||_r^p)^{1/p}, exact by enumeration."""
    F = np.asarray(F, dtype=float)
    if F.ndim != 2:
        raise StructuralError("F must be an N x dim array")
    N, dim = F.shape
    if N > VECTOR_ENUMERATION_LIMIT:
        raise ValueError(f"exact enumeration is limited to N <= {VECTOR_ENUMERATION_LIMIT}")
    nu = np.ones(dim) if weights is None else np.asarray(weights, float)
    sums = np.zeros((1, dim))
    for k in range(N):
        sums = np.vstack([sums + F[k], sums - F[k]])
    num = float(np.mean(_row_norms(sums, r, nu) ** p))
    den = float(np.sum(_row_norms(F, r, nu) ** p))
    if den == 0:
        return 0.0
    return (num / den) ** (1.0 / p)


@dataclass(frozen=True, eq=False)
class TypeEstimate:
    constant: float
    witness: np.ndarray
    samples: int
    seed: int


def type_constant_estimate(space_dim: int, r: float, p: float, N: int, samples: int = 200,
                           seed: int = 0) -> TypeEstimate:
    """Largest Rademacher-type ratio over sampled N-tuples in l^r of dimension ``space_dim``.

    The basis tuple (and, for N > space_dim, repeated basis vectors) is tried
    first; the remaining tuples are Gaussian.
    """
    if space_dim < 1 or N < 1:
        raise ValueError("space_dim and N must be positive")
    eye = np.eye(space_dim)
    basis = eye[np.arange(N) % space_dim]
    best = rademacher_type_ratio(basis, r, p)
    witness = basis
    rng = stream(seed, 0x7C)
    for _ in range(samples):
        F = rng.standard_normal((N, space_dim))
        v = rademacher_type_ratio(F, r, p)
        if v > best:
            best, witness = v, F
    return TypeEstimate(best, witness, samples, seed)


# ---------------------------------------------------------------------------
# Jensen step


def jensen_check(theta: float, samples: int = 10_000, seed: int = 0) -> dict:
    """Compare mean(X^theta) with mean(X)^theta on sampled X >= 0, 0 < theta < 1."""
    if not 0 < theta < 1:
        raise ValueError("theta must lie in (0, 1)")
    rng = stream(seed, 0x7D)
    X = rng.lognormal(0.0, 1.5, samples)
    lhs = float(np.mean(X ** theta))
    rhs = float(np.mean(X) ** theta)
    return {"theta": theta, "mean_of_power": lhs, "power_of_mean": rhs, "ok": lhs <= rhs * (1 + 1e-12)}
