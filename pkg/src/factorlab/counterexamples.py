"""Explicit constructions: Rudin-Shapiro polynomials, Dirichlet blocks, a
convolution operator with growing L^p -> L^1 norms, and a gallery of small
instances whose disentanglement is known to succeed or fail.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

from .core import AtomicMeasureSpace, ExponentProfile, Instance, OperatorMatrix
from .errors import StructuralError

RS_MAX = 20
RS_CHECK_MAX = 14
QUADRATURE_REL_TOL = 1e-6


# ---------------------------------------------------------------------------
# trigonometric polynomials


@dataclass(frozen=True, eq=False)
class TrigPolynomial:
    """sum_n c_n e^{2 pi i (offset + n) x} for n = 0 .. len(c) - 1."""

    coefficients: np.ndarray
    offset: int = 0

    def __post_init__(self):
        c = np.array(self.coefficients, dtype=complex, copy=True).ravel()
        if c.size == 0:
            raise StructuralError("a trigonometric polynomial needs at least one coefficient")
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)
        object.__setattr__(self, "offset", int(self.offset))

    @property
    def degree_bound(self) -> int:
        """One past the largest frequency."""
        return self.offset + self.coefficients.size

    @property
    def frequencies(self) -> np.ndarray:
        return self.offset + np.arange(self.coefficients.size)

    def modulate(self, shift: int) -> "TrigPolynomial":
        """Multiply by e^{2 pi i shift x}."""
        return TrigPolynomial(self.coefficients, self.offset + shift)

    def coefficient_map(self) -> dict:
        return {int(k): complex(v) for k, v in zip(self.frequencies, self.coefficients)}

    def samples(self, grid: int) -> np.ndarray:
        """Values at x = k / grid, k = 0 .. grid - 1."""
        if grid < self.coefficients.size:
            raise ValueError("grid must be at least the number of coefficients")
        padded = np.zeros(grid, dtype=complex)
        padded[: self.coefficients.size] = self.coefficients
        vals = np.fft.ifft(padded) * grid
        if self.offset:
            k = np.arange(grid)
            vals = vals * np.exp(2j * np.pi * ((self.offset * k) % grid) / grid)
        return vals

    def parseval_norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.coefficients) ** 2)))


def convolve(P: TrigPolynomial, Q: TrigPolynomial) -> TrigPolynomial:
    """Convolution on the torus: coefficientwise product on the common frequencies."""
    lo = max(P.offset, Q.offset)
    hi = min(P.degree_bound, Q.degree_bound)
    if hi <= lo:
        return TrigPolynomial([0.0], max(P.offset, Q.offset))
    a = P.coefficients[lo - P.offset: hi - P.offset]
    b = Q.coefficients[lo - Q.offset: hi - Q.offset]
    return TrigPolynomial(a * b, lo)


def same_polynomial(P: TrigPolynomial, Q: TrigPolynomial) -> bool:
    """Exact equality of coefficient maps, ignoring zero coefficients."""
    a = {k: v for k, v in P.coefficient_map().items() if v != 0}
    b = {k: v for k, v in Q.coefficient_map().items() if v != 0}
    return a == b


def is_zero(P: TrigPolynomial) -> bool:
    return not np.any(P.coefficients != 0)


def rudin_shapiro(m: int):
    """(P_m, Q_m) from P_{k+1} = P_k + z^{2^k} Q_k, Q_{k+1} = P_k - z^{2^k} Q_k, P_0 = Q_0 = 1."""
    if not 0 <= m <= RS_MAX:
        raise ValueError(f"m must lie in [0, {RS_MAX}]")
    P = np.ones(1)
    Q = np.ones(1)
    for _ in range(m):
        P, Q = np.concatenate([P, Q]), np.concatenate([P, -Q])
    return TrigPolynomial(P), TrigPolynomial(Q)


def dirichlet_block(m: int) -> TrigPolynomial:
    """F_m = sum_{n < 2^m} e^{2 pi i n x}."""
    return TrigPolynomial(np.ones(2 ** m))


def default_grid(P: TrigPolynomial) -> int:
    size = 1 << max(0, (P.coefficients.size - 1).bit_length())
    return size * 64


def _check_grid(P: TrigPolynomial, grid: int):
    if grid < 8 * P.coefficients.size:
        raise ValueError(f"grid {grid} is below 8 x the number of coefficients ({P.coefficients.size})")


def _quadrature(P: TrigPolynomial, q: float, grid: int) -> float:
    a = np.abs(P.samples(grid))
    if math.isinf(q):
        return float(a.max())
    return float(np.mean(a ** q) ** (1.0 / q))


def trig_poly_norm(P: TrigPolynomial, q: float, grid: int | None = None) -> float:
    """L^q(T) norm, q in [1, inf].

    q = 2 uses Parseval.  q = inf is the largest value on the grid, which is
    a lower bound.  Other q use the equispaced Riemann sum.
    """
    if not q >= 1:
        raise ValueError("q must be at least 1")
    grid = default_grid(P) if grid is None else int(grid)
    _check_grid(P, grid)
    if q == 2:
        return P.parseval_norm()
    return _quadrature(P, q, grid)


def norm_with_refinement(P: TrigPolynomial, q: float, grid: int | None = None,
                         max_grid: int = 2 ** 22) -> dict:
    """Quadrature norm with grid doubling until two successive grids agree.

    Stops once the relative gap is at most 1e-6 or the next grid would
    exceed ``max_grid``.
    """
    grid = default_grid(P) if grid is None else int(grid)
    _check_grid(P, grid)
    a = _quadrature(P, q, grid)
    while True:
        b = _quadrature(P, q, 2 * grid)
        gap = abs(a - b) / max(abs(b), 1e-300)
        grid *= 2
        if gap <= QUADRATURE_REL_TOL or 2 * grid > max_grid:
            break
        a = b
    return {"value": b, "coarse": a, "grid": grid, "relative_gap": gap,
            "converged": gap <= QUADRATURE_REL_TOL}


# ---------------------------------------------------------------------------
# Rudin-Shapiro properties


def verify_rs_properties(m: int, grid: int | None = None, exponents=(1.0, 1.5, 3.0, 4.0)) -> dict:
    """Check the norm properties of P_m.

    * ||P_m||_2 = 2^{m/2} (Parseval, and the grid sum agrees);
    * ||P_m||_inf <= 2^{(m+1)/2} on the grid;
    * 2^{(m-1)/2} <= ||P_m||_q <= 2^{(m+1)/2} for the listed q and q = inf;
    * every coefficient has modulus 1;
    * |P_{m+1}|^2 + |Q_{m+1}|^2 = 2 (|P_m|^2 + |Q_m|^2) on the grid.
    """
    if not 0 <= m <= RS_CHECK_MAX:
        raise ValueError(f"m must lie in [0, {RS_CHECK_MAX}]")
    P, Q = rudin_shapiro(m)
    P1, Q1 = rudin_shapiro(m + 1)
    grid = default_grid(P1) if grid is None else int(grid)
    _check_grid(P1, grid)
    lo, hi = 2.0 ** ((m - 1) / 2), 2.0 ** ((m + 1) / 2)
    rel = QUADRATURE_REL_TOL
    checks = {}
    two = P.parseval_norm()
    two_grid = _quadrature(P, 2.0, grid)
    checks["l2_parseval"] = {"value": two, "expected": 2.0 ** (m / 2),
                             "ok": abs(two - 2.0 ** (m / 2)) <= 1e-9 * 2.0 ** (m / 2)}
    checks["l2_grid"] = {"value": two_grid, "ok": abs(two_grid - two) <= 1e-12 * two}
    sup = _quadrature(P, math.inf, grid)
    checks["sup_bound"] = {"value": sup, "bound": hi, "ok": sup <= hi * (1 + rel)}
    band = {}
    ok_band = True
    for q in list(exponents) + [math.inf]:
        v = _quadrature(P, q, grid) if q != 2 else two
        good = lo * (1 - rel) <= v <= hi * (1 + rel)
        ok_band &= good
        band["inf" if math.isinf(q) else repr(float(q))] = v
    checks["norm_band"] = {"values": band, "lower": lo, "upper": hi, "ok": ok_band}
    mods = np.abs(P.coefficients)
    checks["unimodular_coefficients"] = {"ok": bool(np.all(mods == 1.0)) and bool(np.all(np.isin(P.coefficients.real, [1.0, -1.0])))}
    lhs = np.abs(P1.samples(grid)) ** 2 + np.abs(Q1.samples(grid)) ** 2
    rhs = 2 * (np.abs(P.samples(grid)) ** 2 + np.abs(Q.samples(grid)) ** 2)
    err = float(np.max(np.abs(lhs - rhs)) / np.max(rhs))
    checks["recursion_conservation"] = {"max_relative_error": err, "ok": err <= 1e-9}
    return {"m": m, "grid": grid, "checks": checks, "ok": all(c["ok"] for c in checks.values())}


def modulated_rs(m: int) -> TrigPolynomial:
    """P_m shifted to the frequencies [2^m, 2^{m+1})."""
    return rudin_shapiro(m)[0].modulate(2 ** m)


def modulated_block(m: int) -> TrigPolynomial:
    return dirichlet_block(m).modulate(2 ** m)


def dirichlet_block_convolution(m: int, other: int | None = None) -> dict:
    """P_m * F_m = P_m, and the shifted blocks of different orders annihilate each other."""
    if not 0 <= m <= RS_CHECK_MAX:
        raise ValueError(f"m must lie in [0, {RS_CHECK_MAX}]")
    other = m + 1 if other is None else int(other)
    P, _ = rudin_shapiro(m)
    F = dirichlet_block(m)
    reproduce = same_polynomial(convolve(P, F), P)
    Pt, Ft = modulated_rs(m), modulated_block(other)
    support = bool(Pt.frequencies.min() == 2 ** m and Pt.frequencies.max() == 2 ** (m + 1) - 1)
    cross = convolve(Pt, Ft)
    orthogonal = is_zero(cross) if other != m else same_polynomial(cross, Pt)
    return {"m": m, "other": other, "reproduces": reproduce, "shifted_support": support,
            "cross_term_expected_zero": other != m, "cross_term_ok": orthogonal,
            "ok": reproduce and support and orthogonal}


# ---------------------------------------------------------------------------
# convolution operator with growing L^p -> L^1 norms


def ftp_kernel_block(m: int, r: float) -> TrigPolynomial:
    """m^{-2} 2^{m/2} 2^{-m/r} times P_m shifted to [2^m, 2^{m+1})."""
    return TrigPolynomial(modulated_rs(m).coefficients * (m ** -2.0 * 2.0 ** (m / 2 - m / r)), 2 ** m)


def ftp_kernel(M: int, r: float) -> TrigPolynomial:
    """Coefficients of sum_{m=1}^M m^{-2} 2^{m/2} 2^{-m/r} P~_m (frequencies 2 .. 2^{M+1}-1)."""
    coef = np.zeros(2 ** (M + 1) - 2, dtype=complex)
    for m in range(1, M + 1):
        b = ftp_kernel_block(m, r)
        coef[b.offset - 2: b.degree_bound - 2] = b.coefficients
    return TrigPolynomial(coef, 2)


def ftp_test_function(m: int, p: float) -> TrigPolynomial:
    """m^{-3} 2^{-m/p'} F~_m, with 1/p' = 1 - 1/p."""
    return TrigPolynomial(np.full(2 ** m, m ** -3.0 * 2.0 ** (-m * (1.0 - 1.0 / p))), 2 ** m)


def _grid_convolution_l1(K: TrigPolynomial, f: TrigPolynomial, grid: int) -> float:
    """||K * f||_1 from sampled K and f, convolving the samples with the FFT."""
    k = K.samples(grid)
    g = f.samples(grid)
    conv = np.fft.ifft(np.fft.fft(k) * np.fft.fft(g)) / grid
    return float(np.mean(np.abs(conv)))


@dataclass(frozen=True, eq=False)
class GrowthTable:
    r: float
    p: float
    rows: list
    band_ok: bool
    bounded_ok: bool
    two_way_ok: bool
    multiplier_block_norms: list

    @property
    def ok(self) -> bool:
        return self.band_ok and self.two_way_ok and self.bounded_ok


def ftp_growth_experiment(r: float, p: float, M: int, m_start: int = 4, grid_factor: int = 64) -> GrowthTable:
    """||T f_m||_1 for the truncated kernel, m = m_start .. M.

    The normalised value ||T f_m||_1 m^5 2^{m(1/r - 1/p)} is expected to stay
    within a factor 4 of its median.  ``multiplier_block_norms`` lists the
    l^s norms of each kernel block's coefficients with 1/s = 1/r - 1/2;
    they equal m^{-2}, so their sum (which bounds the L^r -> L^2 norm via
    Hausdorff-Young) is finite uniformly in M.  When p = r the raw values
    must also stay bounded.
    """
    if not 1 < r <= 2:
        raise ValueError("r must lie in (1, 2]")
    if not 1 <= p <= r:
        raise ValueError("p must lie in [1, r]")
    if not 1 <= m_start <= M <= RS_CHECK_MAX:
        raise ValueError(f"need 1 <= m_start <= M <= {RS_CHECK_MAX}")
    K = ftp_kernel(M, r)
    rows = []
    two_way = True
    for m in range(m_start, M + 1):
        f = ftp_test_function(m, p)
        Tf = convolve(K, f)
        grid = grid_factor * 2 ** (m + 1)
        coef_side = _quadrature(Tf, 1.0, grid)
        # single-block multiplier: only the m-th kernel block meets f_m
        single = ftp_kernel_block(m, r)
        block_coef = _quadrature(convolve(single, f), 1.0, grid)
        block_grid = _grid_convolution_l1(single, f, grid)
        agree = abs(block_coef - block_grid) <= 1e-8 * max(block_coef, 1e-300)
        agree &= abs(block_coef - coef_side) <= 1e-12 * max(coef_side, 1e-300)
        two_way &= bool(agree)
        normalised = coef_side * m ** 5 * 2.0 ** (m * (1.0 / r - 1.0 / p))
        f_norm = _quadrature(f, p, grid)
        rows.append({"m": m, "l1_norm": coef_side, "normalised": normalised, "block_grid_l1": block_grid,
                     "input_lp_norm": f_norm, "ratio": coef_side / f_norm})
    norm_vals = np.array([row["normalised"] for row in rows])
    med = float(np.median(norm_vals))
    band = bool(np.all(norm_vals >= med / 4) and np.all(norm_vals <= med * 4))
    raw = np.array([row["l1_norm"] for row in rows])
    if p == r:
        bounded = bool(np.all(raw <= raw[0] * 4))
    else:
        bounded = True
    s_inv = 1.0 / r - 0.5
    block_norms = []
    for m in range(1, M + 1):
        c = np.abs(ftp_kernel_block(m, r).coefficients)
        block_norms.append(float(c.max()) if s_inv == 0 else float(np.sum(c ** (1 / s_inv)) ** s_inv))
    return GrowthTable(float(r), float(p), rows, band, bounded, two_way, block_norms)


# ---------------------------------------------------------------------------
# instance gallery


@dataclass(frozen=True, eq=False)
class GalleryInstance:
    kind: str
    instance: Instance
    verdict: str  # feasible | infeasible
    witnesses: str
    parameters: dict
    predicted: dict = field(default_factory=dict)


def _product_space(axis_weights, d):
    w = np.asarray(axis_weights, float)
    grid = np.ones(1)
    for _ in range(d):
        grid = np.multiply.outer(grid, w).ravel()
    return AtomicMeasureSpace(grid)


def _coordinate_operators(x: AtomicMeasureSpace, axis: AtomicMeasureSpace, d: int):
    """T_j f(x) = f(x_j) on the product X = axis^d (x_1 varies slowest)."""
    n = axis.atom_count
    idx = np.indices((n,) * d).reshape(d, -1)
    ops = []
    for j in range(d):
        E = np.zeros((n ** d, n))
        E[np.arange(n ** d), idx[j]] = 1.0
        ops.append(OperatorMatrix(x, axis, E, True))
    return ops


def _product_instance(d: int, n: int, beyond: bool) -> GalleryInstance:
    if d < 2 or n < 2:
        raise ValueError("need d >= 2 and n >= 2")
    if n ** d > 2 ** 17:
        raise ValueError("product space too large (n^d must stay below 2^17)")
    axis = AtomicMeasureSpace.uniform(n)
    x = _product_space(axis.weights, d)
    ops = _coordinate_operators(x, axis, d)
    if beyond:
        prof = ExponentProfile(gamma=np.ones(d), p=np.full(d, float(d)), r=np.ones(d))
        return GalleryInstance(
            "beyond-range", Instance(x, ops, prof, 1.0), "infeasible",
            "p_j > r_j for positive operators; the needed cap grows like n^(d-1)",
            {"d": d, "n": n}, {"required_cap": float(n) ** (d - 1), "constant": 1.0},
        )
    prof = ExponentProfile(gamma=np.full(d, 1.0 / d), p=np.ones(d), r=np.ones(d))
    return GalleryInstance(
        "in-range", Instance(x, ops, prof, 1.0), "feasible",
        "p_j = r_j = 1 for positive operators; phi = 1 works",
        {"d": d, "n": n}, {"required_cap": 1.0, "constant": 1.0},
    )


def _homogeneity_instance(n: int, lam: float, gamma=(1.0, 1.0), h: float = 1.0 / 16) -> GalleryInstance:
    if n < 2 or n > 2 ** 12:
        raise ValueError("n must lie in [2, 2^12]")
    gamma = np.asarray(gamma, float)
    if gamma.size != 2:
        raise ValueError("the homogeneity gallery uses d = 2")
    # logarithmic grid s = e^t with cell masses nu = s h; Phi^gamma nu = h / (1 + t^2)
    t = (np.arange(n) + 0.5 - n / 2) * h
    nu = np.exp(t) * h
    axis = AtomicMeasureSpace(nu)
    x = _product_space(nu, 2)
    one = AtomicMeasureSpace([1.0])
    idx = np.indices((n, n)).reshape(2, -1)
    ops = []
    for j in range(2):
        phi = (np.exp(-t) / (1.0 + t * t)) ** (1.0 / gamma[j])
        ops.append(OperatorMatrix(x, one, phi[idx[j]][:, None], True))
    g_new = gamma / lam
    p_new = g_new * 2  # theta = (1/2, 1/2)
    prof = ExponentProfile(gamma=g_new, p=p_new, r=np.ones(2))
    inst = Instance(x, ops, prof)
    # exact best constant: the sources are one-dimensional, so f = 1 is optimal
    per_axis = [float(np.sum((np.exp(-t) / (1 + t * t)) ** (g_new[j] / gamma[j]) * nu)) for j in range(2)]
    ratio = per_axis[0] * per_axis[1]
    del axis
    return GalleryInstance(
        "homogeneity", inst, "infeasible",
        "exponents rescaled by lambda != 1; no constant works uniformly in n",
        {"n": n, "lambda": lam, "gamma": gamma.tolist(), "h": h},
        {"ratio": ratio, "constant": float(ratio ** (1.0 / g_new.sum()))},
    )


def _non_convex_instance(n: int) -> GalleryInstance:
    if n < 2:
        raise ValueError("n must be at least 2")
    x = AtomicMeasureSpace.uniform(n)
    one = AtomicMeasureSpace([1.0])
    ops = [OperatorMatrix(x, x, np.eye(n), True), OperatorMatrix(x, one, np.ones((n, 1)), True)]
    prof = ExponentProfile.from_theta([0.5, 0.5], [2.0, 1.0], [1.0, 1.0])
    return GalleryInstance(
        "non-p-convex", Instance(x, ops, prof, 1.0), "infeasible",
        "an l^1 source asked for p_j = 2; l^1 is not 2-convex and the needed cap is sqrt(n)",
        {"n": n}, {"required_cap": math.sqrt(n), "constant": 1.0},
    )


GALLERY_KINDS = ("beyond-range", "in-range", "homogeneity", "non-p-convex")


def gallery(kind: str, **params) -> GalleryInstance:
    """Build a gallery instance.

    * ``beyond-range`` (d=5, n=6): coordinate maps on a product of uniform
      grids with p_j = d > r_j = 1.  Infeasible; the needed cap is n^(d-1).
    * ``in-range`` (d=5, n=6): the same maps with p_j = r_j = 1.  Feasible.
    * ``homogeneity`` (n=64, lam=2): rank-one maps with profile
      (e^{-t}/(1+t^2))^{1/gamma_j} on a logarithmic grid, exponents divided
      by lam.  The best constant grows without bound in n.
    * ``non-p-convex`` (n=16): an l^1 source with p_1 = 2.  Needed cap sqrt(n).
    """
    if kind == "beyond-range":
        return _product_instance(int(params.get("d", 5)), int(params.get("n", 6)), True)
    if kind == "in-range":
        return _product_instance(int(params.get("d", 5)), int(params.get("n", 6)), False)
    if kind == "homogeneity":
        return _homogeneity_instance(int(params.get("n", 64)), float(params.get("lam", 2.0)),
                                     params.get("gamma", (1.0, 1.0)), float(params.get("h", 1.0 / 16)))
    if kind == "non-p-convex":
        return _non_convex_instance(int(params.get("n", 16)))
    raise ValueError(f"unknown gallery kind {kind!r}; choose from {', '.join(GALLERY_KINDS)}")


REFINEMENTS = {
    "beyond-range": [{"d": 5, "n": 6}, {"d": 5, "n": 7}, {"d": 5, "n": 8}],
    "in-range": [{"d": 5, "n": 6}, {"d": 5, "n": 7}, {"d": 5, "n": 8}],
    "homogeneity": [{"n": 2 ** 6}, {"n": 2 ** 8}, {"n": 2 ** 10}],
    "non-p-convex": [{"n": 4}, {"n": 16}, {"n": 64}],
}


def shipped_gallery():
    """Every kind at its three refinement levels."""
    return [gallery(kind, **params) for kind in GALLERY_KINDS for params in REFINEMENTS[kind]]
