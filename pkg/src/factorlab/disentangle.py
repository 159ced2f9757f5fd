"""Computing certificate weights by a cutting-plane method.

For an instance with constant A the goal is nonnegative weights phi_j on X
with

    prod_j phi_j(x)^{theta_j} >= 1                      for every atom x,
    sum_x |T_j f(x)|^{p_j} phi_j(x) mu(x) <= cap * A^{p_j} ||f||_{r_j}^{p_j}   for all f.

The second family is infinite.  A finite subfamily, one function
g = |T_j f|^{p_j} / ||f||^{p_j} per recorded input f, is kept and grown by the
separation oracle.

For a finite family the smallest achievable ``cap`` is

    level = min_phi max_{j, g} int g phi_j dmu / A^{p_j},

and weighted AM-GM shows it equals the maximum, over probability weights
lambda on the family, of

    D(lambda) = int prod_j (G_j(x) / theta_j)^{theta_j} dmu,   G_j = sum_{g in family j} lambda_g g / A^{p_j}.

D is concave, so it is maximised with a barrier method.  The optimal weights are
recovered in closed form from the AM-GM equality case, phi_j = P / (G_j / theta_j)
with P = prod_i (G_i / theta_i)^{theta_i}.  They satisfy the geometric-mean
constraint with equality.  Any lambda with D(lambda) > cap proves that no
weights exist at that cap.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

from . import _parallel
from ._barrier import maximise_on_simplex
from ._rng import stream
from .core import (
    AtomicMeasureSpace,
    Certificate,
    ExponentProfile,
    Instance,
    OperatorMatrix,
    evaluate_lhs,
    geometric_mean_floor,
    lp_norm,
    require_saturation,
)
from .errors import AdmissibilityError, StructuralError
from .oracle import estimate_best_constant, sample_inputs
from .separation import SeparationResult, separation_oracle

EPS_FEAS = 1e-8
EPS_SEP = 1e-6
CAP_LIMIT = 2.0 ** 10
FIRST_RUNG = 1.0 + 1e-4


# ---------------------------------------------------------------------------
# constraint families


@dataclass
class ConstraintFamily:
    """Recorded inputs and the functions |T_j f|^{p_j} / ||f||^{p_j} they generate."""

    generators: list = field(default_factory=list)  # per j: list of arrays on Y_j
    members: list = field(default_factory=list)  # per j: list of arrays on X

    @classmethod
    def empty(cls, d):
        return cls([[] for _ in range(d)], [[] for _ in range(d)])

    def add(self, j: int, op: OperatorMatrix, p: float, r: float, f) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        g = constraint_function(op, p, r, f)
        self.generators[j].append(f)
        self.members[j].append(g)
        return g

    def sizes(self):
        return [len(m) for m in self.members]


def constraint_function(op: OperatorMatrix, p: float, r: float, f) -> np.ndarray:
    nrm = lp_norm(f, r, op.source)
    if nrm == 0:
        raise StructuralError("constraint generator must be nonzero")
    return np.abs(op.entries @ (np.asarray(f, float) / nrm)) ** p


# ---------------------------------------------------------------------------
# inner problem


@dataclass(frozen=True, eq=False)
class FeasibilityResult:
    """Outcome of the finite-family problem.

    ``log_weights`` are the level-optimal u_j = log phi_j (d x n).  ``level``
    is the largest normalised constraint value they attain and
    ``dual_bound`` a certified lower bound on the optimal level, so
    ``dual_bound <= optimum <= level``.
    """

    feasible: bool
    log_weights: np.ndarray
    level: float
    dual_bound: float
    constraint_values: list
    multipliers: list
    binding: list
    stopped_early: bool = False

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)


def _dual_oracle(blocks, owner, theta, mu):
    """log D, gradient and Hessian; row k of ``blocks`` belongs to index owner[k]."""
    K = blocks.shape[0]
    S = (owner[None, :] == np.arange(theta.size)[:, None]).astype(float) / theta[:, None]
    groups = [np.flatnonzero(owner == j) for j in range(theta.size)]

    def oracle(lam):
        L = S @ (lam[:, None] * blocks)
        with np.errstate(divide="ignore"):
            logL = np.log(L)
        logP = theta @ logL
        if not np.all(np.isfinite(logP)):
            return -np.inf, np.zeros(K), np.zeros((K, K))
        P = np.exp(logP)
        wP = mu * P
        D = float(wP.sum())
        A = blocks / L[owner]  # dP/dlambda_k = P * g_k / L_{j(k)}
        grad = A @ wP
        H = (A * wP) @ A.T
        for j, idx in enumerate(groups):
            Aj = A[idx]
            H[np.ix_(idx, idx)] -= (Aj * wP) @ Aj.T / theta[j]
        g = grad / D
        return math.log(D), g, H / D - np.outer(g, g)

    return oracle


def feasibility_solve(space: AtomicMeasureSpace, profile: ExponentProfile, family: ConstraintFamily,
                      A: float, cap: float = 1.0, stop_when_infeasible: bool = False) -> FeasibilityResult:
    """Level-optimal weights for a finite family, or evidence that ``cap`` is too small."""
    d = profile.d
    mu = space.weights
    theta = profile.theta
    if len(family.members) != d or any(len(m) == 0 for m in family.members):
        raise StructuralError("every index needs a nonempty constraint family")
    if cap < 1:
        raise ValueError("cap must be >= 1")
    rows, owner = [], []
    for j in range(d):
        scale = A ** profile.p[j]
        for g in family.members[j]:
            g = np.asarray(g, dtype=float)
            if g.shape != (space.atom_count,):
                raise StructuralError("family member has the wrong length")
            if np.any(g < 0):
                raise StructuralError("family members must be nonnegative")
            rows.append(g / scale)
            owner.append(j)
    blocks = np.array(rows)
    owner = np.array(owner)
    cover = np.zeros((d, space.atom_count), dtype=bool)
    np.logical_or.at(cover, owner, blocks > 0)
    if not cover.all():
        j, x = np.argwhere(~cover)[0]
        raise StructuralError(f"family {j} does not charge atom {x}; add a generator covering it")
    oracle = _dual_oracle(blocks, owner, theta, mu)
    stop = math.log(cap * (1 + EPS_FEAS)) if stop_when_infeasible else None
    res = maximise_on_simplex(oracle, np.ones(blocks.shape[0]), stop_above=stop)
    lam = res.z
    S = (owner[None, :] == np.arange(d)[:, None]).astype(float) / theta[:, None]
    L = S @ (lam[:, None] * blocks)
    logL = np.log(L)
    u = (theta @ logL)[None, :] - logL
    phi = np.exp(u)
    values = blocks * phi[owner] @ mu
    level = float(values.max())
    dual = math.exp(res.value)
    per_j = [values[owner == j] for j in range(d)]
    mult = [lam[owner == j] for j in range(d)]
    binding = [(int(owner[k]), int(np.sum(owner[:k] == owner[k]))) for k in np.flatnonzero(values >= level * (1 - 1e-6))]
    return FeasibilityResult(
        feasible=level <= cap * (1 + EPS_FEAS),
        log_weights=u,
        level=level,
        dual_bound=dual,
        constraint_values=per_j,
        multipliers=mult,
        binding=binding,
        stopped_early=res.stopped_early,
    )


# ---------------------------------------------------------------------------
# admissibility


def admissibility_violations(inst: Instance):
    """Indices whose exponents fall outside the guaranteed range, with reasons."""
    out = []
    prof = inst.profile
    for j, op in enumerate(inst.operators):
        p, r = float(prof.p[j]), float(prof.r[j])
        if inst.positive:
            if r < 1:
                out.append((j, f"index {j}: positive operators need r_j >= 1 (got r_j = {r:g})"))
            elif p > r:
                out.append((j, f"index {j}: positive operators need p_j <= r_j (got p_j = {p:g} > r_j = {r:g})"))
        else:
            if math.isinf(r):
                out.append((j, f"index {j}: general operators need r_j < inf"))
            elif r < 2 and not p < r:
                out.append((j, f"index {j}: general operators with r_j < 2 need p_j < r_j strictly "
                               f"(got p_j = {p:g}, r_j = {r:g}); the boundary p_j = r_j is refused"))
            elif r >= 2 and p > 2:
                out.append((j, f"index {j}: general operators with r_j >= 2 need p_j <= 2 (got p_j = {p:g})"))
    return out


def check_admissible(inst: Instance):
    bad = admissibility_violations(inst)
    if bad:
        kind = "positive" if inst.positive else "general linear"
        raise AdmissibilityError(
            f"exponents outside the admissible range for {kind} operators: " + "; ".join(m for _, m in bad)
        )


# ---------------------------------------------------------------------------
# cutting-plane loop


@dataclass(frozen=True, eq=False)
class SolveReport:
    outcome: str  # certified | infeasible-evidence | budget-exhausted
    certificate: Certificate | None
    iterations: int
    constraint_counts: list
    worst_residuals: dict
    constant: float
    cap: float
    required_cap_lower: float
    required_cap_upper: float
    separation_methods: list
    oracle_budget: int
    history: list = field(default_factory=list)
    weights: np.ndarray | None = None

    @property
    def certified(self) -> bool:
        return self.outcome == "certified"


def _seeded_family(inst: Instance, seed: int, random_generators: int) -> ConstraintFamily:
    """Basis vectors of every Y_j plus a few random inputs."""
    prof = inst.profile
    fam = ConstraintFamily.empty(inst.d)
    for j, op in enumerate(inst.operators):
        m = op.source.atom_count
        for y in range(m):
            fam.add(j, op, prof.p[j], prof.r[j], np.eye(m)[y])
        rng = stream(seed, 0xFA, j)
        for _ in range(random_generators):
            f = rng.standard_normal(m)
            fam.add(j, op, prof.p[j], prof.r[j], np.abs(f) if op.positive else f)
    return fam


def cap_schedule(limit=CAP_LIMIT):
    caps = [FIRST_RUNG]
    c = 2.0
    while c <= limit:
        caps.append(c)
        c *= 2.0
    return caps


def default_constant(inst: Instance, budget: int = 20_000, seed: int = 0) -> float:
    if inst.known_constant is not None and inst.profile.q in (None, 1.0):
        return inst.known_constant
    return estimate_best_constant(inst, budget=budget, seed=seed).constant


def disentangle(inst: Instance, A: float | None = None, cap: float | None = None, seed: int = 0,
                max_rounds: int = 300, oracle_budget: int = 4000, random_generators: int = 2,
                explore: bool = False, constant_budget: int = 20_000) -> SolveReport:
    """Search for certificate weights for ``inst`` at constant ``A``.

    With ``cap`` given, certification is attempted at that cap only.  Without
    it the caps 1+1e-4, 2, 4, ..., 2**10 are tried in turn (the loop keeps its
    constraint family across rungs), and the first rung that certifies is
    reported.  Exponents outside the guaranteed range are refused unless
    ``explore`` is set.
    """
    require_saturation(inst)
    if not explore:
        check_admissible(inst)
    if A is None:
        A = default_constant(inst, constant_budget, seed)
    A = float(A)
    prof = inst.profile
    d = inst.d
    rungs = [float(cap)] if cap is not None else cap_schedule()
    if cap is not None and cap < 1:
        raise ValueError("cap must be >= 1")
    fam = _seeded_family(inst, seed, random_generators)
    scales = A ** prof.p
    history = []
    methods = ["" for _ in range(d)]
    last = None
    outcome = "budget-exhausted"
    rung = rungs[0]
    sep_rel = np.full(d, np.inf)
    for it in range(1, max_rounds + 1):
        inner = feasibility_solve(inst.space_x, prof, fam, A, rungs[-1], stop_when_infeasible=True)
        last = inner
        if inner.dual_bound > rungs[-1] * (1 + EPS_FEAS):
            outcome = "infeasible-evidence" if cap is not None else "budget-exhausted"
            history.append({"round": it, "level": inner.level, "dual_bound": inner.dual_bound})
            break
        fitting = [c for c in rungs if inner.level <= c * (1 + EPS_FEAS)]
        rung = fitting[0] if fitting else rungs[-1]
        phi = inner.weights

        def separate(j):
            op = inst.operators[j]
            return separation_oracle(op, phi[j], prof.p[j], prof.r[j], oracle_budget, seed=seed + 7919 * it + j)

        seps: list[SeparationResult] = _parallel.ordered_map(separate, range(d))
        sep_rel = np.array([s.achieved / scales[j] for j, s in enumerate(seps)])
        methods = [s.method for s in seps]
        history.append({"round": it, "level": inner.level, "dual_bound": inner.dual_bound,
                        "separation": sep_rel.tolist(), "rung": rung})
        if np.all(sep_rel <= rung * (1 + EPS_SEP)):
            outcome = "certified"
            break
        order = np.argsort(-sep_rel, kind="stable")
        added = 0
        for j in order:
            if sep_rel[j] > rung * (1 + EPS_SEP) and seps[j].violating_input is not None:
                fam.add(int(j), inst.operators[j], prof.p[j], prof.r[j], seps[j].violating_input)
                added += 1
        if added == 0:
            break
    else:
        it = max_rounds
    phi = last.weights
    worst = {
        "geometric_mean": float(max(0.0, 1.0 - _geo_floor(phi, prof))),
        "level": float(last.level),
        "dual_bound": float(last.dual_bound),
    }
    for j in range(d):
        worst[f"separation[{j}]"] = float(sep_rel[j]) if np.isfinite(sep_rel[j]) else None
    cert = None
    if outcome == "certified":
        slacks = {"geometric_mean": worst["geometric_mean"]}
        for j in range(d):
            slacks[f"constant[{j}]"] = float(A * rung ** (1.0 / prof.p[j]))
            slacks[f"separation[{j}]"] = float(sep_rel[j] / rung)
        cert = Certificate(phi=phi, constant=A, slacks=slacks, cap=rung)
    upper = float(np.max(sep_rel)) if np.all(np.isfinite(sep_rel)) else math.inf
    return SolveReport(
        outcome=outcome,
        certificate=cert,
        iterations=it,
        constraint_counts=fam.sizes(),
        worst_residuals=worst,
        constant=A,
        cap=rung if outcome == "certified" else (rungs[-1] if cap is None else float(cap)),
        required_cap_lower=float(last.dual_bound),
        required_cap_upper=max(upper, float(last.level)),
        separation_methods=methods,
        oracle_budget=oracle_budget,
        history=history,
        weights=phi,
    )


def _geo_floor(phi, prof):
    with np.errstate(divide="ignore"):
        s = prof.theta @ np.log(phi)
    return float(np.exp(s.min()))


@dataclass(frozen=True, eq=False)
class CapBracket:
    """Bounds on the smallest cap at which weights exist for constant A.

    ``lower`` comes from the dual of the finite family and is rigorous.
    ``upper`` is attained by explicit weights, as far as the separation
    oracle can tell.  The best constant is ``A * cap**(1/sum(gamma))``.
    """

    lower: float
    upper: float
    A: float
    exponent_sum: float
    rounds: int
    weights: np.ndarray

    @property
    def best_constant(self) -> tuple:
        e = 1.0 / self.exponent_sum
        return self.A * self.lower ** e, self.A * self.upper ** e


def required_cap(inst: Instance, A: float = 1.0, seed: int = 0, max_rounds: int = 300,
                 oracle_budget: int = 4000, rel_tol: float = 1e-6) -> CapBracket:
    """Run the cutting-plane loop at constant A without a cap and bracket the optimum."""
    require_saturation(inst)
    prof = inst.profile
    fam = _seeded_family(inst, seed, 2)
    scales = A ** prof.p
    for it in range(1, max_rounds + 1):
        inner = feasibility_solve(inst.space_x, prof, fam, A, math.inf)
        phi = inner.weights
        seps = _parallel.ordered_map(
            lambda j: separation_oracle(inst.operators[j], phi[j], prof.p[j], prof.r[j], oracle_budget,
                                        seed=seed + 7919 * it + j),
            range(inst.d))
        rel = np.array([s.achieved / scales[j] for j, s in enumerate(seps)])
        upper = max(float(rel.max()), inner.level)
        if upper <= inner.level * (1 + rel_tol):
            break
        added = 0
        for j in np.argsort(-rel, kind="stable"):
            if rel[j] > inner.level * (1 + rel_tol):
                fam.add(int(j), inst.operators[j], prof.p[j], prof.r[j], seps[j].violating_input)
                added += 1
        if added == 0:
            break
    return CapBracket(inner.dual_bound, upper, float(A), float(prof.gamma.sum()), it, phi)


# ---------------------------------------------------------------------------
# verification


@dataclass(frozen=True, eq=False)
class VerificationReport:
    geometric_floor: float
    geometric_residual: float
    worst_atom: int
    separation: list
    separation_methods: list
    chain_trials: int
    chain_max_ratio: float
    chain_failures: int
    ok: bool


def verify_certificate(inst: Instance, cert: Certificate, budget: int = 4000, seed: int = 1,
                       trials: int = 1000, tol: float = 1e-8) -> VerificationReport:
    """Re-check a certificate independently of how it was produced.

    * the geometric-mean floor (compared with 1 - 1e-8);
    * each weighted bound, by running the separation oracle against phi_j
      (compared with cap * A^{p_j} * (1 + 1e-6));
    * the Hölder chain on random inputs, link by link:
      LHS <= int prod_j (|T_j f_j|^{p_j} phi_j)^{theta_j} / floor
          <= prod_j (int |T_j f_j|^{p_j} phi_j)^{theta_j} / floor
          <= cap * A^{sum gamma} prod_j ||f_j||^{gamma_j} / floor.
    """
    prof = inst.profile
    phi = np.asarray(cert.phi, float)
    if phi.shape != (inst.d, inst.space_x.atom_count):
        raise StructuralError("certificate shape does not match the instance")
    floor = geometric_mean_floor(cert, prof, inst.space_x)
    with np.errstate(divide="ignore"):
        per_atom = prof.theta @ np.log(phi)
    worst_atom = int(np.argmin(per_atom))
    A, cap = cert.constant, cert.cap
    seps = [separation_oracle(op, phi[j], prof.p[j], prof.r[j], budget, seed=seed + j)
            for j, op in enumerate(inst.operators)]
    rel = [s.achieved / (cap * A ** prof.p[j]) for j, s in enumerate(seps)]
    rng = stream(seed, 0xC4A)
    batches = sample_inputs(inst, rng, trials, positive=False)
    mu = inst.space_x.weights
    failures = 0
    max_ratio = 0.0
    safe_floor = max(floor, 1e-300)
    for t in range(trials):
        fs = [b[t] for b in batches]
        lhs = evaluate_lhs(inst, fs)
        tfs = [np.abs(op.entries @ f) for op, f in zip(inst.operators, fs)]
        mixed = np.ones_like(mu)
        weighted = []
        norms = []
        for j in range(inst.d):
            mixed = mixed * (tfs[j] ** prof.p[j] * phi[j]) ** prof.theta[j]
            weighted.append(float(np.sum(tfs[j] ** prof.p[j] * phi[j] * mu)))
            norms.append(lp_norm(fs[j], prof.r[j], inst.operators[j].source))
        link1 = float(np.sum(mixed * mu)) / safe_floor
        link2 = float(np.prod([w ** th for w, th in zip(weighted, prof.theta)])) / safe_floor
        link3 = cap * A ** prof.gamma.sum() * float(np.prod([n ** g for n, g in zip(norms, prof.gamma)])) / safe_floor
        slack = 1 + tol
        ok = lhs <= link1 * slack and link1 <= link2 * slack and link2 <= link3 * slack
        if not ok:
            failures += 1
        if link3 > 0:
            max_ratio = max(max_ratio, lhs / link3 * safe_floor / cap)
    geo_res = max(0.0, 1.0 - floor)
    passed = geo_res <= EPS_FEAS and all(v <= 1 + EPS_SEP for v in rel) and failures == 0
    return VerificationReport(
        geometric_floor=floor,
        geometric_residual=geo_res,
        worst_atom=worst_atom,
        separation=rel,
        separation_methods=[s.method for s in seps],
        chain_trials=trials,
        chain_max_ratio=max_ratio,
        chain_failures=failures,
        ok=passed,
    )


# ---------------------------------------------------------------------------
# L^q variants


def _dual_exponent(q: float) -> float:
    return math.inf if q == 1 else q / (q - 1.0)


def duality_certificate(inst: Instance, G, A: float | None = None, cap: float | None = None,
                        seed: int = 0, **kw) -> tuple[Certificate, SolveReport]:
    """Weights g_j with prod_j g_j^{theta_j} >= G for an L^q bound, q > 1.

    ``A`` is the constant of the L^q inequality
    ``||prod_j |T_j f_j|^{gamma_j}||_q <= A^{sum gamma} prod_j ||f_j||^{gamma_j}``.
    G is normalised to unit q'-norm, the measure is replaced by G dmu with
    the atoms where G vanishes removed, and the resulting instance is
    disentangled.  The returned g_j = phi_j * G satisfy
    ``int |T_j f|^{p_j} g_j dmu <= cap * A^{p_j} * ||G||_{q'} * ||f||^{p_j}``.
    """
    q = inst.profile.q
    if q is None or not q > 1:
        raise StructuralError("duality_certificate needs an instance with q > 1")
    G = np.asarray(G, dtype=float)
    if G.shape != (inst.space_x.atom_count,):
        raise StructuralError("weight G has the wrong length")
    if np.any(G < 0):
        raise StructuralError("weight G must be nonnegative")
    qd = _dual_exponent(q)
    gnorm = lp_norm(G, qd, inst.space_x)
    if gnorm == 0:
        raise StructuralError("weight G vanishes identically")
    if not math.isfinite(gnorm):
        raise StructuralError("weight G must have finite dual norm")
    keep = G > 0
    if A is None:
        if inst.known_constant is None:
            raise StructuralError("duality_certificate needs the L^q constant (known_constant or A)")
        A = inst.known_constant
    Ghat = G / gnorm
    x = AtomicMeasureSpace(inst.space_x.weights[keep] * Ghat[keep])
    ops = tuple(OperatorMatrix(x, op.source, op.entries[keep], op.positive) for op in inst.operators)
    base_profile = ExponentProfile(inst.profile.gamma, inst.profile.p, inst.profile.r)
    reduced = Instance(x, ops, base_profile, A)
    report = disentangle(reduced, A=A, cap=cap, seed=seed, **kw)
    if not report.certified:
        return None, report
    phi = np.zeros((inst.d, inst.space_x.atom_count))
    phi[:, keep] = report.certificate.phi * G[keep][None, :]
    c = report.certificate
    slacks = dict(c.slacks)
    slacks["dual_norm"] = gnorm
    for j in range(inst.d):
        slacks[f"constant[{j}]"] = float(A * (c.cap * gnorm) ** (1.0 / inst.profile.p[j]))
    return Certificate(phi=phi, constant=A, slacks=slacks, cap=c.cap), report


def augmented_instance(inst: Instance, q: float, B: float):
    """The (d+1)-index instance used for q < 1.

    Index d+1 maps a one-atom source to the constant function 1 with
    p = 1 and theta = 1 - q; the other thetas are multiplied by q.  The
    returned constant satisfies A_aug**sum(gamma_aug) == B**q.
    """
    prof = inst.profile
    theta = np.concatenate([prof.theta * q, [1.0 - q]])
    p = np.concatenate([prof.p, [1.0]])
    r = np.concatenate([prof.r, [2.0]])  # every norm agrees on a one-atom space
    one = AtomicMeasureSpace([1.0])
    ops = tuple(inst.operators) + (OperatorMatrix(inst.space_x, one, np.ones((inst.space_x.atom_count, 1)), True),)
    aug_prof = ExponentProfile.from_theta(theta, p, r)
    a_aug = B ** (q / aug_prof.gamma.sum())
    return Instance(inst.space_x, ops, aug_prof, a_aug)


def maurey_exponents(theta, q: float):
    """(theta_{d+1}, tilde-thetas) for the augmentation with exponent q < 1."""
    theta = np.asarray(theta, float)
    return 1.0 / q - 1.0, np.concatenate([theta * q, [1.0 - q]])


def _qprime_norm(g, theta, qd, space):
    log_prod = (theta[:, None] * np.log(g)).sum(axis=0)
    return float(np.sum(np.exp(qd * log_prod) * space.weights) ** (1.0 / qd))


@dataclass(frozen=True, eq=False)
class MaureyResult:
    certificate: Certificate | None
    report: SolveReport
    B: float
    q: float
    dual_norm: float
    consistency_residual: float


def maurey_factorise(inst: Instance, q: float | None = None, A: float | None = None, cap: float | None = None,
                     seed: int = 0, **kw) -> MaureyResult:
    """Weights g_j for an L^q bound with 0 < q < 1.

    ``A`` is the L^q constant (``B = A**sum(gamma)``).  On success
    ``int |T_j f|^{p_j} g_j <= cap^(1/q) B ||f||^{p_j}`` and the q'-quasi-norm of
    prod_j g_j^{theta_j} equals 1, with q' = q/(q-1) < 0.
    """
    q = inst.profile.q if q is None else float(q)
    if q is None or not 0 < q < 1:
        raise StructuralError("maurey_factorise needs 0 < q < 1")
    if A is None:
        if inst.known_constant is None:
            raise StructuralError("maurey_factorise needs the L^q constant (known_constant or A)")
        A = inst.known_constant
    prof = inst.profile
    B = float(A ** prof.gamma.sum())
    aug = augmented_instance(inst, q, B)
    report = disentangle(aug, A=aug.known_constant, cap=cap, seed=seed, **kw)
    qd = q / (q - 1.0)
    if not report.certified:
        return MaureyResult(None, report, B, q, math.nan, math.nan)
    c = report.certificate
    psi = np.asarray(c.phi, float)
    # rescale to the common constant B^q for every index
    scale = B ** q / aug.known_constant ** aug.profile.p
    psi = psi * scale[:, None]
    th = prof.theta
    with np.errstate(divide="ignore"):
        log_prod = (th[:, None] * np.log(psi[:-1])).sum(axis=0)
    predicted_last = np.exp(qd * log_prod)
    resid = float(np.max(np.abs(np.log(psi[-1]) - np.log(predicted_last))))
    g = psi[:-1] * (B ** q * c.cap) ** (-1.0 / qd)
    # the q'-quasi-norm of prod g^theta is now >= 1; dividing every g_j by it
    # divides the product by the same factor because the thetas sum to one
    g = g / _qprime_norm(g, th, qd, inst.space_x)
    prod_norm = _qprime_norm(g, th, qd, inst.space_x)
    slacks = {"consistency": resid, "dual_norm": prod_norm}
    bound = (c.cap) ** (1.0 / q) * B
    for j in range(inst.d):
        slacks[f"constant[{j}]"] = float(bound ** (1.0 / prof.p[j]))
    cert = Certificate(phi=g, constant=float(A), slacks=slacks, cap=c.cap)
    return MaureyResult(cert, report, B, q, prod_norm, resid)
