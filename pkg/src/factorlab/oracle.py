"""Lower bounds for the best constant of the scalar multilinear inequality.

The ratio studied everywhere is

    R(f_1, ..., f_d) = int_X prod_j |T_j f_j|^{gamma_j} dmu / prod_j ||f_j||_{r_j}^{gamma_j},

and the best constant A satisfies ``A**sum(gamma) = sup R``.  Two independent
routes are provided: exhaustive grid enumeration (with a local polish) and
multi-start projected gradient ascent.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import itertools
import math

import numpy as np
from scipy.optimize import minimize

from ._parallel import ordered_map
from ._rng import stream
from .core import Instance, inequality_ratio, lp_norm
from .errors import BudgetError

GRID_BUDGET = 10**8
_TINY = 1e-300
# Positive searches stay this far inside the orthant: with gamma_j < 1 the
# derivative of |T_j f_j|^gamma_j is infinite where T_j f_j vanishes, so the
# gradient evaluated exactly on the boundary points the wrong way.
_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class ConstantEstimate:
    """A lower bound on ``A**sum(gamma)`` together with the inputs that attain it."""

    lower_bound: float
    witness: tuple
    method: str
    evaluations: int
    exponent_sum: float = 1.0
    details: dict = field(default_factory=dict)

    @property
    def constant(self) -> float:
        """Lower bound on A itself."""
        return float(self.lower_bound ** (1.0 / self.exponent_sum))


def _normalise(inst: Instance, fs):
    out = []
    for f, op, r in zip(fs, inst.operators, inst.profile.r):
        n = lp_norm(f, r, op.source)
        out.append(np.asarray(f, dtype=float) / n if n > 0 else np.asarray(f, dtype=float))
    return tuple(out)


def _estimate(inst, fs, method, evaluations, q=1.0, **details):
    fs = _normalise(inst, fs)
    return ConstantEstimate(
        lower_bound=float(inequality_ratio(inst, fs, q)),
        witness=fs,
        method=method,
        evaluations=int(evaluations),
        exponent_sum=float(inst.profile.gamma.sum()),
        details=details,
    )


def batch_log_lhs(inst: Instance, batches, q: float = 1.0) -> np.ndarray:
    """log of the left side for a batch: ``batches[j]`` has shape (B, m_j)."""
    log_p = 0.0
    for F, op, g in zip(batches, inst.operators, inst.profile.gamma):
        with np.errstate(divide="ignore"):
            log_p = log_p + g * np.log(np.abs(F @ op.entries.T))
    mu = inst.space_x.weights
    if q == 1.0:
        m = np.max(log_p, axis=1, keepdims=True)
        m = np.where(np.isfinite(m), m, 0.0)
        with np.errstate(divide="ignore"):
            return (m[:, 0] + np.log(np.sum(np.exp(log_p - m) * mu, axis=1)))
    m = np.max(log_p, axis=1, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        return m[:, 0] + np.log(np.sum(np.exp(q * (log_p - m)) * mu, axis=1)) / q


def batch_log_norms(inst: Instance, batches) -> np.ndarray:
    total = 0.0
    for F, op, g, r in zip(batches, inst.operators, inst.profile.gamma, inst.profile.r):
        a = np.abs(F)
        if math.isinf(r):
            n = a.max(axis=1)
        else:
            n = np.sum(a ** r * op.source.weights, axis=1) ** (1.0 / r)
        with np.errstate(divide="ignore"):
            total = total + g * np.log(n)
    return total


def batch_log_ratio(inst: Instance, batches, q: float = 1.0) -> np.ndarray:
    lhs = batch_log_lhs(inst, batches, q)
    nrm = batch_log_norms(inst, batches)
    with np.errstate(invalid="ignore"):
        out = lhs - nrm
    return np.where(np.isnan(out), -np.inf, out)


# ---------------------------------------------------------------------------
# brute force


def _grid_count(inst: Instance, grid_levels: int, signed: bool) -> int:
    per = (2 * grid_levels + 1) if signed else (grid_levels + 1)
    return int(np.prod([float(per) ** m for m in inst.source_dims()]))


def _grid_points(m: int, grid_levels: int, signed: bool) -> np.ndarray:
    lo = -grid_levels if signed else 0
    vals = np.arange(lo, grid_levels + 1, dtype=float) / grid_levels
    pts = np.array(list(itertools.product(vals, repeat=m)), dtype=float)
    return pts[np.any(pts != 0, axis=1)]


def _best_of_product(inst: Instance, grids, q, keep):
    """Top ``keep`` index tuples of the log ratio over the product of grids."""
    d = inst.d
    if d == 1:
        vals = batch_log_ratio(inst, [grids[0]], q)
        order = np.argsort(-vals, kind="stable")[:keep]
        return [((int(i),), float(vals[i])) for i in order]
    # Enumerate all but the last factor in chunks and vectorise over the last one.
    head = [range(len(g)) for g in grids[:-1]]
    last = grids[-1]
    best = []
    chunk = max(1, 2_000_000 // max(1, len(last) * inst.space_x.atom_count))
    combos = itertools.product(*head)
    while True:
        block = list(itertools.islice(combos, chunk))
        if not block:
            break
        idx = np.array(block)
        batches = [np.repeat(grids[j][idx[:, j]], len(last), axis=0) for j in range(d - 1)]
        batches.append(np.tile(last, (len(block), 1)))
        vals = batch_log_ratio(inst, batches, q)
        top = np.argsort(-vals, kind="stable")[:keep]
        for t in top:
            b, k = divmod(int(t), len(last))
            best.append((tuple(int(i) for i in idx[b]) + (k,), float(vals[t])))
        best.sort(key=lambda e: -e[1])
        best = best[:keep]
    return best


def _polish(inst: Instance, fs, q: float, positive: bool):
    """Local refinement of a grid point with L-BFGS-B on the negative log ratio."""
    dims = inst.source_dims()
    splits = np.cumsum(dims)[:-1]
    finite_r = [not math.isinf(r) for r in inst.profile.r]
    bounds = []
    for m, fin in zip(dims, finite_r):
        lo = _FLOOR if positive else (None if fin else -1.0)
        hi = None if fin else 1.0
        bounds.extend([(lo, hi)] * m)

    def objective(z):
        parts = np.split(z, splits)
        val, grads = _log_ratio_and_grad(inst, parts, q, include_inf_norm=False, nonneg=positive)
        if not np.isfinite(val):
            return 1e300, np.zeros_like(z)
        return -val, -np.concatenate(grads)

    z0 = np.concatenate(fs)
    if positive:
        z0 = np.maximum(z0, _FLOOR)
    res = minimize(objective, z0, jac=True, method="L-BFGS-B", bounds=bounds,
                   options={"maxiter": 3000, "ftol": 1e-15, "gtol": 1e-13, "maxcor": 30})
    return np.split(res.x, splits), int(res.nfev)


def brute_force_constant(inst: Instance, grid_levels: int = 8, signed: bool | None = None,
                         polish: bool = True, q: float = 1.0, keep: int = 4) -> ConstantEstimate:
    """Exhaustive search of the ratio over a coordinate grid, then local polish.

    Every coordinate ranges over ``{0, 1/L, ..., 1}`` (and the negatives when
    ``signed``).  Sign patterns are skipped for positive instances because
    ``|T f| <= T|f|`` entrywise.  The best few grid points are then refined by
    a bounded quasi-Newton run; the result is always the ratio at an explicit
    witness, hence a lower bound.
    """
    if grid_levels < 1:
        raise ValueError("grid_levels must be positive")
    if signed is None:
        signed = not inst.positive
    count = _grid_count(inst, grid_levels, signed)
    if count > GRID_BUDGET:
        raise BudgetError(
            f"grid search needs {count:.3g} evaluations, above the budget {GRID_BUDGET:.0e}; lower grid_levels",
            required=count, limit=GRID_BUDGET,
        )
    grids = [_grid_points(m, grid_levels, signed) for m in inst.source_dims()]
    top = _best_of_product(inst, grids, q, keep)
    evaluations = count
    cands = [tuple(grids[j][i[j]] for j in range(inst.d)) for i, _ in top]
    best = max(cands, key=lambda fs: (inequality_ratio(inst, fs, q)))
    best_val = inequality_ratio(inst, best, q)
    polished = False
    if polish and not all(m == 1 for m in inst.source_dims()):
        for fs in cands:
            cand, nfev = _polish(inst, list(fs), q, positive=not signed)
            evaluations += nfev
            val = inequality_ratio(inst, cand, q)
            if np.isfinite(val) and val > best_val:
                best, best_val, polished = tuple(cand), val, True
    method = "exhaustive" if all(m == 1 for m in inst.source_dims()) else "grid"
    return _estimate(inst, best, method, evaluations, q, grid_levels=grid_levels, signed=signed, polished=polished)


# ---------------------------------------------------------------------------
# gradient ascent


def _log_ratio_and_grad(inst: Instance, fs, q: float = 1.0, include_inf_norm: bool = True,
                        nonneg: bool = False):
    """log R and its gradient with respect to each f_j.

    Blocks with r_j = inf contribute no norm gradient when
    ``include_inf_norm`` is false (callers then keep them in the unit box).
    With ``nonneg`` the norm gradient at a zero coordinate is the one-sided
    derivative from above, which matters when r_j = 1.
    """
    mu = inst.space_x.weights
    gam = inst.profile.gamma
    tf = [op.entries @ f for op, f in zip(inst.operators, fs)]
    a = [np.maximum(np.abs(t), _TINY) for t in tf]
    log_p = sum(g * np.log(x) for g, x in zip(gam, a))
    m = log_p.max()
    w = np.exp(q * (log_p - m)) * mu
    s = w.sum()
    if s <= 0 or not np.isfinite(m):
        return -np.inf, [np.zeros_like(f) for f in fs]
    log_lhs = m + math.log(s) / q
    shares = w / s
    val = log_lhs
    grads = []
    for j, (f, op, g, r) in enumerate(zip(fs, inst.operators, gam, inst.profile.r)):
        grad = g * (op.entries.T @ (shares * np.sign(tf[j]) / a[j]))
        if math.isinf(r):
            if include_inf_norm:
                k = int(np.argmax(np.abs(f)))
                nrm = abs(f[k])
                val -= g * math.log(max(nrm, _TINY))
                grad = grad.copy()
                grad[k] -= g * np.sign(f[k]) / max(nrm, _TINY)
        else:
            af = np.abs(f)
            pw = np.sum(af ** r * op.source.weights)
            if pw <= 0:
                return -np.inf, [np.zeros_like(x) for x in fs]
            val -= g * math.log(pw) / r
            with np.errstate(divide="ignore", invalid="ignore"):
                if nonneg and r == 1.0:
                    dn = np.ones_like(af)
                else:
                    dn = np.where(af > 0, af ** (r - 1) * np.sign(f), 0.0)
                dn = dn * op.source.weights / pw
            grad = grad - g * dn
        grads.append(grad)
    return float(val), grads


def _unit(f, r, space):
    n = lp_norm(f, r, space)
    return f / n if n > 0 else f


def projected_ascent(inst: Instance, fs, budget: int, q: float = 1.0, positive: bool = False,
                     tol: float = 1e-12):
    """Maximise log R from ``fs``; returns (log R, inputs, evaluations).

    Each step moves every block along its gradient, projects onto the
    nonnegative orthant when ``positive`` and renormalises each block to unit
    r_j-norm.  Step lengths start at 0.5 (relative to the block size) and are
    halved until the objective improves.
    """
    spaces = [op.source for op in inst.operators]
    rs = inst.profile.r
    fs = [_unit(np.abs(f) if positive else np.asarray(f, float), r, sp) for f, r, sp in zip(fs, rs, spaces)]
    val, grads = _log_ratio_and_grad(inst, fs, q, nonneg=positive)
    evals = 1
    while evals < budget:
        dirs = []
        for f, g in zip(fs, grads):
            gn = np.linalg.norm(g)
            dirs.append(g * (np.linalg.norm(f) / gn) if gn > 0 else g)
        step = 0.5
        improved = False
        while evals < budget and step > 1e-14:
            trial = []
            for f, dvec, r, sp in zip(fs, dirs, rs, spaces):
                t = f + step * dvec
                if positive:
                    t = np.maximum(t, _FLOOR * np.max(np.abs(t)))
                if not np.any(t):
                    t = f
                trial.append(_unit(t, r, sp))
            tval, tgrads = _log_ratio_and_grad(inst, trial, q, nonneg=positive)
            evals += 1
            if tval > val:
                improved = True
                gain = tval - val
                fs, val, grads = trial, tval, tgrads
                break
            step *= 0.5
        if not improved or gain <= tol * max(1.0, abs(val)):
            break
    return val, fs, evals


def _random_start(inst: Instance, rng: np.random.Generator, positive: bool):
    fs = []
    for m in inst.source_dims():
        while True:
            f = rng.standard_normal(m)
            if positive:
                f = np.abs(f)
            if np.any(f):
                break
        fs.append(f)
    return fs


def estimate_best_constant(inst: Instance, budget: int = 10_000, seed: int = 0, q: float = 1.0,
                           per_restart: int = 2_000) -> ConstantEstimate:
    """Multi-start projected gradient ascent on the log ratio.

    Restart ``k`` draws its start from stream ``(seed, k)`` (restart 0 starts
    at the all-ones inputs), and restarts are allotted ``per_restart``
    evaluations each, so enlarging the budget only appends restarts or
    extends the last one.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    positive = inst.positive
    dims = inst.source_dims()
    if all(m == 1 for m in dims):
        fs = [np.ones(1) for _ in dims]
        return _estimate(inst, fs, "exhaustive", 1, q)
    n_restarts = -(-budget // per_restart)
    allot = [per_restart] * (n_restarts - 1) + [budget - per_restart * (n_restarts - 1)]

    def run(k):
        if k == 0:
            start = [np.ones(m) for m in dims]
        else:
            start = _random_start(inst, stream(seed, 0xE57, k), positive)
        return projected_ascent(inst, start, allot[k], q, positive)

    results = ordered_map(run, range(n_restarts))
    best = max(range(n_restarts), key=lambda k: (results[k][0], -k))
    evals = sum(r[2] for r in results)
    return _estimate(inst, results[best][1], "random-restart-ascent", evals, q, restarts=n_restarts)


# ---------------------------------------------------------------------------
# sampled verification


def sample_inputs(inst: Instance, rng: np.random.Generator, count: int, positive: bool | None = None):
    """Random input batches mixing dense, sparse and heavy-tailed draws."""
    if positive is None:
        positive = False
    out = []
    for m in inst.source_dims():
        kind = rng.integers(0, 3, size=count)
        F = rng.standard_normal((count, m))
        heavy = rng.standard_cauchy((count, m))
        F = np.where((kind == 1)[:, None], heavy, F)
        mask = rng.random((count, m)) < 0.5
        sparse = (kind == 2)[:, None] & mask
        F = np.where(sparse, 0.0, F)
        empty = ~np.any(F != 0, axis=1)
        F[empty, rng.integers(0, m, size=int(empty.sum()))] = 1.0
        if positive:
            F = np.abs(F)
        out.append(F)
    return out


@dataclass(frozen=True, eq=False)
class InequalityReport:
    trials: int
    max_ratio: float
    max_constant: float
    bound: float
    violations: int
    witness: tuple | None

    @property
    def ok(self) -> bool:
        return self.violations == 0


def verify_scalar_inequality(inst: Instance, A: float, trials: int = 10_000, seed: int = 0,
                             chunk: int = 1024, rel_tol: float = 1e-9) -> InequalityReport:
    """Sample inputs and look for a ratio above ``A**sum(gamma) * (1 + rel_tol)``.

    Absence of violations is evidence only, never a proof.
    """
    if not A > 0:
        raise ValueError("A must be positive")
    gsum = float(inst.profile.gamma.sum())
    log_bound = gsum * math.log(A) + math.log1p(rel_tol)
    n_chunks = -(-trials // chunk)

    def run(c):
        size = min(chunk, trials - c * chunk)
        rng = stream(seed, 0x5CA, c)
        batches = sample_inputs(inst, rng, size, positive=inst.positive and bool(c % 2))
        vals = batch_log_ratio(inst, batches)
        k = int(np.argmax(vals))
        return float(vals[k]), int(np.sum(vals > log_bound)), tuple(b[k].copy() for b in batches)

    results = ordered_map(run, range(n_chunks))
    top = max(range(n_chunks), key=lambda c: (results[c][0], -c))
    max_log = results[top][0]
    violations = sum(r[1] for r in results)
    max_ratio = math.exp(max_log) if max_log > -math.inf else 0.0
    return InequalityReport(
        trials=trials,
        max_ratio=max_ratio,
        max_constant=max_ratio ** (1.0 / gsum),
        bound=A ** gsum,
        violations=violations,
        witness=results[top][2] if violations else None,
    )
