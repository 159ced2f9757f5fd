"""Separation oracle: maximise a weighted p-norm of T f over the unit r-ball.

    value(f) = sum_x |T f(x)|^p phi(x) mu(x) / ||f||_r^p

Several cases are solved to global optimality:

* one-dimensional source: the ratio does not depend on f;
* p = r = 2: a symmetric eigenproblem, by power iteration;
* r = 1 with p >= 1, or r = inf with p >= 1: the objective is convex in f, so
  its maximum sits at a vertex of the unit ball and vertices are enumerated;
* positive T, r = inf: f = 1 dominates every input of the unit ball;
* positive T with 1 <= r, p <= r: with h = f^r the objective becomes a
  concave function on a simplex, maximised by a barrier method.

Everything else falls back to multi-start projected ascent, with an
exhaustive grid when the source dimension is small.  Every returned value is
the ratio at an explicit input, hence a lower bound on the supremum.
"""
from __future__ import annotations

from dataclasses import dataclass
import itertools
import math
import warnings

import numpy as np

from ._barrier import maximise_on_simplex
from ._rng import stream
from .core import OperatorMatrix, lp_norm

POWER_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class SeparationResult:
    violating_input: np.ndarray | None
    achieved: float
    method: str
    effort: int
    global_optimum: bool


def weighted_value(T: OperatorMatrix, phi, p: float, r: float, f) -> float:
    """sum |T f|^p phi mu / ||f||_r^p."""
    w = np.asarray(phi, dtype=float) * T.target.weights
    num = float(np.sum(np.abs(T.entries @ f) ** p * w))
    den = lp_norm(f, r, T.source) ** p
    if den == 0:
        return 0.0
    return num / den


def power_iteration(M: np.ndarray, tol: float = POWER_TOL, max_iter: int = 100_000, v0=None):
    """Largest eigenpair of a symmetric positive semidefinite matrix.

    Stops once ``||M v - lam v|| <= tol * lam``.  When that is not reached
    within ``max_iter`` steps a warning is issued and a dense symmetric
    eigensolver supplies the answer instead.
    """
    n = M.shape[0]
    v = np.ones(n) / math.sqrt(n) if v0 is None else np.asarray(v0, float) / np.linalg.norm(v0)
    lam = 0.0
    for it in range(1, max_iter + 1):
        w = M @ v
        nw = np.linalg.norm(w)
        if nw == 0:
            return 0.0, v, it
        lam = float(v @ w)
        res = np.linalg.norm(w - lam * v)
        if res <= tol * max(lam, np.finfo(float).tiny):
            return lam, v, it
        v = w / nw
    warnings.warn("power iteration did not converge; using a dense eigensolver", RuntimeWarning)
    vals, vecs = np.linalg.eigh(M)
    return float(vals[-1]), vecs[:, -1], max_iter


def _eigen(T, phi, budget):
    nu = T.source.weights
    w = np.asarray(phi, float) * T.target.weights
    s = 1.0 / np.sqrt(nu)
    B = T.entries * s[None, :]
    M = B.T @ (B * w[:, None])
    M = 0.5 * (M + M.T)
    # start from the dominant diagonal direction, nudged off any symmetry
    v0 = np.diag(M) + 1e-3 * np.arange(1, M.shape[0] + 1) / M.shape[0]
    lam, v, iters = power_iteration(M, v0=v0)
    f = v * s
    return f, iters


def _vertices_l1(T, phi, p):
    nu = T.source.weights
    w = np.asarray(phi, float) * T.target.weights
    vals = (np.abs(T.entries) ** p * w[:, None]).sum(axis=0) / nu ** p
    y = int(np.argmax(vals))
    f = np.zeros(T.source.atom_count)
    f[y] = 1.0
    return f, T.source.atom_count


def _vertices_box(T, phi, p):
    m = T.source.atom_count
    w = np.asarray(phi, float) * T.target.weights
    signs = np.array(list(itertools.product([1.0, -1.0], repeat=m - 1)))
    signs = np.hstack([np.ones((signs.shape[0], 1)), signs])
    vals = (np.abs(signs @ T.entries.T) ** p * w).sum(axis=1)
    k = int(np.argmax(vals))
    return signs[k].copy(), signs.shape[0]


def _concave(T, phi, p, r):
    """Positive T, 1 <= r < inf, p <= r: concave in h = f^r on {h >= 0, sum h nu = 1}."""
    nu = T.source.weights
    w = np.asarray(phi, float) * T.target.weights
    rows = w > 0
    E = T.entries[rows]
    w = w[rows]
    s = 1.0 / r
    if E.size == 0 or not np.any(E):
        return np.ones(T.source.atom_count), 0

    def oracle(h):
        hs = h ** s
        u = E @ hs
        live = u > 0
        uu = u[live]
        ww = w[live]
        EE = E[live]
        F = float(np.sum(ww * uu ** p))
        if not F > 0:
            return -np.inf, np.zeros_like(h), np.zeros((h.size, h.size))
        J = EE * (s * h ** (s - 1.0))[None, :]
        a = ww * p * uu ** (p - 1.0)
        grad = J.T @ a
        hess = J.T @ (J * (ww * p * (p - 1.0) * uu ** (p - 2.0))[:, None])
        hess += np.diag((EE.T @ a) * s * (s - 1.0) * h ** (s - 2.0))
        g = grad / F
        return math.log(F), g, hess / F - np.outer(g, g)

    res = maximise_on_simplex(oracle, nu, gap_tol=1e-13)
    return res.z ** s, res.newton_steps


def _ascent(T, phi, p, r, f0, budget, positive):
    """Projected gradient ascent on log value(f) from f0."""
    w = np.asarray(phi, float) * T.target.weights
    nu = T.source.weights
    inf_r = math.isinf(r)

    def evaluate(f):
        tf = T.entries @ f
        a = np.maximum(np.abs(tf), 1e-300)
        num = np.sum(w * a ** p)
        if num <= 0:
            return -np.inf, np.zeros_like(f)
        g = p * (T.entries.T @ (w * a ** (p - 1.0) * np.sign(tf))) / num
        if inf_r:
            k = int(np.argmax(np.abs(f)))
            nrm = abs(f[k])
            val = math.log(num) - p * math.log(nrm)
            g = g.copy()
            g[k] -= p * np.sign(f[k]) / nrm
        else:
            af = np.abs(f)
            pw = np.sum(af ** r * nu)
            val = math.log(num) - p / r * math.log(pw)
            with np.errstate(divide="ignore", invalid="ignore"):
                dn = np.where(af > 0, af ** (r - 1.0) * np.sign(f), 0.0) * nu / pw
            g = g - p * dn
        return float(val), g

    def unit(f):
        n = lp_norm(f, r, T.source)
        return f / n if n > 0 else f

    f = unit(np.abs(f0) if positive else np.asarray(f0, float))
    val, g = evaluate(f)
    evals = 1
    while evals < budget:
        gn = np.linalg.norm(g)
        if gn == 0 or not np.isfinite(val):
            break
        direction = g * np.linalg.norm(f) / gn
        step = 0.5
        moved = False
        while step > 1e-14 and evals < budget:
            t = f + step * direction
            if positive:
                t = np.maximum(t, 0.0)
            if np.any(t):
                t = unit(t)
                tv, tg = evaluate(t)
                evals += 1
                if tv > val:
                    gain = tv - val
                    f, val, g = t, tv, tg
                    moved = True
                    break
            step *= 0.5
        if not moved or gain <= 1e-13 * max(1.0, abs(val)):
            break
    return f, val, evals


def _grid_levels_for(m, signed, limit=200_000):
    per = limit ** (1.0 / m)
    levels = int((per - 1) / 2) if signed else int(per - 1)
    return max(levels, 0)


def separation_oracle(T: OperatorMatrix, phi, p: float, r: float, budget: int = 4000,
                      seed: int = 0) -> SeparationResult:
    """Best input found for the weighted bound on ``T`` (see module docstring)."""
    phi = np.asarray(phi, dtype=float)
    m = T.source.atom_count
    positive = T.positive
    if m == 1:
        f = np.ones(1)
        return SeparationResult(f, weighted_value(T, phi, p, r, f), "exhaustive", 1, True)
    if p == 2.0 and r == 2.0:
        f, iters = _eigen(T, phi, budget)
        return SeparationResult(f, weighted_value(T, phi, p, r, f), "eigen-exact", iters, True)
    if math.isinf(r) and positive:
        f = np.ones(m)
        return SeparationResult(f, weighted_value(T, phi, p, r, f), "exhaustive", 1, True)
    if r == 1.0 and p >= 1.0:
        f, n = _vertices_l1(T, phi, p)
        return SeparationResult(f, weighted_value(T, phi, p, r, f), "exhaustive", n, True)
    if math.isinf(r) and p >= 1.0 and m <= 16:
        f, n = _vertices_box(T, phi, p)
        return SeparationResult(f, weighted_value(T, phi, p, r, f), "exhaustive", n, True)
    if positive and 1.0 <= r < math.inf and p <= r:
        f, steps = _concave(T, phi, p, r)
        return SeparationResult(f, weighted_value(T, phi, p, r, f), "ascent", steps, True)
    return _heuristic(T, phi, p, r, budget, seed, positive)


def _heuristic(T, phi, p, r, budget, seed, positive):
    m = T.source.atom_count
    cands = [np.eye(m)[y] for y in range(m)] + [np.ones(m)]
    effort = len(cands)
    if m <= 6:
        levels = _grid_levels_for(m, not positive)
        if levels >= 1:
            lo = 0 if positive else -levels
            vals = np.arange(lo, levels + 1) / levels
            pts = np.array(list(itertools.product(vals, repeat=m)))
            pts = pts[np.any(pts != 0, axis=1)]
            w = phi * T.target.weights
            num = (np.abs(pts @ T.entries.T) ** p * w).sum(axis=1)
            if math.isinf(r):
                den = np.abs(pts).max(axis=1) ** p
            else:
                den = (np.abs(pts) ** r * T.source.weights).sum(axis=1) ** (p / r)
            score = num / den
            effort += pts.shape[0]
            for k in np.argsort(-score, kind="stable")[:3]:
                cands.append(pts[k])
    rng = stream(seed, 0x5E9)
    n_random = 6
    for _ in range(n_random):
        f = rng.standard_normal(m)
        cands.append(np.abs(f) if positive else f)
    per = max(50, budget // max(1, len(cands)))
    best_f, best_v = None, -math.inf
    for f0 in cands:
        f, _, evals = _ascent(T, phi, p, r, f0, per, positive)
        effort += evals
        v = weighted_value(T, phi, p, r, f)
        if v > best_v:
            best_f, best_v = f, v
    return SeparationResult(best_f, best_v, "ascent", effort, False)
