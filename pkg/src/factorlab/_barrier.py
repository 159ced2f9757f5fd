"""Log-barrier Newton method for concave maximisation over a weighted simplex.

Solves  max log F(z)  subject to  z >= 0,  c . z = 1
for a positive concave (hence log-concave) F supplied as a callback that
returns ``(log F, gradient, Hessian)`` of log F.  Newton steps are taken in
coordinates scaled by the current iterate, which makes the barrier Hessian
the identity and keeps the linear systems well conditioned however the
variables are scaled.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class BarrierResult:
    z: np.ndarray
    value: float
    gap: float
    newton_steps: int
    stopped_early: bool


def _newton_direction(grad_b, hess_b, z, c):
    """Equality-constrained Newton step for the barrier objective at z."""
    k = z.size
    hs = hess_b * z[:, None] * z[None, :]
    gs = grad_b * z
    cs = c * z
    kkt = np.zeros((k + 1, k + 1))
    kkt[:k, :k] = hs
    kkt[:k, k] = cs
    kkt[k, :k] = cs
    rhs = np.concatenate([-gs, [0.0]])
    try:
        sol = np.linalg.solve(kkt, rhs)
    except np.linalg.LinAlgError:
        sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
    dy = sol[:k]
    return dy * z, float(-gs @ dy)


def maximise_on_simplex(oracle, c, z0=None, gap_tol=1e-12, t0=None, growth=8.0,
                        max_newton=400, stop_above=None) -> BarrierResult:
    """Path-following barrier method.

    ``stop_above``: return as soon as log F exceeds this level (used to
    certify infeasibility early).  The reported ``gap`` bounds the
    suboptimality of log F at the returned point.
    """
    c = np.asarray(c, dtype=float)
    k = c.size
    z = np.full(k, 1.0 / c.sum()) if z0 is None else np.asarray(z0, dtype=float).copy()
    z = z / (c @ z)
    t = float(k) if t0 is None else float(t0)
    steps = 0
    val, g, h = oracle(z)
    while True:
        # centring at the current barrier weight
        for _ in range(60):
            if stop_above is not None and val > stop_above:
                return BarrierResult(z, val, np.inf, steps, True)
            grad_b = -t * g - 1.0 / z
            hess_b = -t * h + np.diag(1.0 / z**2)
            dz, dec2 = _newton_direction(grad_b, hess_b, z, c)
            steps += 1
            if dec2 / 2.0 <= 1e-10 or steps >= max_newton:
                break
            neg = dz < 0
            smax = min(1.0, 0.99 * float(np.min(-z[neg] / dz[neg]))) if neg.any() else 1.0
            if dec2 < 0.25 and smax == 1.0:
                # quadratic region: the full step is safe and function
                # values at large t are too noisy for a line search
                zn = z + dz
                zn = zn / (c @ zn)
                vn, gn, hn = oracle(zn)
                if np.isfinite(vn):
                    z, val, g, h = zn, vn, gn, hn
                    continue
            base = -t * val - np.sum(np.log(z))
            s = smax
            accepted = False
            while s > 1e-16:
                zn = z + s * dz
                zn = zn / (c @ zn)
                vn, gn, hn = oracle(zn)
                if np.isfinite(vn):
                    fn = -t * vn - np.sum(np.log(zn))
                    if fn <= base - 0.25 * s * dec2 or fn < base:
                        accepted = True
                        break
                s *= 0.5
            if not accepted:
                break
            z, val, g, h = zn, vn, gn, hn
        gap = k / t
        if gap <= gap_tol or steps >= max_newton:
            return BarrierResult(z, val, gap, steps, False)
        t *= growth
