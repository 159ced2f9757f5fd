"""Instance factories shared by the test modules."""
import math

import numpy as np

from factorlab.core import AtomicMeasureSpace, ExponentProfile, Instance, OperatorMatrix
from factorlab.oracle import GRID_BUDGET, _grid_count


def identity_instance(n=2, p=(2.0, 2.0), r=(2.0, 2.0), gamma=(1.0, 1.0), weights=None, known=None):
    x = AtomicMeasureSpace(np.ones(n) if weights is None else weights)
    ops = [OperatorMatrix(x, x, np.eye(n), True) for _ in gamma]
    return Instance(x, ops, ExponentProfile(gamma, p, r), known)


def averaging_instance(n=3, m=2, gamma=(1.0, 1.0), p=(2.0, 2.0), r=(2.0, 2.0), q=None):
    """X with n atoms of mass 1/n; each Y_j has m atoms of mass 1/m; T_j f = mean of f."""
    x = AtomicMeasureSpace.uniform(n)
    y = AtomicMeasureSpace.uniform(m)
    ops = [OperatorMatrix(x, y, np.full((n, m), 1.0 / m), True) for _ in gamma]
    return Instance(x, ops, ExponentProfile(gamma, p, r, q=q), 1.0)


def diag_instance():
    x = AtomicMeasureSpace([1.0, 1.0])
    ops = [OperatorMatrix(x, x, np.diag([1.0, 2.0]), True), OperatorMatrix(x, x, np.diag([2.0, 1.0]), True)]
    return Instance(x, ops, ExponentProfile([1.0, 1.0], [2.0, 2.0], [2.0, 2.0]))


R_CHOICES = (1.0, 1.5, 2.0, 3.0, math.inf)


def random_positive_instance(rng, d=None, max_dim=4, n=None):
    """Positive operators with admissible exponents p_j <= r_j, r_j >= 1."""
    d = int(rng.integers(2, 4)) if d is None else d
    n = int(rng.integers(2, max_dim + 1)) if n is None else n
    x = AtomicMeasureSpace(rng.uniform(0.5, 2.0, n))
    ops, ps, rs = [], [], []
    for _ in range(d):
        m = int(rng.integers(1, max_dim + 1))
        y = AtomicMeasureSpace(rng.uniform(0.5, 2.0, m))
        E = rng.uniform(0.0, 1.0, (n, m)) * (rng.random((n, m)) < 0.8)
        E[np.arange(n), rng.integers(0, m, n)] += 0.1  # keep every row nonzero
        ops.append(OperatorMatrix(x, y, E, True))
        r = float(rng.choice(R_CHOICES))
        p = float(rng.uniform(0.5, min(r, 4.0)))
        ps.append(p)
        rs.append(r)
    theta = rng.dirichlet(np.ones(d))
    return Instance(x, ops, ExponentProfile.from_theta(theta, ps, rs))


def grid_levels_for(inst, limit=2_000_000, top=12):
    """Largest grid level (<= top) whose positive grid stays within ``limit`` points."""
    level = 1
    for cand in range(1, top + 1):
        if _grid_count(inst, cand, False) <= min(limit, GRID_BUDGET):
            level = cand
    return level
