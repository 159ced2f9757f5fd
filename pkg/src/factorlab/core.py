"""Finite atomic measure spaces, operators, exponent profiles and instances.

Functions on a space with ``n`` atoms are plain one-dimensional numpy arrays
of length ``n``.  Operators are dense ``n x m`` matrices acting from the source
space (``m`` atoms) to the target space (``n`` atoms).
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

from .errors import (
    HomogeneityError,
    PositivityError,
    SaturationError,
    StructuralError,
)

HOMOGENEITY_TOL = 1e-12


def _frozen(a, dtype=float):
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class AtomicMeasureSpace:
    """A finite set of atoms with strictly positive masses."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise StructuralError("measure weights must be a non-empty 1-d sequence")
        if not np.all(np.isfinite(w)):
            raise StructuralError("measure weights must be finite")
        if np.any(w <= 0):
            bad = int(np.flatnonzero(w <= 0)[0])
            raise StructuralError(f"measure weight at atom {bad} is not strictly positive ({w[bad]!r})")
        object.__setattr__(self, "weights", _frozen(w))

    @property
    def atom_count(self) -> int:
        return int(self.weights.size)

    @classmethod
    def uniform(cls, n: int, total: float = 1.0) -> "AtomicMeasureSpace":
        return cls(np.full(n, total / n))

    @classmethod
    def counting(cls, n: int) -> "AtomicMeasureSpace":
        return cls(np.ones(n))

    def same_as(self, other: "AtomicMeasureSpace") -> bool:
        return self.atom_count == other.atom_count and np.array_equal(self.weights, other.weights)


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    """Linear map from functions on ``source`` to functions on ``target``."""

    target: AtomicMeasureSpace
    source: AtomicMeasureSpace
    entries: np.ndarray
    positive: bool = False

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=float)
        if e.ndim != 2:
            raise StructuralError("operator entries must form a 2-d matrix")
        if e.shape != (self.target.atom_count, self.source.atom_count):
            raise StructuralError(
                f"operator shape {e.shape} does not match target/source atom counts "
                f"({self.target.atom_count}, {self.source.atom_count})"
            )
        if not np.all(np.isfinite(e)):
            raise StructuralError("operator entries must be finite")
        if self.positive and np.any(e < 0):
            row, col = np.argwhere(e < 0)[0]
            raise PositivityError(
                f"operator flagged positive has negative entry {e[row, col]!r} at ({row}, {col})"
            )
        object.__setattr__(self, "entries", _frozen(e))
        object.__setattr__(self, "positive", bool(self.positive))

    @property
    def shape(self):
        return self.entries.shape


@dataclass(frozen=True, eq=False)
class ExponentProfile:
    """Exponents gamma_j, p_j, r_j with theta_j = gamma_j / p_j.

    ``alpha`` and ``q`` are optional and only used by the L^q variants
    (``gamma_j = q * alpha_j``).
    """

    gamma: np.ndarray
    p: np.ndarray
    r: np.ndarray
    alpha: np.ndarray | None = None
    q: float | None = None
    theta: np.ndarray = field(init=False)

    def __post_init__(self):
        gamma = np.asarray(self.gamma, dtype=float).ravel()
        p = np.asarray(self.p, dtype=float).ravel()
        r = np.asarray(self.r, dtype=float).ravel()
        d = gamma.size
        if d == 0 or p.size != d or r.size != d:
            raise StructuralError(f"gamma, p, r must have equal non-zero length (got {gamma.size}, {p.size}, {r.size})")
        for name, arr in (("gamma", gamma), ("p", p), ("r", r)):
            if np.any(np.isnan(arr)) or np.any(arr <= 0):
                raise StructuralError(f"exponents {name} must be strictly positive")
        if np.any(~np.isfinite(gamma)) or np.any(~np.isfinite(p)):
            raise StructuralError("gamma and p must be finite")
        theta = gamma / p
        total = float(theta.sum())
        if abs(total - 1.0) > HOMOGENEITY_TOL:
            raise HomogeneityError(
                f"exponents: sum of gamma_j/p_j is {total!r}, deviation {total - 1.0:+.3e} from 1 "
                f"exceeds {HOMOGENEITY_TOL:g}; a disentangled bound can only hold when this sum equals 1"
            )
        object.__setattr__(self, "gamma", _frozen(gamma))
        object.__setattr__(self, "p", _frozen(p))
        object.__setattr__(self, "r", _frozen(r))
        object.__setattr__(self, "theta", _frozen(theta))
        if self.alpha is not None:
            alpha = np.asarray(self.alpha, dtype=float).ravel()
            if alpha.size != d:
                raise StructuralError("alpha must have length d")
            object.__setattr__(self, "alpha", _frozen(alpha))
        if self.q is not None:
            q = float(self.q)
            if not q > 0:
                raise StructuralError("q must be positive")
            object.__setattr__(self, "q", q)

    @property
    def d(self) -> int:
        return int(self.gamma.size)

    @classmethod
    def from_theta(cls, theta, p, r, **kw) -> "ExponentProfile":
        theta = np.asarray(theta, dtype=float)
        return cls(gamma=theta * np.asarray(p, dtype=float), p=p, r=r, **kw)


@dataclass(frozen=True, eq=False)
class Instance:
    """A multilinear inequality on a finite atomic space."""

    space_x: AtomicMeasureSpace
    operators: tuple
    profile: ExponentProfile
    known_constant: float | None = None

    def __post_init__(self):
        ops = tuple(self.operators)
        if len(ops) != self.profile.d:
            raise StructuralError(f"instance has {len(ops)} operators but the exponent profile has d={self.profile.d}")
        for j, op in enumerate(ops):
            if not op.target.same_as(self.space_x):
                raise StructuralError(f"operator {j} does not map into the instance's space X")
        for j, op in enumerate(ops):
            if not op.positive and math.isinf(self.profile.r[j]):
                raise StructuralError(f"operator {j}: r_j = inf is only supported for positive operators")
        object.__setattr__(self, "operators", ops)
        if self.known_constant is not None:
            a = float(self.known_constant)
            if not a > 0 or not math.isfinite(a):
                raise StructuralError("known_constant must be a positive finite number")
            object.__setattr__(self, "known_constant", a)

    @property
    def d(self) -> int:
        return self.profile.d

    @property
    def positive(self) -> bool:
        return all(op.positive for op in self.operators)

    def source_dims(self):
        return [op.source.atom_count for op in self.operators]

    def with_measure(self, weights) -> "Instance":
        """Same operators restricted/reweighted onto a new measure on X."""
        x = AtomicMeasureSpace(weights)
        ops = tuple(OperatorMatrix(x, op.source, op.entries, op.positive) for op in self.operators)
        return Instance(x, ops, self.profile, self.known_constant)

    def with_profile(self, profile: ExponentProfile, known_constant=None) -> "Instance":
        return Instance(self.space_x, self.operators, profile, known_constant)


@dataclass(frozen=True, eq=False)
class Certificate:
    """Weights phi_j (rows of ``phi``) certifying a disentangled bound.

    ``cap`` multiplies ``constant**p_j`` in each weighted bound, so the
    per-index constant is ``constant * cap**(1/p_j)``.
    """

    phi: np.ndarray
    constant: float
    slacks: dict = field(default_factory=dict)
    cap: float = 1.0

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=float)
        if phi.ndim != 2:
            raise StructuralError("certificate phi must be a d x n array")
        if np.any(phi < 0) or np.any(np.isnan(phi)):
            raise StructuralError("certificate weights must be nonnegative")
        object.__setattr__(self, "phi", _frozen(phi))
        object.__setattr__(self, "constant", float(self.constant))
        object.__setattr__(self, "cap", float(self.cap))
        object.__setattr__(self, "slacks", dict(self.slacks))

    def per_index_constants(self, profile: ExponentProfile) -> np.ndarray:
        return self.constant * self.cap ** (1.0 / profile.p)


def _check_function(f, space: AtomicMeasureSpace, what="function"):
    f = np.asarray(f)
    if f.ndim != 1 or f.size != space.atom_count:
        raise StructuralError(f"{what} has shape {f.shape}, expected ({space.atom_count},)")
    return f


def lp_norm(f, p: float, space: AtomicMeasureSpace, weight=None) -> float:
    """(sum |f|^p w mu)^(1/p); the max over charged atoms when p is infinite.

    For p < 1 this is the usual quasi-norm.  Atoms with zero weight are
    ignored in the p = inf case (0 * inf = 0).
    """
    if space.atom_count == 0:
        raise StructuralError("empty measure space")
    f = np.abs(_check_function(f, space))
    mass = space.weights
    if weight is not None:
        w = np.asarray(_check_function(weight, space, "weight"), dtype=float)
        if np.any(w < 0):
            raise StructuralError("weight must be nonnegative")
        mass = mass * w
    if not p > 0:
        raise StructuralError("exponent p must be positive")
    if math.isinf(p):
        charged = mass > 0
        return float(f[charged].max()) if charged.any() else 0.0
    return float(np.sum(f ** p * mass) ** (1.0 / p))


def apply_operator(T: OperatorMatrix, f) -> np.ndarray:
    f = _check_function(f, T.source, "input")
    return T.entries @ f


def _check_inputs(inst: Instance, fs):
    if len(fs) != inst.d:
        raise StructuralError(f"expected {inst.d} input functions, got {len(fs)}")
    return [_check_function(f, op.source, f"input {j}") for j, (f, op) in enumerate(zip(fs, inst.operators))]


def pointwise_product(inst: Instance, fs) -> np.ndarray:
    """x -> prod_j |T_j f_j(x)|^{gamma_j}."""
    fs = _check_inputs(inst, fs)
    out = np.ones(inst.space_x.atom_count)
    for f, op, g in zip(fs, inst.operators, inst.profile.gamma):
        out *= np.abs(op.entries @ f) ** g
    return out


def evaluate_lhs(inst: Instance, fs) -> float:
    """Integral over X of prod_j |T_j f_j|^{gamma_j}."""
    return float(np.sum(pointwise_product(inst, fs) * inst.space_x.weights))


def lq_lhs(inst: Instance, fs, q: float) -> float:
    """L^q(X) quasi-norm of prod_j |T_j f_j|^{gamma_j}."""
    return lp_norm(pointwise_product(inst, fs), q, inst.space_x)


def rhs_norm_product(inst: Instance, fs) -> float:
    """prod_j ||f_j||_{r_j}^{gamma_j}."""
    fs = _check_inputs(inst, fs)
    out = 1.0
    for f, op, g, r in zip(fs, inst.operators, inst.profile.gamma, inst.profile.r):
        out *= lp_norm(f, r, op.source) ** g
    return out


def inequality_ratio(inst: Instance, fs, q: float = 1.0) -> float:
    """Left side over prod_j ||f_j||^{gamma_j}; inf when a norm vanishes but the left side does not."""
    lhs = evaluate_lhs(inst, fs) if q == 1.0 else lq_lhs(inst, fs, q)
    rhs = rhs_norm_product(inst, fs)
    if rhs == 0.0:
        return 0.0 if lhs == 0.0 else math.inf
    return lhs / rhs


def constant_from_ratio(inst: Instance, ratio: float) -> float:
    """The A with A**sum(gamma) == ratio."""
    return float(ratio ** (1.0 / inst.profile.gamma.sum()))


def geometric_mean_floor(cert: Certificate, profile: ExponentProfile, space: AtomicMeasureSpace) -> float:
    """min over atoms of prod_j phi_j(x)^{theta_j} (with 0^0 = 1)."""
    phi = np.asarray(cert.phi, dtype=float)
    if phi.shape != (profile.d, space.atom_count):
        raise StructuralError(f"certificate shape {phi.shape} does not match (d, n) = ({profile.d}, {space.atom_count})")
    with np.errstate(divide="ignore"):
        logs = np.where(profile.theta[:, None] > 0, np.log(phi), 0.0)
    s = (profile.theta[:, None] * logs).sum(axis=0)
    return float(np.exp(s.min()))


def saturation_check(T: OperatorMatrix):
    """(True, None) when every row is nonzero, else (False, first zero row)."""
    zero = ~np.any(T.entries != 0, axis=1)
    if zero.any():
        return False, int(np.flatnonzero(zero)[0])
    return True, None


def require_saturation(inst: Instance):
    for j, op in enumerate(inst.operators):
        ok, row = saturation_check(op)
        if not ok:
            raise SaturationError(
                f"operator {j} does not saturate X: row {row} is identically zero", operator_index=j, atom=row
            )
