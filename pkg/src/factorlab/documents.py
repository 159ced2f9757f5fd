"""JSON documents for instances, certificates and reports.

Instance layout::

    {
      "measure_x": [1.0, 1.0],
      "operators": [{"matrix": [[1, 0], [0, 1]], "measure_y": [1, 1], "positive": true}, ...],
      "exponents": {"gamma": [1, 1], "p": [2, 2], "r": [2, 2], "q": 2.0},
      "known_constant": 1.0
    }

Infinite exponents may be written as the string ``"inf"``.
"""
from __future__ import annotations

import json
import math

import numpy as np

from .core import AtomicMeasureSpace, Certificate, ExponentProfile, Instance, OperatorMatrix
from .errors import FactorlabError, StructuralError


def _number(value, where):
    if isinstance(value, str):
        low = value.strip().lower()
        if low in ("inf", "+inf", "infinity", "+infinity"):
            return math.inf
        try:
            return float(value)
        except ValueError:
            raise StructuralError(f"{where}: {value!r} is not a number") from None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise StructuralError(f"{where}: {value!r} is not a number")
    return float(value)


def _vector(value, where):
    if not isinstance(value, (list, tuple)):
        raise StructuralError(f"{where}: expected an array")
    return np.array([_number(v, f"{where}[{i}]") for i, v in enumerate(value)], dtype=float)


def _matrix(value, where):
    if not isinstance(value, (list, tuple)) or not value:
        raise StructuralError(f"{where}: expected a non-empty array of rows")
    rows = [_vector(row, f"{where}[{i}]") for i, row in enumerate(value)]
    if len({len(r) for r in rows}) != 1:
        raise StructuralError(f"{where}: rows have unequal lengths")
    return np.vstack(rows)


def _field(doc, key, where):
    if key not in doc:
        raise StructuralError(f"{where}: missing field '{key}'")
    return doc[key]


def _wrap(exc, where):
    """Prefix a validation error with the document field it came from."""
    return type(exc)(f"{where}: {exc}")


def instance_from_dict(doc: dict) -> Instance:
    if not isinstance(doc, dict):
        raise StructuralError("instance document must be an object")
    try:
        x = AtomicMeasureSpace(_vector(_field(doc, "measure_x", "instance"), "measure_x"))
    except FactorlabError as exc:
        raise _wrap(exc, "measure_x") from None
    raw_ops = _field(doc, "operators", "instance")
    if not isinstance(raw_ops, list) or not raw_ops:
        raise StructuralError("operators: expected a non-empty array")
    ops = []
    for j, raw in enumerate(raw_ops):
        where = f"operators[{j}]"
        if not isinstance(raw, dict):
            raise StructuralError(f"{where}: expected an object")
        try:
            y = AtomicMeasureSpace(_vector(_field(raw, "measure_y", where), f"{where}.measure_y"))
        except FactorlabError as exc:
            raise _wrap(exc, f"{where}.measure_y") from None
        positive = raw.get("positive", False)
        if not isinstance(positive, bool):
            raise StructuralError(f"{where}.positive: expected a boolean")
        try:
            ops.append(OperatorMatrix(x, y, _matrix(_field(raw, "matrix", where), f"{where}.matrix"), positive))
        except FactorlabError as exc:
            raise _wrap(exc, f"{where}.matrix") from None
    ex = _field(doc, "exponents", "instance")
    if not isinstance(ex, dict):
        raise StructuralError("exponents: expected an object")
    try:
        profile = ExponentProfile(
            gamma=_vector(_field(ex, "gamma", "exponents"), "exponents.gamma"),
            p=_vector(_field(ex, "p", "exponents"), "exponents.p"),
            r=_vector(_field(ex, "r", "exponents"), "exponents.r"),
            alpha=None if ex.get("alpha") is None else _vector(ex["alpha"], "exponents.alpha"),
            q=None if ex.get("q") is None else _number(ex["q"], "exponents.q"),
        )
    except FactorlabError as exc:
        raise _wrap(exc, "exponents") from None
    known = doc.get("known_constant")
    try:
        return Instance(x, ops, profile, None if known is None else _number(known, "known_constant"))
    except FactorlabError as exc:
        raise _wrap(exc, "instance") from None


def parse_instance(document: str) -> Instance:
    """Parse and fully validate an instance document (JSON text)."""
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise StructuralError(f"instance document is not valid JSON: {exc}") from None
    return instance_from_dict(doc)


def load_instance(path) -> Instance:
    with open(path, encoding="utf-8") as fh:
        return parse_instance(fh.read())


def encode(value):
    """Convert numpy containers and non-finite floats into JSON-safe values."""
    if isinstance(value, dict):
        return {str(k): encode(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [encode(v) for v in value]
    if isinstance(value, np.ndarray):
        return encode(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return value


def instance_to_dict(inst: Instance) -> dict:
    prof = inst.profile
    doc = {
        "measure_x": inst.space_x.weights,
        "operators": [
            {"matrix": op.entries, "measure_y": op.source.weights, "positive": op.positive} for op in inst.operators
        ],
        "exponents": {"gamma": prof.gamma, "p": prof.p, "r": prof.r},
    }
    if prof.q is not None:
        doc["exponents"]["q"] = prof.q
    if prof.alpha is not None:
        doc["exponents"]["alpha"] = prof.alpha
    if inst.known_constant is not None:
        doc["known_constant"] = inst.known_constant
    return encode(doc)


def dumps(doc) -> str:
    return json.dumps(encode(doc), indent=2, sort_keys=True, allow_nan=False)


def certificate_to_dict(cert: Certificate) -> dict:
    return encode({"phi": cert.phi, "constant": cert.constant, "slacks": cert.slacks, "cap": cert.cap})


def certificate_from_dict(doc: dict) -> Certificate:
    if not isinstance(doc, dict):
        raise StructuralError("certificate document must be an object")
    if isinstance(doc.get("result"), dict) and "certificate" in doc["result"]:
        doc = doc["result"]  # a full solve report
    if "certificate" in doc:
        if not isinstance(doc["certificate"], dict):
            raise StructuralError("certificate: the report carries no certificate")
        doc = doc["certificate"]
    phi = _matrix(_field(doc, "phi", "certificate"), "certificate.phi")
    slacks = {k: _number(v, f"slacks.{k}") for k, v in (doc.get("slacks") or {}).items()}
    return Certificate(
        phi=phi,
        constant=_number(_field(doc, "constant", "certificate"), "certificate.constant"),
        slacks=slacks,
        cap=_number(doc.get("cap", 1.0), "certificate.cap"),
    )


def load_certificate(path) -> Certificate:
    with open(path, encoding="utf-8") as fh:
        try:
            return certificate_from_dict(json.loads(fh.read()))
        except json.JSONDecodeError as exc:
            raise StructuralError(f"certificate document is not valid JSON: {exc}") from None
