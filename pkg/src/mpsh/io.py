"""JSON file formats.

Complex numbers are ``[re, im]`` pairs; matrices are nested row lists of pairs.

KrausFamily::

    {"dim": D, "convention": "heisenberg", "operators": [[[[re, im], ...], ...], ...]}

MPSChain::

    {"d": d, "D": D, "translation_invariant": true, "sites": [<KrausFamily>, ...]}

LocalObservable::

    {"window": [first, last], "matrix": [[[re, im], ...], ...], "label": "..."}
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any

import numpy as np

from mpsh.channel import KrausFamily
from mpsh.mps import LocalObservable, MPSChain


class SchemaError(ValueError):
    """Structurally invalid document; ``location`` is a JSON-pointer-like path."""

    def __init__(self, message: str, location: str = ""):
        super().__init__(f"{location or '/'}: {message}")
        self.location = location


def complex_to_json(z: complex) -> list[float]:
    return [float(z.real), float(z.imag)]


def matrix_to_json(m) -> list:
    m = np.asarray(m, dtype=np.complex128)
    return [[complex_to_json(z) for z in row] for row in m]


def matrix_from_json(obj: Any, where: str) -> np.ndarray:
    if not isinstance(obj, list) or not obj or not all(isinstance(r, list) for r in obj):
        raise SchemaError("expected a non-empty list of rows", where)
    rows = []
    for r, row in enumerate(obj):
        vals = []
        for c, z in enumerate(row):
            if (
                not isinstance(z, list)
                or len(z) != 2
                or not all(isinstance(t, (int, float)) and not isinstance(t, bool) for t in z)
            ):
                raise SchemaError("expected a [re, im] pair", f"{where}/{r}/{c}")
            vals.append(complex(z[0], z[1]))
        rows.append(vals)
    if len({len(r) for r in rows}) != 1:
        raise SchemaError("ragged matrix", where)
    m = np.array(rows, dtype=np.complex128)
    if not np.all(np.isfinite(m)):
        raise SchemaError("non-finite entry", where)
    return m


def kraus_to_json(k: KrausFamily) -> dict:
    return {"dim": k.dim, "convention": k.convention, "operators": [matrix_to_json(a) for a in k.operators]}


def kraus_from_json(obj: Any, where: str = "") -> KrausFamily:
    if not isinstance(obj, dict):
        raise SchemaError("expected an object", where)
    for key in ("dim", "operators"):
        if key not in obj:
            raise SchemaError(f"missing key {key!r}", where)
    convention = obj.get("convention", "schrodinger")
    if convention not in ("schrodinger", "heisenberg"):
        raise SchemaError(f"unknown convention {convention!r}", f"{where}/convention")
    ops_obj = obj["operators"]
    if not isinstance(ops_obj, list) or not ops_obj:
        raise SchemaError("expected a non-empty operator list", f"{where}/operators")
    ops = [matrix_from_json(a, f"{where}/operators/{i}") for i, a in enumerate(ops_obj)]
    dim = obj["dim"]
    for i, a in enumerate(ops):
        if a.shape != (dim, dim):
            raise SchemaError(f"operator has shape {a.shape}, expected ({dim}, {dim})", f"{where}/operators/{i}")
    return KrausFamily(ops, convention)


def chain_to_json(chain: MPSChain) -> dict:
    return {
        "d": chain.physical_dim,
        "D": chain.bond_dim,
        "translation_invariant": chain.translation_invariant,
        "sites": [kraus_to_json(s) for s in chain.sites],
    }


def chain_from_json(obj: Any) -> MPSChain:
    if not isinstance(obj, dict):
        raise SchemaError("expected an object")
    for key in ("d", "D", "sites"):
        if key not in obj:
            raise SchemaError(f"missing key {key!r}")
    sites_obj = obj["sites"]
    if not isinstance(sites_obj, list) or not sites_obj:
        raise SchemaError("expected a non-empty site list", "/sites")
    sites = [kraus_from_json(s, f"/sites/{i}") for i, s in enumerate(sites_obj)]
    for i, s in enumerate(sites):
        if len(s) != obj["d"] or s.dim != obj["D"]:
            raise SchemaError(f"site has {len(s)} matrices of size {s.dim}, expected d={obj['d']}, D={obj['D']}", f"/sites/{i}")
    ti = obj.get("translation_invariant", len(sites) == 1)
    if ti and len(sites) != 1:
        raise SchemaError("translation-invariant chains hold exactly one site", "/sites")
    return MPSChain(sites, bool(ti))


def observable_to_json(x: LocalObservable) -> dict:
    return {"window": list(x.window), "matrix": matrix_to_json(x.matrix), "label": x.label}


def observable_from_json(obj: Any, where: str = "") -> LocalObservable:
    if not isinstance(obj, dict) or "window" not in obj or "matrix" not in obj:
        raise SchemaError("expected an object with 'window' and 'matrix'", where)
    first, last = obj["window"]
    return LocalObservable(matrix_from_json(obj["matrix"], f"{where}/matrix"), first, last, label=obj.get("label", ""))


def load_chain(path: str | Path) -> MPSChain:
    """Read a chain file.

    Raises:
        SchemaError: malformed JSON (with line/column) or schema violation.
    """
    text = Path(path).read_text()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc.msg}", f"line {exc.lineno} column {exc.colno}") from exc
    return chain_from_json(obj)


def to_jsonable(obj: Any) -> Any:
    """Recursively convert numpy and complex values to plain JSON types.

    Non-finite floats become the strings ``"inf"``, ``"-inf"`` or ``"nan"`` so output
    stays strict JSON.
    """
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        if obj.ndim == 2 and np.iscomplexobj(obj):
            return matrix_to_json(obj)
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (complex, np.complexfloating)):
        return [to_jsonable(float(obj.real)), to_jsonable(float(obj.imag))]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        if math.isnan(f):
            return "nan"
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return f
    return obj


def dumps(obj: Any) -> str:
    """Deterministic JSON (sorted keys; floats use Python's shortest round-trip repr)."""
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=True) + "\n"
