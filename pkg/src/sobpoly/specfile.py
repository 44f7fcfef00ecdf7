"""Structured-text problem descriptions and result serialization.

All numerics in files are decimal strings, never binary floats, so the
format is precision-agnostic; parsing happens at the target precision.
Unknown fields are rejected.
"""

import json

from mpmath import mp, mpf

from .core import MeasureMatrix
from .errors import SpecFileError
from .linalg import Matrix
from .measures import Measure, hermite, jacobi, laguerre, uniform
from .poly import Polynomial
from .transforms import GermSet, GeronimusSpec

_FAMILY_PARAMS = {
    "hermite": (),
    "laguerre": ("alpha",),
    "jacobi": ("alpha", "beta"),
    "uniform": ("a", "b"),
}


def _check_keys(obj, allowed, where):
    extra = set(obj) - set(allowed)
    if extra:
        raise SpecFileError(f"unknown fields {sorted(extra)} in {where}")


def _num(v, where):
    if isinstance(v, bool) or not isinstance(v, (str, int)):
        raise SpecFileError(f"{where} must be a decimal string, got {v!r}")
    try:
        return mpf(v)
    except Exception as exc:
        raise SpecFileError(f"cannot parse number {v!r} in {where}") from exc


def _parse_family(obj, where):
    _check_keys(obj, ("family", "params", "polyFactor"), where)
    kind = obj.get("family")
    if kind not in _FAMILY_PARAMS:
        raise SpecFileError(f"unknown family {kind!r} in {where}")
    params = obj.get("params", {})
    _check_keys(params, _FAMILY_PARAMS[kind], f"{where}.params")
    vals = [_num(params[name], f"{where}.params.{name}") for name in _FAMILY_PARAMS[kind]]
    if kind == "hermite":
        fam = hermite()
    elif kind == "laguerre":
        fam = laguerre(vals[0])
    elif kind == "jacobi":
        fam = jacobi(vals[0], vals[1])
    else:
        fam = uniform(vals[0], vals[1])
    factor = Polynomial([_num(c, f"{where}.polyFactor") for c in obj.get("polyFactor", ["1"])])
    return fam, factor


def parse_measure_matrix(doc):
    """SpecFile dict -> (MeasureMatrix, precision bits or None)."""
    _check_keys(doc, ("order", "precisionBits", "entries"), "spec")
    if "order" not in doc or "entries" not in doc:
        raise SpecFileError("spec needs 'order' and 'entries'")
    order = doc["order"]
    if not isinstance(order, int) or order < 0:
        raise SpecFileError("'order' must be a nonnegative integer")
    bits = doc.get("precisionBits")
    if bits is not None and (not isinstance(bits, int) or bits < 64):
        raise SpecFileError("'precisionBits' must be an integer >= 64")
    w = MeasureMatrix(order)
    for idx, entry in enumerate(doc["entries"]):
        where = f"entries[{idx}]"
        _check_keys(entry, ("row", "col", "continuous", "atoms"), where)
        row, col = entry.get("row"), entry.get("col")
        if not isinstance(row, int) or not isinstance(col, int):
            raise SpecFileError(f"{where} needs integer 'row' and 'col'")
        if row > order or col > order or row < 0 or col < 0:
            raise SpecFileError(f"{where}: position ({row},{col}) beyond order {order}")
        m = Measure.zero()
        if "continuous" in entry:
            fam, factor = _parse_family(entry["continuous"], f"{where}.continuous")
            m = m + Measure.continuous(fam, factor)
        for a_idx, atom in enumerate(entry.get("atoms", [])):
            aw = f"{where}.atoms[{a_idx}]"
            _check_keys(atom, ("point", "mass"), aw)
            m = m + Measure.point_masses(
                [(_num(atom["point"], aw), _num(atom["mass"], aw))]
            )
        w.set_entry(row, col, w.entry(row, col) + m)
    return w, bits


def load_measure_matrix(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise SpecFileError(f"cannot read spec {path}: {exc}") from exc
    return parse_measure_matrix(doc)


def serialize_measure_matrix(w, bits=None, digits=None):
    """MeasureMatrix -> SpecFile dict (decimal strings, round-trippable)."""
    if digits is None:
        digits = decimal_digits()
    entries = []
    for i in range(w.order + 1):
        for j in range(w.order + 1):
            m = w.entry(i, j)
            if m.is_zero():
                continue
            if len(m.components) > 1:
                raise SpecFileError("serialization supports one continuous component per entry")
            entry = {"row": i, "col": j}
            if m.components:
                comp = m.components[0]
                if comp.poles:
                    raise SpecFileError("rational entries are not serializable")
                names = _FAMILY_PARAMS[comp.family.kind]
                entry["continuous"] = {
                    "family": comp.family.kind,
                    "params": {
                        name: fmt(comp.family.params[t], digits)
                        for t, name in enumerate(names)
                    },
                    "polyFactor": [fmt(c, digits) for c in comp.num.coeffs],
                }
            if m.atoms:
                entry["atoms"] = [
                    {"point": fmt(p, digits), "mass": fmt(v, digits)} for p, v in m.atoms
                ]
            entries.append(entry)
    doc = {"order": w.order, "entries": entries}
    if bits is not None:
        doc["precisionBits"] = bits
    return doc


def decimal_digits(bits=None):
    """Precision-faithful decimal digit count for the given binary precision."""
    bits = mp.prec if bits is None else bits
    return int(bits * 0.30103) + 3


def fmt(x, digits=None):
    if digits is None:
        digits = decimal_digits()
    return mp.nstr(mpf(x), digits, strip_zeros=True, min_fixed=1, max_fixed=0)


def poly_rows(polys, digits=None):
    return [[fmt(c, digits) for c in p.coeffs] for p in polys]


def matrix_rows(m, digits=None):
    return [[fmt(v, digits) for v in row] for row in m.data]


def parse_germ_set(items, where):
    pts = []
    for idx, item in enumerate(items):
        aw = f"{where}[{idx}]"
        _check_keys(item, ("point", "mult"), aw)
        mult = item.get("mult", 1)
        if not isinstance(mult, int) or mult < 1:
            raise SpecFileError(f"{aw}: 'mult' must be a positive integer")
        pts.append((_num(item["point"], aw), mult))
    return GermSet.of(*pts)


def parse_transform(doc):
    """Transform description: roots of R and Q, mass blocks, side/orientation."""
    _check_keys(
        doc,
        ("R", "Q", "xi", "side", "orientation", "nodes", "rparams", "lambda", "t1", "t2", "operator"),
        "transform",
    )
    out = {}
    if "R" in doc:
        out["R"] = parse_germ_set(doc["R"], "transform.R")
    if "side" in doc:
        if doc["side"] not in ("left", "right"):
            raise SpecFileError("side must be 'left' or 'right'")
        out["side"] = doc["side"]
    if "Q" in doc:
        q = parse_germ_set(doc["Q"], "transform.Q")
        side = doc.get("side", "left")
        masses = []
        xi = doc.get("xi")
        if xi is None:
            spec = GeronimusSpec.massless(q, side=side)
        else:
            if len(xi) != len(q.points):
                raise SpecFileError("one xi block per Q root required")
            for blk, (_pt, n_i) in zip(xi, q.points):
                rows = [[_num(v, "transform.xi") for v in row] for row in blk]
                if len(rows) != n_i or any(len(r) != n_i for r in rows):
                    raise SpecFileError(f"xi block must be {n_i}x{n_i}")
                masses.append(Matrix(rows))
            spec = GeronimusSpec(germ=q, masses=tuple(masses), side=side)
        out["Q"] = spec
    if "orientation" in doc:
        if doc["orientation"] not in ("RL", "LR"):
            raise SpecFileError("orientation must be 'RL' or 'LR'")
        out["orientation"] = doc["orientation"]
    if "nodes" in doc:
        nodes, masses = [], []
        for idx, item in enumerate(doc["nodes"]):
            aw = f"transform.nodes[{idx}]"
            _check_keys(item, ("point", "n", "m", "mass"), aw)
            n_i, m_i = item.get("n", 1), item.get("m", 1)
            rows = [[_num(v, aw) for v in row] for row in item["mass"]]
            nodes.append((_num(item["point"], aw), n_i, m_i))
            masses.append(Matrix(rows))
        out["nodes"] = (tuple(nodes), tuple(masses))
    if "rparams" in doc:
        out["rparams"] = tuple(_num(v, "transform.rparams") for v in doc["rparams"])
    if "lambda" in doc:
        out["lambda"] = _num(doc["lambda"], "transform.lambda")
    for key in ("t1", "t2"):
        if key in doc:
            out[key] = tuple(
                (int(j), _num(v, f"transform.{key}")) for j, v in doc[key]
            )
    if "operator" in doc:
        terms = []
        for idx, item in enumerate(doc["operator"]):
            aw = f"transform.operator[{idx}]"
            _check_keys(item, ("coeffs", "order"), aw)
            terms.append(
                (Polynomial([_num(c, aw) for c in item["coeffs"]]), int(item.get("order", 0)))
            )
        out["operator"] = tuple(terms)
    return out


def load_transform(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise SpecFileError(f"cannot read transform {path}: {exc}") from exc
    return parse_transform(doc)
