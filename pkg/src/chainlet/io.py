"""JSON encodings for forms, chains, certificates and cubes.

Covector and coordinate indices in JSON are 1-based; the Python API is 0-based.
"""
from __future__ import annotations

import json
from math import comb
from pathlib import Path

import numpy as np

from .elements import ElementChain, ElementTerm
from .errors import ContractViolation
from .exterior import KVector, basis
from .forms import PolyForm
from .polyhedral import DecompositionCert, DifferenceCell, PolyChain
from .quantize import Cube


class InputError(ContractViolation):
    """Malformed JSON input."""


def _need(obj, *keys):
    for key in keys:
        if key not in obj:
            raise InputError(f"missing field {key!r}")


def _int(x, what):
    if isinstance(x, bool) or not isinstance(x, (int, float)) or int(x) != x:
        raise InputError(f"{what} must be an integer")
    return int(x)


# forms ---------------------------------------------------------------------

def _exponents(mono, n):
    if isinstance(mono, dict):
        e = [0] * n
        for key, p in mono.items():
            i = _int(int(key), "variable index") - 1
            if not 0 <= i < n:
                raise InputError(f"variable index {key} outside 1..{n}")
            e[i] = _int(p, "exponent")
        return tuple(e)
    e = [_int(p, "exponent") for p in mono]
    if len(e) != n:
        raise InputError(f"exponent list needs {n} entries")
    return tuple(e)


def form_from_json(obj):
    """{n, k, terms: [{H: [1-based indices], monomial: {var: exp} or [exps], coeff}]}"""
    _need(obj, "n", "k", "terms")
    n, k = _int(obj["n"], "n"), _int(obj["k"], "k")
    if not 0 <= k <= n:
        raise InputError("form degree outside 0..n")
    terms = []
    for t in obj["terms"]:
        _need(t, "H", "coeff")
        H = tuple(_int(h, "covector index") - 1 for h in t["H"])
        if len(H) != k or list(H) != sorted(set(H)) or (H and not 0 <= H[0] <= H[-1] < n):
            raise InputError(f"bad multi-index {t['H']}")
        e = _exponents(t.get("monomial", {}), n)
        terms.append((H, e, float(t["coeff"])))
    return PolyForm.from_terms(n, k, terms)


def form_to_json(w):
    terms = []
    for H, p in zip(basis(w.n, w.k), w.coeffs):
        for e, c in sorted(p.terms.items()):
            terms.append({"H": [h + 1 for h in H], "monomial": list(e), "coeff": c})
    return {"n": w.n, "k": w.k, "terms": terms}


# polyhedral chains ---------------------------------------------------------------

def polychain_from_json(obj):
    """{n, k, terms: [{coeff, vertices: [[x...], ...]}]}"""
    _need(obj, "n", "k", "terms")
    n, k = _int(obj["n"], "n"), _int(obj["k"], "k")
    coeffs, verts = [], []
    for t in obj["terms"]:
        _need(t, "coeff", "vertices")
        v = np.asarray(t["vertices"], dtype=float)
        if v.shape != (k + 1, n):
            raise InputError(f"simplex needs {k + 1} vertices in R^{n}")
        coeffs.append(float(t["coeff"]))
        verts.append(v)
    return PolyChain(n, k, coeffs, np.array(verts).reshape(-1, k + 1, n))


def polychain_to_json(P):
    return {"n": P.n, "k": P.k,
            "terms": [{"coeff": float(c), "vertices": v.tolist()}
                      for c, v in zip(P.coeffs, P.vertices)]}


def cell_from_json(obj):
    """{base: <chain>, vectors: [[x...], ...]}"""
    _need(obj, "base")
    base = polychain_from_json(obj["base"])
    vecs = np.asarray(obj.get("vectors", []), dtype=float).reshape(-1, base.n)
    return DifferenceCell(base, vecs)


def cell_to_json(D):
    return {"base": polychain_to_json(D.base), "vectors": D.vectors.tolist()}


def cert_from_json(obj):
    """{differences: [{coeff, base, vectors}], witness: <chain> | null, witness_cert: <cert> | null}"""
    diffs = []
    for d in obj.get("differences", []):
        diffs.append((float(d.get("coeff", 1.0)), cell_from_json(d)))
    witness = obj.get("witness")
    wc = obj.get("witness_cert")
    return DecompositionCert(tuple(diffs),
                             polychain_from_json(witness) if witness else None,
                             cert_from_json(wc) if wc else None)


def cert_to_json(cert):
    return {"differences": [dict(coeff=float(a), **cell_to_json(D)) for a, D in cert.differences],
            "witness": polychain_to_json(cert.witness) if cert.witness is not None else None,
            "witness_cert": cert_to_json(cert.witness_cert) if cert.witness_cert is not None else None}


# element chains ---------------------------------------------------------------

def elements_from_json(obj):
    """{n, k, terms: [{coeff, point, kvec: {grade, coeffs}, dvecs}]}"""
    _need(obj, "n", "k", "terms")
    n, k = _int(obj["n"], "n"), _int(obj["k"], "k")
    terms = []
    for t in obj["terms"]:
        _need(t, "point", "kvec")
        kv = t["kvec"]
        if _int(kv.get("grade", k), "grade") != k:
            raise InputError("element grade does not match the chain")
        coeffs = np.asarray(kv["coeffs"], dtype=float)
        if coeffs.shape != (comb(n, k),):
            raise InputError(f"k-vector needs {comb(n, k)} coefficients")
        point = np.asarray(t["point"], dtype=float)
        if point.shape != (n,):
            raise InputError(f"point must have {n} coordinates")
        dv = np.asarray(t.get("dvecs", []), dtype=float).reshape(-1, n)
        terms.append(ElementTerm(float(t.get("coeff", 1.0)), point, KVector(n, k, coeffs), dv))
    return ElementChain.from_terms(n, k, terms)


def elements_to_json(E):
    return {"n": E.n, "k": E.k,
            "terms": [{"coeff": t.coeff, "point": t.point.tolist(),
                       "kvec": {"grade": E.k, "coeffs": t.kvec.coeffs.tolist()},
                       "dvecs": t.dvecs.tolist()} for t in E]}


# cubes -------------------------------------------------------------------------

def cube_from_json(obj):
    """{cube: {origin, edge, axes (1-based, optional), coeff}}"""
    c = obj["cube"]
    _need(c, "origin")
    axes = c.get("axes")
    if axes is not None:
        axes = [_int(a, "axis") - 1 for a in axes]
    return Cube(np.asarray(c["origin"], dtype=float), c.get("edge", 1.0), axes,
                float(c.get("coeff", 1.0)))


# dispatch ------------------------------------------------------------------------

def parse_object(obj):
    """Decode a chain-like JSON object by its shape."""
    if not isinstance(obj, dict):
        raise InputError("expected a JSON object")
    if "cube" in obj:
        return cube_from_json(obj)
    if "differences" in obj or "witness" in obj:
        return cert_from_json(obj)
    terms = obj.get("terms")
    if terms is None:
        raise InputError("unrecognized JSON object")
    if not terms:
        kind = obj.get("kind", "polychain")
        return ElementChain(int(obj["n"]), int(obj["k"])) if kind == "elements" \
            else polychain_from_json(obj)
    if "vertices" in terms[0]:
        return polychain_from_json(obj)
    if "point" in terms[0]:
        return elements_from_json(obj)
    if "H" in terms[0]:
        return form_from_json(obj)
    raise InputError("unrecognized term layout")


def load(path):
    try:
        obj = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    return parse_object(obj)


def to_json(x):
    if isinstance(x, PolyForm):
        return form_to_json(x)
    if isinstance(x, PolyChain):
        return polychain_to_json(x)
    if isinstance(x, ElementChain):
        return dict(kind="elements", **elements_to_json(x))
    if isinstance(x, DecompositionCert):
        return cert_to_json(x)
    if isinstance(x, DifferenceCell):
        return cell_to_json(x)
    if hasattr(x, "to_json"):
        return x.to_json()
    raise TypeError(f"no JSON encoding for {type(x).__name__}")


def dump(x, path):
    Path(path).write_text(json.dumps(to_json(x), indent=2))
