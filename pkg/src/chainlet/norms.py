"""Brackets for the r-natural norm of polyhedral and element chains.

Upper bounds come from decomposition certificates, lower bounds from pairing
against test forms whose B^r norms are bounded from above. The true infimum is
never computed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .elements import ElementChain
from .errors import CertificateMismatch, ContractViolation, NotSimple
from .exterior import KVector, simple_frame
from .forms import DifferentialForm, PolyForm, estimate_form_norm, form_norm_upper, monomial_forms
from .polyhedral import DecompositionCert, PolyChain, expand_weighted

REASSEMBLY_DEGREE = 3
REASSEMBLY_RTOL = 1e-9


# regions -------------------------------------------------------------------

def _merge_boxes(boxes, n):
    boxes = [b for b in boxes if b is not None]
    if not boxes:
        return np.zeros(n), np.zeros(n)
    lo = np.min([b[0] for b in boxes], axis=0)
    hi = np.max([b[1] for b in boxes], axis=0)
    return lo, hi


def _chain_box(A):
    if len(A) == 0:
        return None
    return A.bbox()


def cert_region(P, cert=None):
    """Axis box containing P and every piece (translates included) of a certificate."""
    boxes = [_chain_box(P)]
    if cert is not None:
        for _, cell in cert.differences:
            boxes.append(_chain_box(cell.base))
            boxes.append(_chain_box(cell.expand()))
        if cert.witness is not None:
            boxes.append(cert_region(cert.witness, cert.witness_cert))
    return _merge_boxes(boxes, P.n)


def pad_region(region, margin=0.25, minimum=0.5):
    """Grow a box by ``margin`` of its width on every side, with a minimum half-width."""
    lo, hi = (np.asarray(x, dtype=float) for x in region)
    c, hw = (lo + hi) / 2, (hi - lo) / 2
    hw = np.maximum(hw + margin * float(np.max(hi - lo)), minimum)
    return c - hw, c + hw


# form dictionaries -------------------------------------------------------------

def form_label(H, e):
    mono = "*".join(f"x{i + 1}^{p}" for i, p in enumerate(e) if p) or "1"
    cov = "^".join(f"dx{h + 1}" for h in H) or "1"
    return f"{mono} {cov}"


@dataclass
class FormDictionary:
    """Test forms with certified upper bounds on |omega|_r over a region.

    ``norms[i][r]`` bounds |forms[i]|_r from above on ``region``. Forms are
    monomials centered at the region center and scaled by its half-width.
    """

    n: int
    k: int
    region: tuple
    labels: list
    forms: list
    norms: list
    r_max: int
    reports: list = field(default_factory=list)

    @classmethod
    def default(cls, n, k, region, degree=2, r_max=2, sampled=False):
        """All monomial-coefficient forms of degree <= ``degree`` on every basis covector.

        Args:
            n, k: dimension and form degree.
            region: (lo, hi) axis box; norms are taken over this box.
            degree: top polynomial degree.
            r_max: highest level with precomputed norms.
            sampled: also store sampled FormNormReports (slow for n >= 3).
        """
        lo, hi = (np.asarray(x, dtype=float) for x in region)
        c = (lo + hi) / 2
        hw = max(float(np.max(hi - lo)) / 2, 1e-12)
        labels, forms, norms, reports = [], [], [], []
        for (H, e), w in monomial_forms(n, k, degree, center=c):
            w = w * (1.0 / hw ** sum(e))
            nr = [form_norm_upper(w, r, (lo, hi)) for r in range(r_max + 1)]
            if min(nr) <= 0 or not all(math.isfinite(x) for x in nr):
                continue
            labels.append(form_label(H, e))
            forms.append(w)
            norms.append(nr)
            if sampled:
                reports.append(estimate_form_norm(w, r_max, (lo, hi)))
        return cls(n, k, (tuple(lo), tuple(hi)), labels, forms, norms, r_max, reports)

    def __len__(self):
        return len(self.forms)

    def __iter__(self):
        return iter(zip(self.labels, self.forms, self.norms))

    def contains(self, box, tol=1e-12):
        lo, hi = self.region
        return bool(np.all(np.asarray(box[0]) >= np.asarray(lo) - tol)
                    and np.all(np.asarray(box[1]) <= np.asarray(hi) + tol))


def generating_forms(n, k, region, degree=REASSEMBLY_DEGREE):
    """Scaled monomial forms used to test chain equality by integration."""
    lo, hi = (np.asarray(x, dtype=float) for x in region)
    c = (lo + hi) / 2
    hw = max(float(np.max(hi - lo)) / 2, 1e-12)
    return [(form_label(H, e), w * (1.0 / hw ** sum(e)))
            for (H, e), w in monomial_forms(n, k, degree, center=c)]


# brackets ----------------------------------------------------------------------

@dataclass
class NormBracket:
    r: int
    lower: float
    upper: float
    lower_witness: str | None = None
    upper_witness: object = None

    def __post_init__(self):
        if not (math.isfinite(self.lower) and math.isfinite(self.upper)):
            raise ContractViolation("bracket ends must be finite")

    @property
    def consistent(self):
        return self.lower <= self.upper + 1e-12

    @property
    def slack(self):
        return self.upper - self.lower

    def to_json(self):
        up = self.upper_witness
        if isinstance(up, DecompositionCert):
            up = describe_cert(up)
        return {"r": self.r, "lower": self.lower, "upper": self.upper,
                "witnesses": {"lower": self.lower_witness, "upper": up}}


def describe_cert(cert):
    out = {"differences": [{"coeff": float(a), "order": cell.order,
                            "norm": float(abs(a) * cell.norm())} for a, cell in cert.differences]}
    if cert.witness is not None:
        out["witness_mass"] = cert.witness.mass()
        out["witness_cert"] = (describe_cert(cert.witness_cert)
                               if cert.witness_cert is not None else None)
    return out


def reassembled(cert, n, k):
    """The chain sum_j D^j + boundary(C) a certificate claims to equal."""
    out = expand_weighted(n, k, cert.differences)
    if cert.witness is not None:
        out = out + cert.witness.boundary()
    return out


def check_reassembly(P, cert, degree=REASSEMBLY_DEGREE):
    """Max integral residual of P minus the certificate's reassembly over generating forms.

    Raises CertificateMismatch when the residual exceeds the relative tolerance.
    """
    Q = reassembled(cert, P.n, P.k)
    region = cert_region(P, cert)
    diff = P - Q
    worst, where = 0.0, None
    for label, w in generating_forms(P.n, P.k, region, degree):
        val = abs(diff.integrate(w))
        if val > worst:
            worst, where = val, label
    scale = max(1.0, P.mass() + Q.mass())
    if worst > REASSEMBLY_RTOL * scale:
        raise CertificateMismatch(f"certificate does not reassemble the chain "
                                  f"(residual {worst:.3e} against {where})", worst)
    if cert.witness is not None and cert.witness_cert is not None:
        worst = max(worst, check_reassembly(cert.witness, cert.witness_cert, degree))
    return worst


def natural_upper(P, cert=None, r=1, check=True):
    """Upper bound on |P|^{natural_r} from a decomposition certificate.

    Args:
        P: a PolyChain.
        cert: DecompositionCert with P = sum D^j + bd(C); None uses the trivial one.
        r: norm level; r = 0 returns the mass.
        check: verify the reassembly by integration first.
    """
    if r < 0:
        raise ContractViolation("norm level must be non-negative")
    if cert is None or r == 0:
        return P.mass()
    if check:
        check_reassembly(P, cert)
    return _cert_value(cert, r)


def _cert_value(cert, r):
    total = 0.0
    for a, cell in cert.differences:
        if cell.order > r:
            raise ContractViolation(f"order-{cell.order} difference exceeds level {r}")
        total += abs(a) * cell.norm()
    C = cert.witness
    if C is not None:
        if r == 0:
            raise ContractViolation("level 0 admits no boundary witness")
        if cert.witness_cert is not None and r - 1 >= 1:
            total += _cert_value(cert.witness_cert, r - 1)
        else:
            total += C.mass()
    return float(total)


def best_upper(P, certs=(), r=1, check=True):
    """Smallest certificate value over the trivial certificate and ``certs``."""
    best, witness = P.mass(), DecompositionCert.trivial(P)
    for cert in certs:
        try:
            val = natural_upper(P, cert, r, check=check)
        except ContractViolation:
            continue
        if val < best:
            best, witness = val, cert
    return best, witness


def vec_aligned_form(A):
    """Constant form dual to Vec(A), normalized; None when Vec(A) vanishes."""
    v = A.vec()
    m = float(np.linalg.norm(v.coeffs))
    if m == 0.0:
        return None
    return PolyForm.constant(A.n, A.k, v.coeffs / m)


def natural_lower(A, r, dictionary=None, margin=0.25):
    """Lower bound max |int_A w| / |w|_r over a form dictionary.

    The Vec-aligned constant form (norm exactly 1) is always included.

    Args:
        A: PolyChain or ElementChain.
        r: level; must cover the chain's element order.
        dictionary: FormDictionary; default monomials of degree <= 2 on a
            padded bounding box of A.
    """
    best, label = _lower(A, r, dictionary, margin)
    return best


def _lower(A, r, dictionary=None, margin=0.25):
    if isinstance(A, ElementChain) and A.order > r:
        raise ContractViolation(f"level {r} cannot pair order-{A.order} elements")
    if len(A) == 0:
        return 0.0, None
    if dictionary is None:
        dictionary = FormDictionary.default(A.n, A.k, pad_region(A.bbox(), margin), r_max=r)
    elif dictionary.r_max < r:
        raise ContractViolation("dictionary lacks norms at this level")
    if (dictionary.n, dictionary.k) != (A.n, A.k):
        raise ContractViolation("dictionary dimension or degree does not match the chain")
    best, label = 0.0, None
    w = vec_aligned_form(A)
    if w is not None:
        best, label = abs(A.integrate(w)), "Vec-aligned constant"
    for lab, w, nr in dictionary:
        val = abs(A.integrate(w)) / nr[r]
        if val > best:
            best, label = val, lab
    return float(best), label


def bracket(A, r, certs=(), dictionary=None, check=True):
    """A NormBracket (lower, upper) for a PolyChain or ElementChain at level r."""
    if isinstance(A, ElementChain):
        upper, witness = element_norm_upper(A, r, return_pairs=True)
        region = A.bbox()
    else:
        upper, witness = best_upper(A, certs, r, check=check)
        region = cert_region(A, witness)
    if dictionary is None and len(A):
        dictionary = FormDictionary.default(A.n, A.k, pad_region(region), r_max=max(r, 0))
    lower, label = _lower(A, r, dictionary)
    return NormBracket(r, lower, upper, label, witness)


# element chains ----------------------------------------------------------------

def kvector_mass_upper(coeffs, n, k):
    """Mass bound: Euclidean norm for simple k-vectors, l1 norm otherwise."""
    e = float(np.linalg.norm(coeffs))
    if e == 0.0 or k in (0, 1, n - 1, n):
        return e
    try:
        simple_frame(KVector(n, k, coeffs))
        return e
    except NotSimple:
        return float(np.sum(np.abs(coeffs)))


def element_norm_upper(E, r, pair=True, return_pairs=False):
    """Upper bound on the discrete natural norm of an element chain.

    Each order-s term costs |coeff| M(kvec) prod|u_i|. With ``pair``, terms of
    order s < r with parallel kvecs, equal difference vectors and opposite
    signs are matched greedily by nearest support point; a matched pair
    c (a_p - a_q) costs |c| M(a) |p - q| prod|u_i| instead of 2|c| M(a) prod|u_i|.
    """
    if E.order > r:
        raise ContractViolation(f"level {r} cannot see order-{E.order} terms")
    total, pairs = 0.0, []
    for s, b in E.blocks.items():
        cost = np.array([kvector_mass_upper(b.coeffs[i] * b.kvecs[i], E.n, E.k)
                         for i in range(b.coeffs.shape[0])])
        scale = np.prod(np.linalg.norm(b.dvecs, axis=2), axis=1) if s else np.ones(len(cost))
        if not pair or s >= r:
            total += float(np.sum(cost * scale))
            continue
        val, used = _greedy_pairs(b, cost, scale)
        total += val
        pairs.extend((s, i, j) for i, j in used)
    total = float(total)
    if return_pairs:
        return total, {"pairs": pairs}
    return total


def _greedy_pairs(b, cost, scale):
    m = len(cost)
    w = b.coeffs[:, None] * b.kvecs
    mags = np.linalg.norm(w, axis=1)
    unit = np.where(mags[:, None] > 0, w / np.where(mags > 0, mags, 1.0)[:, None], 0.0)
    remaining = cost.copy()
    cands = []
    for i in range(m):
        for j in range(i + 1, m):
            if mags[i] == 0 or mags[j] == 0:
                continue
            if not np.allclose(unit[i], -unit[j], atol=1e-9):
                continue
            if not np.allclose(b.dvecs[i], b.dvecs[j], atol=1e-12):
                continue
            dist = float(np.linalg.norm(b.points[i] - b.points[j]))
            if dist < 2.0:
                cands.append((dist, i, j))
    cands.sort()
    used = []
    total = 0.0
    for dist, i, j in cands:
        c = min(remaining[i], remaining[j])
        if c <= 0:
            continue
        # c (a_p - a_q) as one order-(s+1) difference instead of two singles
        total += c * dist * scale[i]
        remaining[i] -= c
        remaining[j] -= c
        used.append((i, j))
    total += float(np.sum(remaining * scale))
    return total, used


# integral inequality ---------------------------------------------------------------

@dataclass
class InequalityReport:
    r: int
    integral: float
    chain_upper: float
    form_norm: float
    bound: float
    certified: bool
    region: tuple

    @property
    def violated(self):
        return abs(self.integral) > self.bound * (1 + 1e-12) + 1e-12

    @property
    def slack(self):
        return self.bound - abs(self.integral)


def form_norm_on(w, r, region):
    """Upper bound of |w|_r on a box: rigorous for polynomial forms, sampled otherwise."""
    lo, hi = (np.asarray(x, dtype=float) for x in region)
    if np.any(hi - lo <= 0):
        lo, hi = lo - 1e-9, hi + 1e-9
    if isinstance(w, PolyForm):
        return form_norm_upper(w, r, (lo, hi)), True
    return estimate_form_norm(w, r, (lo, hi)).combined, False


def check_integral_inequality(P, w, r, certs=(), check=True):
    """Compare |int_P w| with (upper bracket of P) * |w|_r on the certificate region.

    Args:
        P: PolyChain or ElementChain.
        w: DifferentialForm of degree P.k.
        r: level.
        certs: candidate DecompositionCerts for a PolyChain.
    """
    if not isinstance(w, DifferentialForm) or w.k != P.k:
        raise ContractViolation("form degree must match chain grade")
    if isinstance(P, ElementChain):
        upper = element_norm_upper(P, r)
        region = P.bbox()
    else:
        upper, cert = best_upper(P, certs, r, check=check)
        region = cert_region(P, cert)
    if len(P) == 0:
        return InequalityReport(r, 0.0, 0.0, 0.0, 0.0, True, region)
    norm, certified = form_norm_on(w, r, region)
    lhs = float(P.integrate(w))
    return InequalityReport(r, lhs, upper, norm, upper * norm, certified,
                            (tuple(region[0]), tuple(region[1])))
