"""Exterior algebra, polynomial forms, polyhedral and element chains, natural-norm brackets."""
from .elements import ElementChain, random_element_chain
from .errors import (CertificateMismatch, ChainletError, ContractViolation, FlowError,
                     InsufficientOrder, NotSimple, UnsupportedGrade, UnsupportedOrder)
from .exterior import KVector, LinearMap, hodge_star, inner, mass, wedge
from .forms import CallableForm, PolyForm, SmoothMap, pullback_form
from .norms import NormBracket, bracket, natural_lower, natural_upper
from .polyhedral import DecompositionCert, DifferenceCell, PolyChain, Simplex, cube, simplex_chain
from .polynomial import Polynomial
from .quantize import Cube, element_monopole, quantize_cube, quantize_polygon, quantize_simplex

__version__ = "0.1.0"

__all__ = [
    "CallableForm", "CertificateMismatch", "ChainletError", "ContractViolation", "Cube",
    "DecompositionCert", "DifferenceCell", "ElementChain", "FlowError", "InsufficientOrder",
    "KVector", "LinearMap", "NormBracket", "NotSimple", "PolyChain", "PolyForm", "Polynomial",
    "Simplex", "SmoothMap", "UnsupportedGrade", "UnsupportedOrder", "bracket", "cube",
    "element_monopole", "hodge_star", "inner", "mass", "natural_lower", "natural_upper",
    "pullback_form", "quantize_cube", "quantize_polygon", "quantize_simplex",
    "random_element_chain", "simplex_chain", "wedge",
]
