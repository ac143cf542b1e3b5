"""Numerical cohomology of expanding maps.

Decide whether an observable ``f`` is a coboundary ``f = h o T - h`` over an
expanding map ``T`` and reconstruct ``h``, through the leading eigendata of
the twisted transfer operators ``L_t phi = L(exp(i t f) phi)``.
"""
__version__ = "0.1.0"

from .basis import FourierBasis, UlamBasis, project
from .coboundary import detect, periodic_obstructions, recover, verify
from .maps import AnalyticCircleMap, BetaTransformation, TsujiiSkewProduct, periodic_points
from .spectral import TwistedFamily, leading_eigen
from .transfer import assemble, assemble_twisted
from .vexp import certify, criterion_value, min_expanding_m

__all__ = [
    "AnalyticCircleMap",
    "BetaTransformation",
    "TsujiiSkewProduct",
    "FourierBasis",
    "UlamBasis",
    "TwistedFamily",
    "assemble",
    "assemble_twisted",
    "certify",
    "criterion_value",
    "detect",
    "leading_eigen",
    "min_expanding_m",
    "periodic_obstructions",
    "periodic_points",
    "project",
    "recover",
    "verify",
]
