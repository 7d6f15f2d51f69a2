"""Quantum lens spaces L_q(l; 1, l): normal forms, operator models, groupoid and K-theory."""
from .expr import NormalForm, normalize, parse
from .groupoid import GElement, convolve, embed_normalform, involve
from .models import KInvariant, RepParams, RunConfig
from .modules import canonical_projection, k_invariant, line_bundle_projection
from .structure import symbol

__version__ = "0.1.0"
__all__ = [
    "GElement",
    "KInvariant",
    "NormalForm",
    "RepParams",
    "RunConfig",
    "canonical_projection",
    "convolve",
    "embed_normalform",
    "involve",
    "k_invariant",
    "line_bundle_projection",
    "normalize",
    "parse",
    "symbol",
]
