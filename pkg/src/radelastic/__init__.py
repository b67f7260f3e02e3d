"""Radially symmetric quadratic elastic waves: null-form tensor, energies, solver."""
from .nullform import CoefficientSet, NullFormTensor, VectorJet2, build_tensor
from .radialfield import RadialGrid, RadialProfile, StateVector, WeightSpec

__version__ = "0.1.0"

__all__ = [
    "CoefficientSet",
    "NullFormTensor",
    "VectorJet2",
    "build_tensor",
    "RadialGrid",
    "RadialProfile",
    "StateVector",
    "WeightSpec",
]
