"""Finite-scale constructions of orthonormal families with prescribed matrix entries."""

from basisforge.builder import (
    BuildParams,
    budget,
    build_density,
    build_full,
    build_sparse,
    build_sparse_zero_diag,
    build_subdiagonal,
)
from basisforge.config import Tolerances
from basisforge.hilbert import OrthoFrame, Subspace, inner, project_complement, random_unit_in
from basisforge.operators import (
    EssentialDescriptor,
    ModelOperator,
    OperatorTuple,
    make_diagonal,
    make_inverse_power_tuple,
    make_power_tuple,
    make_shift,
    make_two_circle,
)
from basisforge.patterns import Pattern, TargetArray
from basisforge.verify import census, verify

__all__ = [
    "BuildParams",
    "EssentialDescriptor",
    "ModelOperator",
    "OperatorTuple",
    "OrthoFrame",
    "Pattern",
    "Subspace",
    "TargetArray",
    "Tolerances",
    "budget",
    "build_density",
    "build_full",
    "build_sparse",
    "build_sparse_zero_diag",
    "build_subdiagonal",
    "census",
    "inner",
    "make_diagonal",
    "make_inverse_power_tuple",
    "make_power_tuple",
    "make_shift",
    "make_two_circle",
    "project_complement",
    "random_unit_in",
    "verify",
]
