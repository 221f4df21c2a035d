"""Equivariant linear maps for hierarchical and product permutation symmetries."""

from .basis import (
    CommutantBasis,
    SharingPattern,
    burnside_count,
    commutant_basis,
    kron_pattern,
    materialize,
    orbit_pattern,
    pattern_of_structure,
    wreath_pattern,
)
from .perm import (
    PermGroup,
    Permutation,
    compose,
    cyclic_group,
    direct_product_group,
    enumerate_group,
    identity,
    inverse,
    perm_to_matrix,
    symmetric_group,
    trivial_group,
    wreath_product_group,
)
from .structure import (
    Cycle,
    Prod,
    Set,
    Structure,
    Trivial,
    Wreath,
    format_structure,
    group_of,
    param_count,
    parse_structure,
)

__version__ = "0.1.0"

__all__ = [
    "CommutantBasis",
    "Cycle",
    "PermGroup",
    "Permutation",
    "Prod",
    "Set",
    "SharingPattern",
    "Structure",
    "Trivial",
    "Wreath",
    "burnside_count",
    "commutant_basis",
    "compose",
    "cyclic_group",
    "direct_product_group",
    "enumerate_group",
    "format_structure",
    "group_of",
    "identity",
    "inverse",
    "kron_pattern",
    "materialize",
    "orbit_pattern",
    "param_count",
    "parse_structure",
    "pattern_of_structure",
    "perm_to_matrix",
    "symmetric_group",
    "trivial_group",
    "wreath_product_group",
]
