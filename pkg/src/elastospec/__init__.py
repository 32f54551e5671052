"""Least-squares three-field elasticity eigenvalue laboratory.

Discretizes the stress/displacement/rotation least-squares formulation of
2D linear elasticity (RT0 x vector P1 x DG0), reduces it to a
displacement-sized generalized eigenvalue pencil, and provides the
spectral experiment drivers: convergence rates, spectrum spread in the
complex plane, and eigenfunction recovery.
"""

from .assemble import BlockSystem, assemble_blocks, compliance_apply
from .dof import DofMap, ElasticParams, build_dofmap
from .mesh import TriMesh, generate_lshape, generate_square
from .reduce import SchurPencil, build_schur_pencil, eliminate_rotation, recover_fields
from .spectrum import (ReferenceEigen, Spectrum, count_in_disk, estimate_rate,
                       primal_oracle, smallest_modulus_eigs, solve_pencil)

__all__ = [
    "BlockSystem", "DofMap", "ElasticParams", "ReferenceEigen", "SchurPencil",
    "Spectrum", "TriMesh", "assemble_blocks", "build_dofmap",
    "build_schur_pencil", "compliance_apply", "count_in_disk", "eliminate_rotation",
    "estimate_rate", "generate_lshape", "generate_square", "primal_oracle",
    "recover_fields", "smallest_modulus_eigs", "solve_pencil",
]

__version__ = "0.1.0"
