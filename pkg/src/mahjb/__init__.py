"""Mixed finite elements for the Monge-Ampere equation via a regularized
Hamilton-Jacobi-Bellman reformulation on the unit square."""
from .hjb import cordes_constants, f_eps, f_gamma_eps
from .mesh import Mesh, mesh_hierarchy, refine_uniform, unit_square_mesh
from .problems import get_problem
from .solver import NewtonConfig, continuation_solve, newton_solve

__all__ = [
    "Mesh", "NewtonConfig", "continuation_solve", "cordes_constants", "f_eps",
    "f_gamma_eps", "get_problem", "mesh_hierarchy", "newton_solve",
    "refine_uniform", "unit_square_mesh",
]
__version__ = "0.1.0"
