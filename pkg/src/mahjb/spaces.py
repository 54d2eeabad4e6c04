"""Constrained P1 Lagrange spaces on a :class:`~mahjb.mesh.Mesh`.

``ScalarDofMap`` realises the continuous piecewise linears with zero trace;
``VectorDofMap`` realises vector fields whose tangential trace vanishes.  On a
non-corner boundary vertex only the component along the outward normal of the
side is free; corner vertices carry the zero vector.

Both maps expose a sparse *extension* matrix ``P`` from free coefficients to
full nodal values (``nv`` rows for scalars, ``2 nv`` rows ordered
``(v0.x, v0.y, v1.x, ...)`` for vectors).  Its columns are orthonormal, so
``P.T`` recovers the coefficients of any admissible nodal field and
``P.T @ K @ P`` restricts a full nodal matrix.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .mesh import EDGE, INTERIOR, SIDE_NORMALS, Mesh

CONSTRAINED = -1


def p1_geometry(mesh: Mesh) -> tuple[np.ndarray, np.ndarray]:
    """Triangle areas (nt,) and barycentric gradients (nt, 3, 2)."""
    p = mesh.vertices[mesh.triangles]
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    # gradients of lambda_1, lambda_2 from the inverse Jacobian
    g1 = np.stack([e2[:, 1], -e2[:, 0]], axis=1) / det[:, None]
    g2 = np.stack([-e1[:, 1], e1[:, 0]], axis=1) / det[:, None]
    grads = np.stack([-g1 - g2, g1, g2], axis=1)
    return 0.5 * det, grads


@dataclass(frozen=True, eq=False)
class ScalarDofMap:
    mesh: Mesh
    free_dofs: np.ndarray
    vertex_dof: np.ndarray
    extension: sp.csr_matrix = field(repr=False)

    @property
    def ndof(self) -> int:
        return self.free_dofs.size


@dataclass(frozen=True, eq=False)
class VectorDofMap:
    mesh: Mesh
    vertex_kind: np.ndarray
    extension: sp.csr_matrix = field(repr=False)

    @property
    def ndof(self) -> int:
        return self.extension.shape[1]


def build_scalar_space(mesh: Mesh) -> ScalarDofMap:
    free = mesh.interior_vertices
    vertex_dof = np.full(mesh.n_vertices, CONSTRAINED)
    vertex_dof[free] = np.arange(free.size)
    P = sp.csr_matrix(
        (np.ones(free.size), (free, np.arange(free.size))),
        shape=(mesh.n_vertices, free.size),
    )
    return ScalarDofMap(mesh, free, vertex_dof, P)


def build_vector_space(mesh: Mesh) -> VectorDofMap:
    kind = mesh.boundary_class
    nfree = np.select([kind == INTERIOR, kind == EDGE], [2, 1], 0)
    offset = np.cumsum(nfree) - nfree

    iv = np.flatnonzero(kind == INTERIOR)
    ev = np.flatnonzero(kind == EDGE)
    normals = SIDE_NORMALS[mesh.boundary_side[ev]]
    comp = np.argmax(np.abs(normals), axis=1)  # sides are axis aligned

    rows = np.concatenate([2 * iv, 2 * iv + 1, 2 * ev + comp])
    cols = np.concatenate([offset[iv], offset[iv] + 1, offset[ev]])
    vals = np.concatenate([np.ones(2 * iv.size), normals[np.arange(ev.size), comp]])
    P = sp.csr_matrix(
        (vals, (rows, cols)), shape=(2 * mesh.n_vertices, int(nfree.sum()))
    )
    return VectorDofMap(mesh, kind, P)


@dataclass(eq=False)
class DiscreteScalar:
    """P1 function ``lift + P @ coefficients``; ``lift`` carries boundary data."""

    space: ScalarDofMap
    coefficients: np.ndarray
    lift: np.ndarray | None = None

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=float)
        if self.coefficients.shape != (self.space.ndof,):
            raise ValueError("coefficient length does not match the dof count")

    def nodal_values(self) -> np.ndarray:
        vals = self.space.extension @ self.coefficients
        return vals if self.lift is None else vals + self.lift


@dataclass(eq=False)
class DiscreteVector:
    space: VectorDofMap
    coefficients: np.ndarray

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=float)
        if self.coefficients.shape != (self.space.ndof,):
            raise ValueError("coefficient length does not match the dof count")

    def nodal_values(self) -> np.ndarray:
        """Nodal vectors, shape (nv, 2)."""
        return (self.space.extension @ self.coefficients).reshape(-1, 2)

    @classmethod
    def from_nodal(cls, space: VectorDofMap, nodal: np.ndarray) -> "DiscreteVector":
        """Coefficients of an admissible nodal field (constrained parts are dropped)."""
        return cls(space, space.extension.T @ np.asarray(nodal, float).reshape(-1))


def element_gradients(field: DiscreteScalar | DiscreteVector) -> np.ndarray:
    """Piecewise constant gradients of a P1 field.

    Returns shape (nt, 2) for scalar fields and the Jacobians (nt, 2, 2) for
    vector fields, row ``i`` holding the gradient of component ``i``.
    """
    mesh = field.space.mesh
    _, grads = p1_geometry(mesh)
    nodal = field.nodal_values()[mesh.triangles]
    if isinstance(field, DiscreteScalar):
        return np.einsum("tk,tkj->tj", nodal, grads)
    return np.einsum("tki,tkj->tij", nodal, grads)


def element_gradient(field: DiscreteScalar | DiscreteVector, triangle: int) -> np.ndarray:
    mesh = field.space.mesh
    if not 0 <= triangle < mesh.n_triangles:
        raise IndexError(f"triangle {triangle} out of range")
    return element_gradients(field)[triangle]


def div_rot(jacobians: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Divergence and scalar rotation from Jacobians ``D w`` (..., 2, 2)."""
    div = jacobians[..., 0, 0] + jacobians[..., 1, 1]
    rot = jacobians[..., 1, 0] - jacobians[..., 0, 1]
    return div, rot


def interpolate_scalar(mesh: Mesh, fn) -> np.ndarray:
    """Nodal values of ``fn`` evaluated at the mesh vertices."""
    return np.asarray(fn(mesh.vertices), dtype=float)
