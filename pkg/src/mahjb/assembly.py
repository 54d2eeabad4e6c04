"""Assembly of the semilinear form, its semismooth Newton derivative and the
Poisson post-processing system.

For ``w, z`` in the vector space ``W_h``

    a(w, z) = -int F_g,eps(f; x, D(w + grad g)) div z dx + sigma int rot w rot z dx

and the generalized derivative used by Newton is

    B(dw, z) = int gamma(A*) (A* : D dw) div z dx + sigma int rot dw rot z dx

with ``A*`` the maximizing control of the scaled operator at each quadrature
point.  ``D(w + grad g)`` is evaluated as ``D w|_T + hess_g(x_q)``.

Everything is assembled over the full nodal component space (``2 nv``) and
restricted with the dof map's extension matrix.
"""
from __future__ import annotations

import logging
import weakref
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .hjb import cordes_constants, f_gamma_eps
from .problems import ProblemSpec
from .quadrature import NONLINEAR_RULE, QuadratureRule
from .spaces import DiscreteVector, ScalarDofMap, VectorDofMap, p1_geometry

logger = logging.getLogger(__name__)


class InvalidDataError(ValueError):
    """Problem data is not admissible at a quadrature point."""


class CacheMismatchError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ElementData:
    """Geometry of a mesh combined with a quadrature rule."""

    area: np.ndarray  # (nt,)
    grads: np.ndarray  # (nt, 3, 2) barycentric gradients
    points: np.ndarray  # (nt, nq, 2)
    weights: np.ndarray  # (nt, nq) physical weights
    div_basis: np.ndarray  # (nt, 3, 2): div of phi_k e_j
    rot_basis: np.ndarray  # (nt, 3, 2): rot of phi_k e_j
    vector_dofs: np.ndarray  # (nt, 6): nodal component index 2 v + j


_element_cache: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()


def element_data(mesh, quad: QuadratureRule) -> ElementData:
    per_mesh = _element_cache.setdefault(mesh, {})
    data = per_mesh.get(quad)
    if data is None:
        area, grads = p1_geometry(mesh)
        points = quad.points(mesh.vertices, mesh.triangles)
        weights = 2.0 * area[:, None] * quad.weights[None, :]
        rot = np.stack([-grads[:, :, 1], grads[:, :, 0]], axis=2)
        dofs = (2 * mesh.triangles[:, :, None] + np.arange(2)).reshape(-1, 6)
        data = per_mesh[quad] = ElementData(area, grads, points, weights, grads, rot, dofs)
    return data


def evaluate_f(p: ProblemSpec, points: np.ndarray) -> np.ndarray:
    """Right-hand side at quadrature points; rejects negative or non-finite values."""
    fq = np.asarray(p.f(points), dtype=float)
    bad = ~(np.isfinite(fq) & (fq >= 0.0))
    if np.any(bad):
        where = points[bad][0]
        raise InvalidDataError(
            f"example {p.id}: f = {fq[bad][0]!r} is not admissible at "
            f"quadrature point ({where[0]:.17g}, {where[1]:.17g})"
        )
    return fq


@dataclass(eq=False)
class AssembledResidual:
    vector: np.ndarray
    values: np.ndarray  # (nt, nq) operator values
    gamma_control: np.ndarray  # (nt, nq, 2, 2): gamma(A*) A*
    eps: float
    space: VectorDofMap
    quad: QuadratureRule

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.vector))


def assemble_residual(
    w: DiscreteVector, p: ProblemSpec, eps: float, quad: QuadratureRule = NONLINEAR_RULE
) -> AssembledResidual:
    """Residual vector ``r_i = a(w, z_i)`` over the basis of ``W_h``."""
    space = w.space
    mesh = space.mesh
    ed = element_data(mesh, quad)
    sigma = cordes_constants(eps).sigma

    nodal = w.nodal_values()[mesh.triangles]  # (nt, 3, 2)
    Dw = np.einsum("tki,tkj->tij", nodal, ed.grads)
    M = Dw[:, None, :, :] + p.hess_g(ed.points)
    fq = evaluate_f(p, ed.points)
    ev = f_gamma_eps(fq, M, eps)

    F_int = np.sum(ed.weights * ev.value, axis=1)
    rot_w = Dw[:, 1, 0] - Dw[:, 0, 1]
    local = (
        -F_int[:, None, None] * ed.div_basis
        + (sigma * ed.area * rot_w)[:, None, None] * ed.rot_basis
    )
    full = np.bincount(
        ed.vector_dofs.ravel(), weights=local.reshape(-1), minlength=2 * mesh.n_vertices
    )
    gamma_control = ev.gamma[..., None, None] * ev.control
    return AssembledResidual(
        space.extension.T @ full, ev.value, gamma_control, float(eps), space, quad
    )


def _scatter_vector_matrix(space: VectorDofMap, ed: ElementData, local: np.ndarray) -> sp.csr_matrix:
    rows = np.repeat(ed.vector_dofs, 6, axis=1).ravel()
    cols = np.tile(ed.vector_dofs, (1, 6)).ravel()
    n = 2 * space.mesh.n_vertices
    K = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    P = space.extension
    J = (P.T @ K @ P).tocsr()
    J.sum_duplicates()
    J.sort_indices()
    return J


def assemble_jacobian(
    w: DiscreteVector,
    cache: AssembledResidual,
    p: ProblemSpec | None = None,
    eps: float | None = None,
    quad: QuadratureRule | None = None,
) -> sp.csr_matrix:
    """Semismooth Newton matrix ``J[i, j] = B(z_j, z_i)`` from a residual cache.

    ``p`` is accepted for interface symmetry with :func:`assemble_residual`;
    the derivative only needs the cached controls.
    """
    space = w.space
    if cache.space is not space:
        raise CacheMismatchError("residual cache belongs to a different space")
    if eps is not None and float(eps) != cache.eps:
        raise CacheMismatchError("residual cache was assembled for another eps")
    if quad is not None and quad is not cache.quad:
        raise CacheMismatchError("residual cache was assembled with another rule")
    mesh = space.mesh
    ed = element_data(mesh, cache.quad)
    if cache.gamma_control.shape[:2] != ed.weights.shape:
        raise CacheMismatchError("cache does not match the mesh")
    sigma = cordes_constants(cache.eps).sigma

    A_bar = np.einsum("tq,tqij->tij", ed.weights, cache.gamma_control)
    AG = np.einsum("tmc,tlc->tlm", A_bar, ed.grads)  # A_bar grad(lambda_l)
    local = np.einsum("tkj,tlm->tkjlm", ed.div_basis, AG)
    local += (sigma * ed.area)[:, None, None, None, None] * np.einsum(
        "tkj,tlm->tkjlm", ed.rot_basis, ed.rot_basis
    )
    return _scatter_vector_matrix(space, ed, local.reshape(-1, 6, 6))


def apply_form(
    w: DiscreteVector, z: DiscreteVector, p: ProblemSpec, eps: float,
    quad: QuadratureRule = NONLINEAR_RULE,
) -> float:
    """Scalar value ``a(w, z)``."""
    return float(assemble_residual(w, p, eps, quad).vector @ z.coefficients)


def stiffness_full(mesh) -> sp.csr_matrix:
    area, grads = p1_geometry(mesh)
    local = area[:, None, None] * np.einsum("tkd,tld->tkl", grads, grads)
    t = mesh.triangles
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    n = mesh.n_vertices
    K = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    K.sum_duplicates()
    return K


def assemble_poisson(vs: ScalarDofMap, quad: QuadratureRule | None = None) -> sp.csr_matrix:
    """P1 stiffness matrix on the zero-trace space (gradients are constant, so
    no quadrature is needed; ``quad`` is accepted for interface symmetry)."""
    P = vs.extension
    K = (P.T @ stiffness_full(vs.mesh) @ P).tocsr()
    K.sort_indices()
    return K


def poisson_rhs(
    w: DiscreteVector | None, p: ProblemSpec, vs: ScalarDofMap,
    quad: QuadratureRule = NONLINEAR_RULE,
) -> np.ndarray:
    """Load vector ``int (w_h + grad g) . grad v_i`` over the basis of ``V_h``."""
    mesh = vs.mesh
    ed = element_data(mesh, quad)
    vec = np.asarray(p.grad_g(ed.points), dtype=float)
    if w is not None:
        nodal = w.nodal_values()[mesh.triangles]
        vec = vec + np.einsum("qk,tkd->tqd", quad.barycentric, nodal)
    local = np.einsum("tq,tqd,tkd->tk", ed.weights, vec, ed.grads)
    full = np.bincount(mesh.triangles.ravel(), weights=local.ravel(), minlength=mesh.n_vertices)
    return vs.extension.T @ full
