"""Semismooth Newton solution of the discrete mixed problem.

The nonlinear equation ``a(w_h, z_h) = 0`` is solved first; ``u_h`` then
follows from the Poisson projection ``(grad u_h, grad v) = (w_h + grad g, grad v)``
with ``u_h = g`` at the boundary vertices.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import (
    assemble_jacobian,
    assemble_poisson,
    assemble_residual,
    poisson_rhs,
    stiffness_full,
)
from .hjb import _check_eps
from .mesh import Mesh
from .problems import ProblemSpec
from .quadrature import NONLINEAR_RULE, QuadratureRule
from .spaces import (
    DiscreteScalar,
    DiscreteVector,
    ScalarDofMap,
    VectorDofMap,
    build_scalar_space,
    build_vector_space,
)

logger = logging.getLogger(__name__)


class LinearSolveError(RuntimeError):
    pass


class NewtonConvergenceError(RuntimeError):
    def __init__(self, message: str, report: "NewtonReport"):
        super().__init__(message)
        self.report = report


@dataclass
class NewtonConfig:
    tol_abs: float = 1e-11
    tol_rel: float = 1e-10
    max_iter: int = 50
    safeguard: bool = True
    quad: QuadratureRule = field(default=NONLINEAR_RULE, repr=False)


@dataclass
class NewtonReport:
    iterations: int = 0
    residual_history: list[float] = field(default_factory=list)
    converged: bool = False
    eps: float = 0.5


@dataclass
class SolveOutput:
    w_h: DiscreteVector
    u_h: DiscreteScalar
    report: NewtonReport


def solve_linear(A: sp.spmatrix, b: np.ndarray, method: str = "direct") -> np.ndarray:
    """Solve ``A x = b``; ``method`` is ``"direct"`` (SuperLU) or ``"cg"``
    (Jacobi preconditioned, SPD matrices only)."""
    A = sp.csc_matrix(A)
    b = np.asarray(b, dtype=float)
    if A.shape[0] != A.shape[1] or A.shape[0] != b.shape[0]:
        raise ValueError(f"incompatible system: A {A.shape}, b {b.shape}")
    if A.shape[0] == 0:
        return np.zeros(0)
    if method == "direct":
        try:
            lu = spla.splu(A)
        except RuntimeError as exc:
            diag = np.abs(A.diagonal())
            raise LinearSolveError(
                f"sparse LU failed ({exc}); n = {A.shape[0]}, "
                f"min |diag| = {diag.min():.3e} at row {int(diag.argmin())}"
            ) from exc
        x = lu.solve(b)
        u_diag = np.abs(lu.U.diagonal())
        if not np.all(np.isfinite(x)) or u_diag.min() <= 1e-14 * u_diag.max():
            raise LinearSolveError(
                f"near-singular factorization: pivot ratio "
                f"{u_diag.min() / u_diag.max():.3e} at column {int(u_diag.argmin())}"
            )
        return x
    if method == "cg":
        d = A.diagonal()
        if np.any(d <= 0):
            raise LinearSolveError("cg needs a positive diagonal")
        precond = sp.diags(1.0 / d)
        x, info = spla.cg(A, b, rtol=1e-12, atol=0.0, M=precond, maxiter=10 * A.shape[0])
        if info != 0:
            raise LinearSolveError(f"cg breakdown or no convergence (info = {info})")
        return x
    raise ValueError(f"unknown method {method!r}")


def boundary_lift(p: ProblemSpec, vs: ScalarDofMap) -> np.ndarray:
    """Nodal vector equal to ``g`` at boundary vertices and zero inside."""
    mesh = vs.mesh
    lift = np.zeros(mesh.n_vertices)
    bnd = mesh.boundary_vertices
    lift[bnd] = p.g(mesh.vertices[bnd])
    return lift


def poisson_project(
    w_h: DiscreteVector | None,
    p: ProblemSpec,
    vs: ScalarDofMap,
    quad: QuadratureRule = NONLINEAR_RULE,
    method: str = "direct",
) -> DiscreteScalar:
    """``u_h`` in ``g_h + V_h`` with ``(grad u_h, grad v) = (w_h + grad g, grad v)``."""
    K = assemble_poisson(vs)
    lift = boundary_lift(p, vs)
    rhs = poisson_rhs(w_h, p, vs, quad) - vs.extension.T @ (stiffness_full(vs.mesh) @ lift)
    return DiscreteScalar(vs, solve_linear(K, rhs, method), lift)


def _linear_half_solve(p, space, cfg) -> DiscreteVector:
    """Solution of the eps = 1/2 problem (linear: the control set is {I/2})."""
    zero = DiscreteVector(space, np.zeros(space.ndof))
    res = assemble_residual(zero, p, 0.5, cfg.quad)
    J = assemble_jacobian(zero, res)
    return DiscreteVector(space, -solve_linear(J, res.vector))


def newton_solve(
    p: ProblemSpec,
    m: Mesh,
    eps: float,
    cfg: NewtonConfig | None = None,
    w0: DiscreteVector | None = None,
    spaces: tuple[VectorDofMap, ScalarDofMap] | None = None,
) -> SolveOutput:
    """Solve the discrete mixed problem on ``m`` for one regularization parameter.

    Without a warm start ``w0`` the iteration starts from the eps = 1/2
    solution; that linear solve is counted as the first iteration.
    Iterations use full steps.  With ``cfg.safeguard`` the step is halved
    (up to 20 times) once the residual has grown on three consecutive steps.
    """
    eps = float(_check_eps(eps))
    cfg = cfg or NewtonConfig()
    ws, vs = spaces if spaces is not None else (build_vector_space(m), build_scalar_space(m))
    report = NewtonReport(eps=eps)

    if w0 is None:
        w = _linear_half_solve(p, ws, cfg)
        report.iterations = 1
    else:
        if w0.space is not ws:
            w0 = DiscreteVector(ws, w0.coefficients)
        w = w0

    res = assemble_residual(w, p, eps, cfg.quad)
    report.residual_history.append(res.norm)
    tol = cfg.tol_abs + cfg.tol_rel * res.norm
    increases = 0
    while res.norm > tol:
        if report.iterations >= cfg.max_iter:
            raise NewtonConvergenceError(
                f"Newton did not converge in {cfg.max_iter} iterations "
                f"(eps = {eps}, level {m.level}, |r| = {res.norm:.3e})",
                report,
            )
        J = assemble_jacobian(w, res)
        step = solve_linear(J, -res.vector)
        trial = DiscreteVector(ws, w.coefficients + step)
        trial_res = assemble_residual(trial, p, eps, cfg.quad)
        if cfg.safeguard and increases >= 3:
            lam = 1.0
            while trial_res.norm >= res.norm and lam > 2.0**-20:
                lam *= 0.5
                trial = DiscreteVector(ws, w.coefficients + lam * step)
                trial_res = assemble_residual(trial, p, eps, cfg.quad)
            logger.debug("safeguarded step length %g", lam)
        increases = increases + 1 if trial_res.norm > res.norm else 0
        w, res = trial, trial_res
        report.iterations += 1
        report.residual_history.append(res.norm)
        logger.debug("newton it %d |r| = %.3e", report.iterations, res.norm)

    report.converged = True
    hist = report.residual_history
    if any(b >= a for a, b in zip(hist[2:], hist[3:])):
        logger.info("residual history not strictly decreasing: %s", hist)
    u = poisson_project(w, p, vs, cfg.quad)
    return SolveOutput(w, u, report)


def continuation_solve(
    p: ProblemSpec,
    m: Mesh,
    eps_list,
    cfg: NewtonConfig | None = None,
    w0: DiscreteVector | None = None,
) -> list[SolveOutput]:
    """Solve for a descending list of parameters, warm-starting each solve
    from the previous ``w_h``."""
    eps_list = [float(e) for e in eps_list]
    if any(b > a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must be sorted in descending order")
    spaces = (build_vector_space(m), build_scalar_space(m))
    out: list[SolveOutput] = []
    for eps in eps_list:
        start = out[-1].w_h if out else w0
        out.append(newton_solve(p, m, eps, cfg, w0=start, spaces=spaces))
    return out
