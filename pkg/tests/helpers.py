"""Small problem fixtures shared by the unit tests."""
import numpy as np

from mahjb.problems import ProblemSpec


def zero_problem():
    zero = lambda x: np.zeros(x.shape[:-1])
    return ProblemSpec(
        0, f=zero, g=zero,
        grad_g=lambda x: np.zeros(x.shape),
        hess_g=lambda x: np.zeros(x.shape + (2,)),
        u_exact=zero, grad_u_exact=lambda x: np.zeros(x.shape),
        singular=lambda x: np.zeros(x.shape[:-1], bool),
    )


def quadratic_problem(H, b=(0.0, 0.0), c=0.0):
    """u = x^T H x / 2 + b.x + c with f = det H (H symmetric positive semidefinite)."""
    H = np.asarray(H, float)
    b = np.asarray(b, float)
    u = lambda x: 0.5 * np.einsum("...i,ij,...j->...", x, H, x) + x @ b + c
    grad = lambda x: x @ H + b
    return ProblemSpec(
        0, f=lambda x: np.full(x.shape[:-1], np.linalg.det(H)), g=u, grad_g=grad,
        hess_g=lambda x: np.broadcast_to(H, x.shape + (2,)).copy(),
        u_exact=u, grad_u_exact=grad,
        singular=lambda x: np.zeros(x.shape[:-1], bool),
    )


def grad_norm(field):
    from mahjb.spaces import element_gradients, p1_geometry

    area, _ = p1_geometry(field.space.mesh)
    J = element_gradients(field)
    return float(np.sqrt(np.sum(area * np.sum(J**2, axis=tuple(range(1, J.ndim))))))
