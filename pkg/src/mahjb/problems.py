"""Benchmark data for ``det D^2 u = f`` on the unit square.

Every callable takes points of shape (..., 2).  ``g`` is the extension of the
Dirichlet data used inside the operator, ``grad_g`` / ``hess_g`` its first and
(almost everywhere) second derivatives.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

Field = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ProblemSpec:
    id: int
    f: Field
    g: Field
    grad_g: Field
    hess_g: Field
    u_exact: Field
    grad_u_exact: Field
    singular: Field  # boolean mask of points on the singular set
    notes: str = ""


def _norm(x):
    return np.hypot(x[..., 0], x[..., 1])


def _outer(x):
    return x[..., :, None] * x[..., None, :]


# -- example 1: u = (2|x|)^{3/2} / 3, f = 1/|x| -------------------------------

def _u1(x):
    return (2.0 * _norm(x)) ** 1.5 / 3.0


def _f1(x):
    return 1.0 / _norm(x)


def _grad_u1(x):
    r = _norm(x)
    return np.sqrt(2.0 / r)[..., None] * x


def _hess_u1(x):
    r = _norm(x)[..., None, None]
    return np.sqrt(2.0) * (np.eye(2) / np.sqrt(r) - 0.5 * _outer(x) / r**2.5)


def example_1() -> ProblemSpec:
    return ProblemSpec(
        1, _f1, _u1, _grad_u1, _hess_u1, _u1, _grad_u1,
        singular=lambda x: _norm(x) == 0.0,
        notes="f singular at the corner (0, 0); u in H^(5/2-), not C^2 up to the boundary",
    )


# -- example 2: u = -sqrt(2 - |x|^2), f = 2 / (2 - |x|^2)^2 ------------------

def _s2(x):
    return np.sqrt(2.0 - (x[..., 0] ** 2 + x[..., 1] ** 2))


def _u2(x):
    return -_s2(x)


def _f2(x):
    return 2.0 / (2.0 - (x[..., 0] ** 2 + x[..., 1] ** 2)) ** 2


def _grad_u2(x):
    return x / _s2(x)[..., None]


def _hess_u2(x):
    s = _s2(x)[..., None, None]
    return np.eye(2) / s + _outer(x) / s**3


def example_2() -> ProblemSpec:
    return ProblemSpec(
        2, _f2, _u2, _grad_u2, _hess_u2, _u2, _grad_u2,
        singular=lambda x: x[..., 0] ** 2 + x[..., 1] ** 2 >= 2.0,
        notes="f and D^2 u blow up at the corner (1, 1); u in H^(3/2-)",
    )


# -- example 3: u = |x1 - 1/2|, f = 0 ----------------------------------------

def _u3(x):
    return np.abs(x[..., 0] - 0.5)


def _grad_u3(x):
    out = np.zeros(x.shape)
    out[..., 0] = np.where(x[..., 0] >= 0.5, 1.0, -1.0)
    return out


def example_3() -> ProblemSpec:
    return ProblemSpec(
        3,
        f=lambda x: np.zeros(x.shape[:-1]),
        g=_u3,
        grad_g=_grad_u3,
        hess_g=lambda x: np.zeros(x.shape + (2,)),
        u_exact=_u3,
        grad_u_exact=_grad_u3,
        singular=lambda x: x[..., 0] == 0.5,
        notes="kink along x1 = 1/2 (crosses triangle interiors); Hessian of g taken as 0 off the kink",
    )


# -- example 4: u = -(1/sin(pi x) + 1/sin(pi y))^{-1}, g = 0 -----------------

def _sines(x):
    return np.sin(np.pi * x[..., 0]), np.sin(np.pi * x[..., 1])


def _u4(x):
    s1, s2 = _sines(x)
    den = s1 + s2
    with np.errstate(invalid="ignore", divide="ignore"):
        val = -s1 * s2 / den
    return np.where(den == 0.0, 0.0, val)


def _f4(x):
    # det D^2 u for the u above; the leading constant is pi^4
    s1, s2 = _sines(x)
    return np.pi**4 * s1**2 * s2**2 * (2.0 - s1 * s2) / (s1 + s2) ** 4


def _grad_u4(x):
    s1, s2 = _sines(x)
    c1 = np.cos(np.pi * x[..., 0])
    c2 = np.cos(np.pi * x[..., 1])
    den2 = (s1 + s2) ** 2
    return np.stack([-np.pi * c1 * s2**2 / den2, -np.pi * c2 * s1**2 / den2], axis=-1)


def _on_boundary(x):
    return (x[..., 0] <= 0.0) | (x[..., 0] >= 1.0) | (x[..., 1] <= 0.0) | (x[..., 1] >= 1.0)


def example_4() -> ProblemSpec:
    return ProblemSpec(
        4,
        f=_f4,
        g=lambda x: np.zeros(x.shape[:-1]),
        grad_g=lambda x: np.zeros(x.shape),
        hess_g=lambda x: np.zeros(x.shape + (2,)),
        u_exact=_u4,
        grad_u_exact=_grad_u4,
        singular=_on_boundary,
        notes="homogeneous data; f has a 0/0 form on the boundary; u in H^(2-)",
    )


EXAMPLES = {1: example_1, 2: example_2, 3: example_3, 4: example_4}


def get_problem(example_id: int) -> ProblemSpec:
    try:
        return EXAMPLES[int(example_id)]()
    except KeyError:
        raise ValueError(f"unknown example {example_id!r}; choose from 1-4") from None
