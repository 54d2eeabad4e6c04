"""Quadrature rules on the reference triangle with strictly interior points.

Points are barycentric triples; weights sum to the reference area 1/2, so the
physical weight on triangle ``T`` is ``w * 2 |T|``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    barycentric: np.ndarray  # (nq, 3)
    weights: np.ndarray  # (nq,)
    degree: int

    @property
    def n_points(self) -> int:
        return self.weights.size

    def points(self, vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
        """Physical quadrature points, shape (nt, nq, 2)."""
        return np.einsum("qk,tkd->tqd", self.barycentric, vertices[triangles])


def degree2_interior() -> QuadratureRule:
    """Three points at the permutations of (2/3, 1/6, 1/6); exact for P2."""
    a, b = 2.0 / 3.0, 1.0 / 6.0
    bary = np.array([[a, b, b], [b, a, b], [b, b, a]])
    return QuadratureRule(bary, np.full(3, 1.0 / 6.0), 2)


def degree5_interior() -> QuadratureRule:
    """Seven-point rule of Radon type; exact for P5."""
    s15 = np.sqrt(15.0)
    a1, b1 = (6.0 - s15) / 21.0, (9.0 + 2.0 * s15) / 21.0
    a2, b2 = (6.0 + s15) / 21.0, (9.0 - 2.0 * s15) / 21.0
    w1 = (155.0 - s15) / 1200.0
    w2 = (155.0 + s15) / 1200.0
    bary = np.array(
        [
            [1 / 3, 1 / 3, 1 / 3],
            [a1, a1, b1], [a1, b1, a1], [b1, a1, a1],
            [a2, a2, b2], [a2, b2, a2], [b2, a2, a2],
        ]
    )
    weights = 0.5 * np.array([9.0 / 40.0, w1, w1, w1, w2, w2, w2])
    return QuadratureRule(bary, weights, 5)


NONLINEAR_RULE = degree2_interior()
ERROR_RULE = degree5_interior()
