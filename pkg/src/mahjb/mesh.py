"""Criss-cross triangulations of the unit square and their red refinement.

The coarsest mesh joins the four corners of ``(0, 1)^2`` with the centre.
Every refinement splits each triangle into four similar children through the
edge midpoints, so all vertex coordinates are dyadic rationals ``k / 2^(l+1)``
and vertices are deduplicated by exact integer keys.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

# boundary_class codes
INTERIOR = 0
EDGE = 1
CORNER = 2

# Side ids of the unit square and their unit tangents / outward normals.
SIDE_NONE = -1
SIDE_BOTTOM, SIDE_RIGHT, SIDE_TOP, SIDE_LEFT = 0, 1, 2, 3
SIDE_TANGENTS = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])
SIDE_NORMALS = np.array([[0.0, -1.0], [1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]])


@dataclass(frozen=True, eq=False)
class Mesh:
    """Conforming triangulation of the unit square.

    Attributes
    ----------
    vertices : (nv, 2) float array
    triangles : (nt, 3) int array, counterclockwise vertex indices
    level : number of red refinements applied to the initial mesh
    parent_edges : (nv, 2) int array; for vertices created by the last
        refinement the two endpoints of the bisected parent edge, ``-1``
        for vertices inherited from the parent mesh.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    level: int
    parent_edges: np.ndarray = field(repr=False)
    boundary_class: np.ndarray = field(init=False, repr=False)
    boundary_side: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        x, y = self.vertices[:, 0], self.vertices[:, 1]
        on = np.stack([y == 0.0, x == 1.0, y == 1.0, x == 0.0], axis=1)
        count = on.sum(axis=1)
        cls = np.where(count >= 2, CORNER, np.where(count == 1, EDGE, INTERIOR))
        side = np.where(count == 1, np.argmax(on, axis=1), SIDE_NONE)
        for arr in (self.vertices, self.triangles, self.parent_edges, cls, side):
            arr.setflags(write=False)
        object.__setattr__(self, "boundary_class", cls)
        object.__setattr__(self, "boundary_side", side)

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def interior_vertices(self) -> np.ndarray:
        return np.flatnonzero(self.boundary_class == INTERIOR)

    @property
    def boundary_vertices(self) -> np.ndarray:
        return np.flatnonzero(self.boundary_class != INTERIOR)

    def side_tangent(self, vertex: int) -> np.ndarray | None:
        """Unit tangent of the side a non-corner boundary vertex lies on."""
        s = self.boundary_side[vertex]
        return None if s == SIDE_NONE else SIDE_TANGENTS[s]

    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        """Unique edges (sorted vertex pairs) and the number of incident triangles."""
        t = self.triangles
        all_edges = np.sort(
            np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]]), axis=1
        )
        return np.unique(all_edges, axis=0, return_counts=True)

    def write_off(self, path: str | Path) -> None:
        """Dump the mesh in a plain OFF-like text format (debugging aid)."""
        with open(path, "w", newline="\n") as fh:
            fh.write(f"{self.n_vertices} {self.n_triangles}\n")
            for x, y in self.vertices:
                fh.write(f"{x:.17g} {y:.17g}\n")
            for a, b, c in self.triangles:
                fh.write(f"{a} {b} {c}\n")


def initial_mesh() -> Mesh:
    """Four triangles joining the corners of the unit square with its centre."""
    vertices = np.array(
        [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.5]]
    )
    triangles = np.array([[0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4]])
    return Mesh(vertices, triangles, 0, np.full((5, 2), -1))


def refine_uniform(m: Mesh) -> Mesh:
    """Red refinement: every triangle is split into four via its edge midpoints.

    Parent vertices keep their indices; new midpoint vertices are appended in
    the order of the sorted unique edge list.
    """
    scale = 2 ** (m.level + 2)
    keys = np.rint(m.vertices * scale).astype(np.int64)
    if not np.array_equal(keys / scale, m.vertices):
        raise ValueError("mesh vertices are not dyadic at the expected level")

    t = m.triangles
    local = np.sort(np.stack([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]], axis=1), axis=2)
    edges, inverse = np.unique(local.reshape(-1, 2), axis=0, return_inverse=True)
    inverse = inverse.reshape(-1, 3)

    nv = m.n_vertices
    mid = nv + inverse  # midpoint index of edges (01, 12, 20) per triangle
    mid_keys = (keys[edges[:, 0]] + keys[edges[:, 1]]) // 2
    vertices = np.concatenate([m.vertices, mid_keys / scale])

    a, b, c = t[:, 0], t[:, 1], t[:, 2]
    mab, mbc, mca = mid[:, 0], mid[:, 1], mid[:, 2]
    children = np.stack(
        [
            np.stack([a, mab, mca], axis=1),
            np.stack([mab, b, mbc], axis=1),
            np.stack([mca, mbc, c], axis=1),
            np.stack([mab, mbc, mca], axis=1),
        ],
        axis=1,
    ).reshape(-1, 3)

    parent_edges = np.concatenate([np.full((nv, 2), -1), edges])
    return Mesh(vertices, children, m.level + 1, parent_edges)


def unit_square_mesh(level: int) -> Mesh:
    m = initial_mesh()
    for _ in range(level):
        m = refine_uniform(m)
    return m


def mesh_hierarchy(max_level: int) -> list[Mesh]:
    meshes = [initial_mesh()]
    for _ in range(max_level):
        meshes.append(refine_uniform(meshes[-1]))
    return meshes


def mesh_size(m: Mesh) -> float:
    """Maximal triangle diameter (longest edge)."""
    p = m.vertices[m.triangles]
    lengths = np.linalg.norm(p - np.roll(p, -1, axis=1), axis=2)
    return float(lengths.max())


def prolongate(fine: Mesh, values: np.ndarray) -> np.ndarray:
    """Interpolate P1 nodal values from the parent mesh of ``fine`` onto ``fine``.

    ``values`` has one leading row per parent vertex; trailing axes are kept.
    """
    pe = fine.parent_edges
    n_parent = int(np.count_nonzero(pe[:, 0] < 0))
    if values.shape[0] != n_parent:
        raise ValueError("values do not live on the parent mesh")
    new = pe[n_parent:]
    return np.concatenate([values, 0.5 * (values[new[:, 0]] + values[new[:, 1]])])
