"""
Structured meshes generated in memory: uniform intervals, rectangles of quads
or triangles, a curved periodic quad fixture and the O-grid annulus around a
cylinder.
"""
import logging
from typing import Callable

import numpy as np

from ebdg.errors import MeshError
from ebdg.mesh.geometry import GEOMETRIC_ELEMENTS, Mesh, build_connectivity

QUAD_TYPES = {1: "quad4", 2: "quad9", 3: "quad16"}
RECTANGLE_SIDES = ("bottom", "right", "top", "left")

# side name, face midpoint -> boundary name
SideTagger = Callable[[str, np.ndarray], str]


def uniform_interval(num_elements: int, x_min: float = 0.0, x_max: float = 1.0, periodic: bool = True,
                     logger: logging.Logger = logging.getLogger(__name__)) -> Mesh:
    """Uniform line2 mesh; bounded meshes tag their end points ``left`` and ``right``."""
    if num_elements < 1:
        raise MeshError(f"Need at least one element, got {num_elements}.")
    if not x_max > x_min:
        raise MeshError(f"Empty interval [{x_min}, {x_max}].")
    nodes = np.linspace(x_min, x_max, num_elements + 1)[:, np.newaxis]
    elements = np.column_stack([np.arange(num_elements), np.arange(1, num_elements + 1)])
    mesh = Mesh(element_type="line2", nodes=nodes, elements=elements)
    if periodic:
        aliases = np.arange(num_elements + 1)
        aliases[-1] = 0
        return build_connectivity(mesh, {}, node_aliases=aliases, logger=logger)
    return build_connectivity(mesh, {(0,): "left", (num_elements,): "right"}, logger=logger)


def _lattice_offsets(element_type: str) -> np.ndarray:
    """Lattice offsets ``(a, b)`` of the element nodes inside one lattice block."""
    etype = GEOMETRIC_ELEMENTS[element_type]
    return np.rint((etype.nodes + 1.0) * etype.order / 2.0).astype(int)


def _structured_quads(nx: int, ny: int, order: int, wrap_x: bool = False) -> tuple[np.ndarray, tuple[int, int]]:
    """
    Element-to-node table of an ``nx`` x ``ny`` block of quads of geometric ``order``.

    Nodes live on a lattice with ``order`` intervals per element and direction;
    node ``(i, j)`` has index ``j * n_i + i``. With ``wrap_x`` the last lattice
    column is the first one.
    """
    offsets = _lattice_offsets(QUAD_TYPES[order])
    n_i = order * nx if wrap_x else order * nx + 1
    n_j = order * ny + 1
    elements = np.empty((nx * ny, len(offsets)), dtype=int)
    for j in range(ny):
        for i in range(nx):
            li = (order * i + offsets[:, 0]) % n_i if wrap_x else order * i + offsets[:, 0]
            lj = order * j + offsets[:, 1]
            elements[j * nx + i] = lj * n_i + li
    return elements, (n_i, n_j)


def _periodic_aliases(n_i: int, n_j: int, periodic_x: bool, periodic_y: bool) -> np.ndarray:
    i, j = np.meshgrid(np.arange(n_i), np.arange(n_j), indexing="xy")
    if periodic_x:
        i = np.where(i == n_i - 1, 0, i)
    if periodic_y:
        j = np.where(j == n_j - 1, 0, j)
    return (j * n_i + i).ravel()


def _rectangle_boundary(nx: int, ny: int, n_i: int, order: int, nodes: np.ndarray,
                        periodic: tuple[bool, bool], tagger: SideTagger) -> dict[tuple[int, ...], str]:
    tags = {}

    def vertex(i, j):
        return j * order * n_i + i * order

    for side in RECTANGLE_SIDES:
        if side in ("bottom", "top") and periodic[1] or side in ("left", "right") and periodic[0]:
            continue
        count = nx if side in ("bottom", "top") else ny
        for c in range(count):
            if side == "bottom":
                a, b = vertex(c, 0), vertex(c + 1, 0)
            elif side == "top":
                a, b = vertex(c, ny), vertex(c + 1, ny)
            elif side == "left":
                a, b = vertex(0, c), vertex(0, c + 1)
            else:
                a, b = vertex(nx, c), vertex(nx, c + 1)
            midpoint = 0.5 * (nodes[a] + nodes[b])
            tags[tuple(sorted((int(a), int(b))))] = tagger(side, midpoint)
    return tags


def _default_tagger(side: str, midpoint: np.ndarray) -> str:
    return side


def rectangle(nx: int, ny: int, x_range: tuple[float, float] = (0.0, 1.0), y_range: tuple[float, float] = (0.0, 1.0),
              element: str = "quad", periodic: tuple[bool, bool] = (False, False),
              tagger: SideTagger = _default_tagger,
              logger: logging.Logger = logging.getLogger(__name__)) -> Mesh:
    """
    Structured rectangle of straight quads or triangles.

    Triangles split every quad along its diagonal from the lower-left vertex.
    Non-periodic sides are tagged through ``tagger``, by default with the side
    name (``bottom``, ``right``, ``top``, ``left``).
    """
    if nx < 1 or ny < 1:
        raise MeshError(f"Need at least one element per direction, got {nx} x {ny}.")
    if element not in ("quad", "triangle"):
        raise MeshError(f"Unknown rectangle element '{element}'.")
    quads, (n_i, n_j) = _structured_quads(nx, ny, 1)
    x = np.linspace(*x_range, n_i)
    y = np.linspace(*y_range, n_j)
    xx, yy = np.meshgrid(x, y, indexing="xy")
    nodes = np.column_stack([xx.ravel(), yy.ravel()])

    if element == "quad":
        mesh = Mesh(element_type="quad4", nodes=nodes, elements=quads)
    else:
        lower = quads[:, [0, 1, 2]]
        upper = quads[:, [0, 2, 3]]
        triangles = np.stack([lower, upper], axis=1).reshape(-1, 3)
        mesh = Mesh(element_type="tri3", nodes=nodes, elements=triangles)

    tags = _rectangle_boundary(nx, ny, n_i, 1, nodes, periodic, tagger)
    aliases = _periodic_aliases(n_i, n_j, *periodic) if any(periodic) else None
    return build_connectivity(mesh, tags, node_aliases=aliases, logger=logger)


def curved_periodic_quads(n: int, amplitude: float = 0.05,
                          logger: logging.Logger = logging.getLogger(__name__)) -> Mesh:
    """
    Periodic unit square of 9-node quads whose interior nodes are displaced by
    ``amplitude * sin(2 pi x) sin(2 pi y)`` in both directions. The displacement
    vanishes on the outer boundary, so opposite sides still match.
    """
    if n < 2:
        raise MeshError(f"Curved fixture needs at least 2 elements per direction, got {n}.")
    elements, (n_i, n_j) = _structured_quads(n, n, 2)
    s = np.linspace(0.0, 1.0, n_i)
    xx, yy = np.meshgrid(s, s, indexing="xy")
    bump = amplitude * np.sin(2.0 * np.pi * xx) * np.sin(2.0 * np.pi * yy)
    nodes = np.column_stack([(xx + bump).ravel(), (yy + bump).ravel()])
    mesh = Mesh(element_type="quad9", nodes=nodes, elements=elements)
    return build_connectivity(mesh, {}, node_aliases=_periodic_aliases(n_i, n_j, True, True), logger=logger)


def annulus(num_radial: int, num_angular: int, inner_radius: float = 1.0, outer_radius: float = 20.0,
            order: int = 3, logger: logging.Logger = logging.getLogger(__name__)) -> Mesh:
    """
    O-grid between two circles with geometric radial stretching.

    Local ``r`` runs outward, local ``s`` counter-clockwise. The inner circle is
    tagged ``wall`` and the outer circle ``farfield``.
    """
    if num_radial < 1 or num_angular < 3:
        raise MeshError(f"Annulus needs at least 1 x 3 elements, got {num_radial} x {num_angular}.")
    if not outer_radius > inner_radius > 0.0:
        raise MeshError(f"Invalid radii {inner_radius}, {outer_radius}.")
    if order not in QUAD_TYPES:
        raise MeshError(f"Unsupported geometric order {order}.")

    # lattice i runs along theta (wrapped), j runs along the radius
    elements, (n_i, n_j) = _structured_quads(num_angular, num_radial, order, wrap_x=True)
    theta = 2.0 * np.pi * np.arange(n_i) / n_i
    radius = inner_radius * (outer_radius / inner_radius) ** (np.arange(n_j) / (n_j - 1))
    tt, rr = np.meshgrid(theta, radius, indexing="xy")
    nodes = np.column_stack([(rr * np.cos(tt)).ravel(), (rr * np.sin(tt)).ravel()])

    # swap the local axes so that the element orientation is counter-clockwise
    etype = GEOMETRIC_ELEMENTS[QUAD_TYPES[order]]
    swapped = etype.nodes[:, ::-1]
    permutation = [int(np.argmin(np.linalg.norm(etype.nodes - q, axis=1))) for q in swapped]
    elements = elements[:, permutation]
    mesh = Mesh(element_type=QUAD_TYPES[order], nodes=nodes, elements=elements)

    tags = {}
    outer = order * num_radial * n_i
    for c in range(num_angular):
        a, b = order * c, order * ((c + 1) % num_angular)
        tags[tuple(sorted((a, b)))] = "wall"
        tags[tuple(sorted((outer + a, outer + b)))] = "farfield"
    logger.debug(f"Annulus: {num_radial} x {num_angular} elements, radii {inner_radius}..{outer_radius}")
    return build_connectivity(mesh, tags, logger=logger)
