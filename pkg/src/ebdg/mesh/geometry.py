"""
Mesh representation, geometric mappings and the per-element geometry caches.

Element nodes follow the Gmsh ordering: vertices first, then the nodes of each
edge in edge direction, then interior nodes. Edge ``k`` of a two-dimensional
element runs from vertex ``k`` to vertex ``k + 1``.
"""
import logging
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from ebdg.errors import ContractViolationError, InvertedElementError, MeshError
from ebdg.numerics.basis import ReferenceElement
from ebdg.numerics.quadrature import REFERENCE_VERTICES, SPATIAL_DIMS

MATCH_TOL = 1e-9
NORMAL_TOL = 1e-10
DEGENERATE_EDGE_TOL = 1e-14

_THIRD = 1.0 / 3.0


@dataclass(frozen=True)
class GeometricElementType:
    name: str
    shape: str
    order: int
    nodes: np.ndarray

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @property
    def num_vertices(self) -> int:
        return len(REFERENCE_VERTICES[self.shape])


GEOMETRIC_ELEMENTS: dict[str, GeometricElementType] = {
    "line2": GeometricElementType("line2", "line", 1, np.array([[-1.0], [1.0]])),
    "tri3": GeometricElementType("tri3", "triangle", 1, np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])),
    "tri6": GeometricElementType("tri6", "triangle", 2, np.array(
        [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.5, 0.0], [0.5, 0.5], [0.0, 0.5]])),
    "tri10": GeometricElementType("tri10", "triangle", 3, np.array(
        [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0],
         [_THIRD, 0.0], [2 * _THIRD, 0.0],
         [2 * _THIRD, _THIRD], [_THIRD, 2 * _THIRD],
         [0.0, 2 * _THIRD], [0.0, _THIRD],
         [_THIRD, _THIRD]])),
    "quad4": GeometricElementType("quad4", "quad", 1, np.array(
        [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])),
    "quad9": GeometricElementType("quad9", "quad", 2, np.array(
        [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0],
         [0.0, -1.0], [1.0, 0.0], [0.0, 1.0], [-1.0, 0.0],
         [0.0, 0.0]])),
    "quad16": GeometricElementType("quad16", "quad", 3, np.array(
        [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0],
         [-_THIRD, -1.0], [_THIRD, -1.0],
         [1.0, -_THIRD], [1.0, _THIRD],
         [_THIRD, 1.0], [-_THIRD, 1.0],
         [-1.0, _THIRD], [-1.0, -_THIRD],
         [-_THIRD, -_THIRD], [_THIRD, -_THIRD], [_THIRD, _THIRD], [-_THIRD, _THIRD]])),
}


def _geometric_exponents(shape: str, order: int) -> list[tuple[int, ...]]:
    if shape == "line":
        return [(i,) for i in range(order + 1)]
    if shape == "quad":
        return [(i, j) for j in range(order + 1) for i in range(order + 1)]
    return [(i, d - i) for d in range(order + 1) for i in range(d, -1, -1)]


def _monomial_table(points: np.ndarray, exponents: list[tuple[int, ...]]) -> tuple[np.ndarray, np.ndarray]:
    n_dims = points.shape[1]
    values = np.ones((len(points), len(exponents)))
    gradients = np.zeros((len(points), len(exponents), n_dims))
    for m, powers in enumerate(exponents):
        for d, k in enumerate(powers):
            values[:, m] *= points[:, d] ** k
        for d in range(n_dims):
            k = powers[d]
            if k == 0:
                continue
            term = k * points[:, d] ** (k - 1)
            for other, kk in enumerate(powers):
                if other != d:
                    term = term * points[:, other] ** kk
            gradients[:, m, d] = term
    return values, gradients


@lru_cache(maxsize=None)
def _lagrange_coefficients(type_name: str) -> np.ndarray:
    etype = GEOMETRIC_ELEMENTS[type_name]
    vandermonde, _ = _monomial_table(etype.nodes, _geometric_exponents(etype.shape, etype.order))
    return np.linalg.inv(vandermonde)


def geometric_basis(type_name: str, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """
    Lagrange shape functions of the geometric element at reference points.

    Returns: values ``(N, N_g)`` and gradients ``(N, N_g, N_d)``
    """
    etype = GEOMETRIC_ELEMENTS[type_name]
    points = np.atleast_2d(np.asarray(points, dtype=float)).reshape(-1, SPATIAL_DIMS[etype.shape])
    values, gradients = _monomial_table(points, _geometric_exponents(etype.shape, etype.order))
    coefficients = _lagrange_coefficients(type_name)
    return values @ coefficients, np.einsum("nmd,mg->ngd", gradients, coefficients)


@dataclass
class Mesh:
    """
    Unstructured single-shape mesh with face connectivity.

    Faces are stored once: ``face_left``/``face_right`` hold the element on each
    side (``-1`` on the right for boundary faces) and ``face_tag`` the index into
    ``boundary_names`` (``-1`` for interior faces).
    """
    element_type: str
    nodes: np.ndarray
    elements: np.ndarray
    face_left: np.ndarray = field(default=None)
    face_left_local: np.ndarray = field(default=None)
    face_right: np.ndarray = field(default=None)
    face_right_local: np.ndarray = field(default=None)
    face_tag: np.ndarray = field(default=None)
    face_periodic: np.ndarray = field(default=None)
    boundary_names: list[str] = field(default_factory=list)
    element_ids: np.ndarray = field(default=None)

    @property
    def etype(self) -> GeometricElementType:
        return GEOMETRIC_ELEMENTS[self.element_type]

    @property
    def shape(self) -> str:
        return self.etype.shape

    @property
    def n_dims(self) -> int:
        return SPATIAL_DIMS[self.shape]

    @property
    def geo_order(self) -> int:
        return self.etype.order

    @property
    def num_elements(self) -> int:
        return len(self.elements)

    @property
    def num_faces(self) -> int:
        return len(self.face_left)

    @property
    def faces_per_element(self) -> int:
        return 2 if self.shape == "line" else self.etype.num_vertices

    @property
    def interior_faces(self) -> np.ndarray:
        return np.flatnonzero(self.face_right >= 0)

    @property
    def boundary_faces(self) -> np.ndarray:
        return np.flatnonzero(self.face_right < 0)

    def element_vertices(self) -> np.ndarray:
        return self.elements[:, :self.etype.num_vertices]

    def neighbor_table(self) -> np.ndarray:
        """Neighbor element across each local face, ``-1`` on boundaries, shape ``(N_e, N_faces)``."""
        table = np.full((self.num_elements, self.faces_per_element), -1, dtype=int)
        interior = self.interior_faces
        table[self.face_left[interior], self.face_left_local[interior]] = self.face_right[interior]
        table[self.face_right[interior], self.face_right_local[interior]] = self.face_left[interior]
        return table

    def neighbors(self, e: int) -> np.ndarray:
        row = self.neighbor_table()[e]
        return np.unique(row[row >= 0])

    def face_vertex_indices(self, local_face: int) -> list[int]:
        if self.shape == "line":
            return [local_face]
        n = self.etype.num_vertices
        return [local_face, (local_face + 1) % n]


def build_connectivity(mesh: Mesh, boundary_tags: dict[tuple[int, ...], str],
                       node_aliases: np.ndarray | None = None,
                       logger: logging.Logger = logging.getLogger(__name__)) -> Mesh:
    """
    Pair element faces through shared vertices and tag the remaining ones.

    Args:
        mesh: mesh with nodes and elements set
        boundary_tags: sorted vertex-index tuple of a boundary face -> boundary name
        node_aliases: optional map node -> representative node; faces whose vertices
            coincide after aliasing are periodic partners
    """
    aliases = np.arange(len(mesh.nodes)) if node_aliases is None else np.asarray(node_aliases)
    vertices = mesh.element_vertices()
    buckets: dict[tuple[int, ...], list[tuple[int, int]]] = {}
    for e in range(mesh.num_elements):
        for k in range(mesh.faces_per_element):
            key = tuple(sorted(int(aliases[vertices[e, i]]) for i in mesh.face_vertex_indices(k)))
            buckets.setdefault(key, []).append((e, k))

    name_index = {name: i for i, name in enumerate(sorted(set(boundary_tags.values())))}
    left, left_local, right, right_local, tags, periodic = [], [], [], [], [], []
    untagged = []
    for key, sides in buckets.items():
        if len(sides) > 2:
            raise MeshError(f"Face with vertices {key} is shared by {len(sides)} elements.")
        (eL, kL) = sides[0]
        left.append(eL)
        left_local.append(kL)
        if len(sides) == 2:
            eR, kR = sides[1]
            right.append(eR)
            right_local.append(kR)
            tags.append(-1)
            own_left = sorted(int(vertices[eL, i]) for i in mesh.face_vertex_indices(kL))
            own_right = sorted(int(vertices[eR, i]) for i in mesh.face_vertex_indices(kR))
            periodic.append(own_left != own_right)
        else:
            own = tuple(sorted(int(vertices[eL, i]) for i in mesh.face_vertex_indices(kL)))
            name = boundary_tags.get(own)
            if name is None:
                untagged.append((eL, kL))
                name_index.setdefault("unassigned", len(name_index))
                name = "unassigned"
            right.append(-1)
            right_local.append(-1)
            tags.append(name_index[name])
            periodic.append(False)

    order = np.lexsort((np.array(left_local), np.array(left)))
    mesh.face_left = np.array(left, dtype=int)[order]
    mesh.face_left_local = np.array(left_local, dtype=int)[order]
    mesh.face_right = np.array(right, dtype=int)[order]
    mesh.face_right_local = np.array(right_local, dtype=int)[order]
    mesh.face_tag = np.array(tags, dtype=int)[order]
    mesh.face_periodic = np.array(periodic, dtype=bool)[order]
    mesh.boundary_names = list(name_index)
    if mesh.element_ids is None:
        mesh.element_ids = np.arange(mesh.num_elements)
    if untagged:
        logger.warning(f"{len(untagged)} boundary faces carry no physical group and are tagged 'unassigned'")
    logger.debug(f"Connectivity: {mesh.num_elements} elements, {len(mesh.interior_faces)} interior faces, "
                 f"{len(mesh.boundary_faces)} boundary faces, boundaries {mesh.boundary_names}")
    return mesh


def map_points(mesh: Mesh, ref_points: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Map reference points on every element.

    Returns: coordinates ``(N_e, N, N_d)``, Jacobians ``(N_e, N, N_d, N_d)`` with
    ``J[..., i, j] = dx_i / dr_j`` and determinants ``(N_e, N)``
    """
    values, gradients = geometric_basis(mesh.element_type, ref_points)
    coords = mesh.nodes[mesh.elements]
    x = np.einsum("ng,egd->end", values, coords)
    jac = np.einsum("ngj,egi->enij", gradients, coords)
    if mesh.n_dims == 1:
        det = jac[..., 0, 0]
    else:
        det = jac[..., 0, 0] * jac[..., 1, 1] - jac[..., 0, 1] * jac[..., 1, 0]
    return x, jac, det


def geometric_jacobian(mesh: Mesh, e: int, r) -> tuple[np.ndarray, float]:
    values, gradients = geometric_basis(mesh.element_type, r)
    coords = mesh.nodes[mesh.elements[e]]
    jac = np.einsum("gj,gi->ij", gradients[0], coords)
    return jac, float(np.linalg.det(jac))


def surface_jacobian(mesh: Mesh, e: int, k: int, g: float) -> tuple[float, np.ndarray]:
    """Surface Jacobian magnitude and outward unit normal on edge ``k`` at parameter ``g``."""
    vertices = REFERENCE_VERTICES[mesh.shape]
    if mesh.shape == "line":
        jac, det = geometric_jacobian(mesh, e, vertices[k])
        return 1.0, np.array([-1.0 if k == 0 else 1.0]) * np.sign(det)
    if not -1e-12 <= g <= 1.0 + 1e-12:
        raise ContractViolationError(f"Edge parameter {g} outside [0, 1].")
    n = len(vertices)
    tangent_ref = vertices[(k + 1) % n] - vertices[k]
    jac, _ = geometric_jacobian(mesh, e, vertices[k] + g * tangent_ref)
    tangent = jac @ tangent_ref
    length = float(np.linalg.norm(tangent))
    if length < DEGENERATE_EDGE_TOL:
        raise MeshError(f"Degenerate edge {k} on element {mesh.element_ids[e]}.")
    return length, np.array([tangent[1], -tangent[0]]) / length


class ElementGeometry:
    """
    Geometry caches of all elements for one reference element.

    Volume arrays are ``(N_e, N_qv, ...)``; surface arrays ``(N_e, N_faces, N_qf, ...)``.
    """

    def __init__(self, mesh: Mesh, ref: ReferenceElement, logger: logging.Logger = logging.getLogger(__name__)):
        if mesh.shape != ref.shape:
            raise MeshError(f"Mesh of {mesh.shape} elements does not match reference {ref.shape}.")
        self.mesh = mesh
        self.ref = ref
        self.logger = logger

        w_vol = ref.volume_rule.weights
        self.x_vol, jac, self.det_vol = map_points(mesh, ref.volume_rule.points)
        bad = np.flatnonzero(np.any(self.det_vol <= 0.0, axis=1))
        if bad.size:
            raise InvertedElementError([int(mesh.element_ids[e]) for e in bad])
        self.jac_inv_vol = np.linalg.inv(jac)
        self.volume = np.einsum("eq,q->e", self.det_vol, w_vol)

        self._build_surface(mesh, ref)
        self.zeta = self.surf_jac * self.surface_weights / self.volume[:, np.newaxis, np.newaxis]
        self.face_measure = np.einsum("ekq,q->ek", self.surf_jac, self.surface_weights)
        self.surface_area = self.face_measure.sum(axis=1)
        self.characteristic_length = self.volume / self.surf_jac.reshape(mesh.num_elements, -1).max(axis=1)

        spread = self.det_vol.max(axis=1) - self.det_vol.min(axis=1)
        jac_spread = np.abs(jac - jac[:, :1]).max(axis=(1, 2, 3))
        self.affine = (spread <= 1e-12 * self.det_vol.max(axis=1)) & (jac_spread <= 1e-12 * np.abs(jac).max())
        self._build_mass_inverse(ref)
        self._build_face_permutation(mesh)
        self._check_outward_normals(mesh)

        self.points_D = np.concatenate(
            [self.x_vol, self.x_surf.reshape(mesh.num_elements, -1, mesh.n_dims)], axis=1)
        logger.debug(f"Geometry: total volume {self.volume.sum():.6g}, "
                     f"{int(self.affine.sum())}/{mesh.num_elements} affine elements, "
                     f"min L_e {self.characteristic_length.min():.4g}")

    def _build_surface(self, mesh: Mesh, ref: ReferenceElement):
        n_e, n_f, n_qf = mesh.num_elements, ref.num_faces, ref.points_per_face
        flat = ref.surface.reference_points.reshape(-1, mesh.n_dims)
        x, jac, det = map_points(mesh, flat)
        self.x_surf = x.reshape(n_e, n_f, n_qf, mesh.n_dims)
        self.surface_weights = ref.surface.rules[0].weights
        if mesh.n_dims == 1:
            self.surf_jac = np.ones((n_e, n_f, n_qf))
            self.normals = np.empty((n_e, n_f, n_qf, 1))
            self.normals[:, 0] = -1.0
            self.normals[:, 1] = 1.0
            return
        jac = jac.reshape(n_e, n_f, n_qf, 2, 2)
        tangents = np.einsum("ekqij,kj->ekqi", jac, ref.surface.tangents)
        self.surf_jac = np.linalg.norm(tangents, axis=-1)
        scale = np.abs(mesh.nodes).max() if mesh.nodes.size else 1.0
        degenerate = np.flatnonzero(np.any(self.surf_jac < DEGENERATE_EDGE_TOL * max(scale, 1.0), axis=(1, 2)))
        if degenerate.size:
            raise InvertedElementError([int(mesh.element_ids[e]) for e in degenerate])
        self.normals = np.stack([tangents[..., 1], -tangents[..., 0]], axis=-1) / self.surf_jac[..., np.newaxis]

    def _build_mass_inverse(self, ref: ReferenceElement):
        w = ref.volume_rule.weights
        n_e = self.mesh.num_elements
        self.mass_inv = np.empty((n_e, ref.n_basis, ref.n_basis))
        ref_inv = np.linalg.inv(ref.mass)
        affine = np.flatnonzero(self.affine)
        self.mass_inv[affine] = ref_inv[np.newaxis] / self.det_vol[affine, 0][:, np.newaxis, np.newaxis]
        curved = np.flatnonzero(~self.affine)
        if curved.size:
            mass = np.einsum("eq,q,qm,qn->emn", self.det_vol[curved], w, ref.phi_vol, ref.phi_vol)
            self.mass_inv[curved] = np.linalg.inv(mass)

    def _build_face_permutation(self, mesh: Mesh):
        interior = mesh.interior_faces
        n_qf = self.ref.points_per_face
        self.face_perm = np.tile(np.arange(n_qf), (mesh.num_faces, 1))
        if interior.size == 0:
            return
        xL = self.x_surf[mesh.face_left[interior], mesh.face_left_local[interior]]
        xR = self.x_surf[mesh.face_right[interior], mesh.face_right_local[interior]]
        offset = np.where(mesh.face_periodic[interior][:, np.newaxis],
                          xL.mean(axis=1) - xR.mean(axis=1), 0.0)
        xR = xR + offset[:, np.newaxis, :]
        distance = np.linalg.norm(xL[:, :, np.newaxis, :] - xR[:, np.newaxis, :, :], axis=-1)
        perm = np.argmin(distance, axis=2)
        matched = np.take_along_axis(distance, perm[..., np.newaxis], axis=2)[..., 0]
        h = self.characteristic_length[mesh.face_left[interior]]
        if np.any(matched > MATCH_TOL * h[:, np.newaxis]):
            worst = interior[np.argmax(matched.max(axis=1) / h)]
            raise MeshError(f"Surface quadrature points of face {worst} do not match between its two sides.")
        self.face_perm[interior] = perm

        nL = self.normals[mesh.face_left[interior], mesh.face_left_local[interior]]
        nR = self.normals[mesh.face_right[interior], mesh.face_right_local[interior]]
        nR = np.take_along_axis(nR, perm[..., np.newaxis], axis=1)
        if np.any(np.linalg.norm(nL + nR, axis=-1) > NORMAL_TOL):
            raise MeshError("Normals of matched surface points are not opposite on some interior faces.")

    def _check_outward_normals(self, mesh: Mesh):
        centroid = np.einsum("eqd,eq->ed", self.x_vol, self.det_vol * self.ref.volume_rule.weights) \
            / self.volume[:, np.newaxis]
        face_mid = self.x_surf.mean(axis=2)
        normal_mid = self.normals.mean(axis=2)
        outward = np.einsum("ekd,ekd->ek", face_mid - centroid[:, np.newaxis, :], normal_mid)
        bad = np.flatnonzero(np.any(outward <= 0.0, axis=1))
        if bad.size:
            raise InvertedElementError([int(mesh.element_ids[e]) for e in bad])

    def closed_surface_residual(self) -> np.ndarray:
        """Per element ``|sum_kq zeta n|``, zero for closed element surfaces."""
        total = np.einsum("ekq,ekqd->ed", self.zeta, self.normals)
        return np.linalg.norm(total, axis=1)


def characteristic_length(geometry: ElementGeometry, e: int) -> float:
    return float(geometry.characteristic_length[e])
