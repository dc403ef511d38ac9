"""
Orthonormal modal bases on the reference elements and the change of basis
between modal coefficients and point values at a subset of the volume
quadrature points.
"""
import logging
from functools import lru_cache
from typing import Callable

import numpy as np
import scipy.linalg
from numpy.polynomial import legendre

from ebdg.errors import BasisConstructionError, ContractViolationError
from ebdg.numerics.quadrature import (QuadratureRule, SurfaceQuadratureSet, SPATIAL_DIMS, quadrature_orders,
                                      surface_rules, volume_rule, MAX_ORDER)

CONDITION_LIMIT = 1e10
INSIDE_TOL = 1e-12


def num_basis(shape: str, p: int) -> int:
    if shape == "line":
        return p + 1
    if shape == "quad":
        return (p + 1) ** 2
    if shape == "triangle":
        return (p + 1) * (p + 2) // 2
    raise BasisConstructionError(f"Unsupported shape '{shape}'.")


def _legendre_table(x: np.ndarray, p: int) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal Legendre polynomials on [-1, 1] and their derivatives, shape (len(x), p + 1)."""
    values = np.empty((len(x), p + 1))
    derivatives = np.empty((len(x), p + 1))
    for n in range(p + 1):
        c = np.zeros(n + 1)
        c[n] = np.sqrt((2 * n + 1) / 2.0)
        values[:, n] = legendre.legval(x, c)
        derivatives[:, n] = legendre.legval(x, legendre.legder(c)) if n > 0 else 0.0
    return values, derivatives


def triangle_exponents(p: int) -> list[tuple[int, int]]:
    return [(i, d - i) for d in range(p + 1) for i in range(d, -1, -1)]


def _monomials(points: np.ndarray, exponents: list[tuple[int, int]]) -> tuple[np.ndarray, np.ndarray]:
    r, s = points[:, 0], points[:, 1]
    values = np.empty((len(points), len(exponents)))
    derivatives = np.zeros((len(points), len(exponents), 2))
    for m, (i, j) in enumerate(exponents):
        values[:, m] = r ** i * s ** j
        if i > 0:
            derivatives[:, m, 0] = i * r ** (i - 1) * s ** j
        if j > 0:
            derivatives[:, m, 1] = j * r ** i * s ** (j - 1)
    return values, derivatives


@lru_cache(maxsize=None)
def _triangle_orthonormalization(p: int) -> np.ndarray:
    rule = volume_rule("triangle", min(2 * p, MAX_ORDER))
    values, _ = _monomials(rule.points, triangle_exponents(p))
    gram = values.T @ (rule.weights[:, np.newaxis] * values)
    lower = np.linalg.cholesky(gram)
    return scipy.linalg.solve_triangular(lower, np.eye(len(gram)), lower=True).T


def _inside(shape: str, points: np.ndarray) -> np.ndarray:
    if shape == "triangle":
        r, s = points[:, 0], points[:, 1]
        return (r >= -INSIDE_TOL) & (s >= -INSIDE_TOL) & (r + s <= 1.0 + INSIDE_TOL)
    return np.all(np.abs(points) <= 1.0 + INSIDE_TOL, axis=1)


def modal_basis(shape: str, p: int, points: np.ndarray, check: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """
    Evaluate the orthonormal basis at reference points.

    Returns: values ``(N, N_p)`` and reference gradients ``(N, N_p, N_d)``
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[1] != SPATIAL_DIMS[shape]:
        points = points.reshape(-1, SPATIAL_DIMS[shape])
    if check and not np.all(_inside(shape, points)):
        raise ContractViolationError(f"Point outside the reference {shape}.")
    if shape == "line":
        values, derivatives = _legendre_table(points[:, 0], p)
        return values, derivatives[:, :, np.newaxis]
    if shape == "quad":
        vr, dr = _legendre_table(points[:, 0], p)
        vs, ds = _legendre_table(points[:, 1], p)
        # index m = j * (p + 1) + i, i runs along r
        values = (vs[:, :, np.newaxis] * vr[:, np.newaxis, :]).reshape(len(points), -1)
        grad_r = (vs[:, :, np.newaxis] * dr[:, np.newaxis, :]).reshape(len(points), -1)
        grad_s = (ds[:, :, np.newaxis] * vr[:, np.newaxis, :]).reshape(len(points), -1)
        return values, np.stack([grad_r, grad_s], axis=-1)
    if shape == "triangle":
        transform = _triangle_orthonormalization(p)
        values, derivatives = _monomials(points, triangle_exponents(p))
        return values @ transform, np.einsum("nmd,mk->nkd", derivatives, transform)
    raise BasisConstructionError(f"Unsupported shape '{shape}'.")


def _select_interpolation_points(phi_vol: np.ndarray, n_p: int, logger: logging.Logger) -> np.ndarray:
    first = np.arange(n_p)
    if np.linalg.cond(phi_vol[first]) < CONDITION_LIMIT:
        return first
    logger.debug("First quadrature points give a singular conversion matrix, using pivoted selection")
    _, _, pivots = scipy.linalg.qr(phi_vol.T, pivoting=True)
    chosen = np.sort(pivots[:n_p])
    if np.linalg.cond(phi_vol[chosen]) >= CONDITION_LIMIT:
        raise BasisConstructionError(
            "No non-singular interpolation subset among the volume quadrature points; "
            "choose a quadrature rule with more points.")
    return chosen


class ReferenceElement:
    """
    Shape, polynomial order, quadrature rules and basis tables of one element type.

    The interpolation subset ``interp_index`` picks ``N_p`` volume quadrature
    points at which modal coefficients are converted to point values.
    """

    def __init__(self, shape: str, p: int, volume_order: int | None = None, surface_order: int | None = None,
                 logger: logging.Logger = logging.getLogger(__name__)):
        default_volume, default_surface = quadrature_orders(shape, p)
        self.shape = shape
        self.p = p
        self.n_dims = SPATIAL_DIMS[shape]
        self.n_basis = num_basis(shape, p)
        self.volume_rule: QuadratureRule = volume_rule(shape, volume_order or default_volume)
        self.surface: SurfaceQuadratureSet = surface_rules(shape, surface_order or default_surface)
        if self.volume_rule.num_points < self.n_basis:
            raise BasisConstructionError(
                f"Volume rule has {self.volume_rule.num_points} points, fewer than {self.n_basis} basis functions.")

        self.phi_vol, self.dphi_vol = modal_basis(shape, p, self.volume_rule.points)
        flat_surface = self.surface.reference_points.reshape(-1, self.n_dims)
        phi_surf, _ = modal_basis(shape, p, flat_surface)
        self.phi_surf = phi_surf.reshape(self.surface.num_faces, self.surface.points_per_face, self.n_basis)
        self.mass = self.phi_vol.T @ (self.volume_rule.weights[:, np.newaxis] * self.phi_vol)

        self.interp_index = _select_interpolation_points(self.phi_vol, self.n_basis, logger)
        self.interp_matrix = self.phi_vol[self.interp_index]
        self._interp_lu_t = scipy.linalg.lu_factor(self.interp_matrix.T)
        logger.debug(f"Reference {shape} p={p}: {self.volume_rule.num_points} volume points, "
                     f"{self.surface.num_faces}x{self.surface.points_per_face} surface points, "
                     f"interpolation subset {self.interp_index.tolist()}")

    def __repr__(self):
        return f"ReferenceElement(shape={self.shape!r}, p={self.p})"

    @property
    def num_volume_points(self) -> int:
        return self.volume_rule.num_points

    @property
    def num_faces(self) -> int:
        return self.surface.num_faces

    @property
    def points_per_face(self) -> int:
        return self.surface.points_per_face

    def eval_basis(self, r) -> np.ndarray:
        values, _ = modal_basis(self.shape, self.p, r)
        return values[0] if np.ndim(r) <= 1 and values.shape[0] == 1 else values

    def eval_gradients(self, r) -> np.ndarray:
        _, gradients = modal_basis(self.shape, self.p, r)
        return gradients

    def to_point_values(self, coeffs: np.ndarray) -> np.ndarray:
        """Modal coefficients ``(N_p,)``, ``(N_p, N_v)`` or ``(N_e, N_p, N_v)`` to interpolation-point values."""
        return np.matmul(self.interp_matrix, coeffs)

    def from_point_values(self, values: np.ndarray) -> np.ndarray:
        return np.linalg.solve(self.interp_matrix, values)

    def lagrange_at(self, r) -> np.ndarray:
        """Lagrange basis of the interpolation points evaluated at reference points, shape (N, N_p)."""
        values, _ = modal_basis(self.shape, self.p, r)
        return scipy.linalg.lu_solve(self._interp_lu_t, values.T).T

    def surface_lagrange(self) -> np.ndarray:
        flat = self.surface.reference_points.reshape(-1, self.n_dims)
        return self.lagrange_at(flat).reshape(self.num_faces, self.points_per_face, self.n_basis)


@lru_cache(maxsize=None)
def reference_element(shape: str, p: int) -> ReferenceElement:
    return ReferenceElement(shape, p)


def l2_project(f: Callable[[np.ndarray], np.ndarray], ref: ReferenceElement, points_x: np.ndarray,
               jac_det: np.ndarray, rule: QuadratureRule) -> np.ndarray:
    """
    L2 projection of a point-evaluable field onto the element bases.

    Args:
        f: maps physical points ``(N_e, N_q, N_d)`` to values ``(N_e, N_q, N_v)``
        ref: reference element providing the basis
        points_x: physical coordinates of ``rule`` points on every element
        jac_det: ``|J|`` at the ``rule`` points, ``(N_e, N_q)``
        rule: quadrature rule exact at least to degree ``2p``

    Returns: coefficients ``(N_e, N_p, N_v)``
    """
    if rule.exact_degree < 2 * ref.p:
        raise ContractViolationError(f"Projection rule of degree {rule.exact_degree} is below 2p = {2 * ref.p}.")
    phi = ref.eval_basis(rule.points)
    phi = np.atleast_2d(phi)
    values = np.asarray(f(points_x), dtype=float)
    weighted = jac_det * rule.weights
    rhs = np.einsum("eq,qm,eqv->emv", weighted, phi, values)
    mass = np.einsum("eq,qm,qn->emn", weighted, phi, phi)
    return np.linalg.solve(mass, rhs)
