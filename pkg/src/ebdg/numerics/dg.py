"""
Semi-discrete DG operator: volume and surface integrals of the weak form,
boundary ghost states and element averages.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np

from ebdg.errors import AdmissibilityError, ContractViolationError, MeshError
from ebdg.mesh.geometry import ElementGeometry
from ebdg.numerics.euler import GasModel, entropy, flux, is_admissible, lax_friedrichs_flux, max_wave_speed

BoundaryKind = Literal["periodic", "supersonic_inflow", "outflow_extrapolate", "slip_wall", "farfield"]
BOUNDARY_KINDS: tuple[str, ...] = ("periodic", "supersonic_inflow", "outflow_extrapolate", "slip_wall", "farfield")
PRESCRIBED_KINDS = frozenset({"supersonic_inflow", "farfield"})

# physical points (..., N_d), time -> conserved states (..., N_v)
StateFunction = Callable[[np.ndarray, float], np.ndarray]


@dataclass(frozen=True)
class BoundaryCondition:
    kind: BoundaryKind
    state: np.ndarray | None = None
    state_fn: StateFunction | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in BOUNDARY_KINDS:
            raise ValueError(f"Unknown boundary kind '{self.kind}'. Allowed: {', '.join(BOUNDARY_KINDS)}.")
        if self.kind in PRESCRIBED_KINDS:
            if self.state is None and self.state_fn is None:
                raise ValueError(f"Boundary kind '{self.kind}' needs a prescribed state.")
            # the sign of the pressure does not depend on gamma
            if self.state is not None and not bool(np.all(is_admissible(np.asarray(self.state, float), GasModel()))):
                raise AdmissibilityError(f"Prescribed {self.kind} state {self.state} is not admissible")

    @property
    def bounds_entropy(self) -> bool:
        """Whether ghost states of this boundary belong to the exterior trace set of the entropy bound."""
        return self.kind in PRESCRIBED_KINDS


def ghost_state(bc: BoundaryCondition, U_interior: np.ndarray, normal: np.ndarray,
                x: np.ndarray | None = None, t: float = 0.0) -> np.ndarray:
    """Exterior state of a boundary face from the interior trace and the outward unit normal."""
    if bc.kind == "outflow_extrapolate":
        return U_interior.copy()
    if bc.kind == "slip_wall":
        ghost = U_interior.copy()
        momentum = U_interior[..., 1:-1]
        normal_momentum = np.sum(momentum * normal, axis=-1, keepdims=True)
        ghost[..., 1:-1] = momentum - 2.0 * normal_momentum * normal
        return ghost
    if bc.kind in PRESCRIBED_KINDS:
        if bc.state_fn is not None:
            if x is None:
                raise ContractViolationError(f"Boundary '{bc.kind}' with a state function needs point coordinates.")
            return np.asarray(bc.state_fn(x, t), dtype=float)
        return np.broadcast_to(np.asarray(bc.state, dtype=float), U_interior.shape).copy()
    raise ContractViolationError("Periodic boundaries are paired by the mesh and have no ghost state.")


@dataclass
class DgSolution:
    """Modal coefficients of all elements, shape ``(N_e, N_p, N_v)``."""
    coeffs: np.ndarray
    p: int

    @property
    def num_elements(self) -> int:
        return self.coeffs.shape[0]

    @property
    def num_basis(self) -> int:
        return self.coeffs.shape[1]

    @property
    def num_fields(self) -> int:
        return self.coeffs.shape[2]

    @property
    def n_dims(self) -> int:
        return self.num_fields - 2

    def copy(self) -> "DgSolution":
        return DgSolution(self.coeffs.copy(), self.p)

    def check_finite(self, stage: int | None = None):
        check_finite(self.coeffs, "coefficients", stage)


def check_finite(values: np.ndarray, what: str, stage: int | None = None):
    bad = ~np.isfinite(values)
    if np.any(bad):
        element = int(np.argwhere(bad)[0][0])
        raise AdmissibilityError(f"Non-finite {what}", element=element, stage=stage)


def element_averages(coeffs: np.ndarray, geometry: ElementGeometry) -> np.ndarray:
    """Volume-weighted quadrature means ``sum_v |J| w_v U(r_v) / V_e``, shape ``(N_e, N_v)``."""
    ref = geometry.ref
    values = np.einsum("qm,emv->eqv", ref.phi_vol, coeffs)
    weighted = geometry.det_vol * ref.volume_rule.weights
    return np.einsum("eq,eqv->ev", weighted, values) / geometry.volume[:, np.newaxis]


def element_average(sol: DgSolution | np.ndarray, geometry: ElementGeometry, e: int) -> np.ndarray:
    coeffs = sol.coeffs if isinstance(sol, DgSolution) else sol
    values = geometry.ref.phi_vol @ coeffs[e]
    weighted = geometry.det_vol[e] * geometry.ref.volume_rule.weights
    return weighted @ values / geometry.volume[e]


def conserved_totals(coeffs: np.ndarray, geometry: ElementGeometry) -> np.ndarray:
    """Domain integrals of the conserved variables."""
    return np.einsum("e,ev->v", geometry.volume, element_averages(coeffs, geometry))


class DgOperator:
    """
    Weak-form residual ``M^{-1} [ int grad(phi) . F - oint phi F_hat ]`` on a fixed mesh.

    Every face is evaluated once, with the normal of its left element, and the
    flux is scattered to both sides in face order.
    """

    def __init__(self, geometry: ElementGeometry, boundary_conditions: dict[str, BoundaryCondition],
                 gas: GasModel, logger: logging.Logger = logging.getLogger(__name__)):
        self.geometry = geometry
        self.mesh = mesh = geometry.mesh
        self.ref = ref = geometry.ref
        self.gas = gas
        self.logger = logger

        self.face_left = mesh.face_left
        self.face_right = mesh.face_right
        self.interior = mesh.interior_faces
        self.right_interior = mesh.face_right[self.interior]

        kL = mesh.face_left_local
        self._phi_left = ref.phi_surf[kL]
        perm = geometry.face_perm[self.interior]
        self._phi_right = np.take_along_axis(ref.phi_surf[mesh.face_right_local[self.interior]],
                                             perm[..., np.newaxis], axis=1)
        self.normals = geometry.normals[mesh.face_left, kL]
        self.points = geometry.x_surf[mesh.face_left, kL]
        self._surface_weights = geometry.surf_jac[mesh.face_left, kL] * geometry.surface_weights
        self._volume_weights = geometry.det_vol * ref.volume_rule.weights

        self.boundary_groups: list[tuple[BoundaryCondition, np.ndarray]] = []
        for tag, name in enumerate(mesh.boundary_names):
            faces = np.flatnonzero(mesh.face_tag == tag)
            if faces.size == 0:
                continue
            if name not in boundary_conditions:
                raise MeshError(f"No boundary condition given for boundary '{name}' ({faces.size} faces).")
            bc = boundary_conditions[name]
            if bc.kind == "periodic":
                raise ContractViolationError(
                    f"Boundary '{name}' is declared periodic but the mesh does not pair its faces.")
            self.boundary_groups.append((bc, faces))
        logger.debug(f"DG operator: {mesh.num_elements} elements, p={ref.p}, {ref.n_basis} basis functions, "
                     f"{len(self.interior)} interior and {len(mesh.boundary_faces)} boundary faces")

    def volume_states(self, coeffs: np.ndarray) -> np.ndarray:
        return np.einsum("qm,emv->eqv", self.ref.phi_vol, coeffs)

    def surface_states(self, coeffs: np.ndarray) -> np.ndarray:
        """Interior traces at all surface points, ``(N_e, N_faces, N_qf, N_v)``."""
        return np.einsum("kqm,emv->ekqv", self.ref.phi_surf, coeffs)

    def face_states(self, coeffs: np.ndarray, t: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
        """
        Left and right traces of every face at the left side's surface points.
        Boundary faces carry the ghost state on the right.
        """
        UL = np.einsum("fqm,fmv->fqv", self._phi_left, coeffs[self.face_left])
        UR = np.empty_like(UL)
        UR[self.interior] = np.einsum("fqm,fmv->fqv", self._phi_right, coeffs[self.right_interior])
        for bc, faces in self.boundary_groups:
            UR[faces] = ghost_state(bc, UL[faces], self.normals[faces], self.points[faces], t)
        return UL, UR

    def _side_speeds(self, UL: np.ndarray, UR: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        try:
            speed_left = max_wave_speed(UL, self.gas)
        except AdmissibilityError as e:
            raise e.with_element(int(self.face_left[e.element]), e.point) from None
        try:
            speed_right = max_wave_speed(UR, self.gas)
        except AdmissibilityError as e:
            owner = self.face_right[e.element]
            element = int(owner) if owner >= 0 else int(self.face_left[e.element])
            raise e.with_element(element) from None
        return speed_left, speed_right

    def residual(self, coeffs: np.ndarray, t: float = 0.0) -> np.ndarray:
        """Time derivative of the coefficients, same shape as ``coeffs``."""
        ref = self.ref
        U_vol = self.volume_states(coeffs)
        F = flux(U_vol, self.gas)
        # grad_x phi = J^{-T} grad_r phi, folded into the flux first
        G = np.einsum("eqrd,eqvd->eqvr", self.geometry.jac_inv_vol, F) * self._volume_weights[..., np.newaxis, np.newaxis]
        rhs = np.einsum("qmr,eqvr->emv", ref.dphi_vol, G)

        UL, UR = self.face_states(coeffs, t)
        speed_left, speed_right = self._side_speeds(UL, UR)
        lam = np.maximum(speed_left, speed_right)
        F_hat = lax_friedrichs_flux(UL, UR, self.normals, lam, self.gas, check=False)
        weighted = F_hat * self._surface_weights[..., np.newaxis]
        np.add.at(rhs, self.face_left, -np.einsum("fqm,fqv->fmv", self._phi_left, weighted))
        np.add.at(rhs, self.right_interior, np.einsum("fqm,fqv->fmv", self._phi_right, weighted[self.interior]))

        result = np.einsum("emn,env->emv", self.geometry.mass_inv, rhs)
        check_finite(result, "residual")
        return result

    def trace_speed_max(self, coeffs: np.ndarray, t: float = 0.0) -> np.ndarray:
        """Per element maximum wave speed over its interior and exterior traces."""
        UL, UR = self.face_states(coeffs, t)
        speed_left, speed_right = self._side_speeds(UL, UR)
        face_max = np.maximum(speed_left, speed_right).max(axis=1)
        result = np.zeros(self.mesh.num_elements)
        np.maximum.at(result, self.face_left, face_max)
        np.maximum.at(result, self.right_interior, face_max[self.interior])
        return result

    def exterior_entropy_min(self, coeffs: np.ndarray, t: float = 0.0) -> np.ndarray:
        """
        Per element minimum entropy over the exterior traces of its faces:
        neighbor traces on interior faces, ghost states of inflow and far-field
        boundaries. Elements without such traces get ``+inf``.
        """
        UL, UR = self.face_states(coeffs, t)
        result = np.full(self.mesh.num_elements, np.inf)
        s_right = np.full(len(UL), np.inf)
        s_right[self.interior] = self._face_entropy(UR[self.interior], self.right_interior).min(axis=1)
        for bc, faces in self.boundary_groups:
            if bc.bounds_entropy:
                s_right[faces] = self._face_entropy(UR[faces], self.face_left[faces]).min(axis=1)
        np.minimum.at(result, self.face_left, s_right)
        s_left = self._face_entropy(UL[self.interior], self.face_left[self.interior]).min(axis=1)
        np.minimum.at(result, self.right_interior, s_left)
        return result

    def _face_entropy(self, U: np.ndarray, owners: np.ndarray) -> np.ndarray:
        try:
            return entropy(U, self.gas)
        except AdmissibilityError as e:
            raise e.with_element(int(owners[e.element])) from None
