"""
Time-step limits that keep element means entropy bounded.

The mean of an element is split into a convex combination of its volume
quadrature states and of one-dimensional three-point updates at every surface
quadrature point. The weights of the surface states (``theta_surface``)
control the admissible step; a linear program maximizes the smallest ratio of
``theta_surface`` to the surface weights.

With the Lagrange representation the surface states are interpolated from
``N_p`` of the volume points. Any non-singular subset gives a valid split, so
the optimum is taken over all subsets when there are at most ``MAX_SUBSETS``.
"""
import itertools
import logging
import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
import scipy.optimize

from ebdg.errors import CflOptimizationError
from ebdg.mesh.geometry import ElementGeometry
from ebdg.numerics.basis import CONDITION_LIMIT, ReferenceElement
from ebdg.numerics.dg import DgOperator
from ebdg.numerics.euler import GasModel, speed_bound_factor
from ebdg.numerics.quadrature import REFERENCE_VOLUME

Interpolation = Literal["lagrange", "full"]

CERTIFICATE_TOL = 1e-10
MAX_SUBSETS = 256

# Published optima for tensor Gauss-Legendre and Dunavant rules, kept for comparison reports.
# The triangle rows come from one particular interpolation subset; the subset search reaches at least as much.
TABULATED_CFL = {
    ("line", 1): 0.5, ("line", 2): 0.167, ("line", 3): 0.123, ("line", 4): 0.073,
    ("quad", 1): 0.25, ("quad", 2): 0.083, ("quad", 3): 0.062, ("quad", 4): 0.036,
    ("triangle", 1): 0.135, ("triangle", 2): 0.067, ("triangle", 3): 0.058, ("triangle", 4): 0.033,
}


@dataclass(frozen=True)
class ThetaDecomposition:
    """
    Convex split of the element mean.

    ``coupling[s, v]`` expresses the state at surface point ``s`` through the
    volume point states, so that
    ``mean = sum_v theta_volume[v] U_v + sum_s theta_surface[s] U_s``.
    """
    cfl: float
    theta_surface: np.ndarray
    theta_volume: np.ndarray
    zeta: np.ndarray
    volume_weights: np.ndarray
    coupling: np.ndarray
    subset: np.ndarray | None = None

    @property
    def is_feasible(self) -> bool:
        return bool(np.all(self.theta_volume >= -CERTIFICATE_TOL) and np.all(self.theta_surface > 0.0))

    def reconstruct_average(self, volume_values: np.ndarray, surface_values: np.ndarray) -> np.ndarray:
        """Convex combination of point values ``(N_qv, ...)`` and ``(N_faces, N_qf, ...)``."""
        surface_values = surface_values.reshape((-1,) + surface_values.shape[2:])
        return (np.tensordot(self.theta_volume, volume_values, axes=1)
                + np.tensordot(self.theta_surface.ravel(), surface_values, axes=1))


def interpolation_subsets(ref: ReferenceElement) -> list[np.ndarray]:
    """Non-singular ``N_p``-point subsets of the volume points, or the element's own subset if there are too many."""
    if math.comb(ref.num_volume_points, ref.n_basis) > MAX_SUBSETS:
        return [ref.interp_index]
    subsets = [np.array(subset) for subset in itertools.combinations(range(ref.num_volume_points), ref.n_basis)]
    return [subset for subset in subsets if np.linalg.cond(ref.phi_vol[subset]) < CONDITION_LIMIT]


def _lagrange_coupling(ref: ReferenceElement, subset: np.ndarray) -> np.ndarray:
    phi_surface = ref.phi_surf.reshape(-1, ref.n_basis)
    coupling = np.zeros((len(phi_surface), ref.num_volume_points))
    coupling[:, subset] = np.linalg.solve(ref.phi_vol[subset].T, phi_surface.T).T
    return coupling


def _solve_lagrange(volume_weights: np.ndarray, ratio_weights: np.ndarray,
                    coupling: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
    n_s = len(ratio_weights)
    # variables: theta (n_s), t
    c = np.zeros(n_s + 1)
    c[-1] = -1.0
    ratio_rows = np.hstack([-np.eye(n_s), ratio_weights[:, np.newaxis]])
    volume_rows = np.hstack([coupling.T, np.zeros((coupling.shape[1], 1))])
    result = scipy.optimize.linprog(c, A_ub=np.vstack([ratio_rows, volume_rows]),
                                    b_ub=np.concatenate([np.zeros(n_s), volume_weights]),
                                    bounds=[(0.0, None)] * (n_s + 1), method="highs")
    if result.status != 0:
        raise CflOptimizationError(f"Time-step linear program failed: {result.message}")
    theta = result.x[:n_s]
    return float(result.x[-1]), theta, coupling


def _solve_full(volume_weights: np.ndarray, ratio_weights: np.ndarray, phi_volume: np.ndarray,
                phi_surface: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
    """
    Free representation of the surface states through all volume points. The
    products ``b[s, v] = theta[s] a[s, v]`` keep the program linear.
    """
    n_s, n_p = phi_surface.shape
    n_v = phi_volume.shape[0]
    n_b = n_s * n_v
    n_x = n_s + n_b + 1
    c = np.zeros(n_x)
    c[-1] = -1.0

    # sum_v b[s, v] phi_m(r_v) - theta[s] phi_m(g_s) = 0
    A_eq = np.zeros((n_s * n_p, n_x))
    for s in range(n_s):
        rows = slice(s * n_p, (s + 1) * n_p)
        A_eq[rows, s] = -phi_surface[s]
        A_eq[rows, n_s + s * n_v:n_s + (s + 1) * n_v] = phi_volume.T
    ratio_rows = np.zeros((n_s, n_x))
    ratio_rows[:, :n_s] = -np.eye(n_s)
    ratio_rows[:, -1] = ratio_weights
    volume_rows = np.zeros((n_v, n_x))
    for s in range(n_s):
        volume_rows[:, n_s + s * n_v:n_s + (s + 1) * n_v] = np.eye(n_v)
    bounds = [(0.0, None)] * n_s + [(None, None)] * n_b + [(0.0, None)]
    result = scipy.optimize.linprog(c, A_ub=np.vstack([ratio_rows, volume_rows]),
                                    b_ub=np.concatenate([np.zeros(n_s), volume_weights]),
                                    A_eq=A_eq, b_eq=np.zeros(n_s * n_p), bounds=bounds, method="highs")
    if result.status != 0:
        raise CflOptimizationError(f"Time-step linear program failed: {result.message}")
    theta = result.x[:n_s]
    products = result.x[n_s:n_s + n_b].reshape(n_s, n_v)
    with np.errstate(divide="ignore", invalid="ignore"):
        coupling = np.where(theta[:, np.newaxis] > 0.0, products / theta[:, np.newaxis], 0.0)
    return float(result.x[-1]), theta, coupling


def _decompose(ref: ReferenceElement, volume_weights: np.ndarray, ratio_weights: np.ndarray, zeta: np.ndarray,
               interpolation: Interpolation, subsets: list[np.ndarray] | None = None) -> ThetaDecomposition:
    subset = None
    if interpolation == "lagrange":
        t = -np.inf
        for candidate in subsets if subsets is not None else interpolation_subsets(ref):
            value, values, matrix = _solve_lagrange(volume_weights, ratio_weights, _lagrange_coupling(ref, candidate))
            if value > t:
                t, theta, coupling, subset = value, values, matrix, candidate
    elif interpolation == "full":
        t, theta, coupling = _solve_full(volume_weights, ratio_weights, ref.phi_vol,
                                         ref.phi_surf.reshape(-1, ref.n_basis))
    else:
        raise CflOptimizationError(f"Unknown surface-state representation '{interpolation}'.")
    theta_volume = volume_weights - theta @ coupling
    decomposition = ThetaDecomposition(cfl=t, theta_surface=theta.reshape(zeta.shape), theta_volume=theta_volume,
                                       zeta=zeta, volume_weights=volume_weights, coupling=coupling, subset=subset)
    _check_certificate(decomposition, ratio_weights)
    return decomposition


def _check_certificate(decomposition: ThetaDecomposition, ratio_weights: np.ndarray):
    if not decomposition.cfl > 0.0:
        raise CflOptimizationError(f"Time-step linear program returned a non-positive optimum {decomposition.cfl}.")
    theta = decomposition.theta_surface.ravel()
    if np.any(theta < decomposition.cfl * ratio_weights - CERTIFICATE_TOL):
        raise CflOptimizationError("Surface weights of the optimum violate the ratio constraint.")
    if np.any(decomposition.theta_volume < -CERTIFICATE_TOL):
        raise CflOptimizationError(
            f"Volume weights of the optimum are negative ({decomposition.theta_volume.min():.3e}).")


def reference_decomposition(ref: ReferenceElement, interpolation: Interpolation = "lagrange",
                            subsets: list[np.ndarray] | None = None) -> ThetaDecomposition:
    """Decomposition on the reference element, ratios taken against the edge weights."""
    volume = REFERENCE_VOLUME[ref.shape]
    volume_weights = ref.volume_rule.weights / volume
    edge_weights = np.tile(ref.surface.rules[0].weights, ref.num_faces)
    jacobians = np.ones(ref.num_faces) if ref.shape == "line" else np.linalg.norm(ref.surface.tangents, axis=1)
    zeta = (jacobians[:, np.newaxis] * ref.surface.rules[0].weights[np.newaxis, :]) / volume
    return _decompose(ref, volume_weights, edge_weights, zeta, interpolation, subsets)


def optimize_cfl_eb(shape: str, p: int, volume_order: int | None = None, surface_order: int | None = None,
                    interpolation: Interpolation = "lagrange",
                    logger: logging.Logger = logging.getLogger(__name__)) -> float:
    ref = ReferenceElement(shape, p, volume_order=volume_order, surface_order=surface_order, logger=logger)
    decomposition = reference_decomposition(ref, interpolation)
    subset = "" if decomposition.subset is None else f", interpolation subset {decomposition.subset.tolist()}"
    logger.debug(f"CFL for {shape} p={p} ({interpolation}): {decomposition.cfl:.6f}, "
                 f"min volume weight {decomposition.theta_volume.min():.3e}{subset}")
    return decomposition.cfl


def element_decomposition(geometry: ElementGeometry, e: int, interpolation: Interpolation = "lagrange",
                          subsets: list[np.ndarray] | None = None) -> ThetaDecomposition:
    """Decomposition of one physical element; its optimum bounds ``2 dt lambda`` directly."""
    ref = geometry.ref
    volume_weights = geometry.det_vol[e] * ref.volume_rule.weights / geometry.volume[e]
    zeta = geometry.zeta[e]
    return _decompose(ref, volume_weights, zeta.ravel(), zeta, interpolation, subsets)


def element_cfl_limits(geometry: ElementGeometry, interpolation: Interpolation = "lagrange",
                       logger: logging.Logger = logging.getLogger(__name__)) -> np.ndarray:
    """
    Per-element optimum of ``min theta / zeta``, one linear program per element.
    Every element reuses the interpolation subset that is optimal on the reference element.
    """
    subsets = None
    if interpolation == "lagrange":
        subsets = [reference_decomposition(geometry.ref, interpolation).subset]
    limits = np.array([element_decomposition(geometry, e, interpolation, subsets).cfl
                       for e in range(geometry.mesh.num_elements)])
    logger.debug(f"Per-element time-step limits between {limits.min():.4e} and {limits.max():.4e}")
    return limits


def speed_factor(n_dims: int, gas: GasModel) -> float:
    """Inflation of the time-step wave speed; one-dimensional updates need the plain maximum."""
    if n_dims == 1:
        return 1.0
    return max(float(np.sqrt(n_dims)), speed_bound_factor(gas))


def time_step(operator: DgOperator, coeffs: np.ndarray, cfl: float, safety: float = 0.8, t: float = 0.0,
              element_limits: np.ndarray | None = None) -> tuple[float, np.ndarray]:
    """
    Largest admissible step ``safety * min_e 0.5 * CFL * L_e / lambda_e``.

    With ``element_limits`` the per-element optimum replaces ``CFL * L_e``.

    Returns: step size and per-element ``lambda_e``
    """
    lam = speed_factor(operator.mesh.n_dims, operator.gas) * operator.trace_speed_max(coeffs, t)
    if element_limits is None:
        reach = cfl * operator.geometry.characteristic_length
    else:
        reach = element_limits
    dt = safety * float(np.min(0.5 * reach / lam))
    if not dt > 0.0 or not np.isfinite(dt):
        raise CflOptimizationError(f"Non-positive time step {dt}.")
    return dt, lam


def cfl_table(shapes: list[str], orders: list[int], interpolation: Interpolation = "lagrange",
              logger: logging.Logger = logging.getLogger(__name__)) -> list[dict]:
    rows = []
    for shape in shapes:
        for p in orders:
            value = optimize_cfl_eb(shape, p, interpolation=interpolation, logger=logger)
            rows.append(cfl_row(shape, p, value))
    return rows


def cfl_row(shape: str, p: int, value: float) -> dict:
    tabulated = TABULATED_CFL.get((shape, p))
    return {"shape": shape, "p": p, "cfl": value, "tabulated": tabulated,
            "difference": None if tabulated is None else value - tabulated}
