"""
Entropy-bound estimation and the linear-scaling limiters.

Every element is checked on its point set D: all volume quadrature points
followed by all surface quadrature points. Scaling toward the element mean acts
on modal coefficients; the mean is carried by the constant basis function only.
"""
import logging
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from ebdg.errors import AdmissibilityError, ContractViolationError
from ebdg.numerics.dg import DgOperator, element_averages
from ebdg.numerics.euler import GasModel, entropy, pressure

LimiterMode = Literal["entropy", "positivity", "none"]
BoundStrategy = Literal["local", "global"]

DEFAULT_DENSITY_FLOOR = 1e-13
MEAN_BOUND_TOL = 1e-10
ROUNDOFF_RTOL = 1e-13


@dataclass
class EntropyBoundState:
    """Per-element entropy bounds at the current and the previous step."""
    s_current: np.ndarray
    s_previous: np.ndarray | None = None

    def advance(self, bounds: np.ndarray):
        self.s_previous = self.s_current
        self.s_current = np.asarray(bounds, dtype=float)


@dataclass
class LimiterReport:
    epsilon: np.ndarray
    density_theta: np.ndarray
    bounds: np.ndarray | None = None
    relaxed_elements: list[int] = field(default_factory=list)

    @property
    def active_count(self) -> int:
        return int(np.count_nonzero(self.epsilon > 0.0))

    @property
    def density_count(self) -> int:
        return int(np.count_nonzero(self.density_theta < 1.0))

    @property
    def max_epsilon(self) -> float:
        return float(self.epsilon.max()) if self.epsilon.size else 0.0

    def merge(self, other: "LimiterReport") -> "LimiterReport":
        """Element-wise worst case of two reports, used across Runge-Kutta stages."""
        return LimiterReport(epsilon=np.maximum(self.epsilon, other.epsilon),
                             density_theta=np.minimum(self.density_theta, other.density_theta),
                             bounds=other.bounds if other.bounds is not None else self.bounds,
                             relaxed_elements=sorted(set(self.relaxed_elements) | set(other.relaxed_elements)))


def _extrapolated_minimum(s: np.ndarray, points: np.ndarray) -> np.ndarray:
    """
    ``s_m - (min_{x != x_m} |x_m - x| / |x_m - x_n|) (s_n - s_m)`` per element.

    Args:
        s: entropies ``(N_e, N_D)``
        points: physical coordinates ``(N_e, N_D, N_d)``
    """
    rows = np.arange(s.shape[0])
    m = np.argmin(s, axis=1)
    n = np.argmax(s, axis=1)
    s_m, s_n = s[rows, m], s[rows, n]
    distance = np.linalg.norm(points - points[rows, m][:, np.newaxis, :], axis=-1)
    others = np.where(distance > 0.0, distance, np.inf)
    nearest = others.min(axis=1)
    spread = s_n - s_m
    span = distance[rows, n]
    with np.errstate(divide="ignore", invalid="ignore"):
        extrapolation = np.where(spread > 0.0, nearest / span * spread, 0.0)
    return s_m - extrapolation


def estimate_entropy_bound(s_interior: np.ndarray, points: np.ndarray, s_exterior: np.ndarray | float,
                           previous_bounds: np.ndarray | None = None) -> float:
    """
    Entropy bound of one element from its own point entropies, the entropies of
    the exterior traces and, after the first step, the previous bounds of the
    element and its face neighbors.

    Previous bounds count only up to the smallest sampled entropy, so the bound
    never exceeds the minimum over the element points and exterior traces.
    """
    s_interior = np.asarray(s_interior, dtype=float)
    points = np.asarray(points, dtype=float).reshape(len(s_interior), -1)
    if len(np.unique(points, axis=0)) < 2:
        raise ContractViolationError("Entropy-bound estimate needs at least two distinct points.")
    if not np.all(np.isfinite(s_interior)):
        raise ContractViolationError("Entropy values must be finite.")
    exterior = np.min(s_exterior) if np.size(s_exterior) else np.inf
    estimate = min(float(exterior), float(_extrapolated_minimum(s_interior[np.newaxis], points[np.newaxis])[0]))
    if previous_bounds is None:
        return estimate
    sampled = min(float(exterior), float(s_interior.min()))
    return max(estimate, min(float(np.min(previous_bounds)), sampled))


def estimate_entropy_bounds(s_points: np.ndarray, points: np.ndarray, s_exterior: np.ndarray,
                            previous: np.ndarray | None, neighbor_table: np.ndarray) -> np.ndarray:
    """All elements at once; ``neighbor_table`` holds ``-1`` on boundary faces."""
    estimate = np.minimum(s_exterior, _extrapolated_minimum(s_points, points))
    if previous is None:
        return estimate
    neighbor_bounds = np.where(neighbor_table >= 0, previous[np.maximum(neighbor_table, 0)], np.inf)
    surrounding = np.minimum(previous, neighbor_bounds.min(axis=1))
    # capped at the sampled minimum, which the mean of the next step cannot undercut
    sampled = np.minimum(s_exterior, s_points.min(axis=1))
    return np.maximum(estimate, np.minimum(surrounding, sampled))


def _constant_coefficients(mean: np.ndarray, phi_constant: float) -> np.ndarray:
    return mean / phi_constant


def _as_batch(coeffs: np.ndarray) -> tuple[np.ndarray, bool]:
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.ndim == 2:
        return coeffs[np.newaxis], True
    return coeffs, False


def enforce_density_positivity(coeffs: np.ndarray, phi_points: np.ndarray, average_density,
                               density_floor: float = DEFAULT_DENSITY_FLOOR) -> tuple[np.ndarray, np.ndarray]:
    """
    Scale the density field toward its mean so that it stays above the floor on all points.

    Args:
        coeffs: ``(N_p, N_v)`` or ``(N_e, N_p, N_v)``
        phi_points: basis values at the point set, ``(N_D, N_p)``
        average_density: element mean density, scalar or ``(N_e,)``

    Returns: scaled coefficients and ``theta`` per element
    """
    batch, squeeze = _as_batch(coeffs)
    mean = np.atleast_1d(np.asarray(average_density, dtype=float))
    below = np.flatnonzero(~(mean > density_floor))
    if below.size:
        raise AdmissibilityError(f"Mean density {mean[below[0]]:.6e} below the floor {density_floor:.1e}",
                                 element=int(below[0]))
    rho_min = np.einsum("dm,em->ed", phi_points, batch[:, :, 0]).min(axis=1)
    theta = np.ones_like(mean)
    low = rho_min < density_floor
    theta[low] = np.minimum(1.0, (mean[low] - density_floor) / (mean[low] - rho_min[low]))

    result = batch.copy()
    if np.any(low):
        constant = _constant_coefficients(mean, phi_points[0, 0])
        rho = theta[:, np.newaxis] * batch[:, :, 0]
        rho[:, 0] += (1.0 - theta) * constant
        result[:, :, 0] = rho
    return (result[0], theta[0]) if squeeze else (result, theta)


def entropy_constraint(U: np.ndarray, bound_factor: np.ndarray, gas: GasModel, pressure_floor: float = 0.0):
    """
    ``p(U) - bound_factor rho^gamma - floor`` with ``bound_factor = exp(s0 - s_ref)``;
    concave in ``U``, non-negative where the bound holds.
    """
    rho = U[..., 0]
    with np.errstate(invalid="ignore"):
        return pressure(U, gas) - bound_factor * np.power(rho, gas.gamma) - pressure_floor


def apply_entropy_limiter(coeffs: np.ndarray, phi_points: np.ndarray, average: np.ndarray, bound, gas: GasModel,
                          pressure_floor: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """
    Linear scaling ``U + eps (U_mean - U)`` restoring ``s(U) >= s0`` on all points.

    ``bound = -inf`` reduces the constraint to pressure positivity.

    Args:
        coeffs: ``(N_p, N_v)`` or ``(N_e, N_p, N_v)``, density already positive on all points
        phi_points: basis values at the point set, ``(N_D, N_p)``
        average: element means ``(N_v,)`` or ``(N_e, N_v)``
        bound: entropy bound, scalar or ``(N_e,)``

    Returns: limited coefficients and ``eps`` per element
    """
    batch, squeeze = _as_batch(coeffs)
    average = np.atleast_2d(np.asarray(average, dtype=float))
    factor = np.exp(np.broadcast_to(np.asarray(bound, dtype=float), (batch.shape[0],)) - gas.s_ref)

    mean_margin = entropy_constraint(average, factor, gas, pressure_floor)
    bad = np.flatnonzero(~((average[:, 0] > 0.0) & (mean_margin > 0.0)))
    if bad.size:
        raise AdmissibilityError("Element mean violates the entropy bound", element=int(bad[0]))

    U = np.einsum("dm,emv->edv", phi_points, batch)
    margin = entropy_constraint(U, factor[:, np.newaxis], gas, pressure_floor)
    margin = np.where(np.isnan(margin), -np.inf, margin)
    tau = np.minimum(0.0, margin.min(axis=1))
    # undershoots at rounding level of the mean pressure count as satisfied
    tau = np.where(tau < -ROUNDOFF_RTOL * np.abs(pressure(average, gas)), tau, 0.0)
    epsilon = np.zeros_like(tau)
    active = tau < 0.0
    epsilon[active] = np.where(np.isinf(tau[active]), 1.0, tau[active] / (tau[active] - mean_margin[active]))

    result = batch.copy()
    if np.any(active):
        constant = _constant_coefficients(average[active], phi_points[0, 0])
        scaled = (1.0 - epsilon[active])[:, np.newaxis, np.newaxis] * batch[active]
        scaled[:, 0, :] += epsilon[active][:, np.newaxis] * constant
        result[active] = scaled
    return (result[0], epsilon[0]) if squeeze else (result, epsilon)


class EntropyLimiter:
    """
    Limiting stage of the scheme: entropy-bound bookkeeping plus density and
    entropy scaling of all elements.
    """

    def __init__(self, operator: DgOperator, mode: LimiterMode = "entropy", strategy: BoundStrategy = "local",
                 global_bound: float | None = None, density_floor: float = DEFAULT_DENSITY_FLOOR,
                 strict_mean_check: bool = True, logger: logging.Logger = logging.getLogger(__name__)):
        if mode == "entropy" and strategy == "global" and global_bound is None:
            raise ContractViolationError("The global entropy-bound strategy needs a bound value.")
        self.operator = operator
        self.geometry = operator.geometry
        self.gas = operator.gas
        self.mode = mode
        self.strategy = strategy
        self.global_bound = global_bound
        self.density_floor = density_floor
        self.strict_mean_check = strict_mean_check
        self.logger = logger

        ref = operator.ref
        self.phi_points = np.concatenate([ref.phi_vol, ref.phi_surf.reshape(-1, ref.n_basis)], axis=0)
        self.points = self.geometry.points_D
        self.neighbor_table = operator.mesh.neighbor_table()
        self.state: EntropyBoundState | None = None

    @property
    def pressure_floor(self) -> float:
        return self.density_floor if self.mode == "positivity" else 0.0

    def point_values(self, coeffs: np.ndarray) -> np.ndarray:
        return np.einsum("dm,emv->edv", self.phi_points, coeffs)

    def point_entropy(self, coeffs: np.ndarray) -> np.ndarray:
        return entropy(self.point_values(coeffs), self.gas)

    def update_bounds(self, coeffs: np.ndarray, t: float = 0.0) -> np.ndarray | None:
        """Bounds for the coming step; the first call uses the extrapolated estimate alone."""
        n_e = coeffs.shape[0]
        if self.mode == "none":
            return None
        if self.mode == "positivity":
            bounds = np.full(n_e, -np.inf)
        elif self.strategy == "global":
            bounds = np.full(n_e, float(self.global_bound))
        else:
            s_points = self.point_entropy(coeffs)
            s_exterior = self.operator.exterior_entropy_min(coeffs, t)
            previous = self.state.s_current if self.state is not None else None
            bounds = estimate_entropy_bounds(s_points, self.points, s_exterior, previous, self.neighbor_table)
        if self.state is None:
            self.state = EntropyBoundState(s_current=bounds)
        else:
            self.state.advance(bounds)
        return bounds

    def limit(self, coeffs: np.ndarray, bounds: np.ndarray | None = None) -> tuple[np.ndarray, LimiterReport]:
        n_e = coeffs.shape[0]
        if self.mode == "none":
            return coeffs, LimiterReport(epsilon=np.zeros(n_e), density_theta=np.ones(n_e))
        if bounds is None:
            bounds = self.state.s_current if self.state is not None else self.update_bounds(coeffs)

        averages = element_averages(coeffs, self.geometry)
        limited, theta = enforce_density_positivity(coeffs, self.phi_points, averages[:, 0], self.density_floor)
        bounds, relaxed = self._checked_bounds(averages, bounds)
        limited, epsilon = apply_entropy_limiter(limited, self.phi_points, averages, bounds, self.gas,
                                                 self.pressure_floor)
        return limited, LimiterReport(epsilon=epsilon, density_theta=theta, bounds=bounds,
                                      relaxed_elements=relaxed)

    def _checked_bounds(self, averages: np.ndarray, bounds: np.ndarray) -> tuple[np.ndarray, list[int]]:
        """
        Mean-state precondition. Means within ``MEAN_BOUND_TOL`` of their bound count as ties;
        outside strict mode larger violations are relaxed the same way and reported.
        """
        if self.mode == "positivity":
            return bounds, []
        s_mean = entropy(averages, self.gas)
        gap = s_mean - bounds
        tight = gap < MEAN_BOUND_TOL
        if not np.any(tight):
            return bounds, []
        violated = np.flatnonzero(gap < -MEAN_BOUND_TOL)
        if violated.size and self.strict_mean_check:
            raise AdmissibilityError("Element mean violates the entropy bound", element=int(violated[0]))
        relaxed = bounds.copy()
        # just below the mean entropy so the mean stays strictly feasible
        relaxed[tight] = s_mean[tight] - MEAN_BOUND_TOL
        if violated.size:
            self.logger.debug(f"Relaxed the entropy bound of {violated.size} elements to their mean entropy")
        return relaxed, violated.tolist()

    def initial_minimum_entropy(self, coeffs: np.ndarray) -> float:
        return float(self.point_entropy(coeffs).min())
