"""
Point-wise compressible-Euler physics.

States are numpy arrays whose last axis holds the conserved variables
``(rho, rho*u_1, ..., rho*u_d, rho*e)``. Every function accepts any number of
leading axes, so the same code evaluates a single state or all quadrature
points of all elements at once.
"""
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ebdg.errors import AdmissibilityError, ContractViolationError

ADMISSIBILITY_TOL = 1e-13
UNIT_NORMAL_TOL = 1e-12


@dataclass(frozen=True)
class GasModel:
    gamma: float = 1.4
    s_ref: float = 0.0

    def __post_init__(self):
        if not self.gamma > 1.0:
            raise ValueError(f"Ratio of specific heats must exceed 1, got {self.gamma}.")


class PrimitiveState(NamedTuple):
    rho: np.ndarray
    velocity: np.ndarray
    pressure: np.ndarray


def num_dims(U: np.ndarray) -> int:
    return U.shape[-1] - 2


def conserved_state(rho, momentum, total_energy) -> np.ndarray:
    momentum = np.atleast_1d(np.asarray(momentum, dtype=float))
    return np.concatenate([[float(rho)], momentum, [float(total_energy)]])


def conservative_from_primitive(rho, velocity, pressure, gas: GasModel) -> np.ndarray:
    rho = np.asarray(rho, dtype=float)
    velocity = np.asarray(velocity, dtype=float)
    pressure = np.asarray(pressure, dtype=float)
    if velocity.ndim == rho.ndim:
        velocity = velocity[..., np.newaxis]
    kinetic = 0.5 * rho * np.sum(velocity ** 2, axis=-1)
    energy = pressure / (gas.gamma - 1.0) + kinetic
    return np.concatenate([rho[..., np.newaxis], rho[..., np.newaxis] * velocity, energy[..., np.newaxis]],
                          axis=-1)


def _raise_inadmissible(quantity: str, values: np.ndarray, bad: np.ndarray):
    if values.ndim == 0:
        raise AdmissibilityError(f"Non-positive {quantity} {float(values):.6e}")
    idx = tuple(np.argwhere(bad)[0])
    element = int(idx[0])
    point = int(idx[1]) if len(idx) >= 2 else None
    raise AdmissibilityError(f"Non-positive {quantity} {values[idx]:.6e}", element=element, point=point)


def _check_density(rho: np.ndarray):
    bad = ~(rho > ADMISSIBILITY_TOL)
    if np.any(bad):
        _raise_inadmissible("density", rho, bad)


def _check_pressure(p: np.ndarray):
    bad = ~(p > ADMISSIBILITY_TOL)
    if np.any(bad):
        _raise_inadmissible("pressure", p, bad)


def pressure(U: np.ndarray, gas: GasModel) -> np.ndarray:
    """Pressure without admissibility checks; also defined for inadmissible states."""
    rho = U[..., 0]
    momentum = U[..., 1:-1]
    kinetic = 0.5 * np.sum(momentum ** 2, axis=-1) / rho
    return (gas.gamma - 1.0) * (U[..., -1] - kinetic)


def is_admissible(U: np.ndarray, gas: GasModel) -> np.ndarray:
    rho = U[..., 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        p = pressure(U, gas)
    return (rho > ADMISSIBILITY_TOL) & (p > ADMISSIBILITY_TOL)


def primitive_from_conservative(U: np.ndarray, gas: GasModel) -> PrimitiveState:
    rho = U[..., 0]
    _check_density(rho)
    velocity = U[..., 1:-1] / rho[..., np.newaxis]
    p = (gas.gamma - 1.0) * (U[..., -1] - 0.5 * rho * np.sum(velocity ** 2, axis=-1))
    return PrimitiveState(rho, velocity, p)


def _checked_primitives(U: np.ndarray, gas: GasModel) -> PrimitiveState:
    prim = primitive_from_conservative(U, gas)
    _check_pressure(prim.pressure)
    return prim


def flux(U: np.ndarray, gas: GasModel) -> np.ndarray:
    """Cartesian flux tensor with shape ``(..., N_v, N_d)``."""
    rho, u, p = _checked_primitives(U, gas)
    n_dims = u.shape[-1]
    F = np.empty(U.shape + (n_dims,))
    F[..., 0, :] = rho[..., np.newaxis] * u
    F[..., 1:-1, :] = rho[..., np.newaxis, np.newaxis] * u[..., :, np.newaxis] * u[..., np.newaxis, :]
    F[..., 1:-1, :] += p[..., np.newaxis, np.newaxis] * np.eye(n_dims)
    F[..., -1, :] = (U[..., -1] + p)[..., np.newaxis] * u
    return F


def sound_speed(U: np.ndarray, gas: GasModel) -> np.ndarray:
    rho, _, p = _checked_primitives(U, gas)
    return np.sqrt(gas.gamma * p / rho)


def max_wave_speed(U: np.ndarray, gas: GasModel) -> np.ndarray:
    rho, u, p = _checked_primitives(U, gas)
    return np.sqrt(np.sum(u ** 2, axis=-1)) + np.sqrt(gas.gamma * p / rho)


def entropy(U: np.ndarray, gas: GasModel) -> np.ndarray:
    rho, _, p = _checked_primitives(U, gas)
    return np.log(p) - gas.gamma * np.log(rho) + gas.s_ref


def entropy_pair(U: np.ndarray, gas: GasModel) -> tuple[np.ndarray, np.ndarray]:
    rho, u, _ = _checked_primitives(U, gas)
    s = entropy(U, gas)
    scalar = -rho * s
    return scalar, scalar[..., np.newaxis] * u


def mach_number(U: np.ndarray, gas: GasModel) -> np.ndarray:
    rho, u, p = _checked_primitives(U, gas)
    return np.sqrt(np.sum(u ** 2, axis=-1)) / np.sqrt(gas.gamma * p / rho)


def normal_flux(U: np.ndarray, normal: np.ndarray, gas: GasModel) -> np.ndarray:
    return np.einsum("...vd,...d->...v", flux(U, gas), normal)


def lax_friedrichs_flux(UL: np.ndarray, UR: np.ndarray, normal: np.ndarray, lam,
                        gas: GasModel, check: bool = True) -> np.ndarray:
    """Local Lax-Friedrichs flux ``0.5 (F(UL) + F(UR)) n - 0.5 lam (UR - UL)``."""
    normal = np.asarray(normal, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if check:
        if np.any(np.abs(np.linalg.norm(normal, axis=-1) - 1.0) > UNIT_NORMAL_TOL):
            raise ContractViolationError("Face normal is not a unit vector.")
        local = np.maximum(max_wave_speed(UL, gas), max_wave_speed(UR, gas))
        if np.any(lam < local * (1.0 - 1e-12)):
            raise ContractViolationError(
                f"Dissipation speed {np.min(lam - local):.3e} below the local wave-speed maximum.")
    average = 0.5 * (normal_flux(UL, normal, gas) + normal_flux(UR, normal, gas))
    return average - 0.5 * lam[..., np.newaxis] * (UR - UL)


def speed_bound_factor(gas: GasModel) -> float:
    return float(np.sqrt(2.0 + gas.gamma * (gas.gamma - 1.0)))


def combined_speed_bound(states: np.ndarray, weights: np.ndarray, gas: GasModel) -> float:
    """
    Upper bound on the maximum characteristic speed of a convex combination of states.

    Args:
        states: array ``(K, N_v)`` of admissible states
        weights: positive weights summing to one

    Returns: ``sqrt(2 + gamma (gamma - 1)) * max_k nu(U_k)``
    """
    states = np.atleast_2d(states)
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (states.shape[0],):
        raise ContractViolationError("Need one weight per state.")
    if np.any(weights <= 0.0) or abs(np.sum(weights) - 1.0) > 1e-12:
        raise ContractViolationError("Weights must be positive and sum to one.")
    return speed_bound_factor(gas) * float(np.max(max_wave_speed(states, gas)))
