"""
Built-in verification problems: meshes, boundary conditions, initial data,
exact solutions and error norms.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from ebdg.errors import CaseError
from ebdg.mesh.generators import annulus, rectangle, uniform_interval
from ebdg.mesh.geometry import ElementGeometry, Mesh, map_points
from ebdg.numerics.basis import ReferenceElement, l2_project
from ebdg.numerics.dg import BoundaryCondition, DgSolution, element_averages
from ebdg.numerics.euler import GasModel, PrimitiveState, conservative_from_primitive, entropy
from ebdg.numerics.limiter import apply_entropy_limiter, enforce_density_positivity
from ebdg.numerics.quadrature import MAX_ORDER, volume_rule

CASE_NAMES: tuple[str, ...] = ("advect1d", "shock1d", "sod_periodic", "dmr", "cylinder")
DEFAULT_H = {"advect1d": 1.0 / 20.0, "shock1d": 1.0 / 100.0, "sod_periodic": 1.0 / 64.0, "dmr": 1.0 / 30.0,
             "cylinder": 1.0}

PRE_SHOCK = (1.4, 0.0, 1.0)
DMR_POST_SHOCK = (8.0, 8.25 * np.cos(np.pi / 6.0), -8.25 * np.sin(np.pi / 6.0), 116.5)
DMR_WALL_START = 1.0 / 6.0
CYLINDER_MACH = 0.38
PROJECTION_FLOOR = 1e-12

# field name -> L2 error
ErrorMap = dict[str, float]


@dataclass(frozen=True)
class NormalShock:
    """Shock running at ``speed`` into gas at rest; ``post`` is the state behind it."""
    mach: float
    speed: float
    pre: tuple[float, float, float]
    post: tuple[float, float, float]


def normal_shock(mach: float, gas: GasModel, pre: tuple[float, float, float] = PRE_SHOCK) -> NormalShock:
    if mach < 1.0:
        raise CaseError(f"Shock Mach number must be at least 1, got {mach}.")
    rho1, u1, p1 = pre
    if u1 != 0.0:
        raise CaseError("The pre-shock gas must be at rest.")
    g = gas.gamma
    c1 = np.sqrt(g * p1 / rho1)
    speed = mach * c1
    rho2 = rho1 * (g + 1.0) * mach ** 2 / ((g - 1.0) * mach ** 2 + 2.0)
    p2 = p1 * (1.0 + 2.0 * g / (g + 1.0) * (mach ** 2 - 1.0))
    u2 = speed * (1.0 - rho1 / rho2)
    return NormalShock(mach=mach, speed=speed, pre=pre, post=(rho2, u2, p2))


@dataclass
class CaseSpec:
    name: str
    h: float
    gas: GasModel = field(default_factory=GasModel)
    mach: float = 2.0
    end_time: float | None = None
    element: str = "quad"
    level: int = 1

    def __post_init__(self):
        if self.name not in CASE_NAMES:
            raise CaseError(f"Unknown case '{self.name}'. Allowed: {', '.join(CASE_NAMES)}.")
        if not self.h > 0.0:
            raise CaseError(f"Element size must be positive, got {self.h}.")
        if self.end_time is None:
            self.end_time = default_end_time(self)

    @property
    def shock(self) -> NormalShock:
        return normal_shock(self.mach, self.gas)

    @property
    def has_exact_solution(self) -> bool:
        return self.name in ("advect1d", "shock1d")


def default_end_time(case: CaseSpec) -> float:
    if case.name == "advect1d":
        return 1.0
    if case.name == "shock1d":
        # front reaches x = 1
        return 1.0 / case.shock.speed
    if case.name == "sod_periodic":
        return 0.1
    if case.name == "dmr":
        return 0.25
    return 200.0


def _count(length: float, h: float) -> int:
    return max(1, int(round(length / h)))


def build_mesh(case: CaseSpec, logger: logging.Logger = logging.getLogger(__name__)) -> Mesh:
    if case.name in ("advect1d", "sod_periodic"):
        return uniform_interval(_count(1.0, case.h), 0.0, 1.0, periodic=True, logger=logger)
    if case.name == "shock1d":
        return uniform_interval(_count(1.2, case.h), -0.1, 1.1, periodic=False, logger=logger)
    if case.name == "dmr":
        def tagger(side: str, midpoint: np.ndarray) -> str:
            if side == "bottom":
                return "wall" if midpoint[0] > DMR_WALL_START else "bottom_inflow"
            return side

        return rectangle(_count(4.0, case.h), _count(1.0, case.h), (0.0, 4.0), (0.0, 1.0),
                         element=case.element, tagger=tagger, logger=logger)
    scale = 2 ** (case.level - 1)
    return annulus(8 * scale, 24 * scale, 1.0, 20.0, order=3, logger=logger)


def _state(gas: GasModel, rho: float, velocity, p: float) -> np.ndarray:
    return conservative_from_primitive(rho, np.atleast_1d(velocity), p, gas)


def _dmr_state(x: np.ndarray, t: float, gas: GasModel) -> np.ndarray:
    rho2, u2, v2, p2 = DMR_POST_SHOCK
    post = _state(gas, rho2, [u2, v2], p2)
    pre = _state(gas, PRE_SHOCK[0], [0.0, 0.0], PRE_SHOCK[2])
    front = DMR_WALL_START + (x[..., 1] + 20.0 * t) / np.sqrt(3.0)
    return np.where((x[..., 0] < front)[..., np.newaxis], post, pre)


def _freestream(gas: GasModel) -> np.ndarray:
    rho, _, p = PRE_SHOCK
    c = np.sqrt(gas.gamma * p / rho)
    return _state(gas, rho, [CYLINDER_MACH * c, 0.0], p)


def boundary_conditions(case: CaseSpec) -> dict[str, BoundaryCondition]:
    gas = case.gas
    if case.name in ("advect1d", "sod_periodic"):
        return {}
    if case.name == "shock1d":
        rho2, u2, p2 = case.shock.post
        return {"left": BoundaryCondition("supersonic_inflow", state=_state(gas, rho2, u2, p2)),
                "right": BoundaryCondition("farfield", state=_state(gas, PRE_SHOCK[0], 0.0, PRE_SHOCK[2]))}
    if case.name == "dmr":
        rho2, u2, v2, p2 = DMR_POST_SHOCK
        post = _state(gas, rho2, [u2, v2], p2)
        return {"left": BoundaryCondition("supersonic_inflow", state=post),
                "bottom_inflow": BoundaryCondition("supersonic_inflow", state=post),
                "wall": BoundaryCondition("slip_wall"),
                "right": BoundaryCondition("outflow_extrapolate"),
                "top": BoundaryCondition("supersonic_inflow", state_fn=lambda x, t: _dmr_state(x, t, gas))}
    return {"wall": BoundaryCondition("slip_wall"), "farfield": BoundaryCondition("farfield", state=_freestream(gas))}


def initial_state(case: CaseSpec, x: np.ndarray) -> np.ndarray:
    """Conserved initial state at physical points ``(..., N_d)``."""
    gas = case.gas
    if case.name == "advect1d":
        return exact_conserved(case, x, 0.0)
    if case.name == "shock1d":
        return exact_conserved(case, x, 0.0)
    if case.name == "sod_periodic":
        inside = (x[..., 0] >= 0.25) & (x[..., 0] < 0.75)
        high = _state(gas, 1.0, 0.0, 1.0)
        low = _state(gas, 0.125, 0.0, 0.1)
        return np.where(inside[..., np.newaxis], high, low)
    if case.name == "dmr":
        return _dmr_state(x, 0.0, gas)
    return np.broadcast_to(_freestream(gas), x.shape[:-1] + (4,)).copy()


def exact_solution(case: CaseSpec, x: np.ndarray, t: float) -> PrimitiveState:
    x = np.asarray(x, dtype=float)
    if case.name == "advect1d":
        position = x[..., 0] if x.ndim and x.shape[-1] == 1 else x
        rho = 1.0 + 0.1 * np.sin(2.0 * np.pi * (position - t))
        return PrimitiveState(rho, np.ones(rho.shape + (1,)), np.ones_like(rho))
    if case.name == "shock1d":
        position = x[..., 0] if x.ndim and x.shape[-1] == 1 else x
        shock = case.shock
        behind = position < shock.speed * t
        rho = np.where(behind, shock.post[0], shock.pre[0])
        u = np.where(behind, shock.post[1], shock.pre[1])
        p = np.where(behind, shock.post[2], shock.pre[2])
        return PrimitiveState(rho, u[..., np.newaxis], p)
    raise CaseError(f"No exact solution is defined for case '{case.name}'.")


def exact_conserved(case: CaseSpec, x: np.ndarray, t: float) -> np.ndarray:
    rho, velocity, p = exact_solution(case, x, t)
    return conservative_from_primitive(rho, velocity, p, case.gas)


def initialize(case: CaseSpec, geometry: ElementGeometry,
               logger: logging.Logger = logging.getLogger(__name__)) -> DgSolution:
    """
    L2 projection of the initial data with a high-order rule. Elements whose
    projection leaves the admissible set at any point are scaled toward their
    mean, which is always admissible.
    """
    mesh, ref = geometry.mesh, geometry.ref
    expected = 1 if case.name in ("advect1d", "shock1d", "sod_periodic") else 2
    if mesh.n_dims != expected:
        raise CaseError(f"Case '{case.name}' needs a {expected}D mesh, got {mesh.n_dims}D.")
    rule = volume_rule(mesh.shape, MAX_ORDER)
    x, _, det = map_points(mesh, rule.points)
    coeffs = l2_project(lambda points: initial_state(case, points), ref, x, det, rule)
    return DgSolution(make_admissible(coeffs, geometry, case.gas, logger), ref.p)


def make_admissible(coeffs: np.ndarray, geometry: ElementGeometry, gas: GasModel,
                    logger: logging.Logger = logging.getLogger(__name__)) -> np.ndarray:
    ref = geometry.ref
    phi_points = np.concatenate([ref.phi_vol, ref.phi_surf.reshape(-1, ref.n_basis)], axis=0)
    averages = element_averages(coeffs, geometry)
    limited, theta = enforce_density_positivity(coeffs, phi_points, averages[:, 0], PROJECTION_FLOOR)
    limited, epsilon = apply_entropy_limiter(limited, phi_points, averages, -np.inf, gas, PROJECTION_FLOOR)
    touched = int(np.count_nonzero((theta < 1.0) | (epsilon > 0.0)))
    if touched:
        logger.info(f"Initial projection scaled toward the mean on {touched} elements")
    return limited


def quadrature_l2(values: np.ndarray, geometry: ElementGeometry) -> np.ndarray:
    """Discrete L2 norm over the domain of point values ``(N_e, N_qv, ...)``, one per trailing field."""
    weighted = geometry.det_vol * geometry.ref.volume_rule.weights
    return np.sqrt(np.einsum("eq,eq...->...", weighted, values ** 2))


FIELD_NAMES_1D = ("density", "momentum", "energy")


def error_norms(coeffs: np.ndarray, geometry: ElementGeometry, case: CaseSpec, t: float) -> ErrorMap:
    """Per-field L2 errors against the exact solution; entropy deviation for the cylinder."""
    U = np.einsum("qm,emv->eqv", geometry.ref.phi_vol, coeffs)
    if case.name == "cylinder":
        s_inf = float(entropy(_freestream(case.gas), case.gas))
        return {"entropy": float(quadrature_l2(entropy(U, case.gas) - s_inf, geometry))}
    if not case.has_exact_solution:
        raise CaseError(f"No error norm is defined for case '{case.name}'.")
    exact = exact_conserved(case, geometry.x_vol, t)
    errors = quadrature_l2(U - exact, geometry)
    return {name: float(value) for name, value in zip(FIELD_NAMES_1D, errors)}


def convergence_rows(levels: Iterable[float], errors: Iterable[float]) -> list[dict]:
    """Rows ``(h, error, rate)`` with ``rate_i = log(e_{i-1}/e_i) / log(h_{i-1}/h_i)``."""
    rows = []
    previous = None
    for h, error in zip(levels, errors):
        rate = None
        if previous is not None and error > 0.0 and previous[1] > 0.0:
            rate = float(np.log(previous[1] / error) / np.log(previous[0] / h))
        rows.append({"h": float(h), "error": float(error), "rate": rate})
        previous = (h, error)
    return rows


def convergence_study(case: CaseSpec, p: int, levels: list[float], evaluate: Callable[[CaseSpec, int, float], float],
                      mapper: Callable = map) -> list[dict]:
    """
    Density errors of ``case`` at every element size in ``levels``.

    ``evaluate(case, p, h)`` runs one level; ``mapper`` may distribute the levels.
    """
    if len(levels) < 3:
        raise CaseError(f"A convergence study needs at least three levels, got {len(levels)}.")
    errors = list(mapper(_LevelTask(evaluate, case, p), levels))
    return convergence_rows(levels, errors)


class _LevelTask:

    def __init__(self, evaluate, case: CaseSpec, p: int):
        self.evaluate = evaluate
        self.case = case
        self.p = p

    def __call__(self, h: float, **kwargs) -> float:
        return self.evaluate(self.case, self.p, h, **kwargs)
