"""Explicit Runge-Kutta schemes in Shu-Osher form with a limiting hook after every stage."""
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ebdg.errors import AdmissibilityError

SCHEME_NAMES: tuple[str, ...] = ("forward_euler", "ssprk33", "rk4_classic")
SCHEME_ALIASES = {"rk4": "rk4_classic", "euler": "forward_euler", "ssprk3": "ssprk33"}

# coefficients, time -> time derivative
ResidualFunction = Callable[[np.ndarray, float], np.ndarray]
# stage value, stage index -> limited stage value
StageLimiter = Callable[[np.ndarray, int], np.ndarray]


@dataclass(frozen=True)
class Scheme:
    """
    Stage ``i`` is ``u_i = sum_{j<i} alpha[i-1][j] u_j + dt beta[i-1][j] L(u_j)``;
    ``stage_times[j]`` is the time level of ``u_j`` as a fraction of ``dt``.
    """
    kind: str
    alpha: tuple[tuple[float, ...], ...]
    beta: tuple[tuple[float, ...], ...]
    stage_times: tuple[float, ...]

    @property
    def num_stages(self) -> int:
        return len(self.alpha)

    @property
    def is_convex(self) -> bool:
        """Whether every stage is a convex combination of forward-Euler sub-steps."""
        for a_row, b_row in zip(self.alpha, self.beta):
            if any(a < 0.0 or b < 0.0 for a, b in zip(a_row, b_row)):
                return False
            if abs(sum(a_row) - 1.0) > 1e-14:
                return False
        return True

    @classmethod
    def from_name(cls, name: str) -> "Scheme":
        kind = SCHEME_ALIASES.get(name, name)
        if kind not in SCHEMES:
            raise ValueError(f"Unknown time integration scheme '{name}'. Allowed: {', '.join(SCHEME_NAMES)}.")
        return SCHEMES[kind]


SCHEMES = {
    "forward_euler": Scheme("forward_euler", alpha=((1.0,),), beta=((1.0,),), stage_times=(0.0,)),
    "ssprk33": Scheme("ssprk33",
                      alpha=((1.0,), (0.75, 0.25), (1.0 / 3.0, 0.0, 2.0 / 3.0)),
                      beta=((1.0,), (0.0, 0.25), (0.0, 0.0, 2.0 / 3.0)),
                      stage_times=(0.0, 1.0, 0.5)),
    # classical fourth-order method; the last stage carries a negative weight
    "rk4_classic": Scheme("rk4_classic",
                          alpha=((1.0,), (1.0, 0.0), (1.0, 0.0, 0.0),
                                 (-1.0 / 3.0, 1.0 / 3.0, 2.0 / 3.0, 1.0 / 3.0)),
                          beta=((0.5,), (0.0, 0.5), (0.0, 0.0, 1.0), (0.0, 0.0, 0.0, 1.0 / 6.0)),
                          stage_times=(0.0, 0.5, 0.5, 1.0)),
}


def _no_limiting(values: np.ndarray, stage: int) -> np.ndarray:
    return values


def advance(coeffs: np.ndarray, dt: float, scheme: Scheme, residual: ResidualFunction, t: float = 0.0,
            limiter: StageLimiter = _no_limiting) -> tuple[np.ndarray, np.ndarray]:
    """
    One step of ``scheme``; every new stage value passes through ``limiter``.

    Returns: solution at ``t + dt`` and the residual of the initial stage
    """
    stages = [coeffs]
    residuals: dict[int, np.ndarray] = {}
    for i in range(scheme.num_stages):
        stage = i + 1
        try:
            value = np.zeros_like(coeffs)
            for j, (a, b) in enumerate(zip(scheme.alpha[i], scheme.beta[i])):
                if a != 0.0:
                    value = value + a * stages[j]
                if b != 0.0:
                    if j not in residuals:
                        residuals[j] = residual(stages[j], t + scheme.stage_times[j] * dt)
                    value = value + (dt * b) * residuals[j]
            value = limiter(value, stage)
        except AdmissibilityError as e:
            raise e.with_stage(stage) from None
        stages.append(value)
    initial = residuals[0] if 0 in residuals else residual(coeffs, t)
    return stages[-1], initial
