"""
Positive-weight quadrature rules on the reference line [-1, 1], quadrilateral
[-1, 1]^2 and triangle (0,0), (1,0), (0,1).

Edges of two-dimensional elements are parameterized by ``g`` in [0, 1] running
from vertex ``k`` to vertex ``k + 1``; edge weights therefore sum to one.
"""
from dataclasses import dataclass
from functools import lru_cache
from typing import Literal

import numpy as np
from numpy.polynomial import legendre

from ebdg.errors import QuadratureError

Shape = Literal["line", "quad", "triangle"]
SHAPES: tuple[str, ...] = ("line", "quad", "triangle")

REFERENCE_VOLUME = {"line": 2.0, "quad": 4.0, "triangle": 0.5}
SPATIAL_DIMS = {"line": 1, "quad": 2, "triangle": 2}

REFERENCE_VERTICES = {
    "line": np.array([[-1.0], [1.0]]),
    "quad": np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]]),
    "triangle": np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]),
}

MAX_GAUSS_POINTS = 10
MAX_ORDER = 9


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray
    exact_degree: int

    @property
    def num_points(self) -> int:
        return len(self.weights)


@dataclass(frozen=True)
class SurfaceQuadratureSet:
    """
    One rule per reference edge in the edge parameter ``g``, together with the
    reference coordinates of every edge point and the edge tangents ``dr/dg``.
    For the line the two "edges" are the end points, each with unit weight.
    """
    shape: str
    rules: tuple[QuadratureRule, ...]
    reference_points: np.ndarray
    tangents: np.ndarray

    @property
    def num_faces(self) -> int:
        return len(self.rules)

    @property
    def points_per_face(self) -> int:
        return self.rules[0].num_points


def gauss_legendre(n: int, interval: tuple[float, float] = (-1.0, 1.0)) -> QuadratureRule:
    if not isinstance(n, (int, np.integer)) or not 1 <= n <= MAX_GAUSS_POINTS:
        raise QuadratureError(f"Gauss-Legendre point count must be in 1..{MAX_GAUSS_POINTS}, got {n}.")
    x, w = legendre.leggauss(int(n))
    a, b = interval
    half = 0.5 * (b - a)
    points = (0.5 * (a + b) + half * x)[:, np.newaxis]
    return QuadratureRule(points=points, weights=half * w, exact_degree=2 * int(n) - 1)


def _gauss_points_for_order(order: int) -> int:
    return order // 2 + 1


def _check_order(shape: str, order: int):
    if shape not in SHAPES:
        raise QuadratureError(f"Unsupported shape '{shape}'.")
    if order < 0 or order > MAX_ORDER:
        raise QuadratureError(f"Unsupported quadrature order {order} for {shape}; allowed 0..{MAX_ORDER}.")


# Symmetric positive-weight triangle rules (Dunavant). Each entry lists orbits as
# (barycentric generator, weight) with weights normalized to sum to one.
_TRIANGLE_ORBITS: dict[int, list[tuple[tuple[float, ...], float]]] = {
    1: [((1 / 3,), 1.0)],
    2: [((1 / 6,), 1 / 3)],
    4: [((0.445948490915965,), 0.223381589678011),
        ((0.091576213509771,), 0.109951743655322)],
    5: [((1 / 3,), 0.225),
        ((0.470142064105115,), 0.132394152788506),
        ((0.101286507323456,), 0.125939180544827)],
    6: [((0.249286745170910,), 0.116786275726379),
        ((0.063089014491502,), 0.050844906370207),
        ((0.053145049844817, 0.310352451033784), 0.082851075618374)],
    8: [((1 / 3,), 0.144315607677787),
        ((0.459292588292723,), 0.095091634267285),
        ((0.170569307751760,), 0.103217370534718),
        ((0.050547228317031,), 0.032458497623198),
        ((0.008394777409958, 0.263112829634638), 0.027230314174435)],
    9: [((1 / 3,), 0.097135796282799),
        ((0.489682519198738,), 0.031334700227139),
        ((0.437089591492937,), 0.077827541004774),
        ((0.188203535619033,), 0.079647738927210),
        ((0.044729513394453,), 0.025577675658698),
        ((0.036838412054736, 0.221962989160766), 0.043283539377289)],
}


def _orbit_points(generator: tuple[float, ...]) -> list[tuple[float, float, float]]:
    if len(generator) == 1:
        a = generator[0]
        if abs(a - 1 / 3) < 1e-14:
            return [(1 / 3, 1 / 3, 1 / 3)]
        b = 1.0 - 2.0 * a
        return [(a, a, b), (a, b, a), (b, a, a)]
    a, b = generator
    c = 1.0 - a - b
    return [(a, b, c), (b, c, a), (c, a, b), (b, a, c), (a, c, b), (c, b, a)]


@lru_cache(maxsize=None)
def _triangle_rule(degree: int) -> QuadratureRule:
    points, weights = [], []
    for generator, weight in _TRIANGLE_ORBITS[degree]:
        for l1, l2, l3 in _orbit_points(generator):
            # barycentric (l1, l2, l3) with respect to (0,0), (1,0), (0,1)
            points.append((l2, l3))
            weights.append(weight)
    weights = np.array(weights)
    weights *= REFERENCE_VOLUME["triangle"] / weights.sum()
    return QuadratureRule(points=np.array(points), weights=weights, exact_degree=degree)


def triangle_degrees() -> list[int]:
    return sorted(_TRIANGLE_ORBITS)


@lru_cache(maxsize=None)
def volume_rule(shape: str, order: int) -> QuadratureRule:
    """Positive-weight rule exact at least to ``order`` on the reference element."""
    _check_order(shape, order)
    if shape == "line":
        return gauss_legendre(_gauss_points_for_order(order))
    if shape == "quad":
        line = gauss_legendre(_gauss_points_for_order(order))
        x = line.points[:, 0]
        # first coordinate runs fastest
        xx, yy = np.meshgrid(x, x, indexing="xy")
        wx, wy = np.meshgrid(line.weights, line.weights, indexing="xy")
        points = np.column_stack([xx.ravel(), yy.ravel()])
        return QuadratureRule(points=points, weights=(wx * wy).ravel(), exact_degree=line.exact_degree)
    degree = next(d for d in triangle_degrees() if d >= max(order, 1))
    return _triangle_rule(degree)


@lru_cache(maxsize=None)
def surface_rules(shape: str, order: int) -> SurfaceQuadratureSet:
    _check_order(shape, order)
    vertices = REFERENCE_VERTICES[shape]
    if shape == "line":
        rule = QuadratureRule(points=np.zeros((1, 1)), weights=np.ones(1), exact_degree=MAX_ORDER)
        return SurfaceQuadratureSet(shape=shape, rules=(rule, rule),
                                    reference_points=vertices[:, np.newaxis, :].copy(),
                                    tangents=np.zeros((2, 1)))
    edge_rule = gauss_legendre(_gauss_points_for_order(order), interval=(0.0, 1.0))
    num_edges = len(vertices)
    g = edge_rule.points[:, 0]
    tangents = np.array([vertices[(k + 1) % num_edges] - vertices[k] for k in range(num_edges)])
    reference_points = np.array([vertices[k] + g[:, np.newaxis] * tangents[k] for k in range(num_edges)])
    return SurfaceQuadratureSet(shape=shape, rules=tuple(edge_rule for _ in range(num_edges)),
                                reference_points=reference_points, tangents=tangents)


# Quadrature orders (volume, surface) per shape and polynomial order.
_TRIANGLE_VOLUME_ORDERS = {1: 4, 2: 5, 3: 8, 4: 9}


def quadrature_orders(shape: str, p: int) -> tuple[int, int]:
    if shape not in SHAPES:
        raise QuadratureError(f"Unsupported shape '{shape}'.")
    if p not in (1, 2, 3, 4):
        raise QuadratureError(f"Polynomial order must be in 1..4, got {p}.")
    surface = 2 * p + 1
    if shape == "triangle":
        return _TRIANGLE_VOLUME_ORDERS[p], surface
    return 2 * p + 1, surface
