"""Riemannian geometry of the fiber (F, g_F) on a single coordinate chart."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from grwlab import exprlang, tensors
from grwlab.jets import Jet, jet_stack, jet_variables

CHART_MARGIN = 1e-3
KINDS = ("euclidean", "sphere", "hyperbolic", "custom")


class MetricDegeneracyError(ValueError):
    def __init__(self, point, message: str = "metric is not positive definite"):
        self.point = tuple(float(p) for p in point)
        super().__init__(f"{message} at x={self.point}")


class ChartDomainError(ValueError):
    pass


def _default_box(kind: str, m: int) -> tuple[tuple[float, float], ...]:
    if kind == "hyperbolic":
        r = 0.9 / math.sqrt(m)
        return tuple((-r, r) for _ in range(m))
    return tuple((-1.0, 1.0) for _ in range(m))


@dataclass(frozen=True)
class FiberMetric:
    """Metric on an m-dimensional chart.

    ``sphere`` is the unit round sphere in stereographic coordinates and
    ``hyperbolic`` the curvature -1 space in the Poincare ball; both are
    conformally flat, so one box chart covers what sampling needs.
    """

    m: int
    kind: str = "euclidean"
    components: tuple[tuple[exprlang.Expr, ...], ...] | None = None
    box: tuple[tuple[float, float], ...] = field(default=())

    def __post_init__(self):
        if self.m < 2:
            raise ValueError(f"fiber dimension must be >= 2, got {self.m}")
        if self.kind not in KINDS:
            raise ValueError(f"unknown fiber kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "custom":
            comps = self.components
            if comps is None or len(comps) != self.m or any(len(r) != self.m for r in comps):
                raise ValueError(f"custom fiber needs an {self.m}x{self.m} matrix of expressions")
            allowed = set(self.variables)
            for row in comps:
                for e in row:
                    extra = exprlang.free_vars(e) - allowed
                    if extra:
                        raise ValueError(f"fiber metric uses undeclared variables {sorted(extra)}")
        if not self.box:
            object.__setattr__(self, "box", _default_box(self.kind, self.m))
        if len(self.box) != self.m:
            raise ValueError("chart box must have one interval per coordinate")

    @classmethod
    def custom(cls, matrix: Sequence[Sequence[str]], box=None) -> FiberMetric:
        comps = tuple(tuple(exprlang.as_expr(e) for e in row) for row in matrix)
        box = tuple((float(lo), float(hi)) for lo, hi in box) if box else ()
        return cls(m=len(comps), kind="custom", components=comps, box=box)

    @property
    def variables(self) -> tuple[str, ...]:
        return tuple(f"x{i + 1}" for i in range(self.m))

    def components_on(self, xs: Sequence):
        """Metric components evaluated on carriers ``xs`` (floats, arrays or jets)."""
        m = self.m
        if self.kind == "custom":
            env = dict(zip(self.variables, xs))
            return [[exprlang.evaluate(self.components[i][j], env) for j in range(m)] for i in range(m)]
        if self.kind == "euclidean":
            conf = 1.0
        else:
            r2 = sum(x * x for x in xs)
            conf = 4.0 / (1.0 + r2) ** 2 if self.kind == "sphere" else 4.0 / (1.0 - r2) ** 2
        return [[conf if i == j else 0.0 for j in range(m)] for i in range(m)]

    def metric_jet(self, xs: Sequence[Jet]) -> Jet:
        rows = self.components_on(xs)
        ref = next(x for x in xs if isinstance(x, Jet))
        return jet_stack([jet_stack([c if isinstance(c, Jet) else ref.constant_like(c) for c in row]) for row in rows])

    def contains(self, x: Sequence[float], margin: float = CHART_MARGIN) -> bool:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.m,):
            return False
        lo = np.array([b[0] for b in self.box]) + margin
        hi = np.array([b[1] for b in self.box]) - margin
        if np.any(x < lo) or np.any(x > hi):
            return False
        if self.kind == "hyperbolic" and float(x @ x) >= (1.0 - margin) ** 2:
            return False
        return True


def _check_point(F: FiberMetric, x) -> tuple[float, ...]:
    x = tuple(float(v) for v in x)
    if not F.contains(x):
        raise ChartDomainError(f"x={x} is not inside the chart domain {F.box} with margin {CHART_MARGIN}")
    return x


def _check_spd(g: np.ndarray, x) -> None:
    if not np.allclose(g, g.T, rtol=1e-12, atol=1e-12):
        raise MetricDegeneracyError(x, "metric is not symmetric")
    try:
        np.linalg.cholesky(g)
    except np.linalg.LinAlgError:
        raise MetricDegeneracyError(x) from None


def metric_at(F: FiberMetric, x) -> np.ndarray:
    x = _check_point(F, x)
    g = np.array(F.components_on(list(x)), dtype=float)
    _check_spd(g, x)
    return g


@dataclass(frozen=True)
class FiberPointGeometry:
    x: tuple[float, ...]
    g: np.ndarray
    christoffel: np.ndarray  # [k, i, j]
    riemann: np.ndarray  # [a, b, c, d]
    ricci: np.ndarray


@lru_cache(maxsize=4096)
def _geometry(F: FiberMetric, x: tuple[float, ...]) -> FiberPointGeometry:
    g = F.metric_jet(jet_variables(x, 3))
    _check_spd(g.coeffs[0], x)
    _, gamma = tensors.levi_civita(g)
    riem = tensors.riemann(gamma)
    return FiberPointGeometry(
        x=x,
        g=g.coeffs[0],
        christoffel=gamma.coeffs[0],
        riemann=riem.coeffs[0],
        ricci=tensors.ricci(riem).coeffs[0],
    )


def fiber_geometry(F: FiberMetric, x) -> FiberPointGeometry:
    return _geometry(F, _check_point(F, x))


def christoffel_F(F: FiberMetric, x) -> np.ndarray:
    """Christoffel symbols ``gamma[k, i, j]`` of the fiber metric at x."""
    return fiber_geometry(F, x).christoffel.copy()


def riemann_F(F: FiberMetric, x) -> np.ndarray:
    return fiber_geometry(F, x).riemann.copy()


def ricci_F(F: FiberMetric, x) -> np.ndarray:
    return fiber_geometry(F, x).ricci.copy()


def ric_F_contract(F: FiberMetric, x, v) -> float:
    v = np.asarray(v, dtype=float)
    return float(v @ fiber_geometry(F, x).ricci @ v)


def sectional_curvature(F: FiberMetric, x, v, w) -> float:
    geo = fiber_geometry(F, x)
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    g = geo.g
    area2 = (v @ g @ v) * (w @ g @ w) - (v @ g @ w) ** 2
    if area2 <= 1e-14 * (v @ g @ v) * (w @ g @ w):
        raise ValueError("vectors do not span a plane")
    # <R(v, w) w, v>
    num = np.einsum("ae,ebcd,a,b,c,d->", g, geo.riemann, v, w, v, w)
    return float(num / area2)


def sectional_min_sample(F: FiberMetric, x, n_planes: int, seed) -> float:
    """Smallest sectional curvature over ``n_planes`` seeded random 2-planes at x."""
    rng = np.random.default_rng(seed)
    best = np.inf
    drawn = 0
    while drawn < n_planes:
        v, w = rng.standard_normal((2, F.m))
        try:
            k = sectional_curvature(F, x, v, w)
        except ValueError:
            continue
        best = min(best, k)
        drawn += 1
    return float(best)
