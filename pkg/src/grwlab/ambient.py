"""Geometry of a GRW spacetime  I x_rho F  with metric  -dt^2 + rho(t)^2 g_F.

Ambient coordinates are ``(t, x1, ..., xm)``; index 0 is time everywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from grwlab import exprlang, tensors
from grwlab.fiber import FiberMetric, fiber_geometry
from grwlab.jets import Jet, jet_lift, jet_variables

FD_STEP = 1e-3
T_MARGIN = max(1e-3, 10 * FD_STEP)
CONSISTENCY_RTOL = 1e-9


class InternalConsistencyError(RuntimeError):
    """Two independent routes to the same quantity disagree."""


class IntervalDomainError(ValueError):
    pass


@dataclass(frozen=True)
class WarpFunction:
    """Warping function rho given as an expression in ``t`` on the open interval I."""

    expr: exprlang.Expr
    interval: tuple[float, float] = (-math.inf, math.inf)
    params: tuple[tuple[str, float], ...] = ()
    source: str = ""

    @classmethod
    def from_text(cls, text: str, interval=(-math.inf, math.inf), params=None) -> WarpFunction:
        expr = exprlang.parse(text)
        params = tuple(sorted((str(k), float(v)) for k, v in (params or {}).items()))
        extra = exprlang.free_vars(expr) - {"t"} - {k for k, _ in params}
        if extra:
            raise ValueError(f"warping function uses undeclared variables {sorted(extra)}")
        lo, hi = (float(interval[0]), float(interval[1]))
        if not lo < hi:
            raise ValueError(f"empty interval ({lo}, {hi})")
        return cls(expr=expr, interval=(lo, hi), params=params, source=text)

    def contains(self, t: float, margin: float = T_MARGIN) -> bool:
        lo, hi = self.interval
        return lo + margin <= t <= hi - margin

    def __call__(self, t):
        """rho evaluated on any carrier (float, array or jet in t)."""
        env = dict(self.params)
        env["t"] = t
        return exprlang.evaluate(self.expr, env)

    def derivatives(self, t: float) -> np.ndarray:
        """``[rho, rho', rho'', rho''']`` at t."""
        r = self(jet_lift(0, float(t), 1, 3))
        if not isinstance(r, Jet):  # constant expression
            return np.array([float(r), 0.0, 0.0, 0.0])
        return np.array([r.partial((k,)) for k in range(4)])

    def log_second(self, t: float) -> float:
        """(log rho)''(t)."""
        r, r1, r2, _ = self.derivatives(t)
        return r2 / r - (r1 / r) ** 2


@dataclass(frozen=True)
class Spacetime:
    warp: WarpFunction
    fiber: FiberMetric
    name: str = "custom"

    @property
    def m(self) -> int:
        return self.fiber.m

    @property
    def dim(self) -> int:
        return self.m + 1

    def admissible(self, t: float, x: Sequence[float]) -> bool:
        return self.warp.contains(t) and self.fiber.contains(x)


@dataclass(frozen=True)
class AmbientPoint:
    t: float
    x: tuple[float, ...]


def _point(S: Spacetime, p) -> tuple[float, tuple[float, ...]]:
    if isinstance(p, AmbientPoint):
        t, x = p.t, p.x
    else:
        t, x = p[0], p[1:] if len(p) == S.dim else p[1]
    t = float(t)
    x = tuple(float(v) for v in x)
    if not S.warp.contains(t):
        raise IntervalDomainError(f"t={t} not inside {S.warp.interval} with margin {T_MARGIN}")
    if not S.fiber.contains(x):
        raise IntervalDomainError(f"x={x} not inside the fiber chart {S.fiber.box}")
    return t, x


@dataclass(frozen=True)
class AmbientGeometry:
    t: float
    x: tuple[float, ...]
    rho: np.ndarray  # [rho, rho', rho'', rho''']
    metric: np.ndarray
    gamma_jet: Jet  # order-2 jet of the generic Christoffels
    riemann: np.ndarray
    ricci: np.ndarray

    @property
    def gamma(self) -> np.ndarray:
        return self.gamma_jet.coeffs[0]


def metric_jet(S: Spacetime, variables: Sequence[Jet]) -> Jet:
    """Ambient metric as a tensor jet in the ambient variables ``(t, x...)``."""
    t, xs = variables[0], variables[1:]
    rho = S.warp(t)
    gF = S.fiber.metric_jet(xs)
    block = gF * (rho * rho)
    n = S.dim
    c = np.zeros((block.coeffs.shape[0], n, n))
    c[0, 0, 0] = -1.0
    c[:, 1:, 1:] = block.coeffs
    return block.like(c)


@lru_cache(maxsize=4096)
def _geometry(S: Spacetime, t: float, x: tuple[float, ...]) -> AmbientGeometry:
    g = metric_jet(S, jet_variables((t,) + x, 3))
    _, gamma = tensors.levi_civita(g)
    riem = tensors.riemann(gamma)
    return AmbientGeometry(
        t=t,
        x=x,
        rho=S.warp.derivatives(t),
        metric=g.coeffs[0],
        gamma_jet=gamma,
        riemann=riem.coeffs[0],
        ricci=tensors.ricci(riem).coeffs[0],
    )


def ambient_geometry(S: Spacetime, p) -> AmbientGeometry:
    return _geometry(S, *_point(S, p))


def ambient_metric(S: Spacetime, p) -> np.ndarray:
    t, x = _point(S, p)
    gF = np.array(S.fiber.components_on(list(x)), dtype=float)
    g = np.zeros((S.dim, S.dim))
    g[0, 0] = -1.0
    g[1:, 1:] = float(S.warp(t)) ** 2 * gF
    return g


def closed_form_christoffel(S: Spacetime, p) -> np.ndarray:
    """Warped-product Christoffels built from rho, rho' and the fiber connection."""
    t, x = _point(S, p)
    r, r1 = S.warp.derivatives(t)[:2]
    fg = fiber_geometry(S.fiber, x)
    n = S.dim
    gam = np.zeros((n, n, n))
    gam[0, 1:, 1:] = r * r1 * fg.g
    eye = np.eye(S.m) * (r1 / r)
    for i in range(S.m):
        gam[1 + i, 0, 1:] = eye[i]
        gam[1 + i, 1:, 0] = eye[i]
    gam[1:, 1:, 1:] = fg.christoffel
    return gam


def _rel_gap(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(a - b)) / max(1.0, float(np.max(np.abs(b)))))


def ambient_christoffel(S: Spacetime, p) -> tuple[np.ndarray, np.ndarray]:
    """(generic Levi-Civita, warped-product closed form); raises if they disagree."""
    generic = ambient_geometry(S, p).gamma.copy()
    closed = closed_form_christoffel(S, p)
    gap = _rel_gap(generic, closed)
    if gap > CONSISTENCY_RTOL:
        raise InternalConsistencyError(f"ambient Christoffel routes disagree by {gap:.3e} at {p}")
    return generic, closed


def conformal_K_residual(S: Spacetime, p, X: Sequence[float]) -> float:
    """|nabla_X K - rho'(t) X| (Euclidean norm of components) for K = rho d_t."""
    t, x = _point(S, p)
    geo = ambient_geometry(S, (t,) + x)
    X = np.asarray(X, dtype=float)
    variables = jet_variables((t,) + x, 1)
    rho = S.warp(variables[0])
    if not isinstance(rho, Jet):
        rho = variables[0].constant_like(rho)
    K = np.zeros((S.dim,) + (variables[0].coeffs.shape[0],))
    K[0] = rho.coeffs
    dK = K[:, 1 : 1 + S.dim]  # dK[a, b] = d_b K^a
    cov = dK + np.einsum("abc,c->ab", geo.gamma, K[:, 0])
    return float(np.linalg.norm(cov @ X - geo.rho[1] * X))


def riemann_bar(S: Spacetime, p) -> np.ndarray:
    return ambient_geometry(S, p).riemann.copy()


def ricci_bar(S: Spacetime, p) -> np.ndarray:
    return ambient_geometry(S, p).ricci.copy()


def oneill_ricci_check(S: Spacetime, p, v_fiber: Sequence[float]) -> tuple[float, float]:
    """Residuals of the warped-product Ricci formulas against the generic Ricci.

    (a) Ric(d_t, d_t) + m rho''/rho;
    (b) Ric(w, w) - [Ric^F(v, v) + |w|^2 (rho''/rho + (m-1) rho'^2/rho^2)]
    with w the horizontal lift of v and |w|^2 = rho^2 g_F(v, v).
    """
    geo = ambient_geometry(S, p)
    fg = fiber_geometry(S.fiber, geo.x)
    r, r1, r2, _ = geo.rho
    m = S.m
    res_a = geo.ricci[0, 0] + m * r2 / r
    v = np.asarray(v_fiber, dtype=float)
    w = np.concatenate([[0.0], v])
    s2 = r * r * float(v @ fg.g @ v)
    closed = float(v @ fg.ricci @ v) + s2 * (r2 / r + (m - 1) * (r1 / r) ** 2)
    res_b = float(w @ geo.ricci @ w) - closed
    return float(res_a), float(res_b)


def ncc_margin(S: Spacetime, p, v_fiber: Sequence[float]) -> float:
    """Ric^F(v, v) - m (rho rho'' - rho'^2) g_F(v, v).

    Non-negative for every fiber vector is the null-convergence form that the
    angle inequality consumes.  The exact null Ricci contraction
    (:func:`null_ricci`) carries ``m - 1`` in place of ``m``; both agree in sign
    whenever the fiber is flat.
    """
    t, x = _point(S, p)
    fg = fiber_geometry(S.fiber, x)
    r, r1, r2, _ = S.warp.derivatives(t)
    v = np.asarray(v_fiber, dtype=float)
    if not np.any(v):
        raise ValueError("ncc_margin needs a nonzero fiber vector")
    return float(v @ fg.ricci @ v - S.m * (r * r2 - r1 * r1) * (v @ fg.g @ v))


def null_ricci(S: Spacetime, p, v_fiber: Sequence[float]) -> float:
    """Generic Ric(z, z) for the future null vector z = d_t + v / |v| (ambient-unit v)."""
    geo = ambient_geometry(S, p)
    v = np.asarray(v_fiber, dtype=float)
    norm2 = float(v @ geo.metric[1:, 1:] @ v)
    if norm2 <= 0:
        raise ValueError("null_ricci needs a nonzero fiber vector")
    z = np.concatenate([[1.0], v / math.sqrt(norm2)])
    return float(z @ geo.ricci @ z)


def div_comoving(S: Spacetime, t: float) -> float:
    """Divergence of d_t, m rho'/rho."""
    r, r1 = S.warp.derivatives(t)[:2]
    return S.m * r1 / r


def div_comoving_generic(S: Spacetime, p) -> float:
    """Divergence of d_t from the generic Christoffels, sum_a Gamma^a_{a t}."""
    return float(np.trace(ambient_geometry(S, p).gamma[:, :, 0]))


def tcc_check(S: Spacetime, p, z: Sequence[float]) -> float:
    """Ric(z, z) for a timelike z; the TCC holds for z iff the value is >= 0."""
    geo = ambient_geometry(S, p)
    z = np.asarray(z, dtype=float)
    if float(z @ geo.metric @ z) >= 0:
        raise ValueError(f"vector {z.tolist()} is not timelike")
    return float(z @ geo.ricci @ z)
