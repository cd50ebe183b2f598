"""Named GRW spacetimes and the fixture hypersurfaces used across checks."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from grwlab.ambient import Spacetime, WarpFunction
from grwlab.fiber import FiberMetric
from grwlab.hypersurface import GraphHypersurface, plain_fields

SLICE_TIMES = (0.5, 1.0, 2.0)
RANDOM_GRAPHS = 5
GRAPH_SEED = 20240601
SPACELIKE_FRACTION = 0.9
GRAPH_CENTER = 1.0
GRAPH_SPREAD = 0.4  # |u - center| bound on the box
ADMISSION_GRID = 21


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    rho: str
    interval: tuple[float, float]
    fiber_kind: str
    tag: str
    box: tuple[float, float] = (-0.9, 0.9)


CATALOG: dict[str, CatalogEntry] = {
    "minkowski": CatalogEntry("minkowski", "1", (-math.inf, math.inf), "euclidean", "flat"),
    "steady_state": CatalogEntry("steady_state", "exp(t)", (-math.inf, math.inf), "euclidean", "ste"),
    "einstein_de_sitter": CatalogEntry("einstein_de_sitter", "t^(2/3)", (0.0, math.inf), "euclidean", "eds"),
    "radiation": CatalogEntry("radiation", "sqrt(2*a*t)", (0.0, math.inf), "euclidean", "rad"),
}
NAMES = tuple(CATALOG) + ("custom",)


def make_named(name: str, m: int = 2, params: dict | None = None) -> Spacetime:
    """Build a catalog spacetime with flat fiber of dimension m.

    ``radiation`` takes ``a > 0`` (default 1).  ``custom`` takes ``rho``
    (expression text), optional ``interval`` and ``fiber`` (a FiberMetric or a
    kind name) plus any numeric parameters used by ``rho``.
    """
    params = dict(params or {})
    if name == "custom":
        rho = params.pop("rho", None)
        if rho is None:
            raise ValueError("custom spacetime needs a 'rho' expression")
        interval = params.pop("interval", (-math.inf, math.inf))
        fiber = params.pop("fiber", "euclidean")
        if not isinstance(fiber, FiberMetric):
            fiber = FiberMetric(m, fiber)
        warp = WarpFunction.from_text(rho, interval, params)
        return Spacetime(warp, fiber, "custom")
    try:
        entry = CATALOG[name]
    except KeyError:
        raise ValueError(f"unknown spacetime {name!r}; expected one of {NAMES}") from None
    wparams = {}
    if name == "radiation":
        a = float(params.pop("a", 1.0))
        if not a > 0:
            raise ValueError(f"radiation model needs a > 0, got {a}")
        wparams["a"] = a
    if params:
        raise ValueError(f"unexpected parameters for {name}: {sorted(params)}")
    warp = WarpFunction.from_text(entry.rho, entry.interval, wparams)
    return Spacetime(warp, FiberMetric(m, entry.fiber_kind), name)


def default_box(S: Spacetime) -> tuple[tuple[float, float], ...]:
    entry = CATALOG.get(S.name)
    if entry is not None and S.fiber.kind == "euclidean":
        return tuple(entry.box for _ in range(S.m))
    return tuple((0.9 * lo, 0.9 * hi) for lo, hi in S.fiber.box)


def cubic_monomials(m: int) -> list[tuple[int, ...]]:
    """Exponent vectors of total degree 1..3 in graded order."""
    out = []
    for deg in (1, 2, 3):
        for combo in itertools.combinations_with_replacement(range(m), deg):
            alpha = [0] * m
            for i in combo:
                alpha[i] += 1
            out.append(tuple(alpha))
    return out


def _poly_value_grad(coeffs: np.ndarray, monos, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    val = np.zeros(len(pts))
    grad = np.zeros_like(pts)
    for c, alpha in zip(coeffs, monos):
        a = np.array(alpha)
        val += c * np.prod(pts**a, axis=1)
        for i in range(pts.shape[1]):
            if a[i]:
                b = a.copy()
                b[i] -= 1
                grad[:, i] += c * a[i] * np.prod(pts**b, axis=1)
    return val, grad


def _grid(box, n: int) -> np.ndarray:
    axes = [np.linspace(lo, hi, n) for lo, hi in box]
    return np.array(list(itertools.product(*axes)))


def spacelike_ratio(Mh: GraphHypersurface, n: int = ADMISSION_GRID) -> float:
    """max over a grid of |du|_F / rho(u); < 1 means spacelike there."""
    S = Mh.host
    worst = 0.0
    for x in _grid(Mh.box, n):
        f = plain_fields(Mh, x)
        gF = np.array(S.fiber.components_on(list(x)), dtype=float)
        du = f["du"]
        q = float(du @ np.linalg.solve(gF, du))
        worst = max(worst, math.sqrt(q) / float(S.warp(f["u"])))
    return worst


def random_cubic_coefficients(S: Spacetime, k: int, seed: int = GRAPH_SEED) -> list[tuple[tuple[int, ...], float]]:
    """Coefficients of the k-th random cubic graph, rescaled to the spacelike margin.

    The polynomial p is drawn from a standard normal, then scaled by lam so that
    |lam p| <= GRAPH_SPREAD and lam |dp|_F <= SPACELIKE_FRACTION * min rho on the
    admission grid, where min rho runs over the resulting range of u.
    """
    m = S.m
    monos = cubic_monomials(m)
    rng = np.random.default_rng([seed, m, k])
    coeffs = rng.standard_normal(len(monos))
    box = default_box(S)
    pts = _grid(box, ADMISSION_GRID)
    val, grad = _poly_value_grad(coeffs, monos, pts)
    gF_inv = [np.linalg.inv(np.array(S.fiber.components_on(list(p)), dtype=float)) for p in pts]
    dnorm = max(math.sqrt(float(gr @ gi @ gr)) for gr, gi in zip(grad, gF_inv))
    ts = np.linspace(GRAPH_CENTER - GRAPH_SPREAD, GRAPH_CENTER + GRAPH_SPREAD, 81)
    rho_min = min(float(S.warp(float(t))) for t in ts)
    lam = min(GRAPH_SPREAD / float(np.max(np.abs(val))), SPACELIKE_FRACTION * rho_min / dnorm)
    return [(alpha, float(lam * c)) for alpha, c in zip(monos, coeffs)]


def polynomial_text(constant: float, terms) -> str:
    parts = [repr(float(constant))]
    for alpha, c in terms:
        factors = [f"x{i + 1}^{e}" if e > 1 else f"x{i + 1}" for i, e in enumerate(alpha) if e]
        parts.append(f"({c!r})*" + "*".join(factors))
    return " + ".join(parts)


def random_cubic_graph(S: Spacetime, k: int, seed: int = GRAPH_SEED) -> GraphHypersurface:
    text = polynomial_text(GRAPH_CENTER, random_cubic_coefficients(S, k, seed))
    return GraphHypersurface.from_text(text, S, name=f"random_cubic_{k}", box=default_box(S))


def slice_graph(S: Spacetime, t0: float) -> GraphHypersurface:
    return GraphHypersurface.from_text(repr(float(t0)), S, name=f"slice_{t0!r}", box=default_box(S))


def hyperboloid(S: Spacetime) -> GraphHypersurface:
    text = "sqrt(1 + " + " + ".join(f"x{i + 1}^2" for i in range(S.m)) + ")"
    return GraphHypersurface.from_text(text, S, name="hyperboloid", box=default_box(S))


def fixture_hypersurfaces(S: Spacetime, n_random: int = RANDOM_GRAPHS, seed: int = GRAPH_SEED) -> list[GraphHypersurface]:
    """Slices at SLICE_TIMES, the Minkowski hyperplane and hyperboloid, then random cubic graphs."""
    out = [slice_graph(S, t0) for t0 in SLICE_TIMES]
    if S.name == "minkowski":
        out.append(GraphHypersurface.from_text("0", S, name="hyperplane", box=default_box(S)))
        out.append(hyperboloid(S))
    out.extend(random_cubic_graph(S, k, seed) for k in range(n_random))
    return out


def catalog_spacetimes(m: int = 2) -> list[Spacetime]:
    return [make_named(name, m) for name in CATALOG]
