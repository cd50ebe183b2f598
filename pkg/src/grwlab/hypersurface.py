"""Spacelike graphs t = u(x) in a GRW spacetime and their extrinsic geometry.

Everything at a sample point is computed from order-3 jets in the chart
variables ``x1..xm``: differentiating a jet drops its order by one, which is
exactly enough to reach the Laplacian of cosh(phi) and the gradient of H.

Tangent vectors are written in the coordinate basis ``X_i = u_i d_t + d_i``;
a tangent vector with coordinate components ``V^i`` is ``V^i X_i``.  The
shape operator is stored as ``A[j, i]`` with ``A X_i = A[j, i] X_j``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence, Union

import numpy as np

from grwlab import exprlang, tensors
from grwlab.ambient import Spacetime, ambient_geometry, closed_form_christoffel
from grwlab.fiber import fiber_geometry
from grwlab.jets import Jet, jet_einsum, jet_inv, jet_stack, jet_variables

DEFAULT_EPS = 1e-6


class DegenerateHypersurfaceError(ValueError):
    def __init__(self, x, detail: str):
        self.point = tuple(float(v) for v in x)
        super().__init__(f"graph is not uniformly spacelike at x={self.point}: {detail}")


class GraphDomainError(ValueError):
    pass


@dataclass(frozen=True)
class GraphHypersurface:
    """The spacelike graph ``t = u(x)`` over the fiber chart of ``host``."""

    u: exprlang.Expr
    host: Spacetime
    eps: float = DEFAULT_EPS
    name: str = "graph"
    box: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        extra = exprlang.free_vars(self.u) - set(self.host.fiber.variables)
        if extra:
            raise ValueError(f"graph function uses undeclared variables {sorted(extra)}")
        if not self.box:
            object.__setattr__(self, "box", self.host.fiber.box)

    @classmethod
    def from_text(cls, text: str, host: Spacetime, **kw) -> GraphHypersurface:
        return cls(u=exprlang.parse(text), host=host, **kw)

    @property
    def m(self) -> int:
        return self.host.m

    def tau(self, x):
        """u on any carrier list/array of chart coordinates."""
        env = dict(zip(self.host.fiber.variables, x))
        return exprlang.evaluate(self.u, env)


@dataclass
class PointGeometry:
    x: tuple[float, ...]
    tau: float
    rho: np.ndarray  # [rho, rho', rho'', rho'''] at tau
    g: np.ndarray
    g_inv: np.ndarray
    tangents: np.ndarray  # tangents[i] = ambient components of X_i
    N: np.ndarray  # ambient components (N^t, N^1..N^m)
    cosh_phi: float
    sinh2_phi: float
    dtT: np.ndarray
    KT: np.ndarray
    A: np.ndarray
    H: float
    grad_tau: np.ndarray
    grad_H: np.ndarray
    grad_cosh: np.ndarray
    grad_gKN: np.ndarray
    hess_tau: np.ndarray  # direct covariant Hessian of tau, lower indices
    hess_tau_norm2: float  # sum_i |nabla_{E_i} dtT|^2 over a Gram-Schmidt frame
    nabla_dtT: np.ndarray  # [j, i] = (nabla_i dtT)^j
    nabla_KT: np.ndarray
    nabla_A: np.ndarray  # [l, i, k] = ((nabla_k A) X_i)^l
    christoffel: np.ndarray  # induced connection [k, i, j]
    lap_cosh: float
    lap_sinh2: float
    N_F: np.ndarray  # fiber part of N (chart components)
    ric_F_NF: float
    ricci_bar: np.ndarray
    riemann_bar: np.ndarray
    metric_bar: np.ndarray
    gamma_bar: np.ndarray  # ambient Christoffels along M at the point
    weingarten_tangency: float
    extras: dict = field(default_factory=dict)

    @property
    def m(self) -> int:
        return len(self.x)

    @property
    def log_rho_second(self) -> float:
        r, r1, r2, _ = self.rho
        return r2 / r - (r1 / r) ** 2

    @property
    def hubble(self) -> float:
        """rho'(tau) / rho(tau)."""
        return self.rho[1] / self.rho[0]

    def norm_g(self, v: np.ndarray) -> float:
        return math.sqrt(max(float(v @ self.g @ v), 0.0))


def gram_schmidt(g: np.ndarray, order: Sequence[int] | None = None) -> np.ndarray:
    """Columns form a g-orthonormal frame built from coordinate vectors in ``order``."""
    m = g.shape[0]
    order = list(range(m)) if order is None else list(order)
    frame: list[np.ndarray] = []
    for i in order:
        v = np.zeros(m)
        v[i] = 1.0
        for e in frame:
            v = v - (e @ g @ v) * e
        v = v / math.sqrt(v @ g @ v)
        frame.append(v)
    return np.array(frame).T


def _as_jet(value, ref: Jet) -> Jet:
    return value if isinstance(value, Jet) else ref.constant_like(value)


def laplacian_value(f: Jet, g_inv: np.ndarray, christoffel: np.ndarray) -> float:
    """g^{ij} (d_i d_j f - Gamma^k_ij d_k f) at the jet center."""
    m = f.nvars
    hess = np.empty((m, m))
    for i in range(m):
        for j in range(m):
            alpha = [0] * m
            alpha[i] += 1
            alpha[j] += 1
            hess[i, j] = f.partial(alpha)
    grad = f.gradient()
    return float(np.einsum("ij,ij->", g_inv, hess - np.einsum("kij,k->ij", christoffel, grad)))


def _covariant_vector(V: Jet, christoffel: np.ndarray) -> np.ndarray:
    """[j, i] = (nabla_i V)^j at the center."""
    dV = V.grad().coeffs[0]  # [j, i] = d_i V^j
    return dV + np.einsum("jik,k->ji", christoffel, V.coeffs[0])


def _check_point(Mh: GraphHypersurface, x) -> tuple[float, ...]:
    x = tuple(float(v) for v in x)
    if not Mh.host.fiber.contains(x):
        raise GraphDomainError(f"x={x} outside the fiber chart domain")
    return x


@lru_cache(maxsize=2048)
def _frame(Mh: GraphHypersurface, x: tuple[float, ...]) -> PointGeometry:
    S = Mh.host
    m = S.m
    X = jet_variables(x, 3)
    ref = X[0]
    U = _as_jet(Mh.tau(X), ref)
    u0 = U.value
    if not S.warp.contains(u0):
        raise GraphDomainError(f"u(x)={u0} at x={x} is outside the interval {S.warp.interval}")
    rho = _as_jet(S.warp(U), ref)
    du = U.grad()  # order 2
    gF = S.fiber.metric_jet(X)
    gF_inv = jet_inv(gF)
    duF = jet_einsum("jk,k->j", gF_inv, du)
    q = jet_einsum("j,j->", du, duF)
    rho2 = rho * rho
    r0, q0 = rho.value, q.value
    if not q0 <= (1.0 - Mh.eps) * r0 * r0:
        raise DegenerateHypersurfaceError(x, f"|du|^2={q0:.6g} exceeds (1-eps) rho^2={(1 - Mh.eps) * r0 * r0:.6g}")
    a = rho / (rho2 - q).sqrt()
    a.coeffs[0] = r0 / math.sqrt(r0 * r0 - q0)  # exact 1 on slices
    N = jet_stack([a] + [a * duF[j] / rho2 for j in range(m)])
    tangents = jet_stack([jet_stack([du[i]] + [1.0 if j == i else 0.0 for j in range(m)]) for i in range(m)])

    g = gF * rho2 - jet_einsum("i,j->ij", du, du)
    g_inv_j, gam_j = tensors.levi_civita(g)
    g0, g_inv = g.coeffs[0], g_inv_j.coeffs[0]
    christoffel = gam_j.coeffs[0]

    amb = ambient_geometry(S, (u0,) + x)
    gbar = amb.gamma_jet.compose([U] + X)  # order 2, along M
    dN = N.grad()  # [a, i] = d_i N^a
    gam_X = jet_einsum("abc,ib->aci", gbar, tangents)  # Gamma^a_{bc} X_i^b
    nablaN = dN + jet_einsum("aci,c->ai", gam_X, N)  # [a, i] = (nablabar_{X_i} N)^a
    A = -nablaN[1:]  # [j, i], order 1
    tangency = nablaN.coeffs[0][0] - du.coeffs[0] @ nablaN.coeffs[0][1:]

    H = -(A.like(np.trace(A.coeffs, axis1=-2, axis2=-1))) * (1.0 / m)
    dtT = -(a * N[1:])
    KT = dtT * rho
    gKN = -(rho * a)

    grad_u = du.coeffs[0]
    sinh2 = q0 / (r0 * r0 - q0)
    cosh0 = a.value
    A0 = A.coeffs[0]
    nabla_A = A.grad().coeffs[0] + np.einsum("lkj,ji->lik", christoffel, A0) - np.einsum("jki,lj->lik", christoffel, A0)
    nabla_dtT = _covariant_vector(dtT, christoffel)

    frame = gram_schmidt(g0)
    cols = nabla_dtT @ frame
    hess_norm2 = float(np.einsum("ai,ab,bi->", cols, g0, cols))

    hess_u = np.array([[U.partial(_pair(m, i, j)) for j in range(m)] for i in range(m)])
    hess_tau = hess_u - np.einsum("kij,k->ij", christoffel, grad_u)

    fg = fiber_geometry(S.fiber, x)
    N0 = N.coeffs[0]
    N_F = N0[1:]
    sinh2_j = a * a - 1.0
    return PointGeometry(
        x=x,
        tau=u0,
        rho=S.warp.derivatives(u0),
        g=g0,
        g_inv=g_inv,
        tangents=tangents.coeffs[0],
        N=N0,
        cosh_phi=cosh0,
        sinh2_phi=sinh2,
        dtT=dtT.coeffs[0],
        KT=KT.coeffs[0],
        A=A0,
        H=H.value,
        grad_tau=g_inv @ grad_u,
        grad_H=g_inv @ H.gradient(),
        grad_cosh=g_inv @ a.gradient(),
        grad_gKN=g_inv @ gKN.gradient(),
        hess_tau=hess_tau,
        hess_tau_norm2=hess_norm2,
        nabla_dtT=nabla_dtT,
        nabla_KT=_covariant_vector(KT, christoffel),
        nabla_A=nabla_A,
        christoffel=christoffel,
        lap_cosh=laplacian_value(a, g_inv, christoffel),
        lap_sinh2=laplacian_value(sinh2_j, g_inv, christoffel),
        N_F=N_F,
        ric_F_NF=float(N_F @ fg.ricci @ N_F),
        ricci_bar=amb.ricci,
        riemann_bar=amb.riemann,
        metric_bar=amb.metric,
        gamma_bar=gbar.coeffs[0],
        weingarten_tangency=float(np.max(np.abs(tangency))),
    )


def _pair(m: int, i: int, j: int) -> tuple[int, ...]:
    alpha = [0] * m
    alpha[i] += 1
    alpha[j] += 1
    return tuple(alpha)


def frame_at(Mh: GraphHypersurface, x) -> PointGeometry:
    """All pointwise extrinsic quantities of the graph at chart point x."""
    return _frame(Mh, _check_point(Mh, x))


# ------------------------------------------------------------------ residuals
def grad_tau_residual(Mh: GraphHypersurface, x) -> float:
    """max(|grad tau + dtT|_g, ||grad tau|^2 - sinh^2 phi|)."""
    p = frame_at(Mh, x)
    a = p.norm_g(p.grad_tau + p.dtT)
    b = abs(float(p.grad_tau @ p.g @ p.grad_tau) - p.sinh2_phi)
    return max(a, b)


def grad_cosh_residual(Mh: GraphHypersurface, x) -> float:
    p = frame_at(Mh, x)
    rhs = p.A @ p.dtT + p.hubble * p.cosh_phi * p.dtT
    return p.norm_g(p.grad_cosh - rhs)


def grad_KN_residual(Mh: GraphHypersurface, x) -> float:
    """|grad g(K, N) + A K^T|_g."""
    p = frame_at(Mh, x)
    return p.norm_g(p.grad_gKN + p.A @ p.KT)


def nabla_KT_residual(Mh: GraphHypersurface, x, i: int) -> float:
    p = frame_at(Mh, x)
    e = np.zeros(p.m)
    e[i] = 1.0
    r, r1 = p.rho[:2]
    rhs = r * p.cosh_phi * p.A[:, i] + r1 * e
    return p.norm_g(p.nabla_KT[:, i] - rhs)


def nabla_dtT_residual(Mh: GraphHypersurface, x, i: int) -> float:
    p = frame_at(Mh, x)
    e = np.zeros(p.m)
    e[i] = 1.0
    h = p.hubble
    rhs = h * float(e @ p.g @ p.dtT) * p.dtT + p.cosh_phi * p.A[:, i] + h * e
    return p.norm_g(p.nabla_dtT[:, i] - rhs)


def hess_norm_closed_form(p: PointGeometry) -> float:
    """|Hess tau|^2 rewritten through cosh phi, trace A^2, g(A dtT, dtT) and H."""
    m, h, c = p.m, p.hubble, p.cosh_phi
    trA2 = float(np.trace(p.A @ p.A))
    gAT = float(p.dtT @ p.g @ (p.A @ p.dtT))
    return h * h * (m - 1 + c**4) + c * c * trA2 + 2 * h * c * gAT - 2 * m * h * p.H * c


def hess_norm_residual(Mh: GraphHypersurface, x) -> float:
    p = frame_at(Mh, x)
    return abs(p.hess_tau_norm2 - hess_norm_closed_form(p))


def hess_direct_residual(Mh: GraphHypersurface, x) -> float:
    """Frame trace of |nabla dtT|^2 against |Hess tau|^2 from the covariant Hessian."""
    p = frame_at(Mh, x)
    direct = float(np.einsum("ij,kl,ik,jl->", p.hess_tau, p.hess_tau, p.g_inv, p.g_inv))
    return abs(direct - p.hess_tau_norm2)


def hess_frame_permutation_residual(Mh: GraphHypersurface, x, order: Sequence[int]) -> float:
    """Change in the frame trace when Gram-Schmidt runs in a different order."""
    p = frame_at(Mh, x)
    cols = p.nabla_dtT @ gram_schmidt(p.g, order)
    return abs(float(np.einsum("ai,ab,bi->", cols, p.g, cols)) - p.hess_tau_norm2)


def codazzi_terms(p: PointGeometry, i: int, j: int, k: int) -> tuple[float, float]:
    """(gbar(Rbar(X_i, X_j) N, X_k), g((nabla_j A) X_i - (nabla_i A) X_j, X_k))."""
    T = p.tangents
    lhs = np.einsum("ae,ebcd,b,c,d,a->", p.metric_bar, p.riemann_bar, p.N, T[i], T[j], T[k])
    rhs = p.g[k] @ (p.nabla_A[:, i, j] - p.nabla_A[:, j, i])
    return float(lhs), float(rhs)


def codazzi_residual(Mh: GraphHypersurface, x, i: int, j: int, k: int) -> float:
    lhs, rhs = codazzi_terms(frame_at(Mh, x), i, j, k)
    return abs(lhs - rhs)


def codazzi_max_residual(Mh: GraphHypersurface, x) -> tuple[float, float]:
    """(max residual, max |term|) over all index triples."""
    p = frame_at(Mh, x)
    worst, scale = 0.0, 0.0
    for i in range(p.m):
        for j in range(p.m):
            for k in range(p.m):
                lhs, rhs = codazzi_terms(p, i, j, k)
                worst = max(worst, abs(lhs - rhs))
                scale = max(scale, abs(lhs), abs(rhs))
    return worst, scale


def gauss_formula_residual(Mh: GraphHypersurface, x) -> float:
    """max over i, j of |nablabar_{X_i} X_j - (nabla_{X_i} X_j - g(A X_i, X_j) N)|."""
    p = frame_at(Mh, x)
    U = _as_jet(Mh.tau(jet_variables(p.x, 2)), jet_variables(p.x, 2)[0])
    m = p.m
    worst = 0.0
    gA = p.g @ p.A  # [j, i] = g(X_j, A X_i)
    for i in range(m):
        for j in range(m):
            lhs = np.zeros(m + 1)
            lhs[0] = U.partial(_pair(m, i, j))
            lhs += np.einsum("abc,b,c->a", p.gamma_bar, p.tangents[i], p.tangents[j])
            rhs = p.christoffel[:, i, j] @ p.tangents - gA[j, i] * p.N
            worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return worst


def self_adjoint_residual(Mh: GraphHypersurface, x) -> float:
    p = frame_at(Mh, x)
    gA = p.g @ p.A
    return float(np.max(np.abs(gA - gA.T)) / max(1.0, float(np.max(np.abs(gA)))))


ScalarField = Union[str, exprlang.Expr, Callable[[Sequence], object]]


def laplacian_on_M(Mh: GraphHypersurface, f: ScalarField, x) -> float:
    """Laplace-Beltrami operator of the induced metric applied to f at x.

    ``f`` is an expression in ``x1..xm`` or a callable taking the list of
    coordinate carriers; the special names ``"cosh_phi"`` and ``"sinh2_phi"``
    select the hyperbolic-angle fields.
    """
    p = frame_at(Mh, x)
    if isinstance(f, str) and f == "cosh_phi":
        return p.lap_cosh
    if isinstance(f, str) and f == "sinh2_phi":
        return p.lap_sinh2
    X = jet_variables(p.x, 2)
    if callable(f):
        val = f(X)
    else:
        expr = exprlang.as_expr(f)
        val = exprlang.evaluate(expr, dict(zip(Mh.host.fiber.variables, X)))
    if not isinstance(val, Jet):
        return 0.0
    return laplacian_value(val, p.g_inv, p.christoffel)


# ----------------------------------------------------- finite-difference oracle
FD_INNER = 1e-4
FD_OUTER = 1e-3


def _fd_grad(f: Callable[[np.ndarray], float], x: np.ndarray, h: float) -> np.ndarray:
    out = np.empty(x.size)
    for i in range(x.size):
        e = np.zeros(x.size)
        e[i] = h
        out[i] = (f(x + e) - f(x - e)) / (2 * h)
    return out


def plain_fields(Mh: GraphHypersurface, x: np.ndarray, h: float = FD_INNER) -> dict:
    """Induced metric, normal and cosh phi at x from plain-float evaluation.

    The gradient of u comes from central differences, so nothing here shares
    code with the jet pipeline beyond the expression evaluator.
    """
    S = Mh.host
    x = np.asarray(x, dtype=float)
    u = float(Mh.tau(list(x)))
    du = _fd_grad(lambda y: float(Mh.tau(list(y))), x, h)
    r = float(S.warp(u))
    gF = np.array(S.fiber.components_on(list(x)), dtype=float)
    duF = np.linalg.solve(gF, du)
    q = float(du @ duF)
    a = r / math.sqrt(r * r - q)
    g = r * r * gF - np.outer(du, du)
    N = np.concatenate([[a], a * duF / (r * r)])
    return {"u": u, "du": du, "g": g, "cosh_phi": a, "N": N}


def fd_laplacian(Mh: GraphHypersurface, f: Callable[[np.ndarray], float], x, h: float = FD_OUTER) -> float:
    """Divergence-form Laplace-Beltrami, (1/sqrt|g|) d_i(sqrt|g| g^ij d_j f), by central differences."""
    x = np.asarray(x, dtype=float)
    m = x.size

    def flux(y: np.ndarray, i: int) -> float:
        g = plain_fields(Mh, y)["g"]
        gi = np.linalg.inv(g)
        return math.sqrt(np.linalg.det(g)) * float(gi[i] @ _fd_grad(f, y, h))

    total = 0.0
    for i in range(m):
        e = np.zeros(m)
        e[i] = h
        total += (flux(x + e, i) - flux(x - e, i)) / (2 * h)
    return total / math.sqrt(np.linalg.det(plain_fields(Mh, x)["g"]))


def fd_cosh_laplacian(Mh: GraphHypersurface, x, h: float = FD_OUTER) -> float:
    return fd_laplacian(Mh, lambda y: plain_fields(Mh, y)["cosh_phi"], x, h)


def fd_shape_operator(Mh: GraphHypersurface, x, h: float = 1e-4) -> np.ndarray:
    """A[j, i] from finite differences of the plain normal and closed-form ambient Christoffels."""
    x = np.asarray(x, dtype=float)
    m = x.size
    base = plain_fields(Mh, x, h=1e-5)
    gam = closed_form_christoffel(Mh.host, (base["u"],) + tuple(x))
    dN = np.empty((m + 1, m))
    for i in range(m):
        e = np.zeros(m)
        e[i] = h
        dN[:, i] = (plain_fields(Mh, x + e, h=1e-5)["N"] - plain_fields(Mh, x - e, h=1e-5)["N"]) / (2 * h)
    tangents = np.hstack([base["du"][:, None], np.eye(m)])
    nablaN = dN + np.einsum("abc,ib,c->ai", gam, tangents, base["N"])
    return -nablaN[1:]
