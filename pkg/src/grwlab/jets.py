"""Truncated multivariate Taylor expansions (jets) up to order 3.

A :class:`Jet` stores the Taylor coefficients ``c_alpha = d^alpha f / alpha!`` of
a field at a fixed center, for every multi-index ``alpha`` of total degree
``<= order``.  The field may be scalar- or tensor-valued: ``coeffs`` has shape
``(n_coeffs, *value_shape)`` and all elementwise arithmetic broadcasts over the
value shape the way numpy does.  Tensor contractions go through
:func:`jet_einsum`.

Multi-indices are enumerated in graded lexicographic order, so coefficient 0 is
always the value at the center and coefficients ``1..nvars`` are the first
partial derivatives.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

MAX_ORDER = 3


class JetError(ValueError):
    """Invalid jet construction or incompatible operands."""


class SingularJetError(ZeroDivisionError):
    """Division by a jet whose value vanishes."""


class JetDomainError(ValueError):
    """Elementary function evaluated outside its real domain."""


def multi_indices(nvars: int, order: int) -> list[tuple[int, ...]]:
    """All exponent tuples of total degree <= order, graded lexicographic."""
    out: list[tuple[int, ...]] = []
    for d in range(order + 1):
        deg = [a for a in itertools.product(range(d + 1), repeat=nvars) if sum(a) == d]
        out.extend(sorted(deg, reverse=True))
    return out


@dataclass(frozen=True)
class _Tables:
    nvars: int
    order: int
    index: tuple[tuple[int, ...], ...]
    position: dict
    degree: np.ndarray
    factorial: np.ndarray  # alpha! per coefficient
    # product pairs (i, j) -> k with deg i + deg j <= order
    pair_i: np.ndarray
    pair_j: np.ndarray
    scatter: np.ndarray  # (n_coeffs, n_pairs) 0/1
    # diff[k] = (source positions, factors) for each target position
    diff: tuple


@lru_cache(maxsize=None)
def _tables(nvars: int, order: int) -> _Tables:
    idx = multi_indices(nvars, order)
    pos = {a: n for n, a in enumerate(idx)}
    pi, pj, pk = [], [], []
    for i, a in enumerate(idx):
        for j, b in enumerate(idx):
            c = tuple(x + y for x, y in zip(a, b))
            if c in pos:
                pi.append(i)
                pj.append(j)
                pk.append(pos[c])
    scatter = np.zeros((len(idx), len(pi)))
    scatter[pk, np.arange(len(pi))] = 1.0
    diff = []
    for k in range(nvars):
        src, fac = [], []
        for b in multi_indices(nvars, max(order - 1, 0)) if order > 0 else []:
            a = list(b)
            a[k] += 1
            src.append(pos[tuple(a)])
            fac.append(float(a[k]))
        diff.append((np.array(src, dtype=int), np.array(fac)))
    return _Tables(
        nvars=nvars,
        order=order,
        index=tuple(idx),
        position=pos,
        degree=np.array([sum(a) for a in idx]),
        factorial=np.array([float(np.prod([math.factorial(e) for e in a])) for a in idx]),
        pair_i=np.array(pi, dtype=int),
        pair_j=np.array(pj, dtype=int),
        scatter=scatter,
        diff=tuple(diff),
    )


def n_coeffs(nvars: int, order: int) -> int:
    return math.comb(nvars + order, order)


def _expand(c: np.ndarray, ndim: int) -> np.ndarray:
    """Insert singleton value axes after the coefficient axis to reach ``ndim`` value dims."""
    extra = ndim - (c.ndim - 1)
    if extra <= 0:
        return c
    return c.reshape(c.shape[:1] + (1,) * extra + c.shape[1:])


class Jet:
    """Truncated Taylor expansion of a (possibly tensor-valued) field."""

    __slots__ = ("center", "order", "coeffs")
    __array_priority__ = 1000  # make ndarray <op> Jet defer to Jet

    def __init__(self, center: Sequence[float], order: int, coeffs: np.ndarray):
        if not 0 <= order <= MAX_ORDER:
            raise JetError(f"jet order must be in 0..{MAX_ORDER}, got {order}")
        self.center = tuple(float(c) for c in center)
        self.order = int(order)
        coeffs = np.asarray(coeffs, dtype=float)
        n = n_coeffs(len(self.center), self.order)
        if coeffs.ndim == 0 or coeffs.shape[0] != n:
            raise JetError(f"expected {n} coefficients, got array of shape {coeffs.shape}")
        self.coeffs = coeffs

    # ----------------------------------------------------------------- basics
    @property
    def nvars(self) -> int:
        return len(self.center)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.coeffs.shape[1:]

    @property
    def value(self):
        v = self.coeffs[0]
        return float(v) if v.ndim == 0 else v.copy()

    @property
    def tables(self) -> _Tables:
        return _tables(self.nvars, self.order)

    def coeff(self, alpha: Sequence[int]):
        """Taylor coefficient for multi-index ``alpha`` (zero if above the order).

        The empty tuple names the value coefficient.
        """
        alpha = tuple(alpha) or (0,) * self.nvars
        if len(alpha) != self.nvars:
            raise JetError("multi-index length does not match the number of variables")
        p = self.tables.position.get(alpha)
        if p is None:
            return 0.0 if not self.shape else np.zeros(self.shape)
        c = self.coeffs[p]
        return float(c) if c.ndim == 0 else c.copy()

    def partial(self, alpha: Sequence[int]):
        """Partial derivative ``d^alpha f`` at the center."""
        alpha = tuple(alpha)
        if sum(alpha) > self.order:
            raise JetError(f"derivative of degree {sum(alpha)} exceeds jet order {self.order}")
        fact = float(np.prod([math.factorial(a) for a in alpha]))
        return self.coeff(alpha) * fact

    def gradient(self) -> np.ndarray:
        """First partials, stacked along a leading axis of length nvars."""
        if self.order < 1:
            raise JetError("order-0 jet carries no derivatives")
        return self.coeffs[1 : 1 + self.nvars].copy()

    def __getitem__(self, item) -> Jet:
        if not isinstance(item, tuple):
            item = (item,)
        return Jet(self.center, self.order, self.coeffs[(slice(None),) + item])

    def __repr__(self) -> str:
        return f"Jet(center={self.center}, order={self.order}, shape={self.shape}, value={self.coeffs[0]!r})"

    def truncate(self, order: int) -> Jet:
        if order > self.order:
            raise JetError(f"cannot raise jet order {self.order} to {order}")
        if order == self.order:
            return self
        return Jet(self.center, order, self.coeffs[: n_coeffs(self.nvars, order)])

    def like(self, coeffs: np.ndarray) -> Jet:
        return Jet(self.center, self.order, coeffs)

    def constant_like(self, value) -> Jet:
        value = np.asarray(value, dtype=float)
        c = np.zeros((len(self.coeffs),) + value.shape)
        c[0] = value
        return Jet(self.center, self.order, c)

    def diff(self, k: int) -> Jet:
        """Jet of the partial derivative along variable ``k`` (order drops by one)."""
        if self.order == 0:
            raise JetError("cannot differentiate an order-0 jet")
        if not 0 <= k < self.nvars:
            raise JetError(f"variable index {k} out of range")
        src, fac = self.tables.diff[k]
        c = self.coeffs[src] * _expand(fac, self.coeffs.ndim - 1)
        return Jet(self.center, self.order - 1, c)

    def grad(self) -> Jet:
        """Tensor jet with a new trailing axis of length nvars holding the partials."""
        parts = [self.diff(k).coeffs for k in range(self.nvars)]
        return Jet(self.center, self.order - 1, np.stack(parts, axis=-1))

    # ------------------------------------------------------------- arithmetic
    def _coerce(self, other) -> tuple[Jet, Jet]:
        if isinstance(other, Jet):
            if other.center != self.center:
                raise JetError("jets have different centers or dimensions")
            order = min(self.order, other.order)
            return self.truncate(order), other.truncate(order)
        return self, self.constant_like(other)

    def __add__(self, other) -> Jet:
        a, b = self._coerce(other)
        nd = max(a.coeffs.ndim, b.coeffs.ndim) - 1
        return a.like(_expand(a.coeffs, nd) + _expand(b.coeffs, nd))

    __radd__ = __add__

    def __sub__(self, other) -> Jet:
        a, b = self._coerce(other)
        nd = max(a.coeffs.ndim, b.coeffs.ndim) - 1
        return a.like(_expand(a.coeffs, nd) - _expand(b.coeffs, nd))

    def __rsub__(self, other) -> Jet:
        a, b = self._coerce(other)
        nd = max(a.coeffs.ndim, b.coeffs.ndim) - 1
        return a.like(_expand(b.coeffs, nd) - _expand(a.coeffs, nd))

    def __neg__(self) -> Jet:
        return self.like(-self.coeffs)

    def __pos__(self) -> Jet:
        return self

    def __mul__(self, other) -> Jet:
        if not isinstance(other, Jet):
            other = np.asarray(other, dtype=float)
            nd = max(self.coeffs.ndim - 1, other.ndim)
            return self.like(_expand(self.coeffs, nd) * other)
        a, b = self._coerce(other)
        t = a.tables
        nd = max(a.coeffs.ndim, b.coeffs.ndim) - 1
        prod = _expand(a.coeffs[t.pair_i], nd) * _expand(b.coeffs[t.pair_j], nd)
        flat = t.scatter @ prod.reshape(prod.shape[0], -1)
        return a.like(flat.reshape((t.scatter.shape[0],) + prod.shape[1:]))

    __rmul__ = __mul__

    def __truediv__(self, other) -> Jet:
        if isinstance(other, Jet):
            a, b = self._coerce(other)
            out = a * reciprocal(b)
            out.coeffs[0] = a.coeffs[0] / b.coeffs[0]  # correctly rounded quotient
            return out
        other = np.asarray(other, dtype=float)
        if np.any(other == 0):
            raise SingularJetError("division of a jet by zero")
        out = self * (1.0 / other)
        out.coeffs[0] = self.coeffs[0] / other
        return out

    def __rtruediv__(self, other) -> Jet:
        out = reciprocal(self) * other
        out.coeffs[0] = np.asarray(other, dtype=float) / self.coeffs[0]
        return out

    def __pow__(self, p) -> Jet:
        return jet_pow(self, p)

    def __rpow__(self, base) -> Jet:
        if base <= 0:
            raise JetDomainError(f"jet exponent needs a positive base, got {base!r}")
        return jet_exp(self * math.log(base))

    # numpy ufunc hooks so expression evaluation can call np.exp etc. uniformly
    def exp(self) -> Jet:
        return jet_exp(self)

    def log(self) -> Jet:
        return jet_log(self)

    def sqrt(self) -> Jet:
        return jet_sqrt(self)

    def sin(self) -> Jet:
        return jet_sin(self)

    def cos(self) -> Jet:
        return jet_cos(self)

    def sinh(self) -> Jet:
        return jet_sinh(self)

    def cosh(self) -> Jet:
        return jet_cosh(self)

    # ------------------------------------------------------------ composition
    def compose(self, inner: Sequence[Jet]) -> Jet:
        """Substitute variable k of this jet by the jet ``inner[k]``.

        ``inner`` jets live in a (possibly different) variable space and must
        take the value ``self.center[k]`` at their own center.  The result is
        exact to ``min(self.order, inner order)``.
        """
        if len(inner) != self.nvars:
            raise JetError("need one inner jet per variable")
        order = min(self.order, min(j.order for j in inner))
        inner = [j.truncate(order) for j in inner]
        ref = inner[0]
        deltas = []
        for c, j in zip(self.center, inner):
            if j.shape:
                raise JetError("inner jets must be scalar-valued")
            if not math.isclose(j.coeffs[0], c, rel_tol=1e-12, abs_tol=1e-12):
                raise JetError(f"inner jet value {j.coeffs[0]!r} does not match center {c!r}")
            d = j.coeffs.copy()
            d[0] = 0.0
            deltas.append(ref.like(d))
        outer = self.truncate(order)
        idx = outer.tables.index
        monos: dict[tuple[int, ...], Jet] = {idx[0]: ref.constant_like(1.0)}
        for alpha in idx[1:]:
            k = next(i for i, e in enumerate(alpha) if e > 0)
            prev = list(alpha)
            prev[k] -= 1
            monos[alpha] = monos[tuple(prev)] * deltas[k]
        basis = np.stack([monos[a].coeffs for a in idx])  # (n_outer, n_inner)
        c = np.tensordot(basis, outer.coeffs, axes=([0], [0]))  # (n_inner, *shape)
        return Jet(ref.center, order, c)


# --------------------------------------------------------------- constructors
def jet_lift(variable_index: int, value: float, m: int, order: int, center: Sequence[float] | None = None) -> Jet:
    """Jet of the coordinate function ``x^variable_index``.

    ``center`` defaults to the point with ``value`` in slot ``variable_index``
    and zeros elsewhere; pass it explicitly when lifting several coordinates
    of the same point.
    """
    if not 0 <= order <= MAX_ORDER:
        raise JetError(f"jet order must be in 0..{MAX_ORDER}, got {order}")
    if not 0 <= variable_index < m:
        raise JetError(f"variable index {variable_index} out of range for m={m}")
    if center is None:
        center = [0.0] * m
        center[variable_index] = value
    elif len(center) != m or center[variable_index] != value:
        raise JetError("center inconsistent with lifted value")
    c = np.zeros(n_coeffs(m, order))
    c[0] = value
    if order >= 1:
        c[1 + variable_index] = 1.0
    return Jet(center, order, c)


def jet_variables(point: Sequence[float], order: int) -> list[Jet]:
    """Coordinate jets for every variable at ``point``."""
    point = [float(p) for p in point]
    return [jet_lift(k, point[k], len(point), order, center=point) for k in range(len(point))]


def jet_constant(value, center: Sequence[float], order: int) -> Jet:
    value = np.asarray(value, dtype=float)
    c = np.zeros((n_coeffs(len(center), order),) + value.shape)
    c[0] = value
    return Jet(center, order, c)


def jet_stack(jets: Sequence, axis: int = 0) -> Jet:
    """Stack scalar/tensor jets (or plain constants) into one tensor jet."""
    ref = next((j for j in jets if isinstance(j, Jet)), None)
    if ref is None:
        raise JetError("jet_stack needs at least one Jet")
    order = min(j.order for j in jets if isinstance(j, Jet))
    parts = []
    for j in jets:
        j = j.truncate(order) if isinstance(j, Jet) else jet_constant(j, ref.center, order)
        if j.center != ref.center:
            raise JetError("jets have different centers")
        parts.append(j.coeffs)
    ax = axis + 1 if axis >= 0 else axis
    return Jet(ref.center, order, np.stack(parts, axis=ax))


# ------------------------------------------------------- univariate functions
def _compose_series(x: Jet, taylor: Sequence[np.ndarray]) -> Jet:
    """Return sum_k taylor[k] * (x - x0)^k truncated at the jet order.

    ``taylor[k]`` holds f^(k)(x0)/k! elementwise over the value shape.
    """
    d = x.coeffs.copy()
    d[0] = 0.0
    delta = x.like(d)
    out = x.constant_like(taylor[0])
    power = None
    for k in range(1, x.order + 1):
        power = delta if power is None else power * delta
        out = out + power * taylor[k]
    return out


def reciprocal(x: Jet) -> Jet:
    v = x.coeffs[0]
    if np.any(v == 0):
        raise SingularJetError("division by a jet with zero value")
    return _compose_series(x, [(-1.0) ** k / v ** (k + 1) for k in range(x.order + 1)])


def jet_exp(x: Jet) -> Jet:
    e = np.exp(x.coeffs[0])
    return _compose_series(x, [e / math.factorial(k) for k in range(x.order + 1)])


def jet_log(x: Jet) -> Jet:
    v = x.coeffs[0]
    if np.any(v <= 0):
        raise JetDomainError(f"log of non-positive value {v!r}")
    taylor = [np.log(v)] + [(-1.0) ** (k + 1) / (k * v**k) for k in range(1, x.order + 1)]
    return _compose_series(x, taylor)


def _binom(p: float, k: int) -> float:
    out = 1.0
    for i in range(k):
        out *= (p - i) / (i + 1)
    return out


def jet_pow(x: Jet, p) -> Jet:
    if isinstance(p, Jet):
        return jet_exp(p * jet_log(x))
    p = float(p)
    v = x.coeffs[0]
    if p.is_integer() and p >= 0:
        out = x.constant_like(np.ones_like(v))
        for _ in range(int(p)):
            out = out * x
        return out
    if p.is_integer():
        return reciprocal(jet_pow(x, -p))
    if np.any(v <= 0):
        raise JetDomainError(f"non-integer power {p} of non-positive value {v!r}")
    return _compose_series(x, [_binom(p, k) * v ** (p - k) for k in range(x.order + 1)])


def jet_sqrt(x: Jet) -> Jet:
    v = x.coeffs[0]
    if np.any(v <= 0):
        raise JetDomainError(f"sqrt needs a positive value, got {v!r}")
    s = np.sqrt(v)  # correctly rounded value; pow(v, 0.5) need not be
    return _compose_series(x, [_binom(0.5, k) * s / v**k for k in range(x.order + 1)])


def _periodic(x: Jet, derivs: Sequence[np.ndarray]) -> Jet:
    return _compose_series(x, [derivs[k % 4] / math.factorial(k) for k in range(x.order + 1)])


def jet_sin(x: Jet) -> Jet:
    s, c = np.sin(x.coeffs[0]), np.cos(x.coeffs[0])
    return _periodic(x, [s, c, -s, -c])


def jet_cos(x: Jet) -> Jet:
    s, c = np.sin(x.coeffs[0]), np.cos(x.coeffs[0])
    return _periodic(x, [c, -s, -c, s])


def jet_sinh(x: Jet) -> Jet:
    s, c = np.sinh(x.coeffs[0]), np.cosh(x.coeffs[0])
    return _compose_series(x, [(s if k % 2 == 0 else c) / math.factorial(k) for k in range(x.order + 1)])


def jet_cosh(x: Jet) -> Jet:
    s, c = np.sinh(x.coeffs[0]), np.cosh(x.coeffs[0])
    return _compose_series(x, [(c if k % 2 == 0 else s) / math.factorial(k) for k in range(x.order + 1)])


_UNARY: dict[str, Callable[[Jet], Jet]] = {
    "neg": lambda a: -a,
    "exp": jet_exp,
    "log": jet_log,
    "sqrt": jet_sqrt,
    "sin": jet_sin,
    "cos": jet_cos,
    "sinh": jet_sinh,
    "cosh": jet_cosh,
}
_BINARY: dict[str, Callable] = {
    "add": lambda a, b: a + b,
    "sub": lambda a, b: a - b,
    "mul": lambda a, b: a * b,
    "div": lambda a, b: a / b,
    "pow": jet_pow,
}


def jet_arith(op: str, *args) -> Jet:
    """Apply a named elementary operation to jet arguments."""
    if op in _UNARY:
        if len(args) != 1:
            raise JetError(f"{op} takes one argument")
        return _UNARY[op](args[0])
    if op in _BINARY:
        if len(args) != 2:
            raise JetError(f"{op} takes two arguments")
        a, b = args
        if not isinstance(a, Jet):
            if not isinstance(b, Jet):
                raise JetError("at least one operand must be a Jet")
            a = b.constant_like(a)
        return _BINARY[op](a, b)
    raise JetError(f"unknown jet operation {op!r}")


# ------------------------------------------------------------ tensor algebra
def jet_einsum(subscripts: str, a, b) -> Jet:
    """Two-operand einsum over the value axes of jets (either may be constant)."""
    lhs, out = subscripts.split("->")
    sa, sb = lhs.split(",")
    if not isinstance(a, Jet) and not isinstance(b, Jet):
        raise JetError("jet_einsum needs at least one Jet")
    if not isinstance(a, Jet) or not isinstance(b, Jet):
        if isinstance(a, Jet):
            c = np.einsum(f"z{sa},{sb}->z{out}", a.coeffs, np.asarray(b, dtype=float))
            return a.like(c)
        c = np.einsum(f"{sa},z{sb}->z{out}", np.asarray(a, dtype=float), b.coeffs)
        return b.like(c)
    a, b = a._coerce(b)
    t = a.tables
    prod = np.einsum(f"z{sa},z{sb}->z{out}", a.coeffs[t.pair_i], b.coeffs[t.pair_j])
    flat = t.scatter @ prod.reshape(prod.shape[0], -1)
    return a.like(flat.reshape((t.scatter.shape[0],) + prod.shape[1:]))


def jet_trace(a: Jet) -> Jet:
    return a.like(np.trace(a.coeffs, axis1=-2, axis2=-1))


def jet_inv(a: Jet) -> Jet:
    """Inverse of a square-matrix-valued jet via the nilpotent Neumann series."""
    m0 = a.coeffs[0]
    try:
        m0inv = np.linalg.inv(m0)
    except np.linalg.LinAlgError as exc:
        raise SingularJetError("matrix jet is singular at its center") from exc
    e = a.coeffs.copy()
    e[0] = 0.0
    p = -jet_einsum("ij,jk->ik", m0inv, a.like(e))
    out = a.constant_like(np.eye(m0.shape[0]))
    power = None
    for _ in range(a.order):
        power = p if power is None else jet_einsum("ij,jk->ik", power, p)
        out = out + power
    return jet_einsum("ij,jk->ik", out, m0inv)


# ----------------------------------------------------------- finite differences
_STENCILS = {
    0: ((0,), (1.0,)),
    1: ((-1, 1), (-0.5, 0.5)),
    2: ((-1, 0, 1), (1.0, -2.0, 1.0)),
    3: ((-2, -1, 1, 2), (-0.5, 1.0, -1.0, 0.5)),
}


def fd_derivative(f: Callable[[np.ndarray], float], point: Sequence[float], idx: Sequence[int], h: float) -> float:
    """Central-difference estimate of ``d^idx f`` at ``point`` (truncation O(h^2)).

    Tensor product of per-axis second-order stencils; the largest offset is
    ``2h`` along axes differentiated three times.  ``f`` raising
    ``ValueError``/``ArithmeticError`` on the stencil is reported as a domain
    error.
    """
    point = np.asarray(point, dtype=float)
    idx = tuple(int(i) for i in idx)
    if len(idx) != point.size:
        raise JetError("multi-index length does not match the point dimension")
    if sum(idx) > MAX_ORDER or min(idx, default=0) < 0:
        raise JetError(f"unsupported multi-index {idx}")
    axes = [_STENCILS[k] for k in idx]
    total = 0.0
    for combo in itertools.product(*[list(zip(*s)) for s in axes]):
        offs = np.array([o for o, _ in combo], dtype=float)
        w = float(np.prod([c for _, c in combo]))
        try:
            val = f(point + h * offs)
        except (ValueError, ArithmeticError) as exc:
            raise JetDomainError(f"finite-difference stencil left the domain of f at {point + h * offs}") from exc
        if not np.isfinite(val):
            raise JetDomainError(f"non-finite value on stencil at {point + h * offs}")
        total += w * float(val)
    return total / h ** sum(idx)
