"""Levi-Civita connection and curvature of a metric given as a tensor jet.

Conventions (used throughout the package):

* ``gamma[a, b, c]`` is the Christoffel symbol of the second kind with the
  upper index first.
* ``R(X, Y) = [nabla_X, nabla_Y] - nabla_[X,Y]`` and
  ``R(d_c, d_d) d_b = riemann[a, b, c, d] d_a``.
* ``ricci[b, d] = riemann[a, b, a, d]``, so round spheres have positive Ricci.
"""

from __future__ import annotations

import numpy as np

from grwlab.jets import Jet, jet_einsum, jet_inv


def permute(j: Jet, spec: str) -> Jet:
    src, dst = spec.split("->")
    return j.like(np.einsum(f"z{src}->z{dst}", j.coeffs))


def levi_civita(g: Jet) -> tuple[Jet, Jet]:
    """Return ``(g_inv, gamma)``; gamma has order ``g.order - 1``."""
    ginv = jet_inv(g)
    dg = g.grad()  # dg[a, b, c] = d_c g_ab
    lowered = permute(dg, "dcb->dbc") + dg - permute(dg, "bcd->dbc")
    return ginv, jet_einsum("ad,dbc->abc", ginv, lowered) * 0.5


def riemann(gamma: Jet) -> Jet:
    dG = gamma.grad()  # dG[a, b, c, e] = d_e gamma^a_bc
    r = permute(dG, "adbc->abcd") - permute(dG, "acbd->abcd")
    r = r + jet_einsum("ace,edb->abcd", gamma, gamma) - jet_einsum("ade,ecb->abcd", gamma, gamma)
    return r


def ricci(riem: Jet) -> Jet:
    return riem.like(np.einsum("zabad->zbd", riem.coeffs))


def christoffel_value(g: np.ndarray, dg: np.ndarray) -> np.ndarray:
    """Christoffels from a metric value and its first partials ``dg[a, b, c] = d_c g_ab``."""
    ginv = np.linalg.inv(g)
    lowered = np.einsum("dcb->dbc", dg) + dg - np.einsum("bcd->dbc", dg)
    return 0.5 * np.einsum("ad,dbc->abc", ginv, lowered)


def bianchi_residual(riem: np.ndarray) -> float:
    """Max |R^a_{bcd} + R^a_{cdb} + R^a_{dbc}| for a Riemann value array."""
    cyc = riem + np.einsum("acdb->abcd", riem) + np.einsum("adbc->abcd", riem)
    return float(np.max(np.abs(cyc))) if cyc.size else 0.0
