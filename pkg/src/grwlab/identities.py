"""Pointwise certification of the Laplacian identity for cosh(phi) and its consequences.

Notation in this module: ``c = cosh phi``, ``s = sinh^2 phi``, ``h = rho'/rho``,
``L = (log rho)''`` (all at tau), ``T`` the tangential part of d_t.

The inequality for ``c * Lap c`` comes from the identity by dropping
``|Hess tau|^2``.  Expanding both right-hand sides shows the remaining terms
agree exactly:

    H terms:   2 m h H c - m h H c (c^2 + 1)           = -m h H c s
    L terms:   -(m-1) L s c^2 - (L + h^2) c^2 s         = -m L c^2 s
    h^2 terms: h^2 [-(m-1+c^4) - c^2 s + 3 c^2 s + m c^2] = h^2 s (m + s)

so the rearrangement term between them is identically zero; it is still
evaluated numerically (:func:`rearrangement_term`) so that any disagreement
in the printed forms shows up as a nonzero decomposition residual.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from grwlab import ambient
from grwlab.hypersurface import (
    GraphHypersurface,
    PointGeometry,
    codazzi_terms,
    frame_at,
    hess_norm_closed_form,
)

CMC_TOL = 1e-6

DEFAULT_TOLERANCES: dict[str, float] = {
    "part-sinh": 1e-10,
    "gch": 1e-7,
    "gradcosh": 1e-7,
    "KT": 1e-7,
    "nt": 1e-7,
    "he2": 1e-6,
    "codazzi": 1e-6,
    "ritn": 1e-6,
    "clap1": 1e-6,
    "clap2": 1e-6,
    "laps": 1e-6,
    "bridge": 1e-6,
    "conexion": 1e-9,
    "oneill": 1e-8,
    "ncc": 1e-9,
}


@dataclass
class IdentityReport:
    check: str
    point: tuple[float, ...]
    lhs: float
    rhs: float
    residual: float
    margin: float | None = None
    passed: bool = True
    terms: dict[str, float] = field(default_factory=dict)
    scale: float = 1.0
    tol: float = 0.0
    asserted: bool = True
    note: str = ""
    extra: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        self.lhs, self.rhs, self.residual = float(self.lhs), float(self.rhs), float(self.residual)
        if self.margin is not None:
            self.margin = float(self.margin)
        self.terms = {k: float(v) for k, v in self.terms.items()}
        self.extra = {k: float(v) for k, v in self.extra.items()}
        self.passed = bool(self.passed)

    @property
    def relative_residual(self) -> float:
        return abs(self.residual) / self.scale


def _identity(check, p, lhs, terms, tol, extra=None, note="") -> IdentityReport:
    rhs = float(sum(terms.values()))
    scale = max(1.0, abs(lhs), *(abs(v) for v in terms.values()))
    res = lhs - rhs
    return IdentityReport(
        check=check,
        point=p.x,
        lhs=float(lhs),
        rhs=rhs,
        residual=float(res),
        passed=abs(res) / scale < tol,
        terms=dict(terms),
        extra=dict(extra or {}),
        scale=scale,
        tol=tol,
        note=note,
    )


def _inequality(check, p, lhs, terms, tol, extra=None, asserted=True, note="") -> IdentityReport:
    rhs = float(sum(terms.values()))
    scale = max(1.0, abs(lhs), *(abs(v) for v in terms.values()))
    margin = lhs - rhs
    return IdentityReport(
        check=check,
        point=p.x,
        lhs=float(lhs),
        rhs=rhs,
        residual=float(margin),
        margin=float(margin),
        passed=margin / scale >= -tol,
        terms=dict(terms),
        extra=dict(extra or {}),
        scale=scale,
        tol=tol,
        asserted=asserted,
        note=note,
    )


def _tol(name: str, tol: float | None) -> float:
    return DEFAULT_TOLERANCES[name] if tol is None else tol


def _dtT_ambient(p: PointGeometry) -> np.ndarray:
    e_t = np.zeros(p.m + 1)
    e_t[0] = 1.0
    return e_t - p.cosh_phi * p.N


# ------------------------------------------------------------------- checks
def ritn_residual(Mh: GraphHypersurface, x, tol: float | None = None) -> IdentityReport:
    """Ric(dtT, N) against  -c {Ric^F(N_F, N_F) - (m-1) L s}.

    The breakdown also carries the residual of the form with ``+ (m-1) L s``,
    which disagrees with the generic Ricci whenever L s != 0.
    """
    p = frame_at(Mh, x)
    m, c, s, L = p.m, p.cosh_phi, p.sinh2_phi, p.log_rho_second
    lhs = float(_dtT_ambient(p) @ p.ricci_bar @ p.N)
    terms = {"ric_F": -c * p.ric_F_NF, "log_rho": c * (m - 1) * L * s}
    printed = -c * (p.ric_F_NF + (m - 1) * L * s)
    return _identity("ritn", p, lhs, terms, _tol("ritn", tol), {"plus_sign_form_residual": lhs - printed})


def clap1_terms(p: PointGeometry) -> dict[str, float]:
    m, c, s, h, H = p.m, p.cosh_phi, p.sinh2_phi, p.hubble, p.H
    r, r1, r2, _ = p.rho
    return {
        "ricci": c * c * (p.ric_F_NF - (m - 1) * p.log_rho_second * s),
        "grad_H": -m * c * float(p.grad_H @ p.g @ p.dtT),
        "hess_tau": p.hess_tau_norm2,
        "h2_quartic": -h * h * (m - 1 + c**4),
        "H_linear": 2 * m * h * H * c,
        "H_cubic": -m * h * H * c * (c * c + 1),
        "rho_second": -(r2 / r) * c * c * s,
        "h2_cs": 3 * h * h * c * c * s,
        "h2_c2": m * h * h * c * c,
    }


def clap2_terms(p: PointGeometry) -> dict[str, float]:
    m, c, s, h, H = p.m, p.cosh_phi, p.sinh2_phi, p.hubble, p.H
    return {
        "ncc_combination": c * c * (p.ric_F_NF - m * p.log_rho_second * s),
        "grad_H": -m * c * float(p.grad_H @ p.g @ p.dtT),
        "H_term": -m * h * H * c * s,
        "h2_term": h * h * s * (m + s),
    }


def rearrangement_term(p: PointGeometry) -> float:
    """(identity RHS - |Hess tau|^2) - inequality RHS, in closed form: zero."""
    return 0.0


def master_identity(Mh: GraphHypersurface, x, tol: float | None = None) -> IdentityReport:
    """cosh phi * Lap cosh phi against its term-by-term expansion."""
    p = frame_at(Mh, x)
    lhs = p.cosh_phi * p.lap_cosh
    return _identity("clap1", p, lhs, clap1_terms(p), _tol("clap1", tol))


def inequality_chain(Mh: GraphHypersurface, x, tol: float | None = None) -> IdentityReport:
    """Margin of the differential inequality for cosh phi * Lap cosh phi (grad H kept).

    ``decomposition_residual`` = margin - (identity residual + |Hess tau|^2 +
    rearrangement term), which vanishes when the two expansions are consistent.
    """
    p = frame_at(Mh, x)
    lhs = p.cosh_phi * p.lap_cosh
    t1 = clap1_terms(p)
    t2 = clap2_terms(p)
    clap1_res = lhs - sum(t1.values())
    margin = lhs - sum(t2.values())
    rearr = rearrangement_term(p)
    numeric_rearr = (sum(t1.values()) - p.hess_tau_norm2) - sum(t2.values())
    extra = {
        "dropped_hess_tau": p.hess_tau_norm2,
        "ncc_combination": t2["ncc_combination"],
        "identity_residual": clap1_res,
        "rearrangement": rearr,
        "rearrangement_numeric": numeric_rearr,
        "decomposition_residual": margin - (clap1_res + p.hess_tau_norm2 + rearr),
    }
    return _inequality("clap2", p, lhs, t2, _tol("clap2", tol), extra)


def ncc_point_margin(Mh: GraphHypersurface, p: PointGeometry) -> tuple[float, np.ndarray]:
    """Smallest ncc_margin over g_F-unit coordinate directions and N_F at (tau, x)."""
    S = Mh.host
    gF = np.array(S.fiber.components_on(list(p.x)), dtype=float)
    vecs = [np.eye(p.m)[i] for i in range(p.m)]
    if np.any(p.N_F):
        vecs.append(p.N_F)
    best, witness = np.inf, vecs[0]
    for v in vecs:
        v = v / np.sqrt(v @ gF @ v)
        val = ambient.ncc_margin(S, (p.tau,) + p.x, v)
        if val < best:
            best, witness = val, v
    return float(best), witness


def lemma1_margin(Mh: GraphHypersurface, x, tol: float | None = None, cmc_tol: float = CMC_TOL) -> IdentityReport:
    """Margin of  1/2 Lap s >= -m h H c s + h^2 s (m + s).

    Asserted only where the NCC form holds and |grad H| < cmc_tol; otherwise the
    report is informational and ``adjusted_margin`` (which restores the NCC and
    grad H terms and is non-negative unconditionally) is attached.
    """
    p = frame_at(Mh, x)
    m, c, s, h, H = p.m, p.cosh_phi, p.sinh2_phi, p.hubble, p.H
    lhs = 0.5 * p.lap_sinh2
    terms = {"H_term": -m * h * H * c * s, "h2_term": h * h * s * (m + s)}
    ncc_min, _ = ncc_point_margin(Mh, p)
    grad_h = p.norm_g(p.grad_H)
    t2 = clap2_terms(p)
    adjusted = lhs - sum(terms.values()) - t2["ncc_combination"] - t2["grad_H"]
    gates = ncc_min >= -DEFAULT_TOLERANCES["ncc"] and grad_h < cmc_tol
    note = "" if gates else f"informational: ncc_min={ncc_min:.3e}, |grad H|={grad_h:.3e}"
    extra = {"ncc_min": ncc_min, "grad_H_norm": grad_h, "adjusted_margin": adjusted}
    return _inequality("laps", p, lhs, terms, _tol("laps", tol), extra, asserted=gates, note=note)


def sinh_identity_bridge(Mh: GraphHypersurface, x, tol: float | None = None) -> IdentityReport:
    """1/2 Lap sinh^2 phi = cosh phi Lap cosh phi + |grad cosh phi|^2."""
    p = frame_at(Mh, x)
    terms = {"c_lap_c": p.cosh_phi * p.lap_cosh, "grad_c_sq": float(p.grad_cosh @ p.g @ p.grad_cosh)}
    return _identity("bridge", p, 0.5 * p.lap_sinh2, terms, _tol("bridge", tol))


# --------------------------------------------- hypersurface/ambient wrappers
def _vector_report(check, p, diff: np.ndarray, ref: np.ndarray, tol) -> IdentityReport:
    res = p.norm_g(diff)
    scale = max(1.0, p.norm_g(ref))
    return IdentityReport(
        check=check, point=p.x, lhs=res, rhs=0.0, residual=res, passed=res / scale < tol, scale=scale, tol=tol
    )


def part_sinh_report(Mh, x, tol=None) -> IdentityReport:
    p = frame_at(Mh, x)
    t = _tol("part-sinh", tol)
    a = p.norm_g(p.grad_tau + p.dtT)
    lhs = float(p.grad_tau @ p.g @ p.grad_tau)
    res = max(a, abs(lhs - p.sinh2_phi))
    scale = max(1.0, p.sinh2_phi)
    return IdentityReport(
        check="part-sinh",
        point=p.x,
        lhs=lhs,
        rhs=p.sinh2_phi,
        residual=res,
        passed=res / scale < t,
        extra={"grad_tau_plus_dtT": a},
        scale=scale,
        tol=t,
    )


def gch_report(Mh, x, tol=None) -> IdentityReport:
    p = frame_at(Mh, x)
    rhs = p.A @ p.dtT + p.hubble * p.cosh_phi * p.dtT
    return _vector_report("gch", p, p.grad_cosh - rhs, rhs, _tol("gch", tol))


def gradcosh_report(Mh, x, tol=None) -> IdentityReport:
    p = frame_at(Mh, x)
    return _vector_report("gradcosh", p, p.grad_gKN + p.A @ p.KT, p.A @ p.KT, _tol("gradcosh", tol))


def _direction_worst(check, p, lhs_cols, rhs_fn, tol) -> IdentityReport:
    worst, scale = 0.0, 1.0
    for i in range(p.m):
        rhs = rhs_fn(i)
        worst = max(worst, p.norm_g(lhs_cols[:, i] - rhs))
        scale = max(scale, p.norm_g(rhs))
    return IdentityReport(
        check=check, point=p.x, lhs=worst, rhs=0.0, residual=worst, passed=worst / scale < tol, scale=scale, tol=tol
    )


def KT_report(Mh, x, tol=None) -> IdentityReport:
    p = frame_at(Mh, x)
    r, r1 = p.rho[:2]
    eye = np.eye(p.m)
    return _direction_worst("KT", p, p.nabla_KT, lambda i: r * p.cosh_phi * p.A[:, i] + r1 * eye[i], _tol("KT", tol))


def nt_report(Mh, x, tol=None) -> IdentityReport:
    p = frame_at(Mh, x)
    h = p.hubble
    eye = np.eye(p.m)

    def rhs(i):
        return h * float(eye[i] @ p.g @ p.dtT) * p.dtT + p.cosh_phi * p.A[:, i] + h * eye[i]

    return _direction_worst("nt", p, p.nabla_dtT, rhs, _tol("nt", tol))


def he2_report(Mh, x, tol=None) -> IdentityReport:
    p = frame_at(Mh, x)
    t = _tol("he2", tol)
    rhs = hess_norm_closed_form(p)
    res = p.hess_tau_norm2 - rhs
    scale = max(1.0, abs(rhs), p.hess_tau_norm2)
    return IdentityReport("he2", p.x, p.hess_tau_norm2, rhs, res, passed=abs(res) / scale < t, scale=scale, tol=t)


def codazzi_report(Mh, x, tol=None) -> IdentityReport:
    p = frame_at(Mh, x)
    t = _tol("codazzi", tol)
    worst, scale, at = 0.0, 1.0, (0, 0, 0)
    for i in range(p.m):
        for j in range(p.m):
            for k in range(p.m):
                lhs, rhs = codazzi_terms(p, i, j, k)
                scale = max(scale, abs(lhs), abs(rhs))
                if abs(lhs - rhs) > worst:
                    worst, at = abs(lhs - rhs), (i, j, k)
    lhs, rhs = codazzi_terms(p, *at)
    return IdentityReport("codazzi", p.x, lhs, rhs, lhs - rhs, passed=worst / scale < t, scale=scale, tol=t)


def conexion_report(Mh, x, tol=None) -> IdentityReport:
    p = frame_at(Mh, x)
    t = _tol("conexion", tol)
    pt = (p.tau,) + p.x
    res = max(ambient.conformal_K_residual(Mh.host, pt, e) for e in np.eye(p.m + 1))
    scale = max(1.0, abs(p.rho[1]))
    return IdentityReport("conexion", p.x, res, 0.0, res, passed=res / scale < t, scale=scale, tol=t)


def oneill_report(Mh, x, tol=None) -> IdentityReport:
    p = frame_at(Mh, x)
    t = _tol("oneill", tol)
    pt = (p.tau,) + p.x
    vecs = [np.eye(p.m)[0]] + ([p.N_F] if np.any(p.N_F) else [])
    worst = 0.0
    for v in vecs:
        worst = max(worst, *map(abs, ambient.oneill_ricci_check(Mh.host, pt, v)))
    scale = max(1.0, float(np.max(np.abs(p.ricci_bar))))
    return IdentityReport("oneill", p.x, worst, 0.0, worst, passed=worst / scale < t, scale=scale, tol=t)


def ncc_report(Mh, x, tol=None) -> IdentityReport:
    p = frame_at(Mh, x)
    t = _tol("ncc", tol)
    margin, v = ncc_point_margin(Mh, p)
    r, r1, r2, _ = p.rho
    scale = max(1.0, abs(p.m * (r * r2 - r1 * r1)))
    return IdentityReport(
        "ncc",
        p.x,
        margin,
        0.0,
        margin,
        margin=margin,
        passed=margin / scale >= -t,
        extra={"tau": p.tau},
        scale=scale,
        tol=t,
        note=f"witness t={p.tau!r} v={v.tolist()}" if margin / scale < -t else "",
    )


CHECKS: dict[str, Callable[..., IdentityReport]] = {
    "ritn": ritn_residual,
    "clap1": master_identity,
    "clap2": inequality_chain,
    "laps": lemma1_margin,
    "bridge": sinh_identity_bridge,
    "codazzi": codazzi_report,
    "gch": gch_report,
    "gradcosh": gradcosh_report,
    "KT": KT_report,
    "nt": nt_report,
    "he2": he2_report,
    "part-sinh": part_sinh_report,
    "conexion": conexion_report,
    "oneill": oneill_report,
    "ncc": ncc_report,
}


def run_check(name: str, Mh: GraphHypersurface, x, tol: float | None = None) -> IdentityReport:
    try:
        fn = CHECKS[name]
    except KeyError:
        raise KeyError(f"unknown check {name!r}; registry: {sorted(CHECKS)}") from None
    return fn(Mh, x, tol=tol)
