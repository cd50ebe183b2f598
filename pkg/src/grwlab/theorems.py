"""Sample-based evaluation of the non-existence theorems' pointwise hypotheses and conclusions.

Global conditions (completeness, volume growth, integral and L^q conditions,
existence of an exhaustion function) cannot be decided from finitely many
points; they appear in every report with status ``not-checkable-at-desk-scale``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from grwlab.ambient import Spacetime
from grwlab.fiber import sectional_min_sample
from grwlab.hypersurface import GraphHypersurface, frame_at
from grwlab.identities import DEFAULT_TOLERANCES, ncc_point_margin

HOLDS = "holds-on-sample"
FAILS = "fails-at-point"
NOT_CHECKABLE = "not-checkable-at-desk-scale"

SIGN_TOL = 1e-9
SLICE_TOL = 1e-10
SUPPORT_TOL = 1e-12
CMC_TOL = 1e-8
SECTIONAL_PLANES = 16

THEOREM_IDS = ("teo1", "teo2", "cordim2", "teodiv", "teorib", "teo3", "teoale", "ste", "eds", "rad")


class EngineFault(RuntimeError):
    """Two criteria that must agree on every admitted hypersurface did not."""


@dataclass
class Condition:
    status: str
    witnesses: list = field(default_factory=list)
    value: float | None = None
    note: str = ""

    def __post_init__(self):
        if self.status == FAILS and not self.witnesses:
            raise ValueError("a failing condition needs at least one witness")


@dataclass
class HypothesisReport:
    theorem: str
    conditions: dict[str, Condition] = field(default_factory=dict)
    estimates: dict[str, float] = field(default_factory=dict)
    sample: str = ""

    @property
    def witnesses(self) -> list:
        return [w for c in self.conditions.values() for w in c.witnesses]

    @property
    def verdict(self) -> str:
        statuses = {c.status for c in self.conditions.values()}
        if FAILS in statuses:
            return "hypotheses fail on sample"
        if NOT_CHECKABLE in statuses:
            return "pointwise hypotheses hold on sample; global hypotheses not checkable"
        return "holds on sample"

    def to_dict(self) -> dict:
        return {
            "theorem": self.theorem,
            "verdict": self.verdict,
            "sample": self.sample,
            "estimates": dict(self.estimates),
            "conditions": {
                k: {"status": c.status, "value": c.value, "witnesses": [list(w) for w in c.witnesses], "note": c.note}
                for k, c in self.conditions.items()
            },
        }


def _frames(Mh: GraphHypersurface, sample: Iterable) -> list:
    frames = [frame_at(Mh, x) for x in sample]
    if not frames:
        raise ValueError("sample must be nonempty")
    return frames


def _describe(frames) -> str:
    return f"{len(frames)} points"


def _pointwise(frames, values: Sequence[float], ok) -> Condition:
    bad = [p.x for p, v in zip(frames, values) if not ok(v)]
    worst = float(max(values)) if len(values) else None
    return Condition(FAILS, bad, worst) if bad else Condition(HOLDS, [], worst)


def _not_checkable(note: str) -> Condition:
    return Condition(NOT_CHECKABLE, note=note)


def _H_rho(frames, tol: float) -> Condition:
    vals = [p.H * p.rho[1] for p in frames]
    return _pointwise(frames, vals, lambda v: v <= tol)


def _inf_hubble(frames, tol: float) -> tuple[Condition, float]:
    vals = [p.hubble**2 for p in frames]
    k = int(np.argmin(vals))
    est = float(vals[k])
    note = "sample minimum, not an infimum over M"
    if est > tol:
        return Condition(HOLDS, [], est, note), est
    return Condition(FAILS, [frames[k].x], est, note), est


def _cmc(frames) -> Condition:
    vals = [p.norm_g(p.grad_H) for p in frames]
    return _pointwise(frames, vals, lambda v: v < CMC_TOL)


def _ncc_sample(Mh: GraphHypersurface, frames) -> Condition:
    vals = [ncc_point_margin(Mh, p)[0] for p in frames]
    c = _pointwise(frames, [-v for v in vals], lambda v: v <= DEFAULT_TOLERANCES["ncc"])
    c.value = float(min(vals))
    c.note = "ncc_margin over coordinate directions and N_F at (tau, x)"
    return c


def thm1_hypotheses(Mh: GraphHypersurface, sample, tol: float = SIGN_TOL) -> HypothesisReport:
    frames = _frames(Mh, sample)
    inf_c, est = _inf_hubble(frames, tol)
    return HypothesisReport(
        "teo1",
        {
            "ncc": _ncc_sample(Mh, frames),
            "cmc": _cmc(frames),
            "H_rho_prime_nonpositive": _H_rho(frames, tol),
            "inf_hubble_squared_positive": inf_c,
            "completeness": _not_checkable("completeness of M"),
            "volume_growth": _not_checkable("liminf log Vol(B_r) / r^2 < infinity"),
        },
        {"inf_hubble_squared": est},
        _describe(frames),
    )


def thm2_bound(m: int) -> int:
    if int(m) != m or m < 2:
        raise ValueError(f"m must be an integer >= 2, got {m}")
    m = int(m)
    return m * (m - 2)


def check_angle_bound(Mh: GraphHypersurface, sample, m: int | None = None, tol: float = SIGN_TOL) -> HypothesisReport:
    """Gate 0 < H <= rho'/rho (positive) or rho'/rho <= H < 0 (negative), then sinh^2 <= m(m-2).

    The bound is asserted only when a gate holds at every sampled point;
    otherwise it is reported as vacuous.  A violation under a passing gate is
    evidence against the hypothesis set (the global ones are not checked).
    """
    frames = _frames(Mh, sample)
    m = Mh.m if m is None else m
    bound = thm2_bound(m)
    pos = _pointwise(frames, [0.0 if 0 < p.H <= p.hubble + tol else 1.0 for p in frames], lambda v: v == 0.0)
    neg = _pointwise(frames, [0.0 if p.hubble - tol <= p.H < 0 else 1.0 for p in frames], lambda v: v == 0.0)
    for c in (pos, neg):
        c.value = None
    s_vals = [p.sinh2_phi for p in frames]
    if pos.status == HOLDS or neg.status == HOLDS:
        angle = _pointwise(frames, s_vals, lambda v: v <= bound + tol)
        angle.value = float(max(s_vals))
    else:
        angle = Condition(HOLDS, [], float(max(s_vals)), "vacuous: neither gate holds on the sample")
    return HypothesisReport(
        "teo2",
        {
            "ncc": _ncc_sample(Mh, frames),
            "cmc": _cmc(frames),
            "positive_gate": pos,
            "negative_gate": neg,
            "angle_bound": angle,
            "completeness": _not_checkable("completeness of M"),
            "volume_growth": _not_checkable("liminf log Vol(B_r) / r^2 < infinity"),
        },
        {"bound": float(bound), "max_sinh2": float(max(s_vals))},
        _describe(frames),
    )


def cordim2(Mh: GraphHypersurface, sample, tol: float = SIGN_TOL) -> HypothesisReport:
    """Angle bound with m = 2: under a passing gate the hypersurface must be a slice."""
    if Mh.m != 2:
        raise ValueError("the surface case needs a 3-dimensional spacetime (m = 2)")
    rep = check_angle_bound(Mh, sample, 2, tol)
    rep.theorem = "cordim2"
    rep.estimates["is_slice"] = float(slice_classifier(Mh, sample)[0])
    return rep


def _log_rho_second(S: Spacetime, t_sample, tol: float) -> Condition:
    ts = [float(t) for t in t_sample]
    vals = [S.warp.log_second(t) for t in ts]
    bad = [(t,) for t, v in zip(ts, vals) if v > tol]
    c = Condition(FAILS, bad) if bad else Condition(HOLDS)
    c.value = float(max(vals))
    return c


def _sectional(S: Spacetime, x_sample, tol: float, seed: int = 0) -> Condition:
    xs = [tuple(float(v) for v in x) for x in x_sample]
    vals = [sectional_min_sample(S.fiber, x, SECTIONAL_PLANES, seed) for x in xs]
    bad = [x for x, v in zip(xs, vals) if v < -tol]
    c = Condition(FAILS, bad) if bad else Condition(HOLDS)
    c.value = float(min(vals))
    c.note = f"minimum over {SECTIONAL_PLANES} seeded planes per point"
    return c


def teoale_hypotheses(
    S: Spacetime, t_sample, x_sample, Mh: GraphHypersurface | None = None, sample=None, tol: float = SIGN_TOL
) -> HypothesisReport:
    t_sample, x_sample = list(t_sample), list(x_sample)
    if not t_sample or not x_sample:
        raise ValueError("t_sample and x_sample must be nonempty")
    conds = {
        "log_rho_concave": _log_rho_second(S, t_sample, tol),
        "fiber_sectional_nonnegative": _sectional(S, x_sample, tol),
    }
    est = {}
    if Mh is not None:
        frames = _frames(Mh, x_sample if sample is None else sample)
        conds["cmc"] = _cmc(frames)
        conds["H_rho_prime_nonpositive"] = _H_rho(frames, tol)
        conds["inf_hubble_squared_positive"], est["inf_hubble_squared"] = _inf_hubble(frames, tol)
    conds["completeness"] = _not_checkable("completeness of M")
    return HypothesisReport("teoale", conds, est, f"{len(t_sample)} times, {len(x_sample)} fiber points")


def slice_classifier(Mh: GraphHypersurface, sample, tol: float = SLICE_TOL) -> tuple[bool, tuple | None]:
    """(is_slice, witness).  Angle criterion and tau-constancy must agree."""
    frames = _frames(Mh, sample)
    s = np.array([p.sinh2_phi for p in frames])
    tau = np.array([p.tau for p in frames])
    by_angle = float(s.max()) < tol
    by_tau = float(np.max(np.abs(tau - tau.mean()))) < tol
    if by_angle != by_tau:
        raise EngineFault(
            f"slice criteria disagree on {Mh.name}: max sinh^2={s.max():.3e}, tau spread={np.ptp(tau):.3e}"
        )
    if by_angle:
        return True, None
    return False, frames[int(np.argmax(s))].x


def support_conclusion(Mh: GraphHypersurface, sample, tol: float = SUPPORT_TOL) -> HypothesisReport:
    """max |rho'(tau) sinh^2 phi| over the sample; zero is consistent with the conclusion."""
    frames = _frames(Mh, sample)
    vals = [abs(p.rho[1] * p.sinh2_phi) for p in frames]
    c = _pointwise(frames, vals, lambda v: v < tol)
    return HypothesisReport("support", {"rho_prime_sinh2_zero": c}, {"max_value": float(max(vals))}, _describe(frames))


def bounded_future_check(Mh: GraphHypersurface, sample, boxes: Sequence | None = None, n: int = 5) -> HypothesisReport:
    """Sample maximum of tau; with ``boxes`` the maxima over growing boxes flag a trend."""
    frames = _frames(Mh, sample)
    est = {"max_tau": float(max(p.tau for p in frames))}
    cond = Condition(NOT_CHECKABLE, value=est["max_tau"], note="sup over M estimated by the sample maximum")
    if boxes:
        maxima = []
        for box in boxes:
            axes = [np.linspace(lo, hi, n) for lo, hi in box]
            grid = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, len(box))
            maxima.append(max(float(Mh.tau(list(x))) for x in grid))
        est.update({f"max_tau_box_{k}": v for k, v in enumerate(maxima)})
        if all(b > a for a, b in zip(maxima, maxima[1:])):
            cond.note = "unbounded-trend: sampled maxima increase with the box"
            est["unbounded_trend"] = 1.0
        else:
            est["unbounded_trend"] = 0.0
    return HypothesisReport("bounded_future", {"sup_tau_finite": cond}, est, _describe(frames))


def _integrability(frames, name: str) -> Condition:
    vals = [p.sinh2_phi for p in frames]
    return Condition(NOT_CHECKABLE, value=float(max(vals)), note=f"{name}; sample max of sinh^2 attached")


def theorem_report(theorem: str, Mh: GraphHypersurface, sample, tol: float = SIGN_TOL) -> HypothesisReport:
    """Dispatch on a theorem id; see THEOREM_IDS."""
    sample = list(sample)
    S = Mh.host
    if theorem == "teo1":
        return thm1_hypotheses(Mh, sample, tol)
    if theorem == "teo2":
        return check_angle_bound(Mh, sample, None, tol)
    if theorem == "cordim2":
        return cordim2(Mh, sample, tol)
    if theorem == "teoale":
        ts = sorted({frame_at(Mh, x).tau for x in sample})
        return teoale_hypotheses(S, ts, sample, Mh, sample, tol)
    frames = _frames(Mh, sample)
    if theorem in ("teodiv", "teorib", "teo3"):
        conds = {"cmc": _cmc(frames), "H_rho_prime_nonpositive": _H_rho(frames, tol)}
        if theorem == "teorib":
            ts = sorted({p.tau for p in frames})
            conds["log_rho_concave"] = _log_rho_second(S, ts, tol)
            conds["fiber_sectional_nonnegative"] = _sectional(S, sample, tol)
            conds["sinh_L2"] = _integrability(frames, "sinh phi in L^2(M)")
        else:
            conds["ncc"] = _ncc_sample(Mh, frames)
            if theorem == "teodiv":
                conds["sinh_L2"] = _integrability(frames, "sinh phi in L^2(M)")
                conds["exhaustion_function"] = _not_checkable("existence of zeta with bounded gradient and Laplacian")
            else:
                conds["sinh2_Lq"] = _integrability(frames, "sinh^2 phi in L^q(M) for some q > 2")
        conds["completeness"] = _not_checkable("completeness of M")
        sup = support_conclusion(Mh, sample)
        return HypothesisReport(theorem, conds, {"conclusion_max": sup.estimates["max_value"]}, _describe(frames))
    if theorem in ("ste", "eds", "rad"):
        expected = {"ste": "steady_state", "eds": "einstein_de_sitter", "rad": "radiation"}[theorem]
        conds = {
            "spacetime": Condition(HOLDS) if S.name == expected else Condition(FAILS, [(S.name,)]),
            "cmc": _cmc(frames),
            "H_nonpositive": _pointwise(frames, [p.H for p in frames], lambda v: v <= tol),
            "completeness": _not_checkable("completeness of M"),
        }
        est = {}
        if theorem != "ste":
            bf = bounded_future_check(Mh, sample)
            conds["bounded_away_from_future"] = bf.conditions["sup_tau_finite"]
            est["max_tau"] = bf.estimates["max_tau"]
        return HypothesisReport(theorem, conds, est, _describe(frames))
    raise KeyError(f"unknown theorem id {theorem!r}; expected one of {THEOREM_IDS}")
