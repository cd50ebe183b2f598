import math

import numpy as np
import pytest

from grwlab import tensors
from grwlab.ambient import (
    InternalConsistencyError,
    IntervalDomainError,
    Spacetime,
    WarpFunction,
    ambient_christoffel,
    ambient_geometry,
    ambient_metric,
    conformal_K_residual,
    div_comoving,
    div_comoving_generic,
    ncc_margin,
    null_ricci,
    oneill_ricci_check,
    ricci_bar,
    riemann_bar,
    tcc_check,
)
from grwlab.catalog import catalog_spacetimes, make_named
from grwlab.fiber import FiberMetric
from grwlab.jets import fd_derivative


def cosh_spacetime(m=2):
    return make_named("custom", m, {"rho": "cosh(t)"})


def sample(S, n, seed=0, t_range=(0.5, 2.0)):
    rng = np.random.default_rng(seed)
    ts = rng.uniform(*t_range, n)
    lo = np.array([b[0] for b in S.fiber.box]) * 0.8
    hi = np.array([b[1] for b in S.fiber.box]) * 0.8
    xs = lo + (hi - lo) * rng.random((n, S.m))
    return [(float(t),) + tuple(float(v) for v in x) for t, x in zip(ts, xs)]


def fd_rho(S, t):
    """rho, rho', rho'' from central differences of the plain warp function."""
    f = lambda p: float(S.warp(p[0]))
    return [fd_derivative(f, [t], (k,), 1e-3) for k in range(3)]


def test_metric_examples():
    mink = make_named("minkowski", 3)
    assert np.array_equal(ambient_metric(mink, (0.3, 0.1, 0.2, 0.0)), np.diag([-1.0, 1, 1, 1]))
    assert np.allclose(ambient_metric(make_named("steady_state"), (0.0, 0.1, 0.1)), np.diag([-1.0, 1, 1]))
    g = ambient_metric(make_named("einstein_de_sitter"), (8.0, 0.1, 0.1))
    assert np.allclose(g, np.diag([-1.0, 16, 16]), rtol=1e-14)


def test_lorentzian_signature_everywhere():
    for S in catalog_spacetimes(3):
        for p in sample(S, 20):
            ev = np.linalg.eigvalsh(ambient_geometry(S, p).metric)
            assert (ev < 0).sum() == 1 and (ev > 0).sum() == S.m


def test_christoffel_examples():
    gen, closed = ambient_christoffel(make_named("minkowski"), (0.2, 0.1, 0.1))
    assert np.all(gen == 0) and np.all(closed == 0)
    gen, _ = ambient_christoffel(make_named("steady_state"), (0.0, 0.1, -0.2))
    assert gen[0, 1, 1] == pytest.approx(1.0) and gen[0, 2, 2] == pytest.approx(1.0)
    assert gen[1, 0, 1] == pytest.approx(1.0) and gen[2, 0, 2] == pytest.approx(1.0)
    gen, _ = ambient_christoffel(make_named("einstein_de_sitter"), (1.0, 0.1, -0.2))
    assert gen[1, 0, 1] == pytest.approx(2 / 3, abs=1e-14)


def test_christoffel_routes_agree_on_curved_fibers():
    for kind in ("sphere", "hyperbolic"):
        S = Spacetime(WarpFunction.from_text("t^(2/3)", (0, math.inf)), FiberMetric(3, kind))
        for p in sample(S, 20, t_range=(0.5, 3.0)):
            ambient_christoffel(S, p)


def test_christoffel_disagreement_is_a_fault(monkeypatch):
    import grwlab.ambient as amb

    S = make_named("steady_state")
    real = amb.closed_form_christoffel
    monkeypatch.setattr(amb, "closed_form_christoffel", lambda S, p: real(S, p) * 1.001)
    with pytest.raises(InternalConsistencyError):
        amb.ambient_christoffel(S, (0.3, 0.1, 0.1))


def test_interval_margin():
    with pytest.raises(IntervalDomainError):
        ambient_metric(make_named("einstein_de_sitter"), (1e-4, 0.0, 0.0))


def test_conformal_field_examples():
    assert conformal_K_residual(make_named("minkowski"), (0.0, 0.1, 0.2), [1, 0.3, 0.2]) == 0
    assert conformal_K_residual(make_named("steady_state"), (0.0, 0.1, 0.2), [0, 1, 0]) < 1e-9
    rad = make_named("radiation", 2, {"a": 1.0})
    assert conformal_K_residual(rad, (1.0, 0.1, 0.2), [1, 0, 0]) < 1e-9
    assert ambient_geometry(rad, (1.0, 0.1, 0.2)).rho[1] == pytest.approx(1 / math.sqrt(2))


def test_curvature_examples():
    assert np.all(riemann_bar(make_named("minkowski"), (0.1, 0.1, 0.1)) == 0)
    ss3 = make_named("steady_state", 3)
    for t in (-0.5, 0.0, 1.3):
        assert ricci_bar(ss3, (t, 0.1, 0.2, 0.3))[0, 0] == pytest.approx(-3.0, abs=1e-12)
    assert ricci_bar(make_named("einstein_de_sitter"), (1.0, 0.0, 0.0))[0, 0] == pytest.approx(4 / 9, abs=1e-13)


def test_curvature_symmetries():
    for S in catalog_spacetimes(2) + [cosh_spacetime(3)]:
        for p in sample(S, 10, seed=2):
            geo = ambient_geometry(S, p)
            scale = max(1.0, np.max(np.abs(geo.riemann)))
            assert tensors.bianchi_residual(geo.riemann) / scale < 1e-9
            assert np.allclose(geo.ricci, geo.ricci.T, atol=1e-12 * scale)


def test_oneill_examples():
    assert oneill_ricci_check(make_named("minkowski"), (0.0, 0.1, 0.1), [1, 0]) == (0.0, 0.0)
    a, b = oneill_ricci_check(make_named("steady_state"), (0.4, 0.1, 0.1), [1, 0])
    assert abs(a) < 1e-8 and abs(b) < 1e-8
    a, b = oneill_ricci_check(make_named("radiation", 3), (1.0, 0.1, 0.1, 0.1), [0.3, -0.2, 0.5])
    assert abs(a) < 1e-8 and abs(b) < 1e-8


def test_oneill_on_curved_fiber():
    S = Spacetime(WarpFunction.from_text("cosh(t)"), FiberMetric(3, "sphere"))
    for p in sample(S, 10, seed=5):
        a, b = oneill_ricci_check(S, p, [0.2, 0.4, -0.1])
        assert abs(a) < 1e-8 and abs(b) < 1e-8


def test_ncc_examples():
    for t in (-1.0, 0.0, 2.0):
        assert ncc_margin(make_named("steady_state"), (t, 0.1, 0.1), [1, 0]) == pytest.approx(0.0, abs=1e-12)
    eds = make_named("einstein_de_sitter")
    r, r1, r2 = fd_rho(eds, 1.0)
    oracle = -2 * (r * r2 - r1 * r1)
    value = ncc_margin(eds, (1.0, 0.0, 0.0), [1, 0])
    assert value == pytest.approx(4 / 3, abs=1e-12)
    assert value == pytest.approx(oracle, abs=1e-5)
    assert ncc_margin(cosh_spacetime(), (0.0, 0.0, 0.0), [1, 0]) == pytest.approx(-2.0, abs=1e-9)


def test_ncc_sign_matches_log_concavity():
    for S in catalog_spacetimes(2) + [cosh_spacetime()]:
        for t in np.linspace(0.5, 4.0, 15):
            margin = ncc_margin(S, (t, 0.0, 0.0), [1, 0])
            assert (margin >= -1e-12) == (S.warp.log_second(t) <= 1e-12)


def test_null_ricci_flat_fiber_matches_exact_form():
    """Exact Ric(z, z) for a flat fiber is -(m-1)(log rho)'' for a unit null z."""
    for S in catalog_spacetimes(3) + [cosh_spacetime(3)]:
        for t in (0.6, 1.0, 2.5):
            value = null_ricci(S, (t, 0.1, 0.0, -0.1), [0.3, 0.1, 0.2])
            assert value == pytest.approx(-(S.m - 1) * S.warp.log_second(t), abs=1e-10)


def test_divergence_examples():
    assert div_comoving(make_named("steady_state", 3), 0.7) == pytest.approx(3.0)
    assert div_comoving(make_named("einstein_de_sitter", 3), 2.0) == pytest.approx(1.0)
    assert div_comoving(make_named("minkowski"), 1.0) == 0
    for S in catalog_spacetimes(2):
        assert div_comoving_generic(S, (1.3, 0.1, 0.2)) == pytest.approx(div_comoving(S, 1.3), rel=1e-12)


def test_tcc_examples():
    assert tcc_check(make_named("minkowski"), (0.0, 0.0, 0.0), [1, 0, 0]) == 0
    ss = make_named("steady_state")
    assert tcc_check(ss, (0.0, 0.0, 0.0), [1, 0, 0]) == pytest.approx(-2.0, abs=1e-12)
    assert ncc_margin(ss, (0.0, 0.0, 0.0), [1, 0]) >= 0
    assert tcc_check(make_named("einstein_de_sitter"), (1.0, 0, 0), [1, 0, 0]) == pytest.approx(4 / 9, abs=1e-12)
    with pytest.raises(ValueError):
        tcc_check(ss, (0.0, 0.0, 0.0), [1, 1, 0])
