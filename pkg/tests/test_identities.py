import math

import numpy as np
import pytest

from grwlab import catalog
from grwlab.catalog import catalog_spacetimes, make_named
from grwlab.hypersurface import GraphHypersurface, frame_at
from grwlab.identities import (
    CHECKS,
    DEFAULT_TOLERANCES,
    IdentityReport,
    clap1_terms,
    clap2_terms,
    inequality_chain,
    lemma1_margin,
    master_identity,
    rearrangement_term,
    ritn_residual,
    run_check,
    sinh_identity_bridge,
)
from helpers import box_points, grid_points

MINK = make_named("minkowski")
SS = make_named("steady_state")
RAD = make_named("radiation")
HYP = catalog.hyperboloid(MINK)


def graph(text, S):
    return GraphHypersurface.from_text(text, S, box=catalog.default_box(S))


def test_registry_matches_cli_names():
    assert set(CHECKS) == {
        "ritn", "clap1", "clap2", "laps", "bridge", "codazzi", "gch", "gradcosh",
        "KT", "nt", "he2", "part-sinh", "conexion", "oneill", "ncc",
    }
    assert set(DEFAULT_TOLERANCES) == set(CHECKS)
    with pytest.raises(KeyError, match="registry"):
        run_check("nope", HYP, (0.0, 0.0))


def test_report_pass_invariant():
    r = master_identity(HYP, (0.3, 0.2))
    assert r.residual == pytest.approx(r.lhs - r.rhs, abs=1e-15)
    assert r.rhs == pytest.approx(sum(r.terms.values()), abs=1e-15)
    assert r.passed == (abs(r.residual) / r.scale < r.tol)
    q = inequality_chain(HYP, (0.3, 0.2))
    assert q.passed == (q.margin / q.scale >= -q.tol)


def test_ritn_examples():
    r = ritn_residual(catalog.slice_graph(SS, 1.0), (0.1, 0.2))
    assert r.lhs == 0 and r.residual == 0
    r = ritn_residual(catalog.random_cubic_graph(MINK, 0), (0.1, 0.2))
    assert abs(r.lhs) < 1e-14 and r.passed
    Mh = catalog.random_cubic_graph(SS, 1)
    for x in box_points(Mh.box, 20, seed=1):
        r = ritn_residual(Mh, x)
        assert r.passed and r.relative_residual < 1e-6


def test_ritn_reports_the_plus_sign_form_disagreement():
    # EdS has (log rho)'' != 0, so the sign in front of the (m-1) L s term is observable
    Mh = graph("1 + 0.3*x1", make_named("einstein_de_sitter"))
    r = ritn_residual(Mh, (0.2, 0.1))
    p = frame_at(Mh, (0.2, 0.1))
    assert r.passed
    expected = 2 * p.cosh_phi * (p.m - 1) * p.log_rho_second * p.sinh2_phi
    assert r.extra["plus_sign_form_residual"] == pytest.approx(expected, rel=1e-6)
    assert abs(expected) > 1e-2


def test_clap1_slices_cancel_termwise():
    for S in catalog_spacetimes(2):
        Mh = catalog.slice_graph(S, 1.0)
        p = frame_at(Mh, (0.1, -0.2))
        r = master_identity(Mh, (0.1, -0.2))
        assert r.lhs == 0 and abs(r.residual) < 1e-12
        assert sum(clap1_terms(p).values()) == pytest.approx(0.0, abs=1e-12)


def test_clap1_hyperboloid_grid():
    for x in grid_points(((-0.7, 0.7), (-0.7, 0.7)), 5):
        r = master_identity(HYP, x)
        assert r.relative_residual < 1e-6


@pytest.mark.parametrize("S", catalog_spacetimes(2), ids=lambda S: S.name)
def test_clap1_random_cubic(S):
    Mh = catalog.random_cubic_graph(S, 0)
    for x in box_points(Mh.box, 100, seed=7):
        assert master_identity(Mh, x).relative_residual < 1e-6


def test_hyperboloid_margin_is_hessian_norm():
    for x in box_points(HYP.box, 20, seed=2):
        r = inequality_chain(HYP, x)
        p = frame_at(HYP, x)
        assert r.margin == pytest.approx(2 * p.cosh_phi**2, abs=1e-6)
        assert r.extra["dropped_hess_tau"] == pytest.approx(2 * p.cosh_phi**2, rel=1e-8)


def test_rearrangement_is_identically_zero():
    for S in catalog_spacetimes(2):
        for k in range(2):
            Mh = catalog.random_cubic_graph(S, k)
            for x in box_points(Mh.box, 10, seed=k):
                p = frame_at(Mh, x)
                assert rearrangement_term(p) == 0.0
                numeric = sum(clap1_terms(p).values()) - p.hess_tau_norm2 - sum(clap2_terms(p).values())
                scale = max(1.0, *(abs(v) for v in clap1_terms(p).values()))
                assert abs(numeric) / scale < 1e-12


def test_decomposition_and_margin_on_random_graphs():
    for S in catalog_spacetimes(2):
        for k in range(catalog.RANDOM_GRAPHS):
            Mh = catalog.random_cubic_graph(S, k)
            for x in box_points(Mh.box, 20, seed=k):
                r = inequality_chain(Mh, x)
                assert abs(r.extra["decomposition_residual"]) < 1e-8
                assert r.margin >= -1e-6 and r.passed


def test_laps_on_cmc_fixtures():
    for S in catalog_spacetimes(2):
        Mh = catalog.slice_graph(S, 2.0)
        r = lemma1_margin(Mh, (0.2, 0.3))
        assert r.asserted and r.lhs == 0 and r.margin == 0
    for x in box_points(HYP.box, 20, seed=3):
        r = lemma1_margin(HYP, x)
        assert r.asserted and r.passed
        assert r.rhs == 0.0 and r.lhs >= -1e-8


def test_laps_hyperboloid_matches_closed_form_sinh2():
    # sinh^2 phi = |x|^2 on the unit hyperboloid over flat coordinates
    x = (0.4, -0.1)
    p = frame_at(HYP, x)
    assert p.sinh2_phi == pytest.approx(x[0] ** 2 + x[1] ** 2, rel=1e-12)


def test_laps_informational_off_cmc():
    Mh = graph("0.7 + 0.1*x1^2", SS)
    r = lemma1_margin(Mh, (0.3, 0.1))
    assert not r.asserted
    assert "informational" in r.note
    assert r.extra["adjusted_margin"] >= -1e-9


def test_bridge():
    assert sinh_identity_bridge(catalog.slice_graph(RAD, 1.0), (0.0, 0.1)).residual == 0
    for x in box_points(HYP.box, 10, seed=4):
        assert sinh_identity_bridge(HYP, x).relative_residual < 1e-6
    Mh = graph("1 + 0.2*x1^2 - 0.15*x1*x2 + 0.1*x2", RAD)
    for x in box_points(Mh.box, 10, seed=5):
        assert sinh_identity_bridge(Mh, x).relative_residual < 1e-6


@pytest.mark.parametrize("name", sorted(CHECKS))
def test_every_check_passes_on_fixtures(name):
    for S in catalog_spacetimes(2):
        for Mh in catalog.fixture_hypersurfaces(S):
            for x in box_points(Mh.box, 3, seed=9):
                r = run_check(name, Mh, x)
                assert isinstance(r, IdentityReport)
                assert math.isfinite(r.residual)
                if r.asserted and name != "ncc":
                    assert r.passed, (name, Mh.name, x, r)


def test_tolerance_override_is_respected():
    r = run_check("clap1", catalog.random_cubic_graph(SS, 0), (0.1, 0.1), tol=0.0)
    assert r.tol == 0.0 and not r.passed or r.residual == 0
