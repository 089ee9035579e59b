import numpy as np
import pytest
from scipy.integrate import quad

import stratwave as sw
from stratwave.errors import AdmissibilityError

from conftest import SINH_HALF, lam1_state, unit_perturbation


def test_energy_is_linear_in_bernoulli_constants(lam1, lam1_maps):
    _, _, flow = lam1
    maps, grefs = lam1_maps
    st = lam1_state(flow, nx=32, ns=17)
    h0 = sw.eval_H(st, maps, grefs)

    def with_q(dq1, dq2):
        params = sw.PhysicalParams(g=st.params.g, c=st.params.c,
                                   d=st.params.d, P_atm=st.params.P_atm,
                                   Q1=st.params.Q1 + dq1,
                                   Q2=st.params.Q2 + dq2)
        return sw.assemble_state(st.psi1, st.psi2, st.domain,
                                 (st.grid1, st.grid2), st.p1, st.p2, params)

    # -(Q1+Q2) over area(layer1) = 2*pi and -Q2 over area(layer2) = pi
    assert sw.eval_H(with_q(1.0, 0.0), maps, grefs) - h0 == \
        pytest.approx(-2 * np.pi, abs=1e-10)
    assert sw.eval_H(with_q(0.0, 1.0), maps, grefs) - h0 == \
        pytest.approx(-3 * np.pi, abs=1e-10)


def test_energy_matches_independent_quadrature(lam1, lam1_maps):
    # on the flat benchmark the integrand depends only on y, so the energy
    # reduces to one-dimensional integrals computed here from scratch
    _, _, flow = lam1
    maps, grefs = lam1_maps
    st = lam1_state(flow, nx=8, ns=1025)
    q1, q2 = st.params.Q1, st.params.Q2

    def f1(y):
        # the exact interior vorticity is lap psi = -sinh y
        return float(np.asarray(maps[0].F(np.asarray(y),
                                          np.asarray(-np.sinh(y)))))

    def f2(y):
        # closed form for the upper layer: (p2^2 - m^2)/2 at m = -sinh y
        return (SINH_HALF ** 2 - np.sinh(y) ** 2) / 2.0

    oracle = 2 * np.pi * (
        quad(lambda y: np.cosh(y) ** 2 / 2 + 2.0 * (y + 1.0)
             - (q1 + q2) - f1(y), -1.0, 0.0, epsabs=1e-13)[0]
        + quad(lambda y: np.cosh(y) ** 2 / 2 + 1.0 * (y + 1.0)
               - q2 - f2(y), 0.0, 0.5, epsabs=1e-13)[0])
    got = sw.eval_H(st, maps, grefs)
    assert got == pytest.approx(oracle, rel=1e-6)


def test_first_variation_vanishes_at_solution(lam1_state_64, lam1_maps):
    maps, grefs = lam1_maps
    for seed in (0, 1, 2):
        u = unit_perturbation(seed, lam1_state_64)
        fv = sw.first_variation(lam1_state_64, maps, grefs, u)
        # the gradient floor is set by the grid truncation error here
        assert abs(fv.total) < 0.05


def test_first_variation_is_linear(lam1_state_64, lam1_maps):
    maps, grefs = lam1_maps
    a = sw.random_admissible(10, lam1_state_64)
    b = sw.random_admissible(11, lam1_state_64)
    fa = sw.first_variation(lam1_state_64, maps, grefs, a).total
    fb = sw.first_variation(lam1_state_64, maps, grefs, b).total
    fab = sw.first_variation(lam1_state_64, maps, grefs,
                             2.0 * a + b).total
    assert fab == pytest.approx(2.0 * fa + fb, abs=1e-10)
    z = sw.Perturbation.zero(lam1_state_64)
    assert sw.first_variation(lam1_state_64, maps, grefs, z).total == 0.0


def test_first_variation_rejects_inadmissible(lam1_state_64, lam1_maps):
    maps, grefs = lam1_maps
    st = lam1_state_64
    bad = sw.Perturbation(st.grid1.y + st.params.d, st.grid2.zeros(),
                          sw.SurfaceCurve(), sw.SurfaceCurve())
    with pytest.raises(AdmissibilityError):
        sw.first_variation(st, maps, grefs, bad)


def test_fd_matches_analytic_in_interior_directions(curved_state):
    state, maps, grefs, _ = curved_state
    u = unit_perturbation(3, state, include_surfaces=False)
    analytic = sw.first_variation(state, maps, grefs, u).total
    errs = []
    eps_list = (1e-3, 5e-4, 2.5e-4)
    for eps in eps_list:
        errs.append(abs(sw.fd_first_variation(state, maps, grefs, u, eps)
                        - analytic))
    assert errs[0] / abs(analytic) < 1e-4
    # central differences converge at second order in eps
    slope = np.polyfit(np.log(eps_list), np.log(errs), 1)[0]
    assert 1.8 <= slope <= 2.3


def test_fd_first_variation_rejects_bad_eps(lam1_state_64, lam1_maps):
    maps, grefs = lam1_maps
    u = unit_perturbation(0, lam1_state_64)
    with pytest.raises(ValueError):
        sw.fd_first_variation(lam1_state_64, maps, grefs, u, 0.0)


def test_residual_zero_on_exact_zero_state(lam1_state_64):
    # psi = 0 with rho constant, beta(0) = 0 solves the interior equation
    st = lam1_state_64
    rho = sw.ScalarProfile.constant(1.0)
    beta = sw.ScalarProfile.linear(0.0, -1.0)
    profs = (sw.LayerProfiles(1, rho, beta), sw.LayerProfiles(2, rho, beta))
    zero = sw.assemble_state(st.grid1.zeros(), st.grid2.zeros(), st.domain,
                             (st.grid1, st.grid2), 0.0, 0.0,
                             sw.PhysicalParams(g=1.0, Q1=0.0, Q2=1.5),
                             check_traces=False)
    rep = sw.pde_residual(zero, *profs)
    assert np.max(np.abs(rep.interior_res_1)) == 0.0
    assert np.max(np.abs(rep.interior_res_2)) == 0.0
    assert rep.worst() == 0.0


def test_residual_detects_shifted_bernoulli_constant(lam1, lam1_state_64):
    profiles1, profiles2, _ = lam1
    st = lam1_state_64
    params = sw.PhysicalParams(g=1.0, d=1.0, Q1=st.params.Q1,
                               Q2=st.params.Q2 + 0.1)
    shifted = sw.assemble_state(st.psi1, st.psi2, st.domain,
                                (st.grid1, st.grid2), st.p1, st.p2, params)
    rep = sw.pde_residual(shifted, profiles1, profiles2)
    # shift shows up on top of the small discretization residual
    assert np.allclose(rep.surface_bernoulli_res, -0.1, atol=1e-3)
    assert rep.worst() == pytest.approx(0.1, rel=1e-2)


def test_audit_confirms_equivalence_on_benchmark(lam1, lam1_state_64,
                                                 lam1_maps):
    profiles1, profiles2, _ = lam1
    maps, grefs = lam1_maps
    rep = sw.audit_criticality(lam1_state_64, maps, grefs,
                               (profiles1, profiles2), n_trials=4,
                               tol_grad=0.05, tol_res=1e-3)
    assert rep.critical and rep.solution
    assert rep.implications["equivalence_observed"]
    assert len(rep.trials) == 4
    assert all(t["pert_norm"] == 1.0 for t in rep.trials)


def test_audit_rejects_corrupted_state(lam1, lam1_state_64, lam1_maps):
    profiles1, profiles2, _ = lam1
    maps, grefs = lam1_maps
    st = lam1_state_64
    s = st.grid2.sigma[None, :]
    bump = 0.1 * np.sin(st.grid2.x)[:, None] * s * (1.0 - s)
    corrupted = sw.assemble_state(st.psi1, st.psi2 + bump, st.domain,
                                  (st.grid1, st.grid2), st.p1, st.p2,
                                  st.params)
    rep = sw.audit_criticality(corrupted, maps, grefs,
                               (profiles1, profiles2), n_trials=4,
                               tol_grad=0.05, tol_res=1e-3)
    assert not rep.critical and not rep.solution
    assert rep.implications["equivalence_observed"]


def test_audit_requires_trials(lam1, lam1_state_64, lam1_maps):
    profiles1, profiles2, _ = lam1
    maps, grefs = lam1_maps
    with pytest.raises(ValueError):
        sw.audit_criticality(lam1_state_64, maps, grefs,
                             (profiles1, profiles2), n_trials=0)
