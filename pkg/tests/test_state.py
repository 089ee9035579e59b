import numpy as np
import pytest

import stratwave as sw
from stratwave.errors import TraceError
from stratwave.state import constraint_integrals

from conftest import lam1_state, unit_perturbation


def test_physical_params_validation():
    with pytest.raises(ValueError):
        sw.PhysicalParams(g=-1.0)
    with pytest.raises(ValueError):
        sw.PhysicalParams(g=1.0, d=0.0)


def test_assemble_state_rejects_bad_traces(lam1_state_64):
    st = lam1_state_64
    bad = st.psi1.copy()
    bad[:, 0] += 1e-3
    with pytest.raises(TraceError):
        sw.assemble_state(bad, st.psi2, st.domain, (st.grid1, st.grid2),
                          st.p1, st.p2, st.params)


def test_stagnation_flag(lam1_state_64):
    st = lam1_state_64
    assert st.stagnant == (False, False)
    # a symmetric field has psi_y of both signs in layer 2
    even = -np.abs(st.grid2.y - 0.25)
    even -= even[:, 0][:, None]          # zero on the interface
    even += st.p2 * 0.0
    stagnant = sw.assemble_state(st.psi1, even, st.domain,
                                 (st.grid1, st.grid2), st.p1, 0.0,
                                 st.params, check_traces=False)
    assert stagnant.stagnant[1] is True


def test_perturbation_algebra(lam1_state_64):
    a = sw.random_admissible(1, lam1_state_64)
    b = sw.random_admissible(2, lam1_state_64)
    c = 2.0 * a + b - a
    assert np.allclose(c.psi1p, a.psi1p + b.psi1p)
    x = np.linspace(-np.pi, np.pi, 7)
    assert np.allclose(c.eta_p.value(x),
                       a.eta_p.value(x) + b.eta_p.value(x))
    z = sw.Perturbation.zero(lam1_state_64)
    assert not z.has_surface_part()
    assert a.has_surface_part()


def test_projection_enforces_constraints(lam1_state_64):
    st = lam1_state_64
    rng = np.random.default_rng(7)
    raw = sw.Perturbation(rng.standard_normal(st.psi1.shape),
                          rng.standard_normal(st.psi2.shape),
                          sw.SurfaceCurve(), sw.SurfaceCurve())
    proj = sw.project_admissible(raw, st)
    cb, cs = constraint_integrals(proj, st)
    assert abs(cb) < 1e-11 and abs(cs) < 1e-11
    again = sw.project_admissible(proj, st)
    assert np.max(np.abs(again.psi1p - proj.psi1p)) < 1e-12
    assert np.max(np.abs(again.psi2p - proj.psi2p)) < 1e-12


@pytest.mark.parametrize("seed", [0, 3, 11])
def test_random_admissible_is_admissible_and_seeded(seed, lam1_state_64):
    p = sw.random_admissible(seed, lam1_state_64)
    cb, cs = constraint_integrals(p, lam1_state_64)
    assert abs(cb) < 1e-10 and abs(cs) < 1e-10
    q = sw.random_admissible(seed, lam1_state_64)
    assert np.array_equal(p.psi1p, q.psi1p)
    assert p.eta_p == q.eta_p


def test_random_admissible_resolution_independent(lam1):
    _, _, flow = lam1
    coarse = lam1_state(flow, nx=32, ns=17)
    fine = lam1_state(flow, nx=64, ns=33)
    pc = sw.random_admissible(5, coarse)
    pf = sw.random_admissible(5, fine)
    # the coarse grid samples the same continuous field (projection terms
    # differ only at quadrature accuracy)
    assert np.max(np.abs(pf.psi2p[::2, ::2] - pc.psi2p)) < 1e-3
    assert pc.eta_tilde_p == pf.eta_tilde_p


def test_random_admissible_flags(lam1_state_64):
    with pytest.raises(ValueError):
        sw.random_admissible(0, lam1_state_64, modes=0)
    p = sw.random_admissible(0, lam1_state_64, include_surfaces=False)
    assert not p.has_surface_part()
    zt = sw.random_admissible(0, lam1_state_64, zero_trace=True)
    assert np.max(np.abs(zt.psi2p[:, 0])) < 1e-12
    assert np.max(np.abs(zt.psi2p[:, -1])) < 1e-12


def test_perturbation_norm_scaling(lam1_state_64):
    p = sw.random_admissible(4, lam1_state_64)
    n = sw.perturbation_norm(p, lam1_state_64)
    assert n > 0
    assert sw.perturbation_norm(2.5 * p, lam1_state_64) == \
        pytest.approx(2.5 * n, rel=1e-13)
    u = unit_perturbation(4, lam1_state_64)
    assert sw.perturbation_norm(u, lam1_state_64) == pytest.approx(1.0)


def test_state_json_roundtrip_bit_exact(lam1_state_64):
    st = lam1_state_64
    text = sw.state_to_json(st)
    back = sw.state_from_json(text)
    assert np.array_equal(back.psi1, st.psi1)
    assert np.array_equal(back.psi2, st.psi2)
    assert back.p1 == st.p1 and back.p2 == st.p2
    assert back.params == st.params
    assert sw.state_to_json(back) == text
