import numpy as np
import pytest

import stratwave as sw

SINH1 = float(np.sinh(1.0))
SINH_HALF = float(np.sinh(0.5))


def lam1_profiles():
    """Constant densities 2/1 with linear vorticity beta(q) = -q."""
    rho1 = sw.ScalarProfile.constant(2.0)
    rho2 = sw.ScalarProfile.constant(1.0)
    beta = sw.ScalarProfile.linear(0.0, -1.0)
    return (sw.LayerProfiles(1, rho1, beta),
            sw.LayerProfiles(2, rho2, beta))


@pytest.fixture(scope="session")
def lam1():
    """Exact laminar benchmark: psi_i(y) = -sinh y on both layers."""
    profiles1, profiles2 = lam1_profiles()
    flow = sw.solve_laminar(profiles1, profiles2, g=1.0, d=1.0,
                            h_tilde=0.0, h=0.5,
                            p1=-SINH1, p2=SINH_HALF)
    return profiles1, profiles2, flow


@pytest.fixture(scope="session")
def lam1_maps(lam1):
    profiles1, profiles2, flow = lam1
    maps = sw.build_bernoulli_map(profiles1, profiles2, 1.0, flow.p2,
                                  y_range=(-1.1, 0.6),
                                  p_window1=(-3.0, 3.0),
                                  p_window2=(-3.0, 3.0))
    grefs = sw.default_gravity_refs(profiles1, profiles2, flow.p1, flow.p2)
    return maps, grefs


def lam1_state(flow, nx=64, ns=33):
    grids = sw.build_grids(sw.flat_domain(flow), nx, ns, ns)
    return sw.lift_to_state(flow, grids)


@pytest.fixture(scope="session")
def lam1_state_64(lam1):
    _, _, flow = lam1
    return lam1_state(flow)


@pytest.fixture(scope="session")
def cubic_manufactured():
    """Manufactured exact flow psi(y) = -y - 0.1 y^3 with a stratified
    upper layer; padded so maps stay valid on mildly curved domains."""
    def psi(y):
        return -y - 0.1 * y ** 3

    rho1 = sw.ScalarProfile.constant(1.0)
    rho2 = sw.ScalarProfile.linear(1.0, 0.1)
    profiles, flow = sw.manufacture_from_streamfunction(
        psi, psi, rho1, rho2, g=1.0, d=1.0, h_tilde=0.0, h=0.5, pad=0.25)
    return profiles, flow


@pytest.fixture(scope="session")
def curved_state(cubic_manufactured):
    """The cubic manufactured flow transplanted onto a domain whose
    interface is curved with amplitude 0.05 (not a PDE solution)."""
    (profiles1, profiles2), flow = cubic_manufactured
    flat = lam1_state(flow)
    zero = sw.Perturbation.zero(flat)
    bump = sw.Perturbation(zero.psi1p, zero.psi2p,
                           sw.SurfaceCurve(0.0, (0.05,), ()),
                           sw.SurfaceCurve())
    state = sw.perturbed_state(flat, bump, 1.0)
    maps = sw.build_bernoulli_map(profiles1, profiles2, 1.0, flow.p2,
                                  y_range=(-1.1, 0.6))
    grefs = sw.default_gravity_refs(profiles1, profiles2, flow.p1, flow.p2)
    return state, maps, grefs, (profiles1, profiles2)


def unit_perturbation(seed, state, **kwargs):
    pert = sw.random_admissible(seed, state, **kwargs)
    return pert * (1.0 / sw.perturbation_norm(pert, state))


def fit_order(hs, errs):
    """Least-squares slope of log(err) against log(h)."""
    return float(np.polyfit(np.log(np.asarray(hs, dtype=float)),
                            np.log(np.asarray(errs, dtype=float)), 1)[0])
