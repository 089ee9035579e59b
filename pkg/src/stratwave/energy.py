"""The energy functional H, its four-part first variation, PDE residuals of
the governing system, and the numerical criticality audit.

H(Psi1, Psi2, eta, eta_tilde) =
    int_{Omega1} [ |grad Psi1|^2/2 + g*rho_ref1*(y+d) - (Q1+Q2) - F1(y, lap Psi1) ]
  + int_{Omega2} [ |grad Psi2|^2/2 + g*rho_ref2*(y+d) - Q2      - F2(y, lap Psi2) ].

The gravity reference densities are explicit parameters because the source
formulation spells them three different ways; the finite-difference gradient
audit is the arbiter of the consistent choice.

The interior part of the first variation is evaluated in the gradient form

    sum_i int [ grad Psi_i . grad Psi_ip - dF_i/dm (y, lap Psi_i) lap Psi_ip ]

minus the boundary part dH3, so that dH1 + dH3 is the *exact* derivative of
the discrete H in fixed-surface directions (the integrated-by-parts spelling
agrees with it only up to discrete integration-by-parts error).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from .errors import AdmissibilityError
from .geometry import BOTTOM, INTERFACE, SURFACE
from .state import (FlowState, Perturbation, assemble_state,
                    constraint_integrals, perturbation_norm,
                    random_admissible)


def default_gravity_refs(profiles1, profiles2, p1, p2):
    """Default constant gravity coefficients (rho1(p1), rho2(p2))."""
    return float(profiles1.rho(p1)), float(profiles2.rho(p2))


def eval_H(state: FlowState, maps, gravity_refs) -> float:
    """Evaluate the energy functional on the discrete state."""
    map1, map2 = maps
    rho_ref1, rho_ref2 = gravity_refs
    g = state.params.g
    d = state.params.d
    q1, q2 = state.params.Q1, state.params.Q2

    g1, g2 = state.grid1, state.grid2
    px1, py1 = geo.mapped_gradient(g1, state.psi1)
    lap1 = geo.mapped_laplacian(g1, state.psi1)
    f1 = np.asarray(map1.F(g1.y, lap1))
    integrand1 = ((px1 ** 2 + py1 ** 2) / 2.0 + g * rho_ref1 * (g1.y + d)
                  - (q1 + q2) - f1)

    px2, py2 = geo.mapped_gradient(g2, state.psi2)
    lap2 = geo.mapped_laplacian(g2, state.psi2)
    f2 = np.asarray(map2.F(g2.y, lap2))
    integrand2 = ((px2 ** 2 + py2 ** 2) / 2.0 + g * rho_ref2 * (g2.y + d)
                  - q2 - f2)

    return geo.area_integral(g1, integrand1) + geo.area_integral(g2, integrand2)


@dataclass(frozen=True)
class VariationBreakdown:
    dH1: float
    dH2: float
    dH3: float
    dH4: float

    @property
    def total(self):
        # fixed summation order for bitwise reproducibility
        return self.dH1 + self.dH2 + self.dH3 + self.dH4

    def as_dict(self):
        return {"dH1": self.dH1, "dH2": self.dH2, "dH3": self.dH3,
                "dH4": self.dH4, "total": self.total}


def _check_admissible(state, pert, constraint_tol):
    cb, cs = constraint_integrals(pert, state)
    if constraint_tol is None:
        constraint_tol = max(1e-10 * perturbation_norm(pert, state), 1e-13)
    if abs(cb) > constraint_tol or abs(cs) > constraint_tol:
        raise AdmissibilityError(
            f"perturbation outside the admissible space: bottom {cb:.3e}, "
            f"surface {cs:.3e} (tol {constraint_tol:.3e})")


def first_variation(state: FlowState, maps, gravity_refs,
                    pert: Perturbation,
                    constraint_tol=None) -> VariationBreakdown:
    """Four-part first variation along an admissible perturbation."""
    _check_admissible(state, pert, constraint_tol)
    map1, map2 = maps
    rho_ref2 = gravity_refs[1]
    g = state.params.g
    d = state.params.d
    g1, g2 = state.grid1, state.grid2

    px1, py1 = geo.mapped_gradient(g1, state.psi1)
    px2, py2 = geo.mapped_gradient(g2, state.psi2)
    lap1 = geo.mapped_laplacian(g1, state.psi1)
    lap2 = geo.mapped_laplacian(g2, state.psi2)
    dF1 = np.asarray(map1.dF_dm(g1.y, lap1))
    dF2 = np.asarray(map2.dF_dm(g2.y, lap2))

    qx1, qy1 = geo.mapped_gradient(g1, pert.psi1p)
    qx2, qy2 = geo.mapped_gradient(g2, pert.psi2p)
    lap1p = geo.mapped_laplacian(g1, pert.psi1p)
    lap2p = geo.mapped_laplacian(g2, pert.psi2p)

    # boundary flux part (surface, then interface from each side, then bottom)
    dn2_S = geo.boundary_normal_derivative(g2, pert.psi2p, SURFACE)
    dn1_St_2 = geo.boundary_normal_derivative(g2, pert.psi2p, INTERFACE)
    dn1_St_1 = geo.boundary_normal_derivative(g1, pert.psi1p, INTERFACE)
    dy_B = geo.boundary_normal_derivative(g1, pert.psi1p, BOTTOM)
    dH3 = (geo.line_integral(g2, state.psi2[:, -1] * dn2_S, SURFACE, "dl")
           - geo.line_integral(g2, state.psi2[:, 0] * dn1_St_2, INTERFACE, "dl")
           + geo.line_integral(g1, state.psi1[:, -1] * dn1_St_1, INTERFACE, "dl")
           - geo.line_integral(g1, state.psi1[:, 0] * dy_B, BOTTOM, "dx"))

    interior = (geo.area_integral(g1, px1 * qx1 + py1 * qy1 - dF1 * lap1p)
                + geo.area_integral(g2, px2 * qx2 + py2 * qy2 - dF2 * lap2p))
    dH1 = interior - dH3

    # surface term (measure dx, as printed)
    bern_S = ((px2[:, -1] ** 2 + py2[:, -1] ** 2) / 2.0
              + g * rho_ref2 * (g2.y[:, -1] + d) - state.params.Q2
              - np.asarray(map2.F(g2.y[:, -1], lap2[:, -1])))
    dH2 = geo.line_integral(g2, bern_S * pert.eta_p.value(g2.x), SURFACE, "dx")

    # interface term (measure dx, as printed)
    rho_jump = float(map1.profiles.rho(0.0) - map2.profiles.rho(0.0))
    y_if = g2.y[:, 0]
    bern_St = ((px1[:, -1] ** 2 + py1[:, -1] ** 2
                - px2[:, 0] ** 2 - py2[:, 0] ** 2) / 2.0
               + g * rho_jump * (y_if + d)
               - np.asarray(map1.F(g1.y[:, -1], lap1[:, -1]))
               + np.asarray(map2.F(g2.y[:, 0], lap2[:, 0]))
               - state.params.Q1)
    dH4 = geo.line_integral(
        g2, bern_St * pert.eta_tilde_p.value(g2.x), INTERFACE, "dx")

    return VariationBreakdown(dH1=dH1, dH2=dH2, dH3=dH3, dH4=dH4)


def perturbed_state(state: FlowState, pert: Perturbation,
                    eps: float) -> FlowState:
    """State + eps*pert: surfaces shifted, grids rebuilt, fields transplanted
    at fixed (x, sigma) nodes."""
    eta_tilde = state.domain.eta_tilde + pert.eta_tilde_p * eps
    eta = state.domain.eta + pert.eta_p * eps
    domain = geo.build_domain(state.params.d, eta_tilde, eta)
    grids = geo.build_grids(domain, state.grid1.nx, state.grid1.ns,
                            state.grid2.ns, state.grid1.x_deriv)
    return assemble_state(state.psi1 + eps * pert.psi1p,
                          state.psi2 + eps * pert.psi2p,
                          domain, grids, state.p1, state.p2, state.params,
                          check_traces=False)


def fd_first_variation(state: FlowState, maps, gravity_refs,
                       pert: Perturbation, eps: float) -> float:
    """Central finite difference of H along the perturbation."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    h_plus = eval_H(perturbed_state(state, pert, eps), maps, gravity_refs)
    h_minus = eval_H(perturbed_state(state, pert, -eps), maps, gravity_refs)
    return (h_plus - h_minus) / (2.0 * eps)


@dataclass
class ResidualReport:
    interior_res_1: np.ndarray
    interior_res_2: np.ndarray
    surface_bernoulli_res: np.ndarray
    interface_bernoulli_res: np.ndarray
    interior_max: tuple = (0.0, 0.0)
    interior_l2: tuple = (0.0, 0.0)
    dirichlet_res: dict = field(default_factory=dict)

    def worst(self) -> float:
        return max(self.interior_max[0], self.interior_max[1],
                   float(np.max(np.abs(self.surface_bernoulli_res))),
                   float(np.max(np.abs(self.interface_bernoulli_res))),
                   *self.dirichlet_res.values())

    def summary(self) -> dict:
        return {
            "interior_max_1": self.interior_max[0],
            "interior_max_2": self.interior_max[1],
            "interior_l2_1": self.interior_l2[0],
            "interior_l2_2": self.interior_l2[1],
            "surface_bernoulli_max": float(np.max(np.abs(self.surface_bernoulli_res))),
            "interface_bernoulli_max": float(np.max(np.abs(self.interface_bernoulli_res))),
            "dirichlet": dict(self.dirichlet_res),
            "worst": self.worst(),
        }


def pde_residual(state: FlowState, profiles1, profiles2) -> ResidualReport:
    """Residuals of the full governing system on the discrete state."""
    g = state.params.g
    d = state.params.d
    res = []
    maxes = []
    l2s = []
    for grid, psi, prof in ((state.grid1, state.psi1, profiles1),
                            (state.grid2, state.psi2, profiles2)):
        lap = geo.mapped_laplacian(grid, psi)
        r = lap - g * grid.y * prof.rho.d1(-psi) + prof.beta(psi)
        res.append(r)
        maxes.append(float(np.max(np.abs(r[:, 1:-1]))))
        masked = r.copy()
        masked[:, 0] = 0.0
        masked[:, -1] = 0.0
        l2s.append(float(np.sqrt(geo.area_integral(grid, masked ** 2))))
    g1, g2 = state.grid1, state.grid2

    px2, py2 = geo.mapped_gradient(g2, state.psi2)
    surf = ((px2[:, -1] ** 2 + py2[:, -1] ** 2) / 2.0
            + g * profiles2.rho(-state.psi2[:, -1]) * (g2.y[:, -1] + d)
            - state.params.Q2)

    px1, py1 = geo.mapped_gradient(g1, state.psi1)
    rho_jump = profiles1.rho(-state.psi1[:, -1]) - profiles2.rho(-state.psi2[:, 0])
    interface = ((px1[:, -1] ** 2 + py1[:, -1] ** 2
                  - px2[:, 0] ** 2 - py2[:, 0] ** 2) / 2.0
                 + g * rho_jump * (g2.y[:, 0] + d) - state.params.Q1)

    dirichlet = {
        "psi_on_interface": float(max(np.max(np.abs(state.psi1[:, -1])),
                                      np.max(np.abs(state.psi2[:, 0])))),
        "psi1_on_bottom": float(np.max(np.abs(state.psi1[:, 0] + state.p1))),
        "psi2_on_surface": float(np.max(np.abs(state.psi2[:, -1] + state.p2))),
    }
    return ResidualReport(res[0], res[1], surf, interface,
                          interior_max=tuple(maxes), interior_l2=tuple(l2s),
                          dirichlet_res=dirichlet)


@dataclass
class AuditReport:
    trials: list
    max_normalized_grad: float
    residual_summary: dict
    tol_grad: float
    tol_res: float
    critical: bool
    solution: bool

    @property
    def implications(self) -> dict:
        """Both directions of the criticality <-> solution equivalence."""
        return {
            "critical_implies_solution": (not self.critical) or self.solution,
            "solution_implies_critical": (not self.solution) or self.critical,
            "equivalence_observed": self.critical == self.solution,
        }

    def to_dict(self) -> dict:
        return {
            "trials": self.trials,
            "max_normalized_grad": self.max_normalized_grad,
            "residuals": self.residual_summary,
            "tol_grad": self.tol_grad,
            "tol_res": self.tol_res,
            "critical": self.critical,
            "solution": self.solution,
            "implications": self.implications,
        }


def audit_criticality(state: FlowState, maps, gravity_refs, profiles,
                      n_trials: int = 10, seed: int = 1,
                      tol_grad: float = 1e-3, tol_res: float = 1e-3,
                      modes: int = 3) -> AuditReport:
    """Numerical audit of the criticality <-> solution equivalence.

    Probes |dH| over random admissible unit-norm perturbations and compares
    the worst PDE residual against its tolerance.  Verdicts are data, not
    errors: a state may be neither critical nor a solution.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    profiles1, profiles2 = profiles
    trials = []
    worst_grad = 0.0
    for t in range(n_trials):
        trial_seed = seed + t
        pert = random_admissible(trial_seed, state, modes=modes)
        norm = perturbation_norm(pert, state)
        pert = pert * (1.0 / norm)
        fv = first_variation(state, maps, gravity_refs, pert)
        normalized = abs(fv.total)
        worst_grad = max(worst_grad, normalized)
        trials.append({"seed": trial_seed, "pert_norm": 1.0,
                       **fv.as_dict(), "normalized": normalized})
    report = pde_residual(state, profiles1, profiles2)
    critical = worst_grad <= tol_grad
    solution = report.worst() <= tol_res
    return AuditReport(trials=trials, max_normalized_grad=worst_grad,
                       residual_summary=report.summary(),
                       tol_grad=tol_grad, tol_res=tol_res,
                       critical=critical, solution=solution)
