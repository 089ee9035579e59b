"""Second variation of the energy functional as a bilinear form, its
finite-dimensional Hessian restriction, spectral diagnostics and the
linear-stability verdict.

The bilinear form is evaluated from the printed term list of the second
variation at a critical point and then polarized, i.e. the returned value is
(T(a, b) + T(b, a))/2 where T is the literal term list with ``a`` in the
barred slots.  The polarization is the canonical symmetric bilinear form of
the quadratic form and agrees with it on the diagonal.

Two typo-resolution switches are kept until the finite-difference audit
adjudicates them: the undefined boundary of the lone coupling integral
(placed on the interface by position) and the normal used for the layer-2
normal derivative on the interface (``n1`` by default, which makes the two
interface coupling integrals cancel and reproduces the exact discrete Hessian
for fixed-surface directions).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import geometry as geo
from .energy import eval_H, pde_residual, perturbed_state
from .errors import DimensionCapError, RankDeficientError
from .geometry import BOTTOM, INTERFACE, SURFACE, SurfaceCurve
from .state import (FlowState, Perturbation, perturbation_norm,
                    project_admissible)

HESSIAN_DIM_CAP = 2000


class _BaseCache:
    """State-dependent quantities shared by every bilinear-form evaluation."""

    def __init__(self, state: FlowState, maps, gravity_refs):
        map1, map2 = maps
        self.state = state
        self.gravity_refs = gravity_refs
        g1, g2 = state.grid1, state.grid2
        g = state.params.g

        self.px1, self.py1 = geo.mapped_gradient(g1, state.psi1)
        self.px2, self.py2 = geo.mapped_gradient(g2, state.psi2)
        self.om1 = geo.mapped_laplacian(g1, state.psi1)
        self.om2 = geo.mapped_laplacian(g2, state.psi2)
        self.d22F1 = np.asarray(map1.d2F_dm2(g1.y, self.om1))
        self.d22F2 = np.asarray(map2.d2F_dm2(g2.y, self.om2))

        # traces on the surface S (layer 2, sigma = 1)
        y_S = g2.y[:, -1]
        self.psi2y_S = self.py2[:, -1]
        ke2 = (self.px2 ** 2 + self.py2 ** 2) / 2.0
        self.ke2y_S = geo.mapped_gradient(g2, ke2)[1][:, -1]
        self.dF2_S = np.asarray(map2.dF_dm(y_S, self.om2[:, -1]))
        self.d1F2_S = np.asarray(map2.dF_dy(y_S, self.om2[:, -1]))
        self.om2y_S = geo.mapped_gradient(g2, self.om2)[1][:, -1]

        # traces on the interface S_tilde (layer 1 sigma = 1, layer 2 sigma = 0)
        y_St = g2.y[:, 0]
        self.psi1y_St = self.py1[:, -1]
        self.psi2y_St = self.py2[:, 0]
        self.dF1_St = np.asarray(map1.dF_dm(g1.y[:, -1], self.om1[:, -1]))
        self.dF2_St = np.asarray(map2.dF_dm(y_St, self.om2[:, 0]))
        self.d1F1_St = np.asarray(map1.dF_dy(g1.y[:, -1], self.om1[:, -1]))
        self.d1F2_St = np.asarray(map2.dF_dy(y_St, self.om2[:, 0]))
        self.om1y_St = geo.mapped_gradient(g1, self.om1)[1][:, -1]
        self.om2y_St = geo.mapped_gradient(g2, self.om2)[1][:, 0]

        self.rho_jump = float(map1.profiles.rho(0.0) - map2.profiles.rho(0.0))
        self.g = g

        # quadrature weights (dl and dx) on S and S_tilde, and n2 direction
        # components at the interface for the alternate typo reading
        etap = state.domain.eta.derivative(g2.x)
        etatp = state.domain.eta_tilde.derivative(g2.x)
        self.arc_S = np.sqrt(1.0 + etap ** 2)
        self.arc_St = np.sqrt(1.0 + etatp ** 2)
        self.n2_at_St = (-etap / self.arc_S, 1.0 / self.arc_S)
        self.dx = g2.dx


class _PertCache:
    """Per-perturbation derivatives and traces against a fixed base state."""

    def __init__(self, state: FlowState, pert: Perturbation):
        g1, g2 = state.grid1, state.grid2
        self.pert = pert
        self.gx1, self.gy1 = geo.mapped_gradient(g1, pert.psi1p)
        self.gx2, self.gy2 = geo.mapped_gradient(g2, pert.psi2p)
        self.lap1 = geo.mapped_laplacian(g1, pert.psi1p)
        self.lap2 = geo.mapped_laplacian(g2, pert.psi2p)
        self.dn2_S = geo.boundary_normal_derivative(g2, pert.psi2p, SURFACE)
        self.dn1_St_2 = geo.boundary_normal_derivative(g2, pert.psi2p, INTERFACE)
        self.dn1_St_1 = geo.boundary_normal_derivative(g1, pert.psi1p, INTERFACE)
        self.val2_St = pert.psi2p[:, 0].copy()
        self.lap1_St = self.lap1[:, -1]
        self.lap2_St = self.lap2[:, 0]
        self.lap2_S = self.lap2[:, -1]
        self.eta_p = pert.eta_p.value(g2.x)
        self.eta_tilde_p = pert.eta_tilde_p.value(g2.x)
        # layer-2 derivative at the interface along the *surface* normal
        # direction (alternate reading of the printed term)
        self.dn2dir_St = None  # filled lazily from the base cache


def _dn2dir_at_interface(base: _BaseCache, cache: _PertCache):
    if cache.dn2dir_St is None:
        nxc, nyc = base.n2_at_St
        cache.dn2dir_St = nxc * cache.gx2[:, 0] + nyc * cache.gy2[:, 0]
    return cache.dn2dir_St


def _terms_one_sided(base: _BaseCache, a: _PertCache, b: _PertCache,
                     tilde_normal_layer2: str) -> dict:
    """The printed term list with `a` in the barred slots."""
    st = base.state
    g1, g2 = st.grid1, st.grid2
    dx = base.dx

    terms = {}
    terms["interior_grad"] = (
        geo.area_integral(g1, a.gx1 * b.gx1 + a.gy1 * b.gy1)
        + geo.area_integral(g2, a.gx2 * b.gx2 + a.gy2 * b.gy2))
    terms["interior_vorticity"] = (
        -geo.area_integral(g1, base.d22F1 * a.lap1 * b.lap1)
        - geo.area_integral(g2, base.d22F2 * a.lap2 * b.lap2))

    if tilde_normal_layer2 == "n1":
        b_dn_St = b.dn1_St_2
    elif tilde_normal_layer2 == "n2":
        b_dn_St = _dn2dir_at_interface(base, b)
    else:
        raise ValueError(f"unknown normal option {tilde_normal_layer2!r}")

    # coupling integrals on S_tilde between the layer-2 trace and its normal
    # derivative; with the n1 reading these cancel exactly
    terms["interface_trace_coupling"] = float(
        np.sum((a.val2_St * b.dn1_St_2 - a.val2_St * b_dn_St)
               * base.arc_St) * dx)

    terms["surface_shape_coupling"] = float(
        np.sum(base.psi2y_S * (a.dn2_S * b.eta_p + a.eta_p * b.dn2_S)
               * base.arc_S) * dx)

    terms["interface_shape_coupling"] = float(np.sum(
        (-base.psi2y_St * a.eta_tilde_p * b_dn_St
         + base.psi1y_St * a.eta_tilde_p * b.dn1_St_1
         + base.psi1y_St * a.dn1_St_1 * b.eta_tilde_p
         - base.psi2y_St * a.dn1_St_2 * b.eta_tilde_p) * base.arc_St) * dx)

    terms["surface_shape_quadratic"] = float(np.sum(
        (base.g * base.gravity_refs[1] + base.ke2y_S
         - base.d1F2_S - base.dF2_S * base.om2y_S)
        * a.eta_p * b.eta_p) * dx)

    terms["surface_vorticity_coupling"] = float(
        -np.sum(base.dF2_S * a.lap2_S * b.eta_p) * dx)

    terms["interface_vorticity_coupling"] = float(np.sum(
        (-base.dF1_St * a.lap1_St + base.dF2_St * a.lap2_St)
        * b.eta_tilde_p) * dx)

    terms["interface_shape_quadratic"] = float(np.sum(
        (base.g * base.rho_jump
         - base.d1F1_St - base.dF1_St * base.om1y_St
         + base.d1F2_St + base.dF2_St * base.om2y_St)
        * a.eta_tilde_p * b.eta_tilde_p) * dx)
    return terms


def second_variation_terms(state: FlowState, maps, gravity_refs,
                           pert_a: Perturbation, pert_b: Perturbation,
                           tilde_normal_layer2: str = "n1") -> dict:
    """Symmetrized per-term breakdown of the second variation."""
    base = _BaseCache(state, maps, gravity_refs)
    ca = _PertCache(state, pert_a)
    cb = _PertCache(state, pert_b)
    tab = _terms_one_sided(base, ca, cb, tilde_normal_layer2)
    tba = _terms_one_sided(base, cb, ca, tilde_normal_layer2)
    return {k: 0.5 * (tab[k] + tba[k]) for k in tab}


def second_variation(state: FlowState, maps, gravity_refs,
                     pert_a: Perturbation, pert_b: Perturbation,
                     tilde_normal_layer2: str = "n1") -> float:
    """Symmetric bilinear second variation along two admissible directions."""
    terms = second_variation_terms(state, maps, gravity_refs, pert_a, pert_b,
                                   tilde_normal_layer2)
    return float(sum(terms.values()))


def quadratic_form(state: FlowState, maps, gravity_refs,
                   pert: Perturbation,
                   tilde_normal_layer2: str = "n1") -> float:
    """Diagonal specialization; shared code path with second_variation."""
    return second_variation(state, maps, gravity_refs, pert, pert,
                            tilde_normal_layer2)


def fd_second_variation(state: FlowState, maps, gravity_refs,
                        pert_a: Perturbation, pert_b: Perturbation,
                        eps: float) -> float:
    """Four-corner finite-difference oracle for the second variation."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    plus = pert_a + pert_b
    minus = pert_a - pert_b
    h_pp = eval_H(perturbed_state(state, plus, eps), maps, gravity_refs)
    h_pm = eval_H(perturbed_state(state, minus, eps), maps, gravity_refs)
    h_mp = eval_H(perturbed_state(state, minus, -eps), maps, gravity_refs)
    h_mm = eval_H(perturbed_state(state, plus, -eps), maps, gravity_refs)
    return (h_pp - h_pm - h_mp + h_mm) / (4.0 * eps ** 2)


@dataclass
class HessianMatrix:
    basis: list
    entries: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def dim(self):
        return len(self.basis)


def _dof_vector(pert: Perturbation, n_curve_modes: int = 16):
    def curve_dofs(c: SurfaceCurve):
        cos_c = list(c.cos_coeffs)[:n_curve_modes]
        sin_c = list(c.sin_coeffs)[:n_curve_modes]
        cos_c += [0.0] * (n_curve_modes - len(cos_c))
        sin_c += [0.0] * (n_curve_modes - len(sin_c))
        return [c.mean] + cos_c + sin_c

    return np.concatenate([pert.psi1p.ravel(), pert.psi2p.ravel(),
                           curve_dofs(pert.eta_tilde_p),
                           curve_dofs(pert.eta_p)])


def assemble_hessian(state: FlowState, maps, gravity_refs,
                     basis) -> HessianMatrix:
    """Symmetric matrix of the bilinear form on a perturbation basis."""
    vs = np.stack([_dof_vector(p) for p in basis])
    gram = vs @ vs.T
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > 1e12:
        raise RankDeficientError(
            f"basis Gram condition {cond:.3e} exceeds 1e12")
    base = _BaseCache(state, maps, gravity_refs)
    caches = [_PertCache(state, p) for p in basis]
    n = len(basis)
    m = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            tij = _terms_one_sided(base, caches[i], caches[j], "n1")
            tji = _terms_one_sided(base, caches[j], caches[i], "n1")
            m[i, j] = 0.5 * (sum(tij.values()) + sum(tji.values()))
            m[j, i] = m[i, j]
    meta = {
        "state_hash": hashlib.sha256(
            np.ascontiguousarray(state.psi1).tobytes()
            + np.ascontiguousarray(state.psi2).tobytes()).hexdigest(),
        "grid_dims": (state.grid1.nx, state.grid1.ns, state.grid2.ns),
        "max_asymmetry": float(np.max(np.abs(m - m.T))),
    }
    return HessianMatrix(basis=list(basis), entries=m, metadata=meta)


def spectrum_edge(matrix: HessianMatrix):
    """Smallest eigenvalue and its coefficient vector (dense solve)."""
    m = matrix.entries
    if m.shape[0] > HESSIAN_DIM_CAP:
        raise DimensionCapError(
            f"dense eigensolve capped at {HESSIAN_DIM_CAP}, got {m.shape[0]}")
    vals, vecs = scipy.linalg.eigh(m)
    return float(vals[0]), vecs[:, 0]


def build_perturbation_basis(state: FlowState, basis_size: int,
                             restrict_surfaces: bool = True,
                             zero_trace: bool = False,
                             n_vert: int = 3):
    """Fourier-in-x times vertical-polynomial perturbation basis.

    x-independent field elements use vertical profiles vanishing to second
    order at both sigma ends, so the admissibility projection is a no-op and
    no element degenerates to a constant.
    """
    if basis_size < 1:
        raise ValueError("basis_size must be >= 1")
    g1, g2 = state.grid1, state.grid2
    elements = []

    def vert(grid, m, clamped):
        s = grid.sigma[None, :]
        base = np.polynomial.legendre.Legendre.basis(m)(2.0 * s - 1.0)
        if clamped:
            base = base * (s * (1.0 - s)) ** 2 * 16.0
        elif zero_trace:
            base = base * 4.0 * s * (1.0 - s)
        return base

    def field_element(layer, k, m, kind):
        p = Perturbation.zero(state)
        grid = g1 if layer == 1 else g2
        x = grid.x[:, None]
        osc = np.cos(k * x) if kind == "cos" else np.sin(k * x)
        f = osc * vert(grid, m, clamped=(k == 0 and not zero_trace))
        if layer == 1:
            p = Perturbation(f * np.ones_like(grid.y), p.psi2p,
                             p.eta_tilde_p, p.eta_p)
        else:
            p = Perturbation(p.psi1p, f * np.ones_like(grid.y),
                             p.eta_tilde_p, p.eta_p)
        return p

    def surface_element(which, k, kind):
        if k == 0:
            curve = SurfaceCurve(mean=1.0)
        else:
            coeffs = tuple(1.0 if i == k - 1 else 0.0 for i in range(k))
            curve = (SurfaceCurve(cos_coeffs=coeffs) if kind == "cos"
                     else SurfaceCurve(sin_coeffs=coeffs))
        z = Perturbation.zero(state)
        if which == "eta_tilde":
            return Perturbation(z.psi1p, z.psi2p, curve, z.eta_p)
        return Perturbation(z.psi1p, z.psi2p, z.eta_tilde_p, curve)

    k = 0
    while len(elements) < basis_size:
        kinds = ["cos"] if k == 0 else ["cos", "sin"]
        for kind in kinds:
            for m in range(n_vert):
                for layer in (1, 2):
                    elements.append(field_element(layer, k, m, kind))
            if not restrict_surfaces:
                elements.append(surface_element("eta_tilde", k, kind))
                elements.append(surface_element("eta", k, kind))
        k += 1
        if k > 64:
            break
    elements = elements[:basis_size]
    return [project_admissible(p, state) for p in elements]


@dataclass
class StabilityVerdict:
    verdict: str                      # STABLE | INDEFINITE | INCONCLUSIVE
    lambda_min: float
    witness: Perturbation | None
    conditions_checked: dict
    spectrum: list = field(default_factory=list)
    detail: dict = field(default_factory=dict)

    def to_dict(self):
        doc = {
            "verdict": self.verdict,
            "lambda_min": self.lambda_min,
            "conditions_checked": dict(self.conditions_checked),
            "spectrum": list(self.spectrum),
            "detail": dict(self.detail),
            "has_witness": self.witness is not None,
        }
        return doc


def _d22F_negative(state: FlowState, maps) -> bool:
    map1, map2 = maps
    g1, g2 = state.grid1, state.grid2
    om1 = geo.mapped_laplacian(g1, state.psi1)
    om2 = geo.mapped_laplacian(g2, state.psi2)
    return bool(np.all(np.asarray(map1.d2F_dm2(g1.y, om1)) < 0)
                and np.all(np.asarray(map2.d2F_dm2(g2.y, om2)) < 0))


def stability_verdict(state: FlowState, maps, gravity_refs, profiles,
                      restrict_surfaces: bool = True, basis_size: int = 40,
                      tol_psd: float = 1e-8, tol_res: float = 1e-3,
                      zero_trace: bool = False) -> StabilityVerdict:
    """Finite-dimensional linear-stability adjudication at a solution state."""
    profiles1, profiles2 = profiles
    residual = pde_residual(state, profiles1, profiles2)
    d22_flag = _d22F_negative(state, maps)
    conditions = {"surfaces_unperturbed": restrict_surfaces,
                  "d22F_negative": d22_flag}
    if residual.worst() > tol_res:
        return StabilityVerdict("INCONCLUSIVE", float("nan"), None,
                                conditions,
                                detail={"residual_worst": residual.worst(),
                                        "tol_res": tol_res})
    basis = build_perturbation_basis(state, basis_size,
                                     restrict_surfaces=restrict_surfaces,
                                     zero_trace=zero_trace)
    matrix = assemble_hessian(state, maps, gravity_refs, basis)
    lam_min, coeffs = spectrum_edge(matrix)
    spectrum = np.sort(scipy.linalg.eigvalsh(matrix.entries))
    norm = float(np.max(np.abs(spectrum)))
    detail = {"matrix_norm": norm, "tol_psd": tol_psd,
              "residual_worst": residual.worst(),
              "basis_size": len(basis),
              "state_hash": matrix.metadata["state_hash"]}
    if lam_min >= -tol_psd * norm:
        return StabilityVerdict("STABLE", lam_min, None, conditions,
                                spectrum.tolist(), detail)
    witness = basis[0] * coeffs[0]
    for b, c in zip(basis[1:], coeffs[1:]):
        witness = witness + b * c
    return StabilityVerdict("INDEFINITE", lam_min, witness, conditions,
                            spectrum.tolist(), detail)
