"""Discrete flow states and admissible perturbations.

A FlowState bundles the two stream-function fields on their sigma grids with
the boundary constants (p1, p2) and physical parameters.  A Perturbation is a
4-tuple (psi1p, psi2p, eta_tilde_p, eta_p); it is admissible when the bottom
flux integral and the surface normal-flux integral both vanish:

    int_B d(psi1p)/dy dx = 0   and   int_S d(psi2p)/dn2 dl = 0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from . import geometry as geo
from .errors import SizeMismatchError, TraceError
from .geometry import BOTTOM, INTERFACE, SURFACE, FlowDomain, LayerGrid, SurfaceCurve


@dataclass(frozen=True)
class PhysicalParams:
    g: float
    c: float = 0.0
    d: float = 1.0
    P_atm: float = 0.0
    Q1: float = 0.0
    Q2: float = 0.0

    def __post_init__(self):
        if self.g < 0:
            raise ValueError("g must be nonnegative")
        if self.d <= 0:
            raise ValueError("d must be positive")


@dataclass(frozen=True)
class FlowState:
    psi1: np.ndarray
    psi2: np.ndarray
    domain: FlowDomain
    grid1: LayerGrid
    grid2: LayerGrid
    p1: float
    p2: float
    params: PhysicalParams
    stagnant: tuple = (False, False)

    def with_fields(self, psi1, psi2):
        return replace(self, psi1=psi1, psi2=psi2)


def assemble_state(psi1, psi2, domain, grids, p1, p2, params,
                   trace_tol=1e-8, check_traces=True) -> FlowState:
    """Validate boundary traces and record the stagnation check."""
    grid1, grid2 = grids
    psi1 = grid1._check(psi1)
    psi2 = grid2._check(psi2)
    if check_traces:
        scale = 1.0 + max(abs(p1), abs(p2))
        checks = [
            ("psi1 on S_tilde", np.max(np.abs(psi1[:, -1]))),
            ("psi1 on B", np.max(np.abs(psi1[:, 0] + p1))),
            ("psi2 on S_tilde", np.max(np.abs(psi2[:, 0]))),
            ("psi2 on S", np.max(np.abs(psi2[:, -1] + p2))),
        ]
        for name, err in checks:
            if err > trace_tol * scale:
                raise TraceError(f"trace violation {name}: {err:.3e}")
    stagnant = []
    for grid, psi in ((grid1, psi1), (grid2, psi2)):
        _, psi_y = geo.mapped_gradient(grid, psi)
        stagnant.append(not (bool(np.all(psi_y > 0)) or bool(np.all(psi_y < 0))))
    return FlowState(psi1, psi2, domain, grid1, grid2, float(p1), float(p2),
                     params, tuple(stagnant))


@dataclass(frozen=True)
class Perturbation:
    """Perturbation 4-tuple; surface parts are Fourier curves (deltas)."""

    psi1p: np.ndarray
    psi2p: np.ndarray
    eta_tilde_p: SurfaceCurve
    eta_p: SurfaceCurve

    def __add__(self, other):
        return Perturbation(self.psi1p + other.psi1p,
                            self.psi2p + other.psi2p,
                            self.eta_tilde_p + other.eta_tilde_p,
                            self.eta_p + other.eta_p)

    def __mul__(self, scalar):
        s = float(scalar)
        return Perturbation(self.psi1p * s, self.psi2p * s,
                            self.eta_tilde_p * s, self.eta_p * s)

    __rmul__ = __mul__

    def __sub__(self, other):
        return self + (-1.0) * other

    @classmethod
    def zero(cls, state: FlowState):
        return cls(state.grid1.zeros(), state.grid2.zeros(),
                   SurfaceCurve(), SurfaceCurve())

    def has_surface_part(self):
        def nonzero(c):
            return (c.mean != 0.0 or any(a != 0.0 for a in c.cos_coeffs)
                    or any(b != 0.0 for b in c.sin_coeffs))
        return nonzero(self.eta_tilde_p) or nonzero(self.eta_p)


def constraint_integrals(pert: Perturbation, state: FlowState):
    """The two membership integrals of the admissible space."""
    g1, g2 = state.grid1, state.grid2
    c_bottom = geo.line_integral(
        g1, geo.boundary_normal_derivative(g1, pert.psi1p, BOTTOM), BOTTOM, "dx")
    c_surface = geo.line_integral(
        g2, geo.boundary_normal_derivative(g2, pert.psi2p, SURFACE), SURFACE, "dl")
    return c_bottom, c_surface


def project_admissible(pert: Perturbation, state: FlowState) -> Perturbation:
    """Linear idempotent projection onto the admissible space.

    Subtracts multiples of fixed correction fields that vanish on all
    boundaries but carry unit flux through the constrained boundary:
    sigma*(1-sigma)^2 in layer 1 (bottom flux) and sigma^2*(1-sigma) in
    layer 2 (surface normal flux).  Traces are therefore never altered.
    """
    g1, g2 = state.grid1, state.grid2
    c_bottom, c_surface = constraint_integrals(pert, state)
    s1 = np.broadcast_to(g1.sigma[None, :], (g1.nx, g1.ns))
    w1 = s1 * (1.0 - s1) ** 2
    cb1 = geo.line_integral(
        g1, geo.boundary_normal_derivative(g1, w1, BOTTOM), BOTTOM, "dx")
    psi1p = pert.psi1p - (c_bottom / cb1) * w1
    s2 = np.broadcast_to(g2.sigma[None, :], (g2.nx, g2.ns))
    w2 = s2 ** 2 * (1.0 - s2)
    cw = geo.line_integral(
        g2, geo.boundary_normal_derivative(g2, w2, SURFACE), SURFACE, "dl")
    psi2p = pert.psi2p - (c_surface / cw) * w2
    return Perturbation(psi1p, psi2p, pert.eta_tilde_p, pert.eta_p)


def _legendre(m, s):
    return np.polynomial.legendre.Legendre.basis(m)(2.0 * s - 1.0)


def _random_field(rng, grid, modes, n_vert, amplitude, zero_trace,
                  skip_constant):
    s = grid.sigma[None, :]
    x = grid.x[:, None]
    f = np.zeros((grid.nx, grid.ns))
    # clamped envelope: value and slope vanish at both ends, so zero-trace
    # fields are untouched by the admissible projection
    envelope = (4.0 * s * (1.0 - s)) ** 2 if zero_trace else np.ones_like(s)
    for k in range(modes + 1):
        for m in range(n_vert):
            a = rng.standard_normal()
            b = rng.standard_normal() if k > 0 else 0.0
            if skip_constant and k == 0 and m == 0 and not zero_trace:
                continue
            scale = amplitude / ((1.0 + k) ** 2 * (1.0 + m) ** 2)
            vert = _legendre(m, s) * envelope
            f += scale * (a * np.cos(k * x) + b * np.sin(k * x)) * vert
    return f


def _random_curve(rng, modes, amplitude):
    mean = 0.25 * amplitude * rng.standard_normal()
    cos_c = tuple(amplitude * rng.standard_normal() / (1.0 + k) ** 2
                  for k in range(1, modes + 1))
    sin_c = tuple(amplitude * rng.standard_normal() / (1.0 + k) ** 2
                  for k in range(1, modes + 1))
    return SurfaceCurve(mean, cos_c, sin_c)


def random_admissible(seed, state: FlowState, modes: int = 3,
                      amplitude: float = 1.0, include_surfaces: bool = True,
                      zero_trace: bool = False, n_vert: int = 4) -> Perturbation:
    """Seeded random smooth perturbation, projected onto the admissible space.

    The construction is resolution-independent: the same seed yields samples
    of the same continuous perturbation on any grid.
    """
    if modes < 1:
        raise ValueError("modes must be >= 1")
    rng = np.random.default_rng(seed)
    psi1p = _random_field(rng, state.grid1, modes, n_vert, amplitude,
                          zero_trace, skip_constant=False)
    psi2p = _random_field(rng, state.grid2, modes, n_vert, amplitude,
                          zero_trace, skip_constant=False)
    if include_surfaces:
        eta_tilde_p = _random_curve(rng, modes, 0.1 * amplitude)
        eta_p = _random_curve(rng, modes, 0.1 * amplitude)
    else:
        eta_tilde_p = SurfaceCurve()
        eta_p = SurfaceCurve()
    pert = Perturbation(psi1p, psi2p, eta_tilde_p, eta_p)
    return project_admissible(pert, state)


def _curve_l2(curve: SurfaceCurve, grid: LayerGrid):
    vals = curve.value(grid.x)
    return float(np.sum(vals ** 2) * grid.dx)


def perturbation_norm(pert: Perturbation, state: FlowState) -> float:
    """Discrete H1-style norm used only for reporting and normalization."""
    total = 0.0
    for grid, f in ((state.grid1, pert.psi1p), (state.grid2, pert.psi2p)):
        fx, fy = geo.mapped_gradient(grid, f)
        total += geo.area_integral(grid, fx ** 2 + fy ** 2 + f ** 2)
    total += _curve_l2(pert.eta_tilde_p, state.grid2)
    total += _curve_l2(pert.eta_p, state.grid2)
    return float(np.sqrt(total))


# -- serialization -----------------------------------------------------------

def state_to_dict(state: FlowState) -> dict:
    return {
        "params": {
            "g": state.params.g, "c": state.params.c, "d": state.params.d,
            "P_atm": state.params.P_atm, "Q1": state.params.Q1,
            "Q2": state.params.Q2,
        },
        "p1": state.p1,
        "p2": state.p2,
        "eta_tilde": state.domain.eta_tilde.to_config(),
        "eta": state.domain.eta.to_config(),
        "grid": {"nx": state.grid1.nx, "ns1": state.grid1.ns,
                 "ns2": state.grid2.ns, "x_deriv": state.grid1.x_deriv},
        "psi1": [float(v) for v in state.psi1.ravel(order="C")],
        "psi2": [float(v) for v in state.psi2.ravel(order="C")],
    }


def state_from_dict(doc: dict, check_traces: bool = False) -> FlowState:
    params = PhysicalParams(**doc["params"])
    eta_tilde = SurfaceCurve.from_config(doc["eta_tilde"])
    eta = SurfaceCurve.from_config(doc["eta"])
    domain = geo.build_domain(params.d, eta_tilde, eta)
    gcfg = doc["grid"]
    grids = geo.build_grids(domain, gcfg["nx"], gcfg["ns1"], gcfg["ns2"],
                            gcfg.get("x_deriv", "spectral"))
    psi1 = np.array(doc["psi1"], dtype=float).reshape(gcfg["nx"], gcfg["ns1"])
    psi2 = np.array(doc["psi2"], dtype=float).reshape(gcfg["nx"], gcfg["ns2"])
    return assemble_state(psi1, psi2, domain, grids, doc["p1"], doc["p2"],
                          params, check_traces=check_traces)


def state_to_json(state: FlowState) -> str:
    return json.dumps(state_to_dict(state), sort_keys=True)


def state_from_json(text: str, check_traces: bool = False) -> FlowState:
    return state_from_dict(json.loads(text), check_traces=check_traces)
