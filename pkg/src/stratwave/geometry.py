"""Periodic two-layer free-boundary geometry and sigma-mapped discrete calculus.

Each layer is mapped onto the rectangle [-pi, pi) x [0, 1] by

    y(x, sigma) = lower(x) + sigma * (upper(x) - lower(x)),

which freezes the free boundaries and turns all functionals into fixed-domain
quadratures.  x-derivatives are spectral (the domain is 2*pi-periodic by
construction); sigma-derivatives use 2nd-order central stencils with
2nd-order one-sided closures at sigma = 0, 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CollapseError, GridSizeError, SizeMismatchError

BOTTOM = "B"
INTERFACE = "S_tilde"
SURFACE = "S"


@dataclass(frozen=True)
class SurfaceCurve:
    """2*pi-periodic curve given by a mean level plus a finite Fourier sum."""

    mean: float = 0.0
    cos_coeffs: tuple = ()
    sin_coeffs: tuple = ()

    def value(self, x):
        x = np.asarray(x, dtype=float)
        out = np.full_like(x, self.mean)
        for k, a in enumerate(self.cos_coeffs, start=1):
            out += a * np.cos(k * x)
        for k, b in enumerate(self.sin_coeffs, start=1):
            out += b * np.sin(k * x)
        return out

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for k, a in enumerate(self.cos_coeffs, start=1):
            out -= a * k * np.sin(k * x)
        for k, b in enumerate(self.sin_coeffs, start=1):
            out += b * k * np.cos(k * x)
        return out

    def second_derivative(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for k, a in enumerate(self.cos_coeffs, start=1):
            out -= a * k * k * np.cos(k * x)
        for k, b in enumerate(self.sin_coeffs, start=1):
            out -= b * k * k * np.sin(k * x)
        return out

    def __add__(self, other):
        return self._combine(other, 1.0)

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def _combine(self, other, sign):
        n = max(len(self.cos_coeffs), len(other.cos_coeffs),
                len(self.sin_coeffs), len(other.sin_coeffs))

        def pad(t):
            return tuple(t) + (0.0,) * (n - len(t))

        return SurfaceCurve(
            self.mean + sign * other.mean,
            tuple(a + sign * b for a, b in zip(pad(self.cos_coeffs),
                                               pad(other.cos_coeffs))),
            tuple(a + sign * b for a, b in zip(pad(self.sin_coeffs),
                                               pad(other.sin_coeffs))))

    def __mul__(self, scalar):
        s = float(scalar)
        return SurfaceCurve(self.mean * s,
                            tuple(a * s for a in self.cos_coeffs),
                            tuple(b * s for b in self.sin_coeffs))

    __rmul__ = __mul__

    @classmethod
    def flat(cls, level):
        return cls(mean=float(level))

    @classmethod
    def from_config(cls, cfg):
        return cls(float(cfg.get("mean", 0.0)),
                   tuple(float(a) for a in cfg.get("cos_coeffs", [])),
                   tuple(float(b) for b in cfg.get("sin_coeffs", [])))

    def to_config(self):
        return {"mean": self.mean,
                "cos_coeffs": list(self.cos_coeffs),
                "sin_coeffs": list(self.sin_coeffs)}


@dataclass(frozen=True)
class FlowDomain:
    """Validated two-layer domain: rigid bottom at -d, interface, surface."""

    d: float
    eta_tilde: SurfaceCurve
    eta: SurfaceCurve
    min_thickness_1: float = field(default=np.nan, compare=False)
    min_thickness_2: float = field(default=np.nan, compare=False)


def build_domain(d: float, eta_tilde: SurfaceCurve, eta: SurfaceCurve,
                 nx_scan: int = 256) -> FlowDomain:
    """Validate the geometry; fail loudly if a layer collapses anywhere."""
    if d <= 0:
        raise CollapseError("bottom depth d must be positive")
    x = np.linspace(-np.pi, np.pi, 4 * nx_scan, endpoint=False)
    t1 = eta_tilde.value(x) + d
    t2 = eta.value(x) - eta_tilde.value(x)
    if np.min(t1) <= 0:
        raise CollapseError(f"lower layer collapses: min thickness {np.min(t1):g}")
    if np.min(t2) <= 0:
        raise CollapseError(f"upper layer collapses: min thickness {np.min(t2):g}")
    return FlowDomain(float(d), eta_tilde, eta,
                      float(np.min(t1)), float(np.min(t2)))


class LayerGrid:
    """Tensor grid of one layer with precomputed sigma-map metric terms."""

    def __init__(self, layer_id, lower_curve, upper_curve, nx, ns,
                 x_deriv="spectral", flat_lower=None):
        self.layer_id = layer_id
        self.nx = int(nx)
        self.ns = int(ns)
        self.x_deriv = x_deriv
        self.x = -np.pi + 2.0 * np.pi * np.arange(nx) / nx
        self.sigma = np.linspace(0.0, 1.0, ns)
        self.dx = 2.0 * np.pi / nx
        self.dsigma = 1.0 / (ns - 1)
        self.lower_curve = lower_curve
        self.upper_curve = upper_curve
        if flat_lower is not None:
            lo = np.full_like(self.x, float(flat_lower))
            lo1 = np.zeros_like(self.x)
            lo2 = np.zeros_like(self.x)
        else:
            lo = lower_curve.value(self.x)
            lo1 = lower_curve.derivative(self.x)
            lo2 = lower_curve.second_derivative(self.x)
        up = upper_curve.value(self.x)
        up1 = upper_curve.derivative(self.x)
        up2 = upper_curve.second_derivative(self.x)
        self.lower = lo
        self.upper = up
        self.lower_d1 = lo1
        self.upper_d1 = up1
        self.h = up - lo                       # layer thickness per column
        self.h_d1 = up1 - lo1
        self.h_d2 = up2 - lo2
        if np.min(self.h) <= 0:
            raise CollapseError(
                f"layer {layer_id}: non-positive thickness on grid columns")
        # node coordinates and metric terms, shape (nx, ns)
        s = self.sigma[None, :]
        self.y = lo[:, None] + s * self.h[:, None]
        self.sigma_y = (1.0 / self.h)[:, None] * np.ones((1, ns))
        self.sigma_x = -(lo1[:, None] + s * self.h_d1[:, None]) / self.h[:, None]
        num = (-(lo2[:, None] + self.sigma_x * self.h_d1[:, None]
                 + s * self.h_d2[:, None]) * self.h[:, None]
               + (lo1[:, None] + s * self.h_d1[:, None]) * self.h_d1[:, None])
        self.sigma_xx = num / self.h[:, None] ** 2
        # spectral wavenumbers for x-derivatives
        self._ik = 1j * np.fft.rfftfreq(nx, d=1.0 / nx)

    # -- shape guard --------------------------------------------------------

    def _check(self, f):
        f = np.asarray(f, dtype=float)
        if f.shape != (self.nx, self.ns):
            raise SizeMismatchError(
                f"field shape {f.shape} != grid shape {(self.nx, self.ns)}")
        return f

    def zeros(self):
        return np.zeros((self.nx, self.ns))

    # -- one-dimensional derivative building blocks --------------------------

    def dx_comp(self, f):
        """Periodic x-derivative at fixed sigma."""
        f = self._check(f)
        if self.x_deriv == "spectral":
            return np.fft.irfft(self._ik[:, None] * np.fft.rfft(f, axis=0),
                                n=self.nx, axis=0)
        # 4th-order central
        return ((8.0 * (np.roll(f, -1, 0) - np.roll(f, 1, 0))
                 - (np.roll(f, -2, 0) - np.roll(f, 2, 0))) / (12.0 * self.dx))

    def dxx_comp(self, f):
        f = self._check(f)
        if self.x_deriv == "spectral":
            return np.fft.irfft(self._ik[:, None] ** 2 * np.fft.rfft(f, axis=0),
                                n=self.nx, axis=0)
        return ((np.roll(f, -1, 0) - 2.0 * f + np.roll(f, 1, 0)) / self.dx ** 2)

    def dsigma_comp(self, f):
        """Sigma-derivative: central interior, 2nd-order one-sided at edges."""
        f = self._check(f)
        h = self.dsigma
        out = np.empty_like(f)
        out[:, 1:-1] = (f[:, 2:] - f[:, :-2]) / (2.0 * h)
        out[:, 0] = (-3.0 * f[:, 0] + 4.0 * f[:, 1] - f[:, 2]) / (2.0 * h)
        out[:, -1] = (3.0 * f[:, -1] - 4.0 * f[:, -2] + f[:, -3]) / (2.0 * h)
        return out

    def d2sigma_comp(self, f):
        """Second sigma-derivative with dedicated stencils (exact on cubics)."""
        f = self._check(f)
        h2 = self.dsigma ** 2
        out = np.empty_like(f)
        out[:, 1:-1] = (f[:, 2:] - 2.0 * f[:, 1:-1] + f[:, :-2]) / h2
        out[:, 0] = (2.0 * f[:, 0] - 5.0 * f[:, 1] + 4.0 * f[:, 2] - f[:, 3]) / h2
        out[:, -1] = (2.0 * f[:, -1] - 5.0 * f[:, -2] + 4.0 * f[:, -3]
                      - f[:, -4]) / h2
        return out


def mapped_gradient(grid: LayerGrid, psi):
    """Physical-coordinate gradient (psi_x, psi_y) through the sigma map."""
    fs = grid.dsigma_comp(psi)
    psi_x = grid.dx_comp(psi) + fs * grid.sigma_x
    psi_y = fs * grid.sigma_y
    return psi_x, psi_y


def mapped_laplacian(grid: LayerGrid, psi):
    """Physical Laplacian via the full chain rule of the sigma map."""
    fxx = grid.dxx_comp(psi)
    fxs = grid.dsigma_comp(grid.dx_comp(psi))
    fss = grid.d2sigma_comp(psi)
    fs = grid.dsigma_comp(psi)
    return (fxx + 2.0 * grid.sigma_x * fxs
            + (grid.sigma_x ** 2 + grid.sigma_y ** 2) * fss
            + grid.sigma_xx * fs)


def build_grids(domain: FlowDomain, nx: int, ns1: int, ns2: int,
                x_deriv="spectral"):
    """Tensor grids for both layers (layer 1 below the interface)."""
    if nx < 8 or nx % 2 != 0:
        raise GridSizeError("nx must be even and >= 8")
    if ns1 < 5 or ns2 < 5:
        raise GridSizeError("each layer needs >= 5 vertical nodes")
    bottom = SurfaceCurve.flat(-domain.d)
    g1 = LayerGrid(1, bottom, domain.eta_tilde, nx, ns1, x_deriv,
                   flat_lower=-domain.d)
    g2 = LayerGrid(2, domain.eta_tilde, domain.eta, nx, ns2, x_deriv)
    return g1, g2


def _boundary_info(grid: LayerGrid, boundary):
    """(sigma index, curve for dl/normal or None-for-flat-bottom)."""
    if grid.layer_id == 1:
        table = {BOTTOM: (0, None), INTERFACE: (-1, grid.upper_curve)}
    else:
        table = {INTERFACE: (0, grid.lower_curve), SURFACE: (-1, grid.upper_curve)}
    if boundary not in table:
        raise ValueError(
            f"boundary {boundary!r} does not belong to layer {grid.layer_id}")
    return table[boundary]


def boundary_trace(grid: LayerGrid, psi, boundary):
    k, _ = _boundary_info(grid, boundary)
    return grid._check(psi)[:, k].copy()


def boundary_normal_derivative(grid: LayerGrid, psi, boundary):
    """Trace of the normal derivative on a boundary of the grid's layer.

    On the interface and surface the normal is the upward unit normal of the
    curve, (-c', 1)/sqrt(1 + c'^2).  On the flat bottom the plain
    y-derivative trace is returned, matching how the bottom integrals are
    written.
    """
    k, curve = _boundary_info(grid, boundary)
    psi_x, psi_y = mapped_gradient(grid, psi)
    if boundary == BOTTOM:
        return psi_y[:, k].copy()
    cp = curve.derivative(grid.x)
    norm = np.sqrt(1.0 + cp ** 2)
    return (-cp * psi_x[:, k] + psi_y[:, k]) / norm


def line_integral(grid: LayerGrid, trace, boundary, measure="dx"):
    """Periodic trapezoidal quadrature of a boundary trace.

    measure "dl" multiplies by the arclength factor sqrt(1 + c'^2) of the
    boundary curve (the bottom is flat, so dl = dx there).
    """
    trace = np.asarray(trace, dtype=float)
    if trace.shape != (grid.nx,):
        raise SizeMismatchError("trace not sampled at the boundary x nodes")
    if measure not in ("dx", "dl"):
        raise ValueError(f"unknown measure {measure!r}")
    w = np.ones(grid.nx)
    if measure == "dl":
        _, curve = _boundary_info(grid, boundary)
        if curve is not None:
            cp = curve.derivative(grid.x)
            w = np.sqrt(1.0 + cp ** 2)
    return float(np.sum(trace * w) * grid.dx)


def area_integral(grid: LayerGrid, f):
    """Tensor quadrature with the sigma-map Jacobian.

    Trapezoid in sigma, periodic trapezoid in x; dy dx = h(x) dsigma dx.
    """
    f = grid._check(f)
    w = np.full(grid.ns, grid.dsigma)
    w[0] *= 0.5
    w[-1] *= 0.5
    return float(np.sum((f @ w) * grid.h) * grid.dx)


def boundary_unit_normal(grid: LayerGrid, boundary):
    """Outward-up unit normal components (nx_comp, ny_comp) on the boundary."""
    _, curve = _boundary_info(grid, boundary)
    if curve is None:
        return np.zeros(grid.nx), -np.ones(grid.nx)
    cp = curve.derivative(grid.x)
    norm = np.sqrt(1.0 + cp ** 2)
    return -cp / norm, 1.0 / norm
