"""Per-layer density/vorticity profiles and the Bernoulli maps built from them.

A layer carries a density profile ``rho(s)`` (as a function of the streamline
coordinate ``s = -Psi``) and a vorticity profile ``beta(q)`` (as a function of
the stream-function value ``q``).  The map

    phi_y(p) = g * y * rho'(p) - beta(-p)

is, for admissible profiles, strictly monotone in ``p`` on a working window.
Its inverse is the slope of the Bernoulli potential ``F(y, m)`` that appears
inside the energy functional:

    dF/dm (y, m) = phi_y^{-1}(m),
    F(y, m) = integral from m0(y) to m of phi_y^{-1}(s) ds + C(y),

with the base point ``m0`` and offset ``C`` fixing the normalization.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import BracketError, NonMonotoneError, ProfileDomainError, WindowError

_GAUSS_NODES, _GAUSS_WEIGHTS = np.polynomial.legendre.leggauss(16)


class ScalarProfile:
    """Smooth scalar profile with first and second derivatives.

    Built from one of the supported kinds: ``constant``, ``linear``,
    ``polynomial`` (ascending coefficients) or ``tabulated`` (monotone-cubic
    interpolation of knot/value pairs).
    """

    def __init__(self, value, deriv, deriv2, kind, meta=None, anti=None):
        self._value = value
        self._deriv = deriv
        self._deriv2 = deriv2
        self._anti = anti
        self.kind = kind
        self.meta = meta or {}

    def __call__(self, s):
        return self._value(np.asarray(s, dtype=float))

    def d1(self, s):
        return self._deriv(np.asarray(s, dtype=float))

    def d2(self, s):
        return self._deriv2(np.asarray(s, dtype=float))

    def antiderivative(self, s):
        """Antiderivative vanishing at s = 0 (tabulated: at the first knot)."""
        return self._anti(np.asarray(s, dtype=float))

    @classmethod
    def constant(cls, value):
        v = float(value)
        return cls(lambda s: np.full_like(s, v),
                   lambda s: np.zeros_like(s),
                   lambda s: np.zeros_like(s),
                   "constant", {"value": v},
                   anti=lambda s: v * s)

    @classmethod
    def linear(cls, value_at_zero, slope):
        a, b = float(value_at_zero), float(slope)
        return cls(lambda s: a + b * s,
                   lambda s: np.full_like(s, b),
                   lambda s: np.zeros_like(s),
                   "linear", {"value_at_zero": a, "slope": b},
                   anti=lambda s: a * s + b * s ** 2 / 2.0)

    @classmethod
    def polynomial(cls, coefficients):
        p = np.polynomial.Polynomial(np.asarray(coefficients, dtype=float))
        p1 = p.deriv()
        p2 = p1.deriv()
        return cls(p, p1, p2, "polynomial",
                   {"coefficients": [float(c) for c in p.coef]},
                   anti=p.integ())

    @classmethod
    def tabulated(cls, knots, values):
        knots = np.asarray(knots, dtype=float)
        values = np.asarray(values, dtype=float)
        interp = PchipInterpolator(knots, values, extrapolate=True)
        d1 = interp.derivative(1)
        d2 = interp.derivative(2)
        return cls(interp, d1, d2, "tabulated",
                   {"knots": knots.tolist(), "values": values.tolist()},
                   anti=interp.antiderivative(1))

    @classmethod
    def from_config(cls, cfg):
        kind = cfg.get("kind")
        if kind == "constant":
            return cls.constant(cfg["value"])
        if kind == "linear":
            return cls.linear(cfg["value_at_zero"], cfg["slope"])
        if kind == "polynomial":
            return cls.polynomial(cfg["coefficients"])
        if kind == "tabulated":
            return cls.tabulated(cfg["knots"], cfg["values"])
        raise ValueError(f"unknown profile kind: {kind!r}")

    def to_config(self):
        return {"kind": self.kind, **self.meta}


@dataclass(frozen=True)
class LayerProfiles:
    """Density and vorticity profiles of one layer with admissible ranges."""

    layer_id: int
    rho: ScalarProfile
    beta: ScalarProfile
    s_range: tuple = (-np.inf, np.inf)
    q_range: tuple = (-np.inf, np.inf)

    def check_ranges(self, p):
        p = np.asarray(p, dtype=float)
        s_lo, s_hi = self.s_range
        q_lo, q_hi = self.q_range
        if np.any(p < s_lo) or np.any(p > s_hi):
            raise ProfileDomainError(
                f"layer {self.layer_id}: p outside s_range {self.s_range}")
        if np.any(-p < q_lo) or np.any(-p > q_hi):
            raise ProfileDomainError(
                f"layer {self.layer_id}: -p outside q_range {self.q_range}")

    def default_p_window(self):
        """Largest p-window compatible with both declared ranges."""
        lo = max(self.s_range[0], -self.q_range[1])
        hi = min(self.s_range[1], -self.q_range[0])
        return (lo, hi)


@dataclass
class ProfileValidationReport:
    monotone: bool
    window: tuple
    y_range: tuple
    min_abs_slope: float
    sign: int
    violations: list = field(default_factory=list)


def phi_forward(profiles: LayerProfiles, g: float, y, p):
    """Evaluate phi_y(p) = g*y*rho'(p) - beta(-p), with range checks."""
    p = np.asarray(p, dtype=float)
    profiles.check_ranges(p)
    return _phi(profiles, g, np.asarray(y, dtype=float), p)


def _phi(profiles, g, y, p):
    return g * y * profiles.rho.d1(p) - profiles.beta(-p)


def _phi_slope(profiles, g, y, p):
    # d phi_y / dp = g*y*rho''(p) + beta'(-p)
    return g * y * profiles.rho.d2(p) + profiles.beta.d1(-p)


def validate_profiles(profiles: LayerProfiles, g: float, y_range, p_window,
                      n_samples: int = 64) -> ProfileValidationReport:
    """Sample the slope of phi_y on a (y, p) grid and report monotonicity."""
    if n_samples < 2:
        raise ValueError("n_samples must be >= 2 per axis")
    ys = np.linspace(y_range[0], y_range[1], n_samples)
    ps = np.linspace(p_window[0], p_window[1], n_samples)
    slope = _phi_slope(profiles, g, ys[:, None], ps[None, :])
    sign = int(np.sign(np.median(np.sign(slope))))
    min_abs = float(np.min(np.abs(slope)))
    bad = (slope * sign <= 0.0) if sign != 0 else np.ones_like(slope, dtype=bool)
    violations = [(float(ys[i]), float(ps[j])) for i, j in zip(*np.nonzero(bad))]
    monotone = (len(violations) == 0) and (min_abs > 0.0)
    return ProfileValidationReport(monotone=monotone, window=tuple(p_window),
                                   y_range=tuple(y_range),
                                   min_abs_slope=min_abs, sign=sign,
                                   violations=violations[:100])


def _invert_phi(profiles, g, y, m, window, tol=1e-14, max_iter=100):
    """Vectorized safeguarded-Newton inverse of phi_y on a monotone window.

    y and m broadcast together.  Never steps outside the bracket, because
    monotonicity is only certified by sampling.
    """
    y, m = np.broadcast_arrays(np.asarray(y, dtype=float),
                               np.asarray(m, dtype=float))
    y = y.astype(float, copy=True)
    m = m.astype(float, copy=True)
    lo = np.full(m.shape, float(window[0]))
    hi = np.full(m.shape, float(window[1]))
    f_lo = _phi(profiles, g, y, lo) - m
    f_hi = _phi(profiles, g, y, hi) - m
    if np.any(f_lo * f_hi > 0):
        raise BracketError(
            f"layer {profiles.layer_id}: target outside the image of the "
            f"window {tuple(window)} under phi_y")
    p = 0.5 * (lo + hi)
    scale = np.maximum(1.0, np.maximum(np.abs(f_lo), np.abs(f_hi)))
    for _ in range(max_iter):
        f = _phi(profiles, g, y, p) - m
        if np.all(np.abs(f) <= tol * scale):
            break
        # maintain the bracket
        pos = f * f_hi > 0
        hi = np.where(pos, p, hi)
        f_hi = np.where(pos, f, f_hi)
        lo = np.where(pos, lo, p)
        f_lo = np.where(pos, f_lo, f)
        df = _phi_slope(profiles, g, y, p)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(df != 0.0, f / df, np.inf)
        cand = p - step
        inside = (cand > lo) & (cand < hi) & np.isfinite(cand)
        p = np.where(inside, cand, 0.5 * (lo + hi))
    return p


def phi_invert(profiles: LayerProfiles, g: float, y: float, m, window,
               abs_tol: float = 1e-12, n_validation: int = 256):
    """Invert phi_y(p) = m on the given window.

    Raises NonMonotoneError if the sampled slope changes sign or vanishes on
    the window, BracketError if m lies outside the image of the window.
    """
    report = validate_profiles(profiles, g, (y, y), window, max(2, n_validation))
    if not report.monotone:
        raise NonMonotoneError(
            f"layer {profiles.layer_id}: phi_y not strictly monotone on "
            f"{tuple(window)} at y={y}")
    p = _invert_phi(profiles, g, y, m, window, tol=abs_tol)
    return p if np.ndim(m) else float(p)


class BernoulliMap:
    """The potential F(y, m) of one layer, with its partial derivatives.

    ``dF_dm(y, phi_y(p)) = p`` on the validated window; ``F`` itself is the
    integral of the inverse slope from the normalization base point ``m0(y)``
    plus a per-layer offset ``C(y)``.
    """

    def __init__(self, profiles: LayerProfiles, g: float, p_window,
                 base_point, offset, base_p: float = 0.0):
        self.layer_id = profiles.layer_id
        self.profiles = profiles
        self.g = float(g)
        self.p_window = (float(p_window[0]), float(p_window[1]))
        self.base_point = base_point      # y -> m0(y) = phi_y(base_p)
        self.offset = offset              # y -> C(y)
        self.base_p = float(base_p)

    # -- m-window handling ------------------------------------------------

    def m_bounds(self, y):
        a = _phi(self.profiles, self.g, np.asarray(y, dtype=float),
                 np.full(np.shape(y), self.p_window[0]))
        b = _phi(self.profiles, self.g, np.asarray(y, dtype=float),
                 np.full(np.shape(y), self.p_window[1]))
        return np.minimum(a, b), np.maximum(a, b)

    def _check_window(self, y, m):
        lo, hi = self.m_bounds(y)
        slack = 1e-12 * np.maximum(1.0, np.maximum(np.abs(lo), np.abs(hi)))
        if np.any(m < lo - slack) or np.any(m > hi + slack):
            raise WindowError(
                f"layer {self.layer_id}: m outside the validated window image")

    # -- evaluators --------------------------------------------------------

    def dF_dm(self, y, m):
        y, m = np.broadcast_arrays(np.asarray(y, dtype=float),
                                   np.asarray(m, dtype=float))
        self._check_window(y, m)
        p = _invert_phi(self.profiles, self.g, y, m, self.p_window)
        return p if p.ndim else float(p)

    def d2F_dm2(self, y, m):
        p = np.asarray(self.dF_dm(y, m))
        y = np.broadcast_to(np.asarray(y, dtype=float), p.shape)
        out = 1.0 / _phi_slope(self.profiles, self.g, y, p)
        return out if out.ndim else float(out)

    def F(self, y, m):
        """Closed-form evaluation via integration by parts.

        With p = phi_y^{-1}(m), p0 the base streamline value and B the
        antiderivative of beta,

            int_{m0}^{m} phi_y^{-1}(s) ds
                = p*m - p0*m0 - g*y*(rho(p) - rho(p0)) + B(-p0) - B(-p),

        exact up to the profile representation, with one inversion per point.
        """
        y, m = np.broadcast_arrays(np.asarray(y, dtype=float),
                                   np.asarray(m, dtype=float))
        self._check_window(y, m)
        p = _invert_phi(self.profiles, self.g, y, m, self.p_window)
        p0 = self.base_p
        m0 = np.asarray(self.base_point(y), dtype=float)
        rho = self.profiles.rho
        beta_anti = self.profiles.beta.antiderivative
        val = (p * m - p0 * m0
               - self.g * y * (rho(p) - float(rho(p0)))
               + (float(beta_anti(-p0)) - beta_anti(-p))
               + np.asarray(self.offset(y), dtype=float))
        return val if val.ndim else float(val)

    def dF_dy(self, y, m, step_scale: float = 1e-5):
        y = np.asarray(y, dtype=float)
        h = step_scale * np.maximum(1.0, np.abs(y))
        out = (self.F(y + h, m) - self.F(y - h, m)) / (2.0 * h)
        return out


def build_bernoulli_map(profiles1: LayerProfiles, profiles2: LayerProfiles,
                        g: float, p2: float, *, y_range=(-2.0, 1.0),
                        p_window1=None, p_window2=None, n_samples: int = 64,
                        offset1=None):
    """Construct the pair (F1, F2) with the normalizations used in practice.

    F2 is normalized so that F2(y, phi2_y(p2)) = 0 for every y (surface
    zero); F1 so that F1(y, phi1_y(0)) = F2(y, phi2_y(0)) (interface
    matching).  A custom offset for layer 1 may be supplied instead.
    """
    if p_window1 is None:
        p_window1 = profiles1.default_p_window()
    if p_window2 is None:
        p_window2 = profiles2.default_p_window()
    for prof, win in ((profiles1, p_window1), (profiles2, p_window2)):
        rep = validate_profiles(prof, g, y_range, win, n_samples)
        if not rep.monotone:
            raise NonMonotoneError(
                f"layer {prof.layer_id}: phi_y not strictly monotone on "
                f"window {tuple(win)} over y in {tuple(y_range)}")

    def m0_2(y):
        return _phi(profiles2, g, np.asarray(y, dtype=float),
                    np.full(np.shape(y), float(p2)))

    map2 = BernoulliMap(profiles2, g, p_window2, m0_2,
                        lambda y: np.zeros(np.shape(y)), base_p=float(p2))

    def m0_1(y):
        return _phi(profiles1, g, np.asarray(y, dtype=float),
                    np.zeros(np.shape(y)))

    if offset1 is None:
        def offset1(y, _map2=map2, _profiles2=profiles2, _g=g):
            m_if = _phi(_profiles2, _g, np.asarray(y, dtype=float),
                        np.zeros(np.shape(y)))
            return np.asarray(_map2.F(y, m_if))

    map1 = BernoulliMap(profiles1, g, p_window1, m0_1, offset1, base_p=0.0)
    return map1, map2
