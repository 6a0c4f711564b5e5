"""
Forward scattering for V = lambda (., psi0) psi0 with a radial profile psi0.

Pipeline: profile -> form factor -> spectral density xi -> resolvent
denominator D -> forward integral F (and the amplitude f itself).

    xi(q) = 4 pi lambda q^2 |psi0_hat(q)|^2                (even in q)
    D(q)  = 1 + lambda (R0(q + i0) psi0, psi0)
          = 1 + i pi / (2q) * ((1 + S) xi)(q)
    f     = -2 pi^2 lambda psi0_hat(q n) conj psi0_hat(q w) / D(q)
    F(q)  = -4 pi^2 xi(q) / (q (2q + i pi (1 + S) xi(q)))

D has two independent realizations besides closed forms: the Hilbert route
above, and a real-space route through the autocorrelation of psi0,
D(q) = 1 + lambda int_0^inf exp(i q rho) rho a(rho) d rho.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Union

import numpy as np
from scipy import integrate, special
from scipy.interpolate import CubicSpline

from .errors import Condition7Violation, QuadratureError, ZeroDenominator
from .grid import (
    DirectionalFormFactor,
    FormFactor,
    GaussianProfile,
    PotentialSpec,
    SampledFunction,
    UniformGrid,
    YukawaProfile,
    extend_even,
    extend_hermitian,
    form_factor,
    radial_fourier,
)
from .singular import FFTSingular

TWO_PI_32 = (2 * math.pi) ** 1.5


@dataclass(frozen=True)
class Xi(SampledFunction):
    """Spectral density: real, even, zero at q = 0."""

    source: Optional[PotentialSpec] = None

    def __post_init__(self):
        object.__setattr__(self, "symmetry", "even-real")
        super().__post_init__()
        values = self.values.copy()
        values[self.grid.zero_index] = 0.0
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class ForwardData(SampledFunction):
    """Samples of F(q) with F(-q) = conj F(q)."""

    source: Optional[PotentialSpec] = None

    def __post_init__(self):
        object.__setattr__(self, "symmetry", "hermitian")
        super().__post_init__()


@dataclass(frozen=True)
class Denominator:
    """D on the shells q >= 0."""

    q: np.ndarray
    values: np.ndarray
    route: str

    def at(self, q):
        """D at arbitrary shells in range; cubic spline between samples."""
        q = np.asarray(q, float)
        hit = np.searchsorted(self.q, q)
        exact = (hit < self.q.size) & (self.q[np.minimum(hit, self.q.size - 1)] == q)
        if np.all(exact):
            out = self.values[hit]
        else:
            out = CubicSpline(self.q, self.values)(q)
        return out if q.ndim else complex(out)


# ---------------------------------------------------------------------------
# Spectral density
# ---------------------------------------------------------------------------

def compute_xi(spec: PotentialSpec, grid: UniformGrid,
               ff: Union[FormFactor, DirectionalFormFactor, None] = None) -> Xi:
    """xi = lambda q^2 int |psi0_hat(q, Omega)|^2 dOmega, even-extended."""
    q = grid.half_points
    if ff is None:
        ff = form_factor(spec.profile, grid)
    if not np.array_equal(ff.q, q):
        raise ValueError("form factor does not sit on the grid's shells")
    if isinstance(ff, DirectionalFormFactor):
        angular = np.abs(ff.values) ** 2 @ ff.directions.weights
    else:
        angular = 4 * math.pi * np.abs(ff.values) ** 2
    half = spec.lam * q ** 2 * angular
    return Xi(grid, extend_even(half, grid).values, source=spec)


# ---------------------------------------------------------------------------
# Denominator: Hilbert route and closed forms
# ---------------------------------------------------------------------------

def _plus_S_half(xi: SampledFunction, op) -> np.ndarray:
    """((1 + S) xi) on the shells 0 .. L."""
    n2 = xi.grid.N // 2
    s = op.apply(xi.values)
    # S xi is odd, so its value at +L is minus the value at -L
    s_half = np.concatenate([s[n2:], [-s[0]]])
    return xi.half() + s_half


def compute_denominator(xi: SampledFunction, op=None) -> Denominator:
    """D(q) = 1 + i pi/(2q) ((1+S) xi)(q) for q > 0.

    D(0) comes from the three smallest shells: Re D is even in q and is
    extrapolated quadratically in q^2; Im D = pi xi / (2q) is odd and vanishes.
    """
    if xi.symmetry != "even-real":
        raise ValueError("xi must be tagged even-real")
    grid = xi.grid
    if grid.N < 8:
        raise ValueError("need at least three positive shells")
    op = op if op is not None else FFTSingular(grid.N)
    q = grid.half_points
    d = np.empty(q.size, complex)
    d[1:] = 1 + 1j * math.pi / (2 * q[1:]) * _plus_S_half(xi, op)[1:]
    d[0] = 1.5 * d[1].real - 0.6 * d[2].real + 0.1 * d[3].real
    return Denominator(q, d, "hilbert")


def yamaguchi_denominator(lam: float, mu: float, q):
    """Residue-calculus closed form for psi0 = exp(-mu r)/r."""
    q = np.asarray(q, float)
    return 1 + 2 * math.pi * lam / (mu * (mu - 1j * q) ** 2)


def gaussian_denominator(lam: float, alpha: float, q):
    """Closed form for psi0 = exp(-alpha r^2) via the Faddeeva function."""
    q = np.asarray(q, float)
    beta = alpha / 2
    z = q / (2 * math.sqrt(beta))
    dw = -2 * z * special.wofz(z) + 2j / math.sqrt(math.pi)
    moment = -1j * math.sqrt(math.pi) / (4 * beta) * dw
    return 1 + lam * (math.pi / (2 * alpha)) ** 1.5 * moment


def closed_form_denominator(spec: PotentialSpec, q) -> Denominator:
    q = np.asarray(q, float)
    prof = spec.profile
    if isinstance(prof, YukawaProfile):
        return Denominator(q, yamaguchi_denominator(spec.lam, prof.mu, q),
                           "closed-form-yamaguchi")
    if isinstance(prof, GaussianProfile):
        return Denominator(q, gaussian_denominator(spec.lam, prof.alpha, q),
                           "closed-form-gaussian")
    raise ValueError(f"no closed-form denominator for {prof.kind} profiles")


# ---------------------------------------------------------------------------
# Denominator: autocorrelation route
# ---------------------------------------------------------------------------

_GL_ORDER = 16
_GL_X, _GL_W = np.polynomial.legendre.leggauss(_GL_ORDER)


def _panel_nodes(breaks):
    a, b = breaks[:-1, None], breaks[1:, None]
    half = (b - a) / 2
    return (a + half * (_GL_X + 1)).ravel(), (half * _GL_W).ravel()


class _RadialMoment:
    """Phi(s) = int_0^s t psi0(t) dt from composite Gauss-Legendre panels."""

    def __init__(self, profile, R: float, panels: int = 64):
        self.profile = profile
        breaks = np.linspace(0.0, R, panels + 1)
        if hasattr(profile, "r"):
            breaks = np.union1d(breaks, profile.r[profile.r <= R])
        self.breaks = breaks
        self.R = R
        nodes, weights = _panel_nodes(breaks)
        pieces = (weights * profile.r_psi0(nodes)).reshape(-1, _GL_ORDER).sum(axis=1)
        self.cumulative = np.concatenate([[0.0], np.cumsum(pieces)])

    def __call__(self, s):
        s = np.clip(np.asarray(s, float), 0.0, self.R)
        k = np.clip(np.searchsorted(self.breaks, s, side="right") - 1,
                    0, self.breaks.size - 2)
        a = self.breaks[k]
        half = (s - a) / 2
        nodes = a[..., None] + half[..., None] * (_GL_X + 1)
        partial = (self.profile.r_psi0(nodes) * _GL_W).sum(axis=-1) * half
        return self.cumulative[k] + partial


class _Autocorrelation:
    """h(rho) = rho a(rho) tabulated on Gauss-Legendre panels of [0, 2R]."""

    def __init__(self, profile, R: Optional[float] = None, panels: int = 64):
        R = R if R is not None else profile.extent
        if R is None:
            raise ValueError("profile has no finite extent; pass R explicitly")
        self.profile = profile
        self.phi = _RadialMoment(profile, R, panels)
        self.R = R
        r_breaks = self.phi.breaks
        n_rho = max(64, int(math.ceil(2 * R / 0.5)))
        self.rho_breaks = np.linspace(0.0, 2 * R, n_rho + 1)
        rho, _ = _panel_nodes(self.rho_breaks)
        self.h = np.array([self._h(p, r_breaks) for p in rho]).reshape(n_rho, _GL_ORDER)
        # Legendre coefficients per panel, for Filon-type oscillatory sums
        deg = np.arange(_GL_ORDER)
        P = np.array([special.eval_legendre(n, _GL_X) for n in deg])
        self.coef = (self.h * _GL_W) @ P.T * (2 * deg + 1) / 2

    def _h(self, rho, r_breaks):
        extra = [x for x in (rho, self.R - rho) if 0 < x < self.R]
        breaks = np.union1d(r_breaks, extra)
        r, w = _panel_nodes(breaks)
        g = self.profile.r_psi0(r)
        shell = self.phi(r + rho) - self.phi(np.abs(r - rho))
        return 2 * math.pi * float(np.sum(w * g * shell))

    def fourier(self, q):
        """int_0^{2R} exp(i q rho) h(rho) d rho, exact for panelwise polynomials."""
        q = np.atleast_1d(np.asarray(q, float))
        a, b = self.rho_breaks[:-1], self.rho_breaks[1:]
        center, half = (a + b) / 2, (b - a) / 2
        deg = np.arange(_GL_ORDER)
        out = np.empty(q.size, complex)
        for i, qv in enumerate(q):
            omega = qv * half[:, None]
            basis = 2 * (1j ** deg) * special.spherical_jn(deg, omega)
            out[i] = np.sum(half * np.exp(1j * qv * center)
                            * np.sum(self.coef * basis, axis=1))
        return out


@lru_cache(maxsize=16)
def _autocorrelation(profile, R):
    return _Autocorrelation(profile, R)


def denominator_autocorr(spec: PotentialSpec, q, R: Optional[float] = None):
    """1 + lambda int_0^inf exp(i q rho) rho a(rho) d rho with
    a(rho) = int psi0(y) psi0(y + rho e) dy, by nested quadrature in real space."""
    qa = np.asarray(q, float)
    ac = _autocorrelation(spec.profile, R)
    out = 1 + spec.lam * ac.fourier(qa.ravel())
    return out.reshape(qa.shape) if qa.ndim else complex(out[0])


def autocorr_denominator(spec: PotentialSpec, q, R: Optional[float] = None) -> Denominator:
    q = np.asarray(q, float)
    return Denominator(q, np.asarray(denominator_autocorr(spec, q, R)), "autocorr")


# ---------------------------------------------------------------------------
# Condition (7)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Condition7Report:
    min_abs: float
    q_at_min: float
    failing: np.ndarray
    eps: float

    @property
    def ok(self) -> bool:
        return self.failing.size == 0


def check_condition7(D: Denominator, eps: float = 1e-8) -> Condition7Report:
    mag = np.abs(D.values)
    i = int(np.argmin(mag))
    return Condition7Report(float(mag[i]), float(D.q[i]), D.q[mag < eps], eps)


# ---------------------------------------------------------------------------
# Amplitude and forward integral
# ---------------------------------------------------------------------------

def amplitude(spec: PotentialSpec, D, q: float, n=None, omega=None,
              form_factor=None, eps: float = 1e-8) -> complex:
    """f(q, n, omega).

    ``D`` is a complex value or a Denominator.  Radial specs ignore the
    directions; a ``form_factor`` callable on momentum vectors enables the
    general case.
    """
    d = D.at(q) if isinstance(D, Denominator) else complex(D)
    if abs(d) <= eps:
        raise Condition7Violation(f"|D({q})| = {abs(d):.3g} <= {eps:g}")
    if form_factor is None:
        out_ff = in_ff = complex(radial_fourier(spec.profile, q))
    else:
        n = np.asarray(n, float) / np.linalg.norm(n)
        omega = np.asarray(omega, float) / np.linalg.norm(omega)
        out_ff = complex(form_factor(q * n))
        in_ff = complex(form_factor(q * omega))
    return -2 * math.pi ** 2 * spec.lam * out_ff * np.conj(in_ff) / d


def forward_F(xi: Xi, D: Denominator, eps: float = 1e-14) -> ForwardData:
    """F from xi and D on the same grid; F(0) from the even limit of xi/q^2."""
    grid = xi.grid
    q = grid.half_points
    if D.values.shape != q.shape or not np.allclose(D.q, q, rtol=0, atol=1e-12 * grid.L):
        raise ValueError("denominator is not sampled on the grid's shells")
    xh = xi.half()
    F = np.zeros(q.size, complex)
    den = 2 * q[1:] * D.values[1:]
    num = -4 * math.pi ** 2 * xh[1:]
    bad = np.abs(den) < eps
    if np.any(bad & (np.abs(xh[1:]) >= eps)):
        raise ZeroDenominator(
            f"2q + i pi (1+S) xi vanishes at q = {q[1:][bad][0]:g} while xi does not")
    ok = ~bad
    F[1:][ok] = num[ok] / (q[1:][ok] * den[ok])
    ratio1 = xh[1] / q[1] ** 2
    ratio2 = xh[2] / q[2] ** 2
    F[0] = -2 * math.pi ** 2 * (4 * ratio1 - ratio2) / 3 / D.values[0].real
    return ForwardData(grid, extend_hermitian(F, grid).values, source=xi.source)


@dataclass(frozen=True)
class ForwardResult:
    xi: Xi
    denominator: Denominator
    F: ForwardData


def forward_pipeline(spec: PotentialSpec, grid: UniformGrid, op=None,
                     route: str = "hilbert") -> ForwardResult:
    """xi, D and F for a spec.  ``route`` picks D: hilbert or closed-form."""
    xi = compute_xi(spec, grid)
    if route == "hilbert":
        D = compute_denominator(xi, op)
    elif route == "closed-form":
        D = closed_form_denominator(spec, grid.half_points)
    elif route == "autocorr":
        D = autocorr_denominator(spec, grid.half_points)
    else:
        raise ValueError(f"unknown denominator route {route!r}")
    return ForwardResult(xi, D, forward_F(xi, D))


# ---------------------------------------------------------------------------
# Lippmann-Schwinger wavefunction
# ---------------------------------------------------------------------------

def _quad_c(func, a, b, points=None):
    val, err = integrate.quad(func, a, b, complex_func=True, epsabs=1e-14,
                              epsrel=1e-12, limit=400, points=points)
    if not np.isfinite(val):
        raise QuadratureError("non-finite quadrature result")
    return val


def radial_kernel(profile, q: float, r: float) -> complex:
    """(R0(q + i0) psi0)(r) for a radial profile:
    (1/(q r)) int_0^inf sin(q min(r,s)) exp(i q max(r,s)) s psi0(s) ds."""
    g = profile.r_psi0
    top = profile.extent if profile.extent is not None else np.inf
    if r == 0.0:
        if q == 0.0:
            return _quad_c(lambda s: g(s) + 0j, 0.0, top)
        return _quad_c(lambda s: np.exp(1j * q * s) * g(s), 0.0, top)
    inner_top = min(r, top)
    if q == 0.0:
        inner = _quad_c(lambda s: s * g(s) + 0j, 0.0, inner_top) / r
        outer = _quad_c(lambda s: g(s) + 0j, r, top) if r < top else 0.0
        return inner + outer
    inner = _quad_c(lambda s: math.sin(q * s) * g(s) + 0j, 0.0, inner_top)
    outer = _quad_c(lambda s: np.exp(1j * q * s) * g(s), r, top) if r < top else 0.0
    return (np.exp(1j * q * r) * inner + math.sin(q * r) * outer) / (q * r)


def _default_denominator(spec, q):
    try:
        return complex(closed_form_denominator(spec, q).values)
    except ValueError:
        return denominator_autocorr(spec, q)


def wavefunction(spec: PotentialSpec, k, x, D: Optional[complex] = None,
                 eps: float = 1e-8):
    """psi(x, k) = exp(i k.x) - lambda c (R0 psi0)(|x|), c = (psi, psi0).

    ``x`` may be a single point or an array of points (..., 3).
    """
    k = np.asarray(k, float)
    x = np.asarray(x, float)
    q = float(np.linalg.norm(k))
    d = _default_denominator(spec, q) if D is None else complex(D)
    if abs(d) <= eps:
        raise Condition7Violation(f"|D({q})| = {abs(d):.3g} <= {eps:g}")
    c = TWO_PI_32 * complex(np.conj(radial_fourier(spec.profile, q))) / d
    r = np.linalg.norm(x, axis=-1)
    radii, inverse = np.unique(r.ravel(), return_inverse=True)
    u = np.array([radial_kernel(spec.profile, q, float(rv)) for rv in radii])
    u = u[inverse].reshape(r.shape)
    psi = np.exp(1j * (x @ k)) - spec.lam * c * u
    return psi if psi.ndim else complex(psi)


def lippmann_schwinger_residual(spec: PotentialSpec, k, x, psi_x=None,
                                n_panels: int = 32, n_t: int = 48):
    """|psi(x) - [exp(i k.x) - lambda (psi, psi0) (R0 psi0)(x)]|.

    The inner product is a 3-D quadrature of the computed wavefunction and
    R0 psi0 is evaluated as a real-space convolution centered at each x, so
    neither reuses the closed-form scalar or the s-wave kernel.  ``x`` is one
    point or an array of points (..., 3).
    """
    prof = spec.profile
    if prof.extent is None:
        raise ValueError("residual check needs a profile with finite extent")
    k = np.asarray(k, float)
    x = np.asarray(x, float)
    q = float(np.linalg.norm(k))
    khat = k / q if q > 0 else np.array([0.0, 0.0, 1.0])
    perp = np.cross(khat, [1.0, 0.0, 0.0])
    if np.linalg.norm(perp) < 0.5:
        perp = np.cross(khat, [0.0, 1.0, 0.0])
    perp /= np.linalg.norm(perp)

    R = prof.extent
    r, wr = _panel_nodes(np.linspace(0.0, R, n_panels + 1))
    t, wt = np.polynomial.legendre.leggauss(n_t)
    pts = (r[:, None, None] * (np.sqrt(1 - t ** 2)[None, :, None] * perp
                               + t[None, :, None] * khat))
    psi_grid = wavefunction(spec, k, pts)
    overlap = 2 * math.pi * np.sum(
        wr * r ** 2 * prof.psi0(r) * (psi_grid @ wt))

    phi = _RadialMoment(prof, R)

    def convolution(a):
        # (1/4pi) int exp(iq|x-y|)/|x-y| psi0(y) dy in spherical coordinates about x
        if a == 0.0:
            return _quad_c(lambda p: np.exp(1j * q * p) * prof.r_psi0(p), 0.0, R)
        return _quad_c(lambda p: np.exp(1j * q * p) * (phi(a + p) - phi(abs(a - p))),
                       0.0, a + R, points=[a]) / (2 * a)

    flat = x.reshape(-1, 3)
    conv = np.array([convolution(float(np.linalg.norm(p))) for p in flat])
    rhs = np.exp(1j * (flat @ k)) - spec.lam * overlap * conv
    if psi_x is None:
        psi_x = wavefunction(spec, k, flat)
    res = np.abs(np.reshape(psi_x, -1) - rhs).reshape(x.shape[:-1])
    return res if res.ndim else float(res)


# ---------------------------------------------------------------------------
# Profile validation
# ---------------------------------------------------------------------------

def validate_profile(spec: PotentialSpec, eps: float = 1e-8) -> dict:
    """Numeric surrogates for the integrability conditions on psi0 plus the
    scalar condition D(0) != 0."""
    prof = spec.profile
    checks = {}
    if prof.extent is not None:
        top = prof.extent

        def finite(func):
            val, err = integrate.quad(func, 0.0, top, limit=400)
            return bool(np.isfinite(val) and err <= 1e-6 * max(1.0, abs(val)))

        g = prof.r_psi0
        checks["weighted_l2"] = finite(lambda r: (1 + r * r) ** 2 * g(r) ** 2)
        checks["l1"] = finite(lambda r: r * abs(g(r)))
        checks["l4_3"] = finite(lambda r: r ** (2 - 4 / 3) * abs(g(r)) ** (4 / 3))
    try:
        d0 = _default_denominator(spec, 0.0)
    except ValueError:
        d0 = None
    checks["D0"] = None if d0 is None else d0.real
    checks["D0_nonzero"] = None if d0 is None else bool(abs(d0) > eps)
    return checks
