"""
Grids, sampled functions and radial form factors.

Every function of momentum lives on a symmetric uniform grid

    q_j = -L + j * (2L / N),   j = 0 .. N-1,

so that q = 0 sits at index N/2 and the mirror of index j is (N - j) mod N.
The right endpoint +L is excluded; for symmetric data it is the mirror image
of -L, which is why half-line arrays carry N/2 + 1 samples (0, dq, ..., L).

Potential profiles are real and radial.  Their Fourier transform uses the
unitary convention (2 pi)^(-3/2) int exp(-i k.x) phi(x) dx, which for a radial
profile reduces to

    psi0_hat(q) = sqrt(2/pi) / q * int_0^inf r sin(q r) psi0(r) dr.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional, Union

import numpy as np
from scipy import integrate
from scipy.interpolate import PchipInterpolator

from .errors import QuadratureError

SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)

SYMMETRIES = ("none", "even-real", "hermitian")


# ---------------------------------------------------------------------------
# Grid
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class UniformGrid:
    """Symmetric momentum grid on [-L, L) with N points (N even)."""

    L: float
    N: int

    def __post_init__(self):
        if not (self.L > 0 and math.isfinite(self.L)):
            raise ValueError(f"half width must be positive, got {self.L}")
        if self.N < 2 or self.N % 2:
            raise ValueError(f"point count must be even and >= 2, got {self.N}")

    @property
    def spacing(self) -> float:
        return 2.0 * self.L / self.N

    @property
    def zero_index(self) -> int:
        return self.N // 2

    @cached_property
    def points(self) -> np.ndarray:
        return -self.L + np.arange(self.N) * self.spacing

    @cached_property
    def half_points(self) -> np.ndarray:
        """Nonnegative shells 0, dq, ..., L (N/2 + 1 values, L included)."""
        return np.arange(self.N // 2 + 1) * self.spacing

    @cached_property
    def mirror(self) -> np.ndarray:
        """Index permutation j -> index of -q_j (with -L mapped to itself)."""
        return (self.N - np.arange(self.N)) % self.N

    def refine(self) -> "UniformGrid":
        return UniformGrid(self.L, 2 * self.N)


def make_uniform_grid(L: float, N: int) -> UniformGrid:
    return UniformGrid(float(L), int(N))


# ---------------------------------------------------------------------------
# Sampled functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SampledFunction:
    """Samples of a function on a UniformGrid with an optional symmetry tag.

    The tag is checked on construction: ``even-real`` requires
    v(-q) = v(q) with real values, ``hermitian`` requires v(-q) = conj v(q).
    """

    grid: UniformGrid
    values: np.ndarray
    symmetry: str = "none"
    tol: float = 1e-10

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.shape != (self.grid.N,):
            raise ValueError(
                f"expected {self.grid.N} samples, got shape {values.shape}")
        if self.symmetry not in SYMMETRIES:
            raise ValueError(f"unknown symmetry tag {self.symmetry!r}")
        if self.symmetry == "even-real":
            if np.iscomplexobj(values):
                if np.max(np.abs(values.imag), initial=0.0) > self.tol * _scale(values):
                    raise ValueError("even-real data has nonzero imaginary part")
                values = values.real
            values = values.astype(float)
        else:
            values = values.astype(complex)
        object.__setattr__(self, "values", values)
        if self.symmetry != "none":
            err = self.symmetry_error()
            if err > self.tol * _scale(values):
                raise ValueError(
                    f"{self.symmetry} symmetry violated by {err:.3g}")

    def symmetry_error(self) -> float:
        # index 0 (-L) has no partner on the grid; it stands for the mirror of +L
        mirrored = self.values[self.grid.mirror]
        if self.symmetry == "hermitian":
            mirrored = np.conj(mirrored)
        return float(np.max(np.abs(self.values - mirrored)[1:], initial=0.0))

    @property
    def points(self) -> np.ndarray:
        return self.grid.points

    def half(self) -> np.ndarray:
        """Values on the shells 0, dq, ..., L (requires a symmetry tag)."""
        return restrict(self)


def _scale(values) -> float:
    return max(1.0, float(np.max(np.abs(values), initial=0.0)))


def _check_half(half, grid: UniformGrid) -> np.ndarray:
    half = np.asarray(half)
    if half.shape != (grid.N // 2 + 1,):
        raise ValueError(
            f"half-line data must have {grid.N // 2 + 1} samples "
            f"(q = 0 .. L inclusive), got shape {half.shape}")
    return half


def _mirror_fill(half: np.ndarray, grid: UniformGrid, conj: bool) -> np.ndarray:
    n2 = grid.N // 2
    full = np.empty(grid.N, dtype=half.dtype)
    full[n2:] = half[:n2]
    tail = np.conj(half[1:]) if conj else half[1:]
    # index n2 - j holds -q_j; j = n2 lands on -L.
    full[n2 - np.arange(1, n2 + 1)] = tail
    return full


def extend_even(half, grid: UniformGrid) -> SampledFunction:
    """Even extension of real half-line samples (q = 0 .. L)."""
    half = _check_half(half, grid)
    if np.iscomplexobj(half):
        if np.max(np.abs(half.imag), initial=0.0) > 1e-14 * _scale(half):
            raise ValueError("even extension needs real data")
        half = half.real
    return SampledFunction(grid, _mirror_fill(half.astype(float), grid, False),
                           "even-real")


def extend_hermitian(half, grid: UniformGrid) -> SampledFunction:
    """Extension by v(-q) = conj v(q) of half-line samples (q = 0 .. L).

    The q = 0 sample is replaced by its real part so the result is exactly
    Hermitian.
    """
    half = _check_half(half, grid).astype(complex)
    half = half.copy()
    half[0] = half[0].real
    return SampledFunction(grid, _mirror_fill(half, grid, True), "hermitian")


def restrict(fn: SampledFunction) -> np.ndarray:
    """Half-line samples (q = 0 .. L) of a symmetric sampled function."""
    n2 = fn.grid.N // 2
    if fn.symmetry == "even-real":
        edge = fn.values[0]
    elif fn.symmetry == "hermitian":
        edge = np.conj(fn.values[0])
    else:
        raise ValueError("restriction needs an even-real or hermitian function")
    return np.concatenate([fn.values[n2:], [edge]])


# ---------------------------------------------------------------------------
# Potential profiles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GaussianProfile:
    """psi0(r) = exp(-alpha r^2)."""

    alpha: float

    def __post_init__(self):
        if not 0 < self.alpha < math.inf:
            raise ValueError("alpha must be positive and finite")

    kind = "gaussian"

    def psi0(self, r):
        return np.exp(-self.alpha * np.asarray(r, float) ** 2)

    def r_psi0(self, r):
        r = np.asarray(r, float)
        return r * np.exp(-self.alpha * r ** 2)

    def fourier(self, q):
        q = np.asarray(q, float)
        return (2 * self.alpha) ** -1.5 * np.exp(-q ** 2 / (4 * self.alpha))

    @property
    def extent(self) -> float:
        return math.sqrt(40.0 / self.alpha)


@dataclass(frozen=True)
class YukawaProfile:
    """psi0(r) = exp(-mu r) / r, the Yamaguchi form factor."""

    mu: float

    def __post_init__(self):
        if not 0 < self.mu < math.inf:
            raise ValueError("mu must be positive and finite")

    kind = "yukawa"

    def psi0(self, r):
        r = np.asarray(r, float)
        with np.errstate(divide="ignore"):
            return np.exp(-self.mu * r) / r

    def r_psi0(self, r):
        # bounded at r = 0, unlike psi0 itself
        return np.exp(-self.mu * np.asarray(r, float))

    def fourier(self, q):
        q = np.asarray(q, float)
        return SQRT_2_OVER_PI / (q ** 2 + self.mu ** 2)

    @property
    def extent(self) -> float:
        return 40.0 / self.mu


class TabulatedProfile:
    """Radial profile given by samples, monotone-cubic interpolated.

    The profile is taken to vanish beyond the last sample.
    """

    kind = "table"

    def __init__(self, r, v, rtol: float = 1e-10):
        r = np.asarray(r, float)
        v = np.asarray(v, float)
        if r.ndim != 1 or r.shape != v.shape or r.size < 2:
            raise ValueError("table needs matching 1-D r and v arrays of length >= 2")
        if r[0] < 0 or np.any(np.diff(r) <= 0):
            raise ValueError("table radii must be nonnegative and strictly increasing")
        if not np.all(np.isfinite(v)):
            raise ValueError("table values must be finite")
        self.r = r
        self.v = v
        self.rtol = rtol
        self._interp = PchipInterpolator(r, v, extrapolate=False)

    def __repr__(self):
        return f"TabulatedProfile(n={self.r.size}, r_max={self.r[-1]:g})"

    def psi0(self, r):
        out = self._interp(np.asarray(r, float))
        return np.nan_to_num(out, nan=0.0)

    def r_psi0(self, r):
        r = np.asarray(r, float)
        return r * self.psi0(r)

    @property
    def extent(self) -> float:
        return float(self.r[-1])

    def _quad(self, func, **kw):
        limit = max(200, 4 * self.r.size)
        val, err, info = integrate.quad(
            func, self.r[0], self.r[-1], epsabs=1e-14, epsrel=self.rtol,
            limit=limit, full_output=1, **kw)[:3]
        if err > max(1e-12, 10 * self.rtol * abs(val)) and info.get("last", 0) >= limit:
            raise QuadratureError(f"table quadrature stalled (err={err:.3g})")
        return val

    def fourier(self, q):
        q = np.asarray(q, float)
        out = np.empty(q.shape)
        for idx, qv in np.ndenumerate(q):
            if qv == 0.0:
                out[idx] = SQRT_2_OVER_PI * self._quad(lambda r: r * self.r_psi0(r))
            else:
                out[idx] = SQRT_2_OVER_PI / qv * self._quad(
                    self.r_psi0, weight="sin", wvar=qv)
        return out if q.ndim else float(out)


@dataclass(frozen=True)
class MomentumBumpProfile:
    """Form factor that is a smooth bump supported on [lo, hi] in momentum.

    The real-space profile is the inverse radial transform of the bump.
    """

    lo: float
    hi: float
    height: float = 0.1

    kind = "bump"

    def __post_init__(self):
        if not 0 <= self.lo < self.hi:
            raise ValueError("bump needs 0 <= lo < hi")

    def fourier(self, q):
        q = np.asarray(q, float)
        t = (2 * q - self.lo - self.hi) / (self.hi - self.lo)
        inside = np.abs(t) < 1
        out = np.zeros(q.shape)
        out[inside] = self.height * np.exp(1.0 - 1.0 / (1.0 - t[inside] ** 2))
        return out if q.ndim else float(out)

    def r_psi0(self, r):
        # the transform pair is symmetric: r psi0(r) = sqrt(2/pi) int q sin(qr) psi0_hat dq
        r = np.asarray(r, float)
        out = np.empty(r.shape)
        for idx, rv in np.ndenumerate(r):
            out[idx] = SQRT_2_OVER_PI * integrate.quad(
                lambda q: q * self.fourier(q) * math.sin(q * rv),
                self.lo, self.hi, epsabs=1e-15, epsrel=1e-12, limit=400)[0]
        return out if r.ndim else float(out)

    def psi0(self, r):
        r = np.asarray(r, float)
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.r_psi0(r) / r

    @property
    def extent(self) -> Optional[float]:
        return None


Profile = Union[GaussianProfile, YukawaProfile, TabulatedProfile, MomentumBumpProfile]


@dataclass(frozen=True)
class PotentialSpec:
    """Coupling and radial profile of V = lambda (., psi0) psi0."""

    lam: float
    profile: Profile

    def __post_init__(self):
        if not math.isfinite(self.lam) or self.lam == 0:
            raise ValueError("coupling lambda must be finite and nonzero (V != 0)")

    @property
    def sign(self) -> int:
        return 1 if self.lam > 0 else -1


def radial_fourier(profile: Profile, q):
    """Radial Fourier transform psi0_hat(q) of a profile, q >= 0."""
    q = np.asarray(q, float)
    if np.any(q < 0):
        raise ValueError("radial transform is defined for q >= 0")
    return profile.fourier(q)


# ---------------------------------------------------------------------------
# Form factors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FormFactor:
    """Radial samples of psi0_hat on the shells 0 .. L."""

    q: np.ndarray
    values: np.ndarray
    provenance: str


def form_factor(profile: Profile, grid: UniformGrid) -> FormFactor:
    q = grid.half_points
    provenance = {"gaussian": "closed-form-gaussian",
                  "yukawa": "closed-form-yukawa"}.get(profile.kind, "quadrature")
    return FormFactor(q, np.asarray(radial_fourier(profile, q), complex), provenance)


@dataclass(frozen=True)
class DirectionSet:
    """Gauss-Legendre in cos(theta) times uniform azimuth on the unit sphere."""

    theta: np.ndarray
    phi: np.ndarray
    weights: np.ndarray

    @property
    def vectors(self) -> np.ndarray:
        st = np.sin(self.theta)
        return np.stack([st * np.cos(self.phi), st * np.sin(self.phi),
                         np.cos(self.theta)], axis=-1)


def direction_set(n_theta: int = 16, n_phi: int = 32) -> DirectionSet:
    x, w = np.polynomial.legendre.leggauss(n_theta)
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    theta = np.repeat(np.arccos(x), n_phi)
    weights = np.repeat(w, n_phi) * (2 * np.pi / n_phi)
    return DirectionSet(theta, np.tile(phi, n_theta), weights)


@dataclass(frozen=True)
class DirectionalFormFactor:
    """psi0_hat(q, Omega_m) on shells q and directions of a DirectionSet."""

    q: np.ndarray
    directions: DirectionSet
    values: np.ndarray  # shape (len(q), n_directions)


def directional_form_factor(
    ft: Union[Profile, Callable[[np.ndarray], np.ndarray]],
    grid: UniformGrid,
    directions: Optional[DirectionSet] = None,
) -> DirectionalFormFactor:
    """Sample a form factor on every (shell, direction) pair.

    ``ft`` is either a radial profile or a callable mapping an array of
    momentum vectors (..., 3) to complex values.
    """
    dirs = directions if directions is not None else direction_set()
    q = grid.half_points
    if hasattr(ft, "fourier"):
        radial = np.asarray(radial_fourier(ft, q), complex)
        values = np.repeat(radial[:, None], dirs.weights.size, axis=1)
    else:
        k = q[:, None, None] * dirs.vectors[None, :, :]
        values = np.asarray(ft(k), complex)
    return DirectionalFormFactor(q, dirs, values)
