"""
The Cauchy singular integral operator

    (S phi)(x) = 1/(pi i) p.v. int phi(y) / (y - x) dy

and the projections P = (1 + S)/2, Q = (1 - S)/2.

On the Fourier side S multiplies by sgn(frequency), so the fast backend is a
single FFT pair.  Two other realizations exist for cross-checking: the dense
matrix of the same multiplier and an adaptive principal-value quadrature that
works directly on a callable.

The plain periodic multiplier (``pad=1``) is an exact discrete involution up to
the zero mode, S(S phi) = phi - mean(phi), but it approximates the real-line
operator only to O((1/L)^2) because of the cotangent kernel of the periodic
problem.  Zero-padding the samples by a factor ``pad`` pushes the periodic
images away and cuts that error by pad^2; the padded operator stays
self-adjoint with norm <= 1 but is no longer an exact involution.
"""

from __future__ import annotations

import math
import warnings
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .errors import QuadratureError
from .grid import SampledFunction, UniformGrid

DEFAULT_PAD = 8


class BoundaryDecayWarning(UserWarning):
    """Samples do not decay toward the grid edge; periodization error is likely."""


class FFTSingular:
    """S as the frequency multiplier sgn(.) with sgn(0) = 0.

    The sample at -L is split evenly between -L and +L of the padded buffer so
    that even input gives exactly odd output for every ``pad``.
    """

    def __init__(self, N: int, pad: int = DEFAULT_PAD):
        if N < 2 or N % 2:
            raise ValueError("N must be even")
        if pad < 1:
            raise ValueError("pad must be >= 1")
        self.N = N
        self.pad = int(pad)
        self.M = self.N * self.pad
        self._index = (np.arange(N) - N // 2) % self.M
        # sgn(0) = 0; the Nyquist bin keeps numpy's sign (-1) so sgn^2 = 1 off zero
        self._sign = np.sign(np.fft.fftfreq(self.M))

    def __repr__(self):
        return f"FFTSingular(N={self.N}, pad={self.pad})"

    def _embed(self, values):
        buf = np.zeros(values.shape[:-1] + (self.M,), complex)
        buf[..., self._index] = values
        if self.pad > 1:
            buf[..., self._index[0]] = values[..., 0] / 2
            buf[..., self.N // 2] = values[..., 0] / 2
        return buf

    def _extract(self, buf):
        out = buf[..., self._index]
        if self.pad > 1:
            out[..., 0] = (buf[..., self._index[0]] + buf[..., self.N // 2]) / 2
        return out

    def apply(self, values) -> np.ndarray:
        """Apply S along the last axis of an (..., N) array."""
        values = np.asarray(values)
        if values.shape[-1] != self.N:
            raise ValueError(f"expected last axis of length {self.N}")
        spec = np.fft.fft(self._embed(values), axis=-1)
        return self._extract(np.fft.ifft(spec * self._sign, axis=-1))

    def matrix(self) -> np.ndarray:
        """Dense N x N matrix of this operator (column j = S e_j)."""
        return self.apply(np.eye(self.N)).T


class DenseSingular:
    """S stored as an explicit matrix; O(N^2) application."""

    def __init__(self, matrix):
        matrix = np.asarray(matrix, complex)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ValueError("dense backend needs a square matrix")
        self.matrix_ = matrix
        self.N = matrix.shape[0]

    @classmethod
    def from_fft(cls, N: int, pad: int = DEFAULT_PAD) -> "DenseSingular":
        return cls(FFTSingular(N, pad).matrix())

    def apply(self, values) -> np.ndarray:
        return np.asarray(values) @ self.matrix_.T

    def matrix(self) -> np.ndarray:
        return self.matrix_


def dense_matrix(N: int, pad: int = DEFAULT_PAD) -> np.ndarray:
    return FFTSingular(N, pad).matrix()


def _taper(grid: UniformGrid) -> np.ndarray:
    a = np.abs(grid.points)
    edge = 0.9 * grid.L
    w = np.ones(grid.N)
    outer = a > edge
    w[outer] = 0.5 * (1 + np.cos(np.pi * (a[outer] - edge) / (0.1 * grid.L)))
    return w


def check_decay(phi: SampledFunction, threshold: float = 1e-3) -> float:
    """Warn when the outer 5% of the grid carries more than ``threshold``
    (relative to the peak); returns that ratio."""
    mag = np.abs(phi.values)
    peak = float(mag.max(initial=0.0))
    if peak == 0.0:
        return 0.0
    outer = np.abs(phi.grid.points) >= 0.95 * phi.grid.L
    ratio = float(mag[outer].max(initial=0.0)) / peak
    if ratio > threshold:
        warnings.warn(
            f"samples reach {ratio:.2e} of their peak near the grid edge; "
            "widen the grid or taper the data", BoundaryDecayWarning, stacklevel=3)
    return ratio


def _backend(op, grid: UniformGrid):
    if op is None:
        return FFTSingular(grid.N)
    if op.N != grid.N:
        raise ValueError(f"operator built for N={op.N}, grid has N={grid.N}")
    return op


def apply_S(phi: SampledFunction, op=None, taper: bool = False,
            threshold: float = 1e-3) -> SampledFunction:
    """S applied to grid samples (default backend: padded FFT multiplier)."""
    check_decay(phi, threshold)
    op = _backend(op, phi.grid)
    values = phi.values * _taper(phi.grid) if taper else phi.values
    return SampledFunction(phi.grid, op.apply(values))


def project_P(phi: SampledFunction, op=None, **kw) -> SampledFunction:
    s = apply_S(phi, op, **kw)
    return SampledFunction(phi.grid, 0.5 * (phi.values + s.values))


def project_Q(phi: SampledFunction, op=None, **kw) -> SampledFunction:
    s = apply_S(phi, op, **kw)
    return SampledFunction(phi.grid, 0.5 * (phi.values - s.values))


# ---------------------------------------------------------------------------
# Principal-value quadrature oracle
# ---------------------------------------------------------------------------

def _quad(func, a, b, tol, **kw):
    val, err, info = integrate.quad(func, a, b, epsabs=tol, epsrel=tol,
                                    limit=500, full_output=1, **kw)[:3]
    if err > 1e3 * tol * max(1.0, abs(val)):
        raise QuadratureError(f"p.v. quadrature on [{a}, {b}] did not converge "
                              f"(err={err:.2e})")
    return val


def _tail_integral(phi, x, cutoff, order, terms=40):
    """int_{|y|>R} phi(y)/(y-x) dy assuming phi(y) ~ C_pm |y|^-order there."""
    c_right = phi(cutoff) * cutoff ** order
    c_left = phi(-cutoff) * cutoff ** order
    k = np.arange(terms)
    moments = (x / cutoff) ** k * cutoff ** (-order) / (order + k)
    right = c_right * moments.sum()
    left = -c_left * (((-1.0) ** k) * moments).sum()
    return right + left


def apply_S_pv(phi: Callable[[float], float], x: float, tail: Optional[float] = None,
               window: float = 1.0, cutoff: Optional[float] = None,
               tol: float = 1e-11) -> complex:
    """(S phi)(x) by adaptive quadrature.

    The window [x - w, x + w] is integrated as (phi(y) - phi(x)) / (y - x),
    whose principal-value correction vanishes on a symmetric window.  Outside
    it the integrand is regular.  With ``tail=p`` the region |y| > cutoff is
    replaced by the expansion for phi ~ C |y|^-p; otherwise quadrature runs to
    infinity.
    """
    x = float(x)
    fx = phi(x)

    def diff_quot(y):
        return 0.0 if y == x else (phi(y) - fx) / (y - x)

    def cauchy(y):
        return phi(y) / (y - x)

    total = _quad(diff_quot, x - window, x + window, tol, points=[x])
    if tail is None:
        total += _quad(cauchy, x + window, np.inf, tol)
        total += _quad(cauchy, -np.inf, x - window, tol)
    else:
        R = cutoff if cutoff is not None else max(50.0, 4 * (abs(x) + window))
        if R <= abs(x) + window:
            raise ValueError("tail cutoff must lie outside the window")
        total += _quad(cauchy, x + window, R, tol)
        total += _quad(cauchy, -R, x - window, tol)
        total += _tail_integral(phi, x, R, float(tail))
    return total / (math.pi * 1j)


class PVSingular:
    """Quadrature backend: evaluates S phi pointwise from a callable."""

    def __init__(self, tol: float = 1e-11, tail: Optional[float] = None,
                 window: float = 1.0):
        self.tol = tol
        self.tail = tail
        self.window = window

    def apply(self, phi: Callable[[float], float], xs) -> np.ndarray:
        xs = np.atleast_1d(np.asarray(xs, float))
        return np.array([apply_S_pv(phi, x, tail=self.tail, window=self.window,
                                    tol=self.tol) for x in xs])
