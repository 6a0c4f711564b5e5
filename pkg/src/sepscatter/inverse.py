"""
Inverse problem: recover xi from forward data F by solving

    (a/2)(1 + S) xi + (b/2)(1 - S) xi = g,
    a = 2 pi (i q F + 2 pi),   b = 4 pi^2,   g = -2 q^2 F,

plus the diagnostics that decide whether the solution is unique: the curve
c(q) = i q F(q) + 2 pi must avoid the origin and have nonnegative winding
number, and |q F| < 2 pi is a sufficient condition for both.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from .errors import (
    Condition7Violation,
    ConditionsViolated,
    NoPotential,
    NonConvergence,
    NotContractive,
    OriginHit,
    SignInconsistent,
    UnderResolved,
)
from .forward import Xi
from .grid import SampledFunction, UniformGrid, extend_even
from .singular import FFTSingular

TWO_PI = 2 * math.pi
FOUR_PI_SQ = 4 * math.pi ** 2


class NonUniquenessWarning(UserWarning):
    """A solve was forced although the uniqueness hypotheses fail."""


@dataclass(frozen=True)
class SIECoefficients:
    F: SampledFunction
    a: np.ndarray
    b: float
    g: np.ndarray

    @property
    def grid(self) -> UniformGrid:
        return self.F.grid


def build_sie(F: SampledFunction) -> SIECoefficients:
    q = F.grid.points
    qF = q * F.values
    a = TWO_PI * (1j * qF + TWO_PI)
    g = -2 * q * qF
    return SIECoefficients(F, a, FOUR_PI_SQ, g)


def apply_sie(coeffs: SIECoefficients, xi, op) -> np.ndarray:
    """Left-hand side (a/2)(1+S) xi + (b/2)(1-S) xi on the full grid."""
    xi = np.asarray(xi)
    plus = (coeffs.a + coeffs.b) / 2
    minus = (coeffs.a - coeffs.b) / 2
    return plus * xi + minus * op.apply(xi)


def sie_residual(coeffs: SIECoefficients, xi, op=None) -> float:
    """Relative residual ||A xi - g|| / ||g|| (absolute when g = 0)."""
    values = xi.values if isinstance(xi, SampledFunction) else np.asarray(xi)
    op = op if op is not None else FFTSingular(coeffs.grid.N)
    r = np.linalg.norm(apply_sie(coeffs, values, op) - coeffs.g)
    scale = np.linalg.norm(coeffs.g)
    return float(r / scale) if scale > 0 else float(r)


# ---------------------------------------------------------------------------
# Index
# ---------------------------------------------------------------------------

def _closed(curve, closure):
    pts = np.asarray(curve, complex).ravel()
    if closure is not None:
        pts = np.append(pts, complex(closure))
    return np.append(pts, pts[0])


def curve_min_distance(curve, closure=None) -> tuple:
    """Distance from the origin to the closed polygon through the samples,
    and the index of the segment where it is attained."""
    pts = _closed(curve, closure)
    p, d = pts[:-1], np.diff(pts)
    dd = np.abs(d) ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.where(dd > 0, -np.real(np.conj(d) * p) / dd, 0.0)
    t = np.clip(t, 0.0, 1.0)
    dist = np.abs(p + t * d)
    i = int(np.argmin(dist))
    return float(dist[i]), i


def winding_number(curve, closure=None, eps: float = 1e-10) -> int:
    """Anticlockwise turns of the closed polygon through ``curve`` about 0.

    The polygon runs through the samples in order, then through ``closure``
    if given, and back to the first sample.
    """
    pts = _closed(curve, closure)
    dist, i = curve_min_distance(curve, closure)
    if dist < eps:
        raise OriginHit(f"curve passes within {dist:.3g} of the origin "
                        f"(segment {i})", min_abs=dist)
    steps = np.angle(pts[1:] / pts[:-1])
    worst = float(np.max(np.abs(steps)))
    if worst >= math.pi / 2:
        j = int(np.argmax(np.abs(steps)))
        raise UnderResolved(f"argument jumps by {worst:.3f} rad at sample {j}; "
                            "refine the grid")
    turns = steps.sum() / (2 * math.pi)
    kappa = int(round(turns))
    if abs(turns - kappa) > 1e-6:
        raise UnderResolved(f"winding sum {turns} is not an integer")
    return kappa


# ---------------------------------------------------------------------------
# Solvability report
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Contraction:
    A: float
    factor: float


@dataclass(frozen=True)
class SolvabilityReport:
    min_abs_c: float
    kappa: Optional[int]
    sup_qF: float
    corollary_ok: bool
    contraction: Optional[Contraction]
    origin_hit: bool = False
    under_resolved: bool = False
    q_min_abs_c: Optional[float] = None
    message: str = ""

    @property
    def ok(self) -> bool:
        """Nonvanishing, resolved and kappa >= 0."""
        return (not self.origin_hit and not self.under_resolved
                and self.kappa is not None and self.kappa >= 0)

    def to_dict(self) -> dict:
        return {
            "min_abs_c": self.min_abs_c,
            "winding": self.kappa,
            "sup_qF": self.sup_qF,
            "corollary_ok": self.corollary_ok,
            "contraction": (None if self.contraction is None else
                            {"A": self.contraction.A,
                             "factor": self.contraction.factor}),
            "origin_hit": self.origin_hit,
            "under_resolved": self.under_resolved,
            "message": self.message,
        }


def contraction_multiplier(F: SampledFunction) -> np.ndarray:
    """|i q F / (i q F + 4 pi)| on the shells 0 .. L."""
    q = F.grid.half_points
    iqF = 1j * q * F.half()
    with np.errstate(divide="ignore", invalid="ignore"):
        m = np.abs(iqF / (iqF + 4 * math.pi))
    return np.where(np.isfinite(m), m, np.inf)


def contraction_certificate(F: SampledFunction, threshold: float = 0.95,
                            A: Optional[float] = None) -> Optional[Contraction]:
    """Smallest shell A with sup_{q >= A} multiplier below ``threshold``, or
    the factor at a given A."""
    q = F.grid.half_points
    m = contraction_multiplier(F)
    tail_sup = np.maximum.accumulate(m[::-1])[::-1]
    if A is not None:
        j = int(np.searchsorted(q, A - 1e-12 * F.grid.L))
        return Contraction(float(A), float(tail_sup[j]))
    ok = np.flatnonzero(tail_sup < threshold)
    if ok.size == 0:
        return None
    j = int(ok[0])
    return Contraction(float(q[j]), float(tail_sup[j]))


def solvability_report(F: SampledFunction, eps: float = 1e-8,
                       threshold: float = 0.95, strict: bool = False
                       ) -> SolvabilityReport:
    """Diagnostics for the uniqueness hypotheses.

    With ``strict`` an origin hit raises OriginHit instead of being recorded.
    """
    q = F.grid.points
    qF = q * F.values
    c = 1j * qF + TWO_PI
    dist, seg = curve_min_distance(c)
    sup_qF = float(np.max(np.abs(qF)))
    kappa = None
    origin_hit = under = False
    message = ""
    try:
        kappa = winding_number(c, eps=eps)
    except OriginHit as exc:
        if strict:
            raise
        origin_hit = True
        message = f"nonvanishing condition violated; kappa undefined ({exc})"
    except UnderResolved as exc:
        under = True
        message = str(exc)
    if kappa is not None and kappa < 0:
        message = (f"index {kappa} < 0: the homogeneous equation has nontrivial "
                   "solutions and the potential is not determined uniquely")
    return SolvabilityReport(
        min_abs_c=dist,
        kappa=kappa,
        sup_qF=sup_qF,
        corollary_ok=sup_qF < TWO_PI,
        contraction=contraction_certificate(F, threshold),
        origin_hit=origin_hit,
        under_resolved=under,
        q_min_abs_c=float(q[seg]),
        message=message,
    )


# ---------------------------------------------------------------------------
# Collocation solve
# ---------------------------------------------------------------------------

@dataclass
class SIESolution:
    xi: Xi
    iterations: int
    residual: float
    method: str
    report: Optional[SolvabilityReport] = None


def _gate(coeffs, report, force):
    if report is None:
        report = solvability_report(coeffs.F)
    if not report.ok:
        if not force:
            raise ConditionsViolated(
                report.message or "uniqueness hypotheses fail", report=report)
        warnings.warn("solving although uniqueness hypotheses fail: "
                      + (report.message or "see report"),
                      NonUniquenessWarning, stacklevel=3)
    return report


def _even_projector(grid: UniformGrid):
    mirror = grid.mirror
    zero = grid.zero_index

    def project(x):
        y = 0.5 * (x + x[mirror])
        y[zero] = 0.0
        return y
    return project


def solve_sie(coeffs: SIECoefficients, op=None, regularization: Optional[float] = None,
              max_iter: int = 500, tol: float = 1e-6, method: str = "cg",
              force: bool = False, report: Optional[SolvabilityReport] = None
              ) -> SIESolution:
    """Least-squares solution over real even grid functions with xi(0) = 0.

    ``method='cg'`` runs conjugate gradients on the normal equations with
    every iterate projected onto real even vectors; ``method='dense'`` solves
    the same least-squares problem directly (N <= 1024).
    """
    report = _gate(coeffs, report, force)
    grid = coeffs.grid
    op = op if op is not None else FFTSingular(grid.N)
    tau = (1e-10 * float(np.max(np.abs(coeffs.a)))
           if regularization is None else float(regularization))
    project = _even_projector(grid)
    plus = (coeffs.a + coeffs.b) / 2
    minus = (coeffs.a - coeffs.b) / 2

    if method == "cg":
        def normal(x):
            x = project(np.asarray(x, float).ravel())
            ax = plus * x + minus * op.apply(x)
            aha = np.conj(plus) * ax + op.apply(np.conj(minus) * ax)
            return project(aha.real) + tau * x

        rhs = project((np.conj(plus) * coeffs.g + op.apply(np.conj(minus) * coeffs.g)).real)
        count = [0]

        def tick(_):
            count[0] += 1

        N = grid.N
        normal_op = LinearOperator((N, N), matvec=normal, dtype=float)
        if np.linalg.norm(rhs) == 0.0:
            x = np.zeros(N)
        else:
            x, _ = cg(normal_op, rhs, rtol=1e-13, atol=0.0, maxiter=max_iter,
                      callback=tick)
        x = project(x)
        iterations = count[0]
    elif method == "dense":
        if grid.N > 1024:
            raise ValueError("dense solve is limited to N <= 1024")
        n2 = grid.N // 2
        # free unknowns: -L and the positive shells; the rest follow by symmetry
        basis = np.zeros((grid.N, n2))
        basis[0, 0] = 1.0
        for col, j in enumerate(range(n2 + 1, grid.N), start=1):
            basis[j, col] = basis[grid.mirror[j], col] = 1.0
        S = op.matrix()
        A = (plus[:, None] * np.eye(grid.N) + minus[:, None] * S) @ basis
        stacked = np.vstack([A.real, A.imag, math.sqrt(tau) * np.eye(n2)])
        target = np.concatenate([coeffs.g.real, coeffs.g.imag, np.zeros(n2)])
        u = np.linalg.lstsq(stacked, target, rcond=None)[0]
        x = basis @ u
        iterations = 1
    else:
        raise ValueError(f"unknown method {method!r}")

    xi = Xi(grid, x)
    residual = sie_residual(coeffs, xi, op)
    solution = SIESolution(xi, iterations, residual, f"collocation-{method}", report)
    if not residual <= tol:
        raise NonConvergence(
            f"relative residual {residual:.3g} above tol {tol:g} "
            f"after {iterations} iterations", result=solution)
    return solution


# ---------------------------------------------------------------------------
# Fixed point on [A, inf)
# ---------------------------------------------------------------------------

@dataclass
class FixedPointResult:
    xi: Xi
    factor: float
    A: float
    iterations: int
    residual: float
    ratios: List[float] = field(default_factory=list)


def solve_fixed_point(F: SampledFunction, A: float, op=None, tol: float = 1e-12,
                      max_iter: int = 1000) -> FixedPointResult:
    """Iterate xi <- Re[rhs - M (S xi)] on q >= A, with xi = 0 on (-A, A),

        M = i q F / (i q F + 4 pi),   rhs = -2 q^2 F / (pi (i q F + 4 pi)),

    which contracts when sup_{q >= A} |M| < 1.
    """
    grid = F.grid
    op = op if op is not None else FFTSingular(grid.N)
    q = grid.half_points
    Fh = F.half()
    iqF = 1j * q * Fh
    support = q >= A - 1e-12 * grid.L
    with np.errstate(divide="ignore", invalid="ignore"):
        M = np.where(support, iqF / (iqF + 4 * math.pi), 0.0)
        rhs = np.where(support, -2 * q ** 2 * Fh / (math.pi * (iqF + 4 * math.pi)), 0.0)
    factor = float(np.max(np.abs(M[support]), initial=0.0))
    if not np.isfinite(factor) or factor >= 1.0:
        raise NotContractive(f"sup |M| on q >= {A:g} is {factor:.4g} >= 1")

    n2 = grid.N // 2
    xi = np.zeros(grid.N)
    ratios = []
    prev_step = None
    converged = False
    for it in range(1, max_iter + 1):
        s = op.apply(xi)
        s_half = np.concatenate([s[n2:], [-s[0]]])
        new_half = np.where(support, (rhs - M * s_half).real, 0.0)
        new = extend_even(new_half, grid).values
        step = new - xi
        step_norm = float(np.linalg.norm(step))
        if prev_step:
            ratios.append(step_norm / prev_step)
        prev_step = step_norm
        xi = new
        scale = float(np.max(np.abs(xi), initial=0.0))
        if np.max(np.abs(step), initial=0.0) <= tol * (scale if scale > 0 else 1.0):
            converged = True
            break
    result = FixedPointResult(Xi(grid, xi), factor, float(A), it,
                              sie_residual(build_sie(F), xi, op), ratios)
    if not converged:
        raise NonConvergence(f"fixed point not converged after {max_iter} steps",
                             result=result)
    return result


# ---------------------------------------------------------------------------
# Reconstruction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Reconstruction:
    lambda_sign: int
    q: np.ndarray
    modulus: np.ndarray
    residual: Optional[float] = None

    def rebuilt_xi(self) -> np.ndarray:
        return self.lambda_sign * 4 * math.pi * self.q ** 2 * self.modulus ** 2


def reconstruct_radial(xi: SampledFunction, band: float = 1e-6,
                       residual: Optional[float] = None) -> Reconstruction:
    """Sign of lambda and m(q) = |sqrt(lambda) psi0_hat(q)| from a radial xi.

    Values inside the band +-band*max|xi| count as zero for the sign test.
    """
    half = xi.half() if xi.symmetry != "none" else np.asarray(xi.values)
    half = np.asarray(half, float)
    q = xi.grid.half_points
    peak = float(np.max(np.abs(half), initial=0.0))
    if peak == 0.0:
        raise NoPotential("xi vanishes identically, so V = 0")
    cut = band * peak
    pos, neg = np.any(half > cut), np.any(half < -cut)
    if pos and neg:
        raise SignInconsistent(
            f"xi takes both signs beyond the band {cut:.3g}")
    sign = 1 if pos else -1
    signed = np.maximum(sign * half, 0.0)
    m = np.empty(q.size)
    m[1:] = np.sqrt(signed[1:] / (4 * math.pi)) / q[1:]
    r1, r2 = signed[1] / q[1] ** 2, signed[2] / q[2] ** 2
    m[0] = math.sqrt(max((4 * r1 - r2) / 3, 0.0) / (4 * math.pi))
    return Reconstruction(sign, q, m, residual)


def on_shell_kernel(f, D, eps: float = 1e-8):
    """K = lambda psi0_hat(q n) conj psi0_hat(q w) = -f D / (2 pi^2)."""
    f = np.asarray(f, complex)
    D = np.asarray(D, complex)
    if np.any(np.abs(D) <= eps):
        raise Condition7Violation(f"|D| <= {eps:g}")
    K = -f * D / (2 * math.pi ** 2)
    return K if K.ndim else complex(K)
