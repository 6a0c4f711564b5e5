import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sepscatter import (
    ConditionsViolated,
    FFTSingular,
    GaussianProfile,
    NonConvergence,
    NoPotential,
    NotContractive,
    OriginHit,
    PotentialSpec,
    SignInconsistent,
    UnderResolved,
    UniformGrid,
    YukawaProfile,
    build_sie,
    extend_even,
    extend_hermitian,
    forward_pipeline,
    reconstruct_radial,
    solvability_report,
    solve_fixed_point,
    solve_sie,
    winding_number,
)
from sepscatter.forward import ForwardData, Xi
from sepscatter.grid import MomentumBumpProfile
from sepscatter.inverse import NonUniquenessWarning, contraction_certificate, sie_residual

TWO_PI = 2 * math.pi
YAM = PotentialSpec(0.1, YukawaProfile(1.0))


def yam_D(q, lam=0.1, mu=1.0):
    return 1 + 2 * math.pi * lam / (mu * (mu - 1j * q) ** 2)


def yam_F(q, lam=0.1, mu=1.0):
    return -16 * math.pi ** 2 * lam / ((q ** 2 + mu ** 2) ** 2 * yam_D(q, lam, mu))


def analytic_F(grid, func):
    return ForwardData(grid, extend_hermitian(func(grid.half_points), grid).values)


def rel_l2(a, b):
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


def origin_hitting(grid):
    q = grid.points
    return ForwardData(grid, TWO_PI * 1j * q * np.exp(-(q ** 2 - 1) ** 2))


@pytest.fixture(scope="module")
def yam_fine():
    grid = UniformGrid(200.0, 2 ** 15)
    return grid, forward_pipeline(YAM, grid, route="closed-form")


class TestBuildSIE:
    grid = UniformGrid(4.0, 16)

    def test_zero_data(self):
        c = build_sie(ForwardData(self.grid, np.zeros(self.grid.N)))
        np.testing.assert_array_equal(c.a, 4 * math.pi ** 2)
        assert c.b == 4 * math.pi ** 2
        np.testing.assert_array_equal(c.g, 0)

    def test_yamaguchi_coefficients(self):
        F = analytic_F(self.grid, yam_F)
        c = build_sie(F)
        j = int(np.flatnonzero(self.grid.points == 1.0)[0])
        F1 = yam_F(1.0)
        assert c.a[j] == pytest.approx(TWO_PI * (1j * F1 + TWO_PI), rel=1e-14)
        assert c.g[j] == pytest.approx(-2 * F1, rel=1e-14)
        # documented values are rounded from F(1) = -3.59317 + 1.12890i
        assert c.a[j] == pytest.approx(32.3854 - 22.5770j, abs=1e-3)
        assert c.g[j] == pytest.approx(7.18634 - 2.25780j, abs=1e-3)
        assert c.a[j] - c.b == pytest.approx(-7.09381 - 22.57697j, abs=2e-3)
        # a - b = 2 pi i q F everywhere
        np.testing.assert_allclose(c.a - c.b, TWO_PI * 1j * self.grid.points * F.values,
                                   atol=1e-13)

    def test_origin_values(self):
        c = build_sie(analytic_F(self.grid, yam_F))
        z = self.grid.zero_index
        assert c.g[z] == 0 and c.a[z] == 4 * math.pi ** 2

    def test_hermitian_coefficients(self):
        c = build_sie(analytic_F(self.grid, yam_F))
        inner = np.arange(1, self.grid.N)
        m = self.grid.mirror[inner]
        np.testing.assert_allclose(c.a[m], np.conj(c.a[inner]), atol=1e-13)
        np.testing.assert_allclose(c.g[m], np.conj(c.g[inner]), atol=1e-13)


class TestWindingNumber:
    def test_constant(self):
        assert winding_number(np.full(50, TWO_PI + 0j)) == 0

    @pytest.mark.parametrize("k", [1, 2, -1, -3])
    def test_circle(self, k):
        theta = np.linspace(0, 2 * np.pi, 400, endpoint=False)
        assert winding_number(np.exp(1j * k * theta)) == k

    def test_yamaguchi_curve(self):
        grid = UniformGrid(100.0, 2 ** 14)
        F = analytic_F(grid, yam_F)
        assert winding_number(1j * grid.points * F.values + TWO_PI) == 0

    def test_origin_hit(self):
        with pytest.raises(OriginHit):
            winding_number(np.array([1, 1j, 0, -1j], complex))

    def test_origin_hit_between_samples(self):
        # segment from -1 to 1 passes through 0 without a sample there
        with pytest.raises(OriginHit):
            winding_number(np.array([-1, 1, 1 + 1j], complex))

    def test_under_resolved(self):
        theta = np.linspace(0, 2 * np.pi, 4, endpoint=False)
        with pytest.raises(UnderResolved):
            winding_number(np.exp(1j * theta))


class TestSolvabilityReport:
    def test_yamaguchi(self):
        grid = UniformGrid(100.0, 2 ** 14)
        F = analytic_F(grid, yam_F)
        rep = solvability_report(F)
        assert rep.kappa == 0 and rep.corollary_ok and rep.ok
        assert rep.min_abs_c >= TWO_PI - rep.sup_qF
        # the documented value 3.94 is |qF| at q = 1/sqrt(3); the true supremum is
        # ~4.12 near q = 0.74
        assert abs(0.577 * yam_F(0.577)) == pytest.approx(3.94, abs=5e-3)
        assert rep.sup_qF == pytest.approx(4.1205, abs=1e-3)
        assert rep.sup_qF < TWO_PI

    def test_zero_data(self):
        grid = UniformGrid(10.0, 64)
        rep = solvability_report(ForwardData(grid, np.zeros(grid.N)))
        assert rep.min_abs_c == TWO_PI
        assert rep.kappa == 0 and rep.corollary_ok

    def test_origin_hitting(self):
        grid = UniformGrid(10.0, 1024)
        F = origin_hitting(grid)
        rep = solvability_report(F)
        assert rep.origin_hit and not rep.ok and rep.kappa is None
        assert rep.min_abs_c <= 1e-10
        assert "nonvanishing" in rep.message
        with pytest.raises(OriginHit):
            solvability_report(F, strict=True)

    def test_kappa_stable_under_refinement(self):
        for spec in (YAM, PotentialSpec(-0.1, GaussianProfile(0.5))):
            kappas = []
            for N in (2 ** 13, 2 ** 14):
                F = forward_pipeline(spec, UniformGrid(100.0, N)).F
                kappas.append(solvability_report(F).kappa)
            assert kappas[0] == kappas[1]

    def test_negative_index(self):
        F = forward_pipeline(PotentialSpec(-0.1, GaussianProfile(0.5)),
                             UniformGrid(100.0, 2 ** 14)).F
        rep = solvability_report(F)
        assert rep.kappa == -2 and not rep.ok
        assert "not determined uniquely" in rep.message

    def test_to_dict(self):
        grid = UniformGrid(10.0, 64)
        d = solvability_report(ForwardData(grid, np.zeros(grid.N))).to_dict()
        assert set(d) >= {"min_abs_c", "winding", "sup_qF", "corollary_ok", "contraction"}
        assert isinstance(d["winding"], int)

    @settings(max_examples=30, deadline=None)
    @given(rho=st.floats(0.05, 0.95), c1=st.floats(-1, 1), c2=st.floats(-1, 1),
           s=st.floats(0.5, 4.0))
    def test_small_qF_gives_zero_index(self, rho, c1, c2, s):
        grid = UniformGrid(20.0, 2048)
        q = grid.half_points
        half = np.exp(-q ** 2 / s) * (c1 + 1j * c2 * q)
        peak = np.max(np.abs(q * half))
        if peak == 0:
            return
        F = ForwardData(grid, extend_hermitian(half * rho * TWO_PI / peak, grid).values)
        rep = solvability_report(F)
        assert rep.corollary_ok
        assert rep.kappa == 0
        assert rep.min_abs_c >= TWO_PI - rep.sup_qF - 1e-12


class TestContraction:
    def test_factor_below_one(self, yam_fine):
        _, res = yam_fine
        cert = contraction_certificate(res.F)
        assert cert is not None and cert.factor < 0.95

    def test_factor_at_given_A(self, yam_fine):
        _, res = yam_fine
        a = contraction_certificate(res.F, A=5.0)
        b = contraction_certificate(res.F, A=0.0)
        assert a.factor <= b.factor


class TestSolveSIE:
    def test_consistency_before_solving(self, yam_fine):
        grid, res = yam_fine
        coeffs = build_sie(res.F)
        assert sie_residual(coeffs, res.xi, FFTSingular(grid.N, 32)) <= 1e-4
        hil = forward_pipeline(YAM, grid)
        assert sie_residual(build_sie(hil.F), hil.xi) <= 1e-10

    def test_yamaguchi_round_trip(self, yam_fine):
        grid, res = yam_fine
        sol = solve_sie(build_sie(res.F))
        q = grid.points
        exact = 0.8 * q ** 2 / (q ** 2 + 1) ** 2
        assert rel_l2(sol.xi.values, exact) <= 1e-2
        assert sol.residual <= 1e-6

    def test_gaussian_round_trip(self):
        grid = UniformGrid(100.0, 2 ** 14)
        res = forward_pipeline(PotentialSpec(0.1, GaussianProfile(0.5)), grid,
                               route="closed-form")
        sol = solve_sie(build_sie(res.F))
        q = grid.points
        assert rel_l2(sol.xi.values, 0.4 * math.pi * q ** 2 * np.exp(-q ** 2)) <= 1e-2

    def test_symmetry_of_solution(self, yam_fine):
        grid, res = yam_fine
        x = solve_sie(build_sie(res.F)).xi
        assert x.values.dtype == float
        inner = np.arange(1, grid.N)
        assert np.max(np.abs(x.values[inner] - x.values[grid.mirror[inner]])) <= 1e-10
        assert x.values[grid.zero_index] == 0.0

    def test_homogeneous(self):
        grid = UniformGrid(20.0, 512)
        q = grid.half_points
        F = ForwardData(grid, extend_hermitian(np.exp(-q ** 2) * 0.5, grid).values)
        coeffs = build_sie(F)
        coeffs = type(coeffs)(coeffs.F, coeffs.a, coeffs.b, np.zeros_like(coeffs.g))
        sol = solve_sie(coeffs)
        assert not np.any(sol.xi.values)

    def test_dense_matches_cg(self):
        grid = UniformGrid(20.0, 512)
        res = forward_pipeline(YAM, grid)
        coeffs = build_sie(res.F)
        a = solve_sie(coeffs, method="dense").xi.values
        b = solve_sie(coeffs, method="cg").xi.values
        assert rel_l2(a, b) <= 1e-8

    def test_gate_refuses_negative_index(self):
        F = forward_pipeline(PotentialSpec(-0.1, GaussianProfile(0.5)),
                             UniformGrid(100.0, 2 ** 14)).F
        with pytest.raises(ConditionsViolated) as info:
            solve_sie(build_sie(F))
        assert info.value.report.kappa == -2

    def test_force_warns(self):
        F = origin_hitting(UniformGrid(10.0, 1024))
        with pytest.warns(NonUniquenessWarning):
            try:
                solve_sie(build_sie(F), force=True, max_iter=50)
            except NonConvergence:
                pass

    def test_non_convergence(self, yam_fine):
        _, res = yam_fine
        with pytest.raises(NonConvergence) as info:
            solve_sie(build_sie(res.F), max_iter=1, tol=1e-14)
        assert info.value.result.iterations <= 1

    def test_bad_method(self):
        grid = UniformGrid(10.0, 64)
        with pytest.raises(ValueError):
            solve_sie(build_sie(ForwardData(grid, np.zeros(grid.N))), method="lu")


@pytest.fixture(scope="module")
def bump():
    grid = UniformGrid(100.0, 2 ** 14)
    spec = PotentialSpec(0.05, MomentumBumpProfile(2.0, 6.0, 0.3))
    # finer singular operator for the data than for the solver
    return grid, forward_pipeline(spec, grid, FFTSingular(grid.N, 32))


class TestFixedPoint:
    def test_bump_round_trip(self, bump):
        grid, res = bump
        cert = contraction_certificate(res.F, A=2.0)
        assert cert.factor < 1
        fp = solve_fixed_point(res.F, 2.0)
        assert fp.factor == pytest.approx(cert.factor)
        assert rel_l2(fp.xi.values, res.xi.values) <= 1e-2
        tail = fp.ratios[1:]
        assert max(tail) <= fp.factor + 0.05
        bound = math.log(1e-12) / math.log(fp.factor) + 10
        assert fp.iterations <= bound

    def test_zero_data(self):
        grid = UniformGrid(10.0, 64)
        fp = solve_fixed_point(ForwardData(grid, np.zeros(grid.N)), 1.0)
        assert fp.iterations == 1 and not np.any(fp.xi.values)

    def test_not_contractive(self):
        grid = UniformGrid(100.0, 2 ** 14)
        spec = PotentialSpec(5.0, MomentumBumpProfile(2.0, 6.0, 0.1))
        F = forward_pipeline(spec, grid).F
        assert solvability_report(F).sup_qF > 2 * TWO_PI * 0.9
        with pytest.raises(NotContractive):
            solve_fixed_point(F, 2.0)

    def test_non_convergence(self, bump):
        with pytest.raises(NonConvergence) as info:
            solve_fixed_point(bump[1].F, 2.0, max_iter=3)
        assert info.value.result.iterations == 3

    def test_uniqueness_surrogate(self, bump):
        _, res = bump
        a = solve_fixed_point(res.F, 2.0).xi.values
        b = solve_sie(build_sie(res.F)).xi.values
        assert rel_l2(a, b) <= 2e-2


class TestReconstruction:
    grid = UniformGrid(64.0, 4096)

    def xi(self, sign=1):
        q = self.grid.half_points
        return Xi(self.grid, extend_even(sign * 0.8 * q ** 2 / (q ** 2 + 1) ** 2,
                                         self.grid).values)

    def test_positive(self):
        rec = reconstruct_radial(self.xi())
        assert rec.lambda_sign == 1
        j = int(np.flatnonzero(rec.q == 1.0)[0])
        assert rec.modulus[j] == pytest.approx(math.sqrt(0.1) * math.sqrt(2 / math.pi) / 2,
                                               rel=1e-14)
        assert rec.modulus[j] == pytest.approx(0.126155, abs=2e-6)
        assert np.all(rec.modulus >= 0)

    def test_negative(self):
        pos, neg = reconstruct_radial(self.xi()), reconstruct_radial(self.xi(-1))
        assert neg.lambda_sign == -1
        np.testing.assert_array_equal(neg.modulus, pos.modulus)

    def test_rebuilt(self):
        for sign in (1, -1):
            xi = self.xi(sign)
            rec = reconstruct_radial(xi)
            np.testing.assert_allclose(rec.rebuilt_xi(), xi.half(), atol=1e-12, rtol=0)

    def test_origin_limit(self):
        rec = reconstruct_radial(self.xi())
        assert rec.modulus[0] == pytest.approx(math.sqrt(0.8 / (4 * math.pi)), rel=1e-4)

    def test_no_potential(self):
        with pytest.raises(NoPotential):
            reconstruct_radial(Xi(self.grid, np.zeros(self.grid.N)))

    def test_sign_inconsistent(self):
        q = self.grid.half_points
        half = q ** 2 * np.exp(-q ** 2) * np.cos(q)
        with pytest.raises(SignInconsistent):
            reconstruct_radial(Xi(self.grid, extend_even(half, self.grid).values))

    def test_band_absorbs_noise(self):
        q = self.grid.half_points
        half = 0.8 * q ** 2 / (q ** 2 + 1) ** 2
        half[-10:] = -1e-9
        rec = reconstruct_radial(Xi(self.grid, extend_even(half, self.grid).values))
        assert rec.lambda_sign == 1

    @pytest.mark.parametrize("lam", [0.1, -0.1])
    def test_round_trip_sign(self, lam, yam_fine):
        grid = UniformGrid(200.0, 2 ** 15)
        spec = PotentialSpec(lam, YukawaProfile(1.0))
        F = forward_pipeline(spec, grid, route="closed-form").F
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            sol = solve_sie(build_sie(F))
        rec = reconstruct_radial(sol.xi)
        assert rec.lambda_sign == spec.sign
        sel = (rec.q >= 0.2) & (rec.q <= 10)
        expect = 0.25231 / (rec.q[sel] ** 2 + 1)
        assert np.max(np.abs(rec.modulus[sel] - expect)) <= 1e-2
