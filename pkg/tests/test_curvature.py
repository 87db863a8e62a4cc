import math

import numpy as np
import pytest

from tcurvflow.beckner import boundary_eigenvalue
from tcurvflow.curvature import (
    OverflowGuardError,
    PositivityError,
    TOTAL_CURVATURE,
    ache_chang_gap,
    boundary_energy,
    compute_alpha,
    curvature_bundle,
    descent_energy,
    diagnostics_f2_g2,
    kazdan_warner_residual,
    t_curvature,
)
from tcurvflow.harmonics import SpectralField, VOL_S3, flat_index, get_basis
from tcurvflow.mobius import MobiusParameter, bubble
from tcurvflow.presets import axial, const2

from conftest import random_field


# marginal-resolution bubbles are exercised on purpose in several tests
pytestmark = pytest.mark.filterwarnings("ignore:bubble")


def x4_harmonic(value=1.0, K=1):
    u = SpectralField.zeros(K)
    u.coeffs[flat_index(1, 1)] = value
    return u


def unit_vec(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


class TestTCurvature:
    def test_round_background(self, basis16):
        T = t_curvature(SpectralField.zeros(2), basis16)
        assert np.abs(T.values - 2.0).max() < 1e-13

    def test_constant_factor(self, basis16):
        c = 0.4
        T = t_curvature(SpectralField.constant(c), basis16)
        assert np.abs(T.values - 2.0 * math.exp(-3 * c)).max() < 1e-12

    def test_bubble_invariance(self, basis32):
        # pullbacks of the round metric keep T = 2; the band-16 projection
        # resolves eps = 0.6 to ~1e-6 and eps = 0.8 to roundoff
        rng = np.random.default_rng(421)
        p = rng.standard_normal(4)
        p /= np.linalg.norm(p)
        for eps, tol in ((0.6, 5e-6), (0.8, 1e-9)):
            w = bubble(MobiusParameter(p, eps), basis32, K=16)
            T = t_curvature(w, basis32)
            assert np.abs(T.values - 2.0).max() < tol

    def test_overflow_guard(self, basis16):
        with pytest.raises(OverflowGuardError):
            t_curvature(SpectralField.constant(300.0), basis16)


class TestAlpha:
    def test_background(self, basis16):
        assert abs(compute_alpha(SpectralField.zeros(1), const2(basis16), basis16) - 1.0) < 1e-13

    def test_constant_f(self, basis16):
        f = SpectralField.constant(5.0)
        assert abs(compute_alpha(SpectralField.zeros(1), f, basis16) - 2.0 / 5.0) < 1e-13

    def test_odd_part_integrates_out(self, basis16):
        # f = 2 + 0.5 x4 has the same total integral as f = 2
        f = axial(0.5, basis16)
        assert abs(compute_alpha(SpectralField.zeros(1), f, basis16) - 1.0) < 1e-12

    def test_positivity_error(self, basis16):
        f = basis16.analyze(2.0 + 3.0 * basis16.grid.points[:, 3], K_out=1)
        with pytest.raises(PositivityError):
            compute_alpha(SpectralField.zeros(1), f, basis16)

    def test_alpha_bounds(self, basis16):
        # 2/M_f <= alpha <= 2/m_f for volume-normalized states
        f = axial(0.5, basis16)
        fv = basis16.synthesize(f).values
        w = random_field(8, seed=31, amplitude=0.2)
        # project to volume 2 pi^2
        from tcurvflow.flow import project_volume
        w = project_volume(w, basis16)
        a = compute_alpha(w, f, basis16)
        assert 2.0 / fv.max() - 1e-12 <= a <= 2.0 / fv.min() + 1e-12


class TestEnergies:
    def test_zero(self, basis16):
        assert boundary_energy(SpectralField.zeros(3)) == 0.0

    def test_degree1(self, basis16):
        assert abs(boundary_energy(x4_harmonic()) - 12.0) < 1e-12

    def test_bubble_energy_invariance(self, basis32):
        w = bubble(MobiusParameter(np.array([0.0, 1.0, 0.0, 0.0]), 0.5), basis32, K=16)
        assert abs(boundary_energy(w)) < 1e-6

    def test_descent_energy_background(self, basis16):
        e = descent_energy(SpectralField.zeros(1), const2(basis16), basis16)
        assert abs(e + (16 * np.pi**2 / 3) * math.log(2.0)) < 1e-10

    def test_lower_bound_constant_f(self, basis16):
        # E_f >= -(16 pi^2/3) log M_f at normalized volume
        from tcurvflow.flow import project_volume
        f = SpectralField.constant(2.0)
        for seed in (1, 2, 3):
            w = project_volume(random_field(8, seed=seed, amplitude=0.3), basis16)
            e = descent_energy(w, f, basis16)
            assert e >= -(16 * np.pi**2 / 3) * math.log(2.0) - 1e-9

    def test_bubble_descent_energy_approaches_log_f(self):
        # concentration sends E_f to -(16 pi^2 / 3) log f(p); resolving the
        # profile needs the band limit to grow like 1/eps
        p = np.array([0.0, 0.0, 0.0, 1.0])
        target = -(16 * np.pi**2 / 3) * math.log(2.5)
        # gaps frozen from a high-resolution zonal quadrature oracle
        oracle = {0.2: 1.5832, 0.1: 0.4927, 0.05: 0.1389}
        gaps = []
        for eps, K in ((0.2, 32), (0.1, 48), (0.05, 96)):
            basis = get_basis(K)
            f = axial(0.5, basis)
            with pytest.warns(UserWarning):
                # curvature resolution degrades before energy does (the
                # energy is quadratic in the spectral tail, T is linear)
                w = bubble(MobiusParameter(p, eps), basis, K=K)
            gap = descent_energy(w, f, basis) - target
            assert abs(gap - oracle[eps]) < 5e-3
            gaps.append(gap)
        assert gaps[0] > gaps[1] > gaps[2] > 0  # monotone approach


class TestDiagnostics:
    def test_stationary(self, basis16):
        f2, g2 = diagnostics_f2_g2(SpectralField.zeros(1), const2(basis16), basis16)
        assert f2 < 1e-25 and g2 < 1e-22

    def test_round_state_closed_form(self, basis16):
        # w = 0, f = 2 + delta * Y with Y the unit degree-1 harmonic:
        # residual alpha f - 2 = alpha delta Y, so F2 = (alpha delta)^2
        delta = 0.1
        f = SpectralField.zeros(1)
        f.coeffs[0] = 2.0 * math.sqrt(VOL_S3)
        f.coeffs[flat_index(1, 1)] = delta
        w = SpectralField.zeros(1)
        alpha = compute_alpha(w, f, basis16)
        f2, g2 = diagnostics_f2_g2(w, f, basis16)
        assert abs(f2 - (alpha * delta) ** 2) < 1e-12
        assert abs(g2 - boundary_eigenvalue(1) * (alpha * delta) ** 2) < 1e-11

    def test_g2_nonnegative(self, basis16):
        f = axial(0.4, basis16)
        for seed in (7, 8):
            w = random_field(8, seed=seed, amplitude=0.2)
            _, g2 = diagnostics_f2_g2(w, f, basis16)
            assert g2 >= 0.0


class TestTotalCurvature:
    def test_gauss_bonnet_type_identity(self, basis16):
        # int T ds_g = 4 pi^2 for every factor
        f = const2(basis16)
        for seed in (3, 4):
            w = random_field(10, seed=seed, amplitude=0.3)
            cb = curvature_bundle(w, f, basis16)
            assert abs(cb.total_T - TOTAL_CURVATURE) / TOTAL_CURVATURE < 1e-13


class TestKazdanWarner:
    def test_round(self, basis16):
        r = kazdan_warner_residual(SpectralField.zeros(1), basis16)
        assert np.abs(r).max() < 1e-12

    def test_bubble(self, basis32):
        p = np.array([0.6, 0.0, 0.8, 0.0])
        w = bubble(MobiusParameter(p, 0.5), basis32, K=16)
        r = kazdan_warner_residual(w, basis32)
        assert np.abs(r).max() < 1e-6

    def test_axial_factor(self, basis32):
        w = x4_harmonic(0.3)
        r = kazdan_warner_residual(w, basis32)
        assert np.abs(r).max() < 1e-8

    def test_refinement(self):
        # residual decreases under refinement for a fixed smooth factor;
        # the factor must have slow (geometric) spectral decay or both
        # resolutions sit on the machine floor, so use a concentration
        # profile rather than an entire function
        q = unit_vec([0.4, 0.1, -0.3, 0.86])
        eps = 0.35
        errs = []
        for K in (8, 16):
            basis = get_basis(2 * K)
            c = basis.grid.points @ q
            vals = np.log(2 * eps) - np.log(1 + eps**2 - (1 - eps**2) * c)
            w = basis.analyze(vals, K_out=K)
            errs.append(np.abs(kazdan_warner_residual(w, basis)).max())
        assert errs[1] < errs[0] / 10.0


class TestAcheChang:
    def test_round_equality(self, basis16):
        assert abs(ache_chang_gap(SpectralField.zeros(1), basis16)) < 1e-10

    def test_bubble_extremal(self, basis32):
        w = bubble(MobiusParameter(np.array([0.0, 0.0, 1.0, 0.0]), 0.5), basis32, K=16)
        assert abs(ache_chang_gap(w, basis32)) < 1e-6

    def test_random_sample_nonnegative(self, basis16):
        # seeds recorded; inequality holds for every conformal factor
        for seed in range(100):
            w = random_field(8, seed=7000 + seed, amplitude=0.25)
            assert ache_chang_gap(w, basis16) >= -1e-9
