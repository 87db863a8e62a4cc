import numpy as np
import pytest

from tcurvflow.flow import DiagnosticsRecord
from tcurvflow.harmonics import SpectralField, get_basis
from tcurvflow.presets import axial, const2
from tcurvflow.shadow import (
    ShadowState,
    ShadowVelocityField,
    compare_with_full_flow,
    geodesic_distance,
    integrate_shadow,
    shadow_rhs,
)

NORTH = np.array([0.0, 0.0, 0.0, 1.0])
SOUTH = -NORTH


def unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


@pytest.fixture(scope="module")
def basis():
    return get_basis(8)


class TestRhs:
    def test_constant_f_is_stationary(self, basis):
        vf = ShadowVelocityField(const2(basis), basis)
        dp, deps = shadow_rhs(ShadowState(unit([1, 2, 0, 1]), 0.3), vf)
        assert np.abs(dp).max() < 1e-12
        assert abs(deps) < 1e-12

    def test_axial_poles(self, basis):
        # f = 2 + delta x4: Lap f = -3 delta x4, so eps shrinks at the north
        # pole and grows at the south pole
        delta = 0.4
        vf = ShadowVelocityField(axial(delta, basis), basis)
        eps = 0.2
        dp_n, deps_n = shadow_rhs(ShadowState(NORTH, eps), vf)
        assert np.abs(dp_n).max() < 1e-10  # gradient vanishes at the pole
        alpha_n = 2.0 / (2.0 + delta)
        assert abs(deps_n - 16 * alpha_n * eps**3 * (-3 * delta)) < 1e-10
        assert deps_n < 0
        dp_s, deps_s = shadow_rhs(ShadowState(SOUTH, eps), vf)
        assert np.abs(dp_s).max() < 1e-10
        assert deps_s > 0

    def test_gradient_direction(self, basis):
        # at the equator the drift points toward the north pole
        vf = ShadowVelocityField(axial(0.4, basis), basis)
        p = unit([1, 0, 0, 0])
        dp, _ = shadow_rhs(ShadowState(p, 0.3), vf)
        assert dp @ NORTH > 0
        assert abs(dp @ p) < 1e-12  # tangential


class TestIntegrate:
    def test_constant_f_constant_trajectory(self, basis):
        init = ShadowState(unit([0, 1, 1, 1]), 0.4)
        traj = integrate_shadow(init, const2(basis), basis, horizon=1.0, dt=0.1)
        assert not traj.truncated
        assert np.abs(traj.points - traj.points[0]).max() < 1e-14
        assert np.abs(traj.epsilons - 0.4).max() < 1e-14

    def test_converges_to_north_pole(self, basis):
        # the eps^3 braking makes the original-clock convergence
        # logarithmically slow, so start at moderate distance and check the
        # structural behavior: monotone f(p), shrinking eps, shrinking gap
        f = axial(0.8, basis)
        d0 = 0.3
        init = ShadowState(unit([np.sin(d0), 0.0, 0.0, np.cos(d0)]), 0.5)
        traj = integrate_shadow(init, f, basis, horizon=40.0, dt=0.05)
        vf = ShadowVelocityField(f, basis)
        fvals = np.array([vf.value(p) for p in traj.points[::20]])
        assert np.all(np.diff(fvals) >= -1e-12)  # monotone f(p(t))
        assert geodesic_distance(traj.points[-1], NORTH) < 0.15
        assert traj.epsilons[-1] < init.eps  # concentrating at a max

    def test_rescaled_clock(self, basis):
        # ds/dt = min(1/2, eps^2) accumulates alongside
        init = ShadowState(NORTH, 0.3)
        traj = integrate_shadow(init, const2(basis), basis, horizon=2.0, dt=0.1)
        s_expect = 0.09 * traj.times  # eps frozen at 0.3
        assert np.abs(np.array([s.s for s in traj.states]) - s_expect).max() < 1e-12

    def test_truncates_when_eps_leaves(self, basis):
        # start at the south pole of an axial f: eps grows past 1
        f = axial(0.8, basis)
        traj = integrate_shadow(ShadowState(SOUTH, 0.9), f, basis,
                                horizon=50.0, dt=0.05)
        assert traj.truncated

    def test_fourth_order_accuracy(self, basis):
        f = axial(0.5, basis)
        init = ShadowState(unit([0.5, -0.3, 0.2, 0.4]), 0.35)
        ends = []
        for dt in (0.2, 0.1, 0.05):
            traj = integrate_shadow(init, f, basis, horizon=8.0, dt=dt)
            ends.append(np.concatenate([traj.points[-1], [traj.epsilons[-1]]]))
        e0 = np.linalg.norm(ends[0] - ends[2])
        e1 = np.linalg.norm(ends[1] - ends[2])
        assert e1 < e0 / 8.0  # consistent with O(dt^4)

    def test_limit_points_in_negative_laplacian_critical_set(self, basis):
        # for the traceless quadratic family the Lap f < 0 critical points
        # are +-e_i with a_i > 0; long trajectories must head there
        from tcurvflow.presets import traceless_quadratic
        f = traceless_quadratic((0.3, 0.1, -0.15, -0.25), basis)
        targets = np.array([[1, 0, 0, 0], [-1, 0, 0, 0],
                            [0, 1, 0, 0], [0, -1, 0, 0]], dtype=float)
        init = ShadowState(unit([0.8, 0.25, 0.2, 0.3]), 0.6)
        traj = integrate_shadow(init, f, basis, horizon=50.0, dt=0.05)
        d_start = min(geodesic_distance(init.p, t) for t in targets)
        d_end = min(geodesic_distance(traj.points[-1], t) for t in targets)
        assert d_end < 0.5 * d_start
        assert traj.epsilons[-1] < init.eps

    def test_rotation_equivariance(self, basis):
        # swap axes x4 <-> x3: rotate f and the initial point together
        R = np.eye(4)
        R[2, 2] = R[3, 3] = 0.0
        R[2, 3] = 1.0
        R[3, 2] = -1.0
        f1 = axial(0.3, basis)
        vals2 = 2.0 + 0.3 * (basis.grid.points @ R.T)[:, 3]
        f2 = basis.analyze(vals2, K_out=1)
        p0 = unit([0.2, 0.5, 0.1, 0.6])
        t1 = integrate_shadow(ShadowState(p0, 0.3), f1, basis, horizon=5.0, dt=0.05)
        t2 = integrate_shadow(ShadowState(unit(R.T @ p0), 0.3), f2, basis,
                              horizon=5.0, dt=0.05)
        assert np.abs(t1.points @ R - t2.points @ np.eye(4)).max() < 1e-10 or \
            np.abs((t1.points @ R.T) - t2.points).max() < 1e-10
        assert np.abs(t1.epsilons - t2.epsilons).max() < 1e-10


def fake_record(t, p, eps):
    return DiagnosticsRecord(t, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, None,
                             np.zeros(4), p, eps, 1e-3)


class TestComparison:
    def test_constant_tracks(self, basis):
        p = unit([0, 0, 1, 1])
        records = [fake_record(t, p, 0.25) for t in np.linspace(0, 1, 6)]
        traj = integrate_shadow(ShadowState(p, 0.25), const2(basis), basis,
                                horizon=1.0, dt=0.1)
        rep = compare_with_full_flow(records, traj)
        assert not rep.empty
        assert rep.sup_p_distance < 1e-12
        assert rep.sup_eps_rel_dev < 1e-12

    def test_empty_window(self, basis):
        p = unit([1, 0, 0, 1])
        records = [fake_record(t, p, 0.8) for t in np.linspace(0, 1, 4)]
        traj = integrate_shadow(ShadowState(p, 0.8), const2(basis), basis,
                                horizon=1.0, dt=0.1)
        rep = compare_with_full_flow(records, traj, eps_window=0.3)
        assert rep.empty

    def test_no_centering_samples(self, basis):
        records = [fake_record(t, None, None) for t in np.linspace(0, 1, 4)]
        traj = integrate_shadow(ShadowState(NORTH, 0.2), const2(basis), basis,
                                horizon=1.0, dt=0.1)
        assert compare_with_full_flow(records, traj).empty
