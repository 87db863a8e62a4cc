"""Finite-dimensional shadow dynamics of the concentration coordinates.

When the full flow concentrates, the coordinates (p, eps) of the centering
parameter follow, to leading order, the ODE

    dp/dt   = (32/3) alpha eps^2  grad_{S^3} f(p)      (tangential)
    deps/dt = 16     alpha eps^3  Lap_{S^3} f(p),

with alpha = 2 / f(p).  The eps-equation is obtained by combining the
leading-order laws for d(1-|p_ball|^2)/dt = 384 alpha eps^4 Lap f(p) with
the relation 1 - |p_ball|^2 = 12 eps^2 between the interior center of mass
and the concentration scale: differentiating the relation gives
24 eps deps/dt = 384 alpha eps^4 Lap f, i.e. the coefficient 16.  The
higher-order corrections (o(1) terms and the |grad f|^2 contribution to
the eps-law) carry no published coefficients and are dropped; the
comparison harness measures the resulting model error against the full
flow empirically.

Both clocks are carried: the original t and the rescaled s with
ds/dt = min(1/2, eps^2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .harmonics import (
    SpectralField,
    SphereBasis,
    apply_laplacian,
    gradient_inner,
)


@dataclass
class ShadowState:
    p: np.ndarray
    eps: float
    s: float = 0.0
    t: float = 0.0

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float)
        if abs(np.linalg.norm(self.p) - 1.0) > 1e-12:
            raise ValueError("p must be a unit vector")


class ShadowVelocityField:
    """Precomputed spectral gradient and Laplacian of f for fast evaluation."""

    def __init__(self, f: SpectralField, basis: SphereBasis):
        self.f = f
        self.basis = basis
        # (grad_{S^3} f)_i = <grad f, grad x_i> pointwise since grad x_i is
        # the tangential projection of the ambient axis e_i
        self.grad_components = [
            gradient_inner(f, xi, basis) for xi in basis.coordinate_fields()
        ]
        self.lap = apply_laplacian(f)

    def gradient(self, p: np.ndarray) -> np.ndarray:
        pts = p[None, :]
        g = np.array([self.basis.evaluate_at(gi, pts)[0]
                      for gi in self.grad_components])
        return g - (g @ p) * p  # enforce tangency against roundoff

    def laplacian(self, p: np.ndarray) -> float:
        return float(self.basis.evaluate_at(self.lap, p[None, :])[0])

    def value(self, p: np.ndarray) -> float:
        return float(self.basis.evaluate_at(self.f, p[None, :])[0])


def shadow_rhs(state: ShadowState, vf: ShadowVelocityField
               ) -> tuple[np.ndarray, float]:
    """Velocity (dp/dt tangential, deps/dt) at the given state."""
    alpha = 2.0 / vf.value(state.p)
    dp = (32.0 / 3.0) * alpha * state.eps**2 * vf.gradient(state.p)
    deps = 16.0 * alpha * state.eps**3 * vf.laplacian(state.p)
    return dp, deps


@dataclass
class ShadowTrajectory:
    states: list[ShadowState]
    truncated: bool  # eps left (0, 1) before the horizon

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    @property
    def points(self) -> np.ndarray:
        return np.array([s.p for s in self.states])

    @property
    def epsilons(self) -> np.ndarray:
        return np.array([s.eps for s in self.states])


def integrate_shadow(init: ShadowState, f: SpectralField, basis: SphereBasis,
                     horizon: float, dt: float) -> ShadowTrajectory:
    """Classical RK4 in the original clock, rescaled clock accumulated along.

    p is renormalized to the unit sphere after every step; the trajectory
    truncates with a flag if eps leaves (0, 1).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    vf = ShadowVelocityField(f, basis)

    def rhs(p, eps):
        pn = p / np.linalg.norm(p)
        dp, deps = shadow_rhs(ShadowState(pn, eps, 0.0, 0.0), vf)
        return dp, deps, min(0.5, eps * eps)

    states = [ShadowState(init.p.copy(), init.eps, init.s, init.t)]
    p, eps, s, t = init.p.copy(), init.eps, init.s, init.t
    truncated = False
    n_steps = int(round(horizon / dt))
    for _ in range(n_steps):
        k1 = rhs(p, eps)
        k2 = rhs(p + 0.5 * dt * k1[0], eps + 0.5 * dt * k1[1])
        k3 = rhs(p + 0.5 * dt * k2[0], eps + 0.5 * dt * k2[1])
        k4 = rhs(p + dt * k3[0], eps + dt * k3[1])
        p = p + dt / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        eps = eps + dt / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        s = s + dt / 6.0 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
        t += dt
        if not (0.0 < eps < 1.0):
            truncated = True
            break
        p /= np.linalg.norm(p)
        states.append(ShadowState(p.copy(), eps, s, t))
    return ShadowTrajectory(states, truncated)


def geodesic_distance(a: np.ndarray, b: np.ndarray) -> float | np.ndarray:
    dot = np.clip(np.sum(a * b, axis=-1), -1.0, 1.0)
    return np.arccos(dot)


@dataclass
class TrackComparison:
    empty: bool
    window: tuple[float, float] | None = None
    sup_p_distance: float | None = None
    sup_eps_rel_dev: float | None = None
    n_samples: int = 0


def compare_with_full_flow(flow_records, shadow_traj: ShadowTrajectory,
                           eps_window: float = 0.3) -> TrackComparison:
    """Sup deviation between the flow's (p, eps) track and the shadow ODE.

    Compares on the sub-track of flow records with a valid centering result
    and eps <= eps_window; shadow samples are linearly interpolated in t.
    Returns an empty report if no flow sample falls in the window.
    """
    samples = [(r.t, r.p, r.eps) for r in flow_records
               if r.p is not None and r.eps is not None and r.eps <= eps_window]
    if not samples or len(shadow_traj.states) < 2:
        return TrackComparison(empty=True)

    st = shadow_traj.times
    sp = shadow_traj.points
    se = shadow_traj.epsilons
    t_lo, t_hi = st[0], st[-1]
    sup_d = 0.0
    sup_e = 0.0
    n = 0
    for t, p, eps in samples:
        if not (t_lo <= t <= t_hi):
            continue
        i = int(np.searchsorted(st, t, side="right") - 1)
        i = min(max(i, 0), len(st) - 2)
        lam = (t - st[i]) / (st[i + 1] - st[i])
        ps = (1 - lam) * sp[i] + lam * sp[i + 1]
        ps /= np.linalg.norm(ps)
        es = (1 - lam) * se[i] + lam * se[i + 1]
        sup_d = max(sup_d, float(geodesic_distance(p, ps)))
        sup_e = max(sup_e, abs(eps - es) / es)
        n += 1
    if n == 0:
        return TrackComparison(empty=True)
    return TrackComparison(False, (samples[0][0], samples[-1][0]), sup_d, sup_e, n)
