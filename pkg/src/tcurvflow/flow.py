"""Semi-implicit time integration of the boundary curvature flow.

The flow ``dw/dt = alpha f - T`` is stiff (the linearization carries the
k(k+1)(k+2) spectrum), so each step treats a spectrally diagonal part
implicitly:

    w^{n+1}_k = (w^n_k + dt N^n_k) / (1 + dt sigma^n mu_k),
    N^n = analyze(alpha f - T(w^n)) + sigma^n P3 w^n,

with the splitting weight sigma^n = max over the grid of e^{-3 w^n}.  The
frozen-coefficient stability requirement is sigma >= e^{-3w} everywhere:
the explicit remainder -(e^{-3w} - sigma) P3 is then anti-diffusive and
the division damps it unconditionally, while any smaller sigma (the
minimum, say) leaves explicit diffusion that caps dt at
2/((max - min) e^{-3w} mu_K) - prohibitively small exactly in the
concentrated states the flow is built to explore.  Config alternatives
sigma = 1 and sigma = min e^{-3w} are kept for experiments.  Every
accepted step is followed by an exact volume projection and a
recomputation of alpha; acceptance is keyed to descent of the Lyapunov
energy E_f.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .beckner import apply_p3, beckner_multipliers
from .curvature import (
    CurvatureBundle,
    TOTAL_CURVATURE,
    _exp3,
    boundary_energy,
    validate_positive,
)
from .harmonics import (
    GridField,
    SpectralField,
    SphereBasis,
    VOL_S3,
    degrees_of,
    get_basis,
)
from .mobius import CenteringError, CenteringResult, normalize

SIGMA_MODES = ("max_exp", "one", "min_exp")


@dataclass
class FlowConfig:
    K: int = 16
    dt: float = 2e-3
    t_max: float = 10.0
    tol_converged: float = 1e-10
    eps_min: float = 0.2
    oversample: int = 2
    sigma_mode: str = "max_exp"
    seed: int = 0
    n_diag: int = 10
    slack: float = 1e-10

    def __post_init__(self):
        if self.K < 0 or self.dt <= 0 or self.t_max <= 0 or self.oversample < 1:
            raise ValueError("K, dt, t_max, oversample must be positive")
        if not (0 < self.eps_min < 1):
            raise ValueError("eps_min must lie in (0, 1)")
        if self.tol_converged <= 0 or self.n_diag < 1:
            raise ValueError("tol_converged and n_diag must be positive")
        if self.sigma_mode not in SIGMA_MODES:
            raise ValueError(f"sigma_mode must be one of {SIGMA_MODES}")

    @property
    def K_design(self) -> int:
        return self.oversample * self.K


@dataclass
class FlowState:
    """Conformal factor at time t with cached derived quantities."""

    t: float
    w: SpectralField
    alpha: float
    bundle: CurvatureBundle
    w_values: np.ndarray = field(repr=False)
    p3w_values: np.ndarray = field(repr=False)
    e3w: np.ndarray = field(repr=False)


@dataclass
class DiagnosticsRecord:
    t: float
    alpha: float
    E_f: float
    E: float
    volume: float
    F2: float
    G2: float
    b: np.ndarray | None
    S: np.ndarray
    p: np.ndarray | None
    eps: float | None
    dt_used: float
    total_T: float = TOTAL_CURVATURE  # tracked for conservation checks, not exported


@dataclass
class FlowOutcome:
    kind: str  # converged | concentrating | horizon
    t: float
    p: np.ndarray | None = None
    eps: float | None = None


def project_volume(w: SpectralField, basis: SphereBasis) -> SpectralField:
    """Shift w by the constant making vol(e^{2w} g_round) = 2 pi^2."""
    vol = basis.integrate(_exp3(basis.synthesize(w).values))
    c = (1.0 / 3.0) * math.log(VOL_S3 / vol)
    out = w.copy()
    out.coeffs[0] += c * math.sqrt(VOL_S3)
    return out


def make_state(t: float, w: SpectralField, f_values: np.ndarray,
               basis: SphereBasis) -> FlowState:
    wv = basis.synthesize(w).values
    p3wv = basis.synthesize(apply_p3(w)).values
    e3w = _exp3(wv)
    T = GridField(basis.grid, (p3wv + 2.0) / e3w)
    volume = basis.integrate(e3w)
    alpha = TOTAL_CURVATURE / basis.integrate(f_values * e3w)
    total_T = basis.integrate(T.values * e3w)
    return FlowState(t, w, alpha, CurvatureBundle(T, alpha, volume, total_T),
                     wv, p3wv, e3w)


def _sigma(state: FlowState, sigma_mode: str) -> float:
    if sigma_mode == "max_exp":
        return 1.0 / state.e3w.min()
    if sigma_mode == "min_exp":
        return 1.0 / state.e3w.max()
    return 1.0


def step(state: FlowState, f_values: np.ndarray, basis: SphereBasis,
         dt: float, sigma_mode: str = "max_exp") -> FlowState:
    """One semi-implicit step followed by volume projection.

    The projection constant shifts grid values pointwise, so the state
    cache is built with two transforms instead of re-synthesizing the
    projected factor.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    w = state.w
    sigma = _sigma(state, sigma_mode)
    rhs = state.alpha * f_values - state.bundle.T.values
    N = basis.analyze(rhs, K_out=w.K).coeffs + sigma * apply_p3(w).coeffs
    mu = beckner_multipliers(w.K)[degrees_of(w.K)]
    w1 = SpectralField(w.K, (w.coeffs + dt * N) / (1.0 + dt * sigma * mu))

    wv = basis.synthesize(w1).values
    vol = basis.integrate(_exp3(wv))
    c = (1.0 / 3.0) * math.log(VOL_S3 / vol)
    w1.coeffs[0] += c * math.sqrt(VOL_S3)
    wv += c
    p3wv = basis.synthesize(apply_p3(w1)).values
    e3w = _exp3(wv)
    T = GridField(basis.grid, (p3wv + 2.0) / e3w)
    volume = basis.integrate(e3w)
    alpha = TOTAL_CURVATURE / basis.integrate(f_values * e3w)
    total_T = basis.integrate(T.values * e3w)
    return FlowState(state.t + dt, w1, alpha,
                     CurvatureBundle(T, alpha, volume, total_T), wv, p3wv, e3w)


def _energies(state: FlowState, f_values: np.ndarray,
              basis: SphereBasis) -> tuple[float, float]:
    E = boundary_energy(state.w)
    avg = basis.integrate(f_values * state.e3w) / VOL_S3
    return E, E - (16.0 * np.pi**2 / 3.0) * math.log(avg)


def _f2_g2(state: FlowState, f_values: np.ndarray,
           basis: SphereBasis) -> tuple[float, float]:
    r = state.alpha * f_values - state.bundle.T.values
    f2 = basis.integrate(r**2 * state.e3w)
    r_spec = basis.analyze(r, K_out=basis.K_design)
    mu = beckner_multipliers(r_spec.K)[degrees_of(r_spec.K)]
    return f2, float(mu @ (r_spec.coeffs**2))


def residual_moments(state: FlowState, f: SpectralField, basis: SphereBasis,
                     centering: CenteringResult | None = None
                     ) -> tuple[np.ndarray, np.ndarray]:
    """Moments b_i = int x_i (alpha f o Phi - T_h) ds_h in the centered frame.

    Phi is the centering map of ``normalize``; also returns the rescaled
    vector (sqrt(2)/pi) b.  Centering failure propagates.

    Both terms reduce to integrals over the original state on the fixed
    grid, so no pointwise re-evaluation of the pulled-back factor is
    needed: with B = Phi^{-1} and v the centered factor,

        int x_i (f o Phi) e^{3v} ds = int B_i f e^{3w} ds

    by substitution, and the curvature term collapses through
    T_h e^{3v} = P3 v + 2 and self-adjointness to 6 <x_i, v>, whose two
    pieces w o Phi and log lambda_Phi transform the same way.
    """
    from .mobius import dilation_apply, dilation_log_factor

    if centering is None:
        centering = normalize(state.w, basis, compute_centered=False)
    param = centering.param
    if param.rot is not None:
        raise NotImplementedError("moments for rotated charts are not needed")
    pts = basis.grid.points
    wq = basis.grid.weights
    Bz = dilation_apply(param.p, 1.0 / param.eps, pts)
    lam_b3 = np.exp(3.0 * dilation_log_factor(param.p, 1.0 / param.eps, pts))
    fv = basis.synthesize(f).values

    term_f = (wq * fv * state.e3w) @ Bz
    inner_v = (wq * state.w_values * lam_b3) @ Bz
    inner_v += (wq * dilation_log_factor(param.p, param.eps, pts)) @ pts
    b = state.alpha * term_f - 6.0 * inner_v
    return b, (math.sqrt(2.0) / math.pi) * b


def _record(state: FlowState, f_values: np.ndarray, basis: SphereBasis,
            dt_used: float, with_center: bool, f: SpectralField
            ) -> tuple[DiagnosticsRecord, float | None, np.ndarray | None]:
    E, E_f = _energies(state, f_values, basis)
    f2, g2 = _f2_g2(state, f_values, basis)
    S = (basis.grid.weights * state.e3w) @ basis.grid.points / VOL_S3
    b = p = eps = None
    if with_center:
        try:
            centering = normalize(state.w, basis, compute_centered=False)
            p, eps = centering.param.p, centering.param.eps
            b, _ = residual_moments(state, f, basis, centering)
        except CenteringError:
            b = p = eps = None  # diagnostics continue without (p, eps)
    rec = DiagnosticsRecord(state.t, state.alpha, E_f, E, state.bundle.volume,
                            f2, g2, b, S, p, eps, dt_used, state.bundle.total_T)
    return rec, eps, p


def run(w0: SpectralField, f: SpectralField, cfg: FlowConfig
        ) -> tuple[list[DiagnosticsRecord], FlowOutcome, FlowState]:
    """Integrate until convergence, concentration, or the time horizon.

    dt adapts to the Lyapunov structure: a step that increases E_f beyond
    ``cfg.slack`` is rejected and dt halves; after 20 consecutive accepted
    steps dt doubles back, capped at cfg.dt.  Returns the per-step
    diagnostics, the stopping outcome, and the final state.
    """
    basis = get_basis(cfg.K_design)
    validate_positive(f, basis)
    f_values = basis.synthesize(f).values

    w = project_volume(w0.truncated(cfg.K), basis)
    state = make_state(0.0, w, f_values, basis)
    records: list[DiagnosticsRecord] = []

    rec, eps_last, p_last = _record(state, f_values, basis, 0.0, True, f)
    records.append(rec)
    if rec.F2 < cfg.tol_converged:
        return records, FlowOutcome("converged", 0.0, p_last, eps_last), state

    dt = cfg.dt
    accepted_streak = 0
    n_accepted = 0
    E_f_prev = rec.E_f
    dt_min = cfg.dt * 2.0**-40

    while state.t < cfg.t_max:
        trial = step(state, f_values, basis, dt, cfg.sigma_mode)
        _, E_f_new = _energies(trial, f_values, basis)
        if E_f_new > E_f_prev + cfg.slack:
            dt *= 0.5
            accepted_streak = 0
            if dt < dt_min:
                raise RuntimeError(
                    f"energy descent unattainable at dt = {dt:.3e} (t = {state.t:.6g})")
            continue
        state = trial
        E_f_prev = E_f_new
        n_accepted += 1
        accepted_streak += 1
        if accepted_streak >= 20:
            dt = min(2.0 * dt, cfg.dt)
            accepted_streak = 0

        with_center = (n_accepted % cfg.n_diag == 0)
        rec, eps_new, p_new = _record(state, f_values, basis, dt, with_center, f)
        records.append(rec)
        if eps_new is not None:
            eps_last, p_last = eps_new, p_new

        if rec.F2 < cfg.tol_converged:
            return records, FlowOutcome("converged", state.t, p_last, eps_last), state
        if eps_last is not None and eps_last < cfg.eps_min:
            return records, FlowOutcome("concentrating", state.t, p_last, eps_last), state

    return records, FlowOutcome("horizon", state.t, p_last, eps_last), state
