"""Conformal group action on S^3: charts, bubbles, pullbacks, centering.

The canonical one-parameter family is the chart dilation with fixed points
+-p: write y = stereographic image of x in the chart that sends p to the
origin and -p to infinity, dilate y -> s y, and map back.  Eliminating the
chart gives the closed form (c = <x, p>, x_perp = x - c p)

    D_{p,s}(x) = [ 2 s x_perp + ((1+c) - s^2 (1-c)) p ] / ((1+c) + s^2 (1-c)),

a conformal diffeomorphism of S^3 with scale factor

    lambda_{p,s}(x) = 2 s / ((1+s^2) + (1-s^2) c),

so that D_{p,s}^* g_round = lambda^2 g_round.  The family satisfies
D_{p,1} = id, D_{p,s1} o D_{p,s2} = D_{p,s1 s2} and D_{p,s}^{-1} = D_{p,1/s}.

A concentration parameter (p, eps) labels the expansion map B = D_{p,1/eps}
(mass piles up at p as eps -> 0).  Its pullback factor is the bubble

    w_{p,eps}(x) = log lambda_{p,1/eps}(x)
                 = log( 2 eps / ((1+eps^2) + (eps^2-1) <x,p>) ),

derived by substituting s = 1/eps above.  Tests validate this only through
the two oracle properties (volume 2 pi^2, curvature identically 2); the
formula itself is never asserted against.

Centering a field concentrated at (p, eps) applies the inverse map
C = D_{p,eps}, and ``pull_back(w, param)`` is defined with that map, so
``normalize`` returns the concentration coordinates of its input.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .beckner import h32_norm_sq
from .curvature import conformal_volume_element, t_curvature
from .harmonics import SpectralField, SphereBasis, VOL_S3

NORTH = np.array([0.0, 0.0, 0.0, 1.0])

_T_INVARIANCE_WARN = 1e-5


class ResolutionWarning(UserWarning):
    """Band limit too low to carry this conformal factor faithfully."""


class CenteringError(RuntimeError):
    """Newton centering failed; carries the best residual seen."""

    def __init__(self, message, best_residual, best_param):
        super().__init__(message)
        self.best_residual = best_residual
        self.best_param = best_param


class ChartSingularityError(ValueError):
    """Stereographic chart evaluated at the antipode of its base point."""


@dataclass
class MobiusParameter:
    """Concentration point p on S^3 and scale eps in (0, 1].

    eps = 1 with rot = None is the identity map.  ``rot``, when given, is a
    4x4 rotation composed before the dilation; the canonical maps never
    need it, it only pins a chart frame for callers that want one.
    """

    p: np.ndarray
    eps: float
    rot: np.ndarray | None = None

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float)
        if abs(np.linalg.norm(self.p) - 1.0) > 1e-12:
            raise ValueError("base point must be a unit vector")
        if not (0.0 < self.eps <= 1.0):
            raise ValueError(f"eps must lie in (0, 1], got {self.eps}")

    @classmethod
    def identity(cls) -> "MobiusParameter":
        return cls(NORTH.copy(), 1.0)

    def is_identity(self, tol: float = 0.0) -> bool:
        return abs(self.eps - 1.0) <= tol and self.rot is None


# -- primitive maps -----------------------------------------------------


def dilation_apply(p: np.ndarray, s: float, points: np.ndarray) -> np.ndarray:
    """Apply the chart dilation D_{p,s} to unit vectors (n, 4)."""
    c = points @ p
    perp = points - c[:, None] * p[None, :]
    num_p = (1.0 + c) - s * s * (1.0 - c)
    den = (1.0 + c) + s * s * (1.0 - c)
    out = (2.0 * s * perp + num_p[:, None] * p[None, :]) / den[:, None]
    # renormalize to kill accumulated roundoff; the map is exact on S^3
    out /= np.linalg.norm(out, axis=1)[:, None]
    return out


def dilation_log_factor(p: np.ndarray, s: float, points: np.ndarray) -> np.ndarray:
    """log of the conformal scale factor of D_{p,s} at the given points."""
    c = points @ p
    return np.log(2.0 * s) - np.log((1.0 + s * s) + (1.0 - s * s) * c)


def stereographic(p: np.ndarray):
    """Chart pair (to_chart, from_chart) centered at p.

    ``to_chart`` maps S^3 minus the antipode of p to R^3 (p -> 0);
    ``from_chart`` is its inverse.  Chart axes are the deterministic
    tangent frame of :func:`tangent_frame`.
    """
    p = np.asarray(p, dtype=float)
    frame = tangent_frame(p)  # (3, 4)

    def to_chart(points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        c = points @ p
        if np.any(1.0 + c < 1e-14):
            raise ChartSingularityError("chart evaluated at the antipode")
        tang = points @ frame.T
        return tang / (1.0 + c)[:, None]

    def from_chart(y: np.ndarray) -> np.ndarray:
        y = np.atleast_2d(y)
        r2 = (y * y).sum(axis=1)
        x = (2.0 * y) @ frame / (1.0 + r2)[:, None]
        return x + ((1.0 - r2) / (1.0 + r2))[:, None] * p[None, :]

    return to_chart, from_chart


def tangent_frame(p: np.ndarray) -> np.ndarray:
    """Deterministic orthonormal frame of the tangent space at p, shape (3, 4).

    Built by Gram-Schmidt from the three coordinate axes least aligned with
    p (ties broken by ascending axis index), so (p, eps) extraction is
    reproducible across runs, including axis-aligned p.
    """
    order = np.argsort(np.abs(p), kind="stable")
    frame = []
    for idx in order[:3]:
        v = np.zeros(4)
        v[idx] = 1.0
        v -= (v @ p) * p
        for u in frame:
            v -= (v @ u) * u
        v /= np.linalg.norm(v)
        frame.append(v)
    return np.array(frame)


def _centering_map(param: MobiusParameter):
    """(apply, log_factor) of the map pull_back uses for this parameter."""
    p, eps, rot = param.p, param.eps, param.rot

    def apply(points):
        if rot is not None:
            points = points @ rot.T
        return dilation_apply(p, eps, points)

    def log_factor(points):
        if rot is not None:
            points = points @ rot.T
        return dilation_log_factor(p, eps, points)

    return apply, log_factor


def expansion_apply(param: MobiusParameter, points: np.ndarray) -> np.ndarray:
    """The generator map B_{p,eps} = D_{p,1/eps} (inverse of the centering map)."""
    return dilation_apply(param.p, 1.0 / param.eps, points)


# -- bubbles and pullbacks ----------------------------------------------


def bubble(param: MobiusParameter, basis: SphereBasis,
           K: int | None = None) -> SpectralField:
    """Conformal factor of the round-metric pullback B_{p,eps}^* g_round.

    Closed form log(2 eps / ((1+eps^2) + (eps^2-1) <x,p>)), projected onto
    the band-limited basis.  A ResolutionWarning is raised when the
    projection degrades the curvature identity T = 2 beyond 1e-5 sup-norm,
    which happens when eps is small relative to the band limit.
    """
    if K is None:
        K = basis.K_design
    c = basis.grid.points @ param.p
    vals = np.log(2.0 * param.eps) - np.log(
        (1.0 + param.eps**2) + (param.eps**2 - 1.0) * c)
    w = basis.analyze(vals, K_out=K)
    t_err = np.abs(t_curvature(w, basis).values - 2.0).max()
    if t_err > _T_INVARIANCE_WARN:
        warnings.warn(
            f"bubble(eps={param.eps:g}) at band limit {K}: curvature "
            f"invariance degraded to {t_err:.2e}", ResolutionWarning,
            stacklevel=2)
    return w


def pull_back_by_map(w: SpectralField, apply_fn, log_factor_fn,
                     basis: SphereBasis, K: int | None = None) -> SpectralField:
    """Conformal factor of Phi^*(e^{2w} g_round) for an explicit map Phi."""
    if K is None:
        K = w.K
    pts = basis.grid.points
    vals = basis.evaluate_at(w, apply_fn(pts)) + log_factor_fn(pts)
    return basis.analyze(vals, K_out=K)


def pull_back(w: SpectralField, param: MobiusParameter,
              basis: SphereBasis, K: int | None = None) -> SpectralField:
    """Pull w back by the centering map D_{p,eps}.

    ``pull_back(bubble(q, e), (q, e))`` vanishes, and for the parameter
    returned by :func:`normalize` the result has zero center of mass.
    """
    if param.is_identity():
        return w.copy() if K is None else w.truncated(K)
    apply_fn, log_factor_fn = _centering_map(param)
    return pull_back_by_map(w, apply_fn, log_factor_fn, basis, K)


def center_of_mass(w: SpectralField, basis: SphereBasis) -> np.ndarray:
    """Average of the ambient coordinates against the conformal measure."""
    e3w = conformal_volume_element(w, basis)
    return (basis.grid.weights * e3w) @ basis.grid.points / VOL_S3


@dataclass
class CenteringResult:
    param: MobiusParameter
    centered: SpectralField
    residual: np.ndarray
    iterations: int

    def centered_norm(self) -> float:
        return float(np.sqrt(h32_norm_sq(self.centered)))


def normalize(w: SpectralField, basis: SphereBasis, tol: float = 1e-10,
              max_iter: int = 60, compute_centered: bool = True) -> CenteringResult:
    """Find (p, eps) whose pullback has (numerically) zero center of mass.

    The center of mass of the pulled-back factor has the change-of-variables
    form

        R(p, eps) = avg over S^3 of B_{p,eps}(z) e^{3 w(z)},

    so the Newton iteration only re-evaluates the closed-form expansion map
    on the fixed grid; the one expensive pullback happens after convergence.
    Newton uses a forward-difference Jacobian (step 1e-6) in the chart
    coordinates (3 tangent directions of p, 1 for eps) and step halving on
    residual increase.  Failure raises CenteringError with the best
    residual; eps landing above 1 is folded back by (p, eps) -> (-p, 1/eps).
    ``compute_centered=False`` skips the final pullback (the expensive part)
    when only the parameter is wanted.
    """
    e3w = conformal_volume_element(w, basis)
    mw = basis.grid.weights * e3w / VOL_S3

    def residual(p, eps):
        return dilation_apply(p, 1.0 / eps, basis.grid.points).T @ mw

    S = basis.grid.points.T @ mw
    s_norm = float(np.linalg.norm(S))
    if s_norm <= tol:
        param = MobiusParameter.identity()
        return CenteringResult(param, w.copy(), S, 0)

    p = S / s_norm
    eps = float(np.clip(1.0 - s_norm, 0.01, 1.0))
    h = 1e-6
    eps_lo, eps_hi = 1e-4, 2.0

    best = (np.inf, p, eps)
    r = residual(p, eps)
    for it in range(1, max_iter + 1):
        rn = float(np.linalg.norm(r))
        if rn < best[0]:
            best = (rn, p.copy(), eps)
        if rn <= tol:
            break
        frame = tangent_frame(p)
        J = np.empty((4, 4))
        for j in range(3):
            pj = p + h * frame[j]
            pj /= np.linalg.norm(pj)
            J[:, j] = (residual(pj, eps) - r) / h
        J[:, 3] = (residual(p, min(eps + h, eps_hi)) - r) / h
        try:
            step = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError:
            raise CenteringError(
                f"singular Newton system at iteration {it}", r,
                MobiusParameter(p, min(eps, 1.0))) from None
        damp = 1.0
        for _ in range(40):
            p_new = p + damp * (step[:3] @ frame)
            p_new /= np.linalg.norm(p_new)
            eps_new = float(np.clip(eps + damp * step[3], eps_lo, eps_hi))
            r_new = residual(p_new, eps_new)
            if np.linalg.norm(r_new) < rn:
                break
            damp *= 0.5
        else:
            raise CenteringError(
                f"no descent after {it} iterations (|r| = {rn:.3e})", r,
                MobiusParameter(p, min(eps, 1.0)))
        p, eps, r = p_new, eps_new, r_new
    else:
        raise CenteringError(
            f"no convergence after {max_iter} iterations "
            f"(best |r| = {best[0]:.3e})", r, MobiusParameter(best[1], min(best[2], 1.0)))

    if eps > 1.0:
        p, eps = -p, 1.0 / eps  # same map, so r is unchanged
    param = MobiusParameter(p, eps)
    centered = pull_back(w, param, basis) if compute_centered else SpectralField.zeros(0)
    # the reported residual is the solver's change-of-variables form of
    # center_of_mass(pull_back(w, param)): it sees the exact pullback, not
    # the band-limited projection stored in ``centered``
    return CenteringResult(param, centered, r, it)
