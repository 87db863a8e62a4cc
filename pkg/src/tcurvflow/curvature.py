"""Boundary curvature quantities, normalization constant, and energies.

For a conformal factor w on S^3 the evolving boundary metric is
``e^{2w} g_round`` and its third-order curvature in boundary form is

    T = e^{-3w} (P3 w + 2),

where P3 is the Beckner operator and 2 is the curvature of the flat-ball
background.  All quantities are computed on the round sphere; conformal
operators use the covariance law P3_g phi = e^{-3w} P3 phi, so no evolving
eigenbasis is ever constructed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .beckner import apply_p3, beckner_multipliers, p3_quadratic_form
from .harmonics import (
    GridField,
    SpectralField,
    SphereBasis,
    VOL_S3,
    degrees_of,
    gradient_inner,
)

TOTAL_CURVATURE = 4.0 * np.pi**2

# beyond this the conformal factor is unphysical for the flow and exp overflows
_EXP_CLAMP = 700.0


class PositivityError(ValueError):
    """A prescribed-curvature function must be strictly positive."""


class OverflowGuardError(FloatingPointError):
    """|3w| exceeded the overflow clamp; the state is unphysical."""


def _exp3(values: np.ndarray, sign: float = 1.0) -> np.ndarray:
    z = 3.0 * sign * values
    if np.abs(z).max() > _EXP_CLAMP:
        raise OverflowGuardError(
            f"|3w| = {np.abs(z).max():.3g} exceeds the clamp {_EXP_CLAMP}"
        )
    return np.exp(z)


def conformal_volume_element(w: SpectralField, basis: SphereBasis) -> np.ndarray:
    """e^{3w} at the grid nodes (the volume density of e^{2w} g_round)."""
    return _exp3(basis.synthesize(w).values)


def validate_positive(f: SpectralField, basis: SphereBasis) -> None:
    fv = basis.synthesize(f).values
    if fv.min() <= 0.0:
        raise PositivityError(
            f"prescribed function must be positive on the grid (min = {fv.min():.3g})"
        )


def t_curvature(w: SpectralField, basis: SphereBasis) -> GridField:
    """T-curvature of e^{2w} g_round at the grid nodes."""
    p3w = basis.synthesize(apply_p3(w)).values
    return GridField(basis.grid, _exp3(basis.synthesize(w).values, -1.0) * (p3w + 2.0))


def compute_alpha(w: SpectralField, f: SpectralField, basis: SphereBasis) -> float:
    """Normalization making the total prescribed curvature 4 pi^2."""
    fv = basis.synthesize(f).values
    if fv.min() <= 0.0:
        raise PositivityError(
            f"prescribed function must be positive on the grid (min = {fv.min():.3g})"
        )
    return TOTAL_CURVATURE / basis.integrate(fv * conformal_volume_element(w, basis))


def boundary_energy(w: SpectralField) -> float:
    """Conformal boundary energy E = 2 <w, P3 w> + 8 int w."""
    return 2.0 * p3_quadratic_form(w) + 8.0 * w.integral()


def descent_energy(w: SpectralField, f: SpectralField, basis: SphereBasis) -> float:
    """Lyapunov functional E_f = E - (16 pi^2 / 3) log avg(f e^{3w})."""
    fv = basis.synthesize(f).values
    if fv.min() <= 0.0:
        raise PositivityError(
            f"prescribed function must be positive on the grid (min = {fv.min():.3g})"
        )
    avg = basis.integrate(fv * conformal_volume_element(w, basis)) / VOL_S3
    return boundary_energy(w) - (16.0 * np.pi**2 / 3.0) * np.log(avg)


def ache_chang_gap(w: SpectralField, basis: SphereBasis) -> float:
    """Slack (3/16 pi^2) E[w] - log avg(e^{3w}) of the sharp inequality.

    Nonnegative for every w, zero exactly at the round factor w = 0 and at
    the conformal-pullback extremals.
    """
    avg = basis.integrate(conformal_volume_element(w, basis)) / VOL_S3
    return 3.0 / (16.0 * np.pi**2) * boundary_energy(w) - np.log(avg)


@dataclass
class CurvatureBundle:
    """Derived curvature data of a state: T, alpha, volume, total curvature."""

    T: GridField
    alpha: float
    volume: float
    total_T: float


def curvature_bundle(w: SpectralField, f: SpectralField,
                     basis: SphereBasis) -> CurvatureBundle:
    T = t_curvature(w, basis)
    e3w = conformal_volume_element(w, basis)
    return CurvatureBundle(
        T=T,
        alpha=compute_alpha(w, f, basis),
        volume=basis.integrate(e3w),
        total_T=basis.integrate(T.values * e3w),
    )


def residual_field(w: SpectralField, f: SpectralField, basis: SphereBasis,
                   alpha: float | None = None) -> np.ndarray:
    """Flow velocity alpha f - T at the grid nodes."""
    if alpha is None:
        alpha = compute_alpha(w, f, basis)
    return alpha * basis.synthesize(f).values - t_curvature(w, basis).values


def diagnostics_f2_g2(w: SpectralField, f: SpectralField, basis: SphereBasis,
                      alpha: float | None = None) -> tuple[float, float]:
    """Squared residual norm F2 and its P3-weighted form G2.

    F2 integrates |T - alpha f|^2 against the conformal measure e^{3w} ds.
    G2 uses the covariance P3_g r = e^{-3w} P3 r, under which the conformal
    weights cancel and G2 reduces to sum_k mu_k |r_k^ell|^2 over the
    round-basis expansion of the residual; this form is nonnegative by
    construction.
    """
    r = residual_field(w, f, basis, alpha)
    e3w = conformal_volume_element(w, basis)
    f2 = basis.integrate(r**2 * e3w)
    r_spec = basis.analyze(r, K_out=basis.K_design)
    g2 = float(beckner_multipliers(r_spec.K)[degrees_of(r_spec.K)] @ (r_spec.coeffs**2))
    return f2, g2


def kazdan_warner_residual(w: SpectralField, basis: SphereBasis) -> np.ndarray:
    """The four obstruction integrals int <grad T, grad x_i> e^{3w} ds.

    Vanishes identically for every conformal factor; the returned values
    measure the discretization error only.  The curvature T is not
    band-limited, so it is re-expanded up to one degree below the grid's
    design limit to keep the gradient products exactly integrable.
    """
    K_t = basis.K_design - 1
    T = basis.analyze(t_curvature(w, basis), K_out=K_t)
    e3w = conformal_volume_element(w, basis)
    out = np.empty(4)
    for i, xi in enumerate(basis.coordinate_fields()):
        g = gradient_inner(T, xi, basis)
        out[i] = basis.integrate(basis.synthesize(g).values * e3w)
    return out
