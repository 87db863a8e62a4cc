"""Spectral multiplier operators on S^3.

The third-order Beckner operator ``(-Lap + 1)^{1/2} (-Lap)`` is diagonal in
the spherical-harmonic basis.  With lambda_k = k(k+2) its degree-k
multiplier is

    mu_k = (lambda_k + 1)^{1/2} lambda_k = k(k+1)(k+2),

an exact integer identity (lambda_k + 1 = (k+1)^2), so the multiplier table
is built in integer arithmetic and never as a dense matrix.  The same
numbers are the eigenvalues of the associated boundary operator on the
flat 4-ball, with multiplicity (k+1)^2.
"""

from __future__ import annotations

import math

import numpy as np

from .harmonics import SpectralField, degrees_of, laplace_eigenvalue


def boundary_eigenvalue(k: int) -> float:
    """k-th distinct eigenvalue k(k+1)(k+2) of the boundary operator."""
    if k < 0:
        raise ValueError("degree must be >= 0")
    return float(k * (k + 1) * (k + 2))


def beckner_multipliers(K: int) -> np.ndarray:
    """Multiplier table mu_k for k = 0..K (a MultiplierSpec)."""
    return np.array([k * (k + 1) * (k + 2) for k in range(K + 1)], dtype=float)


def _per_coeff(table: np.ndarray, u: SpectralField) -> np.ndarray:
    return table[degrees_of(u.K)]


def apply_p3(u: SpectralField) -> SpectralField:
    """Beckner operator: coefficient-wise scaling by mu_k; kills constants."""
    return SpectralField(u.K, _per_coeff(beckner_multipliers(u.K), u) * u.coeffs)


def apply_p3_sqrt(u: SpectralField) -> SpectralField:
    """Square root of the Beckner operator, multiplier sqrt(mu_k)."""
    table = np.sqrt(beckner_multipliers(u.K))
    return SpectralField(u.K, _per_coeff(table, u) * u.coeffs)


def p3_quadratic_form(u: SpectralField) -> float:
    """<P3 u, u> = sum mu_k |u_k^ell|^2, nonnegative, zero iff constant."""
    return float(_per_coeff(beckner_multipliers(u.K), u) @ (u.coeffs**2))


def h32_norm_sq(u: SpectralField) -> float:
    """Full H^{3/2} norm: ||u||_L2^2 + sum mu_k |u_k^ell|^2."""
    return u.l2_norm_sq() + p3_quadratic_form(u)


def multiplier_identity_max_error(K: int = 64) -> float:
    """Max relative gap between (lambda_k+1)^{1/2} lambda_k and k(k+1)(k+2)."""
    worst = 0.0
    for k in range(K + 1):
        lam = laplace_eigenvalue(k)
        direct = math.sqrt(lam + 1.0) * lam
        integer = boundary_eigenvalue(k)
        if integer > 0:
            worst = max(worst, abs(direct - integer) / integer)
    return worst
