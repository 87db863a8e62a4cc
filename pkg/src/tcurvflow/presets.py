"""Named prescribed-curvature functions and seeded random fields."""

from __future__ import annotations

import re

import numpy as np

from .curvature import validate_positive
from .harmonics import SpectralField, SphereBasis, coeff_count, degrees_of


def const2(basis: SphereBasis) -> SpectralField:
    """f = 2, the flat-ball background value."""
    return SpectralField.constant(2.0)


def axial(delta: float, basis: SphereBasis) -> SpectralField:
    """f = 2 + delta * x4: one max at the north pole, one min at the south.

    Positive for |delta| < 2; the Laplacian at the poles is -+ 3 delta.
    """
    f = basis.analyze(2.0 + delta * basis.grid.points[:, 3], K_out=1)
    validate_positive(f, basis)
    return f


def traceless_quadratic(coeffs: tuple[float, float, float, float],
                        basis: SphereBasis) -> SpectralField:
    """f = 2 + sum a_i x_i^2 with sum a_i = 0 (a pure degree-2 field).

    With distinct a_i the critical points are exactly +-e_i, with Morse
    index #{j : a_j < a_i} and Laplacian sign -sign(a_i) at +-e_i.
    """
    a = np.asarray(coeffs, dtype=float)
    if abs(a.sum()) > 1e-12:
        raise ValueError("coefficients must sum to zero")
    pts = basis.grid.points
    f = basis.analyze(2.0 + (pts**2) @ a, K_out=2)
    validate_positive(f, basis)
    return f


def random_band_limited(K: int, seed: int, amplitude: float = 1.0,
                        decay: float = 2.0) -> SpectralField:
    """Seeded random field with coefficients ~ N(0,1) / (1+k)^decay."""
    rng = np.random.default_rng(seed)
    c = rng.standard_normal(coeff_count(K))
    c *= amplitude / (1.0 + degrees_of(K).astype(float)) ** decay
    return SpectralField(K, c)


_AXIAL_RE = re.compile(r"^axial\((?P<delta>[-+0-9.eE]+)\)$")


def harmonic_list(entries: list[tuple[int, int, float]],
                  basis: SphereBasis) -> SpectralField:
    """Field from explicit (degree, intra-degree index, coefficient) triples."""
    from .harmonics import flat_index

    K = max(k for k, _, _ in entries)
    f = SpectralField.zeros(K)
    for k, ell, c in entries:
        if not 1 <= ell <= (k + 1) ** 2:
            raise ValueError(f"index ell={ell} out of range for degree {k}")
        f.coeffs[flat_index(k, ell)] += c
    validate_positive(f, basis)
    return f


def from_spec(spec: str, basis: SphereBasis) -> SpectralField:
    """Parse a prescribed-function spec.

    Accepts ``const2``, ``axial(<delta>)``, or an inline coefficient list
    ``harmonics:k,ell,c;k,ell,c;...`` (positivity validated on the grid).
    """
    if spec == "const2":
        return const2(basis)
    m = _AXIAL_RE.match(spec)
    if m:
        return axial(float(m.group("delta")), basis)
    if spec.startswith("harmonics:"):
        entries = []
        for item in spec[len("harmonics:"):].split(";"):
            parts = item.split(",")
            if len(parts) != 3:
                raise ValueError(f"expected k,ell,value triple, got {item!r}")
            entries.append((int(parts[0]), int(parts[1]), float(parts[2])))
        return harmonic_list(entries, basis)
    raise ValueError(
        f"unknown preset {spec!r} "
        "(expected const2, axial(<delta>), or harmonics:k,ell,c;...)")
