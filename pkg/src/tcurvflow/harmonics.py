"""Hyperspherical harmonic analysis on the unit 3-sphere.

Everything downstream represents functions on S^3 in a real orthonormal
basis of spherical harmonics ``Y_k^ell`` of degree k, normalized so that
``||Y_k^ell||_{L2(S^3)} = 1``.  The basis is the separated product

    Y_{k,l,m}(chi, theta, phi) = G_{k,l}(chi) * S_{l,m}(theta, phi),

with hyperspherical coordinates

    x1 = sin(chi) sin(theta) cos(phi)
    x2 = sin(chi) sin(theta) sin(phi)
    x3 = sin(chi) cos(theta)
    x4 = cos(chi),

measure ``sin^2(chi) sin(theta) dchi dtheta dphi``, Gegenbauer chi-profiles
``G_{k,l} ~ sin^l(chi) C_{k-l}^{(l+1)}(cos chi)``, and real 2-sphere
harmonics ``S_{l,m}``.  Degree k carries (k+1)^2 basis functions
(l = 0..k, m = -l..l) and is a -Laplace eigenspace with eigenvalue
k(k+2).

Quadrature is a tensor-product Gauss rule (second-kind Chebyshev in
cos(chi), Gauss-Legendre in cos(theta), uniform in phi) that integrates
products of basis functions exactly up to total degree 2*K_design, so
analyze/synthesize round-trip band-limited data to machine precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import gammaln, roots_legendre

VOL_S3 = 2.0 * np.pi**2

_UNIT_TOL = 1e-12


class ResolutionError(ValueError):
    """A grid is too coarse for the requested band limit."""


def laplace_eigenvalue(k: int) -> int:
    """Eigenvalue of -Laplace on degree-k spherical harmonics of S^3."""
    return k * (k + 2)


def degree_count(k: int) -> int:
    """Number of basis functions of degree k."""
    return (k + 1) ** 2


def degree_offset(k: int) -> int:
    """Flat index of the first degree-k coefficient."""
    return k * (k + 1) * (2 * k + 1) // 6


def coeff_count(K: int) -> int:
    """Total number of coefficients for band limit K."""
    return degree_offset(K + 1)


def unpack_ell(ell: int) -> tuple[int, int]:
    """Map the intra-degree index ell in [1, (k+1)^2] to (l, m)."""
    pos = ell - 1
    l = math.isqrt(pos)
    return l, pos - l * l - l


def pack_ell(l: int, m: int) -> int:
    """Inverse of :func:`unpack_ell`."""
    return l * l + l + m + 1


def flat_index(k: int, ell: int) -> int:
    return degree_offset(k) + ell - 1


@lru_cache(maxsize=32)
def _index_arrays(K: int):
    """Per-coefficient (k, l, m) arrays in canonical flat order."""
    n = coeff_count(K)
    ks = np.empty(n, dtype=np.intp)
    ls = np.empty(n, dtype=np.intp)
    ms = np.empty(n, dtype=np.intp)
    i = 0
    for k in range(K + 1):
        for l in range(k + 1):
            for m in range(-l, l + 1):
                ks[i], ls[i], ms[i] = k, l, m
                i += 1
    return ks, ls, ms


def degrees_of(K: int) -> np.ndarray:
    """Degree k of each flat coefficient, shape (coeff_count(K),)."""
    return _index_arrays(K)[0].astype(np.int64)


@dataclass
class SpectralField:
    """Band-limited real function on S^3 given by its coefficient table.

    Coefficients are stored flat in canonical order: degrees ascending,
    within a degree ell = 1..(k+1)^2 enumerating (l, m) with l ascending
    and m = -l..l.
    """

    K: int
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (coeff_count(self.K),):
            raise ValueError(
                f"expected {coeff_count(self.K)} coefficients for K={self.K}, "
                f"got {self.coeffs.shape}"
            )

    @classmethod
    def zeros(cls, K: int) -> "SpectralField":
        return cls(K, np.zeros(coeff_count(K)))

    @classmethod
    def constant(cls, value: float, K: int = 0) -> "SpectralField":
        f = cls.zeros(K)
        f.coeffs[0] = value * math.sqrt(VOL_S3)
        return f

    def copy(self) -> "SpectralField":
        return SpectralField(self.K, self.coeffs.copy())

    def truncated(self, K_out: int) -> "SpectralField":
        """Truncate or zero-pad to band limit K_out."""
        out = SpectralField.zeros(K_out)
        n = min(self.coeffs.size, out.coeffs.size)
        out.coeffs[:n] = self.coeffs[:n]
        return out

    def l2_norm_sq(self) -> float:
        """Squared L2(S^3) norm, by Parseval."""
        return float(self.coeffs @ self.coeffs)

    def mean(self) -> float:
        """Average over S^3."""
        return float(self.coeffs[0]) / math.sqrt(VOL_S3)

    def integral(self) -> float:
        return float(self.coeffs[0]) * math.sqrt(VOL_S3)

    def __add__(self, other: "SpectralField") -> "SpectralField":
        K = max(self.K, other.K)
        return SpectralField(K, self.truncated(K).coeffs + other.truncated(K).coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        K = max(self.K, other.K)
        return SpectralField(K, self.truncated(K).coeffs - other.truncated(K).coeffs)

    def __mul__(self, scalar: float) -> "SpectralField":
        return SpectralField(self.K, self.coeffs * scalar)

    __rmul__ = __mul__


@dataclass
class QuadratureGrid:
    """Tensor-product quadrature on S^3, exact for degree <= 2*K_design."""

    K_design: int
    chi: np.ndarray
    theta: np.ndarray
    phi: np.ndarray
    w_chi: np.ndarray
    w_theta: np.ndarray
    w_phi: float
    points: np.ndarray = field(repr=False)   # (n_nodes, 4) unit vectors
    weights: np.ndarray = field(repr=False)  # (n_nodes,)

    @property
    def resolution(self) -> tuple[int, int, int]:
        return (self.chi.size, self.theta.size, self.phi.size)

    @property
    def n_nodes(self) -> int:
        return self.weights.size

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.resolution


@dataclass
class GridField:
    """Function values at the quadrature nodes of a grid."""

    grid: QuadratureGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n_nodes,):
            raise ValueError("value count does not match grid node count")


def build_grid(K_design: int) -> QuadratureGrid:
    """Quadrature grid integrating harmonic products up to degree 2*K_design.

    chi nodes are Gauss nodes for the weight sin^2(chi) (second-kind
    Chebyshev after x = cos chi), theta nodes Gauss-Legendre in cos(theta),
    phi nodes uniform.
    """
    if K_design < 0:
        raise ValueError("K_design must be >= 0")
    n_chi = K_design + 1
    n_theta = K_design + 1
    n_phi = 2 * K_design + 1

    j = np.arange(1, n_chi + 1)
    chi = j * np.pi / (n_chi + 1)
    w_chi = np.pi / (n_chi + 1) * np.sin(chi) ** 2

    t, w_t = roots_legendre(n_theta)
    order = np.argsort(-t)  # theta ascending
    theta = np.arccos(t[order])
    w_theta = w_t[order]

    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    w_phi = 2.0 * np.pi / n_phi

    sc, cc = np.sin(chi), np.cos(chi)
    st, ct = np.sin(theta), np.cos(theta)
    sp, cp = np.sin(phi), np.cos(phi)
    x1 = sc[:, None, None] * st[None, :, None] * cp[None, None, :]
    x2 = sc[:, None, None] * st[None, :, None] * sp[None, None, :]
    x3 = (sc[:, None] * ct[None, :])[:, :, None] * np.ones(n_phi)
    x4 = cc[:, None, None] * np.ones((1, n_theta, n_phi))
    points = np.stack([x.ravel() for x in (x1, x2, x3, x4)], axis=1)
    weights = (w_chi[:, None, None] * w_theta[None, :, None]
               * np.full(n_phi, w_phi)[None, None, :]).ravel()

    return QuadratureGrid(K_design, chi, theta, phi, w_chi, w_theta, w_phi,
                          points, weights)


def _gegenbauer_table(alpha: float, n_max: int, x: np.ndarray) -> np.ndarray:
    """C_n^(alpha)(x) for n = 0..n_max via the three-term recurrence."""
    out = np.empty((n_max + 1,) + x.shape)
    out[0] = 1.0
    if n_max >= 1:
        out[1] = 2.0 * alpha * x
    for n in range(2, n_max + 1):
        out[n] = (2.0 * x * (n + alpha - 1.0) * out[n - 1]
                  - (n + 2.0 * alpha - 2.0) * out[n - 2]) / n
    return out


@lru_cache(maxsize=32)
def _chi_norm_table(K: int) -> np.ndarray:
    """Normalization N[k, l] of sin^l(chi) C_{k-l}^{(l+1)}(cos chi), l <= k.

    From Gegenbauer orthogonality, in log form to stay finite at large
    degree; entries with l > k are zero.
    """
    k = np.arange(K + 1, dtype=float)[:, None]
    l = np.arange(K + 1, dtype=float)[None, :]
    with np.errstate(invalid="ignore"):
        log_nrm = -0.5 * (
            math.log(math.pi)
            - (2 * l + 1) * math.log(2.0)
            + gammaln(k + l + 2)
            - gammaln(k - l + 1)
            - np.log(k + 1)
            - 2.0 * gammaln(l + 1)
        )
    out = np.exp(log_nrm)
    out[np.arange(K + 1)[:, None] < np.arange(K + 1)[None, :]] = 0.0
    return out


def _chi_profiles(K: int, chi: np.ndarray) -> np.ndarray:
    """Normalized profiles G[k, l, :] with int_0^pi G^2 sin^2(chi) dchi = 1."""
    x = np.cos(chi)
    s = np.sin(chi)
    norms = _chi_norm_table(K)
    G = np.zeros((K + 1, K + 1, chi.size))
    s_l = np.ones_like(s)
    for l in range(K + 1):
        C = _gegenbauer_table(l + 1.0, K - l, x)
        G[l:, l, :] = (norms[l:, l, None] * s_l[None, :]) * C
        s_l = s_l * s
    return G


def _legendre_table(L: int, cos_t: np.ndarray) -> np.ndarray:
    """Normalized associated Legendre P[l, m, :] for 0 <= m <= l <= L.

    Normalization is such that S_{l,0} = P[l,0] and
    S_{l,+-m} = sqrt(2) P[l,m] {cos,sin}(m phi) are orthonormal on S^2.
    """
    sin_t = np.sqrt(np.clip(1.0 - cos_t**2, 0.0, None))
    P = np.zeros((L + 1, L + 1, cos_t.size))
    P[0, 0] = 1.0 / math.sqrt(4.0 * math.pi)
    for m in range(1, L + 1):
        P[m, m] = -math.sqrt((2 * m + 1) / (2.0 * m)) * sin_t * P[m - 1, m - 1]
    for m in range(L):
        P[m + 1, m] = math.sqrt(2 * m + 3.0) * cos_t * P[m, m]
    for m in range(L + 1):
        for l in range(m + 2, L + 1):
            a = math.sqrt((4.0 * l * l - 1.0) / (l * l - m * m))
            b = math.sqrt(((l - 1.0) ** 2 - m * m) / (4.0 * (l - 1.0) ** 2 - 1.0))
            P[l, m] = a * (cos_t * P[l - 1, m] - b * P[l - 2, m])
    return P


def _azimuthal_table(K: int, phi: np.ndarray) -> np.ndarray:
    """F[K+m, :] = {1, sqrt2 cos(m phi), sqrt2 sin(|m| phi)} for |m| <= K."""
    F = np.empty((2 * K + 1, phi.size))
    F[K] = 1.0
    r2 = math.sqrt(2.0)
    for m in range(1, K + 1):
        F[K + m] = r2 * np.cos(m * phi)
        F[K - m] = r2 * np.sin(m * phi)
    return F


class SphereBasis:
    """Precomputed basis tables and transforms on a quadrature grid.

    A basis built for ``K_design`` supports exact analysis/synthesis of any
    band limit K <= K_design and exact quadrature of products of total
    degree <= 2*K_design.
    """

    def __init__(self, K_design: int):
        self.K_design = K_design
        self.grid = build_grid(K_design)
        K = K_design
        self._G = _chi_profiles(K, self.grid.chi)              # (K+1, K+1, Nchi)
        P = _legendre_table(K, np.cos(self.grid.theta))        # (K+1, K+1, Ntheta)
        # duplicate m and -m rows so theta factors index by K+m directly
        m_abs = np.abs(np.arange(-K, K + 1))
        self._P = P[:, m_abs, :]                               # (K+1, 2K+1, Ntheta)
        self._F = _azimuthal_table(K, self.grid.phi)           # (2K+1, Nphi)
        # weighted copies for the adjoint (analysis) pass
        Gw = self._G * self.grid.w_chi[None, None, :]
        Pw = self._P * self.grid.w_theta[None, None, :]
        self._Fw = self._F * self.grid.w_phi
        # contiguous per-batch layouts: matmul on transposed views falls off
        # the BLAS fast path, so the batched operands are materialized once
        self._G_t = np.ascontiguousarray(self._G.transpose(1, 0, 2))   # (l, k, a)
        self._P_t = np.ascontiguousarray(self._P.transpose(1, 0, 2))   # (m, l, b)
        self._Pw_t = np.ascontiguousarray(Pw.transpose(1, 2, 0))       # (m, b, l)
        self._Gw_t = np.ascontiguousarray(Gw.transpose(1, 2, 0))       # (l, a, k)

    # -- coefficient cube packing -------------------------------------

    def _cube(self, u: SpectralField) -> np.ndarray:
        if u.K > self.K_design:
            raise ResolutionError(
                f"field band limit {u.K} exceeds grid design limit {self.K_design}"
            )
        K = self.K_design
        ks, ls, ms = _index_arrays(u.K)
        cube = np.zeros((K + 1, K + 1, 2 * K + 1))
        cube[ks, ls, K + ms] = u.coeffs
        return cube

    def _uncube(self, cube: np.ndarray, K_out: int) -> SpectralField:
        K = self.K_design
        ks, ls, ms = _index_arrays(K_out)
        return SpectralField(K_out, cube[ks, ls, K + ms].copy())

    # -- transforms ----------------------------------------------------

    def synthesize(self, u: SpectralField) -> GridField:
        """Evaluate the expansion at all grid nodes.

        The three axis contractions are staged as batched matrix products
        so they run in BLAS.
        """
        cube = self._cube(u)
        # (l, m, k) @ (l, k, a) -> (l, m, a)
        t1 = np.matmul(np.ascontiguousarray(cube.transpose(1, 2, 0)), self._G_t)
        # (m, a, l) @ (m, l, b) -> (m, a, b)
        t2 = np.matmul(np.ascontiguousarray(t1.transpose(1, 2, 0)), self._P_t)
        # (a*b, m) @ (m, c) -> (a, b, c)
        n_a, n_b, n_c = self.grid.shape
        v = np.ascontiguousarray(t2.transpose(1, 2, 0)).reshape(n_a * n_b, -1) @ self._F
        return GridField(self.grid, v.reshape(-1))

    def analyze(self, v: GridField | np.ndarray, K_out: int | None = None) -> SpectralField:
        """Project grid values onto the basis: u_k^ell = sum w * v * Y_k^ell."""
        if K_out is None:
            K_out = self.K_design
        if K_out > self.K_design:
            raise ResolutionError(
                f"requested band limit {K_out} exceeds grid design limit {self.K_design}"
            )
        values = v.values if isinstance(v, GridField) else np.asarray(v, dtype=float)
        n_a, n_b, n_c = self.grid.shape
        # (a*b, c) @ (c, m) -> (m, a, b)
        u1 = values.reshape(n_a * n_b, n_c) @ self._Fw.T
        u1 = np.ascontiguousarray(u1.reshape(n_a, n_b, -1).transpose(2, 0, 1))
        # (m, a, b) @ (m, b, l) -> (m, a, l) -> (l, m, a)
        u2 = np.matmul(u1, self._Pw_t)
        u2 = np.ascontiguousarray(u2.transpose(2, 0, 1))
        # (l, m, a) @ (l, a, k) -> (l, m, k) -> (k, l, m)
        cube = np.matmul(u2, self._Gw_t).transpose(2, 0, 1)
        return self._uncube(np.ascontiguousarray(cube), K_out)

    def integrate(self, values: GridField | np.ndarray) -> float:
        v = values.values if isinstance(values, GridField) else values
        return float(self.grid.weights @ v)

    # -- pointwise evaluation ------------------------------------------

    def evaluate_at(self, u: SpectralField, points: np.ndarray,
                    chunk: int = 16384) -> np.ndarray:
        """Exact basis-sum evaluation at arbitrary unit vectors in R^4.

        Points must satisfy | |x| - 1 | <= 1e-12.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[1] != 4:
            raise ValueError("points must have shape (n, 4)")
        r = np.linalg.norm(pts, axis=1)
        if np.any(np.abs(r - 1.0) > _UNIT_TOL):
            worst = float(np.abs(r - 1.0).max())
            raise ValueError(f"points must be unit vectors (worst |r-1| = {worst:.3e})")

        K = u.K
        ks, ls, ms = _index_arrays(K)
        cube = np.zeros((K + 1, K + 1, 2 * K + 1))
        cube[ks, ls, K + ms] = u.coeffs
        cube_l = np.ascontiguousarray(cube.transpose(1, 2, 0))  # (l, m, k)

        out = np.empty(pts.shape[0])
        m_abs = np.abs(np.arange(-K, K + 1))
        for start in range(0, pts.shape[0], chunk):
            p = pts[start:start + chunk]
            x4 = np.clip(p[:, 3], -1.0, 1.0)
            chi = np.arccos(x4)
            s_chi = np.linalg.norm(p[:, :3], axis=1)
            ct = np.where(s_chi > 0, p[:, 2] / np.where(s_chi > 0, s_chi, 1.0), 1.0)
            ct = np.clip(ct, -1.0, 1.0)
            phi = np.arctan2(p[:, 1], p[:, 0])

            Gp = np.ascontiguousarray(
                _chi_profiles(K, chi).transpose(1, 0, 2))  # (l, k, n)
            Pp = _legendre_table(K, ct)[:, m_abs, :]       # (l, 2K+1, n)
            Fp = _azimuthal_table(K, phi)                  # (2K+1, n)

            e1 = np.matmul(cube_l, Gp)                     # (l, 2K+1, n)
            acc = (e1 * Pp).sum(axis=0)
            out[start:start + chunk] = (acc * Fp).sum(axis=0)
        return out

    # -- coordinate functions ------------------------------------------

    def coordinate_fields(self) -> list[SpectralField]:
        """The four ambient coordinate restrictions x_i as degree-1 fields."""
        return [self.analyze(self.grid.points[:, i], K_out=1) for i in range(4)]


@lru_cache(maxsize=8)
def get_basis(K_design: int) -> SphereBasis:
    """Shared basis cache; construction cost grows with K_design."""
    return SphereBasis(K_design)


def apply_laplacian(u: SpectralField) -> SpectralField:
    """Laplace-Beltrami operator as the spectral multiplier -k(k+2)."""
    lam = np.array([laplace_eigenvalue(k) for k in range(u.K + 1)], dtype=float)
    return SpectralField(u.K, -lam[degrees_of(u.K)] * u.coeffs)


def gradient_inner(a: SpectralField, b: SpectralField, basis: SphereBasis,
                   K_out: int | None = None) -> SpectralField:
    """Spectral expansion of the pointwise inner product <grad a, grad b>.

    Uses 2 <grad a, grad b> = Lap(ab) - a Lap(b) - b Lap(a); all products
    are formed on the grid and re-analyzed, which is exact as long as
    a.K + b.K <= basis.K_design.
    """
    K_ab = a.K + b.K
    if K_ab > basis.K_design:
        raise ResolutionError(
            f"product band limit {K_ab} exceeds grid design limit {basis.K_design}"
        )
    va = basis.synthesize(a).values
    vb = basis.synthesize(b).values
    v_lap_a = basis.synthesize(apply_laplacian(a)).values
    v_lap_b = basis.synthesize(apply_laplacian(b)).values
    ab = basis.analyze(va * vb, K_out=K_ab)
    lap_ab = apply_laplacian(ab)
    cross = basis.analyze(va * v_lap_b + vb * v_lap_a, K_out=K_ab)
    g = SpectralField(K_ab, 0.5 * (lap_ab.coeffs - cross.coeffs))
    return g if K_out is None else g.truncated(K_out)
