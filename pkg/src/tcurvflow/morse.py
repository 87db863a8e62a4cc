"""Morse-theoretic existence gate for the prescribed-curvature problem.

Counts the critical points of f that carry negative Laplacian, solves the
linear feasibility system tying the counts to a cell complex, and reports
the two existence criteria: infeasibility of the system, and the degree
sum differing from -1.  The combinatorics accept Morse data directly so
they can be tested independently of the numerics; ``extract_morse_data``
produces that data from a band-limited f.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .harmonics import SpectralField, SphereBasis
from .mobius import tangent_frame


class HypothesisViolationError(ValueError):
    """f has degenerate critical structure; the gate's hypotheses fail."""

    def __init__(self, message, offenders=None):
        super().__init__(message)
        self.offenders = offenders or []


@dataclass
class MorseDatum:
    morse_index: int
    laplacian_negative: bool
    value: float
    location: np.ndarray | None = None

    def __post_init__(self):
        if self.morse_index not in (0, 1, 2, 3):
            raise ValueError("morse_index must be 0..3")
        if self.value <= 0:
            raise ValueError("critical value must be positive")


@dataclass
class MorseReport:
    m: tuple[int, int, int, int]
    feasible: bool
    witness: tuple[int, int, int, int] | None
    degree_sum: int
    theorem_existence: bool
    corollary_existence: bool


def compute_counts(data: list[MorseDatum]) -> tuple[int, int, int, int]:
    """m_i = #{critical points with Lap f < 0 and Morse index 3 - i}."""
    m = [0, 0, 0, 0]
    for d in data:
        if d.laplacian_negative:
            m[3 - d.morse_index] += 1
    return tuple(m)


def solve_system(m: tuple[int, int, int, int]
                 ) -> tuple[bool, tuple[int, int, int, int] | None]:
    """Triangular solve of m_0 = 1 + k_0, m_i = k_{i-1} + k_i, k_3 = 0.

    The system is triangular, so the candidate is unique; it is feasible
    iff every k_i is nonnegative and the last equation closes with k_3 = 0.
    """
    k0 = m[0] - 1
    k1 = m[1] - k0
    k2 = m[2] - k1
    feasible = k0 >= 0 and k1 >= 0 and k2 >= 0 and m[3] == k2
    return (True, (k0, k1, k2, 0)) if feasible else (False, None)


def degree_sum(data: list[MorseDatum]) -> int:
    """Sum of (-1)^{morse index} over points with negative Laplacian."""
    return sum((-1) ** d.morse_index for d in data if d.laplacian_negative)


def morse_polynomial_check(m: tuple[int, int, int, int],
                           k: tuple[int, int, int, int]) -> bool:
    """Coefficient-wise identity sum t^i m_i = 1 + (1+t) sum t^i k_i."""
    rhs = [1 + k[0], k[0] + k[1], k[1] + k[2], k[2] + k[3], k[3]]
    return list(m) + [0] == rhs


def gate_report(data: list[MorseDatum]) -> MorseReport:
    m = compute_counts(data)
    feasible, witness = solve_system(m)
    ds = degree_sum(data)
    return MorseReport(
        m=m,
        feasible=feasible,
        witness=witness,
        degree_sum=ds,
        theorem_existence=not feasible,
        corollary_existence=ds != -1,
    )


# -- critical point extraction ------------------------------------------


def _newton_refine(vf, p, max_iter=40, tol=1e-12, fd_step=1e-5):
    """Drive the tangential gradient to zero from a grid seed.

    Returns (point, converged, stalled_critical): the last flag marks seeds
    where Newton cannot proceed (singular Hessian) while the gradient is
    already small, the signature of a degenerate critical manifold.
    """
    for _ in range(max_iter):
        g_amb = vf.gradient(p)
        frame = tangent_frame(p)
        g = frame @ g_amb
        gn = float(np.linalg.norm(g))
        if gn < tol:
            return p, True, False
        H = _tangent_hessian(vf, p, frame, fd_step)
        try:
            delta = np.linalg.solve(H, -g)
        except np.linalg.LinAlgError:
            return p, False, gn < 1e-6
        if not np.all(np.isfinite(delta)) or np.linalg.norm(delta) > 1e6:
            return p, False, gn < 1e-6
        if np.linalg.norm(delta) > 0.5:
            delta *= 0.5 / np.linalg.norm(delta)
        p = p + delta @ frame
        p /= np.linalg.norm(p)
    gn = float(np.linalg.norm(tangent_frame(p) @ vf.gradient(p)))
    return p, gn < 1e-8, gn < 1e-6


def _tangent_hessian(vf, p, frame, h):
    """Second differences of f along geodesics; intrinsic at critical points."""
    def fexp(v):
        r = np.linalg.norm(v)
        if r == 0:
            x = p
        else:
            x = np.cos(r) * p + np.sin(r) * (v / r)
        return vf.value(x / np.linalg.norm(x))

    f0 = fexp(np.zeros(4))
    H = np.empty((3, 3))
    for i in range(3):
        for j in range(i, 3):
            if i == j:
                H[i, i] = (fexp(h * frame[i]) - 2 * f0 + fexp(-h * frame[i])) / h**2
            else:
                val = (fexp(h * (frame[i] + frame[j]))
                       - fexp(h * (frame[i] - frame[j]))
                       - fexp(h * (frame[j] - frame[i]))
                       + fexp(-h * (frame[i] + frame[j]))) / (4 * h**2)
                H[i, j] = H[j, i] = val
    return H


def _basin_seeds(grad_sq: np.ndarray, basis: SphereBasis) -> np.ndarray:
    """Grid nodes where |grad f|^2 is a local minimum over axis neighbors.

    The quadrature nodes crowd near the coordinate poles, so a global
    quantile would flood the seed set with pole nodes; one seed per basin
    avoids that bias.
    """
    g = grad_sq.reshape(basis.grid.shape)
    mask = np.ones_like(g, dtype=bool)
    for axis in (0, 1):  # chi, theta: non-periodic
        lo = [slice(None)] * 3
        hi = [slice(None)] * 3
        lo[axis], hi[axis] = slice(None, -1), slice(1, None)
        le, he = tuple(lo), tuple(hi)
        mask[he] &= g[he] <= g[le]
        mask[le] &= g[le] <= g[he]
    mask &= g <= np.roll(g, 1, axis=2)   # phi: periodic
    mask &= g <= np.roll(g, -1, axis=2)
    return basis.grid.points[mask.ravel()]


def extract_morse_data(f: SpectralField, basis: SphereBasis,
                       cond_threshold: float = 1e6,
                       lap_threshold: float = 1e-8,
                       dedupe_dist: float = 1e-4) -> list[MorseDatum]:
    """Locate and classify the critical points of a band-limited f.

    Local minima of |grad f|^2 over the grid seed a Newton refinement of
    the tangential gradient; refined points are deduplicated, classified
    by the signature of the intrinsic Hessian, and tagged with the sign of
    the spectral Laplacian.  Degenerate structure (Hessian singular-value
    ratio above ``cond_threshold`` or |Lap f| below ``lap_threshold * ||f||``)
    raises HypothesisViolationError listing the offenders.
    """
    from .shadow import ShadowVelocityField

    vf = ShadowVelocityField(f, basis)
    grad_sq = sum(basis.synthesize(g).values**2 for g in vf.grad_components)
    scale = float(np.sqrt(basis.integrate(basis.synthesize(f).values**2)))

    if grad_sq.max() < (lap_threshold * scale) ** 2:
        raise HypothesisViolationError(
            "gradient vanishes everywhere: no nondegenerate critical structure")

    seeds = _basin_seeds(grad_sq, basis)

    found: list[np.ndarray] = []
    suspicious: list[np.ndarray] = []
    for seed in seeds:
        p, ok, stalled = _newton_refine(vf, seed.copy())
        if not ok:
            if stalled:
                # near-critical but Newton-singular: classify it anyway so a
                # degenerate critical manifold is flagged, not dropped
                suspicious.append(p)
            continue
        if all(float(np.arccos(np.clip(p @ q, -1, 1))) > dedupe_dist for q in found):
            found.append(p)
    for p in suspicious:
        if all(float(np.arccos(np.clip(p @ q, -1, 1))) > dedupe_dist for q in found):
            found.append(p)

    data: list[MorseDatum] = []
    offenders = []
    for p in found:
        frame = tangent_frame(p)
        H = _tangent_hessian(vf, p, frame, h=1e-4)
        sv = np.linalg.svd(H, compute_uv=False)
        lap = vf.laplacian(p)
        if sv[0] / max(sv[-1], 1e-300) > cond_threshold:
            offenders.append((p, "degenerate Hessian"))
            continue
        if abs(lap) < lap_threshold * scale:
            offenders.append((p, "vanishing Laplacian"))
            continue
        index = int((np.linalg.eigvalsh(H) < 0).sum())
        data.append(MorseDatum(index, lap < 0, vf.value(p), p))
    if offenders:
        raise HypothesisViolationError(
            f"{len(offenders)} degenerate critical point(s) found", offenders)
    if not distinct_critical_values(data):
        # a proof convenience upstream, not a gate input: warn, don't fail
        warnings.warn("critical values are not all distinct",
                      stacklevel=2)
    return data


def distinct_critical_values(data: list[MorseDatum],
                             rel_tol: float = 1e-8) -> bool:
    vals = sorted(d.value for d in data)
    scale = max((abs(v) for v in vals), default=1.0)
    return all(b - a > rel_tol * scale for a, b in zip(vals, vals[1:]))
