import itertools

import numpy as np
import pytest

from tcurvflow.harmonics import get_basis
from tcurvflow.morse import (
    HypothesisViolationError,
    MorseDatum,
    compute_counts,
    degree_sum,
    extract_morse_data,
    gate_report,
    morse_polynomial_check,
    solve_system,
)
from tcurvflow.presets import axial, const2, traceless_quadratic


def datum(index, lap_neg=True, value=2.0):
    return MorseDatum(index, lap_neg, value)


class TestCounts:
    def test_single_maximum(self):
        assert compute_counts([datum(3)]) == (1, 0, 0, 0)

    def test_mixed(self):
        data = [datum(3), datum(3), datum(2)]
        assert compute_counts(data) == (2, 1, 0, 0)

    def test_positive_laplacian_filtered(self):
        data = [datum(3, lap_neg=False), datum(0, lap_neg=False)]
        assert compute_counts(data) == (0, 0, 0, 0)


class TestSolveSystem:
    def test_round_like(self):
        assert solve_system((1, 0, 0, 0)) == (True, (0, 0, 0, 0))

    def test_two_maxima_infeasible(self):
        assert solve_system((2, 0, 0, 0)) == (False, None)

    def test_two_maxima_one_saddle(self):
        assert solve_system((2, 1, 0, 0)) == (True, (1, 0, 0, 0))

    def test_brute_force_agreement(self):
        # every m in [0,5]^4 against exhaustive search over candidate k
        for m in itertools.product(range(6), repeat=4):
            feasible, witness = solve_system(m)
            kmax = max(m) + 1
            brute = None
            for k in itertools.product(range(kmax + 1), repeat=4):
                if (m[0] == 1 + k[0] and m[1] == k[0] + k[1]
                        and m[2] == k[1] + k[2] and m[3] == k[2] + k[3]
                        and k[3] == 0):
                    brute = k
                    break
            assert feasible == (brute is not None)
            if feasible:
                assert witness == brute

    def test_polynomial_identity_iff_solution(self):
        for m in itertools.product(range(6), repeat=4):
            feasible, witness = solve_system(m)
            kmax = max(m) + 1
            any_k = any(
                morse_polynomial_check(m, k)
                for k in itertools.product(range(kmax + 1), repeat=4))
            assert any_k == feasible
            if feasible:
                assert morse_polynomial_check(m, witness)


class TestDegreeSum:
    def test_single_maximum(self):
        assert degree_sum([datum(3)]) == -1

    def test_two_maxima(self):
        assert degree_sum([datum(3), datum(3)]) == -2

    def test_two_maxima_one_saddle(self):
        assert degree_sum([datum(3), datum(3), datum(2)]) == -1

    def test_corollary_implies_theorem(self):
        # degree sum != -1 forces infeasibility (t = -1 in the identity),
        # checked across the full enumeration by building synthetic data
        for m in itertools.product(range(4), repeat=4):
            data = []
            for i, cnt in enumerate(m):
                data.extend([datum(3 - i)] * cnt)
            rep = gate_report(data)
            if rep.corollary_existence:
                assert rep.theorem_existence


class TestPolynomialCheck:
    def test_round_case(self):
        assert morse_polynomial_check((1, 0, 0, 0), (0, 0, 0, 0))

    def test_expansion(self):
        # 2 + t = 1 + (1+t) * 1
        assert morse_polynomial_check((2, 1, 0, 0), (1, 0, 0, 0))

    def test_no_witness_for_infeasible(self):
        for k in itertools.product(range(4), repeat=4):
            assert not morse_polynomial_check((2, 0, 0, 0), k)


class TestExtract:
    def test_constant_violates_hypotheses(self, basis16):
        with pytest.raises(HypothesisViolationError):
            extract_morse_data(const2(basis16), basis16)

    def test_degenerate_manifold_flagged(self, basis16):
        # zonal quadratic: the whole equator 2-sphere is critical, which
        # violates nondegeneracy and must be reported, not dropped
        f = traceless_quadratic((-0.1, -0.1, -0.1, 0.3), basis16)
        with pytest.raises(HypothesisViolationError):
            extract_morse_data(f, basis16)

    def test_distinct_value_helper(self):
        from tcurvflow.morse import distinct_critical_values
        a = [datum(3, value=2.5), datum(0, value=2.2)]
        assert distinct_critical_values(a)
        b = [datum(3, value=2.5), datum(3, value=2.5)]
        assert not distinct_critical_values(b)

    def test_axial(self, basis16):
        # two critical points: max at the north pole (index 3, Lap < 0),
        # min at the south pole (index 0, Lap > 0)
        data = extract_morse_data(axial(0.3, basis16), basis16)
        assert len(data) == 2
        data.sort(key=lambda d: d.value)
        lo, hi = data
        assert hi.morse_index == 3 and hi.laplacian_negative
        assert np.abs(hi.location - np.array([0, 0, 0, 1.0])).max() < 1e-8
        assert lo.morse_index == 0 and not lo.laplacian_negative
        assert compute_counts(data) == (1, 0, 0, 0)

    def test_traceless_quadratic_enumeration(self, basis16):
        # hand enumeration: critical points are +-e_i; Morse index of e_i is
        # #{j: a_j < a_i}; Laplacian sign is -sign(a_i)
        a = (0.3, 0.1, -0.15, -0.25)
        data = extract_morse_data(traceless_quadratic(a, basis16), basis16)
        assert len(data) == 8
        for d in data:
            i = int(np.argmax(np.abs(d.location)))
            assert abs(abs(d.location[i]) - 1.0) < 1e-8
            expected_index = sum(1 for aj in a if aj < a[i])
            assert d.morse_index == expected_index
            assert d.laplacian_negative == (a[i] > 0)
        rep = gate_report(data)
        assert rep.m == (2, 2, 0, 0)
        assert not rep.feasible
        assert rep.theorem_existence
        assert rep.degree_sum == 0
        assert rep.corollary_existence

    def test_rotation_equivariance(self, basis16):
        # swapping two axes permutes locations, preserves indices and signs
        a = (0.3, 0.1, -0.15, -0.25)
        pts = basis16.grid.points
        f1 = basis16.analyze(2.0 + (pts**2) @ np.array(a), K_out=2)
        perm = [1, 0, 2, 3]
        f2 = basis16.analyze(2.0 + (pts[:, perm] ** 2) @ np.array(a), K_out=2)
        d1 = extract_morse_data(f1, basis16)
        d2 = extract_morse_data(f2, basis16)

        def signature(data, axis_order):
            out = []
            for d in data:
                i = int(np.argmax(np.abs(d.location)))
                out.append((axis_order[i], d.morse_index, d.laplacian_negative))
            return sorted(out)

        assert signature(d1, [0, 1, 2, 3]) == signature(d2, perm)


def test_report_roundtrip():
    data = [datum(3), datum(3)]
    rep = gate_report(data)
    assert rep.m == (2, 0, 0, 0)
    assert rep.witness is None
    assert rep.degree_sum == -2
    assert rep.theorem_existence and rep.corollary_existence
