"""Acceptance battery: one test per criterion, with its measured values.

Each test prints a single PASS/FAIL line (run pytest with -s to see them
alongside the assertions).  Criteria and tolerances mirror
``tcurvflow.verify``; the heavy flow-based criteria are marked slow-ish but
run in minutes at the default sizes.
"""

import pytest

from tcurvflow import verify


def _check(result):
    line = "PASS" if result.passed else "FAIL"
    print(f"[{line}] {result.name} ({result.elapsed:.2f}s): {result.measured}")
    if result.note:
        print(f"       note: {result.note}")
    assert result.passed, f"{result.name}: {result.measured} {result.note}"


def test_criterion_1_spectrum():
    _check(verify.criterion_spectrum())


def test_criterion_2_conservation():
    _check(verify.criterion_conservation())


def test_criterion_3_energy_descent():
    _check(verify.criterion_energy_descent())


def test_criterion_4_exponential_convergence():
    _check(verify.criterion_exponential_convergence())


def test_criterion_5_bubble_invariants():
    _check(verify.criterion_bubbles())


def test_criterion_6_kazdan_warner():
    _check(verify.criterion_kazdan_warner())


def test_criterion_7_ache_chang():
    _check(verify.criterion_ache_chang())


def test_criterion_8_moment_expansion():
    _check(verify.criterion_moment_expansion())


def test_criterion_9_morse_gate():
    _check(verify.criterion_morse_gate())


def test_criterion_10_concentration():
    _check(verify.criterion_concentration())


def test_negative_control_fault_injection():
    # the battery must be able to fail: a perturbed multiplier table is caught
    assert not verify.criterion_spectrum(fault=True).passed
