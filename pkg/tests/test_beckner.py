import numpy as np

from tcurvflow.beckner import (
    apply_p3,
    apply_p3_sqrt,
    beckner_multipliers,
    boundary_eigenvalue,
    h32_norm_sq,
    multiplier_identity_max_error,
    p3_quadratic_form,
)
from tcurvflow.harmonics import SpectralField, coeff_count, flat_index

from conftest import random_field


def unit_harmonic(k, ell=1, K=None):
    u = SpectralField.zeros(K if K is not None else k)
    u.coeffs[flat_index(k, ell)] = 1.0
    return u


def test_spectrum_values():
    assert boundary_eigenvalue(0) == 0.0
    assert boundary_eigenvalue(1) == 6.0
    assert boundary_eigenvalue(2) == 24.0
    assert boundary_eigenvalue(16) == 16 * 17 * 18


def test_multiplier_integer_identity():
    assert multiplier_identity_max_error(64) == 0.0


def test_constants_annihilated():
    u = SpectralField.constant(5.0)
    assert np.all(apply_p3(u).coeffs == 0.0)
    assert np.all(apply_p3_sqrt(u).coeffs == 0.0)


def test_degree_scaling():
    u1 = unit_harmonic(1)
    assert apply_p3(u1).coeffs[flat_index(1, 1)] == 6.0
    u2 = unit_harmonic(2, ell=3)
    assert apply_p3(u2).coeffs[flat_index(2, 3)] == 24.0
    assert abs(apply_p3_sqrt(u1).coeffs[flat_index(1, 1)] - np.sqrt(6.0)) < 1e-15


def test_sqrt_composes_to_p3():
    u = random_field(12, seed=5)
    twice = apply_p3_sqrt(apply_p3_sqrt(u))
    assert np.abs(twice.coeffs - apply_p3(u).coeffs).max() < 1e-12


def test_self_adjoint_and_nonnegative():
    a = random_field(10, seed=11)
    b = random_field(10, seed=12)
    lhs = apply_p3(a).coeffs @ b.coeffs
    rhs = a.coeffs @ apply_p3(b).coeffs
    assert abs(lhs - rhs) < 1e-12 * max(1.0, abs(lhs))
    assert p3_quadratic_form(a) >= 0.0
    assert p3_quadratic_form(SpectralField.constant(3.0)) == 0.0


def test_h32_norm():
    assert h32_norm_sq(SpectralField.zeros(3)) == 0.0
    # seminorm vanishes on constants: c * Y_0 has norm c^2
    c = SpectralField(0, np.array([2.0]))
    assert abs(h32_norm_sq(c) - 4.0) < 1e-13
    assert abs(h32_norm_sq(unit_harmonic(1)) - 7.0) < 1e-13


def test_multiplier_table_shape():
    t = beckner_multipliers(5)
    assert t.shape == (6,)
    assert list(t[:3]) == [0.0, 6.0, 24.0]
    assert coeff_count(5) == 91
