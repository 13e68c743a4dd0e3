import math
from fractions import Fraction

import numpy as np
import pytest

from dtn_lab import (
    AdmissibleDiskClass,
    DiskConductivity,
    DiskDtnSpectrum,
    DomainError,
    FourierBoundaryData,
    b_series,
    b_series_derivative,
    disk_spectrum,
    dtn_multiplier,
    h_coefficient,
    mixing_parameter,
    solve_disk,
)
from dtn_lab.disk import b_series_excess, h_coefficient_exact, interior_coefficients, mode_profile, series_sums
from dtn_lab.oracle import oracle_disk_solutions, oracle_disk_spectrum

from conftest import DISK_CLASS, random_disk

MODERATE_CLASS = AdmissibleDiskClass(a=0.5, eps0=1.0, M=4.0, N=3.0)  # b0 = 0.6


def implied_b(c, gamma, n):
    """Invert the multiplier fraction for B_n given a measured C_n."""
    t = gamma.a ** (2 * n)
    d = c - gamma.alpha0
    g = (2 * gamma.alpha0 * t + d * (1 + t)) / (2 * gamma.alpha0 * t - d * (1 - t))
    return g * gamma.alpha0 / gamma.alpha1


def direct_sums(n, b, tol=1e-17):
    """Plain loop over sum_{m>=2} b^(m-1) h_{m,n} and sum_{m>=2} m b^(m-1) h_{m,n}."""
    h = 1.0
    s0 = s1 = 0.0
    m = 2
    while True:
        h *= ((2 * m - 1) * n + m * (m - 1)) / (2 * m * n + m * m)
        w = h * b ** (m - 1)
        s0 += w
        s1 += m * w
        if m * b ** (m - 1) < tol:
            return s0, s1
        m += 1


# --- conductivities and classes ----------------------------------------------


@pytest.mark.parametrize("kwargs, field", [
    ({"alpha0": 1, "alpha1": 1, "alpha2": 0, "a": 1.2}, "a"),
    ({"alpha0": 1, "alpha1": 1, "alpha2": 0, "a": 0.0}, "a"),
    ({"alpha0": 0, "alpha1": 1, "alpha2": 0, "a": 0.5}, "alpha0"),
    ({"alpha0": 1, "alpha1": -1, "alpha2": 0, "a": 0.5}, "alpha1"),
    ({"alpha0": 1, "alpha1": 1, "alpha2": -0.1, "a": 0.5}, "alpha2"),
    ({"alpha0": math.nan, "alpha1": 1, "alpha2": 0, "a": 0.5}, "alpha0"),
])
def test_invalid_conductivity(kwargs, field):
    with pytest.raises(DomainError, match=field):
        DiskConductivity(**kwargs)


def test_profile_evaluation():
    g = DiskConductivity(2.0, 1.0, 3.0, 0.5)
    assert g(0.0) == pytest.approx(2.5)
    assert g(0.5) == 2.0
    np.testing.assert_allclose(g(np.array([0.25, 0.75])), [1.75, 2.0])


def test_class_constants():
    cls = DISK_CLASS
    assert cls.b0 == pytest.approx(2.5 / 2.6)
    assert cls.d0 == pytest.approx(1 + cls.b0 / (1 - cls.b0) ** 1.5)
    assert cls.d0 >= 1
    assert not cls.is_degenerate()
    assert AdmissibleDiskClass(0.5, 2.0, 2.0, 0.0).is_degenerate()
    with pytest.raises(DomainError):
        AdmissibleDiskClass(0.5, 3.0, 2.0, 1.0)
    with pytest.raises(DomainError):
        AdmissibleDiskClass(0.5, 1.0, 2.0, -1.0)


# --- mixing parameter and h coefficients -------------------------------------


def test_mixing_parameter():
    assert mixing_parameter(DiskConductivity(1, 1, 0, 0.5)) == 0.0
    assert mixing_parameter(DiskConductivity(1, 1, 1, 0.5)) == pytest.approx(1 / 3)
    cls = DISK_CLASS
    extreme = cls.make((1.0, cls.eps0, cls.N))
    assert mixing_parameter(extreme) == pytest.approx(cls.b0, rel=1e-15)


def test_h_coefficient_values():
    assert h_coefficient(2, 1) == pytest.approx(5 / 8, rel=1e-15)
    assert h_coefficient(2, 10**6) == pytest.approx(0.75, abs=1e-6)
    expected = Fraction(1)
    for j in range(2, 6):
        expected *= Fraction((2 * j - 1) * 3 + j * (j - 1), 2 * j * 3 + j * j)
    assert expected == Fraction(3619, 9600)
    assert h_coefficient_exact(5, 3) == expected
    assert h_coefficient(5, 3) == pytest.approx(float(expected), rel=1e-15)


def test_h_coefficient_range():
    for m in range(2, 40):
        for n in (1, 2, 7, 100, 10**5):
            assert 0 < h_coefficient(m, n) <= 1
    with pytest.raises(DomainError):
        h_coefficient(1, 3)
    with pytest.raises(DomainError):
        h_coefficient(3, 0)


# --- the series factor B_n ---------------------------------------------------


def test_b_series_at_zero_slope():
    assert b_series(7, 0.0) == 1.0
    assert b_series_derivative(5, 0.0) == pytest.approx(1 / 11, rel=1e-15)


def test_b_series_rejects_b_at_one():
    with pytest.raises(DomainError):
        b_series(3, 1.0)
    with pytest.raises(DomainError):
        b_series_derivative(3, 1.2)
    with pytest.raises(DomainError):
        b_series(3, 0.5, tol=0.0)


def test_b_series_scaled_excess_limit():
    n = 10**4
    assert (2 * n + 1) * (b_series(n, 0.5) - 1) == pytest.approx(1.0, abs=1e-2)


def test_b_series_matches_direct_summation():
    for n in (1, 3, 40, 1000):
        for b in (0.05, 0.4, 0.8, 0.95):
            s0, s1 = direct_sums(n, b)
            k = 2 * n + 1
            # B_n = 1 + b T1 / (k + n b T0) with T_i including the m = 1 term
            expected = 1 + b * (1 + s1) / (k + n * b * (1 + s0))
            assert b_series(n, b) == pytest.approx(expected, rel=1e-13)


def test_b_series_against_oracle_implied_value():
    # b = a alpha2 / (alpha1 + a alpha2) = 0.5
    g = DiskConductivity(2.0, 1.0, 2.0, 0.5)
    assert mixing_parameter(g) == pytest.approx(0.5)
    c1 = oracle_disk_spectrum([1], g)[0]
    assert b_series(1, 0.5) == pytest.approx(implied_b(c1, g, 1), rel=1e-7)


def test_b_series_vectorised():
    n = np.array([1, 5, 50, 500])
    np.testing.assert_allclose(b_series(n, 0.7), [b_series(int(k), 0.7) for k in n], rtol=1e-15)


def test_bounds_on_b_series(rng):
    cls = DISK_CLASS
    for _ in range(1000):
        n = int(rng.integers(1, 10**4 + 1))
        b = cls.b0 * rng.random()
        value = b_series(n, b)
        assert 1.0 <= value <= cls.d0


def test_b_series_excess_decays_like_one_over_n():
    n = 10**4
    for b in (0.1, 0.5, 0.9, DISK_CLASS.b0):
        assert abs(b_series(n, b) - 1) <= 10 * b / (1 - b) / (2 * n + 1)


@pytest.mark.parametrize("b", [0.1, 0.3, 0.5, MODERATE_CLASS.b0])
def test_scaled_excess_limit(b):
    n = 10**4
    assert abs((2 * n + 1) * b_series_excess(n, b) - b / (1 - b)) <= 1e-2


def test_scaled_excess_converges_at_large_b():
    # near b = 1 the O(1/n) correction carries (1 - b)^-k; check the rate instead
    b = DISK_CLASS.b0
    err = [abs((2 * n + 1) * b_series_excess(n, b) - b / (1 - b)) for n in (10**4, 10**5)]
    assert 8 < err[0] / err[1] < 12
    assert err[1] <= 1e-2


@pytest.mark.parametrize("b", [0.1, 0.3, 0.5, 0.7])
def test_series_limits(b):
    n = 10**4
    t0, t1, _ = series_sums(np.array([n]), b)
    s0, s1 = direct_sums(n, b)
    assert t0[0] - 1 == pytest.approx(s0, rel=1e-12)
    assert t1[0] - 1 == pytest.approx(s1, rel=1e-12)
    assert abs(s1 - ((1 - b) ** -1.5 - 1)) <= 1e-3
    assert abs(s0 - (2 / (1 - b + math.sqrt(1 - b)) - 1)) <= 1e-3


def test_series_limits_converge_at_large_b():
    b = 0.9
    errs = []
    for n in (10**4, 10**5):
        s0, s1 = direct_sums(n, b)
        errs.append((abs(s1 - ((1 - b) ** -1.5 - 1)), abs(s0 - (2 / (1 - b + math.sqrt(1 - b)) - 1))))
    assert 8 < errs[0][0] / errs[1][0] < 12
    assert 8 < errs[0][1] / errs[1][1] < 12


# --- derivative --------------------------------------------------------------


def test_derivative_against_finite_difference(rng):
    d = 1e-6
    for _ in range(200):
        n = int(rng.integers(1, 2000))
        b = 0.001 + 0.95 * rng.random()
        fd = (b_series(n, b + d) - b_series(n, b - d)) / (2 * d)
        assert b_series_derivative(n, b) == pytest.approx(fd, rel=1e-5)


def test_derivative_sandwich(rng):
    for cls in (DISK_CLASS, MODERATE_CLASS):
        A = cls.derivative_constant
        for _ in range(500):
            n = int(rng.integers(1, 10**4 + 1))
            b = cls.b0 * rng.random()
            k = 2 * n + 1
            value = b_series_derivative(n, b)
            assert (1 - cls.b0) / k <= value <= A / k


def test_derivative_sandwich_at_large_n():
    cls = AdmissibleDiskClass(a=0.5, eps0=1.0, M=2.0, N=6 / 7)  # b0 = 0.3
    assert cls.b0 == pytest.approx(0.3)
    for n in (10**3, 10**4, 10**5):
        scaled = (2 * n + 1) * b_series_derivative(n, 0.3)
        assert 1 - cls.b0 <= scaled <= cls.derivative_constant


def test_derivative_lower_bound_at_zero_slope():
    cls = AdmissibleDiskClass(a=0.5, eps0=1.0, M=1.0, N=0.0)
    assert cls.b0 == 0.0
    assert b_series_derivative(5, 0.0) >= (1 - cls.b0) / 11 * (1 - 1e-15)


# --- multipliers -------------------------------------------------------------


def test_homogeneous_multiplier_is_alpha0():
    g = DiskConductivity(1.7, 1.7, 0.0, 0.4)
    for n in (1, 2, 10, 1000):
        assert dtn_multiplier(n, g) == 1.7


def test_multiplier_tends_to_alpha0():
    g = DiskConductivity(2.0, 1.0, 3.0, 0.5)
    assert dtn_multiplier(2000, g) == 2.0
    spec = disk_spectrum(g, 64).multipliers
    assert np.all(np.diff(np.abs(spec - 2.0)) <= 0)


def test_multiplier_symmetry():
    g = DiskConductivity(2.0, 1.0, 3.0, 0.5)
    for n in (1, 4, 9):
        assert dtn_multiplier(-n, g) == dtn_multiplier(n, g)
    spec = disk_spectrum(g, 10)
    assert spec[-3] == spec[3]
    with pytest.raises(DomainError):
        dtn_multiplier(0, g)


def test_two_constant_closed_form():
    g = DiskConductivity(1.0, 3.0, 0.0, 0.5)
    for n in (1, 2, 5):
        t = 0.25**n
        expected = (1 - t + (1 + t) * 3) / (1 + t + (1 - t) * 3)
        assert dtn_multiplier(n, g) == pytest.approx(expected, rel=1e-15)


def test_multiplier_matches_oracle_reference_case():
    g = DiskConductivity(2.0, 1.0, 3.0, 0.5)
    closed = disk_spectrum(g, 16).multipliers
    oracle = oracle_disk_spectrum(range(1, 17), g)
    np.testing.assert_allclose(closed, oracle, rtol=1e-6)


def test_multiplier_matches_oracle_random(rng):
    for _ in range(5):
        g = random_disk(rng)
        closed = disk_spectrum(g, 32).multipliers
        oracle = oracle_disk_spectrum(range(1, 33), g)
        np.testing.assert_allclose(closed, oracle, rtol=1e-6)


def test_spectrum_sandwich(rng):
    lo, hi = DISK_CLASS.multiplier_bounds
    for _ in range(50):
        c = disk_spectrum(random_disk(rng), 128).multipliers
        assert np.all(c > 0)
        assert np.all((lo <= c) & (c <= hi))


def test_spectrum_container():
    with pytest.raises(DomainError):
        DiskDtnSpectrum([])
    with pytest.raises(DomainError):
        DiskDtnSpectrum([1.0, math.inf])
    spec = DiskDtnSpectrum([1.0, 2.0])
    assert spec.n_modes == 2
    with pytest.raises(IndexError):
        spec[3]
    with pytest.raises(DomainError):
        disk_spectrum(DiskConductivity(1, 1, 0, 0.5), 0)


# --- interior solution -------------------------------------------------------


def test_interior_coefficients_without_slope():
    c = interior_coefficients(3, DiskConductivity(2.0, 1.0, 0.0, 0.5), 8)
    np.testing.assert_array_equal(c, [1, 0, 0, 0, 0, 0])


def test_interior_coefficients_recursion():
    g = DiskConductivity(2.0, 1.0, 3.0, 0.5)
    q = g.alpha2 / (g.alpha1 + g.a * g.alpha2)
    c = interior_coefficients(1, g, 5)
    assert c[1] / c[0] == pytest.approx(q / 3, rel=1e-15)
    n = 4
    c = interior_coefficients(n, g, n + 20)
    for m in range(1, c.size):
        factor = q * ((2 * m - 1) * n + m * (m - 1)) / (2 * m * n + m * m)
        assert c[m] / c[m - 1] == pytest.approx(factor, rel=1e-14)
    with pytest.raises(DomainError):
        interior_coefficients(4, g, 3)


def test_interior_series_matches_oracle_at_interface():
    g = DiskConductivity(2.0, 1.0, 3.0, 0.5)
    sols = oracle_disk_solutions([1, 5, 12], g)
    for sol in sols:
        # partial sums of sum_k a_k a^k settle once the tail is geometric
        c = interior_coefficients(sol.n, g, sol.n + 400)
        partial = np.cumsum(c * g.a ** np.arange(c.size))
        assert abs(partial[-1] - partial[-50]) <= 1e-15 * partial[-1]
        # the oracle carries u(a) from the shooting solve with u(1) = 1
        u_inner, _ = mode_profile(sol.n, g, g.a * (1 - 1e-14))
        u_outer, _ = mode_profile(sol.n, g, g.a)
        assert u_inner == pytest.approx(sol.u_interface, rel=1e-6)
        assert u_outer == pytest.approx(sol.u_interface, rel=1e-6)


def test_mode_profile_transmission():
    g = DiskConductivity(2.0, 1.0, 3.0, 0.5)
    for n in (1, 3, 10):
        for d in (1e-4, 1e-6, 1e-8):
            u_in, du_in = mode_profile(n, g, g.a - d)
            u_out, du_out = mode_profile(n, g, g.a + d)
            assert abs(u_in - u_out) <= 50 * n * d * abs(u_out)
        u_in, du_in = mode_profile(n, g, g.a * (1 - 1e-15))
        u_out, du_out = mode_profile(n, g, g.a)
        assert g(g.a * (1 - 1e-15)) * du_in == pytest.approx(g.alpha0 * du_out, rel=1e-10)
        u1, du1 = mode_profile(n, g, 1.0)
        assert u1 == pytest.approx(1.0)
        # alpha0 u'(1) / n is the multiplier
        assert g.alpha0 * du1 / n == pytest.approx(dtn_multiplier(n, g), rel=1e-12)


def test_solve_disk_constant_data():
    g = DiskConductivity(2.0, 1.0, 3.0, 0.5)
    for r in (0.0, 0.2, 0.5, 0.9):
        assert solve_disk(g, {0: 1.3}, r, 0.7) == pytest.approx(1.3)


def test_solve_disk_homogeneous_first_mode():
    g = DiskConductivity(1.5, 1.5, 0.0, 0.5)
    for r in (0.1, 0.45, 0.5, 0.8):
        for theta in (0.0, 1.0, 2.5):
            expected = r * np.exp(1j * theta)
            assert solve_disk(g, {1: 1.0}, r, theta) == pytest.approx(expected, abs=1e-14)


def test_solve_disk_real_data_and_continuity():
    g = DiskConductivity(2.0, 1.0, 3.0, 0.5)
    f = FourierBoundaryData({1: 0.5, -1: 0.5, 3: 0.25j, -3: -0.25j})
    for theta in (0.3, 1.9):
        value = solve_disk(g, f, 0.7, theta)
        assert isinstance(value, float)
        inner = solve_disk(g, f, g.a - 1e-9, theta)
        outer = solve_disk(g, f, g.a + 1e-9, theta)
        assert inner == pytest.approx(outer, abs=1e-8)
    with pytest.raises(DomainError):
        solve_disk(g, f, 1.0, 0.0)


def test_dtn_action_on_boundary_data():
    g = DiskConductivity(2.0, 1.0, 3.0, 0.5)
    spec = disk_spectrum(g, 8)
    out = spec.apply(FourierBoundaryData({0: 1.0, -2: 1.0, 3: 2.0}))
    assert out.coefficients[0] == 0
    assert out.coefficients[-2] == pytest.approx(2 * spec[2])
    assert out.coefficients[3] == pytest.approx(6 * spec[3])
