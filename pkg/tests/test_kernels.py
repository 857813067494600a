import math
import random
from fractions import Fraction

import numpy as np
import pytest

from tsbapc import kernels


def frac_phi(t, p1, p2):
    a, b = Fraction(1), Fraction(p1)
    if t == 0:
        return a
    for _ in range(t - 1):
        a, b = b, Fraction(p1) * b + Fraction(p2) * a
    return b


def frac_gamma(m, n, r1, d1, r2, d2):
    r1, d1, r2, d2 = map(Fraction, (r1, d1, r2, d2))
    return sum(
        math.comb(m, j) * math.comb(n, k) * r1 ** (m - j) * d1 ** j * r2 ** (n - k) * d2 ** k / (j + k + 1)
        for j in range(m + 1)
        for k in range(n + 1)
    )


def test_backend_selection_reports_a_loaded_module():
    assert kernels.BACKEND in kernels.available_backends()
    with pytest.raises(ValueError):
        kernels.load_backend("fortran")


@pytest.mark.parametrize("t", [0, 1, 2, 5, 17, 40, 60])
def test_phi_sum_matches_exact_recursion(backend, t):
    rng = random.Random(t)
    for _ in range(20):
        p1, p2 = rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5)
        exact = frac_phi(t, p1, p2)
        got = backend.phi_sum(t, p1, p2)
        assert abs(Fraction(got) - exact) <= Fraction(1, 10**12) * max(abs(exact), Fraction(1, 10**300))


def test_phi_small_cases(backend):
    assert backend.phi_sum(0, 0.3, 0.7) == 1.0
    assert backend.phi_sum(1, 0.3, 0.7) == 0.3
    assert backend.phi_sum(2, 0.3, 0.7) == pytest.approx(0.3**2 + 0.7, abs=1e-16)
    assert backend.phi_recursion(0, 0.3, 0.7) == 1.0


def test_phi_recursion_agrees_with_sum(backend):
    for t in range(0, 61):
        a = backend.phi_sum(t, 1.1, -0.7)
        b = backend.phi_recursion(t, 1.1, -0.7)
        assert a == pytest.approx(b, rel=1e-13, abs=1e-300)


@pytest.mark.parametrize("m,n", [(0, 0), (1, 0), (0, 3), (5, 7), (20, 11)])
def test_gamma_sum_matches_exact_rationals(backend, m, n):
    args = (0.9, -0.35, -0.6, 0.2)
    exact = frac_gamma(m, n, *args)
    got = backend.gamma_sum(m, n, *args)
    assert abs(Fraction(got) - exact) <= Fraction(1, 10**14) * max(abs(exact), Fraction(1, 10**300))


def test_gamma_sum_is_the_path_integral(backend):
    x, w = np.polynomial.legendre.leggauss(40)
    h, w = 0.5 * (x + 1), 0.5 * w
    r1, d1, r2, d2 = 0.4, 0.5, -0.8, 0.3
    quad = float(np.sum(w * (r1 + h * d1) ** 6 * (r2 + h * d2) ** 9))
    assert backend.gamma_sum(6, 9, r1, d1, r2, d2) == pytest.approx(quad, rel=1e-13)


def test_ar2_ig_sums_zero_before_third_index(backend):
    for t in (0, 1, 2):
        assert backend.ar2_ig_sums(t, 1.0, -0.5, 0.3, 0.1, 1.0, 2.0) == (0.0, 0.0)


def test_ar2_ig_sums_add_up_to_value_change(backend):
    r1, r2, d1, d2, y1, y2 = 1.2, -0.6, 0.25, -0.15, 0.7, -1.1
    for t in (3, 4, 10, 25, 40, 60):
        ig1, ig2 = backend.ar2_ig_sums(t, r1, r2, d1, d2, y1, y2)
        after = backend.ar2_value_grad(t, r1 + d1, r2 + d2, y1, y2)[0]
        before = backend.ar2_value_grad(t, r1, r2, y1, y2)[0]
        assert ig1 + ig2 == pytest.approx(after - before, rel=1e-10, abs=1e-12)


def test_ar2_value_grad_matches_finite_differences(backend):
    p1, p2, y1, y2, t = 0.9, -0.4, 1.0, 0.5, 12
    eps = 1e-6
    _, g1, g2 = backend.ar2_value_grad(t, p1, p2, y1, y2)
    f = lambda a, b: backend.ar2_value_grad(t, a, b, y1, y2)[0]
    assert g1 == pytest.approx((f(p1 + eps, p2) - f(p1 - eps, p2)) / (2 * eps), rel=1e-7)
    assert g2 == pytest.approx((f(p1, p2 + eps) - f(p1, p2 - eps)) / (2 * eps), rel=1e-7)
    with pytest.raises(ValueError):
        backend.ar2_value_grad(0, p1, p2, y1, y2)


def test_nearest_index_ties_go_left(backend):
    pos = [1.0, 3.0, 7.0]
    assert backend.nearest_index(pos, 2.0) == 0
    assert backend.nearest_index(pos, 5.0) == 1
    assert backend.nearest_index(pos, 5.1) == 2
    assert backend.nearest_index(pos, -4.0) == 0
    assert backend.nearest_index(pos, 40.0) == 2
    with pytest.raises(ValueError):
        backend.nearest_index([], 1.0)


@pytest.mark.skipif(len(kernels.available_backends()) < 2, reason="compiled extension not built")
def test_backends_are_bit_identical():
    c, p = kernels.load_backend("cython"), kernels.load_backend("python")
    rng = random.Random(7)
    for _ in range(30):
        t = rng.randint(0, 45)
        a = [rng.uniform(-1.3, 1.3) for _ in range(6)]
        assert c.phi_sum(t, a[0], a[1]) == p.phi_sum(t, a[0], a[1])
        assert c.phi_recursion(t, a[0], a[1]) == p.phi_recursion(t, a[0], a[1])
        assert c.gamma_sum(t % 9, t % 7, *a[:4]) == p.gamma_sum(t % 9, t % 7, *a[:4])
        assert c.ar2_ig_sums(t, *a[:4], a[4], a[5]) == p.ar2_ig_sums(t, *a[:4], a[4], a[5])
        assert c.ar2_value_grad(t + 1, *a[:4]) == p.ar2_value_grad(t + 1, *a[:4])
