import math

import numpy as np
import pytest

import oracles
from ultraheat.filtration import Filtration
from ultraheat.funcspace import (fourier, indicator_ball, inverse_fourier, lizorkin_project,
                                 random_function, sphere_norms)
from ultraheat.sadic import sample_uniform_sphere
from ultraheat.spectral import (CertifiedValue, Eigenpair, HeatSolution, OnSphere, SymbolAlpha,
                                ToleranceUnreachable, apply_dalpha, duhamel_solve, evolve,
                                gamma_bound, heat, heat_kernel, kernel_estimates_check, kernel_mass,
                                power, power_heat, radial_convolution_at, radial_integral, spectrum)

F23 = Filtration.sadic([2, 3], level_cap=256)
S23 = SymbolAlpha(1.0, F23)


def sphere_sum(f, w, j, N, depth=120):
    """Direct sum of w(r_n) times the sphere character integral, far past the tolerance."""
    total = 0.0
    for n in range(N, N - depth, -1):
        rn, rm = f.radius_float(n), f.radius_float(n - 1)
        if j is None or j <= -n:
            total += w(rn) * (rn - rm)
        elif j == 1 - n:
            total += w(rn) * -rm
    return total


@pytest.mark.parametrize("w", [heat(1.0, 1.0), heat(0.1, 0.5), power(1.0), power_heat(2.0, 2.0)])
@pytest.mark.parametrize("j", [None, -3, 0, 2])
@pytest.mark.parametrize("N", [-2, 0, 3])
def test_radial_integral_matches_direct_sum(w, j, N):
    got = radial_integral(F23, w, None if j is None else OnSphere(j), N)
    ref = sphere_sum(F23, w, j, N)
    assert abs(got.value - ref) <= got.tail_bound + 1e-14


@pytest.mark.parametrize("j", [None, -4, 0, 3])
def test_certified_truncation_is_honest(j):
    x = None if j is None else OnSphere(j)
    coarse = heat_kernel(S23, x, 0.5, eps=1e-6)
    fine = heat_kernel(S23, x, 0.5, eps=1e-7)
    assert abs(fine.value - coarse.value) <= coarse.tail_bound
    assert fine.tail_bound <= 1e-7 and coarse.tail_bound <= 1e-6


def test_upper_integral_of_power_diverges():
    with pytest.raises(ValueError):
        radial_integral(F23, power(1.0), None, None)


@pytest.mark.parametrize("alpha,t", [(1.0, 1.0), (2.0, 1.0), (1.0, 10.0)])
def test_kernel_against_riemann_oracle(alpha, t):
    rng = np.random.default_rng(0)
    sym = SymbolAlpha(alpha, F23)
    for j in (-5, -1, 2, 5):
        x = sample_uniform_sphere(F23, j, rng, -20)
        o, oerr = oracles.riemann_heat_kernel([2, 3], x.coords, t, alpha, L=7, m=4)
        z = heat_kernel(sym, x, t)
        assert abs(z.value - o) <= 1e-6 * abs(o) + z.tail_bound + oerr


def test_kernel_depends_only_on_norm():
    rng = np.random.default_rng(2)
    for j in (-2, 1, 4):
        vals = {heat_kernel(S23, sample_uniform_sphere(F23, j, rng, -10), 1.0).value for _ in range(5)}
        assert len(vals) == 1
        assert vals.pop() == heat_kernel(S23, OnSphere(j), 1.0).value


@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("t", [0.01, 1.0, 100.0])
def test_kernel_positive_and_radially_decreasing(alpha, t):
    sym = SymbolAlpha(alpha, F23)
    prof = [heat_kernel(sym, OnSphere(j), t).value for j in range(-8, 9)]
    assert all(v > 0 for v in prof)
    assert all(a >= b for a, b in zip(prof, prof[1:]))
    assert heat_kernel(sym, None, t).upper >= prof[0]


def test_kernel_vanishes_as_t_to_zero_off_origin():
    C = S23.max_constant()
    for j in (-2, 0, 3):
        x = OnSphere(j)
        r = F23.radius_float(j)
        for t in (1e-2, 1e-4, 1e-6):
            assert heat_kernel(S23, x, t).upper <= C * t * r ** -2


@pytest.mark.parametrize("alpha,t", [(0.5, 1.0), (1.0, 0.01), (2.0, 100.0)])
def test_kernel_mass_is_one(alpha, t):
    m = kernel_mass(SymbolAlpha(alpha, F23), t)
    assert abs(m.value - 1) <= 1e-9


def test_tolerance_unreachable_under_small_cap():
    small = SymbolAlpha(0.5, Filtration.sadic([2], level_cap=20))
    with pytest.raises(ToleranceUnreachable):
        kernel_mass(small, 1.0)


def test_estimates_hold_on_grid():
    samples = [(x, t) for t in (1e-3, 0.1, 1.0, 10.0, 1e3)
               for x in [None] + [OnSphere(j) for j in range(-6, 7)]]
    for alpha in (0.5, 1.0, 2.0):
        rep = kernel_estimates_check(SymbolAlpha(alpha, F23), samples)
        assert rep.ok, [(r.norm, r.t, r.violations) for r in rep.violations]
        assert rep.C_gamma == pytest.approx(math.gamma(1 / alpha + 1), rel=1e-14)
        assert rep.C_decay == 3.0 ** alpha


def test_gamma_bound_is_attained_asymptotically_at_origin():
    # Z(0, t) t^{1/a} is bounded by Gamma(1/a + 1)
    for t in (1e-4, 1.0, 1e4):
        assert heat_kernel(S23, None, t).value <= gamma_bound(1.0, t)


@pytest.mark.parametrize("t,s", [(0.1, 0.1), (0.1, 1.0), (1.0, 1.0)])
def test_chapman_kolmogorov_on_spheres(t, s):
    for j in (None, -4, -1, 0, 2, 5):
        lhs = heat_kernel(S23, None if j is None else OnSphere(j), t + s)
        rhs = radial_convolution_at(S23, t, s, j)
        assert abs(lhs.value - rhs.value) <= 1e-8


def test_spectrum_listing():
    eig = spectrum(S23, range(1, 4))
    assert [e.eigenvalue for e in eig] == [2.0, 6.0, 12.0]
    sq = spectrum(SymbolAlpha(2.0, F23), range(-2, 3))
    assert [e.eigenvalue for e in sq] == [1 / 36, 1 / 4, 1.0, 4.0, 36.0]


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.7])
@pytest.mark.parametrize("n", range(-4, 5))
def test_eigenfunctions(alpha, n):
    sym = SymbolAlpha(alpha, F23)
    lam = F23.radius_float(n) ** alpha
    e = Eigenpair(n, lam, F23).eigenfunction()
    assert e.levels == (-n + 1, -n)
    d = apply_dalpha(sym, e)
    assert np.linalg.norm(d.values - lam * e.values) <= 1e-10 * np.linalg.norm(e.values)
    u = evolve(sym, e, 0.3)
    assert np.allclose(u.values, math.exp(-0.3 * lam) * e.values, atol=1e-12)


def test_dalpha_of_ball_indicator_inside_window():
    # F[1_{B_0}] = 1_{B_0}; inside B_0 the operator gives the integral of ||xi||^a over B_0
    f0 = indicator_ball(F23, 0, 1, -1)
    d = apply_dalpha(S23, f0)
    ref = sphere_sum(F23, lambda r: r, None, 0)
    inside = f0.values.real > 0
    # on the zero sphere part the multiplier is known exactly on the finer window
    F = fourier(f0)
    norms = sphere_norms(F23, *F.levels)
    body = inverse_fourier(F._like(F.values * norms)).values
    assert np.allclose(d.values, body + f0.integral() * radial_integral(F23, power(1.0), None, -1).value,
                       atol=1e-12)
    assert np.all(np.abs(d.values[inside] - d.values[inside][0]) < 1e-12)
    assert abs(ref - (radial_integral(F23, power(1.0), None, 0).value)) < 1e-12


def test_evolve_semigroup_and_contraction():
    rng = np.random.default_rng(5)
    fn = random_function(F23, 2, -2, rng)
    assert evolve(S23, fn, 0.0) is fn
    norms = [fn.l2_norm()]
    for t in (0.1, 1.0):
        for s in (0.1, 1.0):
            a = evolve(S23, evolve(S23, fn, s), t)
            b = evolve(S23, fn, s + t)
            assert np.max(np.abs(a.values - b.values)) <= 1e-8
    for t in (0.01, 0.1, 1.0, 10.0):
        norms.append(evolve(S23, fn, t).l2_norm())
    assert all(b <= a + 1e-12 for a, b in zip(norms, norms[1:]))


def test_evolve_preserves_positivity_and_mass_accounting():
    f0 = indicator_ball(F23, 1, 2, -1)
    u = evolve(S23, f0, 0.7)
    assert isinstance(u, HeatSolution)
    assert np.all(u.values.real > -1e-14)
    # window mass plus certified exterior mass recovers the initial mass
    assert abs(u.integral().real + u.exterior_mass - f0.integral().real) < 1e-10
    # outside the window the exact solution is still positive and below its inside values
    far = u.exact_value(OnSphere(6))
    assert abs(far.value.imag) < 1e-15
    assert 0 < far.value.real < u.values.real.min()


def test_evolve_lizorkin_part_stays_lizorkin():
    fn = lizorkin_project(random_function(F23, 1, -2, np.random.default_rng(1)))
    u = evolve(S23, fn, 2.0)
    assert abs(u.ball_coeff) < 1e-15
    assert u.is_lizorkin()
    assert u.exterior_mass < 1e-14


def test_duhamel_eigenmode_and_order():
    lam = 2.0
    e = Eigenpair(1, lam, F23).eigenfunction()
    c, T = 0.7, 1.0
    exact = (math.exp(-lam * T) + c * -math.expm1(-lam * T) / lam) * e.values
    errs = []
    for steps in (16, 32, 64):
        u = duhamel_solve(S23, e, lambda tau: e * c, T, steps)
        assert u.quadrature_step == T / steps
        errs.append(np.linalg.norm(u.values - exact) / np.linalg.norm(exact))
    assert errs[-1] <= 1e-6
    assert 10 <= errs[1] / errs[2] <= 22


def test_duhamel_time_dependent_source():
    lam = 6.0
    e = Eigenpair(2, lam, F23).eigenfunction()
    T = 0.5
    # u' = -lam u + cos(tau) e, u(0) = 0
    exact = ((lam * math.cos(T) + math.sin(T) - lam * math.exp(-lam * T)) / (lam ** 2 + 1)) * e.values
    u = duhamel_solve(S23, 0 * e, lambda tau: e * math.cos(tau), T, 128)
    assert np.linalg.norm(u.values - exact) <= 1e-7 * np.linalg.norm(exact)


def test_duhamel_argument_checks():
    e = Eigenpair(1, 2.0, F23).eigenfunction()
    with pytest.raises(ValueError):
        duhamel_solve(S23, e, lambda tau: e, 1.0, 3)
    with pytest.raises(ValueError):
        duhamel_solve(S23, e, lambda tau: indicator_ball(F23, 0), 1.0, 4)


def test_invalid_arguments():
    with pytest.raises(ValueError):
        SymbolAlpha(0.0, F23)
    with pytest.raises(ValueError):
        heat_kernel(S23, None, 0.0)
    with pytest.raises(ValueError):
        heat(0.0, 1.0)
    with pytest.raises(ValueError):
        evolve(S23, indicator_ball(F23, 0), -1.0)
    assert isinstance(heat_kernel(S23, None, 1.0), CertifiedValue)
