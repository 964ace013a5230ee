"""Self-check suites shared by the command line and the test-suite.

Each suite returns a list of :class:`Check` records; a suite passes when
every record does.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .filtration import Filtration
from .sadic import coset_index
from .funcspace import (dimension, fourier, inverse_fourier, random_function)
from .markov import (BallSpec, IncrementSampler, chapman_kolmogorov_test, condition_L,
                     condition_M, level_ks_test, cdf_band_check, symmetry_check)
from .spectral import (Eigenpair, OnSphere, SymbolAlpha, ToleranceUnreachable, duhamel_solve,
                       evolve, apply_dalpha, heat_kernel, kernel_estimates_check, kernel_mass,
                       radial_convolution_at, spectrum)

NORMALIZATION_LEVEL_CAP = 256


@dataclass
class Check:
    suite: str
    name: str
    passed: bool
    value: float | None = None
    limit: float | None = None
    detail: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"suite": self.suite, "name": self.name, "pass": self.passed,
                "value": self.value, "limit": self.limit, **self.detail}


def windows_up_to(f: Filtration, max_dim: int, lowest: int = -3, highest: int = 4):
    """All windows ``(k, l)`` with ``lowest <= l < k <= highest`` of dimension at most ``max_dim``."""
    return [(k, l) for l in range(lowest, highest) for k in range(l + 1, highest + 1)
            if dimension(f, k, l) <= max_dim]


def fourier_suite(f: Filtration, seed: int, max_dim: int = 144, tol: float = 1e-12) -> list[Check]:
    rng = np.random.default_rng(seed)
    out = []
    for k, l in windows_up_to(f, max_dim):
        fn = random_function(f, k, l, rng)
        F = fourier(fn)
        pars = abs(F.l2_norm() - fn.l2_norm()) / fn.l2_norm()
        back = np.max(np.abs(inverse_fourier(F).values - fn.values))
        # F F f (x) = f(-x)
        twice = fourier(F)
        flip = [coset_index(-x, k, l) for x in fn.cosets()]
        dbl = float(np.max(np.abs(twice.values - fn.values[flip])))
        fft = np.max(np.abs(fourier(fn, method="fft").values - F.values))
        w = {"k": k, "l": l, "dim": fn.dim}
        out.append(Check("fourier", "parseval", pars <= tol, pars, tol, w))
        out.append(Check("fourier", "inversion", back <= tol, float(back), tol, w))
        out.append(Check("fourier", "double_transform", dbl <= tol, dbl, tol, w))
        out.append(Check("fourier", "fft_matches_direct", fft <= tol * max(1.0, fn.dim), float(fft),
                         tol * max(1.0, fn.dim), w))
    return out


def kernel_suite(sym: SymbolAlpha, t_values=(0.01, 1.0, 100.0), levels=range(-6, 7),
                 tol: float = 1e-9) -> list[Check]:
    f = sym.filtration.with_level_cap(max(sym.filtration.level_cap, NORMALIZATION_LEVEL_CAP))
    wide = SymbolAlpha(sym.alpha, f)
    out = []
    for t in t_values:
        try:
            m = kernel_mass(wide, t, tol=min(tol, 1e-11))
            err = abs(m.value - 1)
            out.append(Check("kernel", "normalization", err <= tol, err, tol,
                             {"t": t, "alpha": sym.alpha, "level_cap_used": f.level_cap}))
        except ToleranceUnreachable as exc:
            out.append(Check("kernel", "normalization", False, None, tol,
                             {"t": t, "alpha": sym.alpha, "error": str(exc)}))
    samples = [(None, t) for t in t_values] + [(OnSphere(j), t) for j in levels for t in t_values]
    rep = kernel_estimates_check(sym, samples)
    out.append(Check("kernel", "estimates", rep.ok, float(len(rep.violations)), 0.0,
                     {"rows": len(rep.rows)}))
    for t in t_values:
        prof = [heat_kernel(sym, OnSphere(j), t).value for j in levels]
        mono = all(a >= b for a, b in zip(prof, prof[1:]))
        pos = all(v > 0 for v in prof)
        out.append(Check("kernel", "positive_decreasing", mono and pos, None, None, {"t": t}))
    return out


def spectral_suite(sym: SymbolAlpha, levels=range(-3, 4), tol: float = 1e-10) -> list[Check]:
    f = sym.filtration
    out = []
    for n in levels:
        e = Eigenpair(n, f.radius_float(n) ** sym.alpha, f).eigenfunction()
        d = apply_dalpha(sym, e)
        res = float(np.linalg.norm(d.values - f.radius_float(n) ** sym.alpha * e.values)
                    / np.linalg.norm(e.values))
        out.append(Check("spectral", "eigen_residual", res <= tol, res, tol, {"n": n}))
    ev = [p.eigenvalue for p in spectrum(sym, levels)]
    out.append(Check("spectral", "increasing", all(a < b for a, b in zip(ev, ev[1:]))))
    return out


def semigroup_suite(sym: SymbolAlpha, seed: int, window: tuple[int, int] = (2, -2),
                    times=(0.1, 1.0), levels=range(-6, 7), tol: float = 1e-8) -> list[Check]:
    out = []
    for t in times:
        for s in times:
            worst = 0.0
            for j in [None, *levels]:
                x = None if j is None else OnSphere(j)
                lhs = heat_kernel(sym, x, t + s).value
                rhs = radial_convolution_at(sym, t, s, j).value
                worst = max(worst, abs(lhs - rhs))
            out.append(Check("semigroup", "kernel_convolution", worst <= tol, worst, tol,
                             {"t": t, "s": s}))
    rng = np.random.default_rng(seed)
    fn = random_function(sym.filtration, *window, rng)
    for t in times:
        for s in times:
            a = evolve(sym, evolve(sym, fn, s), t)
            b = evolve(sym, fn, s + t)
            err = float(np.max(np.abs(a.values - b.values)))
            out.append(Check("semigroup", "evolve_composition", err <= tol, err, tol,
                             {"t": t, "s": s}))
    return out


def eigenmode_duhamel(sym: SymbolAlpha, n: int, c: float, T: float, steps: int) -> float:
    """Relative error of the solver for ``u0 = e_n`` and constant source ``c e_n``."""
    f = sym.filtration
    lam = f.radius_float(n) ** sym.alpha
    e = Eigenpair(n, lam, f).eigenfunction()
    exact = (math.exp(-lam * T) + c * -math.expm1(-lam * T) / lam) * e.values
    u = duhamel_solve(sym, e, lambda tau: e * c, T, steps)
    return float(np.linalg.norm(u.values - exact) / np.linalg.norm(exact))


def duhamel_suite(sym: SymbolAlpha, n: int = 1, c: float = 0.7, T: float = 1.0,
                  steps: int = 64, tol: float = 1e-6) -> list[Check]:
    e1, e2, e3 = (eigenmode_duhamel(sym, n, c, T, s) for s in (steps // 4, steps // 2, steps))
    ratio = e2 / e3 if e3 > 0 else math.inf
    return [Check("duhamel", "eigenmode_accuracy", e3 <= tol, e3, tol, {"steps": steps}),
            Check("duhamel", "convergence_ratio", 10 <= ratio <= 22, ratio, None,
                  {"coarse_ratio": e1 / e2 if e2 > 0 else math.inf})]


def markov_suite(sym: SymbolAlpha, seed: int, N: int = 100_000, t: float = 1.0,
                 support_level: int = 20, resolution: int = -20) -> list[Check]:
    rng = np.random.default_rng(np.random.SeedSequence([seed, 17]))
    smp = IncrementSampler(sym, t, support_level, resolution)
    out = []
    for rep in (level_ks_test(smp, N, rng), cdf_band_check(smp, N, rng),
                chapman_kolmogorov_test(sym, 0.4 * t, 0.6 * t, N, seed, support_level, resolution),
                symmetry_check(smp, min(N, 5000), rng)):
        out.append(Check("markov", rep.test, rep.passed, rep.statistic, None, rep.to_json()))
    ball = BallSpec(None, 0)
    L = condition_L(sym, 1.0, ball, [OnSphere(j) for j in range(1, 8)], support_level)
    M = condition_M(sym, ball, [1e-1, 1e-2, 1e-3, 1e-4])
    out.append(Check("markov", "condition_L", L.passed, None, None, L.to_json()))
    out.append(Check("markov", "condition_M", M.passed, None, None, M.to_json()))
    return out


SUITES = ("fourier", "kernel", "spectral", "semigroup", "duhamel", "markov")


def run_suite(name: str, sym: SymbolAlpha, seed: int, samples: int = 100_000,
              window: tuple[int, int] = (2, -2)) -> list[Check]:
    if name == "all":
        return [c for s in SUITES for c in run_suite(s, sym, seed, samples, window)]
    if name == "fourier":
        return fourier_suite(sym.filtration, seed)
    if name == "kernel":
        return kernel_suite(sym)
    if name == "spectral":
        return spectral_suite(sym)
    if name == "semigroup":
        return semigroup_suite(sym, seed, window)
    if name == "duhamel":
        return duhamel_suite(sym)
    if name == "markov":
        return markov_suite(sym, seed, samples)
    raise ValueError(f"unknown suite {name!r}; choose from {', '.join(SUITES)} or all")
