"""The jump process with transition density ``p(t, x, y) = Z(x - y, t)``.

Sampling is two-stage: the sphere level of an increment is drawn by
inverting the radial law ``F_t(n) = P(||X_t|| <= r_n)``, then a point is drawn
uniformly on that sphere.  The law is truncated to the levels of a window
``(support_level, resolution)``; draws beyond the support are redrawn and
counted, draws inside ``B_resolution`` give the zero point.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .filtration import Filtration
from .sadic import (SAdicPoint, distance, norm, sample_uniform_sphere, sphere_level, zero,
                    char_phase)
from .spectral import (DEFAULT_EPS, CertifiedValue, OnSphere, SymbolAlpha, ToleranceUnreachable,
                       heat, radial_integral)


@dataclass(frozen=True)
class BallSpec:
    center: SAdicPoint | None
    level: int

    def measure(self, f: Filtration) -> float:
        return f.radius_float(self.level)

    def contains(self, x) -> bool:
        d = _offset_level(x, self.center)
        return d is None or d <= self.level


def _offset_level(x, center) -> int | None:
    """Sphere level of ``x - center``; ``x`` may be an :class:`OnSphere` when center is 0."""
    if isinstance(x, OnSphere):
        if center is not None and not center.is_zero():
            raise TypeError("OnSphere positions need a ball centred at 0")
        return x.level
    if x is None:
        return None if center is None else sphere_level(-center)
    return sphere_level(x if center is None else x - center)


def transition_P(sym: SymbolAlpha, t: float, x, ball: BallSpec,
                 eps: float = DEFAULT_EPS) -> CertifiedValue:
    """``P(t, x, B) = integral_B Z(x - y, t) dy`` for a ball ``B``.

    For ``t > 0`` this is ``r_level * integral_{B_{-level}} exp(-t||xi||^a) chi(-(x-c) xi) dxi``.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0:
        return CertifiedValue(1.0 if ball.contains(x) else 0.0, 0.0, 0)
    f = sym.filtration
    j = _offset_level(x, ball.center)
    rb = f.radius_float(ball.level)
    ri = radial_integral(f, heat(t, sym.alpha), None if j is None else OnSphere(j),
                         -ball.level, eps=eps / rb)
    return CertifiedValue(rb * ri.value, rb * ri.tail_bound, ri.levels_used)


def radial_cdf(sym: SymbolAlpha, t: float, n: int, eps: float = DEFAULT_EPS) -> CertifiedValue:
    """``P(||X_t|| <= r_n) = r_n * integral_{B_{-n}} exp(-t ||xi||^a) dxi``."""
    if not t > 0:
        raise ValueError("t must be positive")
    f = sym.filtration
    rn = f.radius_float(n)
    ri = radial_integral(f, heat(t, sym.alpha), None, -n, eps=eps / rn)
    return CertifiedValue(rn * ri.value, rn * ri.tail_bound, ri.levels_used)


def radial_sf(sym: SymbolAlpha, t: float, n: int, eps: float = DEFAULT_EPS) -> CertifiedValue:
    """``P(||X_t|| > r_n) = r_n sum_{k <= -n} (r_k - r_{k-1})(1 - exp(-t r_k^a))``.

    Accurate where the survival probability is tiny; downward tail bounded by
    ``r_n t r_{N0}^{1+a} / (1 - 2^{-(1+a)})``.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    f, a = sym.filtration, sym.alpha
    rn = f.radius_float(n)
    geo = 1.0 / (1.0 - 2.0 ** -(1 + a))
    total = 0.0
    k = -n
    used = 0
    while True:
        if k < -f.level_cap:
            raise ToleranceUnreachable("survival tail beyond the level cap")
        rk = f.radius_float(k)
        bound = rn * t * rk ** (1 + a) * geo
        if k < -n and bound <= eps:
            break
        total += (rk - f.radius_float(k - 1)) * -math.expm1(-t * rk ** a)
        used += 1
        k -= 1
    return CertifiedValue(rn * total, bound, used)


class IncrementSampler:
    """Inverse-CDF sampler for increments ``X_t`` on a window.

    ``support_level`` k and ``resolution`` l delimit the levels that are
    represented: sphere levels ``l < n <= k`` are sampled explicitly, the
    mass of ``B_l`` becomes the zero point, and the exterior mass beyond
    ``B_k`` is redrawn (``tail_events`` counts the redraws).
    """

    def __init__(self, sym: SymbolAlpha, t: float, support_level: int, resolution: int,
                 eps: float = DEFAULT_EPS):
        if not t > 0:
            raise ValueError("t must be positive")
        if resolution >= support_level:
            raise ValueError("need resolution < support_level")
        self.sym = sym
        self.t = t
        self.support_level = support_level
        self.resolution = resolution
        self.levels = np.arange(resolution, support_level + 1)
        cdf = []
        bound = 0.0
        for n in self.levels:
            sf = radial_sf(sym, t, int(n), eps)
            cdf.append(1.0 - sf.value)
            bound = max(bound, sf.tail_bound)
        self.cdf = np.maximum.accumulate(np.array(cdf))
        self.cdf_bound = bound
        self.exterior_mass = 1.0 - self.cdf[-1]
        self.tail_events = 0

    def truncated_cdf(self) -> np.ndarray:
        """CDF of the sampled level (first entry: the zero atom) conditioned on ``B_k``."""
        return self.cdf / self.cdf[-1]

    def sample_levels(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Sphere levels of ``size`` increments; ``resolution`` stands for the zero point."""
        u = rng.random(size)
        out = np.empty(size, dtype=np.int64)
        todo = np.arange(size)
        while todo.size:
            idx = np.searchsorted(self.cdf, u[todo], side="left")
            bad = idx >= len(self.cdf)
            out[todo[~bad]] = self.levels[idx[~bad]]
            self.tail_events += int(bad.sum())
            todo = todo[bad]
            u[todo] = rng.random(todo.size)
        return out

    def sample(self, rng: np.random.Generator) -> SAdicPoint:
        n = int(self.sample_levels(rng, 1)[0])
        return self.point_on_level(n, rng)

    def point_on_level(self, n: int, rng: np.random.Generator) -> SAdicPoint:
        f = self.sym.filtration
        if n <= self.resolution:
            return zero(f, self.resolution)
        return sample_uniform_sphere(f, n, rng, self.resolution)


def sample_increment(sym: SymbolAlpha, t: float, rng: np.random.Generator,
                     support_level: int = 20, resolution: int = -20,
                     eps: float = DEFAULT_EPS) -> SAdicPoint:
    return IncrementSampler(sym, t, support_level, resolution, eps).sample(rng)


@dataclass
class Trajectory:
    times: np.ndarray
    points: list[SAdicPoint]
    seed: int
    params: dict = field(default_factory=dict)
    tail_events: int = 0

    def __post_init__(self):
        if len(self.times) != len(self.points):
            raise ValueError("times and points must have equal length")

    def norms(self) -> list[float]:
        return [float(norm(x)) for x in self.points]

    def write_csv(self, path) -> None:
        primes = self.points[0].primes
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            head = ["time"]
            for p in primes:
                head += [f"num_{p}", f"den_exp_{p}"]
            w.writerow(head + ["norm"])
            for t, x in zip(self.times, self.points):
                row = [repr(float(t))]
                for c in x.to_json():
                    row += [c["num"], c["den_exp"]]
                nx = norm(x)
                w.writerow(row + [f"{nx.numerator}/{nx.denominator}" if nx.denominator != 1
                                  else str(nx.numerator)])


def path_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for path ``index``, keyed by ``(seed, index)``."""
    return np.random.default_rng(np.random.SeedSequence([seed, index]))


def sample_path(sym: SymbolAlpha, grid, rng: np.random.Generator, support_level: int = 20,
                resolution: int = -20, eps: float = DEFAULT_EPS, seed: int = 0,
                samplers: dict | None = None) -> Trajectory:
    """Path started at 0 with independent increments over the time grid."""
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 1 or grid[0] != 0 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must start at 0 and be strictly increasing")
    samplers = {} if samplers is None else samplers
    x = zero(sym.filtration, resolution)
    pts = [x]
    tails = 0
    for dt in np.diff(grid):
        key = float(dt)
        if key not in samplers:
            samplers[key] = IncrementSampler(sym, key, support_level, resolution, eps)
        s = samplers[key]
        before = s.tail_events
        x = x + s.sample(rng)
        tails += s.tail_events - before
        pts.append(x)
    return Trajectory(grid, pts, seed, {"alpha": sym.alpha, "support_level": support_level,
                                        "resolution": resolution}, tails)


def sample_paths(sym: SymbolAlpha, grid, seed: int, n_paths: int, **kw) -> list[Trajectory]:
    samplers: dict = {}
    return [sample_path(sym, grid, path_rng(seed, i), seed=seed, samplers=samplers, **kw)
            for i in range(n_paths)]


# -- statistical validation ----------------------------------------------------------


@dataclass
class StatReport:
    test: str
    N: int
    statistic: float
    p_value: float | None
    passed: bool
    detail: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"test": self.test, "N": self.N, "statistic": self.statistic,
                "p_value": self.p_value, "pass": self.passed, **self.detail}


def randomized_pit(levels: np.ndarray, level_grid: np.ndarray, cdf: np.ndarray,
                   rng: np.random.Generator) -> np.ndarray:
    """Randomized probability integral transform of a discrete sample.

    Uniform on [0, 1] exactly when ``levels`` follow ``cdf`` on ``level_grid``.
    """
    idx = np.searchsorted(level_grid, levels)
    upper = cdf[idx]
    lower = np.where(idx > 0, cdf[np.maximum(idx - 1, 0)], 0.0)
    return lower + rng.random(levels.size) * (upper - lower)


def level_ks_test(sampler: IncrementSampler, N: int, rng: np.random.Generator,
                  threshold: float = 0.01) -> StatReport:
    """KS test of sampled increment levels against the analytic sphere masses."""
    levels = sampler.sample_levels(rng, N)
    u = randomized_pit(levels, sampler.levels, sampler.truncated_cdf(), rng)
    res = stats.kstest(u, "uniform")
    return StatReport("increment_level_ks", N, float(res.statistic), float(res.pvalue),
                      bool(res.pvalue > threshold), {"t": sampler.t})


def cdf_band_check(sampler: IncrementSampler, N: int, rng: np.random.Generator,
                   sigmas: float = 3.0) -> StatReport:
    """Empirical ``P(||X|| <= r_n)`` against the truncated analytic CDF, per level."""
    levels = sampler.sample_levels(rng, N)
    F = sampler.truncated_cdf()
    worst = 0.0
    ok = True
    for n, Fn in zip(sampler.levels, F):
        emp = float(np.mean(levels <= n))
        sd = math.sqrt(max(Fn * (1 - Fn), 1e-300) / N)
        z = abs(emp - Fn) / sd if Fn * (1 - Fn) > 0 else (0.0 if emp == Fn else math.inf)
        worst = max(worst, z)
        ok &= z <= sigmas
    return StatReport("radial_cdf_band", N, float(worst), None, bool(ok), {"sigmas": sigmas})


def chapman_kolmogorov_test(sym: SymbolAlpha, t1: float, t2: float, N: int, seed: int,
                            support_level: int = 20, resolution: int = -20,
                            threshold: float = 0.01) -> StatReport:
    """Two-sample KS: norm levels of ``X_{t1} + X'_{t2}`` versus ``X_{t1+t2}``.

    Levels are jittered by an independent uniform so the two-sample KS test
    applies to the (discrete) level laws.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0]))
    s1 = IncrementSampler(sym, t1, support_level, resolution)
    s2 = IncrementSampler(sym, t2, support_level, resolution)
    s12 = IncrementSampler(sym, t1 + t2, support_level, resolution)
    l1 = s1.sample_levels(rng, N)
    l2 = s2.sample_levels(rng, N)
    two = np.empty(N, dtype=np.int64)
    for i in range(N):
        a, b = int(l1[i]), int(l2[i])
        if a != b:
            two[i] = max(a, b)  # strong triangle: unequal norms never cancel
        else:
            x = s1.point_on_level(a, rng) + s2.point_on_level(b, rng)
            lv = sphere_level(x)
            two[i] = resolution if lv is None else lv
    one = s12.sample_levels(rng, N)
    jitter = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    res = stats.ks_2samp(two + jitter.random(N), one + jitter.random(N))
    return StatReport("chapman_kolmogorov_ks", N, float(res.statistic), float(res.pvalue),
                      bool(res.pvalue > threshold), {"t1": t1, "t2": t2})


def symmetry_check(sampler: IncrementSampler, N: int, rng: np.random.Generator,
                   sigmas: float = 3.0) -> StatReport:
    """The law of X equals that of -X, so ``E sin(2 pi phase(X)) = 0``."""
    if sampler.resolution > 0:
        raise ValueError("character phases need resolution <= 0")
    levels = sampler.sample_levels(rng, N)
    vals = np.array([math.sin(2 * math.pi * float(char_phase(sampler.point_on_level(int(n), rng)).phase))
                     for n in levels])
    mean = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(N)) if N > 1 else math.inf
    z = abs(mean) / se if se > 0 else 0.0
    return StatReport("phase_symmetry", N, mean, None, bool(z <= sigmas), {"z": z})


# -- conditions L(B) and M(B) --------------------------------------------------------------


@dataclass
class ConditionReport:
    condition: str
    rows: list[dict]
    passed: bool

    def to_json(self) -> dict:
        return {"condition": self.condition, "rows": self.rows, "pass": self.passed}


def condition_L(sym: SymbolAlpha, t_max: float, ball: BallSpec, x_ladder,
                support_level: int | None = None, eps: float = DEFAULT_EPS,
                t_points: int = 25) -> ConditionReport:
    """``sup_{t <= t_max} P(t, x, B)`` along points of growing distance from ``B``.

    Each value must stay below ``t_max * C * d(x)^{-a-1} * mu(B)`` (``C = max q^a``)
    and the sequence must not increase along the ladder.
    """
    f, a = sym.filtration, sym.alpha
    C = sym.max_constant()
    mu = ball.measure(f)
    ts = t_max * np.logspace(-4, 0, t_points)
    rows = []
    ok = True
    prev = math.inf
    for x in x_ladder:
        j = _offset_level(x, ball.center)
        if j is None or j <= ball.level:
            raise ValueError("ladder points must lie outside the ball")
        d = f.radius_float(j)
        sup = max(transition_P(sym, float(t), x, ball, eps).upper for t in ts)
        bound = t_max * C * d ** (-a - 1) * mu
        outside = support_level is not None and j > support_level
        row_ok = sup <= bound and sup <= prev * (1 + 1e-12)
        rows.append({"distance": d, "sup_P": sup, "bound": bound, "outside_window": outside,
                     "pass": bool(row_ok)})
        ok &= row_ok
        prev = sup
    return ConditionReport("L(B)", rows, bool(ok))


def condition_M(sym: SymbolAlpha, ball: BallSpec, t_ladder, eps: float = DEFAULT_EPS,
                ratio_spread: float = 0.5) -> ConditionReport:
    """``sup_{x in B} P(t, x, Q_S \\ B)`` on a decreasing t-ladder.

    By translation invariance the sup equals ``P(||X_t|| > r_B)``.  It must
    stay below ``C t`` with ``C = max q^a r_{B+1}^{-a} / (1 - 2^{-a})`` and the
    ratio ``P / t`` must settle (relative spread below ``ratio_spread``).
    """
    f, a = sym.filtration, sym.alpha
    C = sym.max_constant() * f.radius_float(ball.level + 1) ** (-a) / (1 - 2 ** (-a))
    rows = []
    ok = True
    ratios = []
    for t in sorted(t_ladder, reverse=True):
        p = radial_sf(sym, float(t), ball.level, eps=min(eps, 1e-6 * t))
        ratios.append(p.value / t)
        row_ok = p.value + p.tail_bound <= C * t
        rows.append({"t": float(t), "P_exit": p.value, "bound": C * t, "ratio": p.value / t,
                     "pass": bool(row_ok)})
        ok &= row_ok
    spread = (max(ratios) - min(ratios)) / max(ratios)
    ok &= spread <= ratio_spread
    return ConditionReport("M(B)", rows, bool(ok))


def write_report(reports, path) -> None:
    with open(path, "w") as fh:
        json.dump([r.to_json() for r in reports], fh, indent=1)
