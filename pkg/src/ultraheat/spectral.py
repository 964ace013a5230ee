"""The operator D^alpha, the heat kernel and the heat semigroup.

Everything radial is computed from the sphere character integrals

    integral_{S_n} chi(-x xi) dxi =  r_n - r_{n-1}   if ||x|| <= r_{-n}
                                     -r_{n-1}        if ||x|| == r_{1-n}
                                     0               otherwise

so only the radius sequence of the filtration enters.  Infinite sums are
truncated with rigorous tail bounds and returned as :class:`CertifiedValue`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .filtration import Filtration, LevelCapExceeded
from .funcspace import (TestFunction, fourier, inverse_fourier, lizorkin_project,
                        indicator_sphere, sphere_norms)
from .sadic import SAdicPoint, sphere_level

DEFAULT_EPS = 1e-12


class ToleranceUnreachable(ArithmeticError):
    """The requested truncation tolerance needs levels beyond the level cap."""


@dataclass(frozen=True)
class SymbolAlpha:
    alpha: float
    filtration: Filtration

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")

    def max_constant(self) -> float:
        """``C = max q^alpha`` over ramification indices q (the ``max_p p^alpha`` constant)."""
        return float(self.filtration.max_ramification()) ** self.alpha


@dataclass(frozen=True)
class OnSphere:
    """Stand-in for any point of the sphere ``S_level`` (radial quantities only)."""

    level: int


@dataclass(frozen=True)
class CertifiedValue:
    value: float | complex
    tail_bound: float
    levels_used: int

    def __float__(self):
        return float(self.value.real if isinstance(self.value, complex) else self.value)

    @property
    def lower(self) -> float:
        return float(self) - self.tail_bound

    @property
    def upper(self) -> float:
        return float(self) + self.tail_bound


# -- radial weights ---------------------------------------------------------------


@dataclass(frozen=True)
class RadialWeight:
    """``w(r) = r^beta * exp(-t r^alpha)``; ``t = 0`` gives the pure power weight.

    ``kind`` is one of ``"heat"`` (beta = 0, t > 0), ``"power"`` (beta = alpha,
    t = 0) or ``"power_heat"`` (beta = alpha, t > 0).
    """

    kind: str
    alpha: float
    t: float = 0.0

    def __post_init__(self):
        if self.kind not in ("heat", "power", "power_heat"):
            raise ValueError(f"unknown weight {self.kind!r}")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.kind in ("heat", "power_heat") and not self.t > 0:
            raise ValueError("heat weights need t > 0")

    @property
    def beta(self) -> float:
        return 0.0 if self.kind == "heat" else self.alpha

    @property
    def decays(self) -> bool:
        return self.kind != "power"

    def __call__(self, r: float) -> float:
        out = r ** self.beta if self.beta else 1.0
        if self.t:
            out *= math.exp(-self.t * r ** self.alpha)
        return out

    def sup_below(self, r: float) -> float:
        """``sup_{0 < s <= r} |w(s)|``."""
        if self.beta == 0:
            return 1.0
        if self.t == 0:
            return r ** self.beta
        # r^b e^{-t r^a} peaks at r^a = b / (a t)
        peak = (self.beta / (self.alpha * self.t)) ** (1 / self.alpha)
        return self(min(r, peak))


def heat(t: float, alpha: float) -> RadialWeight:
    return RadialWeight("heat", alpha, t)


def power(alpha: float) -> RadialWeight:
    return RadialWeight("power", alpha)


def power_heat(t: float, alpha: float) -> RadialWeight:
    return RadialWeight("power_heat", alpha, t)


def _x_level(x) -> int | None:
    """Sphere level of ``x`` (None for the origin)."""
    if x is None:
        return None
    if isinstance(x, OnSphere):
        return x.level
    if isinstance(x, SAdicPoint):
        return sphere_level(x)
    raise TypeError(f"expected SAdicPoint, OnSphere or None, got {type(x).__name__}")


def _upper_tail(f: Filtration, w: RadialWeight, start: int, target: float) -> tuple[int, float]:
    """Find M >= start with ``sum_{n > M} w(r_n)(r_n - r_{n-1}) <= bound <= target``.

    Terms are bounded by ``u_n = r_n^{1+beta} exp(-t r_n^alpha)`` whose ratio
    ``u_{n+1}/u_n <= Q^{1+beta} exp(-t (2^alpha - 1) r_n^alpha)`` decreases in n.
    """
    Q = float(f.max_ramification())
    a, b, t = w.alpha, w.beta, w.t
    M = start
    while True:
        if M + 1 > f.level_cap:
            raise ToleranceUnreachable("upper tail needs levels beyond the cap")
        r = f.radius_float(M + 1)
        ratio = Q ** (1 + b) * math.exp(-t * (2 ** a - 1) * r ** a)
        if ratio < 0.5:
            bound = math.exp((1 + b) * math.log(r) - t * r ** a) / (1 - ratio)
            if bound <= target:
                return M, bound
        M += 1


def radial_integral(f: Filtration, w: RadialWeight, x=None, N: int | None = None,
                    eps: float = DEFAULT_EPS, upper_eps: float | None = None) -> CertifiedValue:
    """``integral_{B_N} w(||xi||) chi(-x xi) dxi`` (``N=None`` means all of Q_S).

    The downward tail below level ``N0`` is bounded by ``2 sup|w| r_{N0}``.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    j = _x_level(x)
    if N is None and j is None and not w.decays:
        raise ValueError("power weight is not integrable over Q_S")
    top = 1 - j if j is not None else None
    if N is not None:
        top = N if top is None else min(top, N)
    upper_bound = 0.0
    if top is None:
        top, upper_bound = _upper_tail(f, w, 0, eps if upper_eps is None else upper_eps)
    # downward: stop at N0 once 2 sup|w| r_{N0} <= eps
    total = 0.0
    n = top
    used = 0
    while True:
        if n < -f.level_cap:
            raise ToleranceUnreachable(f"eps={eps} needs levels below -{f.level_cap}")
        rn = f.radius_float(n)
        down = 2 * w.sup_below(rn) * rn
        if n < top and down <= eps:
            break
        rm = f.radius_float(n - 1)
        if j is not None and n == 1 - j:
            total -= w(rn) * rm
        else:
            total += w(rn) * (rn - rm)
        used += 1
        n -= 1
    return CertifiedValue(total, down + upper_bound, used)


# -- heat kernel ----------------------------------------------------------------


def _exp_diff(a: float, b: float) -> float:
    """``exp(-a) - exp(-b)`` for ``0 <= a <= b`` without cancellation."""
    return -math.exp(-a) * math.expm1(-(b - a))


def heat_kernel(sym: SymbolAlpha, x, t: float, eps: float = DEFAULT_EPS) -> CertifiedValue:
    """``Z(x, t) = sum_{r_n <= 1/||x||} r_n (exp(-t r_n^a) - exp(-t r_{n+1}^a))``.

    The downward tail below ``N0`` is bounded by
    ``min(2 r_{N0}, t Q^a r_{N0}^{1+a} / (1 - 2^{-(1+a)}))``.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    if eps <= 0:
        raise ValueError("eps must be positive")
    f, a = sym.filtration, sym.alpha
    Q = float(f.max_ramification())
    j = _x_level(x)
    if j is None:
        top, upper = _upper_tail(f, heat(t, a), 0, eps)
    else:
        top, upper = -j, 0.0
    geo = 1.0 / (1.0 - 2.0 ** -(1 + a))
    total = 0.0
    used = 0
    n = top
    while True:
        if n < -f.level_cap:
            raise ToleranceUnreachable(f"eps={eps} needs levels below -{f.level_cap}")
        rn = f.radius_float(n)
        down = min(2 * rn, t * Q ** a * rn ** (1 + a) * geo)
        if n < top and down <= eps:
            break
        rn1 = f.radius_float(n + 1)
        total += rn * _exp_diff(t * rn ** a, t * rn1 ** a)
        used += 1
        n -= 1
    return CertifiedValue(total, down + upper, used)


def heat_kernel_profile(sym: SymbolAlpha, t: float, levels, eps: float = DEFAULT_EPS):
    """``Z`` on each sphere level in ``levels`` (a radial profile)."""
    return {n: heat_kernel(sym, OnSphere(n), t, eps) for n in levels}


def gamma_bound(alpha: float, t: float) -> float:
    return math.gamma(1 / alpha + 1) * t ** (-1 / alpha)


@dataclass
class EstimateRow:
    norm: float
    t: float
    Z: float
    tail: float
    bound_gamma: float
    bound_decay: float | None
    bound_combined: float
    violations: list[str] = field(default_factory=list)

    @property
    def margin(self) -> float:
        bounds = [self.bound_gamma, self.bound_combined]
        if self.bound_decay is not None:
            bounds.append(self.bound_decay)
        return min(bounds) - (self.Z + self.tail)


@dataclass
class EstimateReport:
    alpha: float
    C_gamma: float
    C_decay: float
    C_combined: float
    rows: list[EstimateRow]

    @property
    def violations(self) -> list[EstimateRow]:
        return [r for r in self.rows if r.violations]

    @property
    def ok(self) -> bool:
        return not self.violations


def kernel_estimates_check(sym: SymbolAlpha, samples, eps: float = DEFAULT_EPS) -> EstimateReport:
    """Check the three upper bounds on ``Z`` at each ``(x, t)`` sample.

    * ``Z <= Gamma(1/a + 1) t^{-1/a}``
    * ``Z <= C t ||x||^{-a-1}`` with ``C = max q^a`` (skipped at x = 0)
    * ``Z <= C' t (t^{1/a} + ||x||)^{-a-1}`` with ``C' = 2^{a+1} max(Gamma(1/a+1), C)``
    """
    a = sym.alpha
    f = sym.filtration
    C1 = math.gamma(1 / a + 1)
    C2 = sym.max_constant()
    C3 = 2 ** (a + 1) * max(C1, C2)
    rows = []
    for x, t in samples:
        j = _x_level(x)
        nx = 0.0 if j is None else f.radius_float(j)
        b1 = C1 * t ** (-1 / a)
        b2 = None if j is None else C2 * t * nx ** (-a - 1)
        b3 = C3 * t * (t ** (1 / a) + nx) ** (-a - 1)
        scale = min(b for b in (b1, b2, b3) if b is not None)
        z = heat_kernel(sym, x, t, eps=min(eps, 1e-6 * scale))
        row = EstimateRow(nx, t, z.value, z.tail_bound, b1, b2, b3)
        hi = z.value + z.tail_bound
        if hi > b1:
            row.violations.append("gamma")
        if b2 is not None and hi > b2:
            row.violations.append("decay")
        if hi > b3:
            row.violations.append("combined")
        if z.value - z.tail_bound <= 0:
            row.violations.append("positivity")
        rows.append(row)
    return EstimateReport(a, C1, C2, C3, rows)


def kernel_mass(sym: SymbolAlpha, t: float, tol: float = 1e-11) -> CertifiedValue:
    """``integral Z(x, t) dx`` by summing sphere values times sphere measures.

    Spheres far from the origin are cut off once the certified exterior mass
    ``sum_{n < -M} (1 - r_M r_n) D_n <= sum_{n < -M} D_n = 1 - exp(-t r_{-M}^a)``
    (``D_n = exp(-t r_n^a) - exp(-t r_{n+1}^a)``) drops below ``tol / 2``.
    """
    f, a = sym.filtration, sym.alpha
    M = 0
    while -math.expm1(-t * f.radius_float(-M) ** a) > tol / 2:
        M += 1
        if M > f.level_cap:
            raise ToleranceUnreachable("exterior mass needs levels beyond the cap")
    exterior = -math.expm1(-t * f.radius_float(-M) ** a)
    # inner ball B_{-L}: mass <= Z(0,t) r_{-L}
    z0 = heat_kernel(sym, None, t).upper
    L = 0
    while z0 * f.radius_float(-L) > tol / 4:
        L += 1
        if L > f.level_cap:
            raise ToleranceUnreachable("inner ball needs levels beyond the cap")
    inner = z0 * f.radius_float(-L)
    per_sphere = tol / 4 / (M + L + 1)
    total = 0.0
    tail = exterior + inner
    for n in range(-L + 1, M + 1):
        meas = f.radius_float(n) - f.radius_float(n - 1)
        z = heat_kernel(sym, OnSphere(n), t, eps=per_sphere / meas)
        total += z.value * meas
        tail += z.tail_bound * meas
    return CertifiedValue(total, tail, M + L)


def radial_convolution_at(sym: SymbolAlpha, t: float, s: float, j: int | None,
                          tol: float = 1e-11) -> CertifiedValue:
    """``(Z(., t) * Z(., s))(x)`` for ``x`` on the sphere ``S_j`` (None: x = 0).

    Spatial summation that only uses ultrametric geometry, independent of the
    Fourier route: for ``||y|| != ||x||`` the distance ``||x - y||`` equals
    ``max(||x||, ||y||)``, and for ``y`` on ``S_j`` the difference ``z = x - y``
    covers ``B_{j-1}`` plus the part of ``S_j`` outside ``x + B_{j-1}``.
    """
    f, a = sym.filtration, sym.alpha
    sub = tol * 1e-3
    zt = lambda n: heat_kernel(sym, OnSphere(n), t, eps=sub)
    zs = lambda n: heat_kernel(sym, OnSphere(n), s, eps=sub)
    z0t = heat_kernel(sym, None, t).upper
    z0s = heat_kernel(sym, None, s).upper
    zmax = max(z0t, z0s)
    L = 0
    while zmax * zmax * f.radius_float(-L) > tol / 8:
        L += 1
        if L > f.level_cap:
            raise ToleranceUnreachable("inner cut beyond the level cap")
    M = 1 if j is None else max(j + 1, 1)
    while z0t * -math.expm1(-s * f.radius_float(-M) ** a) > tol / 8:
        M += 1
        if M > f.level_cap:
            raise ToleranceUnreachable("outer cut beyond the level cap")
    meas = lambda n: f.radius_float(n) - f.radius_float(n - 1)

    def ball_mass(z, below: int) -> tuple[float, float]:
        # integral over B_{below} of a radial kernel, inner ball B_{-L} bounded
        v = e = 0.0
        for i in range(-L + 1, below + 1):
            zi = z(i)
            v += zi.value * meas(i)
            e += zi.tail_bound * meas(i)
        return v, e + zmax * f.radius_float(-L)

    total = 0.0
    err = z0t * -math.expm1(-s * f.radius_float(-M) ** a)
    start = -L + 1 if j is None else j + 1
    if j is None:
        err += zmax * zmax * f.radius_float(-L)
    else:
        ztj, zsj = zt(j), zs(j)
        ms, es = ball_mass(zs, j - 1)
        mt, et = ball_mass(zt, j - 1)
        rest = meas(j) - f.radius_float(j - 1)
        total += ztj.value * ms + zsj.value * (mt + ztj.value * rest)
        err += (ztj.tail_bound * ms + ztj.value * es + zsj.tail_bound * (mt + ztj.value * rest)
                + zsj.value * (et + ztj.tail_bound * rest))
    for i in range(start, M + 1):
        a_i, b_i = zt(i), zs(i)
        total += a_i.value * b_i.value * meas(i)
        err += (a_i.tail_bound * b_i.value + b_i.tail_bound * a_i.value
                + a_i.tail_bound * b_i.tail_bound) * meas(i)
    return CertifiedValue(total, err, M + L)


# -- operators on test functions ----------------------------------------------------


@dataclass(frozen=True, eq=False)
class CertifiedFunction(TestFunction):
    """A window view of a function together with certified error information."""

    __test__ = False

    tail_bound: float = 0.0
    exterior_mass: float = 0.0
    quadrature_step: float | None = None


@dataclass(frozen=True, eq=False)
class HeatSolution(CertifiedFunction):
    """``S(t) f`` restricted to the window ``B_k``.

    The exact solution is ``lizorkin_part + ball_coeff * P(elapsed, x, B_k)``
    where the first term is evolved spectrally inside ``D^l_k`` and the second
    is the transition probability of the ball; this keeps repeated evolution
    exact (the semigroup law holds on the stored representation).
    """

    symbol: SymbolAlpha | None = None
    lizorkin_part: TestFunction | None = None
    ball_coeff: complex = 0j
    elapsed: float = 0.0

    def exact_value(self, x, eps: float = DEFAULT_EPS) -> CertifiedValue:
        """Value of the exact solution at any point, inside or outside the window.

        Outside ``B_k`` the solution is radial, so an :class:`OnSphere` is accepted there.
        """
        k = self.support_level
        j = _x_level(x)
        within = j is None or j <= k
        if within and not isinstance(x, SAdicPoint):
            raise TypeError("inside the window the solution needs an actual point")
        inside = self.lizorkin_part(x) if within else 0j
        if self.elapsed == 0:
            return CertifiedValue(inside + (self.ball_coeff if within else 0j), 0.0, 0)
        f = self.filtration
        ri = radial_integral(f, heat(self.elapsed, self.symbol.alpha), x, -k,
                             eps=eps / max(1.0, abs(self.ball_coeff) * f.radius_float(k)))
        rk = f.radius_float(k)
        return CertifiedValue(inside + self.ball_coeff * rk * ri.value,
                              abs(self.ball_coeff) * rk * ri.tail_bound, ri.levels_used)


def _inside(x: SAdicPoint, k: int) -> bool:
    lvl = sphere_level(x)
    return lvl is None or lvl <= k


def _spectral_multiply(fn: TestFunction, factor) -> TestFunction:
    """``F^{-1}[m(||xi||) F[fn]]`` with the multiplier zeroed on the cell around 0."""
    F = fourier(fn)
    k, l = F.levels
    norms = sphere_norms(fn.filtration, k, l)
    m = np.where(norms > 0, factor(np.where(norms > 0, norms, 1.0)), 0.0)
    return inverse_fourier(F._like(F.values * m))


def apply_dalpha(sym: SymbolAlpha, fn: TestFunction, eps: float = DEFAULT_EPS) -> CertifiedFunction:
    """``D^a fn = F^{-1}[||xi||^a F[fn]]`` on the window ``B_k``.

    On the cell ``B_{-k}`` around the origin the symbol is not constant; its
    contribution ``F[fn](0) * integral_{B_{-k}} ||xi||^a chi(-x xi) dxi`` is added
    exactly via :func:`radial_integral`.
    """
    f = fn.filtration
    k, l = fn.levels
    a = sym.alpha
    body = _spectral_multiply(fn, lambda r: r ** a)
    c0 = fn.integral()
    vals = np.array(body.values)
    tail = 0.0
    if c0 != 0:
        ri = radial_integral(f, power(a), None, -k, eps=eps / max(1.0, abs(c0)))
        vals = vals + c0 * ri.value
        tail = abs(c0) * ri.tail_bound
    return CertifiedFunction(f, k, l, vals, tail_bound=tail)


def evolve(sym: SymbolAlpha, fn: TestFunction, t: float,
           eps: float = DEFAULT_EPS) -> TestFunction:
    """Heat semigroup ``S(t) fn = Z(., t) * fn`` viewed on the window of ``fn``.

    Returns ``fn`` itself for ``t == 0``; otherwise a :class:`HeatSolution`.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0:
        return fn
    f = fn.filtration
    k, l = fn.levels
    a = sym.alpha
    if isinstance(fn, HeatSolution) and fn.symbol == sym:
        liz, c, tau = fn.lizorkin_part, fn.ball_coeff, fn.elapsed
    else:
        liz = lizorkin_project(fn)
        c, tau = complex(fn.values.sum() / fn.dim), 0.0
    liz_t = _spectral_multiply(liz, lambda r: np.exp(-t * r ** a))
    total = tau + t
    rk = f.radius_float(k)
    tail = 0.0
    ext = 0.0
    if c != 0:
        # P(total, x, B_k) on the window = r_k * integral_{B_{-k}} exp(-T ||xi||^a)
        ri = radial_integral(f, heat(total, a), None, -k, eps=eps / max(1.0, abs(c) * rk))
        ball = c * rk * ri.value
        tail = abs(c) * rk * ri.tail_bound
        ext = abs(c) * rk * max(0.0, 1.0 - rk * ri.value)
    else:
        ball = 0j
    return HeatSolution(f, k, l, liz_t.values + ball, tail_bound=tail, exterior_mass=ext,
                        symbol=sym, lizorkin_part=liz_t, ball_coeff=c, elapsed=total)


@dataclass(frozen=True)
class Eigenpair:
    level: int
    eigenvalue: float
    filtration: Filtration

    def eigenfunction(self) -> TestFunction:
        """``F^{-1}[Delta_{S_n}]``, an element of ``D^{-n}_{1-n}``."""
        return inverse_fourier(indicator_sphere(self.filtration, self.level))


def spectrum(sym: SymbolAlpha, levels) -> list[Eigenpair]:
    """Eigenvalues ``r_n^a`` for ``n`` in ``levels`` (0 is only a limit point)."""
    f = sym.filtration
    return [Eigenpair(n, f.radius_float(n) ** sym.alpha, f) for n in sorted(levels)]


def duhamel_solve(sym: SymbolAlpha, u0: TestFunction, source: Callable[[float], TestFunction],
                  T: float, steps: int, eps: float = DEFAULT_EPS) -> CertifiedFunction:
    """``S(T) u0 + integral_0^T S(T - tau) source(tau) dtau`` by composite Simpson."""
    if not T > 0:
        raise ValueError("T must be positive")
    if steps < 2 or steps % 2:
        raise ValueError("steps must be an even integer >= 2")
    h = T / steps
    base = evolve(sym, u0, T, eps)
    k, l = u0.levels
    acc = np.zeros(u0.dim, dtype=complex)
    tail = getattr(base, "tail_bound", 0.0)
    for i in range(steps + 1):
        tau = i * h
        g = source(tau)
        if g.levels != (k, l) or g.filtration != u0.filtration:
            raise ValueError(f"source at tau={tau} lives on {g.levels}, expected {(k, l)}")
        w = 1 if i in (0, steps) else (4 if i % 2 else 2)
        term = evolve(sym, g, T - tau, eps)
        acc += w * np.asarray(term.values)
        tail += w * h / 3 * getattr(term, "tail_bound", 0.0)
    vals = np.asarray(base.values) + acc * (h / 3)
    return CertifiedFunction(u0.filtration, k, l, vals, tail_bound=tail, quadrature_step=h)
