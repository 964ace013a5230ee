"""Finite-precision elements of Q_S.

A point stores one exact rational per prime ``p`` in S, each with a
denominator that is a power of ``p``.  A point may carry a *resolution*
level ``l``: it is then only known modulo the ball ``B_l`` and every
coordinate is kept in the canonical range ``0 <= x_p < p^(-e_p(l))`` where
``e_p(n) = ord_p(radius(n))``.  Points with ``resolution=None`` are exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .filtration import Filtration, FiltrationError, LevelCapExceeded

DEFAULT_COSET_CAP = 4096
INFINITY = math.inf


class WindowOverflow(ArithmeticError):
    """A result is not determined at the available resolution."""


class CosetCapExceeded(ArithmeticError):
    pass


class WindowLimitedOrder(int):
    """Order of a point that is zero modulo its window: the true order is >= this."""

    window_limited = True

    def __repr__(self):
        return f"WindowLimitedOrder(>={int(self)})"


def p_valuation(x: Fraction, p: int) -> float:
    """``ord_p`` of a rational; ``inf`` for zero."""
    if x == 0:
        return INFINITY
    v = 0
    num, den = x.numerator, x.denominator
    while num % p == 0:
        num //= p
        v += 1
    while den % p == 0:
        den //= p
        v -= 1
    return v


def _check_coordinate(x: Fraction, p: int) -> None:
    d = x.denominator
    while d % p == 0:
        d //= p
    if d != 1:
        raise ValueError(f"coordinate {x} for p={p} must have a p-power denominator")


def _pow(p: int, e: int) -> Fraction:
    return Fraction(p) ** e


def frac_part(x: Fraction) -> Fraction:
    """p-adic fractional part of a rational with p-power denominator."""
    return x - (x.numerator // x.denominator)


@dataclass(frozen=True, eq=False)
class SAdicPoint:
    filtration: Filtration
    coords: tuple[Fraction, ...]
    resolution: int | None = None

    def __post_init__(self):
        f = self.filtration
        if f.kind != "sadic":
            raise FiltrationError("points need an S-adic filtration")
        if len(self.coords) != len(f.primes):
            raise ValueError("one coordinate per prime required")
        coords = []
        for p, x in zip(f.primes, self.coords):
            x = Fraction(x)
            _check_coordinate(x, p)
            if self.resolution is not None:
                x %= _pow(p, -f.exponent(p, self.resolution))
            coords.append(x)
        object.__setattr__(self, "coords", tuple(coords))

    @property
    def primes(self) -> tuple[int, ...]:
        return self.filtration.primes.primes

    # -- ring operations --------------------------------------------------

    def _merged_resolution(self, other: SAdicPoint) -> int | None:
        if self.filtration != other.filtration:
            raise FiltrationError("points live on different prime sets")
        if self.resolution is None:
            return other.resolution
        if other.resolution is None:
            return self.resolution
        return max(self.resolution, other.resolution)

    def __add__(self, other: SAdicPoint) -> SAdicPoint:
        res = self._merged_resolution(other)
        return SAdicPoint(self.filtration,
                          tuple(a + b for a, b in zip(self.coords, other.coords)), res)

    def __neg__(self) -> SAdicPoint:
        return SAdicPoint(self.filtration, tuple(-a for a in self.coords), self.resolution)

    def __sub__(self, other: SAdicPoint) -> SAdicPoint:
        return self + (-other)

    def __mul__(self, other: SAdicPoint) -> SAdicPoint:
        self._merged_resolution(other)
        res = product_resolution(self, other)
        return SAdicPoint(self.filtration,
                          tuple(a * b for a, b in zip(self.coords, other.coords)), res)

    def __eq__(self, other):
        if not isinstance(other, SAdicPoint):
            return NotImplemented
        try:
            d = self - other
        except FiltrationError:
            return False
        return d.is_zero()

    def __hash__(self):
        return hash(self.coords)

    def is_zero(self) -> bool:
        return all(c == 0 for c in self.coords)

    def with_resolution(self, resolution: int | None) -> SAdicPoint:
        if resolution is not None and self.resolution is not None and resolution < self.resolution:
            raise WindowOverflow("cannot refine a point beyond its known resolution")
        return SAdicPoint(self.filtration, self.coords, resolution)

    def __repr__(self):
        cs = ", ".join(str(c) for c in self.coords)
        res = "" if self.resolution is None else f" mod B_{self.resolution}"
        return f"SAdicPoint(({cs}){res})"

    # -- serialization ------------------------------------------------------

    def to_json(self) -> list[dict]:
        out = []
        for p, x in zip(self.primes, self.coords):
            e = -int(p_valuation(x, p)) if x != 0 and p_valuation(x, p) < 0 else 0
            num = x * p ** e
            out.append({"p": p, "num": int(num), "den_exp": e})
        return out

    @classmethod
    def from_json(cls, f: Filtration, data, resolution: int | None = None) -> SAdicPoint:
        by_p = {int(c["p"]): Fraction(int(c["num"])) / _pow(int(c["p"]), int(c["den_exp"]))
                for c in data}
        if set(by_p) != set(f.primes):
            raise ValueError(f"coordinates {sorted(by_p)} do not match primes {f.primes}")
        return cls(f, tuple(by_p[p] for p in f.primes), resolution)


def point(f: Filtration, coords, resolution: int | None = None) -> SAdicPoint:
    """Convenience constructor; ``coords`` may be ints, strings or Fractions."""
    return SAdicPoint(f, tuple(Fraction(c) for c in coords), resolution)


def zero(f: Filtration, resolution: int | None = None) -> SAdicPoint:
    return SAdicPoint(f, tuple(Fraction(0) for _ in f.primes), resolution)


def _modulus_exponent(x: SAdicPoint, p: int) -> float:
    if x.resolution is None:
        return INFINITY
    return -x.filtration.exponent(p, x.resolution)


def _level_containing(f: Filtration, exps: dict[int, float]) -> int | None:
    """Smallest level L with ``p^{exps[p]} Z_p`` contained in ``B_L`` for all p."""
    if all(e == INFINITY for e in exps.values()):
        return None
    lo, hi = -f.level_cap, f.level_cap
    if any(-f.exponent(p, hi) > e for p, e in exps.items()):
        raise WindowOverflow("product precision falls outside the level cap")
    if all(-f.exponent(p, lo) <= e for p, e in exps.items()):
        return lo
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if all(-f.exponent(p, mid) <= e for p, e in exps.items()):
            hi = mid
        else:
            lo = mid
    return hi


def product_resolution(x: SAdicPoint, y: SAdicPoint) -> int | None:
    """Coarsest-needed resolution of ``x*y`` given the resolutions of the factors.

    If ``x`` is known modulo ``p^a`` and ``y`` modulo ``p^b`` then ``xy`` is
    known modulo ``p^min(v(x)+b, v(y)+a, a+b)`` in each coordinate.
    """
    f = x.filtration
    exps = {}
    for p, a, b in zip(f.primes, x.coords, y.coords):
        ma, mb = _modulus_exponent(x, p), _modulus_exponent(y, p)
        va = min(p_valuation(a, p), ma)
        vb = min(p_valuation(b, p), mb)
        exps[p] = min(va + mb, vb + ma, ma + mb)
    return _level_containing(f, exps)


def _membership_level(x: SAdicPoint) -> int:
    """Smallest level n with x in B_n (x nonzero)."""
    f = x.filtration
    vals = {p: p_valuation(c, p) for p, c in zip(f.primes, x.coords)}

    def inside(n):
        return all(vals[p] >= -f.exponent(p, n) for p in f.primes)

    lo, hi = -f.level_cap, f.level_cap
    if not inside(hi):
        raise LevelCapExceeded("point norm exceeds the level cap")
    if inside(lo):
        raise LevelCapExceeded("point norm below the level cap")
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if inside(mid):
            hi = mid
        else:
            lo = mid
    return hi


def order(x: SAdicPoint):
    """``max{n : x in e^{psi(n)} Z_S}``; ``inf`` for the exact zero.

    A point that vanishes modulo its window returns a
    :class:`WindowLimitedOrder` holding ``-resolution``.
    """
    if x.is_zero():
        if x.resolution is None:
            return INFINITY
        return WindowLimitedOrder(-x.resolution)
    return -_membership_level(x)


def sphere_level(x: SAdicPoint) -> int | None:
    """The n with x in S_n, or None for (window-)zero."""
    if x.is_zero():
        return None
    return _membership_level(x)


def norm(x: SAdicPoint) -> Fraction:
    if x.is_zero():
        return Fraction(0)
    return x.filtration.radius(_membership_level(x))


def distance(x: SAdicPoint, y: SAdicPoint) -> Fraction:
    return norm(x - y)


@dataclass(frozen=True)
class CharacterValue:
    phase: Fraction  # chi = exp(2 pi i phase), phase in [0, 1)

    def __post_init__(self):
        object.__setattr__(self, "phase", Fraction(self.phase) % 1)

    def __add__(self, other: CharacterValue) -> CharacterValue:
        return CharacterValue(self.phase + other.phase)

    def __complex__(self):
        return complex(np.exp(2j * np.pi * float(self.phase)))

    def value(self) -> complex:
        return complex(self)


def char_phase(x: SAdicPoint) -> CharacterValue:
    """Phase of the canonical character: ``sum_p {x_p}_p mod 1``."""
    if x.resolution is not None and x.resolution > 0:
        raise WindowOverflow("character is not defined modulo a ball larger than Z_S")
    return CharacterValue(sum((frac_part(c) for c in x.coords), Fraction(0)))


def pairing(xi: SAdicPoint, x: SAdicPoint) -> CharacterValue:
    return char_phase(xi * x)


# -- coset enumeration -----------------------------------------------------


def coset_shape(f: Filtration, k: int, l: int) -> tuple[int, ...]:
    """Per-prime cyclic factor sizes of ``B_k / B_l``."""
    if l > k:
        raise ValueError(f"need l <= k, got l={l}, k={k}")
    return tuple(p ** (f.exponent(p, k) - f.exponent(p, l)) for p in f.primes)


def coset_count(f: Filtration, k: int, l: int) -> int:
    r = f.radius(k) / f.radius(l)
    assert r.denominator == 1
    return int(r)


def coset_digits(f: Filtration, k: int, l: int, cap: int = DEFAULT_COSET_CAP) -> np.ndarray:
    """Integer digit vectors ``a`` (one column per prime), rows in canonical order.

    Representative ``i`` has coordinates ``a[i, j] * p_j^(-e_p(k))``.  Rows are
    in C order over the per-prime factors, primes ascending; within a prime the
    integer ``a`` increases, i.e. its little-endian digit vector is read with
    the lowest p-exponent digit least significant.
    """
    shape = coset_shape(f, k, l)
    n = math.prod(shape)
    if n > cap:
        raise CosetCapExceeded(f"{n} cosets exceed cap {cap}")
    grids = np.indices(shape).reshape(len(shape), -1).T
    return grids.astype(np.int64)


def enumerate_cosets(f: Filtration, k: int, l: int,
                     cap: int = DEFAULT_COSET_CAP) -> list[SAdicPoint]:
    """Canonical representatives of ``B_k / B_l`` in canonical order."""
    digits = coset_digits(f, k, l, cap)
    scale = [_pow(p, -f.exponent(p, k)) for p in f.primes]
    return [SAdicPoint(f, tuple(int(a) * s for a, s in zip(row, scale)), l) for row in digits]


def coset_index(x: SAdicPoint, k: int, l: int) -> int | None:
    """Index of the coset of ``x`` in ``B_k / B_l``; None if ``x`` is outside ``B_k``."""
    f = x.filtration
    if x.resolution is not None and x.resolution > l:
        raise WindowOverflow(f"point resolution {x.resolution} is coarser than {l}")
    shape = coset_shape(f, k, l)
    idx = 0
    for p, c, size in zip(f.primes, x.coords, shape):
        scaled = c * _pow(p, f.exponent(p, k))
        if scaled.denominator != 1:
            return None
        idx = idx * size + int(scaled) % size
    return idx


# -- sampling ----------------------------------------------------------------


def randbelow(rng: np.random.Generator, n: int) -> int:
    """Uniform integer in ``[0, n)`` for arbitrarily large ``n``."""
    if n <= 0:
        raise ValueError("n must be positive")
    if n < 2 ** 62:
        return int(rng.integers(n))
    bits = n.bit_length()
    while True:
        v = 0
        got = 0
        while got < bits:
            v = (v << 62) | int(rng.integers(2 ** 62))
            got += 62
        v >>= got - bits
        if v < n:
            return v


def _sample(f: Filtration, n: int, rng, resolution: int, sphere: bool) -> SAdicPoint:
    if f.kind != "sadic":
        raise FiltrationError("sampling points needs an S-adic filtration")
    if n <= resolution:
        if sphere:
            raise WindowOverflow(f"sphere S_{n} is below resolution {resolution}")
        return zero(f, resolution)
    shape = coset_shape(f, n, resolution)
    lead = f.ramification_group(n)[0] if sphere else None
    coords = []
    for p, size in zip(f.primes, shape):
        if p == lead:
            a = p * randbelow(rng, size // p) + 1 + randbelow(rng, p - 1)
        else:
            a = randbelow(rng, size)
        coords.append(a * _pow(p, -f.exponent(p, n)))
    return SAdicPoint(f, tuple(coords), resolution)


def sample_uniform_ball(f: Filtration, n: int, rng: np.random.Generator,
                        resolution: int) -> SAdicPoint:
    """Haar-uniform point of ``B_n`` known modulo ``B_resolution``."""
    return _sample(f, n, rng, resolution, sphere=False)


def sample_uniform_sphere(f: Filtration, n: int, rng: np.random.Generator,
                          resolution: int) -> SAdicPoint:
    """Haar-uniform point of ``S_n = B_n \\ B_{n-1}``; the digit of the prime
    ``q(n)`` at the top p-exponent is forced nonzero, so no rejection is needed."""
    return _sample(f, n, rng, resolution, sphere=True)
