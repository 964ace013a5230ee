"""Radius sequences of self-dual ultrametric filtrations.

Two kinds of filtration are supported:

* ``sadic`` -- the filtration of Q_S by the balls ``B_n = e^{-psi(n)} Z_S``
  where ``e^{psi(n)}`` is the lcm of the prime powers ``p^l <= n``, ``p in S``.
* ``general`` -- any filtration whose consecutive group indices are given by
  a bounded sequence of primes (or groups of primes, for composite indices
  such as the ``p^n`` steps of Q_p^n).

Levels are always reindexed so that radii are strictly increasing with
``radius(0) == 1`` and ``radius(-n) == 1 / radius(n)``.  The raw
(non-reindexed) arithmetic functions are available as :func:`von_mangoldt`
and :func:`raw_radius`.
"""
from __future__ import annotations

import heapq
import math
import threading
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass
from fractions import Fraction

DEFAULT_LEVEL_CAP = 64

_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41)


class LevelCapExceeded(ArithmeticError):
    """Raised when a computation needs a level beyond the configured cap."""


class FiltrationError(ValueError):
    pass


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin, exact for n < 3.3e24."""
    if n < 2:
        return False
    for p in _MR_BASES:
        if n % p == 0:
            return n == p
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _MR_BASES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def factorize(n: int) -> tuple[int, ...]:
    """Prime factors of ``n`` with multiplicity, ascending (trial division)."""
    if n < 1:
        raise ValueError(f"cannot factor {n}")
    out = []
    d = 2
    while d * d <= n:
        while n % d == 0:
            out.append(d)
            n //= d
        d += 1
    if n > 1:
        out.append(n)
    return tuple(out)


@dataclass(frozen=True)
class PrimeSet:
    """A finite, strictly increasing set of primes S."""

    primes: tuple[int, ...]

    def __init__(self, primes: Iterable[int]):
        ps = tuple(int(p) for p in primes)
        if not ps:
            raise FiltrationError("prime set must be non-empty")
        if len(set(ps)) != len(ps):
            raise FiltrationError(f"duplicate primes in {ps}")
        bad = [p for p in ps if not is_prime(p)]
        if bad:
            raise FiltrationError(f"not prime: {bad}")
        object.__setattr__(self, "primes", tuple(sorted(ps)))

    def __iter__(self):
        return iter(self.primes)

    def __len__(self):
        return len(self.primes)

    def __contains__(self, p):
        return p in self.primes

    def __repr__(self):
        return f"PrimeSet({list(self.primes)})"


def _as_primeset(primes) -> PrimeSet:
    return primes if isinstance(primes, PrimeSet) else PrimeSet(primes)


def von_mangoldt(primes, n: int) -> int:
    """Raw Lambda_S(n), encoded as the prime p (meaning ``log p``) or 0.

    For ``n <= 0`` the extension ``Lambda(n) = Lambda(|n| + 1)`` is used.
    """
    ps = _as_primeset(primes)
    if n <= 0:
        n = abs(n) + 1
    if n < 2:
        return 0
    for p in ps:
        m = n
        while m % p == 0:
            m //= p
        if m == 1:
            return p
    return 0


def raw_radius(primes, n: int) -> Fraction:
    """Raw ``e^{psi_S(n)}``: lcm of prime powers ``<= |n|``, inverted for n < 0."""
    ps = _as_primeset(primes)
    m = abs(n)
    value = 1
    for p in ps:
        pk = p
        while pk <= m:
            value *= p
            pk *= p
    return Fraction(1, value) if n < 0 else Fraction(value)


@dataclass(frozen=True)
class LevelLookup:
    level: int
    exact: bool  # False: radius(level) < r < radius(level + 1)


def _sadic_steps(primes: tuple[int, ...]):
    """Yield the base prime of each prime power of S in increasing order."""
    heap = [(p, p) for p in primes]
    heapq.heapify(heap)
    while True:
        pk, p = heapq.heappop(heap)
        yield p
        heapq.heappush(heap, (pk * p, p))


class Filtration:
    """Strictly increasing, self-dual radius sequence ``r_n`` (n in Z).

    Use :meth:`sadic` or :func:`make_general_filtration` to construct one.
    The instance is immutable apart from an append-only memo of positive
    levels, guarded by a lock.
    """

    def __init__(self, kind: str, step_source, *, primes: PrimeSet | None = None,
                 bound: int | None = None, level_cap: int = DEFAULT_LEVEL_CAP,
                 label: str = ""):
        if kind not in ("sadic", "general"):
            raise FiltrationError(f"unknown filtration kind {kind!r}")
        if level_cap < 1:
            raise FiltrationError("level_cap must be positive")
        self.kind = kind
        self.primes = primes
        self.bound = bound
        self.level_cap = int(level_cap)
        self.label = label
        self._step_source = step_source
        self._steps: list[tuple[int, ...]] = []  # factor groups for levels 1, 2, ...
        self._radii: list[int] = [1]  # r_0, r_1, ...
        self._exps: list[dict[int, int]] = [{}]  # prime exponents of r_0, r_1, ...
        self._lock = threading.Lock()

    @classmethod
    def sadic(cls, primes, level_cap: int = DEFAULT_LEVEL_CAP) -> Filtration:
        ps = _as_primeset(primes)
        gen = _sadic_steps(ps.primes)
        return cls("sadic", lambda n: (next(gen),), primes=ps, bound=max(ps.primes),
                   level_cap=level_cap, label="Q_S S=" + ",".join(map(str, ps)))

    def with_level_cap(self, level_cap: int) -> Filtration:
        """Same filtration with a different cap (shares no memo state)."""
        if self.kind == "sadic":
            return Filtration.sadic(self.primes, level_cap=level_cap)
        return Filtration("general", self._step_source, bound=self.bound,
                          level_cap=level_cap, label=self.label)

    def __repr__(self):
        return f"Filtration({self.label or self.kind}, level_cap={self.level_cap})"

    def __eq__(self, other):
        if not isinstance(other, Filtration):
            return NotImplemented
        if self is other:
            return True
        if self.kind == other.kind == "sadic":
            return self.primes == other.primes
        return False

    def __hash__(self):
        return hash((self.kind, self.primes)) if self.kind == "sadic" else id(self)

    # -- memo -------------------------------------------------------------

    def _extend(self, m: int) -> None:
        if m > self.level_cap:
            raise LevelCapExceeded(f"level {m} exceeds cap {self.level_cap}")
        if m < len(self._radii):
            return
        with self._lock:
            while len(self._radii) <= m:
                n = len(self._radii)
                group = tuple(self._step_source(n))
                self._check_group(n, group)
                self._steps.append(group)
                exps = dict(self._exps[-1])
                for q in group:
                    exps[q] = exps.get(q, 0) + 1
                self._exps.append(exps)
                self._radii.append(self._radii[-1] * math.prod(group))

    def _check_group(self, n: int, group: tuple[int, ...]) -> None:
        if not group:
            raise FiltrationError(f"empty ramification group at level {n}")
        for q in group:
            if not is_prime(q):
                raise FiltrationError(f"ramification {q} at level {n} is not prime")
        if self.bound is not None and math.prod(group) > self.bound:
            raise FiltrationError(
                f"index {math.prod(group)} at level {n} exceeds declared bound {self.bound}")

    # -- public accessors --------------------------------------------------

    def radius(self, n: int) -> Fraction:
        n = int(n)
        self._extend(abs(n))
        r = self._radii[abs(n)]
        return Fraction(1, r) if n < 0 else Fraction(r)

    def radius_float(self, n: int) -> float:
        n = int(n)
        self._extend(abs(n))
        r = self._radii[abs(n)]
        return 1.0 / r if n < 0 else float(r)

    def ramification_group(self, n: int) -> tuple[int, ...]:
        """Prime factors (with multiplicity) of the index ``|B_n / B_{n-1}|``."""
        n = int(n)
        m = n if n >= 1 else 1 - n
        self._extend(m)
        return self._steps[m - 1]

    def ramification(self, n: int) -> int:
        """The index ``q(n) = radius(n) / radius(n-1)``; ``q(n) == q(1 - n)``."""
        return math.prod(self.ramification_group(n))

    def max_ramification(self) -> int:
        if self.bound is None:
            raise FiltrationError("filtration has no declared ramification bound")
        return self.bound

    def min_ramification(self) -> int:
        return 2

    def exponent(self, p: int, n: int) -> int:
        """``ord_p(radius(n))`` for an S-adic filtration."""
        if self.kind != "sadic":
            raise FiltrationError("per-prime exponents need an S-adic filtration")
        n = int(n)
        self._extend(abs(n))
        e = self._exps[abs(n)].get(p, 0)
        return -e if n < 0 else e

    def exponents(self, n: int) -> dict[int, int]:
        return {p: self.exponent(p, n) for p in self.primes}

    def level_of_radius(self, r) -> LevelLookup:
        r = Fraction(r)
        if r <= 0:
            raise ValueError("radius must be positive")
        if r >= 1:
            n = 0
            while self.radius(n + 1) <= r:
                n += 1
        else:
            n = 0
            while self.radius(n) > r:
                n -= 1
        return LevelLookup(n, self.radius(n) == r)

    def sphere_measure(self, n: int) -> Fraction:
        return self.radius(n) - self.radius(n - 1)


def make_general_filtration(spec, bound: int | None = None,
                            level_cap: int = DEFAULT_LEVEL_CAP,
                            label: str = "general") -> Filtration:
    """Build a filtration from the ramification indices at levels n >= 1.

    ``spec`` is either a finite sequence (repeated periodically) or a callable
    ``n -> entry`` together with an explicit ``bound``.  Each entry is a prime,
    or a sequence of primes whose product is a composite index (e.g.
    ``(2, 2, 2)`` for one level of Q_2^3).  Levels ``n <= 0`` follow from
    ``q(n) = q(1 - n)``.
    """
    def norm_entry(e) -> tuple[int, ...]:
        if isinstance(e, int):
            return (e,)
        return tuple(int(q) for q in e)

    if callable(spec):
        if bound is None:
            raise FiltrationError("a callable spec needs a declared bound")
        fn: Callable[[int], tuple[int, ...]] = lambda n: norm_entry(spec(n))
    else:
        pattern = [norm_entry(e) for e in spec]
        if not pattern:
            raise FiltrationError("empty ramification pattern")
        for i, g in enumerate(pattern):
            for q in g:
                if not is_prime(q):
                    raise FiltrationError(f"pattern entry {i}: {q} is not prime")
        top = max(math.prod(g) for g in pattern)
        if bound is None:
            bound = top
        elif top > bound:
            raise FiltrationError(f"pattern index {top} exceeds bound {bound}")
        fn = lambda n: pattern[(n - 1) % len(pattern)]
    if bound < 2:
        raise FiltrationError("bound must be at least 2")
    return Filtration("general", fn, bound=bound, level_cap=level_cap, label=label)


def taibleson_filtration(p: int, dim: int, level_cap: int = DEFAULT_LEVEL_CAP) -> Filtration:
    """Filtration ``H_l = p^l Z_p^dim`` of Q_p^dim; radii ``p^(dim*l)``."""
    if not is_prime(p) or dim < 1:
        raise FiltrationError("need a prime p and dim >= 1")
    return make_general_filtration([(p,) * dim], level_cap=level_cap,
                                   label=f"Q_{p}^{dim}")


def n_adic_filtration(n: int, level_cap: int = DEFAULT_LEVEL_CAP) -> Filtration:
    """Filtration ``H_l = n^l Z_n`` of the n-adic numbers."""
    if n < 2:
        raise FiltrationError("n must be at least 2")
    return make_general_filtration([factorize(n)], level_cap=level_cap, label=f"Q_({n})")


def telescoped_ratio(f: Filtration, n: int, m: int) -> Fraction:
    """``prod_{k=m+1}^{n} q(k)`` for n > m."""
    out = Fraction(1)
    for k in range(m + 1, n + 1):
        out *= f.ramification(k)
    return out

