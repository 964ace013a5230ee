"""Locally constant test functions on Q_S and their Fourier transform.

A :class:`TestFunction` in ``D^l_k`` is supported in ``B_k`` and constant on
cosets of ``B_l``; its values are stored in the canonical coset order of
:func:`ultraheat.sadic.coset_digits`.  The Fourier transform maps
``D^l_k`` onto ``D^{-k}_{-l}``::

    F[f](xi) = integral f(x) chi(xi x) dx = radius(l) * sum_j chi(xi c_j) f(c_j)
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .filtration import Filtration, FiltrationError
from .sadic import (DEFAULT_COSET_CAP, CosetCapExceeded, SAdicPoint, WindowOverflow, coset_digits,
                    coset_index, coset_shape, enumerate_cosets)

LIZORKIN_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class TestFunction:
    """An element of ``D^l_k(Q_S)``: values on the cosets of ``B_l`` in ``B_k``."""

    __test__ = False  # not a pytest class

    filtration: Filtration
    support_level: int
    constancy_level: int
    values: np.ndarray

    def __post_init__(self):
        k, l = self.support_level, self.constancy_level
        if l > k:
            raise ValueError(f"constancy level {l} exceeds support level {k}")
        vals = np.array(self.values, dtype=complex).reshape(-1)
        dim = dimension(self.filtration, k, l)
        if vals.size != dim:
            raise ValueError(f"expected {dim} values, got {vals.size}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def dim(self) -> int:
        return self.values.size

    @property
    def levels(self) -> tuple[int, int]:
        return self.support_level, self.constancy_level

    def cell_measure(self) -> float:
        return self.filtration.radius_float(self.constancy_level)

    def _like(self, values) -> TestFunction:
        return TestFunction(self.filtration, self.support_level, self.constancy_level, values)

    def __add__(self, other: TestFunction) -> TestFunction:
        a, b = common_refinement(self, other)
        return a._like(a.values + b.values)

    def __sub__(self, other: TestFunction) -> TestFunction:
        a, b = common_refinement(self, other)
        return a._like(a.values - b.values)

    def __neg__(self) -> TestFunction:
        return self._like(-self.values)

    def __mul__(self, c) -> TestFunction:
        if isinstance(c, TestFunction):
            a, b = common_refinement(self, c)
            return a._like(a.values * b.values)
        return self._like(self.values * c)

    __rmul__ = __mul__

    def __truediv__(self, c) -> TestFunction:
        return self._like(self.values / c)

    def __call__(self, x: SAdicPoint) -> complex:
        return evaluate(self, x)

    def cosets(self) -> list[SAdicPoint]:
        return enumerate_cosets(self.filtration, self.support_level, self.constancy_level,
                                cap=max(DEFAULT_COSET_CAP, self.dim))

    def integral(self) -> complex:
        return complex(self.values.sum() * self.cell_measure())

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) * self.cell_measure()))

    def is_lizorkin(self, tol: float = LIZORKIN_TOL) -> bool:
        """True when the total integral vanishes (Fourier image vanishes near 0)."""
        scale = max(1.0, float(np.abs(self.values).sum() * self.cell_measure()))
        return abs(self.integral()) <= tol * scale


def dimension(f: Filtration, k: int, l: int) -> int:
    r = f.radius(k) / f.radius(l)
    if r.denominator != 1:
        raise ValueError(f"need l <= k, got l={l}, k={k}")
    return int(r)


def _check_cap(f: Filtration, k: int, l: int, cap: int) -> None:
    n = dimension(f, k, l)
    if n > cap:
        raise CosetCapExceeded(f"dimension {n} exceeds cap {cap}")


# -- constructors -----------------------------------------------------------


def zeros(f: Filtration, k: int, l: int) -> TestFunction:
    return TestFunction(f, k, l, np.zeros(dimension(f, k, l), dtype=complex))


def indicator_ball(f: Filtration, n: int, k: int | None = None,
                   l: int | None = None) -> TestFunction:
    """``Delta_{B_n}`` as an element of ``D^l_k`` (defaults ``k = l = n``)."""
    k = n if k is None else k
    l = n if l is None else l
    if not l <= n <= k:
        raise ValueError("need l <= n <= k")
    digits = coset_digits(f, k, l, cap=dimension(f, k, l))
    return TestFunction(f, k, l, _ball_mask(f, digits, k, n).astype(complex))


def _ball_mask(f: Filtration, digits: np.ndarray, k: int, n: int) -> np.ndarray:
    """Rows of ``digits`` (cosets of B_k) whose representative lies in B_n."""
    mask = np.ones(len(digits), dtype=bool)
    for j, p in enumerate(f.primes):
        step = p ** (f.exponent(p, k) - f.exponent(p, n))
        mask &= digits[:, j] % step == 0
    return mask


def indicator_sphere(f: Filtration, n: int, k: int | None = None,
                     l: int | None = None) -> TestFunction:
    """``Delta_{S_n}``, by default in ``D^{n-1}_n``."""
    k = n if k is None else k
    l = n - 1 if l is None else l
    return indicator_ball(f, n, k, l) - indicator_ball(f, n - 1, k, l)


def delta_coset(f: Filtration, k: int, l: int, index: int) -> TestFunction:
    vals = np.zeros(dimension(f, k, l), dtype=complex)
    vals[index] = 1.0
    return TestFunction(f, k, l, vals)


def from_callable(f: Filtration, k: int, l: int, fn) -> TestFunction:
    """Sample ``fn`` (a function of :class:`SAdicPoint`) on coset representatives."""
    reps = enumerate_cosets(f, k, l, cap=dimension(f, k, l))
    return TestFunction(f, k, l, np.array([fn(x) for x in reps], dtype=complex))


def random_function(f: Filtration, k: int, l: int, rng: np.random.Generator) -> TestFunction:
    n = dimension(f, k, l)
    return TestFunction(f, k, l, rng.standard_normal(n) + 1j * rng.standard_normal(n))


# -- evaluation and re-expansion ------------------------------------------------


def evaluate(fn: TestFunction, x: SAdicPoint) -> complex:
    if x.filtration != fn.filtration:
        raise FiltrationError("point and function use different prime sets")
    if x.resolution is not None and x.resolution > fn.constancy_level:
        raise WindowOverflow(
            f"point known modulo B_{x.resolution}, function needs B_{fn.constancy_level}")
    idx = coset_index(x, fn.support_level, fn.constancy_level)
    return 0j if idx is None else complex(fn.values[idx])


def refine(fn: TestFunction, k: int, l: int, cap: int = DEFAULT_COSET_CAP) -> TestFunction:
    """Re-express ``fn`` in ``D^l_k`` for ``k >= support``, ``l <= constancy``."""
    f = fn.filtration
    k0, l0 = fn.levels
    if (k, l) == (k0, l0):
        return fn
    if k < k0 or l > l0:
        raise ValueError(f"cannot embed D^{l0}_{k0} into D^{l}_{k}")
    digits = coset_digits(f, k, l, cap=cap)
    inside = _ball_mask(f, digits, k, k0)
    old_shape = coset_shape(f, k0, l0)
    idx = np.zeros(len(digits), dtype=np.int64)
    for j, (p, size) in enumerate(zip(f.primes, old_shape)):
        shift = p ** (f.exponent(p, k) - f.exponent(p, k0))
        idx = idx * size + (digits[:, j] // shift) % size
    vals = np.zeros(len(digits), dtype=complex)
    vals[inside] = fn.values[idx[inside]]
    return TestFunction(f, k, l, vals)


def common_refinement(a: TestFunction, b: TestFunction,
                      cap: int = DEFAULT_COSET_CAP) -> tuple[TestFunction, TestFunction]:
    if a.filtration != b.filtration:
        raise FiltrationError("functions use different filtrations")
    k = max(a.support_level, b.support_level)
    l = min(a.constancy_level, b.constancy_level)
    return refine(a, k, l, cap), refine(b, k, l, cap)


# -- Fourier analysis -----------------------------------------------------------


@lru_cache(maxsize=32)
def _phase_numerators(f: Filtration, k: int, l: int) -> tuple[np.ndarray, int]:
    """Integer matrix P and denominator D with ``chi(xi_i c_j) = exp(2 pi i P_ij / D)``.

    ``c_j`` runs over ``B_k/B_l`` and ``xi_i`` over ``B_{-l}/B_{-k}``; both are
    indexed by the same digit vectors, and the phase of a digit pair is
    ``sum_p a_p b_p / p^{m_p} mod 1``.
    """
    shape = coset_shape(f, k, l)
    digits = coset_digits(f, k, l, cap=math.prod(shape))
    D = math.prod(shape)
    P = np.zeros((len(digits), len(digits)), dtype=np.int64)
    for j, size in enumerate(shape):
        a = digits[:, j]
        P += (np.outer(a, a) % size) * (D // size)
    P %= D
    P.setflags(write=False)
    return P, D


def character_matrix(f: Filtration, k: int, l: int, cap: int = DEFAULT_COSET_CAP) -> np.ndarray:
    """``M[i, j] = chi(xi_i c_j)`` for ``c_j`` in ``B_k/B_l``, ``xi_i`` in ``B_{-l}/B_{-k}``."""
    _check_cap(f, k, l, cap)
    P, D = _phase_numerators(f, k, l)
    return np.exp(2j * np.pi * (P / D))


def fourier(fn: TestFunction, method: str = "direct",
            cap: int = DEFAULT_COSET_CAP) -> TestFunction:
    """``F: D^l_k -> D^{-k}_{-l}``.

    ``method="direct"`` sums against the character table; ``"fft"`` uses the
    product structure ``B_k/B_l = prod_p Z/p^{m_p}`` and a multidimensional FFT.
    """
    f = fn.filtration
    k, l = fn.levels
    w = f.radius_float(l)
    if method == "direct":
        out = w * (character_matrix(f, k, l, cap) @ fn.values)
    elif method == "fft":
        _check_cap(f, k, l, cap)
        shape = coset_shape(f, k, l)
        out = (w * fn.dim) * np.fft.ifftn(fn.values.reshape(shape)).reshape(-1)
    else:
        raise ValueError(f"unknown method {method!r}")
    return TestFunction(f, -l, -k, out)


def inverse_fourier(fn: TestFunction, method: str = "direct",
                    cap: int = DEFAULT_COSET_CAP) -> TestFunction:
    """``F^{-1}[g](x) = integral g(xi) chi(-x xi) dxi``; inverse of :func:`fourier`."""
    f = fn.filtration
    k, l = fn.levels
    w = f.radius_float(l)
    if method == "direct":
        out = w * (np.conj(character_matrix(f, k, l, cap)) @ fn.values)
    elif method == "fft":
        _check_cap(f, k, l, cap)
        shape = coset_shape(f, k, l)
        out = w * np.fft.fftn(fn.values.reshape(shape)).reshape(-1)
    else:
        raise ValueError(f"unknown method {method!r}")
    return TestFunction(f, -l, -k, out)


def inner_product(a: TestFunction, b: TestFunction) -> complex:
    """``<a, b> = integral a conj(b)``."""
    a, b = common_refinement(a, b)
    return complex(np.sum(a.values * np.conj(b.values)) * a.cell_measure())


def convolve(a: TestFunction, b: TestFunction, method: str = "direct") -> TestFunction:
    """``(a * b)(x) = integral a(y) b(x - y) dy`` via the convolution theorem."""
    a, b = common_refinement(a, b)
    fa, fb = fourier(a, method), fourier(b, method)
    return inverse_fourier(fa._like(fa.values * fb.values), method)


def lizorkin_project(fn: TestFunction) -> TestFunction:
    """Subtract the mean over ``B_k`` so that the total integral is zero."""
    mean = fn.values.sum() / fn.dim
    return fn._like(fn.values - mean)


def zero_cell_value(fn: TestFunction) -> complex:
    """``F[fn]`` on the cell ``B_{-k}`` around the origin, i.e. the integral of ``fn``."""
    return fn.integral()


def sphere_norms(f: Filtration, k: int, l: int) -> np.ndarray:
    """Norm of each coset representative of ``B_k/B_l`` (0 for the zero coset)."""
    digits = coset_digits(f, k, l, cap=dimension(f, k, l))
    out = np.zeros(len(digits))
    assigned = np.zeros(len(digits), dtype=bool)
    for n in range(k, l, -1):
        inside = _ball_mask(f, digits, k, n)
        outer = _ball_mask(f, digits, k, n - 1)
        sel = inside & ~outer & ~assigned
        out[sel] = f.radius_float(n)
        assigned |= sel
    return out


# -- file format -------------------------------------------------------------------


def to_json(fn: TestFunction) -> dict:
    reps = fn.cosets()
    return {
        "primes": list(fn.filtration.primes),
        "support_level": fn.support_level,
        "constancy_level": fn.constancy_level,
        "values": [
            {"coset": [{"num": c["num"], "den_exp": c["den_exp"]} for c in x.to_json()],
             "re": float(v.real), "im": float(v.imag)}
            for x, v in zip(reps, fn.values)
        ],
    }


def from_json(data: dict, f: Filtration | None = None) -> TestFunction:
    if f is None:
        f = Filtration.sadic(data["primes"])
    elif list(f.primes) != list(data["primes"]):
        raise FiltrationError("function file primes do not match the filtration")
    k, l = int(data["support_level"]), int(data["constancy_level"])
    reps = enumerate_cosets(f, k, l, cap=max(DEFAULT_COSET_CAP, dimension(f, k, l)))
    entries = data["values"]
    if len(entries) != len(reps):
        raise ValueError(f"expected {len(reps)} values, found {len(entries)}")
    vals = np.empty(len(reps), dtype=complex)
    for i, (x, e) in enumerate(zip(reps, entries)):
        coords = tuple(Fraction(int(c["num"])) / Fraction(p) ** int(c["den_exp"])
                       for p, c in zip(f.primes, e["coset"]))
        if SAdicPoint(f, coords, l) != x:
            raise ValueError(f"entry {i} is out of canonical coset order")
        vals[i] = complex(float(e["re"]), float(e.get("im", 0.0)))
    return TestFunction(f, k, l, vals)


def dump(fn: TestFunction, path) -> None:
    with open(path, "w") as fh:
        json.dump(to_json(fn), fh, indent=1)


def load(path, f: Filtration | None = None) -> TestFunction:
    with open(path) as fh:
        return from_json(json.load(fh), f)
