"""Configurable-precision primitives: product-form polynomials, bracketed
bisection and root-interlacing predicates.

Every polynomial the solver manipulates is real-rooted with known root
brackets, so polynomials are carried as sorted root lists and evaluated in
product form.  Arithmetic is done with :mod:`mpmath` at a precision chosen
by a :class:`PrecisionConfig`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Optional, Sequence

import mpmath
from mpmath import mpf
from mpmath.libmp import (fzero, from_int, mpf_abs, mpf_add, mpf_cmp, mpf_mul, mpf_shift,
                          mpf_sign, mpf_sub, round_nearest, round_up)

__all__ = [
    "BracketError",
    "DegreeMismatch",
    "PrecisionExhausted",
    "PrecisionConfig",
    "RootPoly",
    "ScaledPair",
    "ProductSum",
    "evaluate",
    "sign_at",
    "root_in_bracket",
    "interlaces",
    "to_decimal",
    "from_decimal",
]


class BracketError(ArithmeticError):
    """The function does not change sign across the supplied bracket."""


class DegreeMismatch(ValueError):
    pass


class PrecisionExhausted(RuntimeError):
    """Raised once all precision escalations have been used up."""


@dataclass(frozen=True)
class PrecisionConfig:
    """Working precision and bisection settings.

    ``bisection_rel_tol`` defaults to ``2**(8 - mantissa_bits)``, the
    smallest tolerance the invariants allow.
    """

    mantissa_bits: int = 256
    bisection_rel_tol: Optional[mpf] = None
    escalation_factor: int = 2
    max_escalations: int = 2

    def __post_init__(self):
        if int(self.mantissa_bits) != self.mantissa_bits or self.mantissa_bits < 64:
            raise ValueError("mantissa_bits must be an integer >= 64")
        if self.escalation_factor < 2:
            raise ValueError("escalation_factor must be >= 2")
        if self.max_escalations < 0:
            raise ValueError("max_escalations must be >= 0")
        floor = mpf(2) ** (8 - self.mantissa_bits)
        tol = floor if self.bisection_rel_tol is None else mpf(self.bisection_rel_tol)
        if tol < floor:
            raise ValueError("bisection_rel_tol must be >= 2**(8 - mantissa_bits)")
        object.__setattr__(self, "bisection_rel_tol", tol)

    @property
    def tol(self) -> mpf:
        return self.bisection_rel_tol

    @property
    def default_cluster_tol(self) -> mpf:
        return mpf(2) ** (-(self.mantissa_bits // 3))

    def workprec(self):
        """Context manager setting mpmath's working precision."""
        return mpmath.workprec(self.mantissa_bits)

    def escalated(self) -> "PrecisionConfig":
        """Next configuration on the escalation ladder.

        The relative tolerance shrinks by the same number of bits the
        mantissa grows, so a retry actually resolves finer features.
        """
        bits = self.mantissa_bits * self.escalation_factor
        tol = self.bisection_rel_tol * mpf(2) ** (self.mantissa_bits - bits)
        return replace(self, mantissa_bits=bits, bisection_rel_tol=tol,
                       max_escalations=self.max_escalations - 1)

    def ladder(self) -> Iterable["PrecisionConfig"]:
        cfg = self
        yield cfg
        for _ in range(self.max_escalations):
            cfg = cfg.escalated()
            yield cfg


@dataclass(frozen=True)
class RootPoly:
    """Monic real-rooted polynomial stored by its strictly increasing roots."""

    roots: tuple = field(default_factory=tuple)

    def __post_init__(self):
        roots = tuple(self.roots)
        for r in roots:
            if not mpmath.isfinite(r):
                raise ValueError("roots must be finite")
        for a, b in zip(roots, roots[1:]):
            if not a < b:
                raise ValueError("roots must be strictly increasing")
        object.__setattr__(self, "roots", roots)

    @property
    def degree(self) -> int:
        return len(self.roots)

    def __call__(self, x, scale=1):
        return evaluate(self, scale, x)

    def __len__(self):
        return len(self.roots)


@dataclass(frozen=True)
class ScaledPair:
    """Leading coefficients of a pair (f_j, g_j); they have opposite signs."""

    mu: mpf
    nu: mpf

    def __post_init__(self):
        if not self.mu * self.nu < 0:
            raise ValueError("mu and nu must have opposite signs")

    @property
    def ratio(self) -> mpf:
        """The positive quantity -mu/nu."""
        return -self.mu / self.nu


def _product(roots: Sequence, x):
    value = mpf(1)
    for r in roots:
        value *= x - r
    return value


def evaluate(p: RootPoly, scale, x):
    """Return ``scale * prod(x - r)`` over the roots of ``p``."""
    return scale * _product(p.roots, x)


def sign_at(p: RootPoly, scale, x) -> int:
    """Sign of ``scale * prod(x - r)`` from root parity; 0 at a root."""
    if scale == 0 or x in p.roots:
        return 0
    above = sum(1 for r in p.roots if r > x)
    s = 1 if scale > 0 else -1
    return -s if above % 2 else s


def _raw(r):
    return r._mpf_ if isinstance(r, mpf) else mpf(r)._mpf_


def _sign(v) -> int:
    return (v > 0) - (v < 0)


class ProductSum:
    """``sum_k c_k * x**e_k * prod(x - r)`` over product-form terms.

    Calling it evaluates at the working precision.  :meth:`sign` returns the
    same sign much more cheaply: it first evaluates at a low precision with a
    rigorous rounding-error bound and only climbs to full precision when the
    value is too close to zero to be trusted.
    """

    def __init__(self, terms: Iterable[tuple]):
        self.terms = tuple((mpf(c), p, int(e)) for c, p, e in terms)
        # raw libmp tuples for the low-precision path
        self._raw = tuple((c._mpf_, tuple(_raw(r) for r in p.roots), e) for c, p, e in self.terms)

    def __call__(self, x):
        total = mpf(0)
        for c, p, e in self.terms:
            total += c * x ** e * _product(p.roots, x)
        return total

    def _low(self, x, prec):
        xv = x._mpf_
        total, mags, ops = fzero, fzero, 0
        for v, roots, e in self._raw:
            count = 1
            for _ in range(e):
                v = mpf_mul(v, xv, prec, round_nearest)
                count += 1
            for r in roots:
                v = mpf_mul(v, mpf_sub(xv, r, prec, round_nearest), prec, round_nearest)
                count += 2
            ops = max(ops, count)
            total = mpf_add(total, v, prec, round_nearest)
            mags = mpf_add(mags, mpf_abs(v), 53, round_up)
        # each rounding contributes relative error <= 2**(1 - prec); 4x safety
        bound = mpf_shift(mpf_mul(mags, from_int(ops + len(self.terms) + 1), 53, round_up), 3 - prec)
        if mpf_cmp(mpf_abs(total), bound) > 0:
            return mpf_sign(total)
        return None

    def sign(self, x) -> int:
        x = mpf(x)
        full = mpmath.mp.prec
        prec = 64
        while prec < full:
            s = self._low(x, prec)
            if s is not None:
                return s
            prec *= 4
        return _sign(self(x))


def root_in_bracket(h: Callable, lo, hi, cfg: PrecisionConfig):
    """Locate a sign change of ``h`` inside ``(lo, hi)`` by plain bisection.

    Stops once ``hi - lo < cfg.tol * max(1, |x|)``.  Raises BracketError when
    ``h(lo)`` and ``h(hi)`` do not have strictly opposite signs.  A
    :class:`ProductSum` is probed through its cheap certified sign.
    """
    lo, hi = mpf(lo), mpf(hi)
    if lo > hi:
        lo, hi = hi, lo
    sgn = h.sign if isinstance(h, ProductSum) else (lambda x: _sign(h(x)))
    s_lo, s_hi = sgn(lo), sgn(hi)
    if s_lo * s_hi >= 0:
        raise BracketError(f"no sign change on [{mpmath.nstr(lo, 12)}, {mpmath.nstr(hi, 12)}]")
    tol = cfg.tol
    while True:
        mid = (lo + hi) / 2
        if hi - lo < tol * max(1, abs(mid)):
            return mid
        if mid == lo or mid == hi:
            # bracket narrower than one ulp at working precision
            return mid
        s_mid = sgn(mid)
        if s_mid == 0:
            return mid
        if s_mid == s_lo:
            lo = mid
        else:
            hi = mid


def interlaces(g: RootPoly, f: RootPoly) -> bool:
    """True iff the roots strictly alternate as g1 < f1 < g2 < f2 < ..."""
    if g.degree != f.degree:
        raise DegreeMismatch(f"degrees differ: {g.degree} != {f.degree}")
    merged = []
    for a, b in zip(g.roots, f.roots):
        merged += [a, b]
    return all(a < b for a, b in zip(merged, merged[1:]))


def decimal_digits(bits: int) -> int:
    return int(math.ceil(bits * math.log10(2))) + 3


def to_decimal(x, bits: Optional[int] = None) -> str:
    """Decimal string carrying ``bits`` of precision (round-trips via from_decimal)."""
    bits = bits or max(mpmath.mp.prec, 53)
    with mpmath.workprec(bits):
        return mpmath.nstr(mpf(x), decimal_digits(bits), strip_zeros=True,
                           min_fixed=-5, max_fixed=20)


def from_decimal(s, bits: Optional[int] = None) -> mpf:
    """Parse a decimal string (or number), correctly rounded to ``bits``.

    ``bits`` defaults to the working precision; strings written by
    :func:`to_decimal` at the same precision come back bit-identical.
    """
    if isinstance(s, bool):
        raise TypeError("boolean is not a number")
    if isinstance(s, (int, float)):
        return mpf(s)
    if not isinstance(s, str):
        raise TypeError(f"expected a decimal string, got {type(s).__name__}")
    with mpmath.workprec(bits or mpmath.mp.prec):
        value = mpf(s)
    if not mpmath.isfinite(value):
        raise ValueError(f"non-finite number {s!r}")
    return value
