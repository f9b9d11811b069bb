"""Spectrum of the pencil K - lambda (M + B) for a fixed-free chain.

The solver never forms matrices: leading principal minors come from the
tridiagonal pivot recurrence, and eigenvalues are located by bisecting the
Sylvester inertia count.  :func:`dense_charpoly` is an independent oracle
that expands the determinant by cofactors.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

import mpmath
from mpmath import mpf

from .chain import ChainSystem, ValidationError, validate
from .numerics import PrecisionConfig, PrecisionExhausted, to_decimal

__all__ = [
    "DegenerateSigma",
    "SizeLimit",
    "SturmSample",
    "SpectrumReport",
    "fg_sequence",
    "sturm_count",
    "spectrum",
    "dense_charpoly",
    "det_mass_plus_inertance",
]


class DegenerateSigma(ArithmeticError):
    """A leading principal minor vanished exactly at the trial value."""


class SizeLimit(ValueError):
    pass


@dataclass(frozen=True)
class SturmSample:
    sigma: mpf
    count: int


@dataclass(frozen=True)
class SpectrumReport:
    eigenvalues: tuple
    multiplicities: tuple
    residuals: tuple
    cluster_tol: mpf
    samples: tuple = field(default=(), compare=False)

    @property
    def n(self) -> int:
        return sum(self.multiplicities)

    def to_json(self, bits: int = None, float64: bool = False) -> dict:
        conv = float if float64 else (lambda x: to_decimal(x, bits))
        return {
            "eigenvalues": [conv(x) for x in self.eigenvalues],
            "multiplicities": list(self.multiplicities),
            "residuals": [conv(x) for x in self.residuals],
        }


def _is_rational(x) -> bool:
    return isinstance(x, (int, Fraction)) and not isinstance(x, bool)


def _to_mpf(x) -> mpf:
    if isinstance(x, Fraction):
        return mpf(x.numerator) / x.denominator
    return mpf(x)


def _values(chain: ChainSystem, *extra):
    """Chain parameters (and extra scalars) as Fractions when all rational, else mpf."""
    items = list(chain.m) + list(chain.k) + list(chain.b) + list(extra)
    if all(_is_rational(x) for x in items):
        conv = Fraction
    else:
        conv = _to_mpf
    n = chain.n
    vals = [conv(x) for x in items]
    return vals[:n], vals[n:2 * n], vals[2 * n:3 * n], vals[3 * n:]


def fg_sequence(chain: ChainSystem, lam) -> List[Tuple]:
    """Values (f_j(lam), g_j(lam)) for j = 1..n.

    f_j is det of the order-j chain pencil, g_j its leading minor of order
    j - 1.  Exact when the chain and ``lam`` are rational.
    """
    m, k, b, (lam,) = _values(chain, lam)
    f = k[0] - lam * (m[0] + b[0])
    g = f * 0 + 1
    out = [(f, g)]
    for j in range(1, chain.n):
        c = k[j] - lam * b[j]
        g_next = f + c * g
        f = -lam * m[j] * g_next + c * f
        g = g_next
        out.append((f, g))
    return out


def _pencil_bands(m, k, b, sigma):
    n = len(m)
    diag, off = [], []
    for j in range(n):
        d = k[j] - sigma * (m[j] + b[j])
        if j + 1 < n:
            d += k[j + 1] - sigma * b[j + 1]
            off.append(-(k[j + 1] - sigma * b[j + 1]))
        diag.append(d)
    return diag, off


def _negative_pivots(m, k, b, sigma, order: int) -> int:
    diag, off = _pencil_bands(m, k, b, sigma)
    count = 0
    d = diag[0]
    for j in range(order):
        if j:
            d = diag[j] - off[j - 1] ** 2 / d
        if d == 0:
            raise DegenerateSigma(f"minor {j + 1} vanishes")
        if d < 0:
            count += 1
    return count


def sturm_count(chain: ChainSystem, sigma, order: Optional[int] = None) -> SturmSample:
    """Number of pencil eigenvalues strictly below ``sigma``.

    Counts negative pivots of K - sigma (M + B); with M + B positive definite
    this is the inertia count.  ``order`` restricts to the leading
    ``order x order`` sub-pencil (``order = n - 1`` gives the roots of g_n).
    """
    m, k, b, (s,) = _values(chain, sigma)
    order = chain.n if order is None else order
    return SturmSample(sigma, _negative_pivots(m, k, b, s, order))


def det_mass_plus_inertance(m, k, b):
    n = len(m)
    prev, cur = 1, m[0] + b[0] + (b[1] if n > 1 else 0)
    for j in range(1, n):
        dj = m[j] + b[j] + (b[j + 1] if j + 1 < n else 0)
        prev, cur = cur, dj * cur - b[j] ** 2 * prev
    return cur


def _bounds(m, k, b):
    n = len(m)
    row_k = [2 * (k[j] + (k[j + 1] if j + 1 < n else 0)) for j in range(n)]
    row_mb = [m[j] + b[j] + (b[j + 1] if j + 1 < n else 0) + b[j] + (b[j + 1] if j + 1 < n else 0)
              for j in range(n)]
    # (M+B) diagonal minus off-diagonal row sum is m_1 + b_1 in row 1, m_j elsewhere
    dominance = min([m[0] + b[0]] + list(m[1:]))
    upper = 1 + max(row_k) / dominance
    det_k = k[0]
    for x in k[1:]:
        det_k *= x
    lower = det_k / (max(row_k) ** (n - 1) * max(row_mb)) / 2
    return lower, upper


class _Kit:
    """Number type used by the bisection: mpmath (default) or gmpy2 mpfr."""

    def __init__(self, backend: str, bits: int):
        self.backend = backend
        self.bits = bits
        if backend == "mpmath":
            self.context = lambda: mpmath.workprec(bits)
            self.convert = _to_mpf
            self.sqrt = mpmath.sqrt
            self.back = lambda x: x
        elif backend == "mpfr":
            import gmpy2

            self.context = lambda: gmpy2.context(gmpy2.get_context(), precision=bits)
            self.convert = _mpfr_from
            self.sqrt = gmpy2.sqrt
            self.back = lambda x: _mpf_from_mpfr(x, bits)
        else:
            raise ValueError(f"unknown backend {backend!r}")


def _mpfr_from(x):
    import gmpy2

    if isinstance(x, mpf):
        man, exp = x.man, x.exp
        return gmpy2.mul_2exp(gmpy2.mpfr(man), exp)
    return gmpy2.mpfr(x)


def _mpf_from_mpfr(x, bits: int) -> mpf:
    man, exp = x.as_mantissa_exp()
    with mpmath.workprec(bits):
        return mpf((int(man), int(exp)))


def spectrum(chain: ChainSystem, cfg: Optional[PrecisionConfig] = None,
             cluster_tol=None, refine: bool = True,
             order: Optional[int] = None, backend: str = "mpmath") -> SpectrumReport:
    """Eigenvalues with multiplicities by bisection of the inertia count.

    Count jumps are localized to relative width ``cluster_tol`` (default
    ``2**(-bits/3)``); a jump of size t inside such a window is reported as
    one eigenvalue of multiplicity t.  With ``refine`` each window is then
    bisected further, down to the bisection tolerance, for as long as the
    whole jump stays on one side.  ``backend="mpfr"`` runs the same
    bisection on gmpy2 floats of the same precision, which is several times
    faster for the short mantissas used in bulk testing.
    """
    problems = validate(chain)
    if problems:
        raise ValidationError(problems)
    cfg = cfg or PrecisionConfig()
    order = chain.n if order is None else order
    kit = _Kit(backend, cfg.mantissa_bits)
    with cfg.workprec():
        cluster_tol = cfg.default_cluster_tol if cluster_tol is None else mpf(cluster_tol)
        tol = cfg.tol
    samples = []
    with kit.context():
        m, k, b = (list(map(kit.convert, seq)) for seq in (chain.m, chain.k, chain.b))
        ctol, btol = kit.convert(cluster_tol), kit.convert(tol)
        nudge = kit.convert(mpf(2) ** (-(cfg.mantissa_bits // 2)))

        def count(s, lo=None, hi=None):
            for _ in range(8):
                try:
                    c = _negative_pivots(m, k, b, s, order)
                    samples.append((s, c))
                    return s, c
                except DegenerateSigma:
                    step = s * nudge
                    if lo is not None:
                        step = min(step, (hi - lo) / 4)
                    s = s + step
            raise PrecisionExhausted("inertia count keeps hitting a zero minor")

        lower, upper = _bounds(m, k, b)
        lower, c_lo = count(lower)
        while c_lo:
            lower, c_lo = count(lower / 2)
        upper, c_hi = count(upper)
        while c_hi < order:
            upper, c_hi = count(upper * 2)

        clusters = []
        stack = [(lower, upper, c_lo, c_hi)]
        max_iter = 64 * cfg.mantissa_bits + 10_000
        steps = 0
        while stack:
            lo, hi, clo, chi = stack.pop()
            if chi == clo:
                continue
            steps += 1
            if steps > max_iter:
                raise PrecisionExhausted("spectrum localization stalled")
            if hi - lo <= ctol * max(1, hi):
                if refine:
                    lo, hi = _refine(count, lo, hi, clo, chi, btol)
                clusters.append(((lo + hi) / 2, chi - clo))
                continue
            mid = kit.sqrt(lo * hi) if hi > 4 * lo else (lo + hi) / 2
            if not lo < mid < hi:
                raise PrecisionExhausted("bisection interval below working precision")
            mid, cmid = count(mid, lo, hi)
            stack.append((mid, hi, cmid, chi))
            stack.append((lo, mid, clo, cmid))
        clusters.sort(key=lambda c: c[0])
        eigs = tuple(kit.back(c[0]) for c in clusters)
        samples = tuple(SturmSample(kit.back(s), c) for s, c in samples)
    with cfg.workprec():
        mults = tuple(c[1] for c in clusters)
        if order == chain.n:
            mm, kk, bb = (list(map(_to_mpf, seq)) for seq in (chain.m, chain.k, chain.b))
            residuals = tuple(_residual(chain, mm, kk, bb, lam) for lam in eigs)
        else:
            residuals = ()
        return SpectrumReport(eigs, mults, residuals, cluster_tol, samples)


def _refine(count, lo, hi, clo, chi, tol):
    while hi - lo > tol * max(1, hi):
        mid = (lo + hi) / 2
        if not lo < mid < hi:
            break
        mid, cmid = count(mid, lo, hi)
        if cmid == clo:
            lo = mid
        elif cmid == chi:
            hi = mid
        else:
            break
    return lo, hi


def _residual(chain, m, k, b, lam):
    f_n = fg_sequence(ChainSystem(m, k, b), lam)[-1][0]
    det_k = mpf(1)
    for x in k:
        det_k *= x
    scale = det_k + abs(lam) ** chain.n * det_mass_plus_inertance(m, k, b)
    return abs(f_n) / scale


def _pmul(p, q):
    out = [p[0] * 0] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        if a == 0:
            continue
        for j, c in enumerate(q):
            out[i + j] += a * c
    return out


def _padd(p, q):
    if len(p) < len(q):
        p, q = q, p
    out = list(p)
    for i, c in enumerate(q):
        out[i] += c
    return out


def dense_charpoly(chain: ChainSystem, size_limit: int = 8) -> list:
    """Coefficients (ascending powers of lambda) of det(K - lambda (M + B)).

    Laplace expansion along successive rows with memoisation over the
    remaining column set; exact rational arithmetic when the chain is
    rational.  Shares no code with the f/g recurrence.
    """
    from .chain import assemble

    n = chain.n
    if n > size_limit:
        raise SizeLimit(f"n={n} exceeds the oracle limit {size_limit}")
    m, k, b, _ = _values(chain)
    mats = assemble(ChainSystem(m, k, b))
    MB = mats.mass_plus_inertance()
    zero = m[0] * 0
    entry = [[[mats.K[i][j], -MB[i][j]] for j in range(n)] for i in range(n)]
    memo = {}

    def det(row: int, cols: int):
        if row == n:
            return [zero + 1]
        key = (row, cols)
        if key in memo:
            return memo[key]
        total = [zero]
        sign = 1
        for c in range(n):
            if not cols >> c & 1:
                continue
            e = entry[row][c]
            if e[0] != 0 or e[1] != 0:
                term = _pmul(e, det(row + 1, cols & ~(1 << c)))
                total = _padd(total, [sign * t for t in term])
            sign = -sign
        memo[key] = total
        return total

    coeffs = det(0, (1 << n) - 1)
    coeffs += [zero] * (n + 1 - len(coeffs))
    return coeffs[: n + 1]
