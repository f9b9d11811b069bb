"""A-posteriori certification of synthesized chains.

Divisibility of det(K - lambda (M + B)) by prod (lambda - lambda_i)^{t_i}
cannot be checked exactly on rounded data, so it is certified by two
independent signals: the low-order Taylor coefficients of f_n at each
lambda_i are negligible relative to the order-t_i coefficient, and the
inertia count jumps by exactly t_i across a narrow window around lambda_i.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import mpmath
from mpmath import mpf

from .chain import ChainSystem, chain_to_json
from .forward import DegenerateSigma, _negative_pivots, _to_mpf, spectrum
from .numerics import PrecisionConfig, to_decimal
from .plan import MultiplicityPlan, TargetSpectrum

__all__ = [
    "DimensionError",
    "VerificationReport",
    "FuzzSummary",
    "verify",
    "taylor_coefficients",
    "count_jump",
    "five_dof_bound",
    "necessity_fuzz",
    "random_chain",
]


class DimensionError(ValueError):
    pass


def taylor_coefficients(chain: ChainSystem, center, order: int, which: str = "f") -> list:
    """Taylor coefficients c_0..c_order of f_n (or g_n) about ``center``.

    Runs the f/g recurrence on truncated power series in h = lambda - center,
    so c_r = f_n^{(r)}(center) / r!.
    """
    size = order + 1
    m, k, b = ([_to_mpf(x) for x in seq] for seq in (chain.m, chain.k, chain.b))
    c0 = _to_mpf(center)

    def lin(a0, a1):
        out = [mpf(0)] * size
        out[0] = a0
        if size > 1:
            out[1] = a1
        return out

    def mul(p, q):
        out = [mpf(0)] * size
        for i, a in enumerate(p):
            if a:
                for j in range(size - i):
                    out[i + j] += a * q[j]
        return out

    def add(p, q):
        return [x + y for x, y in zip(p, q)]

    f = lin(k[0] - c0 * (m[0] + b[0]), -(m[0] + b[0]))
    g = lin(mpf(1), mpf(0))
    for j in range(1, chain.n):
        c = lin(k[j] - c0 * b[j], -b[j])
        g_next = add(f, mul(c, g))
        f = add(mul(lin(-c0 * m[j], -m[j]), g_next), mul(c, f))
        g = g_next
    return f if which == "f" else g


def _window_counts(chain: ChainSystem, center, halfwidth, order: Optional[int] = None):
    m, k, b = ([_to_mpf(x) for x in seq] for seq in (chain.m, chain.k, chain.b))
    order = chain.n if order is None else order
    c = _to_mpf(center)
    counts = []
    for s in (c * (1 - halfwidth), c * (1 + halfwidth)):
        for _ in range(8):
            try:
                counts.append(_negative_pivots(m, k, b, s, order))
                break
            except DegenerateSigma:
                s = s * (1 + halfwidth / 1024)
    return counts[0], counts[1]


def count_jump(chain: ChainSystem, center, halfwidth, order: Optional[int] = None) -> int:
    """Eigenvalues of the (leading ``order``) pencil inside center*(1 -+ halfwidth)."""
    lo, hi = _window_counts(chain, center, halfwidth, order)
    return hi - lo


@dataclass(frozen=True)
class VerificationReport:
    divisibility_residuals: tuple  # per eigenvalue: scaled |c_r|, r = 0..t_i-1
    divisibility_ok: bool
    jumps: tuple  # inertia count jump at each target eigenvalue
    jumps_ok: bool
    spectrum_match: bool
    eigen_errors: tuple  # relative error, or its certified bound, per target eigenvalue
    detected_multiplicities: tuple
    gcd_degree: int
    gcd_degree_ok: bool
    pinned_masses_ok: bool
    threshold: mpf = field(compare=False, default=None)

    @property
    def all_green(self) -> bool:
        return (self.divisibility_ok and self.jumps_ok and self.spectrum_match
                and self.gcd_degree_ok and self.pinned_masses_ok)

    def to_json(self, bits: Optional[int] = None) -> dict:
        d = lambda x: to_decimal(x, bits or 64)
        return {
            "all_green": self.all_green,
            "divisibility_ok": self.divisibility_ok,
            "divisibility_residuals": [[d(x) for x in row] for row in self.divisibility_residuals],
            "jumps": list(self.jumps),
            "jumps_ok": self.jumps_ok,
            "spectrum_match": self.spectrum_match,
            "eigen_errors": [d(x) for x in self.eigen_errors],
            "detected_multiplicities": list(self.detected_multiplicities),
            "gcd_degree": self.gcd_degree,
            "gcd_degree_ok": self.gcd_degree_ok,
            "pinned_masses_ok": self.pinned_masses_ok,
        }


def verify(chain: ChainSystem, spec: TargetSpectrum, plan: Optional[MultiplicityPlan] = None,
           cfg: Optional[PrecisionConfig] = None, cluster_tol=None, rel_tol=None) -> VerificationReport:
    """Check that ``chain`` realizes ``spec`` (and honours the plan's pins).

    ``rel_tol`` bounds the relative eigenvalue error (default: the cluster
    tolerance).  When the inertia counts at the window edges
    lambda_i (1 -+ cluster_tol) account for all n eigenvalues, the spectrum
    is certified from those 2m counts and ``eigen_errors`` holds the window
    bound; otherwise the spectrum is computed by bisection.  Failures are
    reported, never raised.
    """
    if chain.n != spec.n:
        raise DimensionError(f"chain has n={chain.n}, spectrum needs n={spec.n}")
    cfg = cfg or PrecisionConfig()
    with cfg.workprec():
        cluster_tol = cfg.default_cluster_tol if cluster_tol is None else mpf(cluster_tol)
        rel_tol = cluster_tol if rel_tol is None else mpf(rel_tol)
        threshold = mpf(2) ** (-(cfg.mantissa_bits // 2))
        lam = [mpf(x) for x in spec.lambdas]

        residuals, edges, g_jumps = [], [], []
        for i, (li, t) in enumerate(zip(lam, spec.mults)):
            near = [abs(li - o) for o in lam if o != li]
            scale = min([mpf(1)] + near)
            coeffs = taylor_coefficients(chain, li, t)
            top = abs(coeffs[t])
            if top == 0:
                row = tuple(mpmath.inf for _ in range(t))
            else:
                row = tuple(abs(coeffs[r]) / top / scale ** (t - r) for r in range(t))
            residuals.append(row)
            edges.append(_window_counts(chain, li, cluster_tol))
            g_jumps.append(count_jump(chain, li, cluster_tol, order=chain.n - 1) if chain.n > 1 else 0)
        jumps = [hi - lo for lo, hi in edges]
        divisibility_ok = all(r < threshold for row in residuals for r in row)
        jumps_ok = all(j == t for j, t in zip(jumps, spec.mults))

        below = [sum(spec.mults[:i]) for i in range(spec.m)]
        certified = all(lo == b0 and hi == b0 + t for (lo, hi), b0, t in zip(edges, below, spec.mults))
        if certified and cluster_tol <= rel_tol:
            errors, detected, match = [cluster_tol] * spec.m, tuple(jumps), True
        else:
            report = spectrum(chain, cfg, max(cluster_tol, cfg.default_cluster_tol))
            errors, match = [], len(report.eigenvalues) == spec.m
            for i, li in enumerate(lam):
                if match:
                    errors.append(abs(report.eigenvalues[i] - li) / li)
                else:
                    errors.append(min(abs(x - li) / li for x in report.eigenvalues))
            detected = tuple(report.multiplicities)
            match = match and detected == tuple(spec.mults) and all(e <= rel_tol for e in errors)

        gcd = sum(min(a, b) for a, b in zip(jumps, g_jumps))
        pinned_ok = True
        if plan is not None:
            pinned_ok = len(plan.pinned_indices) == spec.m and all(
                chain.m[i - 1] == mass for i, mass in zip(plan.pinned_indices, plan.pinned_masses))
        return VerificationReport(tuple(residuals), divisibility_ok, tuple(jumps), jumps_ok, match,
                                  tuple(errors), detected, gcd,
                                  gcd == spec.n - spec.m, pinned_ok, threshold)


def five_dof_bound(chain: ChainSystem, lambdas: Sequence):
    """Mass-ratio lower bound for five-mass chains with spectrum pattern (1, 1, 3).

    Returns (lhs, rhs, holds) with lhs = max_{j=2..4} m_j/m_{j+1} and
    rhs = (l1 / (8 l3)) * (1 - (l2/l3)^(1/3)).
    """
    if chain.n != 5:
        raise DimensionError(f"bound needs n=5, got n={chain.n}")
    if len(lambdas) != 3:
        raise DimensionError("bound needs three eigenvalues")
    l1, l2, l3 = (_to_mpf(x) for x in lambdas)
    m = [_to_mpf(x) for x in chain.m]
    lhs = max(m[j] / m[j + 1] for j in range(1, 4))
    rhs = l1 / (8 * l3) * (1 - mpmath.cbrt(l2 / l3))
    return lhs, rhs, bool(lhs > rhs)


def random_chain(rng: random.Random, n: int, low: float = 1e-2, high: float = 1e2,
                 zero_b: float = 0.5) -> ChainSystem:
    """Log-uniform parameters on [low, high]; each b_j is zero with probability ``zero_b``."""
    lo, hi = mpmath.log10(low), mpmath.log10(high)
    draw = lambda: 10 ** rng.uniform(float(lo), float(hi))
    m = [draw() for _ in range(n)]
    k = [draw() for _ in range(n)]
    b = [0.0 if rng.random() < zero_b else draw() for _ in range(n)]
    return ChainSystem(m, k, b)


@dataclass
class FuzzSummary:
    trials: int
    seed: object
    violations: int = 0
    counterexamples: List[dict] = field(default_factory=list)
    multiplicity_histogram: dict = field(default_factory=dict)
    all_b_zero_trials: int = 0
    all_b_zero_repeated: int = 0

    def to_json(self) -> dict:
        return {
            "trials": self.trials,
            "seed": self.seed,
            "violations": self.violations,
            "counterexamples": self.counterexamples,
            "multiplicity_histogram": {str(k): v for k, v in sorted(self.multiplicity_histogram.items())},
            "all_b_zero_trials": self.all_b_zero_trials,
            "all_b_zero_repeated": self.all_b_zero_repeated,
        }


def necessity_fuzz(num_trials: int, n_max: int, rng_seed, cfg: Optional[PrecisionConfig] = None,
                   cluster_tol=None, backend: str = "mpfr") -> FuzzSummary:
    """Check t_i <= i on the detected spectra of random chains.

    Trial ``i`` draws from its own stream seeded by ``f"{rng_seed}:{i}"``, so
    any trial can be replayed alone.  A violation would point at a solver
    bug: realizable spectra always satisfy the bound.
    """
    cfg = cfg or PrecisionConfig(96)
    summary = FuzzSummary(num_trials, rng_seed)
    for trial in range(num_trials):
        rng = random.Random(f"{rng_seed}:{trial}")
        n = rng.randint(1, n_max)
        chain = random_chain(rng, n)
        report = spectrum(chain, cfg, cluster_tol, refine=False, backend=backend)
        for t in report.multiplicities:
            summary.multiplicity_histogram[t] = summary.multiplicity_histogram.get(t, 0) + 1
        if all(x == 0 for x in chain.b):
            summary.all_b_zero_trials += 1
            if any(t > 1 for t in report.multiplicities):
                summary.all_b_zero_repeated += 1
        bad = [(i, t) for i, t in enumerate(report.multiplicities, 1) if t > i]
        if bad:
            summary.violations += 1
            summary.counterexamples.append({"trial": trial, "chain": chain_to_json(chain, 64),
                                            "multiplicities": list(report.multiplicities)})
    return summary
