"""Constructive synthesis of a chain realizing a feasible target spectrum.

The chain is built top-down in the recursion index j = n-1, ..., 1.  At each
level the pair (f_j, g_j) is carried as two product-form polynomials F_j,
G_j plus the leading coefficients (mu_j, nu_j); the common factor D_j that
carries the repeated eigenvalues is tracked separately as a list of roots.

Two kinds of steps peel one degree of freedom off the chain:

* step A fixes the next mass to a pinned value and solves for the pole
  lambda* = k/b of the removed spring/inerter pair;
* step B fixes the pole lambda* to a repeated target eigenvalue, which then
  survives as a common factor of f and g, and solves for the mass.

Faithful mode uses the certified perturbation sizes, which need enormous
precision.  Adaptive mode starts from gap-scaled perturbations and shrinks
them whenever an a-posteriori check fails.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import mpmath
from mpmath import mpf

from .chain import ChainSystem, validate
from .numerics import (
    BracketError,
    PrecisionConfig,
    PrecisionExhausted,
    ProductSum,
    RootPoly,
    ScaledPair,
    evaluate,
    root_in_bracket,
    to_decimal,
)
from .plan import InfeasibleSpectrum, MultiplicityPlan, TargetSpectrum, build_plan, feasibility_violations, strategy_for

__all__ = [
    "NonPositiveParameter",
    "InvariantViolation",
    "ProofConstants",
    "StepOutcome",
    "StepRecord",
    "SynthesisResult",
    "constants",
    "init_top",
    "step_A",
    "step_B",
    "synthesize",
    "FAITHFUL",
    "ADAPTIVE",
]

FAITHFUL = "faithful"
ADAPTIVE = "adaptive"


class NonPositiveParameter(ArithmeticError):
    """A physical parameter came out non-positive: numeric breakdown."""


class InvariantViolation(ArithmeticError):
    """An a-posteriori check failed.

    ``kind`` is ``"structure"`` when root interlacing or localization broke
    (perturbations too large) and ``"ratio"`` when -mu/nu is too small to
    host the next pinned mass.
    """

    def __init__(self, kind: str, message: str):
        self.kind = kind
        super().__init__(message)


@dataclass(frozen=True)
class ProofConstants:
    Delta: mpf
    Lambda: mpf
    epsilon: mpf
    rho: tuple  # rho_1..rho_{m-1}
    C1: mpf
    C2: tuple  # C2(1)..C2(m-1)
    C: mpf
    checks: dict = field(hash=False)
    required_bits: int = 0

    def C2_at(self, i: int) -> mpf:
        return self.C2[i - 1]

    def lower_offset(self, i: int, n: int) -> mpf:
        return self.C1 ** n * self.rho[i - 1]

    def upper_offset(self, i: int, n: int) -> mpf:
        return (1 + self.C2[i - 1]) ** n * self.rho[i - 1]

    def ratio_floor(self, j: int, lam1, M_total) -> mpf:
        """Lower bound required of -mu_j/nu_j at level j."""
        L = self.Lambda
        return self.C * (L / lam1) ** j * L * M_total / (L - lam1)

    @property
    def all_checks_hold(self) -> bool:
        return all(all(v) for v in self.checks.values())


def _log2(x) -> float:
    # float(x) would underflow for these magnitudes
    man, exp = mpmath.frexp(x)
    return float(mpmath.log(man, 2)) + int(exp)


def constants(spec: TargetSpectrum, plan: Optional[MultiplicityPlan] = None,
              cfg: Optional[PrecisionConfig] = None) -> ProofConstants:
    """Certified perturbation constants and their three consistency checks.

    ``checks`` maps a family name to a tuple of booleans, one per instance:
    ``"top"`` is (1+C2(m-1))^n rho_{m-1} < Delta/2, ``"monotone"`` the chain
    (1+C2(j))^n rho_j < (1+C2(j+1))^n rho_{j+1}, and ``"separation"`` the
    family n(1+C2(j-1))^n rho_{j-1}/Delta < (Delta^n/(2^{(n+1)^2} Lambda^{n+1})) rho_{j+1}/4.
    Instances with no index in range give empty tuples.
    """
    cfg = cfg or PrecisionConfig()
    n, m = spec.n, spec.m
    with cfg.workprec():
        lam = [mpf(x) for x in spec.lambdas]
        gaps = [b - a for a, b in zip(lam, lam[1:])]
        Delta = min([mpf(1)] + gaps) / 2
        Lambda = 1 + lam[-1]
        eps = Delta ** (n * n + n + 1) / (n * mpf(2) ** (3 * (n + 1) ** 3) * Lambda ** ((n + 1) ** 2))
        rho = tuple(eps ** ((n + 1) ** (m - i)) for i in range(1, m))
        C1 = Delta / (mpf(2) ** (n + 1) * Lambda)
        C2 = tuple(mpf(2) ** (2 * (n + 1) ** 2) * Lambda ** (n + 1)
                   / (Delta ** n * eps ** ((n + 1) ** (m - j - 1))) for j in range(1, m))
        C = mpf(2) ** (2 * n + 1) * (1 + Lambda ** n) / C1 ** (2 * n * n)
        if rho:
            C /= rho[0] ** (2 * n)

        def up(j):
            return (1 + C2[j - 1]) ** n * rho[j - 1]

        scale = Delta ** n / (mpf(2) ** ((n + 1) ** 2) * Lambda ** (n + 1))
        checks = {
            "top": tuple([up(m - 1) < Delta / 2] if m >= 2 else []),
            "monotone": tuple(up(j) < up(j + 1) for j in range(1, m - 1)),
            "separation": tuple(n * up(j - 1) / Delta < scale * rho[j] / 4 for j in range(2, m - 1)),
        }
        finest = C1 ** n * (rho[0] if rho else 1) / Lambda
        required = int(math.ceil(-_log2(finest))) + 64 + 8 * n
        return ProofConstants(Delta, Lambda, eps, rho, C1, C2, C, checks, required)


def init_top(spec: TargetSpectrum, plan: MultiplicityPlan, consts: Optional[ProofConstants] = None,
             rho: Optional[Sequence] = None, ratio=None):
    """Top-level data (F_n, G_n, (mu_n, nu_n)).

    By default rho and -mu_n/nu_n come from ``consts`` (twice the certified
    lower bound); adaptive mode passes its own ``rho`` and ``ratio``.
    """
    lam = [mpf(x) for x in spec.lambdas]
    if rho is None:
        rho = consts.rho
    if ratio is None:
        ratio = 2 * consts.ratio_floor(spec.n, lam[0], plan.M_total)
    F = RootPoly(tuple(lam))
    G = RootPoly(tuple(lam[i] + rho[i] for i in range(spec.m - 1)))
    nu = mpf(-1)
    return F, G, ScaledPair(-ratio * nu, nu)


@dataclass(frozen=True)
class StepOutcome:
    F: RootPoly
    G: RootPoly
    pair: ScaledPair
    lambda_star: mpf
    b_star: mpf
    m_star: mpf
    aux: dict


def _combined(F: RootPoly, G: RootPoly, mu, nu, m_star) -> ProductSum:
    # mu F(x) + m* nu x G(x)
    return ProductSum([(mu, F, 0), (m_star * nu, G, 1)])


def step_A(F: RootPoly, G: RootPoly, pair: ScaledPair, m_next, consts=None,
           cfg: Optional[PrecisionConfig] = None) -> StepOutcome:
    """Remove one level with a prescribed mass ``m_next``."""
    cfg = cfg or PrecisionConfig()
    p = F.degree
    if p < 2 or G.degree != p - 1:
        raise ValueError("step A needs deg F = deg G + 1 >= 2")
    mu, nu = pair.mu, pair.nu
    m_star = mpf(m_next)
    H = _combined(F, G, mu, nu, m_star)
    a, top = F.roots, F.roots[-1]
    hi = top + (top - a[0] + 1)
    s_top = H.sign(top)
    for _ in range(4 * cfg.mantissa_bits):
        if H.sign(hi) == -s_top:
            break
        hi = top + 2 * (hi - top)
    else:
        raise BracketError("no upper bracket for the pole")
    lam_star = root_in_bracket(H, top, hi, cfg)
    if not lam_star > top:
        raise NonPositiveParameter("pole does not exceed the top root")
    F0 = RootPoly(tuple(root_in_bracket(H, a[i], G.roots[i], cfg) for i in range(p - 1)))
    G_at = evaluate(G, 1, lam_star)
    F0_at = evaluate(F0, 1, lam_star)
    b_star = -(mu + m_star * nu) / nu * F0_at / G_at
    if not b_star > 0:
        raise NonPositiveParameter(f"inertance {mpmath.nstr(b_star, 8)} is not positive")
    mu0 = nu * G_at / F0_at
    nu0 = (mu0 - nu) / b_star
    hG = ProductSum([(nu, G, 0), (-mu0, F0, 0)])
    G0 = RootPoly(tuple(root_in_bracket(hG, G.roots[i], F0.roots[i + 1], cfg) for i in range(p - 2)))
    return StepOutcome(F0, G0, ScaledPair(mu0, nu0), lam_star, b_star, m_star,
                       {"m_star": m_star, "b_star": b_star, "mu_0": mu0, "nu_0": nu0})


def _tau(F: RootPoly, G: RootPoly, alphas: tuple) -> mpf:
    p = F.degree
    a, g = F.roots, G.roots
    if p == 1:
        return mpf(1) / 2
    if p == 2:
        eta2 = min(g[0] - a[0], mpf(1) / 2)
        return min(eta2 / (g[0] - alphas[0]), 1) / 4
    gap = min(g[i + 1] - g[i] for i in range(p - 2))
    eta1 = min(gap / 4, min(g[i] - a[i] for i in range(p - 1)))
    num = min(1, (gap - eta1) ** (p - 1)) * min(1, eta1 ** (p - 1))
    den = 2 + 2 * max(abs(evaluate(RootPoly(alphas), 1, g[i])) for i in range(p - 1))
    return num / den / 2


def step_B(F: RootPoly, G: RootPoly, pair: ScaledPair, lambda_star, consts=None,
           cfg: Optional[PrecisionConfig] = None, widen=None) -> StepOutcome:
    """Remove one level with the pole pinned to ``lambda_star``.

    ``lambda_star`` becomes an exact root of F_0.  If the last root of G_0
    is not bracketed by (beta_{p-1}, lambda*), the bracket is widened by
    ``widen`` (default 1/2) and the bracket used is recorded in ``aux``.
    """
    cfg = cfg or PrecisionConfig()
    p = F.degree
    if p < 1 or G.degree != p - 1:
        raise ValueError("step B needs deg F = deg G + 1 >= 1")
    mu, nu = pair.mu, pair.nu
    ls = mpf(lambda_star)
    if not ls > F.roots[-1]:
        raise NonPositiveParameter("scheduled pole does not exceed the top root")
    m_star = -(mu / nu) * evaluate(F, 1, ls) / (ls * evaluate(G, 1, ls))
    if not m_star > 0:
        raise NonPositiveParameter("mass is not positive")
    H = _combined(F, G, mu, nu, m_star)
    alphas = tuple(root_in_bracket(H, F.roots[i], G.roots[i], cfg) for i in range(p - 1))
    tau = _tau(F, G, alphas)
    mu0 = tau * nu
    b_star = -(mu + m_star * nu) / mu0
    if not b_star > 0:
        raise NonPositiveParameter("inertance is not positive")
    nu0 = (mu0 - nu) / b_star
    # nu (x - lambda*) G - mu0 F_0 with the exact factor (x - lambda*) divided out
    reduced = RootPoly(alphas)
    hG = ProductSum([(nu, G, 0), (-mu0, reduced, 0)])
    betas = [root_in_bracket(hG, G.roots[i], alphas[i + 1], cfg) for i in range(p - 2)]
    aux = {"m_star": m_star, "b_star": b_star, "mu_0": mu0, "nu_0": nu0, "tau": tau}
    if p >= 2:
        lo = G.roots[p - 2]
        try:
            betas.append(root_in_bracket(hG, lo, ls, cfg))
            aux["last_bracket"] = "pole"
        except BracketError:
            step = mpf(1) / 2 if widen is None else mpf(widen)
            betas.append(root_in_bracket(hG, lo, ls + step, cfg))
            aux["last_bracket"] = "widened"
    F0 = RootPoly(alphas + (ls,))
    return StepOutcome(F0, RootPoly(tuple(betas)), ScaledPair(mu0, nu0), ls, b_star, m_star, aux)


@dataclass(frozen=True)
class StepRecord:
    """Level j after removing chain index j + 1."""

    j: int
    strategy: str
    lambda_star: mpf
    b_next: mpf
    m_next: object
    pair: ScaledPair
    F: RootPoly
    G: RootPoly
    D_factors: tuple
    aux: dict = field(hash=False, default_factory=dict)


@dataclass(frozen=True)
class SynthesisResult:
    chain: ChainSystem
    trace: tuple
    mode: str
    precision_used: int
    plan: MultiplicityPlan
    top: StepRecord  # level n: F_n, G_n, (mu_n, nu_n), D_n
    constants: Optional[ProofConstants] = None
    attempts: tuple = ()

    @property
    def nu_1(self):
        return self.level(1).pair.nu

    def level(self, j: int) -> StepRecord:
        if j == self.chain.n:
            return self.top
        return self.trace[self.chain.n - 1 - j]

    @property
    def separation(self):
        """Smallest relative gap between a target eigenvalue and the root of g_n just above it."""
        F, G = self.top.F, self.top.G
        gaps = [(g - a) / a for a, g in zip(F.roots, G.roots)]
        return min(gaps) if gaps else None

    def verification_tol(self):
        """Cluster tolerance fine enough to keep g_n roots apart from the target eigenvalues."""
        cfg = PrecisionConfig(self.precision_used)
        with cfg.workprec():
            tol = cfg.default_cluster_tol
            if self.separation is not None:
                tol = min(tol, self.separation / 8)
            return tol

    def b_step_count(self) -> int:
        return sum(1 for r in self.trace if r.strategy == "B")

    def trace_json(self, bits: Optional[int] = None) -> list:
        bits = bits or self.precision_used
        d = lambda x: to_decimal(x, bits)
        out = []
        for r in self.trace:
            out.append({
                "j": r.j,
                "strategy": r.strategy,
                "lambda_star": d(r.lambda_star),
                "b": d(r.b_next),
                "m": d(r.m_next),
                "mu": d(r.pair.mu),
                "nu": d(r.pair.nu),
                "F_roots": [d(x) for x in r.F.roots],
                "G_roots": [d(x) for x in r.G.roots],
                "D_factors": [d(x) for x in r.D_factors],
                "aux": {k: (v if isinstance(v, str) else d(v)) for k, v in r.aux.items()},
            })
        return out

    def trace_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["j", "strategy", "lambda_star", "b", "m", "mu_over_nu"])
        for r in self.trace:
            w.writerow([r.j, r.strategy, to_decimal(r.lambda_star, 64), to_decimal(r.b_next, 64),
                        to_decimal(r.m_next, 64), to_decimal(r.pair.mu / r.pair.nu, 64)])
        return buf.getvalue()


def _check_level(F: RootPoly, G: RootPoly, lam, consts, n, mode, j):
    a, g = F.roots, G.roots
    if not a[0] > 0:
        raise InvariantViolation("structure", f"level {j}: non-positive root")
    for i in range(len(g)):
        if not a[i] < g[i] < a[i + 1]:
            raise InvariantViolation("structure", f"level {j}: roots do not interlace at {i + 1}")
        if i + 1 < len(lam) and not g[i] < lam[i + 1]:
            raise InvariantViolation("structure", f"level {j}: G root {i + 1} passed the next eigenvalue")
        if mode == FAITHFUL:
            if not lam[i] + consts.lower_offset(i + 1, n) < g[i] < lam[i] + consts.upper_offset(i + 1, n):
                raise InvariantViolation("structure", f"level {j}: G root {i + 1} outside its certified window")


def _adaptive_rho(spec: TargetSpectrum, scale) -> tuple:
    lam = [mpf(x) for x in spec.lambdas]
    gaps = [b - a for a, b in zip(lam, lam[1:])]
    Delta = min([mpf(1)] + gaps) / 2
    m = spec.m
    return tuple(Delta * mpf(10) ** (-2 * (m - i) - 2) * scale for i in range(1, m))


def _run(spec, plan, mode, cfg, consts, rho, ratio) -> SynthesisResult:
    n, m = spec.n, spec.m
    lam = [mpf(x) for x in spec.lambdas]
    F, G, pair = init_top(spec, plan, consts, rho=rho, ratio=ratio)
    _check_level(F, G, lam, consts, n, mode, n)
    if mode == FAITHFUL and not pair.ratio > consts.ratio_floor(n, lam[0], plan.M_total):
        raise InvariantViolation("ratio", f"level {n}: ratio below the certified floor")
    top = (F, G, pair)
    masses = {i: plan.pinned_mass_at(i) for i in plan.pinned_indices}
    b, poles, steps = {}, {}, []
    for j in range(n - 1, 0, -1):
        strat = strategy_for(plan, j)
        if strat.kind == "B":
            if not mpf(strat.lambda_star) > F.roots[-1]:
                raise InvariantViolation("structure", f"level {j}: top root reached the scheduled pole")
            out = step_B(F, G, pair, strat.lambda_star, consts, cfg)
            masses[j + 1] = out.m_star
        else:
            if not mpf(masses[j + 1]) < pair.ratio:
                raise InvariantViolation("ratio", f"level {j}: pinned mass exceeds -mu/nu")
            out = step_A(F, G, pair, masses[j + 1], consts, cfg)
        F, G, pair = out.F, out.G, out.pair
        _check_level(F, G, lam, consts, n, mode, j)
        if mode == FAITHFUL and not pair.ratio > consts.ratio_floor(j, lam[0], plan.M_total):
            raise InvariantViolation("ratio", f"level {j}: ratio below the certified floor")
        b[j + 1] = out.b_star
        poles[j + 1] = out.lambda_star
        steps.append((j, strat.kind, out, masses[j + 1]))

    b1 = pair.ratio - mpf(masses[1])
    if not b1 > 0:
        raise InvariantViolation("ratio", "first inertance is not positive")
    b[1] = b1
    k = {1: F.roots[0] * pair.ratio}
    for i in range(2, n + 1):
        k[i] = poles[i] * b[i]
    chain = ChainSystem([masses[i] for i in range(1, n + 1)], [k[i] for i in range(1, n + 1)],
                        [b[i] for i in range(1, n + 1)])
    if validate(chain):
        raise NonPositiveParameter(str(validate(chain)))

    # D_j collects the poles of strategy-B steps below level j
    def factors_below(level):
        return tuple(poles[jj + 1] for jj in range(1, level) if strategy_for(plan, jj).kind == "B")

    trace = tuple(StepRecord(j, kind, out.lambda_star, out.b_star, mass, out.pair, out.F, out.G,
                             factors_below(j), out.aux) for j, kind, out, mass in steps)
    top_rec = StepRecord(n, "top", None, None, None, top[2], top[0], top[1], factors_below(n), {})
    return SynthesisResult(chain, trace, mode, cfg.mantissa_bits, plan, top_rec,
                           consts if mode == FAITHFUL else None)


def synthesize(spec: TargetSpectrum, plan: Optional[MultiplicityPlan] = None,
               mode: str = ADAPTIVE, cfg: Optional[PrecisionConfig] = None,
               max_retries: int = 48) -> SynthesisResult:
    """Build a chain whose pencil has exactly the target spectrum.

    Adaptive mode retries on failed checks: structural failures halve every
    rho_i, a too-small ratio multiplies -mu_n/nu_n by 1000, and bracketing or
    sign breakdowns move one rung up the precision ladder.  Faithful mode
    starts at the precision the certified constants require and only
    escalates precision.
    """
    bad = feasibility_violations(spec)
    if bad:
        raise InfeasibleSpectrum(bad)
    plan = plan or build_plan(spec)
    if mode not in (FAITHFUL, ADAPTIVE):
        raise ValueError(f"unknown mode {mode!r}")
    cfg = cfg or PrecisionConfig()
    attempts: List[tuple] = []

    if mode == FAITHFUL:
        need = constants(spec, plan, PrecisionConfig(128)).required_bits
        if need > cfg.mantissa_bits:
            cfg = PrecisionConfig(need, escalation_factor=cfg.escalation_factor,
                                  max_escalations=cfg.max_escalations)
        for rung in cfg.ladder():
            with rung.workprec():
                consts = constants(spec, plan, rung)
                if not consts.all_checks_hold:
                    raise InvariantViolation("structure", f"constant inequalities fail: {consts.checks}")
                try:
                    res = _run(spec, plan, mode, rung, consts, None, None)
                    return _with_attempts(res, attempts)
                except (BracketError, NonPositiveParameter, InvariantViolation) as exc:
                    attempts.append((rung.mantissa_bits, type(exc).__name__, str(exc)))
        raise PrecisionExhausted(f"faithful synthesis failed: {attempts[-1][2]}")

    rho_scale, ratio_scale = mpf(1), mpf(1)
    for rung in cfg.ladder():
        with rung.workprec():
            for _ in range(max_retries):
                rho = _adaptive_rho(spec, rho_scale)
                ratio = 1000 * mpf(plan.M_total) * ratio_scale
                try:
                    res = _run(spec, plan, mode, rung, None, rho, ratio)
                    return _with_attempts(res, attempts)
                except InvariantViolation as exc:
                    attempts.append((rung.mantissa_bits, exc.kind, str(exc)))
                    if exc.kind == "ratio":
                        ratio_scale *= 1000
                    else:
                        rho_scale /= 2
                except (BracketError, NonPositiveParameter) as exc:
                    attempts.append((rung.mantissa_bits, type(exc).__name__, str(exc)))
                    break
    reason = attempts[-1][2] if attempts else "no attempts"
    raise PrecisionExhausted(f"adaptive synthesis failed after {len(attempts)} attempts: {reason}")


def _with_attempts(res: SynthesisResult, attempts) -> SynthesisResult:
    return SynthesisResult(res.chain, res.trace, res.mode, res.precision_used, res.plan, res.top,
                           res.constants, tuple(attempts))
