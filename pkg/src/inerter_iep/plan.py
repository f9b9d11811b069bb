"""Target spectra, the feasibility gate and the multiplicity schedule.

A target spectrum lists distinct eigenvalues lambda_1 < ... < lambda_m with
multiplicities t_i.  It is realizable by a fixed-free chain exactly when
t_i <= i for every i.  The schedule decides, for each chain index, whether
its spring/inerter ratio k_i/b_i is placed on a repeated eigenvalue or its
mass is pinned to a user value.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .numerics import from_decimal, to_decimal

__all__ = [
    "TargetSpectrum",
    "MultiplicityPlan",
    "Strategy",
    "InfeasibleSpectrum",
    "feasible",
    "feasibility_violations",
    "build_plan",
    "strategy_for",
    "spectrum_from_json",
    "spectrum_to_json",
]


class InfeasibleSpectrum(ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        detail = ", ".join(f"t_{i}={t} > {i}" for i, t in self.violations)
        super().__init__(f"multiplicities not realizable: {detail}")


def _number(x):
    return from_decimal(x) if isinstance(x, str) else x


@dataclass(frozen=True)
class TargetSpectrum:
    lambdas: tuple
    mults: tuple

    def __post_init__(self):
        lambdas = tuple(_number(x) for x in self.lambdas)
        mults = tuple(self.mults)
        if not lambdas:
            raise ValueError("spectrum must contain at least one eigenvalue")
        if len(lambdas) != len(mults):
            raise ValueError("lambdas and mults differ in length")
        if not lambdas[0] > 0:
            raise ValueError("eigenvalues must be positive")
        if any(not a < b for a, b in zip(lambdas, lambdas[1:])):
            raise ValueError("eigenvalues must be strictly increasing")
        if any(isinstance(t, bool) or not isinstance(t, int) or t < 1 for t in mults):
            raise ValueError("multiplicities must be positive integers")
        object.__setattr__(self, "lambdas", lambdas)
        object.__setattr__(self, "mults", mults)

    @property
    def m(self) -> int:
        return len(self.lambdas)

    @property
    def n(self) -> int:
        return sum(self.mults)


def feasibility_violations(spec: TargetSpectrum) -> List[Tuple[int, int]]:
    """Pairs (i, t_i) with t_i > i, 1-based."""
    return [(i, t) for i, t in enumerate(spec.mults, 1) if t > i]


def feasible(spec: TargetSpectrum) -> bool:
    return all(t <= i for i, t in enumerate(spec.mults, 1))


@dataclass(frozen=True)
class Strategy:
    kind: str  # "A" or "B"
    block: Optional[int] = None
    lambda_index: Optional[int] = None  # 1-based index into the target eigenvalues
    lambda_star: object = None


@dataclass(frozen=True)
class MultiplicityPlan:
    """Eager, immutable description of the synthesis schedule.

    ``S_sets[j-1]`` holds the 1-based indices of eigenvalues with
    multiplicity at least j + 1, for j = 1..T-1.  ``schedule`` maps a chain
    index i in [2, n] to the eigenvalue index that k_i/b_i must equal;
    indices absent from it are free and carry pinned masses.
    """

    spec: TargetSpectrum
    T: int
    S_sets: tuple
    q: tuple
    schedule: Dict[int, int] = field(hash=False)
    pinned_indices: tuple
    pinned_masses: tuple
    blocks: tuple  # (l, first j, last j) for each strategy-B block

    @property
    def n(self) -> int:
        return self.spec.n

    @property
    def m(self) -> int:
        return self.spec.m

    @property
    def M_total(self):
        total = 0
        for x in self.pinned_masses:
            total = total + x
        return total

    def S_values(self, j: int) -> tuple:
        return tuple(self.spec.lambdas[i - 1] for i in self.S_sets[j - 1])

    def is_free(self, i: int) -> bool:
        return i not in self.schedule

    def pinned_mass_at(self, i: int):
        return self.pinned_masses[self.pinned_indices.index(i)]


def build_plan(spec: TargetSpectrum, pinned: Optional[Sequence] = None) -> MultiplicityPlan:
    bad = feasibility_violations(spec)
    if bad:
        raise InfeasibleSpectrum(bad)
    m, n = spec.m, spec.n
    if pinned is None:
        pinned = [1] * m
    pinned = tuple(_number(x) for x in pinned)
    if len(pinned) != m:
        raise ValueError(f"expected {m} pinned masses, got {len(pinned)}")
    if any(not x > 0 for x in pinned):
        raise ValueError("pinned masses must be positive")

    T = max(spec.mults)
    S = tuple(tuple(i for i, t in enumerate(spec.mults, 1) if t >= j + 1) for j in range(1, T))
    q = tuple(len(s) for s in S)

    # block l covers recursion indices j in [l+1+q_1+..+q_l, l+q_1+..+q_{l+1}];
    # step j places k_{j+1}/b_{j+1} on S_{l+1}, largest element first
    schedule: Dict[int, int] = {}
    blocks = []
    for l in range(T - 1):
        first = l + 1 + sum(q[:l])
        last = l + sum(q[:l + 1])
        blocks.append((l, first, last))
        for j in range(first, last + 1):
            schedule[j + 1] = S[l][l + sum(q[:l + 1]) - j]
    pinned_indices = (1,) + tuple(i for i in range(2, n + 1) if i not in schedule)
    assert len(pinned_indices) == m and len(schedule) == n - m
    return MultiplicityPlan(spec, T, S, q, schedule, pinned_indices, pinned, tuple(blocks))


def strategy_for(plan: MultiplicityPlan, j: int) -> Strategy:
    """Step type for recursion index j in [1, n-1]."""
    if not 1 <= j <= plan.n - 1:
        raise ValueError(f"recursion index {j} outside [1, {plan.n - 1}]")
    for l, first, last in plan.blocks:
        if first <= j <= last:
            idx = plan.schedule[j + 1]
            return Strategy("B", l, idx, plan.spec.lambdas[idx - 1])
    return Strategy("A")


def spectrum_from_json(obj) -> Tuple[TargetSpectrum, Optional[tuple]]:
    """Parse {"lambdas": [...], "mults": [...], "pinned_masses": [...]?}."""
    if not isinstance(obj, dict):
        raise ValueError("spectrum: expected a JSON object")
    for key in ("lambdas", "mults"):
        if key not in obj:
            raise ValueError(f"spectrum: missing field {key!r}")
        if not isinstance(obj[key], list):
            raise ValueError(f"spectrum.{key}: expected a list")
    lambdas = []
    for i, s in enumerate(obj["lambdas"]):
        try:
            lambdas.append(from_decimal(s))
        except (TypeError, ValueError) as exc:
            raise ValueError(f"spectrum.lambdas[{i}]: {exc}") from None
    for i, t in enumerate(obj["mults"]):
        if isinstance(t, bool) or not isinstance(t, int):
            raise ValueError(f"spectrum.mults[{i}]: expected an integer")
    pinned = None
    if obj.get("pinned_masses") is not None:
        if not isinstance(obj["pinned_masses"], list):
            raise ValueError("spectrum.pinned_masses: expected a list")
        pinned = []
        for i, s in enumerate(obj["pinned_masses"]):
            try:
                pinned.append(from_decimal(s))
            except (TypeError, ValueError) as exc:
                raise ValueError(f"spectrum.pinned_masses[{i}]: {exc}") from None
        pinned = tuple(pinned)
    try:
        spec = TargetSpectrum(lambdas, obj["mults"])
    except ValueError as exc:
        raise ValueError(f"spectrum: {exc}") from None
    return spec, pinned


def spectrum_to_json(spec: TargetSpectrum, pinned: Optional[Sequence] = None,
                     bits: Optional[int] = None) -> dict:
    out = {"lambdas": [to_decimal(x, bits) for x in spec.lambdas], "mults": list(spec.mults)}
    if pinned is not None:
        out["pinned_masses"] = [to_decimal(x, bits) for x in pinned]
    return out
