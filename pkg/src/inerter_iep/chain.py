"""Fixed-free mass-spring-inerter chains and their pencil matrices."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence

from .numerics import from_decimal, to_decimal

__all__ = [
    "ChainSystem",
    "PencilMatrices",
    "ValidationError",
    "Violation",
    "assemble",
    "validate",
    "leading_minors",
    "chain_to_json",
    "chain_from_json",
]


class ValidationError(ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


@dataclass(frozen=True)
class Violation:
    index: int  # 1-based; 0 for whole-chain problems
    field: str
    message: str

    def __str__(self):
        where = f"{self.field}[{self.index}]" if self.index else self.field
        return f"{where}: {self.message}"


@dataclass(frozen=True)
class ChainSystem:
    """Masses m, spring stiffnesses k and inertances b, index 1 at the ground.

    Values may be ints, Fractions or mpf; operations that need a particular
    number type convert on their own.
    """

    m: tuple
    k: tuple
    b: tuple

    def __post_init__(self):
        for name in ("m", "k", "b"):
            object.__setattr__(self, name, tuple(getattr(self, name)))

    @property
    def n(self) -> int:
        return len(self.m)

    def scaled(self, c) -> "ChainSystem":
        return ChainSystem([c * x for x in self.m], [c * x for x in self.k],
                           [c * x for x in self.b])


@dataclass(frozen=True)
class PencilMatrices:
    M: tuple
    K: tuple
    B: tuple

    def mass_plus_inertance(self):
        n = len(self.M)
        return tuple(tuple(self.M[i][j] + self.B[i][j] for j in range(n)) for i in range(n))


def validate(chain: ChainSystem) -> List[Violation]:
    out = []
    n = chain.n
    if n == 0:
        out.append(Violation(0, "n", "chain must have at least one degree of freedom"))
    if len(chain.k) != n or len(chain.b) != n:
        out.append(Violation(0, "n", f"lengths differ: m={n}, k={len(chain.k)}, b={len(chain.b)}"))
    for i, v in enumerate(chain.m, 1):
        if not v > 0:
            out.append(Violation(i, "m", "mass must be positive"))
    for i, v in enumerate(chain.k, 1):
        if not v > 0:
            out.append(Violation(i, "k", "stiffness must be positive"))
    for i, v in enumerate(chain.b, 1):
        if not v >= 0:
            out.append(Violation(i, "b", "inertance must be non-negative"))
    return out


def _tridiagonal(c: Sequence, zero):
    # diagonal c_j + c_{j+1} (last entry c_n), off-diagonal -c_{j+1}
    n = len(c)
    rows = []
    for i in range(n):
        row = [zero] * n
        row[i] = c[i] + c[i + 1] if i + 1 < n else c[i]
        if i + 1 < n:
            row[i + 1] = -c[i + 1]
        if i > 0:
            row[i - 1] = -c[i]
        rows.append(tuple(row))
    return tuple(rows)


def assemble(chain: ChainSystem) -> PencilMatrices:
    problems = validate(chain)
    if problems:
        raise ValidationError(problems)
    zero = chain.m[0] * 0
    n = chain.n
    M = tuple(tuple(chain.m[i] if i == j else zero for j in range(n)) for i in range(n))
    return PencilMatrices(M, _tridiagonal(chain.k, zero), _tridiagonal(chain.b, zero))


def leading_minors(A) -> list:
    """All leading principal minors of a symmetric tridiagonal matrix."""
    minors = []
    prev, cur = 1, A[0][0]
    minors.append(cur)
    for i in range(1, len(A)):
        prev, cur = cur, A[i][i] * cur - A[i][i - 1] * A[i - 1][i] * prev
        minors.append(cur)
    return minors


def chain_to_json(chain: ChainSystem, bits: int = None, float64: bool = False) -> dict:
    conv = float if float64 else (lambda x: to_decimal(x, bits))
    return {
        "n": chain.n,
        "m": [conv(x) for x in chain.m],
        "k": [conv(x) for x in chain.k],
        "b": [conv(x) for x in chain.b],
    }


def chain_from_json(obj: dict) -> ChainSystem:
    """Parse the chain schema; raises ValueError naming the offending field."""
    if not isinstance(obj, dict):
        raise ValueError("chain: expected a JSON object")
    vals = {}
    for key in ("m", "k", "b"):
        if key not in obj:
            raise ValueError(f"chain: missing field {key!r}")
        seq = obj[key]
        if not isinstance(seq, list):
            raise ValueError(f"chain.{key}: expected a list")
        parsed = []
        for i, s in enumerate(seq):
            try:
                parsed.append(from_decimal(s))
            except (TypeError, ValueError) as exc:
                raise ValueError(f"chain.{key}[{i}]: {exc}") from None
        vals[key] = parsed
    n = obj.get("n", len(vals["m"]))
    if not isinstance(n, int) or any(len(v) != n for v in vals.values()):
        raise ValueError("chain.n: does not match the lengths of m, k, b")
    return ChainSystem(vals["m"], vals["k"], vals["b"])
