"""Shared generators for the test suite."""

import random

from mpmath import mpf

from inerter_iep.plan import TargetSpectrum

ACCEPTANCE_LINES = []


def record(criterion: int, ok: bool, detail: str) -> None:
    ACCEPTANCE_LINES.append(f"criterion {criterion}: {'PASS' if ok else 'FAIL'} - {detail}")


def random_spec(rng: random.Random, n: int, low=-1.0, high=1.0) -> TargetSpectrum:
    """Random feasible multiplicity vector summing to n, eigenvalues log-uniform in [10**low, 10**high]."""
    while True:
        m = rng.randint(1, n)
        cuts = sorted(rng.sample(range(1, n), m - 1))
        t = [b - a for a, b in zip([0] + cuts, cuts + [n])]
        rng.shuffle(t)
        if all(x <= i for i, x in enumerate(t, 1)):
            lams = sorted(10 ** rng.uniform(low, high) for _ in range(m))
            if len(set(lams)) == m:
                return TargetSpectrum([mpf(x) for x in lams], t)
