import random
from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, settings, strategies as st
from mpmath import mpf

from inerter_iep.chain import ChainSystem
from inerter_iep.forward import (
    DegenerateSigma,
    SizeLimit,
    dense_charpoly,
    fg_sequence,
    spectrum,
    sturm_count,
)
from inerter_iep.numerics import PrecisionConfig
from test_chain import rational_chains

CFG = PrecisionConfig(128)
UNIT2 = ChainSystem((1, 1), (1, 1), (0, 0))


def test_fg_sequence_examples():
    assert fg_sequence(ChainSystem((2,), (6,), (1,)), 2)[-1][0] == 0
    assert fg_sequence(UNIT2, 1)[-1][0] == -1
    chain = ChainSystem((1, 2, 3), (4, 5, 6), (0, 1, 0))
    assert fg_sequence(chain, 0)[-1][0] == 4 * 5 * 6


def test_sturm_count_examples():
    assert sturm_count(UNIT2, 0).count == 0
    assert sturm_count(UNIT2, 1).count == 1
    assert sturm_count(UNIT2, 100).count == 2


def test_sturm_count_exact_zero_minor():
    # first pivot 1 - sigma vanishes at sigma = 1 for this chain
    with pytest.raises(DegenerateSigma):
        sturm_count(ChainSystem((1,), (1,), (0,)), 1)


def test_spectrum_examples():
    rep = spectrum(ChainSystem((2,), (6,), (1,)), CFG)
    assert rep.multiplicities == (1,)
    assert abs(rep.eigenvalues[0] - 2) < mpf(2) ** -100
    rep = spectrum(UNIT2, CFG)
    with CFG.workprec():
        expected = [(3 - mpmath.sqrt(5)) / 2, (3 + mpmath.sqrt(5)) / 2]
        assert rep.multiplicities == (1, 1)
        for got, want in zip(rep.eigenvalues, expected):
            assert abs(got - want) < mpf(2) ** -100
    assert set(spectrum(UNIT2, CFG).to_json(128)) == {"eigenvalues", "multiplicities", "residuals"}


def test_dense_charpoly_examples():
    assert dense_charpoly(ChainSystem((2,), (6,), (1,))) == [6, -3]
    assert dense_charpoly(UNIT2) == [1, -3, 1]
    with pytest.raises(SizeLimit):
        dense_charpoly(ChainSystem([1] * 9, [1] * 9, [0] * 9))


def _poly(coeffs, x):
    return sum(c * x ** i for i, c in enumerate(coeffs))


@settings(max_examples=60, deadline=None)
@given(rational_chains(n_max=5))
def test_recurrence_matches_cofactor_expansion_exactly(chain):
    coeffs = dense_charpoly(chain)
    # leading coefficient is (-1)^n det(M + B)
    for x in [Fraction(i, 3) for i in range(chain.n + 1)]:
        assert fg_sequence(chain, x)[-1][0] == _poly(coeffs, x)
    assert coeffs[0] == fg_sequence(chain, 0)[-1][0]


@settings(max_examples=40, deadline=None)
@given(rational_chains(n_max=6))
def test_spectrum_matches_oracle_roots(chain):
    coeffs = dense_charpoly(chain)
    rep = spectrum(chain, CFG)
    with mpmath.workprec(256):
        roots = sorted(mpmath.re(r) for r in mpmath.polyroots(
            [mpf(c.numerator) / c.denominator for c in reversed(coeffs)], maxsteps=400, extraprec=400))
    got = [x for x, t in zip(rep.eigenvalues, rep.multiplicities) for _ in range(t)]
    assert len(got) == chain.n
    for a, b in zip(got, roots):
        assert abs(a - b) <= 10 * CFG.tol * max(1, abs(b)) + mpf(2) ** -60 * abs(b)


@settings(max_examples=40, deadline=None)
@given(rational_chains(n_max=6), st.lists(st.floats(0, 200), min_size=2, max_size=12))
def test_sturm_count_monotone(chain, sigmas):
    counts = []
    for s in sorted(sigmas):
        try:
            counts.append(sturm_count(chain, Fraction(s)).count)
        except DegenerateSigma:
            pass
    assert counts == sorted(counts)
    assert all(0 <= c <= chain.n for c in counts)


def _random_chain(rng, n):
    draw = lambda: mpf(10 ** rng.uniform(-1, 1))
    return ChainSystem([draw() for _ in range(n)], [draw() for _ in range(n)],
                       [draw() if rng.random() < 0.5 else 0 for _ in range(n)])


def test_roots_of_f_and_g_interlace():
    rng = random.Random(11)
    for _ in range(40):
        n = rng.randint(2, 6)
        chain = _random_chain(rng, n)
        f = spectrum(chain, CFG)
        g = spectrum(chain, CFG, order=n - 1)
        assert f.multiplicities == (1,) * n and g.multiplicities == (1,) * (n - 1)
        # roots of (-lambda) g_n are 0 and those of g_n: 0 < f1 < g1 < f2 < ... < f_n
        merged = [mpf(0)]
        for i in range(n - 1):
            merged += [f.eigenvalues[i], g.eigenvalues[i]]
        merged.append(f.eigenvalues[-1])
        assert all(a < b for a, b in zip(merged, merged[1:]))


def test_scaling_leaves_spectrum_unchanged():
    rng = random.Random(5)
    for _ in range(10):
        chain = _random_chain(rng, rng.randint(1, 5))
        a = spectrum(chain, CFG)
        with CFG.workprec():
            scaled = chain.scaled(mpf(37) / 7)
        b = spectrum(scaled, CFG)
        assert a.multiplicities == b.multiplicities
        for x, y in zip(a.eigenvalues, b.eigenvalues):
            assert abs(x - y) <= mpf(2) ** -100 * y


def test_backends_agree():
    rng = random.Random(9)
    for _ in range(20):
        chain = _random_chain(rng, rng.randint(1, 6))
        a = spectrum(chain, CFG)
        b = spectrum(chain, CFG, backend="mpfr")
        assert a.multiplicities == b.multiplicities
        for x, y in zip(a.eigenvalues, b.eigenvalues):
            assert abs(x - y) <= mpf(2) ** -110 * y


def test_residuals_small_and_samples_monotone():
    rng = random.Random(3)
    chain = _random_chain(rng, 5)
    rep = spectrum(chain, CFG)
    assert all(r < mpf(2) ** -100 for r in rep.residuals)
    samples = sorted(rep.samples, key=lambda s: s.sigma)
    assert [s.count for s in samples] == sorted(s.count for s in samples)
