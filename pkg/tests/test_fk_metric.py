"""
Tests de emparejamientos (n, delta), f-bar, F-bar_K y la cota por bloques
"""
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from src.errors import CertificationFailure, HorizonTooLarge
from src.fk_metric import (
    MatchProblem,
    block_match_bound,
    brute_force_fit,
    cauchy_bound,
    fbar_delta,
    fk_distance,
    fk_upper_bound,
    gap,
    max_fit,
    window_tokens,
)
from src.symbolic import Literal, PeriodicPoint, as_periodic, build_stage_word, window_agree


def _random_point(rng, max_period=5, k=2):
    period = int(rng.integers(1, max_period + 1))
    return PeriodicPoint(Literal(tuple(int(j) for j in rng.integers(1, k + 1, size=period))))


def test_dp_matches_brute_force_oracle():
    rng = np.random.default_rng(2024)
    for _ in range(200):
        u = _random_point(rng)
        v = _random_point(rng)
        n = int(rng.integers(1, 9))
        m = int(rng.integers(0, 3))
        pu, pv = int(rng.integers(0, 5)), int(rng.integers(0, 5))
        expected = brute_force_fit(u, v, n, m, pu, pv)
        result = max_fit(MatchProblem(u, v, n, m, pu, pv))
        assert result.fit == expected, (u, v, n, m, pu, pv)


def test_alignment_is_valid_match():
    rng = np.random.default_rng(7)
    for _ in range(30):
        u, v = _random_point(rng, 7), _random_point(rng, 7)
        n, m = int(rng.integers(5, 40)), int(rng.integers(0, 3))
        result = max_fit(MatchProblem(u, v, n, m), with_alignment=True)
        pairs = result.alignment
        assert len(pairs) == result.fit
        for (i0, j0), (i1, j1) in zip(pairs, pairs[1:]):
            assert i0 < i1 and j0 < j1
        assert all(window_agree(u, i, v, j, m) for i, j in pairs)
        assert all(0 <= i < n and 0 <= j < n for i, j in pairs)


def test_identical_sequences_fit_everything():
    u = as_periodic("12212")
    result = max_fit(MatchProblem(u, u, 50, 3))
    assert result.fit == 50
    assert result.gap == 0.0


def test_disjoint_symbols_fit_nothing():
    assert max_fit(MatchProblem(as_periodic("1"), as_periodic("2"), 20, 0)).fit == 0
    assert gap(MatchProblem(as_periodic("1"), as_periodic("2"), 20, 0)) == 1.0


@settings(max_examples=50)
@given(
    st.lists(st.integers(1, 2), min_size=1, max_size=5),
    st.lists(st.integers(1, 2), min_size=1, max_size=5),
    st.integers(1, 20),
    st.integers(0, 2),
)
def test_fit_monotone_in_horizon_and_window(a, b, n, m):
    u, v = PeriodicPoint(Literal(tuple(a))), PeriodicPoint(Literal(tuple(b)))
    base = max_fit(MatchProblem(u, v, n, m)).fit
    assert 0 <= base <= n
    assert max_fit(MatchProblem(u, v, n + 1, m)).fit >= base
    assert max_fit(MatchProblem(u, v, n, m + 1)).fit <= base


def test_window_tokens_realize_window_agree():
    u, v = as_periodic("1121"), as_periodic("121")
    tu, tv = window_tokens(u, v, 12, 1)
    for i in range(12):
        for j in range(12):
            assert (tu[i] == tv[j]) == window_agree(u, i, v, j, 1)


def test_horizon_cap():
    u = as_periodic("12")
    with pytest.raises(HorizonTooLarge):
        max_fit(MatchProblem(u, u, 101, 0), cap=100)
    with pytest.raises(ValueError):
        MatchProblem(u, u, 0, 0)
    with pytest.raises(ValueError):
        brute_force_fit(u, u, 11, 0)


def test_fbar_delta_profile():
    u, v = as_periodic("221"), as_periodic("2212211")
    estimate = fbar_delta(u, v, 1, multiples=(1, 2))
    assert estimate.period == 21
    assert [p.horizon for p in estimate.profile] == [21, 42]
    assert estimate.estimate == estimate.profile[-1].gap
    # Una sola pasada: coincide con corridas separadas
    for point in estimate.profile:
        assert point.fit == max_fit(MatchProblem(u, v, point.horizon, 1)).fit


def test_fk_distance_exact_zero():
    result = fk_distance(as_periodic("12"), as_periodic("1212"), m_max=4)
    assert result.exact_zero
    assert result.value == 0.0


def test_fk_distance_no_qualifying_window():
    result = fk_distance(as_periodic("1"), as_periodic("2"), m_max=3)
    assert result.value == 1.0
    assert result.witness_window is None
    assert result.gammas == [1.0] * 4


def test_fk_distance_rule():
    u, v = as_periodic("221"), as_periodic("2212211")
    result = fk_distance(u, v, m_max=4, multiples=(1, 2))
    candidates = [
        max(g, 2.0 ** -(m + 1)) for m, g in enumerate(result.gammas) if g < 2.0 ** -m
    ]
    assert result.value == min(candidates, default=1.0)
    assert 0.0 < result.value <= 1.0


def test_block_match_certified_for_reference(reference_stages):
    for n in range(1, len(reference_stages) - 1):
        lower, upper = reference_stages[n], reference_stages[n + 1]
        block = block_match_bound(lower, upper, n)
        assert block.certified
        assert block.fit_per_block == 2 * lower.pi - 2 * n
        assert block.fit_total == lower.pi * block.fit_per_block
        assert block.gap_upper == pytest.approx((1 + 2 * n) / upper.pi)
        assert block.horizon == lower.pi * upper.pi


def test_dp_within_block_bound_and_cauchy(reference_stages):
    for n in range(1, 5):
        lower, upper = reference_stages[n], reference_stages[n + 1]
        N = lower.pi * upper.pi
        block = block_match_bound(lower, upper, n)
        result = max_fit(MatchProblem(lower.point, upper.point, N, n))
        assert result.fit >= block.fit_total
        assert result.gap <= block.gap_upper
        assert fk_upper_bound(n, result.gap) <= cauchy_bound(lower, upper) + 1.0 / N


def test_cauchy_bound_value(reference_stages):
    lower, upper = reference_stages[3], reference_stages[4]
    assert cauchy_bound(lower, upper) == pytest.approx(1 / 30 + 4 / 8)
    with pytest.raises(ValueError):
        cauchy_bound(reference_stages[3], reference_stages[5])


def test_block_match_detects_bad_pair(reference_stages):
    lower = reference_stages[1]
    fake = build_stage_word(Literal((1, 1, 1)), 2, "1")
    upper = replace(reference_stages[2], xi=fake)
    with pytest.raises(CertificationFailure):
        block_match_bound(lower, upper, 0)


def test_fk_estimate_within_cauchy_bound(reference_stages):
    for n in range(1, 5):
        lower, upper = reference_stages[n], reference_stages[n + 1]
        N = lower.pi * upper.pi
        result = fk_distance(lower.point, upper.point, m_max=6, multiples=(1, 2))
        assert result.value <= cauchy_bound(lower, upper) + 1.0 / N
