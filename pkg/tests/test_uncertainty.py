"""Closed-form values and properties for the disagreement-scoring kernel.

The reference oracle here is a deliberately plain reimplementation of the
score (explicit loops, ``math.log`` only); the numpy paths must agree with
it, not the other way around.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from alpool.errors import UncertaintyError
from alpool.uncertainty import (
    ScoreBreakdown,
    band_filter,
    build_report,
    ceil_fraction,
    entropy,
    kl_divergence,
    rank_descending,
    read_report_scores,
    score_committee,
    select_top,
    uncertainty_score,
    write_report_csv,
)


def straight_line_score(dists):
    """Independent scalar oracle: member entropies plus all ordered-pair KLs."""
    ent = 0.0
    for p in dists:
        for v in p:
            if v > 0:
                ent -= v * math.log(v)
    kl = 0.0
    for i in range(len(dists)):
        for j in range(len(dists)):
            if i == j:
                continue
            for a, b in zip(dists[i], dists[j]):
                if a > 0:
                    kl += a * math.log(a / (b + 1e-12))
    return ent, kl, ent + kl


def random_dist(rng, c):
    raw = rng.random(c) + 1e-9
    return raw / raw.sum()


class TestEntropy:
    def test_fair_coin(self):
        assert entropy([0.5, 0.5]) == pytest.approx(math.log(2), abs=1e-6)

    def test_delta(self):
        assert entropy([1.0, 0.0]) == 0.0

    def test_uniform_four(self):
        assert entropy([0.25] * 4) == pytest.approx(math.log(4), abs=1e-6)

    def test_rejects_negative_entry(self):
        with pytest.raises(UncertaintyError) as err:
            entropy([1.1, -0.1])
        assert err.value.code == "INVALID_DISTRIBUTION"

    def test_rejects_bad_sum(self):
        with pytest.raises(UncertaintyError):
            entropy([0.5, 0.6])

    def test_bounds_random(self):
        rng = np.random.default_rng(11)
        for _ in range(1000):
            c = int(rng.integers(2, 11))
            p = random_dist(rng, c)
            h = entropy(p)
            assert -1e-12 <= h <= math.log(c) + 1e-12


class TestKlDivergence:
    def test_identity_is_zero(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            p = random_dist(rng, int(rng.integers(2, 8)))
            assert kl_divergence(p, p) == pytest.approx(0.0, abs=1e-9)

    def test_closed_form(self):
        # 0.75 ln 1.5 + 0.25 ln 0.5
        expected = 0.75 * math.log(1.5) + 0.25 * math.log(0.5)
        assert kl_divergence([0.75, 0.25], [0.5, 0.5]) == pytest.approx(expected, abs=1e-6)
        assert expected == pytest.approx(0.130812, abs=1e-6)

    def test_asymmetry(self):
        expected = 0.5 * math.log(0.5 / 0.75) + 0.5 * math.log(0.5 / 0.25)
        assert kl_divergence([0.5, 0.5], [0.75, 0.25]) == pytest.approx(expected, abs=1e-6)
        assert expected == pytest.approx(0.143841, abs=1e-6)

    def test_length_mismatch(self):
        with pytest.raises(UncertaintyError) as err:
            kl_divergence([0.5, 0.5], [0.5, 0.25, 0.25])
        assert err.value.code == "LENGTH_MISMATCH"

    def test_gibbs_inequality_random(self):
        rng = np.random.default_rng(29)
        for _ in range(1000):
            c = int(rng.integers(2, 11))
            assert kl_divergence(random_dist(rng, c), random_dist(rng, c)) >= -1e-12

    def test_handles_exact_zeros(self):
        # zero-mass terms contribute nothing; zero denominators are smoothed
        assert kl_divergence([1.0, 0.0], [1.0, 0.0]) == pytest.approx(0.0, abs=1e-9)
        assert kl_divergence([0.5, 0.5], [1.0, 0.0]) > 1.0  # blows up but stays finite


class TestUncertaintyScore:
    def test_identical_uniform_committee(self):
        got = uncertainty_score([[0.5, 0.5]] * 3)
        assert got.kl_sum == pytest.approx(0.0, abs=1e-9)
        assert got.score == pytest.approx(3 * math.log(2), abs=1e-9)

    def test_identical_delta_committee(self):
        got = uncertainty_score([[1.0, 0.0]] * 3)
        assert got.score == pytest.approx(0.0, abs=1e-9)

    def test_matches_straight_line_oracle(self):
        dists = [[0.9, 0.1], [0.5, 0.5], [0.1, 0.9]]
        ent, kl, score = straight_line_score(dists)
        got = uncertainty_score(dists)
        assert got.entropy_sum == pytest.approx(ent, abs=1e-9)
        assert got.kl_sum == pytest.approx(kl, abs=1e-9)
        assert got.score == pytest.approx(score, abs=1e-9)

    def test_score_is_sum_of_parts(self):
        got = uncertainty_score([[0.9, 0.1], [0.2, 0.8]])
        assert got.score == got.entropy_sum + got.kl_sum

    def test_oracle_equivalence_500_random(self):
        rng = np.random.default_rng(500)
        for _ in range(500):
            k = int(rng.integers(2, 6))
            c = int(rng.integers(2, 7))
            dists = [random_dist(rng, c) for _ in range(k)]
            _, _, expect = straight_line_score(dists)
            assert uncertainty_score(dists).score == pytest.approx(expect, abs=1e-9)

    def test_permutation_symmetry(self):
        rng = np.random.default_rng(77)
        dists = [random_dist(rng, 4) for _ in range(4)]
        base = uncertainty_score(dists).score
        for _ in range(5):
            perm = rng.permutation(4)
            assert uncertainty_score([dists[i] for i in perm]).score == pytest.approx(
                base, abs=1e-9
            )

    def test_rejects_single_member(self):
        with pytest.raises(UncertaintyError):
            uncertainty_score([[0.5, 0.5]])

    def test_vectorized_matches_scalar(self):
        rng = np.random.default_rng(8)
        k, n, c = 3, 40, 5
        probs = np.stack([[random_dist(rng, c) for _ in range(n)] for _ in range(k)])
        ents, kls, scores = score_committee(probs)
        for i in range(n):
            one = uncertainty_score([probs[m, i] for m in range(k)])
            assert ents[i] == pytest.approx(one.entropy_sum, abs=1e-9)
            assert kls[i] == pytest.approx(one.kl_sum, abs=1e-9)
            assert scores[i] == pytest.approx(one.score, abs=1e-9)


class TestRanking:
    def test_descending(self):
        assert rank_descending({0: 5.0, 1: 3.0, 2: 9.0, 3: 1.0}) == [2, 0, 1, 3]

    def test_ties_break_by_ascending_id(self):
        assert rank_descending({0: 2.0, 1: 2.0, 2: 1.0}) == [0, 1, 2]

    def test_empty(self):
        assert rank_descending({}) == []

    def test_non_finite_rejected(self):
        with pytest.raises(UncertaintyError) as err:
            rank_descending({0: 1.0, 7: math.nan})
        assert err.value.code == "NON_FINITE_SCORE"
        assert err.value.detail["sample_id"] == 7


class TestSelectTop:
    def test_thirty_percent_of_ten(self):
        assert select_top(list(range(10)), 0.30, 10) == [0, 1, 2]

    def test_full_fraction(self):
        assert select_top([4, 2, 9], 1.0, 3) == [4, 2, 9]

    def test_ceiling_rule(self):
        assert select_top(list(range(7)), 0.30, 7) == [0, 1, 2]  # ceil(2.1) = 3

    def test_invalid_fraction(self):
        for bad in (0.0, -0.2, 1.5):
            with pytest.raises(UncertaintyError):
                select_top([1], bad, 1)

    def test_cap_at_ranking_length(self):
        assert select_top([3, 1], 0.9, 10) == [3, 1]

    @given(st.integers(1, 200), st.fractions(min_value="1/100", max_value=1))
    def test_count_matches_exact_ceiling(self, n, frac):
        got = len(select_top(list(range(n)), float(frac), n))
        assert got == min(n, math.ceil(frac * n))


class TestBandFilter:
    def test_drop_ten_percent_each_side(self):
        assert band_filter(list(range(10)), drop_top=0.1, drop_bottom=0.1) == list(range(1, 9))

    def test_no_drop_is_identity(self):
        assert band_filter(list(range(10))) == list(range(10))

    def test_band_slice_example(self):
        # positions 3..5 of a 10-long ranking, i.e. ranks 4-6
        assert band_filter(list(range(10)), band=(0.3, 0.6)) == [3, 4, 5]

    def test_band_against_integer_oracle(self):
        # independent index computation in exact integer arithmetic
        rational_bands = [(0, 1, 3, 10), (3, 10, 6, 10), (1, 3, 2, 3), (0, 1, 1, 1), (1, 2, 1, 1)]
        for n in range(1, 101):
            ranking = list(range(n))
            for p, q, r, s in rational_bands:
                start, end = (p * n) // q, (r * n) // s
                expect = ranking[start:end]
                assert band_filter(ranking, band=(p / q, r / s)) == expect

    def test_invalid_drops(self):
        with pytest.raises(UncertaintyError):
            band_filter([1, 2, 3], drop_top=0.6, drop_bottom=0.5)

    def test_disjoint_bands_partition(self):
        for n in (1, 7, 10, 33, 100):
            ranking = list(range(n))
            parts = [
                band_filter(ranking, band=(0.0, 0.3)),
                band_filter(ranking, band=(0.3, 0.6)),
                band_filter(ranking, band=(0.6, 1.0)),
            ]
            flat = [i for part in parts for i in part]
            assert sorted(flat) == ranking
            assert len(set(flat)) == len(flat)


class TestReport:
    def test_build_and_csv_round_trip(self, tmp_path):
        rng = np.random.default_rng(4)
        probs = np.stack([[random_dist(rng, 3) for _ in range(5)] for _ in range(3)])
        ids = [10, 11, 12, 13, 14]
        report = build_report(ids, probs)
        assert sorted(report.ranking) == ids
        scores = {e.sample_id: e.score for e in report.entries}
        assert list(report.ranking) == rank_descending(scores)
        for e in report.entries:
            assert e.score == e.entropy_sum + e.kl_sum

        path = tmp_path / "report.csv"
        write_report_csv(report, path)
        loaded = read_report_scores(path)
        assert set(loaded) == set(ids)
        ranks = report.rank_of()
        for sid, row in loaded.items():
            assert row["score"] == scores[sid]
            assert row["rank"] == ranks[sid]
