import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lean_tvr.metrics import (both_directions, metrics, rank_of_target, t2v_ranks, v2t_ranks)


def oracle_rank(scores, target):
    # stable sort by descending score keeps index order among ties
    order = sorted(range(len(scores)), key=lambda j: (-scores[j], j))
    return order.index(target) + 1


class TestRank:
    def test_strict_max(self):
        assert rank_of_target([0.1, 0.9, 0.3], 1) == 1

    def test_all_equal(self):
        assert rank_of_target([0.5] * 4, 0) == 1
        assert rank_of_target([0.5] * 4, 3) == 4

    def test_hand_case(self):
        assert rank_of_target([0.9, 0.5, 0.7], 2) == 2

    def test_out_of_range(self):
        with pytest.raises(IndexError):
            rank_of_target([1.0, 2.0], 2)

    @given(st.lists(st.integers(-3, 3), min_size=1, max_size=16), st.data())
    def test_matches_sort_oracle(self, scores, data):
        t = data.draw(st.integers(0, len(scores) - 1))
        assert rank_of_target(scores, t) == oracle_rank(scores, t)

    @given(st.lists(st.floats(-5, 5), min_size=2, max_size=10), st.data())
    def test_monotone_in_target_score(self, scores, data):
        t = data.draw(st.integers(0, len(scores) - 1))
        bumped = list(scores)
        bumped[t] += data.draw(st.floats(0, 3))
        assert rank_of_target(bumped, t) <= rank_of_target(scores, t)

    @given(st.lists(st.integers(-5, 5), min_size=1, max_size=10), st.integers(-100, 100), st.data())
    def test_shift_invariant(self, scores, c, data):
        t = data.draw(st.integers(0, len(scores) - 1))
        assert rank_of_target([s + c for s in scores], t) == rank_of_target(scores, t)


class TestMetrics:
    def test_hand_case(self):
        m = metrics([1, 3, 11])
        assert (round(m.r1, 2), round(m.r5, 2), round(m.r10, 2), round(m.rsum, 2)) == (33.33, 66.67, 66.67, 166.67)
        assert m.mdr == 3 and m.mnr == 5.0

    def test_perfect(self):
        m = metrics([1, 1, 1])
        assert (m.r1, m.r5, m.r10, m.rsum, m.mdr, m.mnr) == (100, 100, 100, 300, 1, 1)

    def test_even_median(self):
        assert metrics([2, 4]).mdr == 3.0

    def test_empty(self):
        with pytest.raises(ValueError):
            metrics([])

    def test_rejects_zero_rank(self):
        with pytest.raises(ValueError):
            metrics([0, 1])

    @given(st.lists(st.integers(1, 40), min_size=1, max_size=30), st.randoms())
    def test_permutation_invariant_and_ordered(self, ranks, rnd):
        shuffled = list(ranks)
        rnd.shuffle(shuffled)
        a, b = metrics(ranks), metrics(shuffled)
        assert a == b
        assert 0 <= a.r1 <= a.r5 <= a.r10 <= 100
        assert a.rsum == a.r1 + a.r5 + a.r10 and a.mdr >= 1 and a.mnr >= 1

    def test_as_dict_rounds(self):
        assert metrics([1, 3, 11]).as_dict()["rsum"] == 166.67


class TestDirections:
    def test_rows_and_columns(self):
        s = np.array([[3.0, 1.0], [5.0, 2.0]])
        assert t2v_ranks(s) == [1, 2]
        assert v2t_ranks(s) == [2, 1]

    def test_identity_oracle(self):
        t2v, v2t = both_directions(np.eye(7))
        assert t2v.r1 == 100 and v2t.r1 == 100

    def test_single_pair(self):
        t2v, v2t = both_directions([[0.2]])
        assert t2v.as_dict() == v2t.as_dict() == {"r1": 100, "r5": 100, "r10": 100, "rsum": 300,
                                                  "mdr": 1, "mnr": 1}

    @settings(max_examples=50)
    @given(st.integers(1, 16), st.integers(0, 2**31 - 1))
    def test_random_matrices_against_oracle(self, b, seed):
        s = np.random.default_rng(seed).integers(0, 4, (b, b)).astype(float)
        t2v, v2t = both_directions(s)
        rt = [oracle_rank(list(s[i]), i) for i in range(b)]
        rv = [oracle_rank(list(s[:, j]), j) for j in range(b)]
        assert t2v == metrics(rt) and v2t == metrics(rv)
