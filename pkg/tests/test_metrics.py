import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from agentjit.distributions import Gamma
from agentjit.metrics import (
    empirical_cdf, mock_records, parse_int_list, parse_range, pass_at_k, pass_at_t,
    pass_curves, pass_plateau, rows_to_csv,
)


def _subset_oracle(n, c, k):
    """Fraction of all k-subsets of n items (c good) containing a good one."""
    items = [True] * c + [False] * (n - c)
    subsets = list(itertools.combinations(range(n), k))
    return Fraction(sum(any(items[i] for i in s) for s in subsets), len(subsets))


@pytest.mark.parametrize("n", range(1, 9))
def test_exhaustive_small(n):
    for c in range(n + 1):
        for k in range(1, n + 1):
            assert pass_at_k(n, c, k, exact=True) == _subset_oracle(n, c, k)


def test_worked_value():
    assert pass_at_k(10, 5, 3) == pytest.approx(1 - 10 / 120, abs=1e-12)


def test_edge_values():
    assert pass_at_k(7, 7, 3) == 1.0
    assert pass_at_k(7, 0, 3) == 0.0
    with pytest.raises(ValueError):
        pass_at_k(3, 4, 1)
    with pytest.raises(ValueError):
        pass_at_k(3, 1, 0)


@given(st.integers(1, 60).flatmap(lambda n: st.tuples(st.just(n), st.integers(0, n),
                                                     st.integers(1, n))))
def test_pass_at_k_monotone(nck):
    n, c, k = nck
    v = pass_at_k(n, c, k)
    if k == 1:
        assert v == pytest.approx(c / n)
    if k < n:
        assert pass_at_k(n, c, k + 1) >= v - 1e-12
    if c < n:
        assert pass_at_k(n, c + 1, k) >= v - 1e-12


def test_pass_at_t_examples():
    assert pass_at_t(lambda t: 0.0, 0.22, 8, 0.0) == 0.0
    for n in (1, 4, 8):
        assert pass_at_t(lambda t: 1.0, 1.0, n, 5.0) == 1.0
    assert pass_at_t(lambda t: 0.5, 0.22, 8, 3.0) == pytest.approx(1 - 0.89 ** 8)
    assert 1 - 0.89 ** 8 == pytest.approx(0.6063, abs=1e-4)


def test_pass_at_t_monte_carlo():
    rng = np.random.default_rng(0)
    n_draws, n_par, p, f = 10**6, 8, 0.22, 0.5
    hit = (rng.random((n_draws, n_par)) < p) & (rng.random((n_draws, n_par)) < f)
    assert abs(hit.any(axis=1).mean() - pass_at_t(lambda t: f, p, n_par, 1.0)) < 0.002


@given(st.floats(0, 1), st.floats(0, 1), st.integers(1, 16), st.floats(0, 1), st.floats(0, 1))
def test_pass_at_t_monotone_and_bounded(f1, f2, n, p1, p2):
    lo_f, hi_f = sorted((f1, f2))
    lo_p, hi_p = sorted((p1, p2))
    base = pass_at_t(lambda t: lo_f, lo_p, n, 0)
    assert pass_at_t(lambda t: hi_f, lo_p, n, 0) >= base
    assert pass_at_t(lambda t: lo_f, hi_p, n, 0) >= base
    assert pass_at_t(lambda t: lo_f, lo_p, n + 1, 0) >= base
    assert base <= pass_plateau(lo_p, n) + 1e-15


def test_pass_at_t_rejects_bad_input():
    with pytest.raises(ValueError):
        pass_at_t(lambda t: 0.5, 1.5, 8, 1)
    with pytest.raises(ValueError):
        pass_at_t(lambda t: 0.5, 0.5, 0, 1)
    with pytest.raises(ValueError):
        pass_at_t(lambda t: 1.5, 0.5, 1, 1)


def test_empirical_cdf_right_continuous():
    cdf = empirical_cdf([3.0, 1.0, 2.0, 2.0])
    assert [cdf(t) for t in (0.9, 1.0, 1.5, 2.0, 3.0)] == [0, 0.25, 0.25, 0.75, 1.0]


def test_curves_all_valid():
    recs = [{"valid": True, "latency_s": 1.0}] * 5
    rows = pass_curves(recs, [1], [0.5, 1.0], 8)
    assert rows[0] == {"metric": "pass@k", "x": 1, "value": 1.0}
    assert [r["value"] for r in rows[1:]] == [0.0, 1.0]


def test_curves_plateau():
    recs = mock_records(10_000, 0.22, np.random.default_rng(0), Gamma(2.0, 3.0))
    rows = pass_curves(recs, [], [1e6], 8)
    assert rows[0]["value"] == pytest.approx(1 - 0.78 ** 8, abs=1e-9)
    assert pass_plateau(0.22, 8) == pytest.approx(0.863, abs=5e-4)


def test_curves_pass1_anchor():
    recs = mock_records(1184, 0.91, np.random.default_rng(1))
    assert sum(r["valid"] for r in recs) == 1077
    (row,) = pass_curves(recs, [1], [], 8)
    assert f"{row['value']:.3f}" == "0.910"


def test_curves_need_records():
    with pytest.raises(ValueError):
        pass_curves([], [1], [1], 8)


def test_csv_and_parsers():
    text = rows_to_csv([{"metric": "pass@k", "x": 1, "value": 0.5}])
    assert text == "metric,x,value\npass@k,1,0.500000\n"
    assert parse_int_list("1,3, 5") == [1, 3, 5]
    assert parse_range("1..4") == [1.0, 2.0, 3.0, 4.0]
    assert parse_range("0..1:0.25") == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert parse_range("2,7.5") == [2.0, 7.5]
