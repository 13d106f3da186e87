import math

import numpy as np
import pytest

from widthlab.approximation import deviation
from widthlab.norms import InputError
from widthlab.scaling import (SWEEP_COLUMNS, ball_deviation_bound, block_budget_construction,
                              build_problem, coordinate_construction, default_levels,
                              fit_log_exponent, level_candidates, level_range, level_table,
                              lower_certificate, summarize, sweep, tail_truncation_bound)


def test_default_levels():
    assert [default_levels(n) for n in (16, 32, 256)] == [6, 7, 10]
    assert default_levels(10**9) == 14


def test_level_range():
    # q = 4: 4n < 2^k < n^(3/2)
    assert level_range(256, 4.0) == (11, 11)
    assert level_range(16, 4.0) == (7, 5)


def test_problem_shapes():
    p1 = build_problem(1.0, 4.0, 3)
    assert p1.dim == 7
    assert p1.body.partition.m == 1
    pinf = build_problem(math.inf, 4.0, 3)
    assert pinf.body.partition.sizes.tolist() == [1, 2, 4]
    assert pinf.weights.tolist() == [1, 0.5, 0.5, 0.25, 0.25, 0.25, 0.25]
    assert build_problem(2.0, 4.0, 3).body is None
    for bad in ((0.5, 4.0, 3), (1.0, 2.0, 3), (1.0, 4.0, 15)):
        with pytest.raises(InputError):
            build_problem(*bad)


def test_block_budget_construction_dimensions():
    prob = build_problem(math.inf, 4.0, 6)
    sub = block_budget_construction(prob, 16, seed=0)
    # levels of size 1 and 2 whole, one random direction in each of the other four
    assert [loc.shape[1] for _, loc in sub.blocks] == [1, 2, 1, 1, 1, 1]
    assert sub.dim == 7


def test_block_budget_infeasible():
    with pytest.raises(InputError):
        block_budget_construction(build_problem(1.0, 4.0, 6), 8, seed=0)


def test_tail_truncation_bound():
    assert tail_truncation_bound(1.0, 4.0, 8, 16) == pytest.approx(0.25)


@pytest.mark.parametrize("theta", [1.0, math.inf])
def test_ball_bound_against_enumeration(theta):
    prob = build_problem(theta, 4.0, 3)
    sub = coordinate_construction(prob, 2)
    for s in (sub, level_candidates(prob, 4, seed=0, random_draws=1)[-1][1]):
        bound = ball_deviation_bound(prob, level_table(prob, s))
        exact = deviation(prob.body, s, prob.norm)
        if theta == 1:
            assert bound == pytest.approx(exact, rel=1e-8)
        else:
            assert bound >= exact * (1 - 1e-9)


def test_coordinate_construction_exact_value():
    # levels 0 and 1 kept; a level-2 unit vector has l_{4,w} norm (1/4)^(1/4) > l_{2,w} norm 1/2
    prob = build_problem(1.0, 4.0, 3)
    sub = coordinate_construction(prob, 3)
    assert ball_deviation_bound(prob, level_table(prob, sub)) == pytest.approx(0.25**0.25)


def test_lower_certificate_below_upper():
    for theta in (1.0, 2.0, math.inf):
        prob = build_problem(theta, 4.0, 4)
        sub = coordinate_construction(prob, 4)
        assert lower_certificate(prob, 4) <= ball_deviation_bound(prob, level_table(prob, sub))


def test_fit_recovers_exponent():
    ns = np.array([16, 32, 64, 128, 256])
    d = 2.0 * ns**-0.5 * np.log(ns) ** 0.5
    fit = fit_log_exponent(ns, d, 0.5)
    assert fit.alpha == pytest.approx(0.5, abs=1e-10)
    assert fit.c == pytest.approx(2.0)
    assert fit.residual < 1e-10


def test_fit_input_checks():
    with pytest.raises(InputError):
        fit_log_exponent([16, 32, 64], [1, 1, 1])
    with pytest.raises(InputError):
        fit_log_exponent([16, 20, 24, 28], [1, 1, 1, 1])
    with pytest.raises(InputError):
        fit_log_exponent([16, 32, 64, 128], [1, 1, 0, 1])


def test_small_sweep():
    res = sweep([1.0, math.inf], 4.0, [8, 4], m_rule=lambda n: 4, seed=0)
    assert [(r.theta, r.n) for r in res.rows] == [(1.0, 4), (1.0, 8), (math.inf, 4), (math.inf, 8)]
    assert all(r.lower <= r.upper for r in res.rows)
    assert all(r.wall_time_s is None for r in res.rows)
    assert len(res.rows[0].cells()) == len(SWEEP_COLUMNS)
    again = sweep([1.0, math.inf], 4.0, [4, 8], m_rule=lambda n: 4, seed=0)
    assert [r.cells() for r in again.rows] == [r.cells() for r in res.rows]
    ns, ratio = res.ratio()
    assert ns.tolist() == [4, 8] and np.all(ratio >= 1 - 1e-12)


def test_sweep_full_dimension_rows():
    res = sweep([1.0], 4.0, [16], m_rule=lambda n: 3, seed=0)
    assert res.rows[0].upper == 0.0


def test_summary_reports_fit_errors():
    res = sweep([1.0], 4.0, [4, 8], m_rule=lambda n: 4, seed=0)
    summary = summarize(res)
    assert "error" in summary["fits"]["theta=1"]


def test_level_shares_and_vertex_count():
    from widthlab.norms import nu_ratios

    prob = build_problem(math.inf, 4.0, 3)
    assert prob.body.vertex_count == 2 * 4 * 8
    assert np.allclose(nu_ratios(prob.weights, prob.levels), 1 / 3)


def test_tail_bound_identities():
    n = 8
    assert tail_truncation_bound(1.0, 4.0, int(4 * math.log2(n**2)), n) <= n**-2 * (1 + 1e-12)
    assert tail_truncation_bound(1.0, 4.0, 0, n) == 1.0
    assert tail_truncation_bound(1.0, 4.0, 10, n) == pytest.approx(tail_truncation_bound(1.0, 4.0, 5, n) ** 2)


def test_construction_full_space():
    prob = build_problem(1.0, 4.0, 3)
    sub = block_budget_construction(prob, 7, seed=0)
    assert sub.dim == 7
    assert ball_deviation_bound(prob, level_table(prob, sub)) == 0.0


def test_construction_doubling_ratio():
    # on b^0_{1,2}(T_8) the error of the construction should fall like (n/m)^(-1/2)
    prob = build_problem(2.0, 4.0, 8)
    vals = [ball_deviation_bound(prob, level_table(prob, block_budget_construction(prob, n, 0)))
            for n in (32, 64, 128)]
    per_doubling = math.sqrt(vals[2] / vals[0])
    assert 0.6 <= per_doubling <= 0.9  # 2^(-1/2) = 0.707; n^-1 would give 0.5


def test_fit_flat_series():
    ns = np.array([16, 32, 64, 128])
    assert fit_log_exponent(ns, ns**-0.5, 0.5).alpha == pytest.approx(0.0, abs=1e-10)


def test_zero_dimension_row():
    row = sweep([1.0], 4.0, [0], m_rule=lambda n: 3).rows[0]
    assert row.upper == pytest.approx(1.0)  # the largest vertex norm, level 0
    assert row.lower <= row.upper


def test_sweep_monotone_and_ball_inclusion():
    res = sweep([1.0, 2.0, math.inf], 4.0, [4, 8, 16, 32], m_rule=lambda n: 6, seed=0)
    ups = {th: res.series(th)[1] for th in (1.0, 2.0, math.inf)}
    for th in ups:
        assert np.all(np.diff(ups[th]) <= 1e-12)
    assert np.all(ups[1.0] <= ups[2.0] + 1e-12)
    assert np.all(ups[2.0] <= ups[math.inf] + 1e-12)
    # intermediate theta uses the embedding of b^0_{1,inf} into m^(1/theta) b^0_{1,theta}
    lows = {r.n: r.lower for r in res.rows if r.theta == 2.0}
    for n in lows:
        inf_cert = lower_certificate(build_problem(math.inf, 4.0, 6), n)
        assert lows[n] >= 6**-0.5 * inf_cert * (1 - 1e-12)
