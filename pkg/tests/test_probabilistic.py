import math

import numpy as np
import pytest
from scipy.stats import binom

from widthlab.norms import BlockPartition, InputError, MixedNorm, OctahedronProduct
from widthlab.probabilistic import (FAIL, INCONCLUSIVE, PASS, RegularityWindow, SamplingPlan,
                                    bernstein_tail, block_deviation_bounds, check_conditions,
                                    conditional_expectation_check, correlation_check, k_chain_check,
                                    mean_estimate, regularity_probability, sample_subset, wilson)
from widthlab.subspaces import Subspace


def test_wilson_reference_values():
    # textbook 95% Wilson interval for 50/100
    p = wilson(50, 100)
    assert p.lo == pytest.approx(0.40383, abs=1e-4)
    assert p.hi == pytest.approx(0.59617, abs=1e-4)
    assert wilson(0, 10).lo == 0.0


def test_mean_estimate():
    est = mean_estimate(np.array([1.0, 2.0, 3.0, 4.0]))
    assert est.value == 2.5
    assert est.se == pytest.approx(np.std([1, 2, 3, 4], ddof=1) / 2)


def test_conditions_uniform_four_blocks():
    part = BlockPartition.from_sizes([256] * 4)
    rep = check_conditions(np.ones(1024), part, 32)
    assert rep.condition1 and rep.condition2 and rep.few_blocks
    assert rep.weight_bound == pytest.approx(1024 / 128)
    assert rep.nu_bound == pytest.approx(math.log(8) / 32)


def test_conditions_fail_for_large_weights():
    part = BlockPartition.from_sizes([4, 4])
    rep = check_conditions(np.ones(8), part, 4)
    assert not rep.condition1
    assert rep.condition1_margin < 0


def test_plan_rejects_large_probabilities():
    with pytest.raises(InputError):
        SamplingPlan.from_weights(np.ones(8), 8)
    plan = SamplingPlan.from_weights(np.ones(64), 8)
    assert plan.omega == pytest.approx(16)
    assert plan.normalized_weights.sum() == pytest.approx(1)


def test_subset_size_mean():
    plan = SamplingPlan.from_weights(np.ones(8), 2)  # p_i = 1/2
    sizes = [sample_subset(plan, s).omega.size for s in range(4000)]
    assert np.mean(sizes) == pytest.approx(4.0, abs=0.1)


def test_subset_block_counts():
    part = BlockPartition.from_sizes([4, 4])
    plan = SamplingPlan.from_weights(np.ones(8), 2)
    s = sample_subset(plan, 3, part)
    assert s.counts.sum() == s.omega.size


def test_regularity_matches_binomial():
    # one block: |Omega| ~ Bin(1024, 1/16); window [48, 64]
    n, N = 32, 1024
    part = BlockPartition.from_sizes([N])
    plan = SamplingPlan.from_weights(np.ones(N), n)
    window = RegularityWindow.standard(n, [1.0], A=2.0)
    exact = binom.cdf(64, N, 2 * n / N) - binom.cdf(47, N, 2 * n / N)
    est = regularity_probability(plan, window, part, 20000, seed=0)
    assert est.lo <= exact <= est.hi
    assert 0.4 < exact < 0.7


def test_regularity_trial_floor():
    part = BlockPartition.from_sizes([8])
    plan = SamplingPlan.from_weights(np.ones(8), 1)
    with pytest.raises(InputError):
        regularity_probability(plan, RegularityWindow.unbounded(1), part, 10, 0)


def test_bernstein_tail():
    assert bernstein_tail(math.inf, 1.0, 1.0) == 0.0
    assert bernstein_tail(0.1, 1.0, 1.0) == 1.0
    assert bernstein_tail(10.0, 4.0, 1.0) == pytest.approx(2 * math.exp(-100 / (2 * (4 + 10 / 3))))


def test_block_bounds_dominate_simulation():
    part = BlockPartition.from_sizes([256] * 4)
    plan = SamplingPlan.from_weights(np.ones(1024), 32)
    bounds = block_deviation_bounds(plan, part)
    rng = np.random.default_rng(0)
    counts = rng.binomial(256, 1 / 16, size=20000)
    freq = np.mean(np.abs(counts - 16) > 4)
    assert np.all(bounds >= freq - 0.01)


def test_window_validation():
    with pytest.raises(InputError):
        RegularityWindow.standard(8, [0.5, 0.5], A=1.2)
    w = RegularityWindow.standard(8, [0.5, 0.5], A=4)
    assert w.contains(np.array([6, 16])) and not w.contains(np.array([5, 16]))


def test_correlation_rejection_path():
    part = BlockPartition.from_sizes([16, 16])
    plan = SamplingPlan.from_weights(np.ones(32), 4)
    window = RegularityWindow.standard(4, [0.5, 0.5], 4)
    rep = correlation_check(plan, part, window, 5000, seed=0)
    assert rep.method == "rejection"
    assert rep.flag == PASS
    assert all(b.flag == PASS for b in rep.per_block)


def test_correlation_factorized_path():
    part = BlockPartition.from_sizes([256] * 4)
    plan = SamplingPlan.from_weights(np.ones(1024), 32)
    window = RegularityWindow.standard(32, [0.25] * 4, 4)
    rep = correlation_check(plan, part, window, 2000, seed=1)
    assert rep.method == "factorized"
    assert rep.p_support_exact == pytest.approx((1 / 16) ** 4)
    assert rep.flag in (PASS, INCONCLUSIVE)


def test_correlation_rejects_two_indices_per_block():
    part = BlockPartition.from_sizes([4, 4])
    plan = SamplingPlan.from_weights(np.ones(8), 1)
    with pytest.raises(InputError):
        correlation_check(plan, part, RegularityWindow.unbounded(2), 100, 0, support=[0, 1])


def test_conditional_expectation_large_omega():
    plan = SamplingPlan.from_weights(np.ones(1024), 32)
    rep = conditional_expectation_check(plan, 1 / 3, 10000, seed=0)
    assert rep.omega == pytest.approx(64)
    assert rep.window == pytest.approx((64 * 2 / 3, 320))
    assert rep.empty_bound_holds
    assert rep.margin_ci[1] >= 0
    assert rep.flag == PASS


def test_conditional_expectation_needs_small_p():
    plan = SamplingPlan(np.full(4, 0.6), 1)
    with pytest.raises(InputError):
        conditional_expectation_check(plan)


def _small_problem(per_block):
    part = BlockPartition.from_sizes([16, 16])
    body = OctahedronProduct(part)
    w = np.full(32, 1 / 32)
    norm = MixedNorm.with_sup(4, w, 1.0)
    rng = np.random.default_rng(7)
    sub = Subspace.block_diagonal(32, [(b, rng.standard_normal((16, per_block))) for b in part.blocks])
    plan = SamplingPlan.from_weights(w, 4)
    window = RegularityWindow.standard(4, [0.5, 0.5], 4)
    return body, sub, norm, plan, window


def test_k_chain_block_identity():
    body, sub, norm, plan, window = _small_problem(12)
    rep = k_chain_check(body, sub, norm, plan, window, 4, 4000, seed=0, lower_samples=50)
    assert rep.path == "block"
    assert rep.identity_flag == PASS
    assert rep.K_mc.value == pytest.approx(rep.K_exact, rel=0.1)
    assert rep.lower_chain["flag"] in (PASS, INCONCLUSIVE)
    assert rep.upper_chain["flag"] != FAIL


def test_k_chain_general_path_matches_block_path():
    body, sub, norm, plan, window = _small_problem(12)
    block = k_chain_check(body, sub, norm, plan, window, 4, 4000, seed=0, lower_samples=10)
    assert block.precondition == "holds"
    dense = Subspace(sub.basis)  # same span, block structure forgotten
    gen = k_chain_check(body, dense, norm, plan, window, 4, 300, seed=0, d=block.deviation_bound,
                        vertex_samples=30)
    assert gen.path == "general"
    assert gen.identity_flag == PASS
    assert gen.K_direct == pytest.approx(block.K_exact, rel=0.35)


def test_k_chain_general_needs_deviation():
    body, sub, norm, plan, window = _small_problem(4)
    with pytest.raises(InputError):
        k_chain_check(body, Subspace(sub.basis), norm, plan, window, 4, 100, 0)
