import itertools
from fractions import Fraction

import pytest

from extauction import Partition3, benchmark_bruteforce, check_conditions
from extauction.experiments import (
    binomial_low_tail,
    chernoff_tail_check,
    derive_seed,
    f2_gap_demo,
    gen_instance,
    losing_value_demo,
    mechanism2_bound_check,
    monte_carlo_expectation,
    partition_min_expectation,
    quarter_bound_check,
    quarter_bound_exhaustive,
    ratio_campaign,
    revenue_guarantee_suite,
    standard_suite,
    two_agent_gap_instance,
)
from extauction.mechanisms import main_mechanism_exact_expectation
from extauction.valuations import AdditiveModel, DegreeWeight, ValuationProfile

from conftest import size_scalar_profile


# --- instance generation -----------------------------------------------------

def test_gen_instance_graph_concave_valid():
    profile = gen_instance("graph_concave", 6, seed=7, graph="er", graph_p=0.5)
    assert profile.n == 6
    assert check_conditions(profile) == []


def test_gen_instance_table_valid():
    assert check_conditions(gen_instance("table", 3, seed=1)) == []


def test_gen_instance_rejects_empty_market():
    with pytest.raises(ValueError):
        gen_instance("additive", 0)


def test_gen_instance_deterministic():
    a = gen_instance("mixed", 5, seed=42, graph="pa")
    b = gen_instance("mixed", 5, seed=42, graph="pa")
    for i in range(5):
        for s in range(32):
            assert a.value(i, s) == b.value(i, s)


# --- exact partition statistics ------------------------------------------------

def test_partition_min_expectation_m3():
    # 27 assignments; min >= 1 only on the six (1,1,1) permutations
    assert partition_min_expectation(3) == Fraction(2, 9)


def test_partition_min_expectation_m1():
    assert partition_min_expectation(1) == 0


def test_partition_min_expectation_brute_force_check():
    for m in (2, 3, 4, 5):
        total = 0
        for labels in itertools.product(range(3), repeat=m):
            counts = [labels.count(b) for b in range(3)]
            total += min(counts)
        assert partition_min_expectation(m) == Fraction(total, 3**m)


def test_partition_min_expectation_bound_and_minimum():
    base = Fraction(partition_min_expectation(3), 3)
    assert base == Fraction(2, 27)
    for m in range(3, 201):
        value = partition_min_expectation(m)
        assert value >= Fraction(2 * m, 27)
        if m > 3:
            assert Fraction(value, m) > base


def test_chernoff_tail_values():
    assert chernoff_tail_check(1) == Fraction(2, 3)
    # m = 17: Pr(a <= 1) = (2^17 + 17 * 2^16) / 3^17
    assert chernoff_tail_check(17) == Fraction(19 * 2**16, 3**17)
    assert chernoff_tail_check(17) < Fraction(1, 9)


def test_chernoff_tail_bound_through_200():
    for m in range(17, 201):
        assert chernoff_tail_check(m) < Fraction(1, 9)


def test_binomial_low_tail_sums_to_one():
    assert binomial_low_tail(9, 9) == 1


# --- quarter bound ---------------------------------------------------------------

def test_quarter_bound_all_in_c():
    profile = size_scalar_profile(3)
    res = quarter_bound_check(profile, Partition3(a=0, b=0, c=0b111))
    assert res.status == "pass"
    assert res.r_f_c == pytest.approx(9.0)
    assert res.r_c == pytest.approx(9.0)


def test_quarter_bound_trivial_when_c_misses_optimum():
    profile = size_scalar_profile(3)
    res = quarter_bound_check(profile, Partition3(a=0b111, b=0, c=0))
    assert res.status == "pass" and res.r_f_c == 0.0


def test_quarter_bound_skips_zero_benchmark():
    profile = two_agent_gap_instance(5.0)  # n = 2: no 3-winner benchmark
    res = quarter_bound_check(profile, Partition3(a=0b01, b=0b10, c=0))
    assert res.status == "skip"


def test_quarter_bound_exhaustive_on_random_instances():
    for seed, n in [(0, 4), (1, 5), (2, 6)]:
        profile = gen_instance("mixed", n, seed=seed)
        checked, skipped, failures = quarter_bound_exhaustive(profile)
        assert checked == 3**n
        assert failures == []


# --- revenue guarantee skeleton ----------------------------------------------------

def test_revenue_guarantee_suite_small():
    instances = [(f"i{k}", gen_instance("mixed", 3 + k % 3, seed=k)) for k in range(6)]
    report = revenue_guarantee_suite(instances)
    assert report.summary["violations"] == 0
    assert len(report.rows) == 6
    for row in report.as_dicts():
        assert row["bound_ok"]
        assert row["f1"] >= row["f2"] >= row["f3"]


def test_standard_suite_composition():
    suite = standard_suite(total=40)
    assert len(suite) == 40
    sizes = {profile.n for _, profile in suite}
    assert sizes == set(range(3, 10))


# --- additive decomposition ---------------------------------------------------------

def _additive(ws, ts, scale=0.0):
    return ValuationProfile(
        [AdditiveModel(t=t, weight=DegreeWeight(base=w, scale=scale)) for w, t in zip(ws, ts)]
    )


def test_mechanism2_bound_no_externality():
    check = mechanism2_bound_check(_additive([0.0, 0.0, 0.0], [5.0, 3.0, 3.0]))
    assert check.passed
    assert check.f2 == pytest.approx(check.f2_classical)
    assert check.mixture_ok


def test_mechanism2_bound_pure_externality():
    check = mechanism2_bound_check(_additive([4.0, 4.0], [0.0, 0.0]))
    assert check.passed
    assert check.f2_classical == 0.0
    assert check.f2 == pytest.approx(8.0)
    assert check.mixture_ok


def test_mechanism2_bound_random_additive():
    for seed in range(15):
        profile = gen_instance("additive", 3 + seed % 5, seed=seed)
        check = mechanism2_bound_check(profile)
        assert check.passed and check.mixture_ok


# --- demos ----------------------------------------------------------------------------

def test_f2_gap_demo_ratios_grow():
    report = f2_gap_demo([1.0, 10.0, 100.0, 1000.0])
    rows = report.as_dicts()
    assert rows[0]["f2"] == pytest.approx(2.0)
    ratios = [r["ratio_vs_f2"] for r in rows]
    assert ratios == sorted(ratios)
    for r in rows[1:]:
        assert r["ratio_vs_f2"] > r["m_factor"] / 10
        assert r["f3"] == 0.0  # the 3-winner guarantee is untouched


def test_losing_value_demo():
    demo = losing_value_demo()
    assert demo["invalid_rejected"]
    assert any("nonzero_outside" in v for v in demo["invalid_violations"])
    assert demo["truncated_violations"] == []


# --- campaigns --------------------------------------------------------------------------

def test_ratio_campaign_empty_when_no_trials():
    report = ratio_campaign([("a", size_scalar_profile(3))], trials=0)
    assert report.rows == []


def test_ratio_campaign_deterministic_and_within_budget():
    instances = [(f"g{k}", gen_instance("graph_concave", 12, seed=k, graph="er")) for k in range(3)]
    a = ratio_campaign(instances, trials=40, seed=5)
    b = ratio_campaign(instances, trials=40, seed=5)
    assert a.rows == b.rows
    assert a.summary["within_query_budget"]


def test_monte_carlo_agrees_with_exact_expectation():
    profile = gen_instance("mixed", 5, seed=13)
    exact = main_mechanism_exact_expectation(profile)
    mean, err = monte_carlo_expectation(profile, trials=10_000, seed=99)
    assert abs(mean - exact) <= max(3 * err, 1e-9)


def test_derive_seed_is_stable_and_distinct():
    assert derive_seed("a", 1) == derive_seed("a", 1)
    assert derive_seed("a", 1) != derive_seed("a", 2)
    assert 0 <= derive_seed("x") < 2**64


def test_partition_stats_sum_to_optimum_size():
    from extauction.experiments import partition_stats

    profile = size_scalar_profile(5)
    optimum = benchmark_bruteforce(profile, 3)
    for seed in range(5):
        import random as _r

        part = Partition3.sample(5, _r.Random(seed))
        stats = partition_stats(optimum, part)
        assert stats.k1 + stats.k2 + stats.k3 == stats.m == 5


def test_monte_carlo_tracks_exact_on_several_instances():
    for seed, n in [(21, 4), (22, 6), (23, 7)]:
        profile = gen_instance("mixed", n, seed=seed)
        exact = main_mechanism_exact_expectation(profile)
        mean, err = monte_carlo_expectation(profile, trials=10_000, seed=seed)
        assert abs(mean - exact) <= max(3 * err, 1e-9)


def test_ratio_campaign_scales_past_exact_range():
    # n = 30 monte-carlo: sweep benchmark still exact, budget still honored
    instances = [("big", gen_instance("graph_concave", 30, seed=4, graph="er", graph_p=0.2))]
    report = ratio_campaign(instances, trials=200, seed=1)
    row = report.as_dicts()[0]
    assert row["n"] == 30
    assert row["f3"] > 0
    assert row["max_queries"] <= row["budget"]
    assert report.summary["within_query_budget"]
