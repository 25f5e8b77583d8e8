"""Limit-law verification: KS pipeline, moment sandwich, tail domination."""

import math

import numpy as np
import pytest
from scipy.stats import ks_2samp

from multisum import (AxisDistribution, DegenerateKernel, EmpiricalDist,
                      RngSpec, hermite_family, ks_critical, ks_distance,
                      lshape_family, make_rect, natural_composite,
                      poisson_charlier_family, rademacher_family,
                      sample_S_infty, simulate_S_L, squares_family,
                      squares_minus_corner_family, staircase_set,
                      verify_irregular_nclt, verify_moment_sandwich,
                      verify_rect_nclt, verify_tail_domination)

GAUSS2 = [AxisDistribution("standard_normal")] * 2


def gauss_rank1(d=2):
    return DegenerateKernel(d, {tuple([1] * d): 1.0}, [hermite_family()] * d,
                            orthonormal=True)


# ---------------------------------------------------------------------------
# KS distance
# ---------------------------------------------------------------------------


def test_ks_identical_and_disjoint():
    a = EmpiricalDist(np.arange(10.0))
    assert ks_distance(a, a) == 0.0
    b = EmpiricalDist(np.arange(20.0, 30.0))
    assert ks_distance(a, b) == 1.0


def test_ks_symmetry_and_scipy_oracle():
    rng = np.random.default_rng(3)
    a = EmpiricalDist(rng.normal(size=400))
    b = EmpiricalDist(rng.normal(0.3, 1.2, size=700))
    d1 = ks_distance(a, b)
    assert d1 == ks_distance(b, a)
    assert d1 == pytest.approx(ks_2samp(a.values, b.values).statistic, abs=1e-12)


def test_ks_two_normal_batches_small():
    # distribution-free critical value: 1.63 * sqrt(2/N) at the 99 percent level
    n = 100_000
    a = sample_S_infty({(1,): 1.0}, 1, n, RngSpec(5))
    b = sample_S_infty({(1,): 1.0}, 1, n, RngSpec(6))
    assert ks_distance(a, b) <= 0.012
    assert ks_critical(n, n) == pytest.approx(1.628 * math.sqrt(2 / n), rel=1e-3)


# ---------------------------------------------------------------------------
# rectangular limit checks
# ---------------------------------------------------------------------------


def test_rect_nclt_gaussian_rank1_passes():
    report = verify_rect_nclt(gauss_rank1(), GAUSS2, [4, 16], 5000, RngSpec(42),
                              limit_n=20_000)
    assert report.verdict == "pass"
    assert report.stages[-1]["ks"] <= 0.05
    assert all(row["kappa_minus"] == 0 for row in report.stages)


def test_rect_nclt_requires_orthonormal_and_nondegenerate():
    k = DegenerateKernel(2, {(1, 1): 1.0}, [hermite_family()] * 2, orthonormal=False)
    with pytest.raises(ValueError):
        verify_rect_nclt(k, GAUSS2, [4], 100, RngSpec(1))
    k0 = DegenerateKernel(2, {(1, 1): 0.0}, [hermite_family()] * 2, orthonormal=True)
    with pytest.raises(ValueError):
        verify_rect_nclt(k0, GAUSS2, [4], 100, RngSpec(1))


def test_rademacher_single_cell_far_from_chaos_limit():
    k = DegenerateKernel(2, {(1, 1): 1.0}, [rademacher_family()] * 2,
                         orthonormal=True)
    dists = [AxisDistribution("rademacher")] * 2
    report = verify_rect_nclt(k, dists, [1], 5000, RngSpec(9), limit_n=20_000)
    # a four-point law against a continuous one: KS stays large
    assert report.stages[0]["ks"] > 0.1
    assert report.verdict == "fail"


def test_d1_reduction_is_classical_clt():
    k = gauss_rank1(d=1)
    dists = [AxisDistribution("standard_normal")]
    report = verify_rect_nclt(k, dists, [2, 8], 5000, RngSpec(17), limit_n=20_000)
    # each stage is exactly standard normal, so only noise remains
    assert report.verdict == "pass"
    for row in report.stages:
        assert row["ks"] <= 3 * ks_critical(5000, 20_000)


# ---------------------------------------------------------------------------
# irregular-domain checks
# ---------------------------------------------------------------------------


def test_irregular_squares_minus_corner_passes():
    fam = squares_minus_corner_family([6, 12, 24])
    report = verify_irregular_nclt(gauss_rank1(), GAUSS2, fam, 5000, RngSpec(23),
                                   limit_n=20_000)
    assert report.hypotheses_met
    assert report.verdict == "pass"


def test_irregular_lshape_flagged():
    fam = lshape_family([6, 12, 24], fraction=0.5)
    report = verify_irregular_nclt(gauss_rank1(), GAUSS2, fam, 2000, RngSpec(29),
                                   limit_n=10_000)
    assert report.verdict == "hypotheses not met"
    assert not report.hypotheses_met
    assert len(report.stages) == 3        # KS still reported


def test_irregular_rect_family_matches_rect_verifier():
    rects = squares_family([4, 16])
    r1 = verify_irregular_nclt(gauss_rank1(), GAUSS2, rects, 4000, RngSpec(31),
                               limit_n=20_000)
    r2 = verify_rect_nclt(gauss_rank1(), GAUSS2, [4, 16], 4000, RngSpec(31),
                          limit_n=20_000)
    assert r1.verdict == r2.verdict == "pass"


def test_report_csv_layout():
    report = verify_rect_nclt(gauss_rank1(), GAUSS2, [4], 500, RngSpec(1),
                              limit_n=2000)
    lines = report.to_csv().strip().split("\n")
    assert lines[0] == "stage,L_size,kappa_minus,kappa_plus,ks,verdict"
    assert lines[1].startswith("0,16,")


# ---------------------------------------------------------------------------
# moment sandwich
# ---------------------------------------------------------------------------


def test_sandwich_single_cell_product():
    report = verify_moment_sandwich(gauss_rank1(), GAUSS2, [make_rect([1, 1])],
                                    [2.0, 3.0, 4.0], 40_000, RngSpec(37))
    assert report.passed
    for p, lo, emp, se in zip(report.p_grid, report.lower, report.empirical,
                              report.empirical_se):
        assert abs(emp - lo) <= 3 * se    # independence product, exact at |L| = 1


def test_sandwich_p2_orthonormal_all_one():
    sets = [make_rect([1, 1]), make_rect([4, 4]), staircase_set([3, 3, 2])]
    report = verify_moment_sandwich(gauss_rank1(), GAUSS2, sets, [2.0],
                                    30_000, RngSpec(41))
    assert report.lower[0] == pytest.approx(1.0, rel=1e-10)
    assert report.upper[0] == pytest.approx(1.0, rel=1e-10)
    assert abs(report.empirical[0] - 1.0) <= 3 * report.empirical_se[0]
    assert report.passed


def test_sandwich_rejects_higher_rank():
    k = DegenerateKernel(2, {(1, 1): 0.5, (2, 2): 0.5}, [hermite_family()] * 2,
                         orthonormal=True)
    with pytest.raises(ValueError):
        verify_moment_sandwich(k, GAUSS2, [make_rect([1, 1])], [2.0], 100,
                               RngSpec(1))


def test_sandwich_poisson_shape():
    # rank-one compensated Poisson product: the p / ln p power shape describes
    # both envelopes on [4, 16] within 10 percent pointwise (free log-log fit);
    # the fitted exponent itself only settles to d once p is large
    k = DegenerateKernel(2, {(1, 1): 1.0}, [poisson_charlier_family()] * 2,
                         orthonormal=True)
    dists = [AxisDistribution("compensated_poisson")] * 2
    p_grid = [4.0, 6.0, 8.0, 12.0, 16.0]
    report = verify_moment_sandwich(k, dists, [make_rect([1, 1])], p_grid,
                                    50_000, RngSpec(43))
    shape = np.log(np.asarray(p_grid) / np.log(p_grid))
    for vals in (report.lower, report.upper):
        coef = np.polyfit(shape, np.log(vals), 1)
        fit = np.exp(np.polyval(coef, shape))
        assert np.max(np.abs(fit / np.asarray(vals) - 1.0)) <= 0.10
    # asymptotic exponent oracle: quadrature moments far out approach d = 2
    fam = poisson_charlier_family()
    p_far = np.geomspace(8.0, 256.0, 9)
    lower_far = np.array([fam.moment(1, p) for p in p_far]) ** 2
    slope_far = np.polyfit(np.log(p_far / np.log(p_far)), np.log(lower_far), 1)[0]
    assert slope_far == pytest.approx(2.0, rel=0.10)


# ---------------------------------------------------------------------------
# tail domination
# ---------------------------------------------------------------------------


def test_tail_domination_gaussian_rank1():
    kernel = gauss_rank1()
    composite = natural_composite(kernel, GAUSS2, np.geomspace(2, 64, 25))
    sets = [make_rect([1, 1]), make_rect([4, 4]), staircase_set([4, 3, 2])]
    report = verify_tail_domination(kernel, GAUSS2, sets, composite,
                                    30_000, RngSpec(47))
    assert report.dominated
    assert report.min_margin >= 1.0


def test_tail_bound_trivial_below_threshold():
    from multisum import TailBound, tail_bound_eval, power_log
    tb = TailBound(1.0, power_log(2, 0))
    assert tail_bound_eval(tb, 1.0) == 1.0   # below e * norm: dominates anything


def test_tail_domination_log_weibull_two_sided():
    # identity factors under symmetric log-Weibull axes; the composite bound
    # keeps the ln(1+y)^(1+1/beta) shape and must dominate, while the single
    # cell's own tail has the same shape from below (two-sided envelope)
    beta = 1.0
    kernel = DegenerateKernel(2, {(1, 1): 1.0}, [hermite_family()] * 2)
    dists = [AxisDistribution("log_weibull", beta=beta)] * 2
    composite = natural_composite(kernel, dists, np.geomspace(2, 24, 17))
    sets = [make_rect([1, 1]), make_rect([3, 3])]
    report = verify_tail_domination(kernel, dists, sets, composite,
                                    30_000, RngSpec(53))
    assert report.dominated
    # lower envelope at |L| = 1: the empirical tail must cross above
    # exp(-C6 ln(1+y)^(1+1/beta)) for a large C6 somewhere on the grid
    sim = EmpiricalDist(np.abs(
        dists[0].transform(RngSpec(53).uniform_block(1, 0, 0, 30_000, 2))[:, 0] *
        dists[1].transform(RngSpec(53).uniform_block(1, 1, 0, 30_000, 2))[:, 0]))
    c6 = 8.0
    crossed = False
    for y in np.geomspace(3.0, 50.0, 12):
        emp = float(np.mean(sim.values >= y))
        if emp >= math.exp(-c6 * math.log1p(y) ** (1 + 1 / beta)) and emp >= 1e-3:
            crossed = True
    assert crossed


def test_natural_composite_requires_p_at_least_two():
    with pytest.raises(ValueError):
        natural_composite(gauss_rank1(), GAUSS2, [1.5, 2.0, 4.0])


# ---------------------------------------------------------------------------
# cross-cutting invariants
# ---------------------------------------------------------------------------


def test_scale_equivariance_of_sums_and_ks():
    base_k = gauss_rank1()
    scaled_k = DegenerateKernel(2, {(1, 1): 2.0}, [hermite_family()] * 2,
                                orthonormal=True)
    L = make_rect([5, 5])
    a = simulate_S_L(base_k, L, GAUSS2, 2000, RngSpec(83))
    b = simulate_S_L(scaled_k, L, GAUSS2, 2000, RngSpec(83))
    assert np.array_equal(b.values, 2.0 * a.values)
    lim_a = sample_S_infty(base_k.lam, 2, 2000, RngSpec(84))
    lim_b = sample_S_infty(scaled_k.lam, 2, 2000, RngSpec(84))
    assert np.array_equal(lim_b.values, 2.0 * lim_a.values)
    # both sides scale together: the KS statistic is unchanged
    assert ks_distance(a, lim_a) == pytest.approx(ks_distance(b, lim_b), abs=1e-15)


def test_domination_chain_empirical_w_trivial():
    from multisum import empirical_moment, theorem_W_bound, trivial_bound
    kernel = gauss_rank1()
    L = make_rect([10, 10])
    p = 4.0
    dist = simulate_S_L(kernel, L, GAUSS2, 30_000, RngSpec(89))
    emp, se = empirical_moment(dist, p)
    w_rep = theorem_W_bound(kernel, p, L_size=L.size, M_max=4)
    triv = trivial_bound(kernel.moment(p), p, L.size)
    assert emp <= w_rep.bound_value + 3 * se
    assert w_rep.bound_value <= triv + 1e-12


def test_variances_agree_between_sum_and_limit():
    kernel = DegenerateKernel(2, {(1, 1): 0.6, (2, 2): 0.8},
                              [hermite_family()] * 2, orthonormal=True)
    sim = simulate_S_L(kernel, make_rect([16, 16]), GAUSS2, 30_000, RngSpec(97))
    lim = sample_S_infty(kernel.lam, 2, 30_000, RngSpec(98))
    tol = 3 * (sim.variance_se() + lim.variance_se())
    assert abs(sim.variance() - lim.variance()) <= tol


def test_sandwich_ratio_band_proposition_91():
    # the empirical-over-lower ratio lives in [1 - noise, K(p)^d]
    from multisum import rosenthal_K
    sets = [make_rect([1, 1]), make_rect([3, 3]), make_rect([7, 2])]
    report = verify_moment_sandwich(gauss_rank1(), GAUSS2, sets, [2.0, 4.0],
                                    40_000, RngSpec(101))
    lo_ratio, _ = report.ratios()
    for p, r in zip(report.p_grid, lo_ratio):
        assert r <= rosenthal_K(p) ** 2 + 0.05
        assert r >= 1.0 - 0.05
