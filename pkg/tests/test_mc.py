"""Monte Carlo engine: stream determinism, factorized sums, estimators."""

import itertools
import math

import numpy as np
import pytest
from scipy.stats import norm

from multisum import (AxisDistribution, DegenerateKernel, EmpiricalDist,
                      RngSpec, compute_S_L, empirical_moment, empirical_tail,
                      hermite_family, load_empirical, make_rect, naive_S_L,
                      sample_S_infty, save_empirical, simulate_S_L,
                      staircase_set)

GAUSS = [AxisDistribution("standard_normal")] * 2


def hermite_kernel(lam, d=2, orthonormal=True):
    return DegenerateKernel(d, lam, [hermite_family()] * d, orthonormal=orthonormal)


# ---------------------------------------------------------------------------
# determinism
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("workers", [1, 4, 16])
def test_worker_count_invariance(workers):
    k = hermite_kernel({(1, 1): 1.0, (2, 2): 0.5})
    base = simulate_S_L(k, make_rect([5, 7]), GAUSS, 3000, RngSpec(99), workers=1)
    split = simulate_S_L(k, make_rect([5, 7]), GAUSS, 3000, RngSpec(99), workers=workers)
    assert np.array_equal(base.values, split.values)


def test_single_replication_reproducible():
    k = hermite_kernel({(1, 1): 1.0})
    a = simulate_S_L(k, make_rect([3, 3]), GAUSS, 1, RngSpec(7))
    b = simulate_S_L(k, make_rect([3, 3]), GAUSS, 1, RngSpec(7))
    assert a.values[0] == b.values[0]
    c = simulate_S_L(k, make_rect([3, 3]), GAUSS, 1, RngSpec(8))
    assert a.values[0] != c.values[0]


def test_same_coordinates_same_variates_across_batch_sizes():
    rng = RngSpec(1234)
    small = rng.uniform_block(1, 0, rep_start=2, rep_count=3, ncols=5)
    big = rng.uniform_block(1, 0, rep_start=0, rep_count=10, ncols=5)
    assert np.array_equal(big[2:5], small)


def test_s_infty_worker_invariance():
    lam = {(1, 1): 0.6, (2, 1): 0.8}
    a = sample_S_infty(lam, 2, 2000, RngSpec(5), workers=1)
    b = sample_S_infty(lam, 2, 2000, RngSpec(5), workers=16)
    assert np.array_equal(a.values, b.values)


# ---------------------------------------------------------------------------
# factorized vs naive summation
# ---------------------------------------------------------------------------


def test_fast_path_equals_naive_on_random_instances():
    rng = np.random.default_rng(41)
    for trial in range(200):
        n1, n2 = int(rng.integers(1, 11)), int(rng.integers(1, 11))
        L = make_rect([n1, n2])
        keys = {(int(rng.integers(1, 4)), int(rng.integers(1, 4)))
                for _ in range(int(rng.integers(1, 4)))}
        lam = {k: float(rng.normal()) for k in keys}
        kernel = hermite_kernel(lam)
        samples = [rng.normal(size=n1), rng.normal(size=n2)]
        fast = compute_S_L(kernel, L, samples)
        slow = naive_S_L(kernel, L, samples)
        assert fast == pytest.approx(slow, rel=1e-12, abs=1e-12)


def test_single_cell_product():
    k = hermite_kernel({(1, 1): 1.0})
    val = compute_S_L(k, make_rect([1, 1]), [np.array([2.0]), np.array([3.0])])
    assert val == pytest.approx(6.0, rel=1e-14)


def test_zero_kernel_sums_to_zero():
    k = hermite_kernel({(1, 1): 0.0})
    L = staircase_set([3, 2])
    val = compute_S_L(k, L, [np.ones(2), np.ones(3)])
    assert val == 0.0


def test_samples_must_cover_the_set():
    k = hermite_kernel({(1, 1): 1.0})
    with pytest.raises(ValueError):
        compute_S_L(k, make_rect([4, 4]), [np.ones(3), np.ones(4)])


# ---------------------------------------------------------------------------
# exact variance identity
# ---------------------------------------------------------------------------


def enumerate_variance_rademacher(cells, lam):
    """Oracle: Var S_L for the sign kernel lam * x * y by full enumeration."""
    rows = sorted({i for i, _ in cells})
    cols = sorted({j for _, j in cells})
    total_sq = 0.0
    total = 0.0
    count = 0
    for eps in itertools.product((-1.0, 1.0), repeat=len(rows)):
        rv = dict(zip(rows, eps))
        for dl in itertools.product((-1.0, 1.0), repeat=len(cols)):
            cv = dict(zip(cols, dl))
            s = lam * sum(rv[i] * cv[j] for i, j in cells) / math.sqrt(len(cells))
            total += s
            total_sq += s * s
            count += 1
    mean = total / count
    return total_sq / count - mean * mean


@pytest.mark.parametrize("cells", [
    [(1, 1)],
    [(1, 1), (2, 2), (3, 3)],
    [(1, 1), (1, 2), (2, 1), (2, 2)],
    [(1, 1), (1, 2), (1, 3), (2, 1), (3, 1)],
    [(i, j) for i in range(1, 4) for j in range(1, 4)],
])
def test_exact_variance_by_enumeration(cells):
    lam = 0.75
    var = enumerate_variance_rademacher(cells, lam)
    assert var == pytest.approx(lam ** 2, rel=1e-12)


def test_variance_matches_weight_mass_mc():
    k = hermite_kernel({(1, 1): 0.8, (2, 2): 0.6})
    dist = simulate_S_L(k, staircase_set([4, 4, 2]), GAUSS, 20_000, RngSpec(3))
    assert abs(dist.variance() - k.sigma_sq) <= 3 * dist.variance_se()


# ---------------------------------------------------------------------------
# chaos limit sampler
# ---------------------------------------------------------------------------


def test_s_infty_unit_product_variance():
    dist = sample_S_infty({(1, 1): 1.0}, 2, 50_000, RngSpec(11))
    assert abs(dist.variance() - 1.0) <= 3 * dist.variance_se()


def test_s_infty_scaling_linearity():
    base = sample_S_infty({(1, 1): 1.0}, 2, 500, RngSpec(2))
    doubled = sample_S_infty({(1, 1): 2.0}, 2, 500, RngSpec(2))
    assert np.array_equal(doubled.values, 2.0 * base.values)


def test_s_infty_diagonal_variance():
    lam = {(1, 1): 0.5, (2, 2): 0.5, (3, 3): 0.5}
    sigma_sq = sum(w * w for w in lam.values())
    dist = sample_S_infty(lam, 2, 100_000, RngSpec(21))
    assert abs(dist.variance() - sigma_sq) <= 3 * dist.variance_se()


def test_product_normal_fourth_moment():
    k = hermite_kernel({(1, 1): 1.0})
    dist = simulate_S_L(k, make_rect([1, 1]), GAUSS, 100_000, RngSpec(31))
    est, se = empirical_moment(dist, 4.0)
    assert abs(est ** 4 - 9.0) <= 3 * (4 * est ** 3 * se)   # E xi^4 E eta^4 = 9


# ---------------------------------------------------------------------------
# estimators
# ---------------------------------------------------------------------------


def test_empirical_moment_constant_sample():
    d = EmpiricalDist(np.full(50, -2.5))
    est, se = empirical_moment(d, 3.0)
    assert est == pytest.approx(2.5, rel=1e-14)
    assert se == 0.0


def test_empirical_moment_symmetric_signs():
    d = EmpiricalDist(np.array([-1.0, 1.0] * 25))
    est, se = empirical_moment(d, 1.0)
    assert est == 1.0 and se == 0.0


def test_empirical_moment_standard_normal():
    rng = RngSpec(77)
    u = rng.uniform_block(1, 0, 0, 50_000, 1).ravel()
    vals = norm.ppf(u)
    d = EmpiricalDist(vals)
    est, se = empirical_moment(d, 2.0)
    assert abs(est - 1.0) <= 3 * se
    with pytest.raises(ValueError):
        empirical_moment(d, 0.5)


def test_empirical_tail_basics():
    d = EmpiricalDist(np.array([-2.0, -1.0, 0.5, 1.0, 3.0]))
    assert empirical_tail(d, 10.0) == 0.0
    assert empirical_tail(d, 0.0) == pytest.approx(3 / 5)   # max of the two halves
    assert empirical_tail(d, 1.0) == pytest.approx(2 / 5)
    with pytest.raises(ValueError):
        empirical_tail(d, -0.5)


def test_empirical_tail_standard_normal():
    rng = RngSpec(78)
    vals = norm.ppf(rng.uniform_block(1, 0, 0, 100_000, 1).ravel())
    d = EmpiricalDist(vals)
    p_true = float(norm.sf(2.0))
    se = math.sqrt(p_true * (1 - p_true) / d.n)
    assert abs(empirical_tail(d, 2.0) - p_true) <= 3 * se


# ---------------------------------------------------------------------------
# axis distributions
# ---------------------------------------------------------------------------


def test_log_weibull_tail_formula():
    lw = AxisDistribution("log_weibull", beta=1.0)
    vals = lw.transform(RngSpec(9).uniform_block(1, 0, 0, 200_000, 2)).ravel()
    for y in (0.5, 2.0, 5.0):
        p_true = math.exp(-math.log1p(y) ** 2)
        se = math.sqrt(p_true * (1 - p_true) / vals.size)
        assert abs(np.mean(np.abs(vals) >= y) - p_true) <= 4 * se
    assert abs(vals.mean()) < 0.02          # symmetric, hence centered


def test_compensated_poisson_pmf():
    d = AxisDistribution("compensated_poisson")
    vals = d.transform(RngSpec(10).uniform_block(1, 0, 0, 200_000, 1)).ravel()
    for k in (0, 1, 2, 5):
        p_true = math.exp(-1.0) / math.factorial(k)
        se = math.sqrt(p_true * (1 - p_true) / vals.size)
        assert abs(np.mean(vals == k - 1) - p_true) <= 4 * se


def test_centered_exponential_mean_zero():
    d = AxisDistribution("centered_exponential")
    vals = d.transform(RngSpec(12).uniform_block(1, 0, 0, 100_000, 1)).ravel()
    assert abs(vals.mean()) < 3 / math.sqrt(vals.size) + 0.01
    assert vals.min() >= -1.0


def test_unknown_axis_distribution_rejected():
    with pytest.raises(ValueError):
        AxisDistribution("uniform")
    with pytest.raises(ValueError):
        AxisDistribution("log_weibull")    # missing beta


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------


def test_save_load_round_trip(tmp_path):
    k = hermite_kernel({(1, 1): 1.0})
    dist = simulate_S_L(k, make_rect([2, 2]), GAUSS, 100, RngSpec(1))
    path = tmp_path / "dist.bin"
    save_empirical(dist, path)
    clone = load_empirical(path)
    assert np.array_equal(clone.values, dist.values)
    assert clone.provenance == dist.provenance


def test_provenance_distinguishes_inputs():
    k = hermite_kernel({(1, 1): 1.0})
    a = simulate_S_L(k, make_rect([2, 2]), GAUSS, 10, RngSpec(1))
    b = simulate_S_L(k, make_rect([2, 3]), GAUSS, 10, RngSpec(1))
    assert a.provenance != b.provenance
