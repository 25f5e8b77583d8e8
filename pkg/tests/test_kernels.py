"""Factor systems, degenerate kernels, spectral decomposition, rank truncation."""

import math

import numpy as np
import pytest
from scipy.integrate import dblquad

from multisum import (DegenerateKernel, TabulatedKernel, degenerate_approx,
                      eval_kernel, exponential_poly_family, hermite_family,
                      kernel_from_json, kernel_moment_curve, kernel_to_json,
                      poisson_charlier_family, quadrature_rule,
                      rademacher_family, spectral_decompose)


def gaussian_pair(lam, orthonormal=True):
    return DegenerateKernel(2, lam, [hermite_family(), hermite_family()],
                            orthonormal=orthonormal)


# ---------------------------------------------------------------------------
# factor families
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("family", [hermite_family(), poisson_charlier_family(),
                                    exponential_poly_family()])
def test_orthonormality_audit(family):
    x, w = quadrature_rule(family.canonical_base)
    block = family.evaluate_block(6, x)
    gram = (block * w) @ block.T
    assert np.abs(gram - np.eye(6)).max() < 1e-8
    assert np.abs(block @ w).max() < 1e-10      # centering


def test_rademacher_family_single_member():
    fam = rademacher_family()
    assert np.array_equal(fam.evaluate(1, np.array([-1.0, 1.0])), [-1.0, 1.0])
    with pytest.raises(ValueError):
        fam.evaluate(2, np.array([1.0]))
    assert fam.moment(1, 7.0) == 1.0


def test_hermite_second_member_value():
    fam = hermite_family()
    # (x^2 - 1)/sqrt(2) vanishes at 1
    assert fam.evaluate(2, np.array([1.0]))[0] == pytest.approx(0.0, abs=1e-14)
    assert fam.evaluate(2, np.array([2.0]))[0] == pytest.approx(3 / math.sqrt(2))


def test_factor_index_zero_rejected():
    with pytest.raises(ValueError):
        hermite_family().evaluate(0, np.array([1.0]))


# ---------------------------------------------------------------------------
# kernel evaluation
# ---------------------------------------------------------------------------


def test_eval_rank_one_product():
    k = gaussian_pair({(1, 1): 1.0})
    assert eval_kernel(k, [2.0, 3.0]) == pytest.approx(6.0, rel=1e-14)


def test_eval_zero_weights():
    k = gaussian_pair({(1, 1): 0.0, (2, 2): 0.0})
    assert eval_kernel(k, [0.3, -1.2]) == 0.0


def test_eval_hermite_diagonal_at_ones():
    k = gaussian_pair({(1, 1): 1.0, (2, 2): 0.5})
    assert eval_kernel(k, [1.0, 1.0]) == pytest.approx(1.0, rel=1e-14)


def test_eval_dimension_mismatch():
    k = gaussian_pair({(1, 1): 1.0})
    with pytest.raises(ValueError):
        eval_kernel(k, [1.0, 2.0, 3.0])


def test_variance_identity_under_orthonormality():
    k = gaussian_pair({(1, 1): 0.8, (2, 1): 0.36, (3, 2): 0.48})
    x, w = quadrature_rule("standard_normal")
    grid = np.array([[k.evaluate([a, b]) for b in x] for a in x])
    var = float((w[:, None] * w[None, :] * grid ** 2).sum())
    mean = float((w[:, None] * w[None, :] * grid).sum())
    assert abs(mean) < 1e-10
    assert var - mean ** 2 == pytest.approx(k.sigma_sq, abs=1e-8)


# ---------------------------------------------------------------------------
# moment curves
# ---------------------------------------------------------------------------


def test_moment_curve_product_normal():
    k = gaussian_pair({(1, 1): 1.0})
    curve = kernel_moment_curve(k, [2.0, 4.0])
    assert curve.values[0] == pytest.approx(1.0, rel=1e-10)
    # E xi^4 = 3 on each axis: |xy|_4 = 3 ** 0.5
    assert curve.values[1] == pytest.approx(math.sqrt(3.0), rel=1e-10)


def test_moment_curve_nondecreasing():
    k = gaussian_pair({(1, 1): 0.5, (2, 2): 0.5})
    curve = kernel_moment_curve(k, np.geomspace(1.5, 12, 9))
    assert np.all(np.diff(curve.values) >= -1e-12)


def test_moment_curve_monte_carlo_agrees():
    k = gaussian_pair({(1, 1): 1.0})
    mc = kernel_moment_curve(k, [2.0, 4.0], method="monte_carlo", n=40_000, seed=3)
    exact = kernel_moment_curve(k, [2.0, 4.0])
    assert mc.stderr is not None
    for est, se, ref in zip(mc.values, mc.stderr, exact.values):
        assert abs(est - ref) < 4 * se + 1e-9


def test_moment_curve_quadrature_oracle_dblquad():
    # independent 2-d quadrature of |xy|^3 against the bivariate normal;
    # odd powers are not polynomial, so the 64-node rule is approximate there
    k = gaussian_pair({(1, 1): 1.0})
    val, _ = dblquad(
        lambda y, x: abs(x * y) ** 3 * np.exp(-(x * x + y * y) / 2) / (2 * np.pi),
        -8, 8, -8, 8)
    assert k.moment(3.0) == pytest.approx(val ** (1 / 3), rel=2e-4)


# ---------------------------------------------------------------------------
# spectral decomposition
# ---------------------------------------------------------------------------


def legendre01(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1), 0.5 * w


def test_spectral_rank_one():
    def g(x):
        return x - 0.5
    def h(y):
        return y * y
    tk = TabulatedKernel.from_function(lambda x, y: g(x) * h(y), n=48)
    s, left, right = spectral_decompose(tk)
    x, w = legendre01(48)
    g2 = math.sqrt(float(np.sum(w * g(x) ** 2)))
    h2 = math.sqrt(float(np.sum(w * h(x) ** 2)))
    assert s[0] == pytest.approx(g2 * h2, rel=1e-10)
    assert np.all(s[1:] < s[0] * 1e-10)


def test_spectral_brownian_eigenvalues():
    tk = TabulatedKernel.from_function(lambda x, y: np.minimum(x, y), n=256)
    s, left, right = spectral_decompose(tk)
    exact = np.array([4 / (math.pi ** 2 * (2 * k - 1) ** 2) for k in range(1, 6)])
    assert np.allclose(s[:5], exact, rtol=0.01)
    # symmetric PSD kernel: left and right factors coincide up to sign
    for i in range(5):
        same = np.allclose(left[i], right[i], atol=1e-8)
        flip = np.allclose(left[i], -right[i], atol=1e-8)
        assert same or flip


def test_spectral_factors_orthonormal_under_weights():
    tk = TabulatedKernel.from_function(lambda x, y: np.minimum(x, y) + x * y, n=64)
    s, left, right = spectral_decompose(tk)
    top = left[:6]
    gram = (top * tk.x_weights) @ top.T
    assert np.abs(gram - np.eye(6)).max() < 1e-10


# ---------------------------------------------------------------------------
# rank truncation
# ---------------------------------------------------------------------------


def test_approx_full_rank_gives_zero_error():
    tk = TabulatedKernel.from_function(lambda x, y: np.outer if False else x * 0 + np.minimum(x, y), n=16)
    res = degenerate_approx(tk, 16, 2.0)
    assert res.q_m == 0.0
    assert "rank covers" in res.note


def test_approx_frobenius_and_trace_tails():
    tk = TabulatedKernel.from_function(lambda x, y: np.minimum(x, y), n=128)
    s, _, _ = spectral_decompose(tk)
    res = degenerate_approx(tk, 3, 2.0)
    assert res.q_m == pytest.approx(math.sqrt(float(np.sum(s[3:] ** 2))), rel=1e-10)
    assert res.trace_tail == pytest.approx(float(np.sum(s[3:])), rel=1e-10)
    assert not res.surrogate


def test_approx_trace_tail_brownian_closed_form():
    tk = TabulatedKernel.from_function(lambda x, y: np.minimum(x, y), n=256)
    res = degenerate_approx(tk, 1, 2.0)
    assert res.trace_tail == pytest.approx(0.5 - 4 / math.pi ** 2, rel=0.02)


def test_approx_monotone_and_surrogate_flag():
    tk = TabulatedKernel.from_function(lambda x, y: np.minimum(x, y) ** 2 + x * y, n=64)
    prev2, prev3 = math.inf, math.inf
    for m in range(1, 9):
        r2 = degenerate_approx(tk, m, 2.0)
        r3 = degenerate_approx(tk, m, 3.0)
        assert r2.q_m <= prev2 + 1e-12
        assert r3.q_m <= prev3 + 1e-12
        prev2, prev3 = r2.q_m, r3.q_m
    assert degenerate_approx(tk, 2, 3.0).surrogate
    assert not degenerate_approx(tk, 2, 2.0).surrogate


def test_eckart_young_optimality_against_perturbations():
    tk = TabulatedKernel.from_function(lambda x, y: np.minimum(x, y) + 0.3 * x * y, n=32)
    m = 2
    res = degenerate_approx(tk, m, 2.0)
    w2 = np.outer(tk.x_weights, tk.y_weights)
    grid = np.array([[res.z_m.evaluate([a, b]) for b in tk.y_nodes]
                     for a in tk.x_nodes])
    base_resid = math.sqrt(float((w2 * (tk.values - grid) ** 2).sum()))
    assert base_resid == pytest.approx(res.q_m, rel=1e-8)
    rng = np.random.default_rng(17)
    s, left, right = spectral_decompose(tk)
    recon = (left[:m].T * s[:m]) @ right[:m]
    for _ in range(100):
        # random rank-m competitor: perturbed truncation, same rank
        du = rng.normal(0, 0.05, size=(m, left.shape[1]))
        dv = rng.normal(0, 0.05, size=(m, right.shape[1]))
        cand = ((left[:m] + du).T * s[:m]) @ (right[:m] + dv)
        resid = math.sqrt(float((w2 * (tk.values - cand) ** 2).sum()))
        assert resid >= base_resid - 1e-12


def test_degenerate_kernel_truncation_route():
    k = gaussian_pair({(1, 1): 0.7, (2, 2): 0.2, (3, 3): 0.1})
    res = k.degenerate_approx(2, 2.0)
    assert set(res.z_m.lam) == {(1, 1), (2, 2)}
    # orthonormal residual: L2 error is the root of the discarded weight mass
    assert res.q_m == pytest.approx(0.1, rel=1e-9)
    assert res.trace_tail == pytest.approx(0.1, rel=1e-12)
    full = k.degenerate_approx(3, 2.0)
    assert full.q_m == 0.0


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def test_kernel_json_round_trip():
    k = gaussian_pair({(1, 2): 0.5, (2, 1): -0.25})
    clone = kernel_from_json(kernel_to_json(k))
    assert clone.lam == k.lam
    assert clone.orthonormal == k.orthonormal
    pt = [0.7, -1.1]
    assert eval_kernel(clone, pt) == pytest.approx(eval_kernel(k, pt), rel=1e-14)


def test_tabulated_kernel_factors_serialize():
    tk = TabulatedKernel.from_function(lambda x, y: np.minimum(x, y), n=24)
    res = degenerate_approx(tk, 2, 2.0)
    clone = kernel_from_json(kernel_to_json(res.z_m))
    pt = [float(tk.x_nodes[5]), float(tk.y_nodes[9])]
    assert eval_kernel(clone, pt) == pytest.approx(eval_kernel(res.z_m, pt), rel=1e-12)


def test_tabulated_kernel_csv_round_trip():
    from multisum.kernels import tabulated_kernel_from_csv, tabulated_kernel_to_csv
    tk = TabulatedKernel.from_function(lambda x, y: np.minimum(x, y) + x * y, n=12)
    grid_csv, weights_csv = tabulated_kernel_to_csv(tk)
    clone = tabulated_kernel_from_csv(grid_csv, weights_csv)
    assert np.array_equal(clone.values, tk.values)
    assert np.array_equal(clone.x_nodes, tk.x_nodes)
    assert np.array_equal(clone.y_weights, tk.y_weights)
    s1, _, _ = spectral_decompose(tk)
    s2, _, _ = spectral_decompose(clone)
    assert np.allclose(s1, s2, rtol=1e-14)
