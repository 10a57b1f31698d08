import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from archmx.core import ArchMxSpec, CovariatePanel
from archmx.dgp import CovariateLaw, sample_covariates, simulate_arch_mx
from archmx.errors import (
    DimensionMismatch,
    DimensionTooHigh,
    SingularNormalEquations,
    ZeroRowSum,
)
from archmx.estimate import (
    KernelConfig,
    KernelSurface,
    SplineConfig,
    fit_bspline_qmle,
    fit_partially_linear,
    kernel_weight_matrix,
    kernel_weights,
    predict_m,
    profile_least_squares,
    select_bandwidth,
    smooth,
)
from archmx.estimate.spline import basis_matrix, knot_vector, qmle_objective

LAW1 = CovariateLaw(1)


def quad_m(x):
    return 0.2 + 0.5 * (np.atleast_2d(x)[:, 0] - 2.5) ** 2


def draw(n, seed, m=quad_m, alpha=(0.3,), law=LAW1):
    cov_seed, sim_seed = np.random.SeedSequence(seed).spawn(2)
    panel = sample_covariates(law, n, cov_seed)
    return simulate_arch_mx(ArchMxSpec(alpha, m), panel, sim_seed, law=law), panel


# -- kernel weights ----------------------------------------------------------


def test_weights_three_points_oracle():
    # exp(-d**2 / 2) normalised by hand for x = (0, 1, 2), h = 1
    expected = np.array(
        [
            [0.5740969929676946, 0.3482074278837349, 0.07769557914857059],
            [0.274068619061197, 0.45186276187760605, 0.274068619061197],
            [0.07769557914857059, 0.3482074278837349, 0.5740969929676946],
        ]
    )
    np.testing.assert_allclose(kernel_weights(np.array([0.0, 1.0, 2.0]), 1.0), expected, rtol=1e-14)


def test_weights_single_row_and_flat_limit():
    np.testing.assert_array_equal(kernel_weights(np.array([[3.0]]), 0.5), [[1.0]])
    x = np.random.default_rng(0).standard_normal((7, 2))
    np.testing.assert_allclose(kernel_weights(x, 1e8), np.full((7, 7), 1 / 7), atol=1e-12)


def test_weight_matrix_from_panel_excludes_column():
    rng = np.random.default_rng(1)
    panel = CovariatePanel(rng.standard_normal((40, 3)))
    cfg = KernelConfig((0.5, 0.7, 0.9))
    w = kernel_weight_matrix(panel, cfg.drop(1), p=2, exclude=1)
    assert w.shape == (38, 38)
    x = panel.matrix[1:39][:, [0, 2]]
    np.testing.assert_allclose(w, kernel_weights(x, [0.5, 0.9]))


@given(
    arrays(np.float64, st.tuples(st.integers(1, 25), st.integers(1, 3)), elements=st.floats(-50, 50)),
    st.floats(0.05, 20.0),
    st.sampled_from(["gaussian", "epanechnikov"]),
)
def test_rows_sum_to_one(x, h, kernel):
    try:
        w = kernel_weights(x, h, kernel)
    except ZeroRowSum:
        return
    np.testing.assert_allclose(w.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(w >= 0)


@given(
    arrays(np.float64, st.tuples(st.integers(1, 30), st.integers(1, 3)), elements=st.floats(-5, 5)),
    st.floats(0.2, 5.0),
    st.sampled_from(["gaussian", "epanechnikov"]),
)
def test_compiled_smoother_matches_dense(x, h, kernel):
    y = np.cos(np.arange(x.shape[0] * 2.0)).reshape(-1, 2)
    np.testing.assert_allclose(smooth(x, y, h, kernel), kernel_weights(x, h, kernel) @ y, rtol=1e-10, atol=1e-12)


def test_cross_evaluation_matches_direct_formula():
    rng = np.random.default_rng(2)
    x, y, pts = rng.standard_normal((50, 2)), rng.standard_normal(50), rng.standard_normal((4, 2))
    h = np.array([0.4, 0.8])
    k = np.exp(-0.5 * (((pts[:, None, :] - x[None]) / h) ** 2).sum(axis=2))
    np.testing.assert_allclose(smooth(x, y, h, x_eval=pts), k @ y / k.sum(axis=1), rtol=1e-12)


def test_zero_row_sum():
    x = np.array([[0.0], [10.0]])
    with pytest.raises(ZeroRowSum):
        smooth(x, np.ones(2), 0.5, "epanechnikov", x_eval=np.array([[5.0]]))


def test_kernel_config_validation():
    with pytest.raises(ValueError):
        KernelConfig((0.0,))
    with pytest.raises(ValueError):
        KernelConfig((1.0,), "box")
    assert KernelConfig((1.0, 2.0, 3.0)).drop(1).bandwidth == (1.0, 3.0)


# -- bandwidth rule ------------------------------------------------------------


def test_rule_of_thumb_value():
    # p = 1 drops the last row, so the 1000 aligned rows are scaled to unit sd
    x = np.random.default_rng(3).standard_normal(1000)
    panel = CovariatePanel(np.append((x - x.mean()) / x.std(ddof=1), 0.0))
    assert select_bandwidth(panel, p=1).bandwidth[0] == pytest.approx(0.2662599617400155, rel=1e-12)


def test_rule_of_thumb_scales_with_sd():
    x = np.random.default_rng(4).standard_normal((300, 2))
    h1 = select_bandwidth(CovariatePanel(x)).bandwidth
    h2 = select_bandwidth(CovariatePanel(2 * x)).bandwidth
    np.testing.assert_allclose(h2, 2 * np.asarray(h1), rtol=1e-12)


# -- partially linear fit ----------------------------------------------------------


def test_constant_squares_are_singular():
    y = np.tile([1.0, -1.0], 50)
    x = np.random.default_rng(5).standard_normal(100)
    with pytest.raises(SingularNormalEquations):
        fit_partially_linear(y, x, 1)


def test_normal_equations_residual():
    y, panel = draw(800, 6)
    fit = fit_partially_linear(y, panel, 1)
    e2 = y.squared
    resp, lag = e2[1:], e2[:-1, None]
    w = kernel_weights(panel.matrix[:-1], fit.bandwidth)
    xt, yt = lag - w @ lag, resp - w @ resp
    lhs = xt.T @ xt @ fit.alpha_hat
    assert np.linalg.norm(lhs - xt.T @ yt) <= 1e-8 * np.linalg.norm(xt.T @ yt)
    # residual definition
    np.testing.assert_allclose(fit.residuals, resp - fit.alpha_hat[0] * lag[:, 0] - w @ (resp - fit.alpha_hat[0] * lag[:, 0]))


def test_shift_equivariance():
    y, panel = draw(600, 7)
    resp, lags = y.squared[1:], y.squared[:-1, None]
    x = panel.matrix[:-1]
    a1, m1, _, _ = profile_least_squares(resp, lags, x, 0.4)
    a2, m2, _, _ = profile_least_squares(resp + 3.25, lags, x, 0.4)
    np.testing.assert_allclose(a2, a1, rtol=1e-10)
    np.testing.assert_allclose(m2, m1 + 3.25, rtol=1e-10)


def test_flat_kernel_limit_is_ols():
    y, panel = draw(700, 8)
    e2 = y.squared
    resp, lag = e2[1:], e2[:-1]
    fit = fit_partially_linear(y, panel, 1, KernelConfig((1e6,)))
    # OLS slope of eps**2 on its lag with an intercept
    lc = lag - lag.mean()
    slope = lc @ (resp - resp.mean()) / (lc @ lc)
    assert fit.alpha_hat[0] == pytest.approx(slope, abs=1e-6)


def test_negative_alpha_clamped():
    rng = np.random.default_rng(9)
    lag = rng.exponential(size=(400, 1))
    resp = 2.0 - 0.5 * lag[:, 0] + 0.01 * rng.standard_normal(400)
    with pytest.warns(RuntimeWarning, match="clamped"):
        alpha, *_ = profile_least_squares(resp, lag, rng.standard_normal(400), 0.5)
    assert alpha[0] == 0.0


def test_excluded_fit_matches_reduced_panel():
    rng = np.random.default_rng(10)
    y, panel1 = draw(500, 11)
    extra = rng.standard_normal(500)
    panel2 = CovariatePanel(np.column_stack([panel1.matrix[:, 0], extra]))
    a = fit_partially_linear(y, panel2, 1, exclude=1)
    b = fit_partially_linear(y, panel1, 1)
    np.testing.assert_array_equal(a.residuals, b.residuals)
    assert a.columns == ("X1",) and a.excluded == 1


def test_residual_mean_small():
    y, panel = draw(5000, 12)
    v = np.asarray(fit_partially_linear(y, panel, 1).residuals)
    assert abs(v.mean()) < 3 * v.std() / np.sqrt(v.size)


def test_predict_constant_response():
    x = np.random.default_rng(13).standard_normal((60, 1))
    surface = KernelSurface(x, np.full(60, 1.7), np.array([0.5]), "gaussian")
    np.testing.assert_allclose(surface(np.array([[0.3], [-1.0], [2.0]])), 1.7, rtol=1e-12)


@pytest.mark.filterwarnings("ignore:negative ARCH coefficient")
def test_predict_delta_limit():
    y, panel = draw(200, 13)
    sharp = fit_partially_linear(y, panel, 1, KernelConfig((1e-4,)))
    e2 = y.squared
    own = e2[1:] - sharp.alpha_hat[0] * e2[:-1]
    x_train = panel.matrix[:-1]
    assert predict_m(sharp, x_train[5]) == pytest.approx(own[5], rel=1e-9)


def test_predict_dimension_checks():
    y, panel = draw(300, 14)
    fit = fit_partially_linear(y, panel, 1)
    with pytest.raises(DimensionMismatch):
        predict_m(fit, [1.0, 2.0])
    rng = np.random.default_rng(15)
    p2 = CovariatePanel(np.column_stack([panel.matrix[:, 0], rng.standard_normal(300)]))
    f2 = fit_partially_linear(y, p2, 1, exclude=1)
    # full-width input: the excluded entry is ignored
    assert predict_m(f2, [2.5, 100.0]) == predict_m(f2, [2.5])


def test_kernel_recovers_surface():
    y, panel = draw(5000, 16)
    grid = np.linspace(1.5, 3.5, 5)[:, None]
    fit = fit_partially_linear(y, panel, 1)
    rmse = np.sqrt(np.mean((predict_m(fit, grid) - quad_m(grid)) ** 2))
    assert rmse < 0.15


@pytest.mark.xfail(
    strict=True,
    reason="least squares on squared returns has heavy-tailed errors at alpha=0.3; "
    "about 56% of seeds land within 0.05 at n=2000",
)
def test_alpha_accuracy_n2000():
    hits = 0
    for seed in range(100):
        y, panel = draw(2000, 1000 + seed)
        hits += abs(fit_partially_linear(y, panel, 1).alpha_hat[0] - 0.3) < 0.05
    assert hits >= 90


# -- B-spline QMLE ---------------------------------------------------------------


def test_knot_vector_and_partition_of_unity():
    u = np.random.default_rng(17).uniform(size=500)
    t = knot_vector(u, 4, 3)
    assert t.size == 3 + 2 * 4
    interior = t[4:-4]
    assert np.all(np.diff(interior) > 0) and np.all((interior > 0) & (interior < 1))
    b = basis_matrix(u, t, 4)
    assert b.shape == (500, 3 + 4)
    np.testing.assert_allclose(b.sum(axis=1), 1.0, atol=1e-12)


def test_qmle_gradient():
    rng = np.random.default_rng(18)
    design = rng.uniform(0.5, 1.5, size=(50, 3))
    y = rng.exponential(size=50)
    theta = np.array([0.3, 0.4, 0.5])
    f, g = qmle_objective(theta, y, design)
    step = 1e-6
    num = [(qmle_objective(theta + step * e, y, design)[0] - qmle_objective(theta - step * e, y, design)[0]) / (2 * step) for e in np.eye(3)]
    np.testing.assert_allclose(g, num, rtol=1e-5)


def test_spline_guards():
    rng = np.random.default_rng(19)
    y = rng.standard_normal(400)
    with pytest.raises(DimensionTooHigh):
        fit_bspline_qmle(y, rng.standard_normal((400, 3)), 1)
    with pytest.raises(ValueError, match="basis"):
        fit_bspline_qmle(y, rng.standard_normal((400, 2)), 1, SplineConfig(internal_knots=8))


def test_spline_objective_not_worse_than_start():
    y, panel = draw(1500, 20)
    fit = fit_bspline_qmle(y, panel, 1)
    assert fit.objective <= fit.start_objective
    assert fit.method == "spline" and fit.n_eff == 1499
    assert np.all(fit.alpha_hat >= 0)


def test_spline_constant_recovery():
    y, panel = draw(5000, 21, m=lambda x: np.full(np.atleast_2d(x).shape[0], 0.5))
    fit = fit_bspline_qmle(y, panel, 1, SplineConfig(internal_knots=1))
    q1, q3 = np.quantile(panel.matrix[:, 0], [0.25, 0.75])
    values = predict_m(fit, np.linspace(q1, q3, 50)[:, None])
    assert np.max(np.abs(values - 0.5)) < 0.05


def test_spline_and_kernel_agree():
    y, panel = draw(5000, 22)
    fk, fs = fit_partially_linear(y, panel, 1), fit_bspline_qmle(y, panel, 1)
    q1, q3 = np.quantile(panel.matrix[:, 0], [0.25, 0.75])
    g = np.linspace(q1, q3, 50)[:, None]
    assert np.sqrt(np.mean((predict_m(fk, g) - predict_m(fs, g)) ** 2)) < 0.2


def test_spline_two_dimensions():
    law = CovariateLaw(2)
    m = lambda x: 0.2 + 0.5 * (np.atleast_2d(x)[:, 0] - 2.5) ** 2  # noqa: E731
    y, panel = draw(3000, 23, m=m, law=law)
    fit = fit_bspline_qmle(y, panel, 1, SplineConfig(internal_knots=3))
    assert fit.alpha_hat[0] == pytest.approx(0.3, abs=0.1)
    assert predict_m(fit, [2.5, 2.5]) == pytest.approx(0.2, abs=0.15)
