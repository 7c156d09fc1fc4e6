import numpy as np
import pytest
import scipy.stats

from bvarx.distributions import InvWishart, RngStream, draw_inv_wishart
from bvarx.linalg import NotSpdError, inv_spd, residualize, symmetrize
from bvarx.model import (
    Hyperparams,
    build_design,
    least_squares,
    log_posterior_unnorm,
    unvec,
    vec,
)
from bvarx.sampler import (
    ChainState,
    GibbsStreams,
    alpha_chain_step,
    batch_means_se,
    cond_alpha_given_sigma,
    cond_b_given_alpha_sigma,
    cond_sigma_given_alpha,
    conjugate_direct_sample,
    default_start,
    gelman_rubin,
    gibbs_step,
    run_chain,
)
from conftest import random_spd


def test_cond_sigma_at_least_squares_is_residual_gram(small_varx):
    ds, hyper = small_varx["ds"], small_varx["proper"]  # D = 0
    ls = least_squares(ds)
    dist = cond_sigma_given_alpha(ls.alpha_hat, ds, hyper)
    qx_y = residualize(ds.y_obs, ds.x_obs)
    qx_z = residualize(ds.z_design, ds.x_obs)
    expected = qx_y.T @ qx_y - ls.a_hat.T @ (qx_z.T @ qx_z) @ ls.a_hat
    assert np.allclose(dist.scale, symmetrize(expected), atol=1e-8)
    dims = ds.dims
    assert dist.dof == dims.n + hyper.a - dims.p - dims.r - 1


def test_cond_sigma_exact_fit_leaves_prior_scale():
    gen = np.random.default_rng(0)
    q, r, n = 1, 2, 12
    presample = gen.standard_normal((q, r))
    a0 = 0.4 * gen.standard_normal((q * r, r))
    y = np.empty((n, r))
    prev = presample[-1]
    for t in range(n):
        y[t] = a0.T @ prev
        prev = y[t]
    ds = build_design(presample, y)  # p = 0
    hyper = Hyperparams(
        m=np.zeros(ds.dims.alpha_dim),
        c=np.eye(ds.dims.alpha_dim),
        d=np.diag([2.0, 3.0]),
        a=8.0,
    )
    dist = cond_sigma_given_alpha(vec(a0), ds, hyper)
    assert np.allclose(dist.scale, hyper.d, atol=1e-10)


def test_cond_sigma_matches_brute_force(small_varx):
    ds = small_varx["ds"]
    dims = ds.dims
    hyper = Hyperparams.standard_normal_alpha(dims, d_scale=0.7)
    gen = np.random.default_rng(1)
    alpha = gen.standard_normal(dims.alpha_dim)
    dist = cond_sigma_given_alpha(alpha, ds, hyper)
    from bvarx.linalg import proj

    _, q_x = proj(ds.x_obs)
    e = ds.y_obs - ds.z_design @ unvec(alpha, dims.qr, dims.r)
    assert np.allclose(dist.scale, hyper.d + e.T @ q_x @ e, atol=1e-8)


def test_cond_alpha_prior_domination(small_varx):
    ds, dims = small_varx["ds"], small_varx["dims"]
    m = np.full(dims.alpha_dim, 0.3)
    hyper = Hyperparams(m=m, c=1e8 * np.eye(dims.alpha_dim), d=np.zeros((2, 2)), a=0.0)
    dist = cond_alpha_given_sigma(np.eye(dims.r), ds, hyper)
    assert np.linalg.norm(dist.mean() - m) < 1e-3


def test_cond_alpha_flat_prior_centers_at_least_squares(small_varx):
    ds, flat = small_varx["ds"], small_varx["flat"]
    ls = least_squares(ds)
    gen = np.random.default_rng(2)
    dist = cond_alpha_given_sigma(random_spd(gen, ds.dims.r), ds, flat)
    assert np.allclose(dist.mean(), ls.alpha_hat, atol=1e-8)


def test_cond_alpha_mean_solves_system(small_varx):
    ds, dims = small_varx["ds"], small_varx["dims"]
    gen = np.random.default_rng(3)
    hyper = Hyperparams(
        m=gen.standard_normal(dims.alpha_dim),
        c=random_spd(gen, dims.alpha_dim),
        d=np.zeros((dims.r, dims.r)),
        a=0.0,
    )
    dist = cond_alpha_given_sigma(random_spd(gen, dims.r), ds, hyper)
    u = dist.mean()
    resid = dist.precision @ u - dist.shift
    assert np.linalg.norm(resid) / np.linalg.norm(dist.shift) < 1e-8


def test_cond_b_exact_fit():
    gen = np.random.default_rng(4)
    q, r, p, n = 1, 2, 2, 15
    presample = gen.standard_normal((q, r))
    a0 = 0.3 * gen.standard_normal((q * r, r))
    b0 = gen.standard_normal((p, r))
    x = np.hstack([np.ones((n, 1)), gen.standard_normal((n, 1))])
    y = np.empty((n, r))
    prev = presample[-1]
    for t in range(n):
        y[t] = a0.T @ prev + b0.T @ x[t]
        prev = y[t]
    ds = build_design(presample, y, x)
    dist = cond_b_given_alpha_sigma(vec(a0), np.eye(r), ds)
    assert np.allclose(dist.mean, b0, atol=1e-10)


def test_cond_b_intercept_is_column_mean(small_varx):
    ds, dims = small_varx["ds"], small_varx["dims"]
    gen = np.random.default_rng(5)
    alpha = gen.standard_normal(dims.alpha_dim)
    dist = cond_b_given_alpha_sigma(alpha, np.eye(dims.r), ds)
    resid = ds.y_obs - ds.z_design @ unvec(alpha, dims.qr, dims.r)
    assert np.allclose(dist.mean, resid.mean(axis=0, keepdims=True), atol=1e-10)


def test_cond_b_matches_normal_equations(small_varx):
    ds, dims = small_varx["ds"], small_varx["dims"]
    gen = np.random.default_rng(6)
    alpha = gen.standard_normal(dims.alpha_dim)
    sigma = random_spd(gen, dims.r)
    dist = cond_b_given_alpha_sigma(alpha, sigma, ds)
    resid = ds.y_obs - ds.z_design @ unvec(alpha, dims.qr, dims.r)
    expected = np.linalg.solve(ds.x_obs.T @ ds.x_obs, ds.x_obs.T @ resid)
    assert np.allclose(dist.mean, expected, atol=1e-10)
    assert np.allclose(dist.row_scale, inv_spd(ds.x_obs.T @ ds.x_obs), atol=1e-12)
    assert np.array_equal(dist.col_scale, symmetrize(sigma))


def test_cond_b_rejects_rank_deficient_x(small_varx):
    ds0 = small_varx["ds"]
    from bvarx.model import Dataset

    x_bad = np.hstack([ds0.x_obs, ds0.x_obs])
    ds = Dataset(ds0.presample, ds0.y_obs, x_bad, ds0.z_design)
    with pytest.raises(NotSpdError):
        cond_b_given_alpha_sigma(np.zeros(ds.dims.alpha_dim), np.eye(2), ds)


def test_gibbs_step_update_order_matters(small_varx):
    ds, hyper = small_varx["ds"], small_varx["proper"]
    start = default_start(ds, hyper)
    forward = gibbs_step(start, ds, hyper, GibbsStreams.from_root(RngStream(77)))

    # permuted scan: alpha first (conditional on the old sigma), then sigma
    streams = GibbsStreams.from_root(RngStream(77))
    from bvarx.distributions import draw_precision_gaussian

    alpha_first = draw_precision_gaussian(
        cond_alpha_given_sigma(start.sigma, ds, hyper), streams.alpha
    )
    sigma_after = draw_inv_wishart(
        cond_sigma_given_alpha(alpha_first, ds, hyper), streams.sigma
    )
    assert not np.allclose(forward.alpha, alpha_first)
    assert not np.allclose(forward.sigma, sigma_after)


def test_gibbs_step_reads_only_alpha(small_varx):
    # surrogate for the marginal-chain property: two states sharing alpha
    # but with different (B, Sigma) lead to identical next states
    ds, hyper = small_varx["ds"], small_varx["proper"]
    gen = np.random.default_rng(7)
    alpha = gen.standard_normal(ds.dims.alpha_dim)
    s1 = ChainState(alpha, gen.standard_normal((1, 2)), random_spd(gen, 2))
    s2 = ChainState(alpha, gen.standard_normal((1, 2)), random_spd(gen, 2))
    out1 = gibbs_step(s1, ds, hyper, GibbsStreams.from_root(RngStream(8)))
    out2 = gibbs_step(s2, ds, hyper, GibbsStreams.from_root(RngStream(8)))
    assert np.array_equal(out1.alpha, out2.alpha)
    assert np.array_equal(out1.sigma, out2.sigma)
    assert np.array_equal(out1.b_coef, out2.b_coef)


def test_gibbs_step_p_zero_reduces_to_two_component():
    gen = np.random.default_rng(9)
    ds = build_design(gen.standard_normal((1, 2)), gen.standard_normal((40, 2)))
    dims = ds.dims
    hyper = Hyperparams.standard_normal_alpha(dims, d_scale=1.0, a=6.0)
    state = default_start(ds, hyper)
    out = gibbs_step(state, ds, hyper, GibbsStreams.from_root(RngStream(10)))
    assert out.b_coef.shape == (0, 2)
    # the sigma conditional uses the raw scatter, no predictor projection
    dist = cond_sigma_given_alpha(state.alpha, ds, hyper)
    e = ds.y_obs - ds.z_design @ unvec(state.alpha, dims.qr, dims.r)
    assert np.allclose(dist.scale, hyper.d + e.T @ e, atol=1e-10)


def test_alpha_subsequence_bit_equals_marginal_chain(small_varx):
    ds, hyper = small_varx["ds"], small_varx["proper"]
    start = default_start(ds, hyper)
    streams_full = GibbsStreams.from_root(RngStream(11))
    streams_marg = GibbsStreams.from_root(RngStream(11))
    state = start
    alpha = start.alpha
    for _ in range(10):
        state = gibbs_step(state, ds, hyper, streams_full)
        alpha = alpha_chain_step(alpha, ds, hyper, streams_marg)
        assert np.array_equal(state.alpha, alpha)


def test_run_chain_zero_iters_returns_start(small_varx):
    ds, hyper = small_varx["ds"], small_varx["proper"]
    start = default_start(ds, hyper)
    trace = run_chain(start, 0, ds, hyper, RngStream(12))
    assert len(trace) == 1
    assert trace.states[0] is start


def test_run_chain_deterministic_and_length(small_varx):
    ds, hyper = small_varx["ds"], small_varx["proper"]
    t1 = run_chain(None, 25, ds, hyper, RngStream(13))
    t2 = run_chain(None, 25, ds, hyper, RngStream(13))
    assert len(t1) == 26
    assert np.array_equal(t1.alpha_matrix(), t2.alpha_matrix())
    assert np.array_equal(t1.logpost, t2.logpost)
    t3 = run_chain(None, 25, ds, hyper, RngStream(14))
    assert not np.array_equal(t1.alpha_matrix(), t3.alpha_matrix())


def test_run_chain_thin_and_burn(small_varx):
    ds, hyper = small_varx["ds"], small_varx["proper"]
    trace = run_chain(None, 20, ds, hyper, RngStream(15), thin=5, burn=5)
    assert list(trace.iterations) == [10, 15, 20]
    full = run_chain(None, 20, ds, hyper, RngStream(15))
    assert np.array_equal(trace.alpha_matrix(), full.alpha_matrix()[[10, 15, 20]])


def test_run_chain_logpost_matches_states(small_varx):
    ds, hyper = small_varx["ds"], small_varx["proper"]
    trace = run_chain(None, 5, ds, hyper, RngStream(16))
    for s, lp in zip(trace.states, trace.logpost):
        assert np.isclose(lp, log_posterior_unnorm(s, ds, hyper))


def test_trace_matrices_shapes(small_varx):
    ds, hyper = small_varx["ds"], small_varx["proper"]
    trace = run_chain(None, 6, ds, hyper, RngStream(55))
    assert trace.alpha_matrix().shape == (7, 4)
    assert trace.b_matrix().shape == (7, 2)
    assert trace.sigma_vech_matrix().shape == (7, 3)
    assert np.array_equal(trace.b_matrix()[0], vec(trace.states[0].b_coef))


def test_trace_csv_schema_and_determinism(tmp_path, small_varx):
    ds, hyper = small_varx["ds"], small_varx["proper"]
    trace = run_chain(None, 8, ds, hyper, RngStream(17))
    p1, p2 = tmp_path / "t1.csv", tmp_path / "t2.csv"
    trace.to_csv(p1)
    trace.to_csv(p2)
    assert p1.read_bytes() == p2.read_bytes()
    header = p1.read_text().splitlines()[0].split(",")
    assert header[0] == "iter" and header[-1] == "logpost"
    assert header[1:5] == ["alpha_1", "alpha_2", "alpha_3", "alpha_4"]
    assert "sigma_2_1" in header and "b_2" in header


def test_conjugate_direct_sample_alpha_mean(small_varx):
    ds, flat = small_varx["ds"], small_varx["flat"]
    ls = least_squares(ds)
    rng = RngStream(18)
    draws = np.stack(
        [conjugate_direct_sample(ds, flat, rng).alpha for _ in range(4000)]
    )
    se = draws.std(axis=0, ddof=1) / np.sqrt(draws.shape[0])
    assert np.all(np.abs(draws.mean(axis=0) - ls.alpha_hat) < 5 * se)


def test_conjugate_direct_sample_sigma_mean(small_varx):
    ds, flat, dims = small_varx["ds"], small_varx["flat"], small_varx["dims"]
    ls = least_squares(ds)
    dof = dims.n + flat.a - dims.p - dims.qr - dims.r - 1
    target = InvWishart(scale=ls.resid_gram, dof=dof).mean()
    rng = RngStream(19)
    draws = np.stack(
        [conjugate_direct_sample(ds, flat, rng).sigma for _ in range(4000)]
    )
    se = draws.std(axis=0, ddof=1) / np.sqrt(draws.shape[0])
    assert np.all(np.abs(draws.mean(axis=0) - target) < 5 * se)


def test_conjugate_direct_sample_rejects_spd_c(small_varx):
    ds, hyper = small_varx["ds"], small_varx["proper"]
    with pytest.raises(ValueError, match="C = 0"):
        conjugate_direct_sample(ds, hyper, RngStream(20))


def test_conjugate_direct_sample_rejects_improper():
    gen = np.random.default_rng(21)
    ds = build_design(
        gen.standard_normal((1, 2)), gen.standard_normal((6, 2)), np.ones((6, 1))
    )
    flat = Hyperparams.flat(ds.dims)
    with pytest.raises(ValueError, match="propriety"):
        conjugate_direct_sample(ds, flat, RngStream(22))


def test_conjugate_logpost_distribution_matches_gibbs(small_varx):
    # thinned stationary chain vs independent exact draws, compared on the
    # scalar log-posterior summary
    ds, flat = small_varx["ds"], small_varx["flat"]
    rng = RngStream(23)
    exact = np.array(
        [
            log_posterior_unnorm(conjugate_direct_sample(ds, flat, rng), ds, flat)
            for _ in range(1000)
        ]
    )
    start = conjugate_direct_sample(ds, flat, RngStream(24))
    trace = run_chain(start, 10_000, ds, flat, RngStream(25), thin=10)
    ks = scipy.stats.ks_2samp(exact, trace.logpost[1:])
    assert ks.pvalue > 0.001


def test_batch_means_se_iid_normal():
    gen = np.random.default_rng(26)
    x = gen.standard_normal(40_000)
    se = batch_means_se(x)
    assert 0.7 / np.sqrt(x.size) < se < 1.4 / np.sqrt(x.size)


def test_gelman_rubin_same_distribution_near_one():
    gen = np.random.default_rng(27)
    chains = gen.standard_normal((4, 5000))
    assert abs(gelman_rubin(chains) - 1.0) < 0.01
    shifted = chains + np.array([[0.0], [0.0], [0.0], [5.0]])
    assert gelman_rubin(shifted) > 1.5


def test_chain_state_validates_sigma():
    with pytest.raises(NotSpdError):
        ChainState(np.zeros(4), np.zeros((1, 2)), np.diag([1.0, -1.0]))
