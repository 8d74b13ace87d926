import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fourmix.ecf import EmpiricalCF, exact_cf_on_grid, empirical_cf
from fourmix.errors import InvalidArgument, TrainingDiverged
from fourmix.glmix import Bounds, RawParams
from fourmix.grid import uniform_grid
from fourmix.train import (
    EarlyStop,
    OptimizerState,
    SampleSummary,
    StageConfig,
    TrainConfig,
    default_bounds,
    fit,
    fit_samples,
    init_params,
    loss,
    loss_grad,
    optimizer_step,
    robust_affine,
)


def random_raw(seed, kg=2, kl=2):
    r = np.random.default_rng(seed)
    return RawParams(*r.normal(size=(3, kg)), *r.normal(size=(3, kl)))


def short_config(e1=300, e2=300, **kw):
    return TrainConfig(stage1=StageConfig("amsgrad", 1e-2, e1), stage2=StageConfig("adam", 1e-3, e2), **kw)


# --- loss -------------------------------------------------------------------


def test_loss_zero_when_model_matches():
    raw = random_raw(0)
    ecf = exact_cf_on_grid(raw.effective().cf, uniform_grid(10, 50))
    total, mse, mae, res = loss(raw, ecf, 0.01)
    assert total == 0.0 and mse == 0.0 and mae == 0.0


@pytest.mark.parametrize("lam, expected", [(0.0, 0.01), (1.0, 0.11)])
def test_single_node_loss(lam, expected):
    raw = RawParams([0.0], [0.0], [0.0])
    grid = uniform_grid(1, 2)
    values = raw.effective().cf(grid.nodes) + 0.1
    total, *_ = loss(raw, EmpiricalCF(grid, values, 10), lam, node_batch=[0])
    assert total == pytest.approx(expected, rel=1e-12)


def test_zero_residual_gradient_is_zero():
    raw = random_raw(1)
    ecf = exact_cf_on_grid(raw.effective().cf, uniform_grid(10, 40))
    for lam in (0.0, 0.5):
        _, grad = loss_grad(raw, ecf, lam)
        np.testing.assert_allclose(grad, 0.0, atol=1e-14)


@pytest.mark.parametrize("lam", [0.0, 0.01])
def test_gradient_matches_finite_differences(lam):
    raw = random_raw(2, 3, 2)
    grid = uniform_grid(8, 30)
    target = empirical_cf(np.random.default_rng(3).standard_normal(500), grid)
    _, grad = loss_grad(raw, target, lam)
    v = raw.to_vector()
    h = 1e-6
    for j in range(v.size):
        e = np.zeros_like(v)
        e[j] = h
        fd = (loss(raw.with_vector(v + e), target, lam)[0] - loss(raw.with_vector(v - e), target, lam)[0]) / (2 * h)
        assert grad[j] == pytest.approx(fd, rel=1e-5, abs=1e-9)


def test_single_node_gradient_formula():
    raw = random_raw(4, 1, 1)
    grid = uniform_grid(2, 4)
    target = EmpiricalCF(grid, np.full(4, 0.3 + 0.1j), 100)
    from fourmix.glmix import cf_and_jacobian

    g, jac = cf_and_jacobian(raw, grid.nodes[[1]])
    d = target.values[1] - g[0]
    _, grad = loss_grad(raw, target, 0.0, node_batch=[1])
    np.testing.assert_allclose(grad, -2.0 * (d.real * jac[0].real + d.imag * jac[0].imag), rtol=1e-13)


def test_full_batch_is_mean_of_minibatches():
    raw = random_raw(5)
    grid = uniform_grid(8, 40)
    target = empirical_cf(np.random.default_rng(6).standard_cauchy(400), grid)
    _, full = loss_grad(raw, target, 0.01)
    parts = [loss_grad(raw, target, 0.01, np.arange(i, i + 10))[1] for i in range(0, 40, 10)]
    np.testing.assert_allclose(full, np.mean(parts, axis=0), rtol=1e-12, atol=1e-16)


@given(st.integers(0, 1000))
def test_loss_invariant_under_component_permutation(seed):
    raw = random_raw(seed, 3, 2)
    target = empirical_cf(np.random.default_rng(seed).standard_normal(50), uniform_grid(5, 20))
    perm_g, perm_l = np.random.default_rng(seed + 1).permutation(3), np.random.default_rng(seed + 2).permutation(2)
    shuffled = RawParams(raw.gauss_logits[perm_g], raw.gauss_locs[perm_g], raw.gauss_raw_scales[perm_g],
                         raw.laplace_logits[perm_l], raw.laplace_locs[perm_l], raw.laplace_raw_scales[perm_l])
    assert loss(shuffled, target, 0.01)[0] == pytest.approx(loss(raw, target, 0.01)[0], rel=1e-12)


@given(st.integers(0, 1000))
def test_loss_nonnegative(seed):
    raw = random_raw(seed)
    target = empirical_cf(np.random.default_rng(seed).standard_normal(30), uniform_grid(5, 10))
    total, mse, mae, _ = loss(raw, target, 0.01)
    assert total >= 0 and mse >= 0 and mae >= 0


# --- optimizers -------------------------------------------------------------


def test_zero_gradient_keeps_parameters():
    raw = random_raw(7)
    cfg = TrainConfig()
    out, _ = optimizer_step(raw, OptimizerState.zeros(raw.n_params), np.zeros(raw.n_params), cfg, cfg.stage1)
    np.testing.assert_array_equal(out.to_vector(), raw.to_vector())


def test_single_adam_step_hand_value():
    # first step with bias correction: m_hat = 1, sqrt(v_hat) = 1, so the move is lr / (1 + eps)
    raw = RawParams([0.0], [0.0], [0.0])
    cfg = TrainConfig(adam_betas=(0.9, 0.999), adam_eps=1e-8)
    stage = StageConfig("adam", 0.1, 1)
    grad = np.array([0.0, 1.0, 0.0])
    out, state = optimizer_step(raw, OptimizerState.zeros(3), grad, cfg, stage)
    assert out.gauss_locs[0] == pytest.approx(-0.1 / (1 + 1e-8), rel=1e-15)
    assert state.t == 1


def test_amsgrad_second_moment_monotone():
    raw = RawParams([0.0], [0.0], [0.0])
    cfg = TrainConfig()
    stage = StageConfig("amsgrad", 1e-3, 1)
    state = OptimizerState.zeros(3)
    prev = state.v_hat.copy()
    for g in np.geomspace(1.0, 1e-4, 30):
        raw, state = optimizer_step(raw, state, np.array([g, -g, g]), cfg, stage)
        assert np.all(state.v_hat >= prev)
        prev = state.v_hat.copy()


def test_non_finite_gradient_raises():
    raw = RawParams([0.0], [0.0], [0.0])
    cfg = TrainConfig()
    with pytest.raises(TrainingDiverged):
        optimizer_step(raw, OptimizerState.zeros(3), np.array([np.nan, 0, 0]), cfg, cfg.stage1)


def test_step_projects_onto_bounds():
    raw = RawParams([0.0], [4.95], [0.0])
    cfg = TrainConfig(bounds=Bounds(mu_bar=5.0))
    out, _ = optimizer_step(raw, OptimizerState.zeros(3), np.array([0.0, -1.0, 0.0]), cfg, StageConfig("adam", 0.5, 1))
    assert out.gauss_locs[0] == 5.0


# --- initialization ---------------------------------------------------------


def test_init_single_gaussian_on_standard_normal():
    x = np.random.default_rng(8).standard_normal(100_000)
    eff = init_params((1, 0, 1), SampleSummary.from_samples(x), 0).effective()
    assert eff.mu[0] == pytest.approx(0.0, abs=0.05)
    assert eff.sigma[0] == pytest.approx(1.0, abs=0.05)


def test_init_two_gaussians_at_terciles():
    x = np.random.default_rng(9).standard_normal(100_000)
    eff = init_params((2, 0, 1), SampleSummary.from_samples(x), 0).effective()
    np.testing.assert_allclose(eff.mu, np.quantile(x, [1 / 3, 2 / 3]), atol=0.05)
    # light tails: every scale is std / sqrt(K) up to the 1% jitter
    np.testing.assert_allclose(eff.sigma, x.std() / math.sqrt(2), rtol=0.04)


def test_init_seeds_differ_only_by_jitter():
    x = np.random.default_rng(10).standard_normal(10_000)
    summ = SampleSummary.from_samples(x)
    a, b = init_params((3, 2, 1), summ, 1), init_params((3, 2, 1), summ, 2)
    np.testing.assert_allclose(a.effective().mu, b.effective().mu, atol=0.1 * x.std())
    np.testing.assert_array_equal(a.gauss_logits, 0.0)


def test_init_heavy_tail_ladder():
    x = np.random.default_rng(11).standard_cauchy(100_000)
    summ = SampleSummary.from_samples(x)
    eff = init_params((5, 0, 1), summ, 0, max_scale=10.0).effective()
    # central component widest, capped by max_scale
    assert np.argmax(eff.sigma) == 2
    assert eff.sigma.max() <= 10.0 * 1.05
    assert eff.sigma.min() == pytest.approx(summ.robust_scale()[0] / math.sqrt(5), rel=0.05)


def test_init_rejects_bad_shapes():
    summ = SampleSummary.from_samples(np.arange(10.0))
    with pytest.raises(InvalidArgument):
        init_params((0, 0, 1), summ, 0)
    with pytest.raises(InvalidArgument):
        init_params((1, 0, 2), summ, 0)


# --- training loop ----------------------------------------------------------


def test_recovers_single_gaussian_moments():
    x = np.random.default_rng(12).normal(2.0, 1.0, 100_000)
    grid = uniform_grid(10, 200)
    ecf = empirical_cf(x, grid)
    raw, rep = fit(ecf, None, (1, 0, 1), short_config(400, 400), summary=SampleSummary.from_samples(x))
    eff = raw.effective()
    assert eff.mu[0] == pytest.approx(x.mean(), abs=0.05)
    assert eff.sigma[0] == pytest.approx(x.std(), abs=0.05)


def test_realizable_target_reaches_tiny_loss():
    truth = RawParams([0.0], [0.5], [0.3]).effective()
    grid = uniform_grid(10, 200)
    ecf = exact_cf_on_grid(truth.cf, grid)
    init = RawParams([0.0], [0.0], [0.0])
    raw, rep = fit(ecf, None, (1, 0, 1), short_config(1500, 1500, lam=0.0), init=init)
    assert rep.train_loss[rep.best_epoch] <= 1e-8


def test_report_structure_and_determinism(tmp_path):
    x = np.random.default_rng(13).standard_normal(5000)
    grid = uniform_grid(10, 100)
    tr, va = empirical_cf(x[:2500], grid), empirical_cf(x[2500:], grid)
    cfg = short_config(20, 30, seed=4)
    summ = SampleSummary.from_samples(x[:2500])
    raw1, rep1 = fit(tr, va, (2, 1, 1), cfg, summary=summ)
    raw2, rep2 = fit(tr, va, (2, 1, 1), cfg, summary=summ)
    assert rep1.train_loss == rep2.train_loss
    np.testing.assert_array_equal(raw1.to_vector(), raw2.to_vector())
    assert rep1.stage_boundary == 20
    assert len(rep1.train_loss) == len(rep1.val_loss) <= 51
    assert rep1.best_val_loss == min(rep1.val_loss)
    rep1.save(tmp_path / "r.json", tmp_path / "r.csv")
    data = json.loads((tmp_path / "r.json").read_text())
    assert data["stage_boundary"] == 20
    assert TrainConfig.from_dict(cfg.to_dict()) == cfg


def test_early_stop_only_in_second_stage():
    x = np.random.default_rng(14).standard_normal(4000)
    grid = uniform_grid(10, 64)
    ecf = empirical_cf(x, grid)
    cfg = short_config(100, 2000, early_stop=EarlyStop(patience=5, min_rel_improvement=0.5))
    _, rep = fit(ecf, ecf, (1, 0, 1), cfg, summary=SampleSummary.from_samples(x))
    assert rep.stopped_early == [False, True]
    assert rep.stage_boundary == 100
    assert len(rep.train_loss) == 1 + 100 + 5


def test_fit_rejects_mismatched_grids():
    x = np.random.default_rng(15).standard_normal(100)
    with pytest.raises(InvalidArgument):
        fit(empirical_cf(x, uniform_grid(5, 10)), empirical_cf(x, uniform_grid(5, 12)), (1, 0, 1), short_config(),
            summary=SampleSummary.from_samples(x))


def test_config_validation():
    with pytest.raises(InvalidArgument):
        StageConfig("sgd", 0.1, 1)
    with pytest.raises(InvalidArgument):
        TrainConfig(lam=-1)
    with pytest.raises(InvalidArgument):
        TrainConfig.from_dict({"lambda": 0.1, "momentum": 0.9})


# --- affine preprocessing ---------------------------------------------------


def test_robust_affine_standardizes_median_and_iqr():
    x = np.random.default_rng(16).normal(5.0, 3.0, 200_000)
    a, c = robust_affine(x)
    y = a * x + c
    assert np.median(y) == pytest.approx(0.0, abs=1e-12)
    q1, q3 = np.quantile(y, [0.25, 0.75])
    assert (q3 - q1) / 1.349 == pytest.approx(1.0, rel=1e-12)


def test_fit_samples_maps_back_to_original_units():
    rng = np.random.default_rng(17)
    x = rng.normal(40.0, 5.0, 60_000)
    res = fit_samples(x[:30_000], x[30_000:], uniform_grid(5, 200), (1, 0, 1), short_config(300, 300))
    assert res.model.mu[0] == pytest.approx(x.mean(), abs=0.2)
    assert res.model.sigma[0] == pytest.approx(x.std(), rel=0.03)
    a, c = res.affine
    assert a == pytest.approx(1 / (np.subtract(*np.quantile(x[:30_000], [0.75, 0.25])) / 1.349))


def test_default_bounds():
    b = default_bounds(np.array([-3.0, 1.0, 2.0]))
    assert b.mu_bar == 3.0
    assert b.sigma_max == pytest.approx(10 * np.std([-3.0, 1.0, 2.0]))
