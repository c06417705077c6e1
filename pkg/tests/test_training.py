from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypersindy import autodiff as ad
from hypersindy.config import load_config
from hypersindy.dynamics import make_dataset, system_spec
from hypersindy.library import LibrarySpec
from hypersindy.model import HyperSINDy
from hypersindy.training import (
    TrainConfig,
    TrainingDivergence,
    beta_schedule,
    is_threshold_epoch,
    lambda_schedule,
    model_config,
    threshold_update,
    train,
)

TINY = load_config("tiny")


@pytest.fixture(scope="module")
def tiny_data():
    return make_dataset(TINY.system_spec(), steps=TINY.data.steps)


@pytest.fixture(scope="module")
def tiny_run(tiny_data):
    return train(TINY.train, tiny_data, TINY.library_spec())


# --------------------------------------------------------------- schedules


def test_beta_warmup_and_spike():
    cfg = load_config("lorenz_sigma5").train
    assert beta_schedule(cfg, 0) == 0.01
    assert beta_schedule(cfg, 50) == pytest.approx(0.01 + 0.5 * (10 - 0.01))
    assert beta_schedule(cfg, 100) == 10
    assert beta_schedule(cfg, 399) == 10
    assert beta_schedule(cfg, 400) == beta_schedule(cfg, 998) == 400


def test_lambda_schedule():
    cfg = load_config("lorenz_sigma1").train
    assert lambda_schedule(cfg, 0) == 0.01
    assert lambda_schedule(cfg, 400) == lambda_schedule(cfg, 900) == 10
    plain = TrainConfig()
    assert {lambda_schedule(plain, e) for e in range(0, 999, 37)} == {plain.lambda_init}


def test_threshold_epochs_skip_zero():
    cfg = TrainConfig()
    assert [e for e in range(450) if is_threshold_epoch(cfg, e)] == [100, 200, 300, 400]


@settings(max_examples=50, deadline=None)
@given(epoch=st.integers(0, 2000), spike=st.one_of(st.none(), st.integers(1, 998)))
def test_schedules_are_pure(epoch, spike):
    cfg = TrainConfig(beta_spike=None if spike is None else 50.0, epoch_beta_spike=spike,
                      lambda_spike=None if spike is None else 2.0, epoch_lambda_spike=spike)
    assert beta_schedule(cfg, epoch) == beta_schedule(cfg, epoch)
    assert lambda_schedule(cfg, epoch) == lambda_schedule(cfg, epoch)
    assert beta_schedule(cfg, epoch) >= 0 and lambda_schedule(cfg, epoch) >= 0


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(epochs=300, epoch_beta_spike=400)
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=-1)
    with pytest.raises(ValueError):
        TrainConfig(lambda_spike=-0.5)


def test_lorenz_preset_values():
    cfg = load_config("lorenz_sigma1").train
    assert (cfg.epochs, cfg.threshold, cfg.latent_dim) == (999, 0.05, 6)
    assert (cfg.beta_spike, cfg.epoch_beta_spike, cfg.lambda_spike, cfg.epoch_lambda_spike) == (100, 400, 10, 400)


# ------------------------------------------------------------- thresholding


def _model(seed=0):
    cfg = TrainConfig(system="lotka_volterra", latent_dim=2, hidden_width=8, num_hidden=2)
    return HyperSINDy.init(model_config(cfg, LibrarySpec(2, 2, True)), np.random.default_rng(seed)), cfg


def test_zero_threshold_prunes_nothing():
    model, cfg = _model()
    assert threshold_update(model, replace(cfg, threshold=0.0), np.random.default_rng(0)) == 0
    assert model.mask.permanent_zero.all()


def test_threshold_is_idempotent():
    model, cfg = _model()
    cfg = replace(cfg, threshold=0.3)
    first = threshold_update(model, cfg, np.random.default_rng(0))
    pinned = model.mask.permanent_zero.copy()
    assert first > 0
    assert threshold_update(model, cfg, np.random.default_rng(0)) == 0
    np.testing.assert_array_equal(model.mask.permanent_zero, pinned)


def test_large_coefficients_survive():
    model, cfg = _model()
    model.hypernet.biases[-1].data[...] = 5.0
    for w in model.hypernet.weights:
        w.data[...] = 0.0
    assert threshold_update(model, replace(cfg, threshold=1.0), np.random.default_rng(0)) == 0


# ----------------------------------------------------------------- training


def test_zero_epochs_returns_initial_model(tiny_data):
    cfg = replace(TINY.train, epochs=0, epoch_lambda_spike=None, lambda_spike=None)
    model, history = train(cfg, tiny_data, TINY.library_spec())
    assert len(history) == 0
    assert np.all(model.mask.log_alpha.data == 2.2)


def test_history_length_and_monotone_active_count(tiny_run):
    _, history = tiny_run
    assert len(history) == TINY.train.epochs
    active = history.column("active_terms")
    assert np.all(np.diff(active) <= 0)


def test_training_is_deterministic(tiny_data, tiny_run):
    again, _ = train(TINY.train, tiny_data, TINY.library_spec())
    for a, b in zip(tiny_run[0].parameters(), again.parameters()):
        assert a.data.tobytes() == b.data.tobytes()
    np.testing.assert_array_equal(tiny_run[0].mask.permanent_zero, again.mask.permanent_zero)


def test_returned_model_is_frozen(tiny_run):
    assert not any(p.requires_grad for p in tiny_run[0].parameters())


def test_train_input_contracts(tiny_data):
    no_dx = make_dataset(TINY.system_spec(), steps=300)
    no_dx = type(no_dx)(no_dx.dt, no_dx.states)
    with pytest.raises(ad.ContractError):
        train(TINY.train, no_dx, TINY.library_spec())
    with pytest.raises(ad.DimensionError):
        train(TINY.train, tiny_data, LibrarySpec(3, 2, True))


def test_non_finite_loss_aborts_with_component(tiny_data):
    blown = replace(TINY.train, learning_rate=1e6, epochs=30)
    with pytest.raises(TrainingDivergence) as info:
        train(blown, tiny_data, TINY.library_spec())
    assert info.value.component in {"recon", "kl", "l0", "total"}


@pytest.mark.slow
def test_reconstruction_drops_tenfold_on_deterministic_lorenz():
    run = load_config("lorenz_sigma1")
    cfg = replace(run.train, beta_init=0.0, lambda_init=0.0, beta_spike=None, epoch_beta_spike=None,
                  lambda_spike=None, epoch_lambda_spike=None, epochs=201)
    _, history = train(cfg, make_dataset(system_spec("lorenz", 0.0)), run.library_spec())
    recon = history.column("recon")
    assert recon[0] / recon[200] >= 10
