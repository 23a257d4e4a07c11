import csv

import numpy as np
import pytest

from semcom import trainer
from semcom.corpus import Vocabulary, make_batch
from semcom.model import ModelConfig, init_params, load_checkpoint, save_checkpoint, teacher_forced_logits
from semcom.semcodec import ContractError
from semcom.tensor import Tensor
from semcom.trainer import AdamState, NumericalError, TrainConfig

WORDS = [f"w{i}" for i in range(16)]
SENTS = [WORDS[i:i + 5] for i in range(0, 11, 2)]
VOCAB = Vocabulary(WORDS)
SMALL = ModelConfig(len(VOCAB), d_model=16, n_heads=2, n_layers=1, d_ff=32, reduction=4,
                    tx_hidden=32, rx_hidden=(32, 32))


def quick(**kw):
    base = dict(batch_size=3, epochs=1, max_steps=4, seed=0, log_interval=0)
    base.update(kw)
    return TrainConfig(**base)


def test_loss_examples():
    batch = make_batch([["w1", "w2"]], VOCAB)
    targets = batch.ids[:, 1:]
    v = len(VOCAB)
    uniform = trainer.loss(Tensor(np.zeros(targets.shape + (v,))), batch)
    assert uniform.item() == pytest.approx(np.log(v))
    onehot = np.full(targets.shape + (v,), -40.0)
    np.put_along_axis(onehot, targets[..., None], 40.0, axis=-1)
    assert trainer.loss(Tensor(onehot), batch).item() < 1e-12


def test_loss_ignores_pad_positions():
    batch = make_batch([["w1", "w2", "w3"], ["w4"]], VOCAB)
    rng = np.random.default_rng(0)
    logits = rng.normal(size=(2, batch.max_len - 1, len(VOCAB)))
    base = trainer.loss(Tensor(logits), batch).item()
    logits[1, 2:] += rng.normal(size=logits[1, 2:].shape) * 100
    assert trainer.loss(Tensor(logits), batch).item() == base


def test_loss_rejects_all_pad_targets():
    batch = make_batch([["w1"]], VOCAB)
    empty = type(batch)(batch.ids[:, :1], batch.lengths, batch.pad_mask[:, :1])
    with pytest.raises(ContractError):
        trainer.loss(Tensor(np.zeros((1, 0, len(VOCAB)))), empty)


def test_adam_zero_gradient_leaves_params():
    p = {"w": Tensor(np.array([1.0, -2.0]))}
    new, state = trainer.adam_step(p, {"w": np.zeros(2)}, AdamState(), TrainConfig())
    np.testing.assert_array_equal(new["w"].data, p["w"].data)
    assert state.step == 1


def test_adam_first_step_is_lr_times_sign():
    # at t=1 the bias-corrected ratio m_hat / sqrt(v_hat) equals g / |g|
    cfg = TrainConfig(learning_rate=0.01)
    p = {"w": Tensor(np.array([1.0, 1.0, 1.0]))}
    g = np.array([0.3, -2.0, 1e-3])
    new, _ = trainer.adam_step(p, {"w": g}, AdamState(), cfg)
    expected = 1.0 - 0.01 * g / (np.abs(g) + cfg.adam_eps)
    np.testing.assert_allclose(new["w"].data, expected, rtol=1e-12)


def test_adam_converges_on_quadratic():
    cfg = TrainConfig(learning_rate=0.01)
    p, state = {"w": Tensor(np.array([1.0]))}, AdamState()
    for _ in range(2000):
        p, state = trainer.adam_step(p, {"w": 2 * p["w"].data}, state, cfg)
    assert abs(p["w"].item()) < 1e-3


def test_adam_names_nonfinite_parameter():
    p = {"a": Tensor(np.ones(2)), "b": Tensor(np.ones(2))}
    with pytest.raises(NumericalError, match="'b'"):
        trainer.adam_step(p, {"a": np.ones(2), "b": np.array([1.0, np.nan])}, AdamState(), TrainConfig())


def test_clip_by_global_norm():
    grads = {"a": np.array([3.0]), "b": np.array([4.0])}
    clipped, norm = trainer.clip_by_global_norm(grads, 1.0)
    assert norm == 5.0
    np.testing.assert_allclose([clipped["a"][0], clipped["b"][0]], [0.6, 0.8])
    same, _ = trainer.clip_by_global_norm(grads, 10.0)
    assert same is grads


def test_initial_loss_near_log_vocab():
    batch = make_batch(SENTS, VOCAB)
    value = trainer.loss(teacher_forced_logits(init_params(SMALL, 3), SMALL, batch), batch).item()
    assert abs(value - np.log(len(VOCAB))) < 0.2 * np.log(len(VOCAB))


def test_seeded_training_is_deterministic():
    a = trainer.train(SENTS, VOCAB, SMALL, quick(channel="rayleigh"))
    b = trainer.train(SENTS, VOCAB, SMALL, quick(channel="rayleigh"))
    assert a.history == b.history
    for k in a.params:
        np.testing.assert_array_equal(a.params[k].data, b.params[k].data)


def test_noise_free_channel_matches_no_channel():
    a = trainer.train(SENTS, VOCAB, SMALL, quick(channel="none"))
    b = trainer.train(SENTS, VOCAB, SMALL, quick(channel="awgn", snr_policy="fixed", snr_db=float("inf")))
    assert [h["loss"] for h in a.history] == [h["loss"] for h in b.history]


def test_history_rows_and_snr_policy():
    r = trainer.train(SENTS, VOCAB, SMALL, quick(channel="mixed", max_steps=5, epochs=3))
    assert [h["step"] for h in r.history] == list(range(5))
    assert {h["epoch"] for h in r.history} == {0, 1, 2}
    assert all(0.0 <= h["snr_db"] <= 20.0 for h in r.history)


def test_word_dropout_keeps_start_pad_and_targets():
    batch = make_batch([["w1", "w2", "w3", "w4"], ["w5", "w6"]], VOCAB)
    rng = np.random.default_rng(0)
    inputs = trainer.drop_words(batch, 0.999, rng, VOCAB.unk_id)
    original = batch.ids[:, :-1]
    real = batch.pad_mask[:, :-1]
    assert np.all(inputs[:, 0] == VOCAB.start_id)
    assert np.all(inputs[~real] == original[~real])
    assert np.all(inputs[:, 1:][real[:, 1:]] == VOCAB.unk_id)
    np.testing.assert_array_equal(trainer.drop_words(batch, 0.0, rng, VOCAB.unk_id), original)


def test_word_dropout_changes_training_only_through_inputs():
    plain = trainer.train(SENTS, VOCAB, SMALL, quick(channel="none"))
    dropped = trainer.train(SENTS, VOCAB, SMALL, quick(channel="none", word_dropout=0.5))
    assert plain.history[0]["loss"] != dropped.history[0]["loss"]
    again = trainer.train(SENTS, VOCAB, SMALL, quick(channel="none", word_dropout=0.5))
    assert [h["loss"] for h in again.history] == [h["loss"] for h in dropped.history]


def test_callback_stops_training():
    r = trainer.train(SENTS, VOCAB, SMALL, quick(max_steps=50, epochs=50),
                      callback=lambda step, loss, params: step >= 3)
    assert len(r.history) == 3


def test_time_budget_stops_training():
    r = trainer.train(SENTS, VOCAB, SMALL, quick(max_steps=None, epochs=1000, max_seconds=0.0))
    assert len(r.history) == 1


def test_nonfinite_loss_aborts_and_keeps_checkpoint(tmp_path):
    params = init_params(SMALL, 0)
    params["dec.out.b"] = Tensor(np.full(len(VOCAB), np.nan))
    path = tmp_path / "ckpt.npz"
    with pytest.raises(NumericalError):
        trainer.train(SENTS, VOCAB, SMALL, quick(checkpoint_path=str(path)), params=params)
    _, _, extra = load_checkpoint(path)
    assert extra["aborted"] is True


def test_empty_corpus_is_rejected():
    with pytest.raises(ContractError):
        trainer.train([], VOCAB, SMALL, quick())


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=0)
    with pytest.raises(ValueError):
        TrainConfig(channel="fiber")
    with pytest.raises(ValueError):
        TrainConfig(word_dropout=1.0)


def test_checkpoint_roundtrip(tmp_path):
    params = init_params(SMALL, 4)
    path = tmp_path / "m.npz"
    save_checkpoint(path, params, SMALL, {"note": "x"})
    loaded, cfg, extra = load_checkpoint(path)
    assert cfg == SMALL and extra == {"note": "x"}
    assert set(loaded) == set(params)
    for k in params:
        np.testing.assert_array_equal(loaded[k].data, params[k].data)
    assert not list(tmp_path.glob("*.tmp"))


def test_write_history(tmp_path):
    r = trainer.train(SENTS, VOCAB, SMALL, quick(max_steps=2))
    path = tmp_path / "loss.csv"
    trainer.write_history(path, r.history)
    rows = list(csv.DictReader(open(path)))
    assert list(rows[0]) == ["step", "epoch", "loss", "snr_db"] and len(rows) == 2


def test_overfit_loss_is_smoothly_decreasing(overfit_result):
    losses = np.array([h["loss"] for h in overfit_result.train.history])
    windows = losses[: len(losses) // 50 * 50].reshape(-1, 50).mean(axis=1)
    assert np.all(np.diff(windows) <= 0)
