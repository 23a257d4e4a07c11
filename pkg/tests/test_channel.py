import numpy as np
import pytest

from semcom import channel as ch
from semcom import tensor as T
from semcom.channel import ChannelRealization, DegenerateChannelError
from semcom.tensor import Tape, Tensor


def unit_symbols(rng, shape):
    return np.exp(2j * np.pi * rng.random(shape))


def test_noise_variance_definition():
    assert ch.noise_variance(0.0) == 1.0
    assert ch.noise_variance(10.0) == pytest.approx(0.1)
    assert ch.noise_variance(float("inf")) == 0.0


def test_infinite_snr_awgn_is_exact():
    rng = np.random.default_rng(0)
    x = unit_symbols(rng, (3, 20))
    real = ChannelRealization.draw(ch.AWGN, float("inf"), 3)
    np.testing.assert_array_equal(ch.transmit(x, real), x)


def test_empirical_snr_at_10db():
    rng = np.random.default_rng(1)
    x = unit_symbols(rng, (1, 10 ** 6))
    real = ChannelRealization.draw(ch.AWGN, 10.0, 1, seed=7)
    noise = ch.transmit(x, real) - x
    measured = 10 * np.log10(np.mean(np.abs(x) ** 2) / np.mean(np.abs(noise) ** 2))
    assert 9.9 <= measured <= 10.1


def test_rayleigh_gain_power():
    real = ChannelRealization.draw(ch.RAYLEIGH, 10.0, 10 ** 5, seed=3)
    assert 0.99 <= np.mean(np.abs(real.h) ** 2) <= 1.01


def test_noise_is_white():
    x = np.zeros((1, 10 ** 5), dtype=complex)
    n = ch.transmit(x, ChannelRealization.draw(ch.AWGN, 0.0, 1, seed=4))[0]
    r = np.abs(np.vdot(n[:-1], n[1:])) / np.vdot(n, n).real
    assert r < 0.01


def test_noiseless_rayleigh_equalization_inverts_gain():
    rng = np.random.default_rng(2)
    x = unit_symbols(rng, (4, 16))
    real = ChannelRealization.draw(ch.RAYLEIGH, float("inf"), 4, seed=1)
    y = ch.transmit(x, real)
    assert not np.allclose(y, x)
    np.testing.assert_allclose(ch.equalize(y, real), x, atol=1e-12)


def test_awgn_equalization_is_passthrough():
    y = np.arange(6.0).reshape(2, 3) + 1j
    real = ChannelRealization.draw(ch.AWGN, 5.0, 2)
    assert ch.equalize(y, real) is y


def test_post_equalization_noise_variance():
    real = ChannelRealization.draw(ch.RAYLEIGH, 6.0, 4, seed=11)
    x = np.zeros((4, 200_000), dtype=complex)
    residual = ch.equalize(ch.transmit(x, real), real)
    measured = np.mean(np.abs(residual) ** 2, axis=1)
    np.testing.assert_allclose(measured, real.effective_noise_variance(), rtol=0.02)


def test_one_gain_per_block():
    real = ChannelRealization.draw(ch.RAYLEIGH, float("inf"), 2, seed=5)
    y = ch.transmit(np.ones((2, 5), dtype=complex), real)
    np.testing.assert_allclose(y, np.repeat(real.h[:, None], 5, axis=1))


def test_degenerate_gain_is_rejected():
    real = ChannelRealization(ch.RAYLEIGH, 10.0, np.array([1e-13 + 0j]))
    with pytest.raises(DegenerateChannelError):
        ch.equalize(np.ones((1, 3), dtype=complex), real)


def test_unknown_kind_and_block_mismatch():
    with pytest.raises(ValueError):
        ChannelRealization.draw("rician", 10.0, 1)
    real = ChannelRealization.draw(ch.AWGN, 10.0, 2)
    with pytest.raises(ValueError):
        ch.transmit(np.ones((3, 4), dtype=complex), real)


def test_seeded_draws_are_reproducible():
    x = np.ones((2, 8), dtype=complex)
    a = ch.transmit(x, ChannelRealization.draw(ch.RAYLEIGH, 3.0, 2, seed=9, stream=4))
    b = ch.transmit(x, ChannelRealization.draw(ch.RAYLEIGH, 3.0, 2, seed=9, stream=4))
    c = ch.transmit(x, ChannelRealization.draw(ch.RAYLEIGH, 3.0, 2, seed=9, stream=5))
    np.testing.assert_array_equal(a, b)
    assert not np.allclose(a, c)


def test_straight_through_has_identity_jacobian():
    rng = np.random.default_rng(0)
    x = Tensor(rng.normal(size=(2, 3, 4)), requires_grad=True)
    weights = rng.normal(size=(2, 3, 4))
    real = ChannelRealization.draw(ch.RAYLEIGH, 5.0, 2, seed=2)
    with Tape() as tape:
        y = ch.straight_through(x, real)
        out = T.tsum(y * weights)
    (g,) = tape.gradient(out, [x])
    np.testing.assert_array_equal(g, weights)


def test_straight_through_value_matches_channel():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(2, 2, 4))
    y = ch.straight_through(Tensor(x), ChannelRealization.draw(ch.RAYLEIGH, 5.0, 2, seed=3)).data
    flat = x.reshape(2, -1)
    cx = flat[:, 0::2] + 1j * flat[:, 1::2]
    real = ChannelRealization.draw(ch.RAYLEIGH, 5.0, 2, seed=3)
    expected = ch.equalize(ch.transmit(cx, real), real)
    yf = y.reshape(2, -1)
    np.testing.assert_allclose(yf[:, 0::2] + 1j * yf[:, 1::2], expected, atol=1e-12)


def test_straight_through_without_noise_is_identity():
    x = np.random.default_rng(2).normal(size=(2, 3, 4))
    real = ChannelRealization.draw(ch.AWGN, float("inf"), 2)
    np.testing.assert_array_equal(ch.straight_through(Tensor(x), real).data, x)
