import itertools
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import erfc, logsumexp

from semcom import channel as ch
from semcom import corpus, synth
from semcom.baseline import HuffmanCodebook, SeparationScheme, TurboCodeConfig, run_chain
from semcom.baseline import huffman, modem, turbo
from semcom.baseline.huffman import EncodingError


@pytest.fixture(scope="module")
def training_sentences():
    train, _ = corpus.filter_and_split(synth.generate(600, seed=5), 4, 16)
    return train


@pytest.fixture(scope="module")
def codebook(training_sentences):
    return HuffmanCodebook.build(training_sentences)


# -- Huffman ----------------------------------------------------------------


def test_two_symbol_code_lengths():
    code = huffman.huffman_code({"a": 0.9, "b": 0.1})
    assert sorted(len(w) for w in code.values()) == [1, 1]


def test_single_symbol_gets_one_bit():
    assert huffman.huffman_code({"x": 3}) == {"x": "0"}


def test_known_dyadic_code_lengths():
    code = huffman.huffman_code({"a": 4, "b": 2, "c": 1, "d": 1})
    assert {s: len(w) for s, w in code.items()} == {"a": 1, "b": 2, "c": 3, "d": 3}


def test_roundtrip_on_every_training_sentence(codebook, training_sentences):
    for sent in training_sentences:
        assert codebook.decode(codebook.encode(sent)) == sent


def test_mean_length_within_entropy_plus_one(training_sentences):
    freqs = Counter(t for s in training_sentences for t in s)
    book = HuffmanCodebook.build(training_sentences, escape=False)
    h = huffman.entropy(freqs)
    assert h <= book.mean_length(freqs) <= h + 1


def test_codebooks_are_prefix_free(codebook):
    assert codebook.is_prefix_free()
    for table in (codebook.words, codebook.chars):
        for a, b in itertools.permutations(table.values(), 2):
            assert not b.startswith(a)


@settings(max_examples=40, deadline=None)
@given(st.dictionaries(st.text(min_size=1, max_size=3), st.integers(1, 100), min_size=2, max_size=30))
def test_random_alphabets_give_prefix_free_codes(freqs):
    book = HuffmanCodebook.from_frequencies(freqs)
    assert book.is_prefix_free()
    symbols = list(freqs)
    assert book.decode(book.encode(symbols)) == symbols
    h = huffman.entropy(freqs)
    assert book.mean_length(freqs) <= h + 1 + 1e-12


def test_escape_spells_unseen_words(codebook):
    sent = ["the", "zebra", "council"]
    assert codebook.decode(codebook.encode(sent)) == sent


def test_unencodable_inputs():
    book = HuffmanCodebook.build([["a", "b"]], escape=False)
    with pytest.raises(EncodingError):
        book.encode(["c"])
    with_escape = HuffmanCodebook.build([["a", "b"]])
    with pytest.raises(EncodingError):
        with_escape.encode(["€"])


def test_truncated_stream_drops_partial_symbol(codebook):
    bits = codebook.encode(["the", "council"])
    n_first = len(codebook.encode(["the"]))
    assert codebook.decode(bits[:-1]) == ["the"]
    assert codebook.decode(bits[:n_first]) == ["the"]
    assert codebook.decode(bits, max_tokens=1) == ["the"]


def test_codebook_save_load(tmp_path, codebook):
    path = tmp_path / "book.txt"
    codebook.save(path)
    loaded = HuffmanCodebook.load(path)
    assert loaded.words == codebook.words and loaded.chars == codebook.chars


# -- turbo ------------------------------------------------------------------


def bpsk_llr(coded, ebn0_db, rate, rng):
    """Channel LLRs for BPSK over AWGN at the given Eb/N0 (bit 0 -> +1)."""
    sigma2 = 1.0 / (2 * rate * 10 ** (ebn0_db / 10))
    y = (1.0 - 2.0 * coded) + rng.normal(0, np.sqrt(sigma2), coded.shape)
    return 2 * y / sigma2


def test_interleaver_is_a_permutation_and_persists(tmp_path):
    cfg = TurboCodeConfig(block_length=64, interleaver_seed=9)
    assert sorted(cfg.permutation) == list(range(64))
    np.testing.assert_array_equal(cfg.permutation[cfg.inverse_permutation], np.arange(64))
    cfg.save(tmp_path / "pi.txt")
    loaded = TurboCodeConfig.load(tmp_path / "pi.txt")
    np.testing.assert_array_equal(loaded.permutation, cfg.permutation)
    assert loaded.interleaver_seed == 9


def test_coded_length_and_termination():
    cfg = TurboCodeConfig(block_length=100)
    bits = np.random.default_rng(0).integers(0, 2, (3, 100))
    coded = turbo.encode_blocks(bits, cfg)
    assert coded.shape == (3, 3 * 100 + 8) and cfg.coded_length == 308
    np.testing.assert_array_equal(coded[:, :100], bits)
    assert turbo.turbo_encode(np.ones(150, dtype=int), cfg).size == 2 * 308


def test_rsc_known_parity():
    # (7,5) RSC from the zero state: impulse response of the parity is 1 1 1 0 1 1 0 ...
    parity, _ = turbo.rsc_encode(np.array([[1, 0, 0, 0, 0, 0, 0]]))
    np.testing.assert_array_equal(parity[0], [1, 1, 1, 0, 1, 1, 0])


def test_noiseless_decoding_is_exact():
    cfg = TurboCodeConfig(block_length=128)
    bits = np.random.default_rng(1).integers(0, 2, 300)
    llr = 20.0 * (1.0 - 2.0 * turbo.turbo_encode(bits, cfg))
    np.testing.assert_array_equal(turbo.turbo_decode(llr, cfg, n_bits=300), bits)


def test_single_flipped_bit_is_corrected():
    cfg = TurboCodeConfig(block_length=512)
    rng = np.random.default_rng(2)
    bits = rng.integers(0, 2, (1, 512))
    llr = 10.0 * (1.0 - 2.0 * turbo.encode_blocks(bits, cfg))
    for pos in (0, 100, 511, 700, 1500):
        flipped = llr.copy()
        flipped[0, pos] *= -1
        np.testing.assert_array_equal(turbo.decode_blocks(flipped, cfg), bits)


def test_llr_length_mismatch_is_framing_error():
    cfg = TurboCodeConfig(block_length=16)
    with pytest.raises(turbo.FramingError):
        turbo.turbo_decode(np.zeros(cfg.coded_length + 1), cfg)
    with pytest.raises(turbo.FramingError):
        turbo.decode_blocks(np.zeros((2, 10)), cfg)


def test_coded_ber_beats_uncoded_at_2db():
    cfg = TurboCodeConfig()
    rng = np.random.default_rng(3)
    bits = rng.integers(0, 2, (100, cfg.block_length))
    llr = bpsk_llr(turbo.encode_blocks(bits, cfg), 2.0, cfg.rate, rng)
    coded_ber = np.mean(turbo.decode_blocks(llr, cfg) != bits)
    uncoded_ber = 0.5 * erfc(np.sqrt(10 ** 0.2))
    assert coded_ber < uncoded_ber


def test_decoder_symmetry_all_zero_vs_random_codeword():
    cfg = TurboCodeConfig(block_length=256)
    rng = np.random.default_rng(4)
    n_blocks = 200
    zeros = np.zeros((n_blocks, 256), dtype=int)
    rand = rng.integers(0, 2, (n_blocks, 256))
    ber = []
    for bits in (zeros, rand):
        llr = bpsk_llr(turbo.encode_blocks(bits, cfg), 0.5, cfg.rate, rng)
        ber.append(np.mean(turbo.decode_blocks(llr, cfg) != bits))
    assert ber[0] > 0 and ber[1] > 0
    assert abs(ber[0] - ber[1]) < 0.5 * max(ber)


# -- modem ------------------------------------------------------------------


@pytest.mark.parametrize("order", modem.SUPPORTED_ORDERS)
def test_constellation_power_and_gray_labels(order):
    k = modem.bits_per_symbol(order)
    labels = np.array(list(itertools.product([0, 1], repeat=k)))
    points = modem.modulate(labels.reshape(-1), order)
    assert len(set(np.round(points, 12))) == order
    assert np.mean(np.abs(points) ** 2) == pytest.approx(1.0, abs=1e-12)
    # nearest neighbours differ in exactly one bit
    step = np.min(np.abs(points[:, None] - points[None, :]) + np.eye(order) * 10)
    for i, j in zip(*np.nonzero(np.isclose(np.abs(points[:, None] - points[None, :]), step))):
        assert np.sum(labels[i] != labels[j]) == 1


def test_qpsk_power_is_exactly_one():
    pts = modem.modulate(np.array([0, 0, 0, 1, 1, 0, 1, 1]), 4)
    np.testing.assert_allclose(np.abs(pts) ** 2, 1.0, rtol=0, atol=1e-15)


@pytest.mark.parametrize("order", modem.SUPPORTED_ORDERS)
def test_noiseless_hard_decisions_recover_bits(order):
    bits = np.random.default_rng(0).integers(0, 2, 12 * modem.bits_per_symbol(order))
    llr = modem.demodulate_soft(modem.modulate(bits, order), 0.01, order)
    np.testing.assert_array_equal(modem.hard_decision(llr), bits)


def test_qpsk_llr_is_linear():
    y = np.array([0.3 - 0.7j, -1.2 + 0.1j])
    sigma2 = 0.4
    llr = modem.demodulate_soft(y, sigma2, 4)
    expected = 2 * np.sqrt(2) / sigma2 * np.stack([y.real, y.imag], axis=1).reshape(-1)
    np.testing.assert_allclose(llr, expected, rtol=1e-10)


@pytest.mark.parametrize("order", [16, 64])
def test_exact_llr_matches_brute_force(order):
    k = modem.bits_per_symbol(order)
    labels = np.array(list(itertools.product([0, 1], repeat=k)))
    points = modem.modulate(labels.reshape(-1), order)
    rng = np.random.default_rng(1)
    y = rng.normal(size=5) + 1j * rng.normal(size=5)
    sigma2 = 0.3
    metric = -np.abs(y[:, None] - points[None, :]) ** 2 / sigma2
    expected = np.stack([logsumexp(metric[:, labels[:, j] == 0], axis=1)
                         - logsumexp(metric[:, labels[:, j] == 1], axis=1) for j in range(k)], axis=1)
    np.testing.assert_allclose(modem.demodulate_soft(y, sigma2, order), expected.reshape(-1), rtol=1e-9)


def test_llrs_stay_finite_without_noise():
    llr = modem.demodulate_soft(modem.modulate(np.array([0, 1, 1, 0]), 4), 0.0, 4)
    assert np.all(np.isfinite(llr)) and np.all(np.abs(llr) <= modem.LLR_LIMIT)


def test_modem_argument_errors():
    with pytest.raises(ValueError):
        modem.modulate(np.array([0, 1, 1]), 4)
    with pytest.raises(ValueError):
        modem.bits_per_symbol(8)


# -- chain ------------------------------------------------------------------


@pytest.mark.parametrize("order", [4, 64])
@pytest.mark.parametrize("kind", ch.KINDS)
def test_chain_is_exact_at_infinite_snr(codebook, training_sentences, order, kind):
    sents = training_sentences[:5] + [["unseen", "words", "appear"]]
    scheme = SeparationScheme(codebook, TurboCodeConfig(block_length=256), order)
    assert run_chain(sents, scheme, kind, float("inf")) == sents


def test_chain_is_deterministic(codebook, training_sentences):
    scheme = SeparationScheme(codebook, TurboCodeConfig(block_length=256), 64)
    sents = training_sentences[:6]
    a = run_chain(sents, scheme, ch.RAYLEIGH, 3.0, seed=4)
    assert a == run_chain(sents, scheme, ch.RAYLEIGH, 3.0, seed=4)
    assert a != sents  # noisy enough to corrupt something


def test_chain_degrades_at_low_snr(codebook, training_sentences):
    scheme = SeparationScheme(codebook, TurboCodeConfig(block_length=256), 64)
    sents = training_sentences[:20]
    low = run_chain(sents, scheme, ch.AWGN, -2.0, seed=0)
    assert sum(a == b for a, b in zip(low, sents)) < 5


def test_symbols_per_sentence(codebook):
    scheme = SeparationScheme(codebook, TurboCodeConfig(block_length=1024), 4)
    assert scheme.symbols_per_sentence(["the"]) == (3 * 1024 + 8) // 2
