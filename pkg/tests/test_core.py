import numpy as np
import pytest

from indichan.core.alphabet import Alphabet, SymbolSequence
from indichan.core.channels import (
    DelayChannel,
    DMCChannel,
    FixedOutputChannel,
    GaussianMIMOChannel,
    ModuloAdditiveChannel,
    OnOffBinaryChannel,
    apply_channel,
)
from indichan.core.priors import IIDPrior, MarkovPrior, TrimmedGaussianPrior, prior_log_mass, sample_prior
from indichan.core.randomness import SharedRandomness, derive_stream, random_bits
from indichan.errors import InvalidInputError, InvalidParameterError


def test_alphabet_rejects_degenerate_sizes():
    with pytest.raises(InvalidParameterError):
        Alphabet.finite(1)
    with pytest.raises(InvalidParameterError):
        Alphabet.real(0)
    assert Alphabet.finite(4).log_size == pytest.approx(2.0)
    assert Alphabet.complex(3).d == 2


def test_sequence_validates_symbols():
    seq = SymbolSequence.from_string("1011")
    assert seq.n == 4
    assert seq.data.tolist() == [1, 0, 1, 1]
    assert seq.segment(2, 3).tolist() == [0, 1]
    assert seq.segment(3, 2).size == 0
    with pytest.raises(InvalidInputError):
        SymbolSequence.finite(2, [0, 2])
    with pytest.raises(InvalidInputError):
        SymbolSequence.finite(2, [])
    with pytest.raises(ValueError):
        seq.data[0] = 0


def test_vector_sequence_shape():
    seq = SymbolSequence(Alphabet.real(2), np.ones((5, 2)))
    assert seq.n == 5
    with pytest.raises(InvalidInputError):
        SymbolSequence(Alphabet.real(2), np.ones((5, 3)))
    with pytest.raises(InvalidInputError):
        SymbolSequence(Alphabet.real(1), [1.0, np.nan])


def test_derive_is_pure_and_deterministic():
    root = SharedRandomness(7)
    a = root.derive("codebook/7").generator().random(4)
    b = SharedRandomness(7).derive("codebook/7").generator().random(4)
    c = root.derive("codebook/8").generator().random(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert root.path == ()


def test_random_bits_are_prefix_consistent():
    rand = SharedRandomness(99)
    short = random_bits(rand, 70)
    long = random_bits(rand, 300)
    assert np.array_equal(short, long[:70])
    assert set(np.unique(long)) <= {0, 1}
    assert random_bits(rand, 0).size == 0


def test_iid_prior_log_mass(rand):
    prior = IIDPrior(np.array([0.25, 0.75]))
    x = SymbolSequence.from_string("011")
    assert prior.log_mass(x) == pytest.approx(np.log2(0.25 * 0.75 * 0.75))
    assert prior.conditional_log_mass(x, 1, 3) == pytest.approx(2 * np.log2(0.75))
    zero = IIDPrior(np.array([1.0, 0.0]))
    assert zero.log_mass(x) == -np.inf
    sample = prior.sample(2000, rand)
    assert abs(sample.data.mean() - 0.75) < 0.05


def test_iid_prior_rejects_bad_mass():
    with pytest.raises(InvalidParameterError):
        IIDPrior(np.array([0.5, 0.6]))
    with pytest.raises(InvalidParameterError):
        IIDPrior(np.array([-0.1, 1.1]))


def test_markov_prior_conditionals():
    # 一阶：Q(a|s)，s 为前一符号，初始状态补 0
    prior = MarkovPrior(np.array([[0.9, 0.1], [0.2, 0.8]]), order=1)
    x = np.array([1, 1, 0])
    expected = np.log2(0.1) + np.log2(0.8) + np.log2(0.2)
    assert prior.log_mass(x) == pytest.approx(expected)
    with pytest.raises(InvalidParameterError):
        MarkovPrior(np.array([[0.5, 0.5]]), order=1)


def test_markov_prior_sample_follows_transitions(rand):
    prior = MarkovPrior(np.array([[1.0, 0.0], [0.0, 1.0]]), order=1, initial_symbol=1)
    assert prior.sample(50, rand).data.tolist() == [1] * 50


def test_trimmed_gaussian_support(rand):
    prior = TrimmedGaussianPrior(np.eye(2), omega=1.5)
    x = prior.sample(500, rand)
    assert np.all(prior.quadratic_forms(x.data) <= 1.5 ** 2 + 1e-9)
    far = np.array([[10.0, 0.0]])
    assert prior.letter_log_masses(far)[0] == -np.inf
    assert prior.log2_q_min < prior.log2_q_max
    assert 0 < prior.delta_omega < 1


def test_trimmed_gaussian_rejects_bad_covariance():
    with pytest.raises(InvalidParameterError):
        TrimmedGaussianPrior(np.array([[1.0, 2.0], [2.0, 1.0]]), omega=5.0)
    with pytest.raises(InvalidParameterError):
        TrimmedGaussianPrior(np.eye(2), omega=0.0)


def test_modulo_channel_fixed_errors(rand):
    channel = ModuloAdditiveChannel(3, errors=np.array([0, 1, 2, 1]))
    y = channel.transmit(np.array([2, 2, 2, 0]), rand)
    assert y.data.tolist() == [2, 0, 1, 1]
    with pytest.raises(InvalidParameterError):
        ModuloAdditiveChannel(2)


def test_bsc_noise_is_prefix_consistent(rand):
    channel = ModuloAdditiveChannel.bsc(0.2)
    x = np.zeros(400, dtype=np.int64)
    short = channel.transmit(x[:100], rand).data
    long = channel.transmit(x, rand).data
    assert np.array_equal(short, long[:100])
    assert 0.1 < long.mean() < 0.3


def test_bsc_exact_fraction(rand):
    channel = ModuloAdditiveChannel.bsc(0.05, exact_fraction=True)
    y = channel.transmit(np.zeros(200, dtype=np.int64), rand)
    assert int(y.data.sum()) == 10
    assert not channel.prefix_consistent
    assert ModuloAdditiveChannel.bsc(0.05).prefix_consistent
    assert DelayChannel(2).prefix_consistent


def test_noiseless_and_delay(rand):
    x = np.array([1, 0, 1, 1])
    assert ModuloAdditiveChannel.noiseless(2).transmit(x, rand).data.tolist() == [1, 0, 1, 1]
    assert DelayChannel(2).transmit(x, rand).data.tolist() == [0, 1, 0, 1]


def test_fixed_output_ignores_input(rand):
    y = SymbolSequence.from_string("0110")
    channel = FixedOutputChannel(y)
    assert channel.transmit(np.array([1, 1, 1, 1]), rand).data.tolist() == [0, 1, 1, 0]
    with pytest.raises(InvalidInputError):
        channel.transmit(np.zeros(5, dtype=np.int64), rand)


def test_dmc_identity(rand):
    channel = DMCChannel(np.eye(3))
    x = np.array([0, 2, 1, 1])
    assert channel.transmit(x, rand).data.tolist() == x.tolist()
    with pytest.raises(InvalidParameterError):
        DMCChannel(np.array([[0.5, 0.6], [0.5, 0.5]]))


def test_onoff_channel_states(rand):
    x = np.ones(64, dtype=np.int64)
    assert OnOffBinaryChannel(1.0).transmit(x, rand).data.tolist() == x.tolist()
    off = OnOffBinaryChannel(0.0).transmit(x, rand).data
    assert 0 < off.sum() < 64


def test_channel_rejects_alphabet_mismatch(rand):
    with pytest.raises(InvalidInputError):
        ModuloAdditiveChannel.bsc(0.1).transmit(SymbolSequence.finite(3, [0, 2]), rand)


def test_gaussian_mimo_channel_shapes(rand):
    channel = GaussianMIMOChannel(np.ones((2, 3)), np.eye(3) * 1e-12)
    x = np.array([[1.0, 2.0], [0.0, -1.0]])
    y = channel.transmit(x, rand)
    assert y.data.shape == (2, 3)
    assert np.allclose(y.data, x @ np.ones((2, 3)), atol=1e-4)
    with pytest.raises(InvalidParameterError):
        GaussianMIMOChannel(np.ones((2, 3)), np.eye(2))


def test_free_function_forms(rand):
    prior = IIDPrior(np.array([0.5, 0.5]))
    x = sample_prior(prior, 6, derive_stream(rand, "x"))
    again = prior.sample(6, rand.derive("x"))
    assert np.array_equal(x.data, again.data)
    assert prior_log_mass(prior, x) == pytest.approx(-6.0)
    channel = ModuloAdditiveChannel.bsc(0.3)
    y = apply_channel(channel, x, derive_stream(rand, "channel"))
    assert np.array_equal(y.data, channel.transmit(x, rand.derive("channel")).data)
