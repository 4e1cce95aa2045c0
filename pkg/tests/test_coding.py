import itertools

import numpy as np
import pytest
from scipy.stats import chisquare

from indichan.analysis.bounds import framework_from_metadata
from indichan.coding.adaptive import EXPLICIT, SAMPLED, AdaptiveSession, BlockEngine, adaptive_threshold, run_adaptive
from indichan.coding.doubling import EpochSchedule, doubling_delta, run_doubling
from indichan.coding.fixed import FixedRateCode, conditional_error, fixed_decode, fixed_encode
from indichan.coding.metrics import (
    CausalMetric,
    CompressionMetric,
    MixtureMetric,
    causal_metric,
    compression_metric,
    mixture_metric,
    range_sums,
)
from indichan.compress.lz78 import lz78_lengths
from indichan.core.channels import DelayChannel, ModuloAdditiveChannel
from indichan.core.priors import IIDPrior
from indichan.core.randomness import SharedRandomness
from indichan.errors import InvalidInputError, InvalidParameterError, ResourceLimitError
from indichan.ratefn.base import MetricMetadata, constant_log2_L
from indichan.ratefn.catalog import create_rate_function
from indichan.ratefn.models import MarkovKTModel, MemorylessModel


@pytest.fixture
def uniform():
    return IIDPrior.uniform(2)


@pytest.fixture
def noiseless():
    return ModuloAdditiveChannel.noiseless(2)


def test_threshold_reference_value():
    assert adaptive_threshold(0.0, 1024, 32, 1, 2.0 ** -10) == pytest.approx(52.0)
    assert adaptive_threshold(0.0, 1024, 32, 1, 2.0 ** -10, block_length=3, b0=3) == np.inf
    assert adaptive_threshold(1.0, 1024, 32, 2, 2.0 ** -10) == pytest.approx(52.0)
    with pytest.raises(InvalidParameterError):
        adaptive_threshold(0.0, 1024, 32, 1, 1.0)


def test_session_thresholds_respect_feedback_and_b0(uniform):
    metric = MixtureMetric(uniform)
    session = AdaptiveSession(n=64, K=4, epsilon=0.01, metric=metric, prior=uniform, d_fb=2)
    thr = session.thresholds(10, 20)
    assert thr.shape == (10,)
    assert np.all(np.isfinite(thr[0::2]))
    assert np.all(np.isinf(thr[1::2]))
    assert session.codebook_mode == EXPLICIT
    assert AdaptiveSession(64, 13, 0.01, metric, uniform).codebook_mode == SAMPLED


def test_session_rejects_bad_parameters(uniform):
    metric = MixtureMetric(uniform)
    with pytest.raises(InvalidParameterError):
        AdaptiveSession(n=64, K=0, epsilon=0.01, metric=metric, prior=uniform)
    with pytest.raises(InvalidParameterError):
        AdaptiveSession(n=64, K=4, epsilon=0.0, metric=metric, prior=uniform)


def test_fixed_code_noiseless_decoding(uniform, noiseless):
    wire = create_rate_function("wire")
    code = FixedRateCode.from_rate(24, 0.125, uniform, wire, SharedRandomness(11))
    assert code.M == 8
    assert code.rate == pytest.approx(0.125)
    rand = SharedRandomness(12)
    for message in range(1, code.M + 1):
        y = noiseless.transmit(fixed_encode(code, message), rand)
        assert fixed_decode(code, y) == message
    tie_code = FixedRateCode(24, 8, uniform, wire, SharedRandomness(11), decoder="randomized_tie")
    y = noiseless.transmit(tie_code.codeword(5), rand)
    assert fixed_decode(tie_code, y) == 5


def test_fixed_code_guards(uniform):
    wire = create_rate_function("wire")
    with pytest.raises(ResourceLimitError):
        FixedRateCode.from_rate(100, 0.5, uniform, wire, SharedRandomness(1))
    with pytest.raises(InvalidParameterError):
        FixedRateCode.from_rate(10, -0.1, uniform, wire, SharedRandomness(1))
    with pytest.raises(InvalidParameterError):
        FixedRateCode(10, 4, uniform, wire, SharedRandomness(1), decoder="bogus")
    code = FixedRateCode(10, 4, uniform, wire, SharedRandomness(1))
    with pytest.raises(InvalidInputError):
        code.codeword(5)
    with pytest.raises(InvalidInputError):
        fixed_decode(code, np.zeros(9, dtype=np.int64))


def test_codewords_depend_only_on_seed(uniform):
    wire = create_rate_function("wire")
    a = FixedRateCode(16, 4, uniform, wire, SharedRandomness(5))
    b = FixedRateCode(16, 4, uniform, wire, SharedRandomness(5))
    assert np.array_equal(a.codeword(3).data, b.codeword(3).data)
    other = fixed_encode(a, 3, rand=SharedRandomness(6))
    assert np.array_equal(other.data, FixedRateCode(16, 4, uniform, wire, SharedRandomness(6)).codeword(3).data)


def test_conditional_error_matches_closed_form(uniform):
    wire = create_rate_function("wire")
    code = FixedRateCode.from_rate(4, 0.5, uniform, wire, SharedRandomness(3))
    x = code.codeword(1)
    result = conditional_error(code, x, x, trials=4000, rand=SharedRandomness(4))
    assert result.p_ge == pytest.approx(1 / 16)
    assert result.exact == pytest.approx(1 - (15 / 16) ** 3)
    assert result.envelope == pytest.approx(0.25)
    assert result.exact <= result.envelope
    assert abs(result.estimate - result.exact) < 0.03
    tight = conditional_error(code, x, x, trials=10, rand=SharedRandomness(4), epsilon=0.01)
    assert tight.envelope == pytest.approx(0.0025)
    with pytest.raises(InvalidParameterError):
        conditional_error(code, x, x, trials=10, epsilon=0.0)


def test_conditional_error_decodes_fresh_codebooks(uniform):
    wire = create_rate_function("wire")
    code = FixedRateCode.from_rate(10, 0.3, uniform, wire, SharedRandomness(7))
    x = code.codeword(1)
    trials = 3000
    result = conditional_error(code, x, x, trials=trials, rand=SharedRandomness(8))
    assert code.M == 8
    assert result.exact == pytest.approx(1 - (1 - 2.0 ** -10) ** 7)
    assert result.envelope == pytest.approx(2.0 ** -7)
    assert result.exact <= result.envelope
    assert result.ci[0] <= result.envelope
    sigma = np.sqrt(result.exact * (1 - result.exact) / trials)
    assert abs(result.estimate - result.exact) <= 4 * sigma + 1.0 / trials

    # 两个翻转：R_emp = 1 − h(0.2)，p_ge = 112/1024
    modadd = create_rate_function("modadd")
    noisy_code = FixedRateCode.from_rate(10, 0.3, uniform, modadd, SharedRandomness(7))
    y = x.data.copy()
    y[[2, 6]] ^= 1
    noisy = conditional_error(noisy_code, x, y, trials=2000, rand=SharedRandomness(9))
    assert noisy.p_ge == pytest.approx(112 / 1024)
    assert noisy.exact == pytest.approx(1 - (1 - 112 / 1024) ** 7)
    assert abs(noisy.estimate - noisy.exact) < 0.05


def test_randomized_tie_halves_single_competitor_error():
    point = IIDPrior(np.array([1.0, 0.0]))
    wire = create_rate_function("wire")
    y = np.zeros(6, dtype=np.int64)
    strict = FixedRateCode(6, 2, point, wire, SharedRandomness(1))
    tied = FixedRateCode(6, 2, point, wire, SharedRandomness(1), decoder="randomized_tie")
    # 两个码字完全相同，发送的是编号更大的那个
    assert conditional_error(strict, y, y, trials=200).estimate == 1.0
    result = conditional_error(tied, y, y, trials=2000, rand=SharedRandomness(2))
    assert result.exact == 1.0
    assert abs(result.estimate - 0.5) < 0.05


@pytest.mark.slow
def test_codeword_marginal_matches_prior():
    prior = IIDPrior(np.array([0.7, 0.3]))
    wire = create_rate_function("wire")
    trials = 20000
    place = 2 ** np.arange(5, -1, -1)
    counts = np.zeros(64)
    for seed in range(trials):
        word = fixed_encode(FixedRateCode(6, 4, prior, wire, SharedRandomness(seed)), 2)
        counts[int(word.data @ place)] += 1
    rows = [np.array([(i >> (5 - b)) & 1 for b in range(6)]) for i in range(64)]
    expected = np.array([2.0 ** prior.log_mass(row) for row in rows]) * trials
    assert chisquare(counts, expected).pvalue > 1e-3


def test_adaptive_noiseless_run(uniform, noiseless):
    metric = MixtureMetric(uniform, modulo=True)
    session = AdaptiveSession(n=256, K=4, epsilon=1e-3, metric=metric, prior=uniform)
    transcript = run_adaptive(session, noiseless, SharedRandomness(21), seed=21)
    assert not transcript.error
    assert transcript.block_ends
    assert transcript.decoded_bits == 4 * len(transcript.block_ends)
    assert transcript.R_act == pytest.approx(transcript.decoded_bits / 256)
    assert np.all(np.diff(transcript.block_ends) > 0)
    for end, nxt in zip(transcript.block_ends, transcript.block_starts[1:]):
        assert nxt == end
    framework = framework_from_metadata(metric.metadata, 256, 1e-3, 1, 4)
    assert transcript.R_act >= framework.function("F")(transcript.R_emp)
    row = transcript.to_dict()
    assert row["codebook_mode"] == EXPLICIT and row["B"] == transcript.B


def test_adaptive_respects_feedback_interval(uniform, noiseless):
    metric = MixtureMetric(uniform, modulo=True)
    session = AdaptiveSession(n=200, K=3, epsilon=1e-3, metric=metric, prior=uniform, d_fb=2)
    transcript = run_adaptive(session, noiseless, SharedRandomness(8))
    assert transcript.block_ends
    for start, end in zip(transcript.block_starts, transcript.block_ends):
        assert (end - start - 1) % 2 == 0
    for end, nxt in zip(transcript.block_ends, transcript.block_starts[1:]):
        assert nxt == end + 1


def test_adaptive_never_crossing_decodes_nothing(uniform, noiseless):
    metric = MixtureMetric(uniform, modulo=True)
    session = AdaptiveSession(
        n=16, K=12, epsilon=0.01, metric=metric, prior=uniform, impostors=8, explicit_bits=4,
    )
    assert session.codebook_mode == SAMPLED
    transcript = run_adaptive(session, noiseless, SharedRandomness(2))
    assert transcript.block_ends == []
    assert transcript.B == 1
    assert transcript.R_act == 0.0
    assert not transcript.error


def test_adaptive_is_deterministic(uniform):
    channel = ModuloAdditiveChannel.bsc(0.05)
    metric = MixtureMetric(uniform, modulo=True)
    session = AdaptiveSession(n=128, K=3, epsilon=0.01, metric=metric, prior=uniform)
    a = run_adaptive(session, channel, SharedRandomness(40)).to_dict()
    b = run_adaptive(session, channel, SharedRandomness(40)).to_dict()
    assert a == b


def test_epoch_schedule():
    meta = MetricMetadata(log2_L=constant_log2_L(0.0), b0=0, f0=1.0, r_max=1.0)
    schedule = EpochSchedule(0.01, meta)
    assert [schedule.end(i) for i in range(4)] == [1, 3, 7, 15]
    assert schedule.epoch_epsilon(1) == pytest.approx(0.005)
    assert schedule.epoch_epsilon(3) == pytest.approx(0.01 / 18)
    assert schedule.b1 == 1
    assert schedule.bits(1) == int(np.ceil(np.sqrt(2 * schedule.k_h(1))))
    with pytest.raises(InvalidParameterError):
        schedule.epoch_epsilon(0)
    with pytest.raises(InvalidParameterError):
        EpochSchedule(0.01, MetricMetadata(log2_L=constant_log2_L(0.0)))


def test_doubling_delta_shrinks():
    meta = MetricMetadata(log2_L=constant_log2_L(0.0), b0=0, f0=1.0, r_max=1.0)
    for exact in (False, True):
        assert doubling_delta(2 ** 14 - 1, 0.01, meta, exact=exact) < doubling_delta(2 ** 8 - 1, 0.01, meta, exact=exact)
    with pytest.raises(InvalidParameterError):
        doubling_delta(1, 0.01, meta)


def test_doubling_epochs(uniform, noiseless):
    metric = MixtureMetric(uniform, modulo=True)
    records = list(run_doubling(metric, uniform, noiseless, SharedRandomness(9), 0.01, horizon=63))
    assert [r.end for r in records] == [3, 7, 15, 31, 63]
    assert [r.h for r in records] == [2, 4, 8, 16, 32]
    schedule = EpochSchedule(0.01, metric.metadata)
    assert [r.K for r in records] == [schedule.bits(r.epoch) for r in records]
    assert all(r.bound_holds for r in records)
    assert not records[-1].error
    assert np.all(np.diff([r.decoded_bits for r in records]) >= 0)


def test_doubling_without_horizon_is_lazy(uniform, noiseless):
    metric = MixtureMetric(uniform, modulo=True)
    stream = run_doubling(metric, uniform, noiseless, SharedRandomness(9), 0.01)
    assert [r.end for r in itertools.islice(stream, 3)] == [3, 7, 15]


def test_range_sums():
    terms = np.array([1.0, 2.0, 3.0, -np.inf, 5.0])
    out = range_sums(terms, np.array([1, 2, 5, 3]), np.array([3, 3, 4, 5]))
    assert out[:3].tolist() == [6.0, 5.0, 0.0]
    assert out[3] == -np.inf


def test_compression_metric_incompressibility():
    metric = CompressionMetric("lz", 2, horizon=64)
    x = np.zeros(64, dtype=np.int64)
    y = np.zeros(64, dtype=np.int64)
    assert metric.incompressibility(x, y, 64) == pytest.approx(64 - lz78_lengths(x, 2)[1])
    split = metric.log_metric(x, y, 0, 32) + metric.log_metric(x, y, 32, 64)
    assert split == pytest.approx(metric.log_metric(x, y, 0, 64))
    with pytest.raises(InvalidParameterError):
        CompressionMetric("lz", 2, y_size=3)


def test_metric_free_functions(uniform):
    x = np.array([0, 1, 1, 0, 1, 0, 0, 1])
    # 已知无噪模型：每个符号 1 比特
    assert causal_metric(MemorylessModel.identity(2), uniform, x, x, 0, 8) == pytest.approx(8.0)
    assert causal_metric(MemorylessModel.identity(2), uniform, x, x, 3, 8) == pytest.approx(5.0)
    zeros = np.zeros(2, dtype=np.int64)
    assert mixture_metric(uniform, zeros, zeros, 0, 2) == pytest.approx(np.log2(1.5))
    assert mixture_metric(uniform, zeros, zeros, 0, 2, modulo=True) == pytest.approx(np.log2(1.5))
    long_zeros = np.zeros(64, dtype=np.int64)
    assert compression_metric("lz", long_zeros, long_zeros, 0, 64) == pytest.approx(
        64 - lz78_lengths(long_zeros, 2)[1]
    )


@pytest.mark.parametrize("order", [1, 2])
def test_markov_metric_expectation_bounded_by_delay(uniform, order):
    metric = CausalMetric(MarkovKTModel(2, order=order), uniform)
    assert metric.metadata.log2_L(16) == pytest.approx(order)
    rng = np.random.default_rng(40 + order)
    j = 3
    for span in (1, 2, 6):
        k = j + span
        prefix = rng.integers(0, 2, size=j)
        y = rng.integers(0, 2, size=k)
        total = 0.0
        for tail in itertools.product((0, 1), repeat=span):
            x = np.concatenate([prefix, tail]).astype(np.int64)
            total += 2.0 ** (metric.log_metric(x, y, j, k) - span)
        # E_Q[ψ | x^j] ≤ |X|^D
        assert total <= 2.0 ** order + 1e-9


def test_markov_mixture_metric_rejects_modulo(uniform):
    with pytest.raises(InvalidParameterError):
        MixtureMetric(uniform, modulo=True, order=1)
    assert MixtureMetric(uniform, order=2).metadata.log2_L(64) == pytest.approx(2.0)


def test_adaptive_delay_channel_with_state_mixture(uniform):
    metric = MixtureMetric(uniform, order=1)
    session = AdaptiveSession(n=512, K=4, epsilon=1e-3, metric=metric, prior=uniform)
    transcript = run_adaptive(session, DelayChannel(2), SharedRandomness(23), seed=23)
    assert not transcript.error
    assert transcript.R_act > 0
    framework = framework_from_metadata(metric.metadata, 512, 1e-3, 1, 4)
    assert transcript.R_act >= framework.function("F")(transcript.R_emp)


@pytest.mark.parametrize("kind", ["lz", "clz"])
def test_compression_metric_tail_bound(kind):
    n = 10
    metric = CompressionMetric(kind, 2, horizon=n)
    log_L = metric.metadata.log2_L(n)
    rng = np.random.default_rng(12)
    y = rng.integers(0, 2, size=n)
    prefix = rng.integers(0, 2, size=4)
    for j in (0, 4):
        levels = np.array([
            metric.log_metric(np.concatenate([prefix[:j], tail]).astype(np.int64), y, j, n)
            for tail in itertools.product((0, 1), repeat=n - j)
        ])
        for level in np.unique(levels):
            # Q{log₂ψ ≥ ℓ} ≤ L·2^{−ℓ}
            assert np.log2(np.mean(levels >= level)) <= log_L - level + 1e-9


def test_doubling_rejects_redrawn_outputs(uniform):
    channel = ModuloAdditiveChannel.bsc(0.1, exact_fraction=True)
    engine = BlockEngine(4, uniform, channel, SharedRandomness(3))
    with pytest.raises(InvalidParameterError):
        engine.extend(8)
    metric = MixtureMetric(uniform, modulo=True)
    with pytest.raises(InvalidParameterError):
        next(run_doubling(metric, uniform, channel, SharedRandomness(3), 0.01))
