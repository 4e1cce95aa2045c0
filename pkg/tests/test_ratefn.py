import numpy as np
import pytest

from indichan.core.channels import ModuloAdditiveChannel
from indichan.core.priors import IIDPrior, MarkovPrior
from indichan.core.randomness import SharedRandomness
from indichan.empirics.distributions import empirical_distribution, ml_probability_conditional_memoryless
from indichan.empirics.types import all_sequences
from indichan.errors import InvalidParameterError, UnknownIdError
from indichan.ratefn.base import RateFunctionRegistry, RegistryEntry, rate_registry
from indichan.ratefn.catalog import (
    EMIRate,
    MaxRate,
    OffsetRate,
    compression_rate,
    create_rate_function,
    eMI_ML_rate,
    eMI_rate,
    markov_state_rate,
    modulo_additive_rate,
    type_based_rate,
    type_rate_overhead,
)
from indichan.ratefn.conversion import exceedance_probability, metric_to_rate, rate_from_exceedance
from indichan.ratefn.goodput import (
    SystemTrace,
    goodput_ccdf_check,
    goodput_function,
    goodput_redundancy,
    random_coding_correct_probability,
    random_coding_goodput,
)
from indichan.ratefn.models import (
    KTMixtureModel,
    MarkovKTModel,
    MemorylessModel,
    ModuloKTModel,
    conditional_form_rate,
    occurrence_rank,
)


def test_registry_contains_catalog():
    ids = rate_registry.ids()
    for rate_id in ("emi", "emi-ml", "markov", "modadd", "lz", "clz", "mimo", "kt", "modadd-kt", "markov-kt"):
        assert rate_id in ids
    assert rate_registry.get("markov-kt").adaptive
    assert [e.rate_id for e in rate_registry.entries("lz")] == ["clz", "lz"]
    assert rate_registry.entries("no-such-rate") == []


def test_registry_rejects_duplicates_and_unknown_ids():
    registry = RateFunctionRegistry()
    entry = RegistryEntry("emi", lambda **_: EMIRate())
    registry.register(entry)
    with pytest.raises(ValueError):
        registry.register(entry)
    with pytest.raises(UnknownIdError):
        registry.get("nope")
    with pytest.raises(UnknownIdError):
        create_rate_function("nope")
    assert registry.entries()[0].to_dict()["id"] == "emi"


def test_modulo_additive_rate_values():
    x = np.zeros(8, dtype=np.int64)
    y = np.array([1, 1, 0, 0, 0, 0, 0, 0])
    assert modulo_additive_rate(x, y, 2) == pytest.approx(0.1887, abs=1e-4)
    rng = np.random.default_rng(3)
    x = rng.integers(0, 4, size=50)
    assert modulo_additive_rate(x, x, 4) == pytest.approx(2.0)
    assert create_rate_function("modadd", size=4)(x, x) == pytest.approx(2.0)


def test_emi_ml_matches_emi_for_matching_type():
    x = np.array([0, 1, 0, 1, 1, 0])
    y = np.array([0, 1, 1, 1, 0, 0])
    uniform = IIDPrior.uniform(2)
    assert eMI_ML_rate(uniform, x, y) == pytest.approx(eMI_rate(x, y))
    skewed = IIDPrior(np.array([0.9, 0.1]))
    assert eMI_ML_rate(skewed, x, y) > eMI_rate(x, y)


def test_emi_ml_rejects_markov_prior():
    prior = MarkovPrior(np.array([[0.9, 0.1], [0.2, 0.8]]), order=1)
    with pytest.raises(InvalidParameterError):
        eMI_ML_rate(prior, [0, 1], [0, 1])


def test_type_based_rate_dominates_emi_ml():
    rng = np.random.default_rng(10)
    prior = IIDPrior.uniform(2)
    for _ in range(10):
        x = rng.integers(0, 2, size=12)
        y = rng.integers(0, 2, size=12)
        # log₂|T_{x|y}| ≤ n·Ĥ(x|y)
        assert type_based_rate(prior, x, y) >= eMI_ML_rate(prior, x, y) - 1e-9
    assert type_rate_overhead(2, 2, 100, 0.01, exact=False) >= type_rate_overhead(2, 2, 100, 0.01)


def test_markov_rate_sees_delay_channel():
    rng = np.random.default_rng(5)
    x = rng.integers(0, 2, size=400)
    y = np.r_[0, x[:-1]]
    memoryless = eMI_rate(x, y)
    with_state = markov_state_rate(x, y, order=1, form="ml*")
    assert memoryless < 0.1
    assert with_state > 0.9
    assert markov_state_rate(x, y, order=1, form="ml") >= with_state - 0.05
    with pytest.raises(InvalidParameterError):
        markov_state_rate(x, y, order=1, form="bogus")


def test_markov_mixture_rate_sees_delay_channel():
    rng = np.random.default_rng(6)
    x = rng.integers(0, 2, size=2000)
    y = np.r_[0, x[:-1]]
    prior = IIDPrior.uniform(2)
    assert create_rate_function("markov-kt", prior=prior, order=1)(x, y) > 0.8
    assert create_rate_function("kt", prior=prior)(x, y) < 0.2
    model = MarkovKTModel(2, order=2)
    assert model.delay == 2
    assert model.letter_log_probs(x[:50], y[:50]).shape == (50,)
    with pytest.raises(InvalidParameterError):
        MarkovKTModel(2, order=-1)


def test_conditional_form_with_ml_table_is_emi_ml():
    rng = np.random.default_rng(31)
    prior = IIDPrior(np.array([0.3, 0.7]))
    for _ in range(5):
        x = rng.integers(0, 2, size=30)
        y = rng.integers(0, 2, size=30)
        table = empirical_distribution(x, y).conditional().T
        table[table.sum(axis=1) == 0] = 0.5
        model = MemorylessModel(table)
        expected = eMI_ML_rate(prior, x, y)
        assert conditional_form_rate(model, prior, x, y) == pytest.approx(expected, abs=1e-9)
        ml = (ml_probability_conditional_memoryless(x, y) - prior.log_mass(x)) / 30
        assert ml == pytest.approx(expected, abs=1e-9)


def test_conditional_form_rates_sum_to_one():
    n = 6
    rows = all_sequences(2, n)
    rng = np.random.default_rng(2)
    y = rng.integers(0, 2, size=n)
    prior = IIDPrior(np.array([0.3, 0.7]))
    for rate_fn in (
        create_rate_function("kt", prior=prior),
        create_rate_function("modadd-kt", prior=prior),
        create_rate_function("cond", prior=prior, model="bsc", p=0.1),
    ):
        total = sum(2.0 ** (prior.log_mass(row) + n * rate_fn(row, y)) for row in rows)
        assert total == pytest.approx(1.0)


def test_kt_mixture_probabilities():
    model = KTMixtureModel(2, use_y=False)
    assert model.log_prob([0], [0]) == pytest.approx(np.log2(0.5))
    assert model.log_prob([0, 0], [0, 0]) == pytest.approx(np.log2(3 / 8))
    assert model.log_prob([0, 1], [0, 0]) == pytest.approx(np.log2(1 / 8))
    z = np.array([0, 0, 1])
    y = np.array([1, 0, 1])
    x = np.mod(y - z, 2)
    assert ModuloKTModel(2).log_prob(x, y) == pytest.approx(model.log_prob(z, z))


def test_occurrence_rank():
    assert occurrence_rank(np.array([3, 1, 3, 3, 1])).tolist() == [0, 0, 1, 2, 1]
    assert occurrence_rank(np.array([], dtype=np.int64)).size == 0


def test_memoryless_model_validation():
    with pytest.raises(InvalidParameterError):
        MemorylessModel(np.array([[0.5, 0.6], [0.5, 0.5]]))
    assert MemorylessModel.identity(3).log_prob([0, 2], [0, 2]) == pytest.approx(0.0)
    assert MemorylessModel.identity(3).log_prob([0, 1], [0, 2]) == -np.inf


def test_metric_path_ends_at_rate():
    rng = np.random.default_rng(8)
    n = 120
    x = rng.integers(0, 2, size=n)
    y = np.mod(x + (rng.random(n) < 0.1), 2)
    for rate_id in ("kt", "modadd-kt", "lz", "clz"):
        rate_fn = create_rate_function(rate_id, n=n)
        metric = rate_fn.metric()
        assert metric.log_metric(x, y, 0, n) == pytest.approx(n * rate_fn(x, y)), rate_id
        path = metric.log_metric_path(x, y, 0, n)
        assert path.shape == (n,)
        assert path[-1] == pytest.approx(metric.log_metric(x, y, 0, n))


def test_causal_metric_is_additive():
    rng = np.random.default_rng(9)
    x = rng.integers(0, 2, size=40)
    y = rng.integers(0, 2, size=40)
    metric = create_rate_function("cond", model="bsc", p=0.2).metric()
    whole = metric.log_metric(x, y, 0, 40)
    assert whole == pytest.approx(metric.log_metric(x, y, 0, 15) + metric.log_metric(x, y, 15, 40))
    assert metric.metadata.b0 == 0
    assert metric.metadata.f0 == pytest.approx(1.0)


def test_compression_rate_on_clean_channel():
    x = np.random.default_rng(1).integers(0, 2, size=2000)
    assert compression_rate("lz", x, x, 2) > 0.5
    assert compression_rate("clz", x, x, 2) > 0.0
    with pytest.raises(InvalidParameterError):
        compression_rate("zip", x, x, 2)


def test_simple_rates():
    assert create_rate_function("wire")([0, 1, 1], [0, 1, 1]) == 1.0
    assert create_rate_function("wire")([0, 1, 1], [0, 1, 0]) == 0.0
    onoff = create_rate_function("onoff")
    assert onoff([1, 0, 1, 1], [1, 0, 1, 1]) == pytest.approx(np.log2(8.5) / 4)
    assert onoff([1, 0, 1, 1], [1, 0, 0, 1]) == pytest.approx(-0.25)


def test_offset_and_max_rates():
    x, y = [0, 1, 0, 1], [0, 1, 1, 1]
    emi = create_rate_function("emi")
    modadd = create_rate_function("modadd")
    assert OffsetRate(emi, -0.25)(x, y) == pytest.approx(emi(x, y) - 0.25)
    combined = MaxRate([emi, modadd])
    assert combined(x, y) == pytest.approx(max(emi(x, y), modadd(x, y)))
    with pytest.raises(InvalidParameterError):
        MaxRate([])
    with pytest.raises(InvalidParameterError):
        create_rate_function("offset")


def test_rate_from_exceedance_edges():
    rate, approx, capped = rate_from_exceedance(0.0, 10, 0.1, 1.0)
    assert (rate, capped) == (1.0, True)
    rate, _, capped = rate_from_exceedance(1.0, 10, 0.1, 1.0)
    assert rate == 0.0 and not capped
    rate, approx, _ = rate_from_exceedance(2.0 ** -6, 10, 0.1, 1.0)
    assert rate == pytest.approx(np.log2(np.log(0.9) / np.log(1 - 2.0 ** -6) + 1) / 10)
    assert approx == pytest.approx(np.log2(0.1 * 64) / 10)
    with pytest.raises(InvalidParameterError):
        rate_from_exceedance(0.1, 10, 1.0, 1.0)


def test_exceedance_probability_exhaustive_and_sampled():
    prior = IIDPrior.uniform(2)
    wire = create_rate_function("wire")
    x = np.array([1, 0, 1, 1, 0])
    p, method, _, _ = exceedance_probability(lambda a, b: -wire(a, b), prior, x, x)
    assert method == "exhaustive"
    assert p == pytest.approx(31 / 32)
    p, method, ci, trials = exceedance_probability(
        lambda a, b: -wire(a, b), prior, x, x, method="monte_carlo", trials=400, rand=SharedRandomness(3)
    )
    assert method == "monte_carlo" and trials == 400
    assert ci[0] <= p <= ci[1]
    result = metric_to_rate(lambda a, b: wire(a, b), prior, x, x, 0.1)
    assert result.capped and result.rate == pytest.approx(1.0)


def test_random_coding_correct_probability():
    assert random_coding_correct_probability(0.3, 0.7, 1) == pytest.approx(1.0)
    assert random_coding_correct_probability(0.0, 1.0, 2) == pytest.approx(0.5)
    assert random_coding_correct_probability(1.0, 0.0, 8) == pytest.approx(1.0)


def test_goodput_function_averages_matching_traces():
    traces = [
        SystemTrace.of([0, 1], [0, 1], 0.5, False),
        SystemTrace.of([0, 1], [0, 1], 0.5, True),
        SystemTrace.of([1, 1], [0, 1], 1.0, False),
    ]
    assert goodput_function(traces, [0, 1], [0, 1]) == pytest.approx(0.25)
    assert np.isnan(goodput_function(traces, [0, 0], [0, 0]))


def test_goodput_ccdf_bound_holds():
    prior = IIDPrior.uniform(2)
    y = np.array([0, 1, 1, 0, 1])
    emi = create_rate_function("emi")
    result = goodput_ccdf_check(emi, prior, y, M=4)
    assert result["holds"]
    assert goodput_redundancy(100) == pytest.approx(np.log2(np.e) / 100)


def test_random_coding_goodput_exhaustive():
    prior = IIDPrior.uniform(2)
    wire = create_rate_function("wire")
    x = np.array([0, 1, 1])
    # 另一码字与 x 相同的概率 1/8，平局时一半机会猜对
    assert random_coding_goodput(wire, prior, x, x, 2) == pytest.approx((1.0 / 3) * (15.0 / 16))
    assert random_coding_goodput(wire, prior, x, np.array([1, 1, 1]), 2) == pytest.approx((1.0 / 3) * (7.0 / 16))


@pytest.mark.slow
def test_emi_converges_on_bsc():
    prior = IIDPrior.uniform(2)
    channel = ModuloAdditiveChannel.bsc(0.1)
    values = []
    for seed in range(5):
        rand = SharedRandomness(seed)
        x = prior.sample(10_000, rand.derive("x"))
        y = channel.transmit(x, rand.derive("channel"))
        values.append(eMI_rate(x, y))
    assert np.mean(values) == pytest.approx(0.531, abs=0.01)
