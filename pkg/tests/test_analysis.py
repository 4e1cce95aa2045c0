import math

import numpy as np
import pytest
from pydantic import ValidationError

from indichan.analysis.bounds import (
    ab_bound,
    achievability_gap,
    conditional_form_converse,
    converse_delta_L,
    dirichlet_regret_bound,
    modadd_converse_lengths,
    symbol_constant,
    theorem_framework_params,
)
from indichan.analysis.fsm import FSMachine, fsm_dominance, fsm_probability
from indichan.analysis.nml import max_mixture_regret, mixture_regret, nml_constant
from indichan.analysis.redundancy import (
    ccdf_sup,
    chernoff_L,
    intrinsic_redundancy,
    max_rate_price,
    necessary_condition,
)
from indichan.analysis.report import OverheadReport, emit_report, read_report_csv
from indichan.analysis.stats import normal_interval, wilson_interval
from indichan.core.alphabet import SymbolSequence
from indichan.core.priors import IIDPrior
from indichan.core.randomness import SharedRandomness
from indichan.errors import InvalidParameterError, ResourceLimitError
from indichan.ratefn.catalog import OffsetRate, create_rate_function, modulo_additive_rate


@pytest.fixture
def uniform():
    return IIDPrior.uniform(2)


def test_ccdf_sup_picks_best_level():
    values = np.array([1.0, 0.5, 0.5, -np.inf])
    weights = np.full(4, 0.25)
    value, r_star, mass = ccdf_sup(values, weights, 2)
    assert value == pytest.approx(np.log2(0.75) / 2 + 0.5)
    assert r_star == 0.5 and mass == pytest.approx(0.75)
    assert ccdf_sup(np.array([np.inf, 0.0]), np.array([0.5, 0.5]), 2)[0] == np.inf
    assert ccdf_sup(np.array([-np.inf]), np.array([1.0]), 2)[0] == -np.inf


def test_conditional_form_rates_have_no_redundancy(uniform):
    for rate_id in ("kt", "modadd-kt"):
        report = intrinsic_redundancy(create_rate_function(rate_id), uniform, 3)
        assert report.entries["mu_Q"].method == "exhaustive"
        assert report["mu_Q"] <= 1e-12


def test_markov_mixture_has_no_redundancy(uniform):
    for rate_fn in (
        create_rate_function("kt", prior=uniform),
        create_rate_function("modadd-kt", prior=uniform),
        create_rate_function("markov-kt", prior=uniform, order=1),
    ):
        assert intrinsic_redundancy(rate_fn, uniform, 6)["mu_Q"] <= 1e-12


@pytest.mark.parametrize("n", [3, 4, 5, 6])
def test_emi_redundancy_within_type_count(uniform, n):
    mu = intrinsic_redundancy(create_rate_function("emi"), uniform, n)["mu_Q"]
    assert 0 <= mu <= 4 * np.log2(n + 1) / n


def test_wire_redundancy_is_zero(uniform):
    assert intrinsic_redundancy(create_rate_function("wire"), uniform, 3)["mu_Q"] == pytest.approx(0.0)


def test_empirical_entropy_rate_has_positive_redundancy(uniform):
    report = intrinsic_redundancy(create_rate_function("modadd"), uniform, 3)
    # z 为常数时 R = 1，质量 2/8
    assert report["mu_Q"] >= 1.0 / 3 - 1e-12
    assert report.metadata["y_star"] is not None


def test_redundancy_guard(uniform):
    with pytest.raises(ResourceLimitError):
        intrinsic_redundancy(create_rate_function("wire"), uniform, 30, method="exhaustive")
    with pytest.raises(InvalidParameterError):
        intrinsic_redundancy(create_rate_function("wire"), uniform, 3, method="bogus")


def test_sampled_redundancy_is_reported_as_lower_bound(uniform):
    report = intrinsic_redundancy(
        create_rate_function("kt"), uniform, 8, method="monte_carlo", trials=200, rand=SharedRandomness(3)
    )
    entry = report.entries["mu_Q"]
    assert entry.method == "monte_carlo"
    assert entry.trials == 200
    assert entry.inputs["bound"] == "lower"
    assert entry.ci_low <= entry.value <= entry.ci_high


def test_max_rate_price(uniform):
    result = max_rate_price([create_rate_function("kt"), create_rate_function("wire")], uniform, 3)
    assert result["holds"]
    assert result["mu_max"] <= result["mu_each_max"] + 1.0 / 3 + 1e-12


def test_chernoff_L_for_conditional_form(uniform):
    y = SymbolSequence.from_string("0110")
    report = chernoff_L(create_rate_function("kt"), lambda t: t, uniform, y)
    assert report["L_Fn"] == pytest.approx(1.0)
    assert report["mu_bound"] == pytest.approx(0.0, abs=1e-12)
    sampled = chernoff_L(
        create_rate_function("kt"), lambda t: t, uniform, y, method="monte_carlo", trials=300, rand=SharedRandomness(5)
    )
    assert sampled.entries["mu_bound"].method == "monte_carlo"


def test_necessary_condition(uniform):
    wire = create_rate_function("wire")
    assert necessary_condition(wire, uniform, 3, 0.0)["holds"]
    boosted = necessary_condition(OffsetRate(wire, 0.5), uniform, 3, 0.0)
    assert not boosted["holds"]
    assert boosted["worst_ratio"] == pytest.approx(2.0 ** 1.5)


def test_achievability_gap_values():
    assert achievability_gap(1e-6) == pytest.approx(19.93, abs=0.01)
    assert achievability_gap(0.25) == pytest.approx(1.585, abs=1e-3)
    assert achievability_gap(0.5) == pytest.approx(0.0)
    with pytest.raises(InvalidParameterError):
        achievability_gap(0.0)


def test_ab_bound():
    K, value, bound = ab_bound(100.0, 1.0)
    assert K == 10
    assert value == pytest.approx(20.0)
    assert value <= bound
    with pytest.raises(InvalidParameterError):
        ab_bound(1.0, 2.0)


def test_conditional_form_converse_value():
    assert conditional_form_converse(1.0, 100, 0.01) == pytest.approx(-0.0818, abs=1e-4)
    with pytest.raises(InvalidParameterError):
        conditional_form_converse(1.0, 1, 0.01)


def test_converse_lengths():
    assert converse_delta_L(1024, 0.001, 2) == pytest.approx(10.95, abs=0.05)
    n = 8
    empirical = modadd_converse_lengths(lambda z: modulo_additive_rate(z, np.zeros_like(z), 2), n, 0.01)
    assert empirical.feasible
    everything = modadd_converse_lengths(lambda z: 1.0, n, 0.01)
    assert not everything.feasible
    assert everything.to_dict()["feasible"] is False


def test_symbol_constant_and_regret_bound():
    assert symbol_constant(2) == pytest.approx(math.log2(math.pi), abs=1e-4)
    assert symbol_constant(2) == pytest.approx(1.6515, abs=1e-4)
    for n in (4, 8):
        assert max_mixture_regret(2, n) <= dirichlet_regret_bound(2, 1, n)
    z = np.array([0, 1, 0, 1, 1, 0])
    assert max_mixture_regret(2, 6, z) <= dirichlet_regret_bound(2, 2, 6)


def test_nml_constant():
    assert nml_constant(2, 2) == pytest.approx(math.log2(2.5), abs=1e-4)
    assert nml_constant(2, 6) <= max_mixture_regret(2, 6) + 1e-12
    assert mixture_regret([0, 0], None, 2) == pytest.approx(-math.log2(3 / 8))


def test_framework_params_degenerate_and_optimal_K():
    degenerate = theorem_framework_params(0.0, 0, 1.0, 1.0, 2, 0.5, d_fb=4)
    assert degenerate["c_n"] == pytest.approx(0.0)
    assert degenerate["b1"] == 7
    report = theorem_framework_params(0.0, 0, 1.0, 1.0, 1024, 2.0 ** -10)
    assert report["c_n"] == pytest.approx(20.0)
    assert report["k_n"] == pytest.approx(21.0)
    assert report["K_opt"] == math.ceil(math.sqrt(1024 * 21))
    assert report["delta_n"] == pytest.approx(3 * math.sqrt(21 / 1024))
    F = report.function("F")
    K = report["K"]
    assert F(1.0) == pytest.approx(1.0 / (1 + 21 / K) - K / 1024)
    assert report["delta_K"] <= report["delta_n"] + 1e-12
    with pytest.raises(InvalidParameterError):
        theorem_framework_params(0.0, 0, 1.0, 1.0, 1024, 1.5)


def test_fsm_validation_and_probability():
    with pytest.raises(InvalidParameterError):
        FSMachine(np.full((1, 2, 2), 0.6), np.zeros((1, 2, 2), dtype=np.int64))
    with pytest.raises(InvalidParameterError):
        FSMachine(np.full((1, 2, 2), 0.5), np.ones((1, 2, 2), dtype=np.int64))
    machine = FSMachine.uniform(2, 2)
    assert fsm_probability(machine, [0, 1, 1, 0], [1, 1, 0, 0]) == pytest.approx(-4.0)


def test_fsm_dominance_bounds_hold():
    rng = np.random.default_rng(14)
    for seed in range(5):
        machine = FSMachine.random(4, 2, 2, SharedRandomness(seed))
        x = rng.integers(0, 2, size=300)
        y = rng.integers(0, 2, size=300)
        result = fsm_dominance(machine, x, y)
        assert result["phrase_holds"]
        assert result["lz_holds"]
        assert result["excess"] >= 0


@pytest.mark.slow
def test_fsm_dominance_on_long_sequences():
    rng = np.random.default_rng(15)
    for seed in range(20):
        machine = FSMachine.random(8, 2, 2, SharedRandomness(100 + seed))
        x = rng.integers(0, 2, size=4096)
        y = rng.integers(0, 2, size=4096)
        result = fsm_dominance(machine, x, y)
        assert result["phrase_holds"]
        assert result["lz_holds"]


def test_report_json_round_trip(tmp_path):
    report = OverheadReport(title="demo")
    report.add("a", 1.25, "x+y", {"n": 4})
    report.add("unbounded", float("inf"))
    report.add("sampled", 0.5, method="monte_carlo", ci=(0.4, 0.6), trials=100)
    restored = OverheadReport.from_json(report.to_json())
    assert restored.scalars() == report.scalars()
    assert restored.entries["sampled"].ci_low == 0.4
    path = emit_report(report, "json", str(tmp_path / "out" / "report.json"))
    assert OverheadReport.from_json(open(path, encoding="utf-8").read()).title == "demo"


def test_report_csv_round_trip(tmp_path):
    report = OverheadReport()
    report.add("third", 1.0 / 3)
    report.add("neg_inf", float("-inf"))
    path = emit_report(report, "csv", str(tmp_path / "report.csv"))
    values = read_report_csv(path)
    assert values["third"] == 1.0 / 3
    assert values["neg_inf"] == float("-inf")
    assert list(report.to_frame()["name"]) == ["third", "neg_inf"]
    with pytest.raises(InvalidParameterError):
        emit_report(report, "xml", str(tmp_path / "report.xml"))


def test_report_entry_validation():
    with pytest.raises(ValidationError):
        OverheadReport().add("bad", 0.1, method="monte_carlo")
    with pytest.raises(InvalidParameterError):
        OverheadReport().function("F")


def test_interval_helpers():
    assert wilson_interval(0, 0) == (0.0, 1.0)
    lo, hi = wilson_interval(5, 100)
    assert lo < 0.05 < hi
    assert normal_interval([2.0]) == (2.0, 2.0)
    lo, hi = normal_interval([1.0, 2.0, 3.0])
    assert lo < 2.0 < hi
