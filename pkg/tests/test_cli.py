import json

import pytest
from pydantic import ValidationError

from indichan.analysis.report import OverheadReport, read_report_csv
from indichan.cli.experiment import ExperimentConfig, ExperimentRunner, list_registry, run_experiment, summarize
from indichan.cli.main import main, read_symbols
from indichan.errors import InvalidInputError, InvalidParameterError, UnknownIdError
from indichan.infrastructure.utils.json_io import read_json, read_jsonl


def _fixed_config(tmp_path, **overrides):
    values = dict(
        scheme="fixed",
        rate_fn="wire",
        channel={"kind": "noiseless"},
        n=16,
        rate=0.125,
        seeds=[1, 2, 3],
        output=str(tmp_path / "fixed.jsonl"),
        max_workers=2,
    )
    values.update(overrides)
    return ExperimentConfig(**values)


def test_experiment_config_validation():
    with pytest.raises(ValidationError):
        ExperimentConfig(epsilon=1.5)
    with pytest.raises(ValidationError):
        ExperimentConfig(seeds=[])
    with pytest.raises(UnknownIdError):
        ExperimentConfig(rate_fn="no-such-rate")
    with pytest.raises(ValidationError):
        ExperimentConfig(channel={"kind": "teleporter"})


def test_doubling_rejects_exact_fraction_channel():
    channel = {"kind": "bsc", "p": 0.1, "exact_fraction": True}
    with pytest.raises(ValidationError):
        ExperimentConfig(scheme="doubling", rate_fn="modadd-kt", channel=channel)
    config = ExperimentConfig(scheme="adaptive", rate_fn="modadd-kt", channel=channel)
    assert config.channel["exact_fraction"]


def test_seed_list_is_derived_from_master_seed():
    a = ExperimentConfig(seed_count=4, master_seed=9).seed_list()
    b = ExperimentConfig(seed_count=4, master_seed=9).seed_list()
    assert a == b and len(a) == 4
    assert ExperimentConfig(seed_count=4, master_seed=10).seed_list() != a
    assert ExperimentConfig(seeds=[7, 3]).seed_list() == [7, 3]


def test_runner_needs_metric_for_adaptive():
    with pytest.raises(InvalidParameterError):
        ExperimentRunner(ExperimentConfig(scheme="adaptive", rate_fn="emi"))


def test_fixed_experiment_is_deterministic(tmp_path):
    first = run_experiment(_fixed_config(tmp_path))
    second = run_experiment(_fixed_config(tmp_path, output=str(tmp_path / "again.jsonl"), max_workers=1))
    assert first["rows"] == second["rows"]
    assert [r["seed"] for r in first["rows"]] == [1, 2, 3]
    assert read_jsonl(first["path"]) == first["rows"]
    summary = read_json(first["summary_path"])
    assert summary["summary"]["runs"] == 3
    assert "created_at" in summary["metadata"]
    assert summary["config"]["scheme"] == "fixed"


def test_adaptive_experiment_rows(tmp_path):
    config = ExperimentConfig(
        scheme="adaptive",
        rate_fn="modadd-kt",
        channel={"kind": "noiseless"},
        n=128,
        K=3,
        epsilon=0.01,
        seeds=[4, 5],
        output=str(tmp_path / "adaptive.jsonl"),
    )
    result = run_experiment(config)
    for row in result["rows"]:
        assert not row["error"]
        assert row["guarantee"] == (row["R_act"] >= row["F_n"] - 1e-12)
    assert "guarantee_failure_fraction" in result["summary"]


@pytest.mark.slow
def test_doubling_experiment_rows(tmp_path):
    config = ExperimentConfig(
        scheme="doubling",
        rate_fn="modadd-kt",
        channel={"kind": "bsc", "p": 0.02},
        n=255,
        epsilon=0.01,
        seeds=[1],
        output=str(tmp_path / "doubling.jsonl"),
    )
    row = run_experiment(config)["rows"][0]
    assert [e["end"] for e in row["epochs"]][-1] == 255
    assert row["delta"] > 0


def test_summarize_counts_errors():
    rows = [
        {"error": False, "R_act": 0.5, "R_emp": 0.6},
        {"error": True, "R_act": 0.0, "R_emp": float("-inf")},
    ]
    summary = summarize(rows)
    assert summary["error_fraction"] == 0.5
    assert summary["mean_R_act"] == pytest.approx(0.25)
    assert summary["mean_R_emp"] == pytest.approx(0.6)
    assert summary["error_ci"][0] < 0.5 < summary["error_ci"][1]


def test_list_registry_filter():
    ids = [e["id"] for e in list_registry()]
    assert ids == sorted(ids)
    assert "kt" in ids
    assert list_registry("zzz") == []


def test_main_list(capsys):
    assert main(["list", "--contains", "lz"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert [json.loads(line)["id"] for line in lines] == ["clz", "lz"]


def test_main_simulate_adaptive(tmp_path, capsys):
    out = tmp_path / "run.jsonl"
    code = main([
        "simulate-adaptive", "--rate-fn", "modadd-kt", "--channel", "noiseless", "--n", "96", "--K", "3",
        "--seeds", "1,2", "--max-workers", "1", "--output", str(out),
    ])
    assert code == 0
    assert "runs=2" in capsys.readouterr().out
    assert len(read_jsonl(str(out))) == 2


def test_main_reads_key_value_file(tmp_path):
    params = tmp_path / "fixed.txt"
    out = tmp_path / "fixed.jsonl"
    params.write_text(
        f"rate-fn=wire\nchannel=noiseless\nn=16\nrate=0.125\nseeds=3,4\noutput={out}\n", encoding="utf-8"
    )
    assert main(["simulate-fixed", "--config-file", str(params)]) == 0
    assert [r["seed"] for r in read_jsonl(str(out))] == [3, 4]


def test_main_params_report(tmp_path):
    out = tmp_path / "params.csv"
    code = main(["params", "--n", "1024", "--epsilon", str(2.0 ** -10), "--format", "csv", "--output", str(out)])
    assert code == 0
    values = read_report_csv(str(out))
    assert values["c_n"] == pytest.approx(20.0)
    assert values["achievability_gap"] == pytest.approx(9.9986, abs=1e-3)


def test_main_params_for_rate_function(capsys):
    assert main(["params", "--rate-fn", "kt", "--n", "512"]) == 0
    report = OverheadReport.from_json(capsys.readouterr().out)
    assert "delta_doubling" in report
    assert report["K"] >= 1


def test_main_redundancy(tmp_path):
    out = tmp_path / "red.json"
    assert main(["redundancy", "--rate-fn", "wire", "--n", "3", "--output", str(out)]) == 0
    report = OverheadReport.from_json(out.read_text(encoding="utf-8"))
    assert report["mu_Q"] == pytest.approx(0.0)


def test_main_mimo_params_from_csv(tmp_path, capsys):
    table = tmp_path / "mimo.csv"
    table.write_text("t,r,d,u,n,epsilon,omega\n2,2,2,1,100000,0.001,5.0\n", encoding="utf-8")
    assert main(["mimo-params", "--from-csv", str(table), "--R0", "5"]) == 0
    report = OverheadReport.from_json(capsys.readouterr().out)
    assert report["saturation"] == pytest.approx(654.56, rel=5e-3)


def test_main_compress(tmp_path, capsys):
    x = tmp_path / "x.txt"
    x.write_text("\n".join("1011010100010") + "\n", encoding="utf-8")
    assert main(["compress", "--x", str(x), "--size", "2"]) == 0
    result = json.loads(capsys.readouterr().out)
    assert result["kind"] == "lz"
    assert result["phrases"] == 7
    y = tmp_path / "y.txt"
    y.write_text("\n".join("0" * 13) + "\n", encoding="utf-8")
    assert main(["compress", "--x", str(x), "--y", str(y)]) == 0
    assert json.loads(capsys.readouterr().out)["kind"] == "clz"


def test_read_symbols_rejects_fractions(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("0\n1.5\n", encoding="utf-8")
    with pytest.raises(InvalidInputError):
        read_symbols(str(path))


def test_main_exit_codes(tmp_path, capsys):
    assert main(["simulate-fixed", "--epsilon", "2.0", "--seeds", "1"]) == 2
    assert main(["params", "--rate-fn", "nope"]) == 2
    assert main(["redundancy", "--rate-fn", "wire", "--n", "30", "--method", "exhaustive"]) == 3
    assert main(["compress"]) == 2
    blocker = tmp_path / "file"
    blocker.write_text("", encoding="utf-8")
    assert main(["params", "--output", str(blocker / "report.json")]) == 2
    assert "error:" in capsys.readouterr().err
    with pytest.raises(SystemExit):
        main(["no-such-command"])


@pytest.mark.slow
@pytest.mark.parametrize("p", [0.0, 0.05])
def test_adaptive_guarantee_failure_rate(tmp_path, p):
    config = ExperimentConfig(
        scheme="adaptive",
        rate_fn="modadd-kt",
        channel={"kind": "bsc", "p": p},
        n=1024,
        epsilon=0.01,
        seed_count=200,
        master_seed=3,
        output=str(tmp_path / f"sweep_{p}.jsonl"),
    )
    summary = run_experiment(config)["summary"]
    sigma = (0.01 * 0.99 / 200) ** 0.5
    assert summary["guarantee_failure_fraction"] <= 0.01 + 3 * sigma


@pytest.mark.slow
def test_bsc_conditional_metric_over_many_seeds(tmp_path):
    config = ExperimentConfig(
        scheme="adaptive",
        rate_fn="cond",
        rate_params={"model": "bsc", "p": 0.11},
        channel={"kind": "bsc", "p": 0.11},
        n=1024,
        epsilon=0.01,
        seed_count=1000,
        master_seed=11,
        output=str(tmp_path / "bsc.jsonl"),
    )
    result = run_experiment(config)
    summary = result["summary"]
    sigma = (0.01 * 0.99 / 1000) ** 0.5
    assert summary["runs"] == 1000
    assert summary["error_fraction"] <= 0.01 + 3 * sigma
    assert summary["guarantee_failure_fraction"] <= 0.01 + 3 * sigma
    clean = [row for row in result["rows"] if not row["error"]]
    assert all(row["R_act"] >= row["F_n"] - 1e-12 for row in clean)
