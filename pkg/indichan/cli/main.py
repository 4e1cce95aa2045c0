from __future__ import annotations

import argparse
import json
import sys
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import ValidationError

from indichan.analysis.bounds import achievability_gap, framework_from_metadata, theorem_framework_params
from indichan.analysis.redundancy import intrinsic_redundancy
from indichan.analysis.report import OverheadReport, emit_report
from indichan.cli.experiment import (
    ExperimentConfig,
    build_prior,
    build_rate_function,
    list_registry,
    run_experiment,
)
from indichan.coding.doubling import doubling_delta
from indichan.compress.conditional_lz import conditional_lz_lengths, conditional_lz_parse
from indichan.compress.lz78 import lz78_lengths, lz78_parse
from indichan.core.randomness import SharedRandomness
from indichan.errors import IndichanError, InvalidInputError, InvalidParameterError
from indichan.infrastructure.config.config_manager import config_manager, parse_kv_file
from indichan.infrastructure.config.env import init_env
from indichan.infrastructure.utils.json_io import dumps
from indichan.infrastructure.utils.logging import get_logger, init_logging
from indichan.mimo.config import MimoConfig
from indichan.mimo.params import gaussian_theorem_params

logger = get_logger("cli")


def _coerce(value: Any) -> Any:
    if not isinstance(value, str):
        return value
    try:
        return json.loads(value)
    except json.JSONDecodeError:
        return value


class Settings:
    """命令行参数 > key=value 文件 > ConfigManager。"""

    def __init__(self, args: argparse.Namespace, file_values: Dict[str, str]) -> None:
        self.args = args
        self.file_values = file_values

    def get(self, name: str, default: Any = None, config_path: Optional[str] = None) -> Any:
        value = getattr(self.args, name, None)
        if value is not None:
            return value
        if name in self.file_values:
            return _coerce(self.file_values[name])
        if config_path is not None:
            return config_manager.get(config_path, default)
        return default

    def options(self, name: str, default: Dict[str, Any]) -> Dict[str, Any]:
        """JSON 对象或仅种类名（如 "bsc"）。"""
        value = self.get(name)
        if value is None:
            return dict(default)
        value = _coerce(value)
        if isinstance(value, dict):
            return value
        return {"kind": str(value)}


def read_symbols(path: str) -> np.ndarray:
    """一行一个整数（有限字母表）；多列时每行为一个向量符号。"""
    frame = pd.read_csv(path, header=None, comment="#", skip_blank_lines=True)
    if frame.shape[1] == 1:
        values = frame.iloc[:, 0].to_numpy()
        if not np.all(np.equal(np.mod(values, 1), 0)):
            raise InvalidInputError(f"{path}: finite-alphabet symbol files hold integers")
        return values.astype(np.int64)
    return frame.to_numpy(dtype=np.float64)


def _seeds(settings: Settings) -> Optional[List[int]]:
    raw_seeds = settings.get("seeds")
    if raw_seeds is None:
        return None
    if isinstance(raw_seeds, (list, tuple)):
        return [int(s) for s in raw_seeds]
    text = str(raw_seeds).strip()
    return [int(s) for s in text.split(",") if s.strip()]


def _simulate(settings: Settings, scheme: str) -> int:
    channel = settings.options("channel", {"kind": "bsc"})
    for key in ("p", "size", "p_on"):
        value = settings.get(key)
        if value is not None:
            channel.setdefault(key, value)
    config = ExperimentConfig(
        scheme=scheme,
        rate_fn=settings.get("rate_fn", "modadd" if scheme == "fixed" else "modadd-kt"),
        rate_params=settings.options("rate_params", {}),
        channel=channel,
        prior=settings.options("prior", {"kind": "uniform", "size": 2}),
        n=settings.get("n", 1024, "simulation.n"),
        K=settings.get("K"),
        rate=settings.get("rate", 0.5),
        decoder=settings.get("decoder", "max_metric"),
        epsilon=settings.get("epsilon", 0.01, "simulation.epsilon"),
        d_fb=settings.get("d_fb", 1, "simulation.d_fb"),
        seeds=_seeds(settings),
        seed_count=settings.get("seed_count"),
        master_seed=settings.get("master_seed", 0, "simulation.master_seed"),
        output=settings.get("output"),
        max_workers=settings.get("max_workers"),
    )
    result = run_experiment(config)
    summary = result["summary"]
    print(
        f"simulate {scheme} done: runs={summary['runs']} error_fraction={summary['error_fraction']:.6g} "
        f"mean_R_act={summary['mean_R_act']:.6g} mean_R_emp={summary['mean_R_emp']:.6g} path={result['path']}"
    )
    return 0


def _emit(report: OverheadReport, settings: Settings) -> int:
    fmt = settings.get("format", "json", "output.format")
    path = settings.get("output")
    if path:
        emit_report(report, fmt, path)
        print(f"report written: title={report.title} format={fmt} path={path}")
    else:
        print(report.to_json())
    return 0


def cmd_simulate_fixed(settings: Settings) -> int:
    return _simulate(settings, "fixed")


def cmd_simulate_adaptive(settings: Settings) -> int:
    return _simulate(settings, "doubling" if settings.get("doubling") else "adaptive")


def cmd_redundancy(settings: Settings) -> int:
    n = int(settings.get("n", 4))
    prior = build_prior(settings.options("prior", {"kind": "uniform", "size": int(settings.get("size", 2))}))
    rate_params = settings.options("rate_params", {})
    rate_fn = build_rate_function(settings.get("rate_fn", "emi"), rate_params, prior, n)
    master = int(settings.get("master_seed", 0, "simulation.master_seed"))
    report = intrinsic_redundancy(
        rate_fn,
        prior,
        n,
        method=settings.get("method", "auto"),
        y_size=settings.get("y_size"),
        trials=settings.get("trials"),
        rand=SharedRandomness(master).derive("redundancy"),
    )
    return _emit(report, settings)


def cmd_params(settings: Settings) -> int:
    n = int(settings.get("n", 4096, "simulation.n"))
    epsilon = float(settings.get("epsilon", 0.01, "simulation.epsilon"))
    d_fb = int(settings.get("d_fb", 1, "simulation.d_fb"))
    K = settings.get("K")
    rate_id = settings.get("rate_fn")
    if rate_id is not None:
        prior = build_prior({"kind": "uniform", "size": int(settings.get("size", 2))})
        rate_fn = build_rate_function(rate_id, {}, prior, n)
        if rate_fn.metadata is None:
            raise InvalidParameterError(f"rate function {rate_id} has no (L_m, b0) metadata")
        report = framework_from_metadata(rate_fn.metadata, n, epsilon, d_fb, K, settings.get("r_max"))
        report.add(
            "delta_doubling",
            doubling_delta(n, epsilon, rate_fn.metadata, d_fb, settings.get("r_max")),
            "doubling-trick overhead at n",
            {"rate_fn": rate_id, "n": n, "epsilon": epsilon, "d_fb": d_fb},
        )
    else:
        report = theorem_framework_params(
            float(settings.get("log2_L", 0.0)),
            int(settings.get("b0", 0)),
            float(settings.get("f0", 0.0)),
            float(settings.get("r_max", 1.0)),
            n,
            epsilon,
            d_fb,
            K,
        )
    report.add("achievability_gap", achievability_gap(epsilon), "log((1-eps)/eps)", {"epsilon": epsilon})
    return _emit(report, settings)


def _mimo_config(settings: Settings) -> MimoConfig:
    values: Dict[str, Any] = {}
    table = settings.get("from_csv")
    if table:
        # 表头含 t,r,d,u 等标量字段，取第一行
        row = pd.read_csv(table).iloc[0].to_dict()
        values.update({k: (v.item() if hasattr(v, "item") else v) for k, v in row.items() if pd.notna(v)})
    for key in ("t", "r", "d", "u", "omega", "n", "epsilon", "d_fb", "K", "gamma"):
        value = settings.get(key)
        if value is not None:
            values[key] = value
    cov_path = settings.get("cov_file")
    if cov_path:
        values["cov"] = pd.read_csv(cov_path, header=None).to_numpy(dtype=np.float64)
    for key in ("t", "r", "d", "u", "n", "d_fb", "K"):
        if key in values and values[key] is not None:
            values[key] = int(values[key])
    return MimoConfig(**values)


def cmd_mimo_params(settings: Settings) -> int:
    config = _mimo_config(settings)
    R0 = settings.get("R0")
    report = gaussian_theorem_params(config, None if R0 is None else float(R0))
    return _emit(report, settings)


def cmd_compress(settings: Settings) -> int:
    x_path = settings.get("x")
    if not x_path:
        raise InvalidParameterError("compress needs --x")
    x = read_symbols(x_path)
    size = settings.get("size")
    y_path = settings.get("y")
    if y_path:
        y = read_symbols(y_path)
        record = conditional_lz_parse(x, y)
        l_s, l_t = conditional_lz_lengths(x, y)
        kind = "clz"
    else:
        record = lz78_parse(x, size)
        l_s, l_t = lz78_lengths(x, size)
        kind = "lz"
    print(dumps({"kind": kind, "n": int(x.shape[0]), "phrases": record.c, "L_S": l_s, "L_T": l_t,
                 "C_LZ": record.complexity()}))
    return 0


def cmd_list(settings: Settings) -> int:
    for entry in list_registry(settings.get("contains")):
        print(dumps(entry))
    return 0


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config-file", dest="config_file", default=None, help="key=value 参数文件")
    parser.add_argument("--output", default=None)
    parser.add_argument("--log-level", dest="log_level", default=None)
    parser.add_argument("--max-enumeration", dest="max_enumeration", type=int, default=None)


def _simulation_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--rate-fn", dest="rate_fn", default=None)
    parser.add_argument("--rate-params", dest="rate_params", default=None, help="JSON 对象")
    parser.add_argument("--channel", default=None, help="种类名或 JSON 对象")
    parser.add_argument("--prior", default=None, help="种类名或 JSON 对象")
    parser.add_argument("--p", type=float, default=None)
    parser.add_argument("--p-on", dest="p_on", type=float, default=None)
    parser.add_argument("--size", type=int, default=None)
    parser.add_argument("--n", type=int, default=None)
    parser.add_argument("--epsilon", type=float, default=None)
    parser.add_argument("--seeds", default=None, help="逗号分隔")
    parser.add_argument("--seed-count", dest="seed_count", type=int, default=None)
    parser.add_argument("--master-seed", dest="master_seed", type=int, default=None)
    parser.add_argument("--max-workers", dest="max_workers", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="indichan")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate-fixed")
    _common(p)
    _simulation_args(p)
    p.add_argument("--rate", type=float, default=None)
    p.add_argument("--decoder", default=None, choices=["max_metric", "randomized_tie"])
    p.set_defaults(handler=cmd_simulate_fixed)

    p = sub.add_parser("simulate-adaptive")
    _common(p)
    _simulation_args(p)
    p.add_argument("--K", type=int, default=None)
    p.add_argument("--d-fb", dest="d_fb", type=int, default=None)
    p.add_argument("--doubling", action="store_true", default=None)
    p.set_defaults(handler=cmd_simulate_adaptive)

    p = sub.add_parser("redundancy")
    _common(p)
    p.add_argument("--rate-fn", dest="rate_fn", default=None)
    p.add_argument("--rate-params", dest="rate_params", default=None)
    p.add_argument("--prior", default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--size", type=int, default=None)
    p.add_argument("--y-size", dest="y_size", type=int, default=None)
    p.add_argument("--method", choices=["auto", "exhaustive", "monte_carlo"], default=None)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--master-seed", dest="master_seed", type=int, default=None)
    p.add_argument("--format", choices=["json", "csv"], default=None)
    p.set_defaults(handler=cmd_redundancy)

    p = sub.add_parser("params")
    _common(p)
    p.add_argument("--rate-fn", dest="rate_fn", default=None)
    p.add_argument("--size", type=int, default=None)
    p.add_argument("--log2-L", dest="log2_L", type=float, default=None)
    p.add_argument("--b0", type=int, default=None)
    p.add_argument("--f0", type=float, default=None)
    p.add_argument("--r-max", dest="r_max", type=float, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--K", type=int, default=None)
    p.add_argument("--d-fb", dest="d_fb", type=int, default=None)
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--format", choices=["json", "csv"], default=None)
    p.set_defaults(handler=cmd_params)

    p = sub.add_parser("mimo-params")
    _common(p)
    p.add_argument("--from-csv", dest="from_csv", default=None, help="表头含 t,r,d,u 的 CSV")
    p.add_argument("--cov-file", dest="cov_file", default=None, help="Λ_X，逐行 CSV")
    for name, kind in (("t", int), ("r", int), ("d", int), ("u", int), ("n", int), ("K", int),
                       ("omega", float), ("epsilon", float), ("gamma", float), ("R0", float)):
        p.add_argument(f"--{name}", dest=name, type=kind, default=None)
    p.add_argument("--d-fb", dest="d_fb", type=int, default=None)
    p.add_argument("--format", choices=["json", "csv"], default=None)
    p.set_defaults(handler=cmd_mimo_params)

    p = sub.add_parser("compress")
    _common(p)
    p.add_argument("--x", default=None, help="符号文件，一行一个整数")
    p.add_argument("--y", default=None, help="边信息符号文件（给出时使用条件 LZ）")
    p.add_argument("--size", type=int, default=None)
    p.set_defaults(handler=cmd_compress)

    p = sub.add_parser("list")
    _common(p)
    p.add_argument("--contains", default=None)
    p.set_defaults(handler=cmd_list)
    return parser


def run(argv: Optional[Sequence[str]] = None) -> int:
    init_env()
    args = build_parser().parse_args(argv)
    init_logging(args.log_level or config_manager.get("logging.level"))
    if args.max_enumeration is not None:
        config_manager.update_config({"guards": {"max_enumeration": args.max_enumeration}})
    file_values = parse_kv_file(args.config_file) if args.config_file else {}
    handler: Callable[[Settings], int] = args.handler
    return handler(Settings(args, file_values))


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        return run(argv)
    except IndichanError as e:
        logger.error("command failed error=%s exit_code=%d", e, e.exit_code)
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except ValidationError as e:
        print(f"error: invalid configuration: {e}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
