from __future__ import annotations

import os
import time
from typing import Any, Dict, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

from indichan.analysis.bounds import framework_from_metadata
from indichan.analysis.stats import normal_interval, wilson_interval
from indichan.coding.adaptive import AdaptiveSession, run_adaptive
from indichan.coding.doubling import run_doubling
from indichan.coding.fixed import FixedRateCode, fixed_decode
from indichan.core.alphabet import SymbolSequence
from indichan.core.channels import (
    Channel,
    DelayChannel,
    DMCChannel,
    FixedOutputChannel,
    GaussianMIMOChannel,
    ModuloAdditiveChannel,
    OnOffBinaryChannel,
)
from indichan.core.priors import IIDPrior, MarkovPrior, Prior
from indichan.core.randomness import SharedRandomness
from indichan.errors import InvalidParameterError
from indichan.infrastructure.config.config_manager import config_manager
from indichan.infrastructure.queue.worker_pool import map_seeds
from indichan.infrastructure.utils.json_io import write_json, write_jsonl
from indichan.infrastructure.utils.logging import bind_logger, get_logger
from indichan.mimo.config import MimoConfig
from indichan.ratefn.base import RateFunction, rate_registry
from indichan.ratefn.catalog import create_rate_function

_log = get_logger(__name__)

Scheme = Literal["fixed", "adaptive", "doubling"]


def build_prior(options: Dict[str, Any]) -> Prior:
    """{"kind": "uniform", "size": 2} / iid / markov / gaussian。"""
    kind = options.get("kind", "uniform")
    if kind == "uniform":
        return IIDPrior.uniform(int(options.get("size", 2)))
    if kind == "iid":
        return IIDPrior(np.asarray(options["mass"], dtype=np.float64))
    if kind == "markov":
        return MarkovPrior(
            np.asarray(options["transition"], dtype=np.float64),
            int(options.get("order", 1)),
            int(options.get("initial_symbol", 0)),
        )
    if kind == "gaussian":
        params = {k: v for k, v in options.items() if k != "kind"}
        return MimoConfig(**params).prior()
    raise InvalidParameterError(f"unknown prior kind: {kind}")


def build_channel(options: Dict[str, Any]) -> Channel:
    kind = options.get("kind", "bsc")
    if kind == "bsc":
        return ModuloAdditiveChannel.bsc(float(options.get("p", 0.0)), bool(options.get("exact_fraction", False)))
    if kind == "noiseless":
        return ModuloAdditiveChannel.noiseless(int(options.get("size", 2)))
    if kind == "modadd":
        size = int(options.get("size", 2))
        if "errors" in options:
            return ModuloAdditiveChannel(size, errors=np.asarray(options["errors"]))
        return ModuloAdditiveChannel(size, error_mass=np.asarray(options["error_mass"], dtype=np.float64))
    if kind == "dmc":
        return DMCChannel(np.asarray(options["matrix"], dtype=np.float64))
    if kind == "delay":
        return DelayChannel(int(options.get("size", 2)), int(options.get("fill", 0)))
    if kind == "onoff":
        return OnOffBinaryChannel(float(options.get("p_on", 0.5)))
    if kind == "mimo":
        return GaussianMIMOChannel(
            np.asarray(options["H"]), np.asarray(options["noise_cov"]), bool(options.get("complex_valued", False))
        )
    if kind == "fixed":
        y = SymbolSequence.finite(int(options.get("size", 2)), options["y"])
        return FixedOutputChannel(y, int(options.get("input_size", 2)))
    raise InvalidParameterError(f"unknown channel kind: {kind}")


def build_rate_function(rate_id: str, params: Dict[str, Any], prior: Prior, n: int) -> RateFunction:
    params = dict(params)
    if rate_id == "mimo" and isinstance(params.get("config"), dict):
        params["config"] = MimoConfig(**params["config"])
    if prior.alphabet.is_finite:
        params.setdefault("size", prior.alphabet.size)
    params.setdefault("prior", prior)
    params.setdefault("n", n)
    return create_rate_function(rate_id, **params)


class ExperimentConfig(BaseModel):
    """一次实验的完整描述；(配置, master_seed) 决定全部输出。"""

    scheme: Scheme = Field(default="adaptive", description="fixed / adaptive / doubling")
    rate_fn: str = Field(default="modadd-kt", description="速率函数注册 id")
    rate_params: Dict[str, Any] = Field(default_factory=dict, description="速率函数参数")
    channel: Dict[str, Any] = Field(default_factory=lambda: {"kind": "bsc", "p": 0.11}, description="信道描述")
    prior: Dict[str, Any] = Field(default_factory=lambda: {"kind": "uniform", "size": 2}, description="先验描述")
    n: int = Field(default=1024, ge=1, description="块长 n")
    K: Optional[int] = Field(default=None, ge=1, description="每块比特数；缺省按 K* 规则选取")
    rate: float = Field(default=0.5, ge=0, description="固定速率方案的 R")
    decoder: str = Field(default="max_metric", description="固定速率译码器")
    epsilon: float = Field(default=0.01, description="错误概率 ε")
    d_fb: int = Field(default=1, ge=1, description="反馈间隔")
    seeds: Optional[List[int]] = Field(default=None, description="显式种子列表")
    seed_count: Optional[int] = Field(default=None, ge=1, description="由 master_seed 派生的种子数")
    master_seed: int = Field(default=0, description="主种子")
    output: Optional[str] = Field(default=None, description="JSON-lines 输出路径")
    max_workers: Optional[int] = Field(default=None, description="并发线程数")

    @field_validator("epsilon")
    @classmethod
    def _check_epsilon(cls, v: float) -> float:
        if not 0 < v < 1:
            raise ValueError("epsilon must be in (0,1)")
        return v

    @field_validator("seeds")
    @classmethod
    def _check_seeds(cls, v: Optional[List[int]]) -> Optional[List[int]]:
        if v is not None and len(v) == 0:
            raise ValueError("seeds list must not be empty")
        return v

    @field_validator("rate_fn")
    @classmethod
    def _check_rate_fn(cls, v: str) -> str:
        rate_registry.get(v)
        return v

    @model_validator(mode="after")
    def _check_kinds(self) -> "ExperimentConfig":
        build_prior(self.prior)
        channel = build_channel(self.channel)
        if self.scheme == "doubling" and not channel.prefix_consistent:
            raise ValueError("doubling needs a channel whose past outputs do not change (exact_fraction is not allowed)")
        return self

    def seed_list(self) -> List[int]:
        if self.seeds is not None:
            return list(self.seeds)
        count = self.seed_count or int(config_manager.get("simulation.seeds", 10))
        rng = SharedRandomness(self.master_seed).derive("seeds").generator()
        return [int(s) for s in rng.integers(0, 2 ** 31 - 1, size=count)]


class ExperimentRunner:
    """每个种子一次独立运行；信道、先验、速率函数在种子之间只读共享。"""

    def __init__(self, config: ExperimentConfig) -> None:
        self.config = config
        self.prior = build_prior(config.prior)
        self.channel = build_channel(config.channel)
        self.rate_fn = build_rate_function(config.rate_fn, config.rate_params, self.prior, config.n)
        self.metric = self.rate_fn.metric()
        self._framework = None
        if config.scheme in ("adaptive", "doubling"):
            if self.metric is None:
                raise InvalidParameterError(f"rate function {config.rate_fn} has no sequential decoding metric")
            metadata = self.rate_fn.metadata
            if metadata is None:
                raise InvalidParameterError(f"rate function {config.rate_fn} has no (L_m, b0) metadata")
            if config.scheme == "adaptive":
                self._framework = framework_from_metadata(metadata, config.n, config.epsilon, config.d_fb, config.K)

    @property
    def K(self) -> int:
        if self.config.K is not None:
            return int(self.config.K)
        return int(self._framework["K"])

    def rand(self, seed: int) -> SharedRandomness:
        return SharedRandomness(self.config.master_seed).derive(f"run/{seed}")

    def run_fixed(self, seed: int) -> Dict[str, Any]:
        cfg = self.config
        rand = self.rand(seed)
        code = FixedRateCode.from_rate(cfg.n, cfg.rate, self.prior, self.rate_fn, rand.derive("codebook"), cfg.decoder)
        message = int(rand.derive("message").generator().integers(1, code.M + 1))
        x = code.codeword(message)
        y = self.channel.transmit(x, rand)
        decoded = fixed_decode(code, y, rand=rand.derive("decoder"))
        error = decoded != message
        return {
            "seed": seed,
            "n": cfg.n,
            "R": code.rate,
            "R_emp": self.rate_fn(x, y),
            "R_act": 0.0 if error else code.rate,
            "B": 1,
            "error": error,
            "block_ends": [cfg.n],
        }

    def run_adaptive(self, seed: int) -> Dict[str, Any]:
        cfg = self.config
        session = AdaptiveSession(cfg.n, self.K, cfg.epsilon, self.metric, self.prior, cfg.d_fb)
        transcript = run_adaptive(session, self.channel, self.rand(seed), seed=seed)
        row = transcript.to_dict()
        f_n = self._framework.function("F")(transcript.R_emp)
        row["F_n"] = f_n
        row["guarantee"] = (not transcript.error) and transcript.R_act >= f_n - 1e-12
        return row

    def run_doubling(self, seed: int) -> Dict[str, Any]:
        cfg = self.config
        records = list(
            run_doubling(
                self.metric, self.prior, self.channel, self.rand(seed), cfg.epsilon, cfg.d_fb,
                horizon=cfg.n, seed=seed,
            )
        )
        last = records[-1]
        return {
            "seed": seed,
            "n": cfg.n,
            "R_emp": last.R_emp,
            "R_act": last.R_act,
            "B": sum(r.blocks for r in records),
            "error": last.error,
            "delta": last.delta,
            "guarantee": (not last.error) and last.bound_holds,
            "epochs": [r.to_dict() for r in records],
        }

    def __call__(self, seed: int) -> Dict[str, Any]:
        return getattr(self, f"run_{self.config.scheme}")(seed)


def summarize(rows: List[Dict[str, Any]]) -> Dict[str, Any]:
    """均值 R_act、均值 R_emp 与带 Wilson 区间的错误比例。"""
    count = len(rows)
    errors = sum(1 for r in rows if r["error"])
    r_act = [float(r["R_act"]) for r in rows]
    r_emp = [float(r["R_emp"]) for r in rows if np.isfinite(r["R_emp"])]
    out: Dict[str, Any] = {
        "runs": count,
        "mean_R_act": float(np.mean(r_act)) if r_act else float("nan"),
        "mean_R_act_ci": list(normal_interval(r_act)),
        "mean_R_emp": float(np.mean(r_emp)) if r_emp else float("nan"),
        "error_fraction": errors / count if count else float("nan"),
        "error_ci": list(wilson_interval(errors, count)),
    }
    if rows and "guarantee" in rows[0]:
        failures = sum(1 for r in rows if not r["guarantee"])
        out["guarantee_failure_fraction"] = failures / count
        out["guarantee_failure_ci"] = list(wilson_interval(failures, count))
    return out


def default_output(config: ExperimentConfig) -> str:
    return os.path.join(str(config_manager.get("output.dir", "results")), f"{config.scheme}.jsonl")


def run_experiment(config: ExperimentConfig) -> Dict[str, Any]:
    """
    运行全部种子并写出 JSON-lines（种子顺序）及同名 .summary.json。
    时间戳只出现在 summary 的 metadata 字段中。
    """
    logger = bind_logger(_log, scheme=config.scheme, op="run_experiment")
    runner = ExperimentRunner(config)
    seeds = config.seed_list()
    logger.info("experiment start rate_fn=%s n=%d seeds=%d", config.rate_fn, config.n, len(seeds))
    rows = map_seeds(runner, seeds, config.max_workers)
    path = config.output or default_output(config)
    write_jsonl(path, rows)
    summary = summarize(rows)
    summary_path = os.path.splitext(path)[0] + ".summary.json"
    write_json(
        summary_path,
        {
            "config": config.model_dump(exclude={"output", "max_workers"}),
            "summary": summary,
            "metadata": {"created_at": time.strftime("%Y-%m-%dT%H:%M:%S")},
        },
    )
    logger.info(
        "experiment done runs=%d error_fraction=%.4g mean_R_act=%.6g path=%s",
        summary["runs"], summary["error_fraction"], summary["mean_R_act"], path,
    )
    return {"path": path, "summary_path": summary_path, "summary": summary, "rows": rows}


def list_registry(contains: Optional[str] = None) -> List[Dict[str, Any]]:
    """按 id 排序的速率函数目录；过滤串不匹配时返回空列表。"""
    return [entry.to_dict() for entry in rate_registry.entries(contains)]
