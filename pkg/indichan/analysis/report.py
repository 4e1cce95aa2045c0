from __future__ import annotations

import math
import os
from typing import Any, Callable, Dict, List, Literal, Optional

import pandas as pd
from pydantic import BaseModel, Field, PrivateAttr, model_validator

from indichan.errors import InvalidParameterError
from indichan.infrastructure.utils.json_io import dumps, loads, restore_floats, to_jsonable

Method = Literal["exhaustive", "monte_carlo", "closed_form"]


class ReportEntry(BaseModel):
    name: str = Field(description="量的名称，例如 mu_Q、c_n、a_1")
    value: float = Field(description="数值（比特或比特/符号）；nan/inf 为哨兵")
    formula: str = Field(default="", description="计算该量的公式标识")
    inputs: Dict[str, Any] = Field(default_factory=dict, description="公式输入")
    method: Method = Field(default="closed_form", description="exhaustive / monte_carlo / closed_form")
    ci_low: Optional[float] = Field(default=None, description="置信区间下界（monte_carlo 必填）")
    ci_high: Optional[float] = Field(default=None, description="置信区间上界（monte_carlo 必填）")
    trials: Optional[int] = Field(default=None, description="蒙特卡洛试验次数")

    @model_validator(mode="after")
    def _check_ci(self) -> "ReportEntry":
        if self.method == "monte_carlo" and (self.ci_low is None or self.ci_high is None):
            raise ValueError(f"monte_carlo entry {self.name} needs a confidence interval")
        return self


class OverheadReport(BaseModel):
    """定理参数与冗余估计的汇总报告，每个量都带有来源公式与计算方法。"""

    title: str = Field(default="report", description="报告名称")
    entries: Dict[str, ReportEntry] = Field(default_factory=dict)
    metadata: Dict[str, Any] = Field(default_factory=dict, description="非确定性信息（时间戳等）只放这里")

    _functions: Dict[str, Callable[[float], float]] = PrivateAttr(default_factory=dict)

    def add(
        self,
        name: str,
        value: float,
        formula: str = "",
        inputs: Optional[Dict[str, Any]] = None,
        method: Method = "closed_form",
        ci: Optional[tuple] = None,
        trials: Optional[int] = None,
    ) -> "OverheadReport":
        self.entries[name] = ReportEntry(
            name=name,
            value=float(value),
            formula=formula,
            inputs=to_jsonable(inputs or {}),
            method=method,
            ci_low=None if ci is None else float(ci[0]),
            ci_high=None if ci is None else float(ci[1]),
            trials=trials,
        )
        return self

    def attach(self, name: str, fn: Callable[[float], float]) -> None:
        """挂载可调用量（如 F_n(t)），不参与序列化。"""
        self._functions[name] = fn

    def function(self, name: str) -> Callable[[float], float]:
        try:
            return self._functions[name]
        except KeyError as e:
            raise InvalidParameterError(f"report has no function {name}") from e

    def __getitem__(self, name: str) -> float:
        return self.entries[name].value

    def __contains__(self, name: str) -> bool:
        return name in self.entries

    def scalars(self) -> Dict[str, float]:
        return {k: e.value for k, e in self.entries.items()}

    def to_dict(self) -> Dict[str, Any]:
        return self.model_dump()

    def to_json(self) -> str:
        return dumps(self.model_dump())

    @classmethod
    def from_json(cls, content: str) -> "OverheadReport":
        return cls.model_validate(loads(content))

    def to_frame(self) -> pd.DataFrame:
        rows: List[Dict[str, Any]] = []
        for e in self.entries.values():
            rows.append(
                {
                    "name": e.name,
                    "value": e.value,
                    "formula": e.formula,
                    "method": e.method,
                    "ci_low": e.ci_low,
                    "ci_high": e.ci_high,
                    "trials": e.trials,
                }
            )
        return pd.DataFrame(rows, columns=["name", "value", "formula", "method", "ci_low", "ci_high", "trials"])


def _csv_value(v: Any) -> Any:
    if isinstance(v, float) and (math.isnan(v) or math.isinf(v)):
        return to_jsonable(v)
    return v


def emit_report(report: OverheadReport, fmt: str, path: str) -> str:
    """写出报告：json 为完整结构，csv 为一行一个标量（列为量名）。"""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    if fmt == "json":
        with open(path, "w", encoding="utf-8") as f:
            f.write(report.to_json())
            f.write("\n")
        return path
    if fmt == "csv":
        row = {name: _csv_value(value) for name, value in report.scalars().items()}
        # float_format 用 repr 精度保证往返无损
        pd.DataFrame([row]).to_csv(path, index=False, float_format="%.17g")
        return path
    raise InvalidParameterError(f"unknown report format: {fmt}")


def read_report_csv(path: str) -> Dict[str, float]:
    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    row = frame.iloc[0].to_dict()
    return {k: float(restore_floats(v)) for k, v in row.items()}
