import json
import math
import os
from typing import Any, Dict, Iterable, List, Union

import numpy as np

_SENTINELS = {"nan": math.nan, "inf": math.inf, "-inf": -math.inf}


def to_jsonable(value: Any) -> Any:
    """
    转换为可 JSON 序列化的结构。

    - numpy 标量/数组 -> Python 数值/列表
    - NaN / ±inf -> "nan" / "inf" / "-inf"（标准 JSON 不支持非有限浮点）
    - 带 to_dict() 的对象按其字典导出
    """
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        f = float(value)
        if math.isnan(f):
            return "nan"
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return f
    if hasattr(value, "to_dict"):
        return to_jsonable(value.to_dict())
    return value


def restore_floats(value: Any) -> Any:
    """to_jsonable 的逆过程：把哨兵字符串还原为浮点。"""
    if isinstance(value, dict):
        return {k: restore_floats(v) for k, v in value.items()}
    if isinstance(value, list):
        return [restore_floats(v) for v in value]
    if isinstance(value, str) and value in _SENTINELS:
        return _SENTINELS[value]
    return value


def dumps(obj: Any) -> str:
    # repr 级精度：json 对 float 使用 repr，往返无损
    return json.dumps(to_jsonable(obj), sort_keys=True, ensure_ascii=False, allow_nan=False)


def loads(content: str) -> Any:
    try:
        return restore_floats(json.loads(content))
    except json.JSONDecodeError as e:
        raise ValueError(f"invalid JSON content: {e}") from e


def write_json(path: str, obj: Any) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(dumps(obj))
        f.write("\n")
    return path


def read_json(path: str) -> Any:
    with open(path, "r", encoding="utf-8") as f:
        return loads(f.read())


def write_jsonl(path: str, rows: Iterable[Dict[str, Any]]) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for row in rows:
            f.write(dumps(row))
            f.write("\n")
    return path


def read_jsonl(path: str) -> List[Union[Dict[str, Any], Any]]:
    rows = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                rows.append(loads(line))
    return rows
