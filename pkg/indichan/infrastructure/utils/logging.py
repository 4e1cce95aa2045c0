from __future__ import annotations

import logging
import os
from typing import Any, Dict, Optional, Union

_CONTEXT_FIELDS = ("run_id", "seed", "scheme", "op")


class ContextLogger(logging.LoggerAdapter):
    def process(self, msg: str, kwargs: Dict[str, Any]):
        extra = dict(self.extra or {})
        extra.update(kwargs.get("extra") or {})
        kwargs["extra"] = extra
        return msg, kwargs


class _ContextDefaults(logging.Filter):
    """未绑定上下文的日志记录补 "-"，避免格式化时 KeyError。"""

    def filter(self, record: logging.LogRecord) -> bool:
        for name in _CONTEXT_FIELDS:
            if not hasattr(record, name):
                setattr(record, name, "-")
        return True


def init_logging(level: Optional[str] = None) -> None:
    level_name = (level or os.getenv("LOG_LEVEL", "INFO")).upper()
    resolved = getattr(logging, level_name, logging.INFO)

    root = logging.getLogger()
    if root.handlers:
        root.setLevel(resolved)
        return

    logging.basicConfig(
        level=resolved,
        format="%(asctime)s %(levelname)s %(name)s run_id=%(run_id)s seed=%(seed)s scheme=%(scheme)s op=%(op)s %(message)s",
    )
    for handler in root.handlers:
        handler.addFilter(_ContextDefaults())


def get_logger(name: str) -> logging.Logger:
    return logging.getLogger(name)


def bind_logger(
    logger: logging.Logger,
    *,
    run_id: Optional[str] = None,
    seed: Optional[Union[int, str]] = None,
    scheme: Optional[str] = None,
    op: Optional[str] = None,
) -> ContextLogger:
    return ContextLogger(
        logger,
        {
            "run_id": run_id or "-",
            "seed": "-" if seed is None else seed,
            "scheme": scheme or "-",
            "op": op or "-",
        },
    )
