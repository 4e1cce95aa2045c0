from __future__ import annotations

import os
from typing import Optional

from dotenv import find_dotenv, load_dotenv

_loaded = False


def init_env(dotenv_path: Optional[str] = None) -> None:
    """加载 .env（每个进程只执行一次），已存在的环境变量不会被覆盖。"""
    global _loaded
    if _loaded:
        return
    load_dotenv(dotenv_path or find_dotenv(usecwd=True), override=False)
    _loaded = True


def env_str(name: str, default: Optional[str] = None) -> Optional[str]:
    init_env()
    value = os.getenv(name)
    if value is None or value.strip() == "":
        return default
    return value.strip()
