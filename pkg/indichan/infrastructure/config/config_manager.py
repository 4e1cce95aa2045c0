import copy
import json
import logging
import os
from typing import Any, Dict, Optional

from indichan.infrastructure.config.env import env_str, init_env

logger = logging.getLogger(__name__)


class ConfigManager:
    """
    仿真配置管理器（单例模式）。
    加载顺序：内置默认值 -> configs/config.json（或 INDICHAN_CONFIG 指定的文件）
    -> env_overrides 映射中声明的环境变量覆盖。
    """

    _instance = None
    CONFIG_FILE = os.path.join("configs", "config.json")

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super(ConfigManager, cls).__new__(cls)
            cls._instance._init_config()
        return cls._instance

    def _init_config(self):
        """初始化配置：默认值 -> 文件 -> 环境变量"""
        init_env()
        self.config = self._load_defaults()

        file_config = self._load_from_file()
        if file_config:
            self._recursive_update(self.config, file_config)

        self._apply_env_overrides()

    def _load_defaults(self) -> Dict[str, Any]:
        """默认配置结构"""
        return {
            "simulation": {
                "n": 1024,
                "epsilon": 0.01,
                "d_fb": 1,
                "seeds": 10,
                "master_seed": 20240101,
                "max_workers": 4,
            },
            "guards": {
                "max_enumeration": 10_000_000,
                "max_types": 10_000_000,
                # 2^bits 以内显式生成整本码本，超过时改用抽样的竞争码字
                "max_explicit_codebook_bits": 12,
            },
            "monte_carlo": {
                "trials": 10_000,
                "confidence": 0.95,
                "impostors": 256,
                "y_samples": 16,
            },
            "output": {
                "dir": "results",
                "format": "json",
            },
            "logging": {
                "level": "INFO",
            },
            "env_overrides": {
                "output.dir": "INDICHAN_OUTPUT_DIR",
                "logging.level": "LOG_LEVEL",
                "guards.max_enumeration": "INDICHAN_MAX_ENUMERATION",
                "simulation.max_workers": "INDICHAN_MAX_WORKERS",
                "simulation.master_seed": "INDICHAN_MASTER_SEED",
            },
        }

    def _apply_env_overrides(self):
        """根据 env_overrides 映射应用环境变量覆盖"""
        env_overrides = self.config.get("env_overrides", {})
        if not env_overrides:
            return

        for path_str, env_var in env_overrides.items():
            env_value = os.getenv(env_var)
            if env_value is not None:
                self._set_nested_value(path_str, env_value)

    def _set_nested_value(self, path_str: str, value: Any):
        """按点分路径写入，类型跟随默认值"""
        keys = path_str.split(".")
        target = self.config
        for key in keys[:-1]:
            if key not in target:
                return
            target = target[key]
        last_key = keys[-1]
        if last_key not in target:
            return
        original = target[last_key]
        try:
            if isinstance(original, bool):
                target[last_key] = str(value).lower() in ("1", "true", "yes")
            elif isinstance(original, int):
                target[last_key] = int(value)
            elif isinstance(original, float):
                target[last_key] = float(value)
            else:
                target[last_key] = value
        except ValueError:
            logger.warning("ignored env override path=%s value=%r", path_str, value)

    def _config_path(self) -> str:
        return env_str("INDICHAN_CONFIG", self.CONFIG_FILE)

    def _load_from_file(self) -> Optional[Dict[str, Any]]:
        path = self._config_path()
        if os.path.exists(path):
            try:
                with open(path, "r", encoding="utf-8") as f:
                    return json.load(f)
            except Exception as e:
                logger.warning("failed to load config file path=%s error=%s", path, e)
                return None
        return None

    def _recursive_update(self, target: Dict, source: Dict):
        for key, value in source.items():
            if (
                isinstance(value, dict)
                and key in target
                and isinstance(target[key], dict)
            ):
                self._recursive_update(target[key], value)
            else:
                target[key] = value

    def get_config(self) -> Dict[str, Any]:
        """获取当前配置字典"""
        return self.config

    def get(self, path: str, default: Any = None) -> Any:
        """点分路径读取，例如 get("simulation.epsilon")"""
        node: Any = self.config
        for key in path.split("."):
            if not isinstance(node, dict) or key not in node:
                return default
            node = node[key]
        return node

    def update_config(self, new_config: Dict[str, Any], persist: bool = False) -> Dict[str, Any]:
        self._recursive_update(self.config, copy.deepcopy(new_config))
        if persist:
            self._save_to_file()
        return self.config

    def reload(self) -> Dict[str, Any]:
        self._init_config()
        return self.config

    def _save_to_file(self):
        path = self._config_path()
        try:
            os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
            with open(path, "w", encoding="utf-8") as f:
                json.dump(self.config, f, indent=2, ensure_ascii=False)
        except Exception as e:
            logger.warning("failed to save config file path=%s error=%s", path, e)


def parse_kv_file(path: str) -> Dict[str, str]:
    """
    读取 key=value 纯文本配置（实验参数文件）。
    空行与 # 开头的行忽略；值保留为字符串，由调用方做类型转换。
    """
    values: Dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, value = line.split("=", 1)
            values[key.strip().replace("-", "_")] = value.strip()
    return values


config_manager = ConfigManager()
