import pytest

from indichan.core.randomness import SharedRandomness
from indichan.infrastructure.config.config_manager import config_manager


@pytest.fixture(autouse=True)
def fresh_config(monkeypatch, tmp_path):
    """每个用例使用默认配置，输出目录指向临时目录。"""
    monkeypatch.setenv("INDICHAN_OUTPUT_DIR", str(tmp_path / "results"))
    monkeypatch.setenv("INDICHAN_CONFIG", str(tmp_path / "missing.json"))
    config_manager.reload()
    yield
    monkeypatch.undo()
    config_manager.reload()


@pytest.fixture
def rand():
    return SharedRandomness(1234)
