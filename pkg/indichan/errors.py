class IndichanError(Exception):
    exit_code = 1


class InvalidInputError(IndichanError, ValueError):
    """输入序列/矩阵与声明的字母表或维度不符。"""

    exit_code = 2


class InvalidParameterError(IndichanError, ValueError):
    """参数超出允许范围（ε、γ、Ω、n 等）。"""

    exit_code = 2


class UnknownIdError(IndichanError, KeyError):
    exit_code = 2

    def __str__(self) -> str:
        # KeyError 默认会给消息加引号
        return str(self.args[0]) if self.args else ""


class ResourceLimitError(IndichanError):
    """穷举规模超过保护上限。"""

    exit_code = 3


def check_guard(count: float, limit: int, what: str) -> None:
    if count > limit:
        raise ResourceLimitError(f"{what} requires {count:.3g} states, guard is {limit}")
