from typing import Optional


class MataformerError(Exception):
    """Base class for every error raised by mataformer"""


class ShapeError(MataformerError, ValueError):
    def __init__(self, what: str, expected: object, got: object):
        self.what = what
        self.expected = expected
        self.got = got

    def __str__(self) -> str:
        return f"Shape mismatch for {self.what}: expected {self.expected}, got {self.got}"


class NumericalError(MataformerError, ArithmeticError):
    def __init__(self, msg: str, where: str = "", dump_path: Optional[str] = None):
        self.msg = msg
        self.where = where
        self.dump_path = dump_path

    def __str__(self) -> str:
        out = self.msg
        if self.where:
            out += f" at {self.where}"
        if self.dump_path is not None:
            out += f" (diagnostic dump written to {self.dump_path})"
        return out


class DataError(MataformerError, ValueError):
    def __init__(self, reason: str, path: Optional[str] = None, line: int = 0):
        self.reason = reason
        self.path = path
        self.line = line

    def __str__(self) -> str:
        if self.path is None:
            return self.reason
        if self.line > 0:
            return f"{self.path}:{self.line}: {self.reason}"
        return f"{self.path}: {self.reason}"


class ConfigError(MataformerError, ValueError):
    def __init__(self, key: str, reason: str):
        self.key = key
        self.reason = reason

    def __str__(self) -> str:
        return f"Invalid configuration `{self.key}`: {self.reason}"


class CheckpointError(MataformerError):
    def __init__(self, path: str, reason: str):
        self.path = path
        self.reason = reason

    def __str__(self) -> str:
        return f"Unusable checkpoint {self.path}: {self.reason}"
