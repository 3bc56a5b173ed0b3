class MismatchToolkitError(Exception):
    """Base class."""


class InvalidArgumentError(MismatchToolkitError):
    pass


class SingularGeometryError(MismatchToolkitError):
    """Точка совпала с элементом RIS (или центром RIS): единичные векторы не определены."""


class DegenerateChannelError(MismatchToolkitError):
    """Эффективный канал c(p) (или b^T w_t для всех t) тождественно равен нулю."""


class NoSolutionError(MismatchToolkitError):
    """Все стартовые точки оптимизатора разошлись."""


class IllConditionedError(MismatchToolkitError):
    def __init__(self, message: str, condition: float, diagnostics: dict | None = None):
        super().__init__(message)
        self.condition = condition
        self.diagnostics = diagnostics or {}


class UnsupportedRangeError(MismatchToolkitError):
    pass


class NoInitError(MismatchToolkitError):
    pass


class ConfigError(MismatchToolkitError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line
