class ContractViolation(AssertionError):
    """A caller broke an ordering or capacity precondition."""


class ImageError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)
