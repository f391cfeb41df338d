"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Input violates a documented precondition."""


class CoverageTooLargeError(ValidationError):
    def __init__(self, count: int, cap: int):
        super().__init__(f"coverage needs {count} cells, cap is {cap}")
        self.count = count
        self.cap = cap


class CorpusFormatError(ValueError):
    """Too many malformed lines in a line-delimited input file."""


class BuildError(RuntimeError):
    """A derived structure (index, affinity entry) could not be built."""
