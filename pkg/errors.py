class MaskSatError(Exception):
    """Root of every error raised by the solver, oracles and bench."""


class ParseError(MaskSatError, ValueError):
    def __init__(
        self, message: str, line: int, column: int = 1, source: str = "<input>"
    ) -> None:
        self.message = message
        self.line = line
        self.column = column
        self.source = source
        super().__init__(f"{source}:{line}:{column}: {message}")


class FormulaError(MaskSatError, ValueError):
    pass


class CanonicalizationError(FormulaError):
    def __init__(self, message: str, clause_index: int) -> None:
        self.clause_index = clause_index
        super().__init__(message)


class OrderingError(FormulaError):
    pass


class WidthCapExceeded(MaskSatError, MemoryError):
    def __init__(self, width: int, cap: int) -> None:
        self.width = width
        self.cap = cap
        super().__init__(
            f"Bit field of {width} bits exceeds the configured cap of {cap} bits "
            f"(raise --max-width-bits or MASKSAT_MAX_WIDTH_BITS)"
        )


class ContractViolation(MaskSatError, AssertionError):
    pass


class OracleLimitExceeded(MaskSatError, ValueError):
    pass


class ReportError(MaskSatError, ValueError):
    pass


class InsufficientDataError(MaskSatError, ValueError):
    pass


class UsageError(MaskSatError, ValueError):
    pass
