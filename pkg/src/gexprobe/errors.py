"""Exception hierarchy shared by the pipeline stages."""


class GexProbeError(Exception):
    """Base class for all package errors."""


class DataError(GexProbeError):
    """Input file content violates the schema or a domain invariant."""

    def __init__(self, message, *, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class MalformedRow(DataError):
    pass


class NegativeOI(DataError):
    pass


class InvertedQuote(DataError):
    pass


class EmptyFile(DataError):
    pass


class DuplicateDate(DataError):
    pass


class HighLowInversion(DataError):
    pass


class PricingError(GexProbeError):
    pass


class DegenerateExpiry(PricingError):
    """Gamma is unbounded: zero time to expiry with spot exactly at the strike."""


class GexError(GexProbeError):
    pass


class MissingGamma(GexError):
    pass


class EmptyChain(GexError):
    pass


class NonMonotonicDates(GexProbeError):
    pass


class GateFailure(GexProbeError):
    """A validation gate refused to let data through (exit code 2)."""


class LeakDetected(GateFailure):
    def __init__(self, report, context=""):
        self.report = report
        shown = ", ".join(f"{m.rule}:{m.text!r}@{m.offset}" for m in report.matches[:5])
        prefix = f"{context}: " if context else ""
        super().__init__(f"{prefix}leak audit failed with {len(report.matches)} match(es): {shown}")


class UnfilledPlaceholder(GexProbeError):
    pass


class ParseFailure(GexProbeError):
    pass


class ProviderUnavailable(GexProbeError):
    """LLM provider could not be reached after retries (exit code 3)."""


class OutcomeError(GexProbeError):
    pass


class TruncatedHorizon(OutcomeError):
    pass


class StatsError(GexProbeError):
    pass


class SingularDesign(StatsError):
    pass


class DegenerateGroups(StatsError):
    pass


class InfeasibleSpec(GexProbeError):
    pass


class StageError(GexProbeError):
    def __init__(self, stage, module, message, exit_code=1):
        self.stage = stage
        self.module = module
        self.exit_code = exit_code
        super().__init__(f"stage {stage!r} ({module}): {message}")
