"""Exception types shared across the package."""


class CohlayerError(Exception):
    """Base class for all package-specific errors."""


class ParseError(CohlayerError):
    """Raised on malformed formula or structure text.

    Carries the offending source span (start/end offsets into the input)
    and a short description of what was expected.
    """

    def __init__(self, message: str, start: int, end: int):
        super().__init__(f"{message} (at {start}..{end})")
        self.message = message
        self.start = start
        self.end = end


class CapExceededError(CohlayerError):
    """Embedding search space larger than the configured cap."""


class ContextBoundError(CohlayerError):
    """Evaluation context exceeds the truth-table atom budget."""


class DivisionByCertaintyError(CohlayerError):
    """Conditioning on the negation of an event with probability 1."""


class IncoherentBaseError(CohlayerError):
    """Base measure produced a value no coherent measure could produce."""


class MeasureZeroError(IncoherentBaseError):
    """Conditioning on an event the measure assigns zero mass."""


class MissingLabelError(CohlayerError):
    """NLI label propagation needs a pair label the input does not carry."""


class DataFormatError(CohlayerError):
    """Dataset or report file fails schema validation.

    `problems` lists every offending line or field, not just the first.
    """

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        head = "; ".join(self.problems[:5])
        more = "" if len(self.problems) <= 5 else f" (+{len(self.problems) - 5} more)"
        super().__init__(f"{len(self.problems)} problem(s): {head}{more}")


class ProviderError(CohlayerError):
    """Provider could not produce a usable prediction."""


class FixtureMissError(ProviderError):
    """Fixture provider has no entry for the requested payload."""


class InvariantViolationError(ProviderError):
    """Provider response violates a distribution invariant."""
