"""Exception types shared across the package.

The CLI maps these onto exit codes: InvalidArgument -> 2 (when it comes from
parsing) or 3 (HypothesisError), Infeasible -> 3, StageFailure -> 3,
InvariantViolation -> 4, SizeLimit -> 3.
"""


class InvalidArgument(ValueError):
    """Input does not satisfy the documented precondition of an operation."""


class HypothesisError(InvalidArgument):
    """A lemma hypothesis does not hold for the given instance.

    ``hypothesis`` names the failed condition so callers can report it.
    """

    def __init__(self, hypothesis: str, detail: str = ""):
        self.hypothesis = hypothesis
        self.detail = detail
        msg = hypothesis if not detail else f"{hypothesis}: {detail}"
        super().__init__(msg)


class Infeasible(Exception):
    """No object with the requested properties exists for this input."""


class InvariantViolation(AssertionError):
    """A postcondition that should be guaranteed failed; indicates a bug."""


class StageFailure(InvariantViolation):
    """A constructive stage could not complete its internal matching.

    At small sizes the asymptotic slack a stage relies on may be missing, so
    this is an expected outcome rather than a bug.
    """

    def __init__(self, stage: str, detail: str = ""):
        self.stage = stage
        self.detail = detail
        super().__init__(f"stage {stage} failed" + (f": {detail}" if detail else ""))


class SizeLimit(Exception):
    """Instance exceeds the configured size cap of an exact routine."""
