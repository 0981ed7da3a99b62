"""Exception hierarchy shared by every leakfuzz module."""


class LeakFuzzError(Exception):
    """Base class for all leakfuzz errors."""


class BudgetExceededError(LeakFuzzError, ValueError):
    """An exhaustive computation was asked to go beyond its documented budget."""


class RejectedInputError(LeakFuzzError, ValueError):
    """An input pair violates the target's length or alphabet constraint.

    ``index`` is set by :func:`leakfuzz.execution.batch_execute` to the
    position of the offending secret.
    """

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class TargetFaultError(LeakFuzzError):
    """The target raised while executing; carries the inputs for reproduction."""

    def __init__(self, target, secret, public, index=None):
        super().__init__(
            f"target {target!r} faulted on secret={secret.hex()} public={public.hex()}"
        )
        self.target = target
        self.secret = secret
        self.public = public
        self.index = index


class CampaignAbortError(LeakFuzzError):
    """No initial seed could be executed without a target fault."""
