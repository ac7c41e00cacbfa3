"""Exception hierarchy shared across the package."""


class FlexschedError(Exception):
    """Base class for all package errors."""


class ParseError(FlexschedError):
    """A document is malformed (bad syntax, wrong type, unknown field)."""


class ValidationError(FlexschedError):
    """An entity violates a model invariant; the message names the entity."""


class NoPath(FlexschedError):
    """Source and destination are disconnected under the given weights."""


class NegativeWeight(FlexschedError):
    """A weight function returned a negative value."""


class InsufficientCapacity(FlexschedError):
    """An allocation does not fit; `link` is the first saturated directed link."""

    def __init__(self, message: str, link: tuple[str, str] | None = None):
        super().__init__(message)
        self.link = link


class UnknownAllocation(FlexschedError):
    """Release of an allocation id that is not in the ledger."""


class UnknownLink(FlexschedError):
    """A link id does not exist in the network."""


class InfeasibleConfig(FlexschedError):
    """A generator or run configuration cannot be satisfied by the network."""


class DisconnectedTerminals(FlexschedError):
    """A terminal is unreachable from the root of the terminal set."""


class DisconnectedClosure(FlexschedError):
    """The metric closure does not span all terminals."""


class Blocked(FlexschedError):
    """No feasible allocation exists for a task; the network is unchanged."""

    def __init__(self, task_id: str, message: str = "no feasible allocation"):
        super().__init__(f"task {task_id}: {message}")
        self.task_id = task_id
