"""Exception types shared across the toolkit."""


class BbfragError(Exception):
    """Base class for every error raised by this package."""


class DimacsError(BbfragError, ValueError):
    """Malformed DIMACS input."""


class BudgetExhausted(BbfragError):
    """A solver node cap, sampling budget or flip cap ran out.

    Always distinct from an unsatisfiability verdict.
    """


class UnsatisfiableError(BbfragError):
    """An operation that needs a satisfiable instance got an unsatisfiable one."""


class SatisfiableError(BbfragError):
    """An operation that needs an unsatisfiable instance got a satisfiable one."""


class UndefinedStatistic(BbfragError, ValueError):
    """A statistic is undefined for the given data (zero variance, empty input...)."""


class RobustnessUndefined(BbfragError, ValueError):
    """Backbone robustness was requested for an instance with an empty backbone."""


class UnflippableClause(BbfragError):
    """Local search reached a state whose only unsatisfied clause is empty."""
