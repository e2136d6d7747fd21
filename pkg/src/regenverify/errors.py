"""Exception and warning types shared across the package."""

from __future__ import annotations


class ConfigurationError(ValueError):
    """Invalid model, schedule, or run parameters.

    Carries an optional dotted JSON path so config errors can point at the
    offending field.
    """

    def __init__(self, message: str, path: str | None = None):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class BudgetExceededError(RuntimeError):
    """A simulation exceeded its cycle or event budget."""


class HypothesisError(RuntimeError):
    """A time schedule fails the divergence/ratio hypotheses and no override
    was requested."""

    def __init__(self, verdict):
        self.verdict = verdict
        super().__init__("schedule fails the ratio hypotheses; "
                         "pass allow_hypothesis_fail=True to run anyway")


class ArithmeticCyclesWarning(UserWarning):
    """Cycle lengths live on a lattice; the limit theory assumes a
    nonarithmetic law, so results are for negative controls only."""
