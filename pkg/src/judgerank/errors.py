"""Exception hierarchy for judgerank."""


class JudgeRankError(Exception):
    """Base class for all library errors."""


class InvalidRecordError(JudgeRankError, ValueError):
    """A comparison record is structurally invalid (e.g. a self-comparison)."""


class InvalidOutcomeError(JudgeRankError, ValueError):
    """An outcome is not one of 0, 0.5, 1 (or the matching tokens)."""


class ParseError(JudgeRankError, ValueError):
    """A row of an input file could not be parsed."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class RosterError(JudgeRankError, ValueError):
    """Duplicate names in a roster, or a name missing from an explicit roster."""


class EmptyDataError(JudgeRankError, ValueError):
    """No comparisons were supplied to an estimator."""


class DisconnectedGraphError(JudgeRankError, ValueError):
    """The comparison graph has more than one connected component."""

    def __init__(self, report):
        self.report = report
        super().__init__(
            f"comparison graph is disconnected ({len(report.components)} components)"
        )


class RankDeficiencyError(JudgeRankError, ValueError):
    """The Fisher information is singular beyond the two gauge directions."""


class AssumptionViolation(JudgeRankError, ValueError):
    """Quality scores are all equal, so judge discriminations are unidentifiable."""


class ConfigError(JudgeRankError, ValueError):
    """A study or fit configuration failed validation."""
