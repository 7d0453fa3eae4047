"""Exception and warning types shared across the toolkit."""


class IslandUCError(Exception):
    """Base class for all toolkit errors."""


class ParseError(IslandUCError):
    """Input file is not syntactically valid (JSON/CSV)."""


class SchemaError(IslandUCError):
    """Input parses but a required section/field is missing or mistyped."""


class ValidationError(IslandUCError):
    """A model invariant is violated; message names the offending field."""


class ConfigError(IslandUCError):
    """Bad experiment configuration or CLI arguments (exit code 4)."""


class SolverFailure(IslandUCError):
    """Backend returned an unusable status (exit code 3)."""


class MasterInfeasible(IslandUCError):
    """Feasibility cuts exclude every commitment schedule."""

    def __init__(self, message, cuts=()):
        super().__init__(message)
        self.cuts = tuple(cuts)


class EDInfeasible(IslandUCError):
    """Fixed-commitment dispatch has no feasible point for the scenario."""


class BigMTooSmall(IslandUCError):
    """Supplied gating constant cannot deactivate the security row."""


class EmptyIsland(IslandUCError):
    """No unit online: the uniform-frequency model is undefined."""


class NumericalBlowup(IslandUCError):
    """Frequency deviation left the model's validity region (|dw| > 0.5 p.u.).

    Raised only when simulation options request strict mode; the default is
    to truncate the trace and flag it unstable, which downstream labeling
    treats as unacceptable."""


class EmptyDataset(IslandUCError):
    """Incident stream produced no rows."""


class ZeroVariance(IslandUCError):
    """Correlation is undefined for a constant column."""


class FitNonConvergence(IslandUCError):
    """Newton iterations exhausted before reaching the gradient tolerance."""


class DegenerateLabels(UserWarning):
    """Dataset contains a single class; downstream fits are unreliable."""


class NonConvergentInner(UserWarning):
    """Worst-case search hit its iteration cap; cut kept but flagged."""
