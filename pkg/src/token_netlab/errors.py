"""Exception hierarchy shared across the toolkit."""


class TokenNetlabError(Exception):
    """Base class for all toolkit errors."""


class MissingColumnError(TokenNetlabError):
    """Input CSV header lacks a required column."""


class StrictIngestError(TokenNetlabError):
    """A row was rejected while parsing in strict mode."""


class NonPositivePriceError(TokenNetlabError):
    """Price series contains a zero or negative price (log-price undefined)."""


class DuplicateDateError(TokenNetlabError):
    """Price series contains the same date twice."""


class EmptySeriesError(TokenNetlabError):
    """Price series has no data rows."""


class EmptyGraphError(TokenNetlabError):
    """Graph has no edges; nothing to analyze."""


class UnknownNodeError(TokenNetlabError):
    """Queried address is not a node of the graph."""


class TooFewPointsError(TokenNetlabError):
    """Not enough points left to fit a distribution."""


class BeyondCriticalTimeError(TokenNetlabError):
    """Model evaluated at or past the critical time."""


class SingularDesignError(TokenNetlabError):
    """Linear calibration has collinear regressors (degenerate tc/m/omega)."""


class NoFeasibleStartError(TokenNetlabError):
    """Window too short to admit any critical-time candidate."""


class SeriesTooShortError(TokenNetlabError):
    """Series does not cover the requested window span."""
