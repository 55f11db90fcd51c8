"""Exception hierarchy shared across the toolkit.

The CLI maps these onto exit codes: input/parse problems exit 2, pipeline
and validation problems exit 3, scorer/protocol problems exit 4.
"""

from __future__ import annotations


class ChadpodError(Exception):
    """Base class for all toolkit errors."""


class GraphFormatError(ChadpodError):
    """Malformed graph document: bad JSON, bad schema, duplicate node ids,
    or edges referencing missing nodes. The message carries the location."""


class DatasetSchemaError(ChadpodError):
    """A dataset file violates the JSONL example schema."""


class BuildError(ChadpodError):
    """A dataset-building step cannot satisfy its contract (insufficient
    negatives, too few games, bad configuration, ...)."""


class ScorerError(ChadpodError):
    """Base class for scorer failures."""


class ExternalScorerError(ScorerError):
    """Base class for external-scorer protocol failures."""


class ConnectionFailedError(ExternalScorerError):
    """Could not spawn or connect to the external scorer."""


class HandshakeError(ExternalScorerError):
    """The scorer did not complete the protocol handshake."""


class ScorerTimeoutError(ExternalScorerError):
    """The scorer did not answer within the configured timeout."""


class MalformedResponseError(ExternalScorerError):
    """The scorer sent a line that is not a valid response."""


class ProbabilityRangeError(ExternalScorerError):
    """The scorer returned a probability outside [0, 1]."""


class ServerReportedError(ExternalScorerError):
    """The scorer answered a request with an error line."""
