"""Error taxonomy shared by the domain engine and the HTTP layer.

Every rejection carries a stable ``code`` string so the API can map it to a
status without importing each exception class individually.
"""

from __future__ import annotations


class RoundtableError(Exception):
    """Base class; ``code`` is the wire-visible rejection name."""

    code = "Error"

    def __init__(self, message: str = ""):
        super().__init__(message or self.code)


# -- validation (HTTP 400) --------------------------------------------------

class ValidationError(RoundtableError):
    code = "Validation"


class EmptyName(ValidationError):
    code = "EmptyName"


class InvalidDuration(ValidationError):
    code = "InvalidDuration"


class EmptyUtterance(ValidationError):
    code = "EmptyUtterance"


class EmptyPayload(ValidationError):
    code = "EmptyPayload"


class ZeroLengthChunk(ValidationError):
    code = "ZeroLengthChunk"


class UnsupportedFormat(ValidationError):
    code = "UnsupportedFormat"


class IncompleteGuesses(ValidationError):
    code = "IncompleteGuesses"


# -- domain rejections: event not legal in the current state (HTTP 409) -----

class DomainRejection(RoundtableError):
    """The event is well-formed but not allowed right now; state unchanged."""

    code = "DomainRejection"


class WrongPhase(DomainRejection):
    code = "WrongPhase"


class OutOfTurn(DomainRejection):
    code = "OutOfTurn"


class SessionInProgress(DomainRejection):
    code = "SessionInProgress"


class DuplicateActiveName(DomainRejection):
    code = "DuplicateActiveName"


class UnknownTheme(DomainRejection):
    code = "UnknownTheme"


class InactiveTheme(DomainRejection):
    code = "InactiveTheme"


class ClockWentBackwards(DomainRejection):
    code = "ClockWentBackwards"


class EmptyRoster(DomainRejection):
    code = "EmptyRoster"


class NoSourceImages(DomainRejection):
    code = "NoSourceImages"


class SlotNotActive(DomainRejection):
    code = "SlotNotActive"


class DuplicateRecording(DomainRejection):
    code = "DuplicateRecording"


class RecordingClosed(DomainRejection):
    code = "RecordingClosed"


class EmptyRecording(DomainRejection):
    code = "EmptyRecording"


class ClockSkew(DomainRejection):
    code = "ClockSkew"


# -- unknown resources (HTTP 404) --------------------------------------------

class NotFound(RoundtableError):
    code = "NotFound"


class UnknownSession(NotFound):
    code = "UnknownSession"


class UnknownParticipant(NotFound):
    code = "UnknownParticipant"


class MissingLocale(NotFound):
    code = "MissingLocale"


class SeqAhead(NotFound):
    code = "SeqAhead"


# -- locale pack shape -------------------------------------------------------

class IncompletePack(ValidationError):
    code = "IncompletePack"


# -- startup ----------------------------------------------------------------

class MissingCredentials(ValidationError):
    code = "MissingCredentials"


# -- image provider (HTTP 502) -----------------------------------------------

class ProviderError(RoundtableError):
    code = "ProviderError"


class NoResults(ProviderError):
    code = "NoResults"


class ProviderTimeout(ProviderError):
    code = "ProviderTimeout"


class ProviderRejected(ProviderError):
    code = "ProviderRejected"


class ImageUnavailable(DomainRejection):
    """Topic held pending a manual image or a retry; wraps the provider cause."""

    code = "ImageUnavailable"

    def __init__(self, message: str = "", cause: str = ""):
        super().__init__(message)
        self.cause = cause
