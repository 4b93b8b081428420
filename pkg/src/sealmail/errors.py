"""Exception types shared across the sealmail components."""


class SealmailError(Exception):
    """Base class for all sealmail errors."""


class EntropyUnavailable(SealmailError):
    """The secure random source failed."""


class AuthenticationFailed(SealmailError):
    """Tag verification failed: the envelope was tampered with or the key is
    wrong. Never carries plaintext."""


class MalformedEnvelope(SealmailError):
    """Structural violation in an envelope or its serialization."""


class UnsupportedVersion(SealmailError):
    """Envelope version byte is not supported."""


class AttachmentTooLarge(SealmailError):
    """An attachment exceeds the per-file size limit."""


class DuplicateMessageId(SealmailError):
    """A record for this message id already exists."""


class EmptyRecipients(SealmailError):
    """A message must have at least one recipient."""


class NotFound(SealmailError):
    """No record for the requested id."""


class AccessDenied(SealmailError):
    """Caller is not entitled to the requested record."""


class TransportFailure(SealmailError):
    """The mail transport failed to dispatch a notification."""


class OutOfBounds(SealmailError):
    """Mutation position lies outside the target region."""


class ImplUnavailable(SealmailError):
    """The requested benchmark implementation cannot run here."""


class IncompleteGrid(SealmailError):
    """Benchmark samples do not cover the configured size grid."""


class IoFailure(SealmailError):
    """Report emission failed."""
