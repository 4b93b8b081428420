"""sealmail: client-side AEAD secure mail at desk scale.

Components:
  kernel          AES-128-GCM envelope sealing/opening and the wire codec
  keyservice      the trusted key-management REST service
  messageservice  the untrusted ciphertext store, HTML attachment builder,
                  and notification dispatcher
  efail           ciphertext-mutation harness proving tamper rejection
  bench           encrypt/decrypt timing, speedup and linearity analysis
"""

from .errors import (
    AccessDenied,
    AttachmentTooLarge,
    AuthenticationFailed,
    DuplicateMessageId,
    EmptyRecipients,
    EntropyUnavailable,
    ImplUnavailable,
    IncompleteGrid,
    IoFailure,
    MalformedEnvelope,
    NotFound,
    OutOfBounds,
    SealmailError,
    TransportFailure,
    UnsupportedVersion,
)
from .kernel import (
    AssociatedData,
    EncryptedMessage,
    Envelope,
    MessageKey,
    SecureMessage,
    decode_envelope,
    decode_envelope_text,
    decrypt_message,
    encode_envelope,
    encode_envelope_text,
    encrypt_message,
    generate_key,
    open_envelope,
    seal,
    seal_raw,
)

__all__ = [
    "AccessDenied",
    "AssociatedData",
    "AttachmentTooLarge",
    "AuthenticationFailed",
    "DuplicateMessageId",
    "EmptyRecipients",
    "EncryptedMessage",
    "EntropyUnavailable",
    "Envelope",
    "ImplUnavailable",
    "IncompleteGrid",
    "IoFailure",
    "MalformedEnvelope",
    "MessageKey",
    "NotFound",
    "OutOfBounds",
    "SealmailError",
    "SecureMessage",
    "TransportFailure",
    "UnsupportedVersion",
    "decode_envelope",
    "decode_envelope_text",
    "decrypt_message",
    "encode_envelope",
    "encode_envelope_text",
    "encrypt_message",
    "generate_key",
    "open_envelope",
    "seal",
    "seal_raw",
]

__version__ = "0.1.0"
