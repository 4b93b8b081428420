"""AEAD envelope kernel: AES-128-GCM sealing of message parts.

Every part of a secure message (the body, each attachment) is sealed into
one Envelope. The associated data binds the part to its message, position,
sender, and content type, so envelopes cannot be replayed across messages
or swapped between positions without failing tag verification.

Envelope binary layout (bit-exact, version 0x01):

    version(1) || nonce(12) || ad_len(4, big-endian) || ad_canonical(ad_len)
               || tag(16) || ciphertext(rest)

Text transport is base64url of that layout, without padding.

Canonical associated-data serialization is a fixed-order field
concatenation, each field prefixed with a 4-byte big-endian length:

    message_id | part_label ("body"/"attachment") | part_index (4-byte BE)
              | sender_id | content_type

The same length-prefix framing carries (subject, body) inside the body
part's plaintext and (filename, content) inside each attachment part's
plaintext, so filenames and subjects stay confidential.

Authentication happens over the raw transported AD bytes; the structured
view is only parsed after (or independent of) tag verification, so a
mutation anywhere in the AD region fails as AuthenticationFailed rather
than leaking which byte was hit.
"""

from __future__ import annotations

import base64
import mimetypes
import os
import struct
import uuid
from dataclasses import dataclass, field

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from .errors import (
    AttachmentTooLarge,
    AuthenticationFailed,
    EntropyUnavailable,
    MalformedEnvelope,
    UnsupportedVersion,
)

ENVELOPE_VERSION = 0x01
NONCE_LEN = 12
TAG_LEN = 16
KEY_LEN = 16  # AES-128
ATTACHMENT_LIMIT = 20 * 1024 * 1024  # 20 MiB per attachment

PART_BODY = "body"
PART_ATTACHMENT = "attachment"

_HEADER_MIN = 1 + NONCE_LEN + 4  # version + nonce + ad_len

_urandom = os.urandom


def _secure_random(n: int) -> bytes:
    try:
        data = _urandom(n)
    except (OSError, NotImplementedError) as exc:
        raise EntropyUnavailable(f"secure random source failed: {exc}") from exc
    if len(data) != n:
        raise EntropyUnavailable("secure random source returned short read")
    return data


# --- field framing (shared by AD serialization and part plaintexts) ------


def _frame(*fields: bytes) -> bytes:
    out = bytearray()
    for f in fields:
        out += struct.pack(">I", len(f))
        out += f
    return bytes(out)


def _unframe(data: bytes, count: int) -> list[bytes]:
    fields = []
    offset = 0
    for _ in range(count):
        if offset + 4 > len(data):
            raise MalformedEnvelope("truncated field frame")
        (flen,) = struct.unpack_from(">I", data, offset)
        offset += 4
        if offset + flen > len(data):
            raise MalformedEnvelope("field length exceeds buffer")
        fields.append(data[offset : offset + flen])
        offset += flen
    if offset != len(data):
        raise MalformedEnvelope("trailing bytes after last field")
    return fields


# --- domain types ---------------------------------------------------------


@dataclass(frozen=True)
class MessageKey:
    """One 128-bit symmetric key shared by every recipient of a message."""

    key_id: str
    material: bytes

    def __post_init__(self):
        if len(self.material) != KEY_LEN:
            raise ValueError(f"key material must be {KEY_LEN} bytes, got {len(self.material)}")

    def __repr__(self) -> str:  # never show key material
        return f"MessageKey(key_id={self.key_id!r})"


@dataclass(frozen=True)
class AssociatedData:
    """Authenticated-but-unencrypted metadata bound into each envelope."""

    message_id: str
    part_label: str  # PART_BODY or PART_ATTACHMENT
    part_index: int
    sender_id: str
    content_type: str

    def __post_init__(self):
        if self.part_label not in (PART_BODY, PART_ATTACHMENT):
            raise ValueError(f"unknown part label: {self.part_label!r}")
        if self.part_index < 0:
            raise ValueError("part_index must be non-negative")
        if self.part_label == PART_BODY and self.part_index != 0:
            raise ValueError("body part index must be 0")

    def to_canonical(self) -> bytes:
        """Injective byte serialization used as the AEAD associated data."""
        return _frame(
            self.message_id.encode(),
            self.part_label.encode(),
            struct.pack(">I", self.part_index),
            self.sender_id.encode(),
            self.content_type.encode(),
        )

    @classmethod
    def from_canonical(cls, data: bytes) -> "AssociatedData":
        try:
            mid, label, index, sender, ctype = _unframe(data, 5)
        except MalformedEnvelope:
            raise
        if len(index) != 4:
            raise MalformedEnvelope("part_index field must be 4 bytes")
        try:
            return cls(
                message_id=mid.decode(),
                part_label=label.decode(),
                part_index=struct.unpack(">I", index)[0],
                sender_id=sender.decode(),
                content_type=ctype.decode(),
            )
        except (UnicodeDecodeError, ValueError) as exc:
            raise MalformedEnvelope(f"invalid associated data: {exc}") from exc


@dataclass(frozen=True)
class Envelope:
    """One sealed unit: nonce, ciphertext, tag, and raw associated data.

    ``ad_bytes`` is the transported canonical serialization and is what tag
    verification covers; ``ad`` parses it into the structured view.
    """

    version: int
    nonce: bytes
    ad_bytes: bytes
    tag: bytes
    ciphertext: bytes

    def __post_init__(self):
        if len(self.nonce) != NONCE_LEN:
            raise MalformedEnvelope(f"nonce must be {NONCE_LEN} bytes, got {len(self.nonce)}")
        if len(self.tag) != TAG_LEN:
            raise MalformedEnvelope(f"tag must be {TAG_LEN} bytes, got {len(self.tag)}")
        if not 0 <= self.version <= 0xFF:
            raise MalformedEnvelope(f"version out of range: {self.version}")

    @property
    def ad(self) -> AssociatedData:
        return AssociatedData.from_canonical(self.ad_bytes)


@dataclass
class SecureMessage:
    """Plaintext message: subject, UTF-8 body, ordered (filename, bytes)
    attachments."""

    subject: str
    body: str
    attachments: list[tuple[str, bytes]] = field(default_factory=list)

    def __post_init__(self):
        for name, content in self.attachments:
            if len(content) > ATTACHMENT_LIMIT:
                raise AttachmentTooLarge(
                    f"attachment {name!r} is {len(content)} bytes (limit {ATTACHMENT_LIMIT})"
                )


@dataclass(frozen=True)
class EncryptedMessage:
    """Per-part envelope bundle for one message: body first, attachments
    in order."""

    message_id: str
    body_envelope: Envelope
    attachment_envelopes: tuple[Envelope, ...]


# --- operations ------------------------------------------------------------


def generate_key() -> MessageKey:
    """Generate a fresh 128-bit message key from the system CSPRNG."""
    return MessageKey(key_id=str(uuid.uuid4()), material=_secure_random(KEY_LEN))


def seal_raw(
    plaintext: bytes,
    key: MessageKey,
    ad_bytes: bytes,
    *,
    _nonce: bytes | None = None,
) -> Envelope:
    """Seal with already-serialized associated data (byte-buffer surface).

    ``_nonce`` is a test-only hook for known-answer vectors; production
    callers must never pass it.
    """
    nonce = _secure_random(NONCE_LEN) if _nonce is None else _nonce
    if len(nonce) != NONCE_LEN:
        raise ValueError(f"nonce must be {NONCE_LEN} bytes")
    out = AESGCM(key.material).encrypt(nonce, plaintext, ad_bytes)
    return Envelope(
        version=ENVELOPE_VERSION,
        nonce=nonce,
        ad_bytes=ad_bytes,
        tag=out[-TAG_LEN:],
        ciphertext=out[:-TAG_LEN],
    )


def seal(
    plaintext: bytes,
    key: MessageKey,
    ad: AssociatedData,
    *,
    _nonce: bytes | None = None,
) -> Envelope:
    """AEAD-seal plaintext under ``key`` with a fresh random nonce, binding
    the canonical serialization of ``ad``."""
    return seal_raw(plaintext, key, ad.to_canonical(), _nonce=_nonce)


def seal_into(
    plaintext: bytes, key: MessageKey, ad_bytes: bytes, nonce: bytes, out: bytearray
) -> bytes:
    """Zero-allocation seal: writes ciphertext into ``out``, returns the tag.

    ``out`` must hold at least len(plaintext) + 15 bytes. The caller owns
    nonce freshness; the envelope layer (seal) is the safe default.
    """
    if len(nonce) != NONCE_LEN:
        raise ValueError(f"nonce must be {NONCE_LEN} bytes")
    encryptor = Cipher(algorithms.AES(key.material), modes.GCM(nonce)).encryptor()
    encryptor.authenticate_additional_data(ad_bytes)
    encryptor.update_into(plaintext, out)
    encryptor.finalize()
    return encryptor.tag


def open_into(
    ciphertext: bytes,
    key: MessageKey,
    ad_bytes: bytes,
    nonce: bytes,
    tag: bytes,
    out: bytearray,
) -> int:
    """Zero-allocation open: writes plaintext into ``out``, returns its
    length. Raises AuthenticationFailed without releasing anything on tag
    mismatch (the buffer contents are unspecified then)."""
    if len(nonce) != NONCE_LEN:
        raise ValueError(f"nonce must be {NONCE_LEN} bytes")
    decryptor = Cipher(algorithms.AES(key.material), modes.GCM(nonce, tag)).decryptor()
    decryptor.authenticate_additional_data(ad_bytes)
    written = decryptor.update_into(ciphertext, out)
    try:
        decryptor.finalize()
    except InvalidTag:
        raise AuthenticationFailed("envelope tag verification failed") from None
    return written


def open_envelope(envelope: Envelope, key: MessageKey) -> bytes:
    """Verify and decrypt one envelope.

    Returns the exact original plaintext iff tag verification over
    (nonce, ciphertext, raw AD bytes) succeeds; raises otherwise, releasing
    no plaintext.
    """
    if envelope.version != ENVELOPE_VERSION:
        raise UnsupportedVersion(f"envelope version {envelope.version:#04x}")
    try:
        return AESGCM(key.material).decrypt(
            envelope.nonce, envelope.ciphertext + envelope.tag, envelope.ad_bytes
        )
    except InvalidTag:
        raise AuthenticationFailed("envelope tag verification failed") from None


def _attachment_content_type(filename: str) -> str:
    guessed, _ = mimetypes.guess_type(filename)
    return guessed or "application/octet-stream"


def encrypt_message(
    msg: SecureMessage, key: MessageKey, message_id: str, sender_id: str
) -> EncryptedMessage:
    """Seal a message part by part under the single shared key.

    Body is part 0 with label "body"; attachment i is sealed with label
    "attachment" and part_index i. Subjects and filenames travel inside the
    sealed plaintexts, never in associated data.
    """
    body_ad = AssociatedData(
        message_id=message_id,
        part_label=PART_BODY,
        part_index=0,
        sender_id=sender_id,
        content_type="text/plain; charset=utf-8",
    )
    body_plain = _frame(msg.subject.encode(), msg.body.encode())
    body_env = seal(body_plain, key, body_ad)

    att_envs = []
    for i, (filename, content) in enumerate(msg.attachments):
        if len(content) > ATTACHMENT_LIMIT:
            raise AttachmentTooLarge(
                f"attachment {filename!r} is {len(content)} bytes (limit {ATTACHMENT_LIMIT})"
            )
        ad = AssociatedData(
            message_id=message_id,
            part_label=PART_ATTACHMENT,
            part_index=i,
            sender_id=sender_id,
            content_type=_attachment_content_type(filename),
        )
        att_envs.append(seal(_frame(filename.encode(), content), key, ad))

    return EncryptedMessage(
        message_id=message_id,
        body_envelope=body_env,
        attachment_envelopes=tuple(att_envs),
    )


def decrypt_message(enc: EncryptedMessage, key: MessageKey) -> SecureMessage:
    """Inverse of encrypt_message: body first, then attachments in order.

    Whole-message rejection: if any part fails verification or sits at the
    wrong position, nothing is returned.
    """
    body_ad = enc.body_envelope.ad
    if body_ad.part_label != PART_BODY or body_ad.part_index != 0:
        raise AuthenticationFailed("body envelope at wrong position")
    if body_ad.message_id != enc.message_id:
        raise AuthenticationFailed("body envelope belongs to another message")
    body_plain = open_envelope(enc.body_envelope, key)
    subject, body = _unframe(body_plain, 2)

    attachments = []
    for i, env in enumerate(enc.attachment_envelopes):
        ad = env.ad
        if ad.part_label != PART_ATTACHMENT or ad.part_index != i:
            raise AuthenticationFailed(f"attachment envelope at position {i} is mismatched")
        if ad.message_id != enc.message_id:
            raise AuthenticationFailed("attachment envelope belongs to another message")
        plain = open_envelope(env, key)
        filename, content = _unframe(plain, 2)
        attachments.append((filename.decode(), content))

    return SecureMessage(subject=subject.decode(), body=body.decode(), attachments=attachments)


# --- envelope codec --------------------------------------------------------


def encode_envelope(envelope: Envelope) -> bytes:
    """Serialize to the binary layout documented in the module docstring."""
    return (
        bytes([envelope.version])
        + envelope.nonce
        + struct.pack(">I", len(envelope.ad_bytes))
        + envelope.ad_bytes
        + envelope.tag
        + envelope.ciphertext
    )


def decode_envelope(data: bytes) -> Envelope:
    """Parse the binary layout; raises on any structural violation.

    The AD region is kept as raw bytes: its internal structure is only
    interpreted via Envelope.ad, after authentication where it matters.
    """
    if len(data) < _HEADER_MIN + TAG_LEN:
        raise MalformedEnvelope(f"buffer too short: {len(data)} bytes")
    version = data[0]
    if version != ENVELOPE_VERSION:
        raise UnsupportedVersion(f"envelope version {version:#04x}")
    nonce = data[1 : 1 + NONCE_LEN]
    (ad_len,) = struct.unpack_from(">I", data, 1 + NONCE_LEN)
    body_start = _HEADER_MIN + ad_len
    if len(data) < body_start + TAG_LEN:
        raise MalformedEnvelope("buffer too short for declared AD length")
    ad_bytes = data[_HEADER_MIN:body_start]
    tag = data[body_start : body_start + TAG_LEN]
    ciphertext = data[body_start + TAG_LEN :]
    return Envelope(version=version, nonce=nonce, ad_bytes=ad_bytes, tag=tag, ciphertext=ciphertext)


def b64url_encode(data: bytes) -> str:
    """Base64url without padding (text transport)."""
    return base64.urlsafe_b64encode(data).rstrip(b"=").decode("ascii")


def b64url_decode(text: str) -> bytes:
    pad = -len(text) % 4
    try:
        return base64.b64decode(text + "=" * pad, altchars=b"-_", validate=True)
    except (ValueError, TypeError) as exc:
        raise MalformedEnvelope(f"invalid base64url: {exc}") from exc


def encode_envelope_text(envelope: Envelope) -> str:
    return b64url_encode(encode_envelope(envelope))


def decode_envelope_text(text: str) -> Envelope:
    return decode_envelope(b64url_decode(text))
