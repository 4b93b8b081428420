"""Key-management service: the only trusted component.

Receives, stores, and releases per-message encryption keys. One KeyRecord
per message regardless of recipient count; entitlement is a bearer token
minted per (message, recipient) at registration. Unknown message ids and
bad credentials produce byte-identical HTTP responses so the key space
cannot be enumerated.

REST surface (JSON bodies, key material as unpadded base64url):

    POST /keys                  {message_id, key_b64, sender_id, recipients[]}
                                -> 201 {credentials[], sender_token}
    GET  /keys/{id}             Authorization: Bearer <token> -> {key_b64}
    GET  /keys/{id}/audit       Authorization: Bearer <sender token>
                                -> {fetches[]}

Run directly:  python -m sealmail.keyservice --port 8801 --storage keys.jsonl
"""

from __future__ import annotations

import argparse
import hmac
import json
import logging
import os
import secrets
import threading
import time
from dataclasses import dataclass, field

from fastapi import FastAPI, Header
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .errors import AccessDenied, DuplicateMessageId, EmptyRecipients, NotFound
from .kernel import KEY_LEN, MessageKey, b64url_decode, b64url_encode

log = logging.getLogger("sealmail.keyservice")

TOKEN_BYTES = 32  # 256 bits of entropy per bearer token


@dataclass(frozen=True)
class RecipientCredential:
    recipient_id: str
    token: str


@dataclass
class KeyRecord:
    """Server-side binding of a message id to its key and entitlements."""

    message_id: str
    key: MessageKey
    sender_id: str
    recipients: frozenset[str]
    tokens: dict[str, str]  # recipient_id -> bearer token
    sender_token: str
    created_at: float
    fetches: list[tuple[str, float]] = field(default_factory=list)


@dataclass(frozen=True)
class RegistrationReceipt:
    """Outcome of register_key: one credential per recipient, plus the
    sender's audit credential."""

    credentials: list[RecipientCredential]
    sender_credential: RecipientCredential


class InMemoryKeyStore:
    """Dict-backed store for tests and ephemeral runs."""

    def __init__(self):
        self._records: dict[str, KeyRecord] = {}
        self._lock = threading.Lock()

    def add(self, record: KeyRecord) -> None:
        with self._lock:
            if record.message_id in self._records:
                raise DuplicateMessageId(record.message_id)
            self._records[record.message_id] = record

    def get(self, message_id: str) -> KeyRecord | None:
        with self._lock:
            return self._records.get(message_id)

    def append_fetch(self, message_id: str, recipient_id: str, at: float) -> None:
        with self._lock:
            self._records[message_id].fetches.append((recipient_id, at))

    def __len__(self) -> int:
        return len(self._records)


class FileKeyStore:
    """Append-only JSONL store; the full state is replayed on open.

    Registration and fetch events are appended under a lock, so duplicate
    registration races resolve to exactly one winner even across the
    in-memory index and the file.
    """

    def __init__(self, path: str):
        self.path = path
        self._mem = InMemoryKeyStore()
        self._lock = threading.Lock()
        if os.path.exists(path):
            self._replay()

    def _replay(self) -> None:
        with open(self.path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                event = json.loads(line)
                if event["event"] == "register":
                    self._mem.add(_record_from_event(event))
                elif event["event"] == "fetch":
                    self._mem.append_fetch(event["message_id"], event["recipient_id"], event["at"])

    def _append(self, event: dict) -> None:
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(event, sort_keys=True) + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def add(self, record: KeyRecord) -> None:
        with self._lock:
            self._mem.add(record)  # raises DuplicateMessageId first
            self._append(_record_to_event(record))

    def get(self, message_id: str) -> KeyRecord | None:
        return self._mem.get(message_id)

    def append_fetch(self, message_id: str, recipient_id: str, at: float) -> None:
        with self._lock:
            self._mem.append_fetch(message_id, recipient_id, at)
            self._append(
                {"event": "fetch", "message_id": message_id, "recipient_id": recipient_id, "at": at}
            )

    def __len__(self) -> int:
        return len(self._mem)


def _record_to_event(r: KeyRecord) -> dict:
    return {
        "event": "register",
        "message_id": r.message_id,
        "key_id": r.key.key_id,
        "key_b64": b64url_encode(r.key.material),
        "sender_id": r.sender_id,
        "recipients": sorted(r.recipients),
        "tokens": r.tokens,
        "sender_token": r.sender_token,
        "created_at": r.created_at,
    }


def _record_from_event(e: dict) -> KeyRecord:
    return KeyRecord(
        message_id=e["message_id"],
        key=MessageKey(key_id=e["key_id"], material=b64url_decode(e["key_b64"])),
        sender_id=e["sender_id"],
        recipients=frozenset(e["recipients"]),
        tokens=dict(e["tokens"]),
        sender_token=e["sender_token"],
        created_at=e["created_at"],
    )


class KeyService:
    """Register, release, and audit per-message keys."""

    def __init__(self, store=None):
        self.store = store if store is not None else InMemoryKeyStore()

    def register_key(
        self, message_id: str, key: MessageKey, sender_id: str, recipients: list[str]
    ) -> RegistrationReceipt:
        """Persist one KeyRecord and mint one credential per recipient.

        The sender receives a separate credential for the audit endpoint.
        """
        if not recipients:
            raise EmptyRecipients("a message needs at least one recipient")
        unique = list(dict.fromkeys(recipients))
        tokens = {rid: secrets.token_urlsafe(TOKEN_BYTES) for rid in unique}
        sender_token = secrets.token_urlsafe(TOKEN_BYTES)
        record = KeyRecord(
            message_id=message_id,
            key=key,
            sender_id=sender_id,
            recipients=frozenset(unique),
            tokens=tokens,
            sender_token=sender_token,
            created_at=time.time(),
        )
        self.store.add(record)
        return RegistrationReceipt(
            credentials=[RecipientCredential(rid, tokens[rid]) for rid in unique],
            sender_credential=RecipientCredential(sender_id, sender_token),
        )

    def fetch_key(self, message_id: str, credential: RecipientCredential) -> MessageKey:
        """Release the key iff the credential was minted for this message;
        every successful release is appended to the fetch log."""
        record = self.store.get(message_id)
        if record is None:
            raise NotFound(message_id)
        expected = record.tokens.get(credential.recipient_id)
        if expected is None or not hmac.compare_digest(expected, credential.token):
            raise AccessDenied("credential does not match this message")
        self.store.append_fetch(message_id, credential.recipient_id, time.time())
        return record.key

    def fetch_key_by_token(self, message_id: str, token: str) -> MessageKey:
        """HTTP-surface variant: the bearer token alone identifies the
        recipient."""
        record = self.store.get(message_id)
        if record is None:
            raise NotFound(message_id)
        for recipient_id, expected in record.tokens.items():
            if hmac.compare_digest(expected, token):
                return self.fetch_key(message_id, RecipientCredential(recipient_id, token))
        raise AccessDenied("credential does not match this message")

    def audit_by_token(self, message_id: str, token: str) -> list[tuple[str, float]]:
        record = self.store.get(message_id)
        if record is None:
            raise NotFound(message_id)
        return self.audit(message_id, RecipientCredential(record.sender_id, token))

    def audit(self, message_id: str, sender_credential: RecipientCredential) -> list[tuple[str, float]]:
        """Return the append-only fetch log; registering sender only."""
        record = self.store.get(message_id)
        if record is None:
            raise NotFound(message_id)
        if sender_credential.recipient_id != record.sender_id or not hmac.compare_digest(
            record.sender_token, sender_credential.token
        ):
            raise AccessDenied("not the registering sender")
        return list(record.fetches)


# --- HTTP layer -------------------------------------------------------------


class RegisterBody(BaseModel):
    message_id: str
    key_b64: str
    sender_id: str
    recipients: list[str]


def _unavailable() -> JSONResponse:
    # One shared shape for NotFound and AccessDenied: enumeration defense.
    return JSONResponse(status_code=404, content={"error": "unavailable"})


def _bearer_token(authorization: str | None) -> str:
    if authorization and authorization.startswith("Bearer "):
        return authorization[len("Bearer ") :]
    return ""


def create_app(service: KeyService | None = None) -> FastAPI:
    service = service or KeyService()
    app = FastAPI(title="sealmail key service", docs_url=None, redoc_url=None)
    app.state.service = service

    @app.middleware("http")
    async def access_log(request, call_next):
        response = await call_next(request)
        # metadata only: no headers, no bodies, no tokens
        log.info("%s %s -> %d", request.method, request.url.path, response.status_code)
        return response

    @app.post("/keys", status_code=201)
    def register(body: RegisterBody):
        try:
            material = b64url_decode(body.key_b64)
        except Exception:
            return JSONResponse(status_code=400, content={"error": "bad_key_encoding"})
        if len(material) != KEY_LEN:
            return JSONResponse(status_code=400, content={"error": "bad_key_length"})
        try:
            receipt = service.register_key(
                body.message_id,
                MessageKey(key_id=body.message_id, material=material),
                body.sender_id,
                body.recipients,
            )
        except EmptyRecipients:
            return JSONResponse(status_code=400, content={"error": "empty_recipients"})
        except DuplicateMessageId:
            return JSONResponse(status_code=409, content={"error": "duplicate_message_id"})
        return {
            "credentials": [
                {"recipient_id": c.recipient_id, "token": c.token} for c in receipt.credentials
            ],
            "sender_token": receipt.sender_credential.token,
        }

    @app.get("/keys/{message_id}")
    def fetch(message_id: str, authorization: str | None = Header(default=None)):
        try:
            key = service.fetch_key_by_token(message_id, _bearer_token(authorization))
        except (NotFound, AccessDenied):
            return _unavailable()
        return {"key_b64": b64url_encode(key.material)}

    @app.get("/keys/{message_id}/audit")
    def audit(message_id: str, authorization: str | None = Header(default=None)):
        try:
            fetches = service.audit_by_token(message_id, _bearer_token(authorization))
        except (NotFound, AccessDenied):
            return _unavailable()
        return {"fetches": [{"recipient_id": rid, "at": at} for rid, at in fetches]}

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "records": len(service.store)}

    return app


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description="sealmail key service")
    parser.add_argument("--host", default=os.environ.get("SEALMAIL_KEYSVC_HOST", "127.0.0.1"))
    parser.add_argument(
        "--port", type=int, default=int(os.environ.get("SEALMAIL_KEYSVC_PORT", "8801"))
    )
    parser.add_argument(
        "--storage",
        default=os.environ.get("SEALMAIL_KEYSVC_STORAGE"),
        help="append-only JSONL path; omit for in-memory",
    )
    args = parser.parse_args(argv)

    store = FileKeyStore(args.storage) if args.storage else InMemoryKeyStore()
    app = create_app(KeyService(store))

    import uvicorn

    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
