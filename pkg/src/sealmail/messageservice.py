"""Message service: untrusted ciphertext store and delivery plumbing.

Accepts envelope bundles, builds the self-contained HTML attachment whose
form posts the ciphertext material back for reading, dispatches
notification emails, and serves the reading page that bootstraps the
client. This module never holds key material and never decrypts; it
imports only codec-level helpers from the kernel.

Hidden-field format of the HTML attachment (per part i, 0 = body, then
attachments in order):

    adata_i      base64url( version(1) || nonce(12) || ad_canonical )
    mac_i        base64url( tag, 16 bytes )
    ciphertext_i base64url( ciphertext )

plus ``message_id`` and ``part_count``. Reassembling
``version || nonce || len(ad) || ad || tag || ciphertext`` recovers the
exact envelope encoding.

REST surface:

    POST /messages                 JSON bundle -> 201 {message_id}
    GET  /messages/{id}/attachment -> text/html download
    POST /messages/{id}/notify     -> {dispatched, failures[]}
    POST /read                     form post from the attachment -> reading page
    GET  /static/*                 client bundle and portable kernel module

Run directly:  python -m sealmail.messageservice --port 8802 --outbox ./outbox
"""

from __future__ import annotations

import argparse
import html
import json
import logging
import os
import struct
import threading
import time
from dataclasses import dataclass, field
from email.message import EmailMessage
from email.policy import SMTP

from fastapi import FastAPI, Request
from fastapi.responses import HTMLResponse, JSONResponse
from pydantic import BaseModel

from .errors import (
    DuplicateMessageId,
    MalformedEnvelope,
    NotFound,
    TransportFailure,
    UnsupportedVersion,
)
from .kernel import (
    NONCE_LEN,
    PART_ATTACHMENT,
    PART_BODY,
    Envelope,
    b64url_decode,
    b64url_encode,
    decode_envelope,
    decode_envelope_text,
)

log = logging.getLogger("sealmail.messageservice")


@dataclass(frozen=True)
class RecipientRef:
    recipient_id: str
    # reading credential, embedded in that recipient's personalized attachment
    token: str | None = None


@dataclass
class MessageRecord:
    """Stored ciphertext bundle: envelopes only, no keys, no plaintext."""

    message_id: str
    sender_id: str
    recipients: list[RecipientRef]
    envelope_texts: list[str]  # base64url envelope encodings, body first
    created_at: float
    status: str = "stored"  # stored | notified


@dataclass(frozen=True)
class HtmlAttachment:
    message_id: str
    html: str


@dataclass(frozen=True)
class NotifyResult:
    dispatched: int
    failures: list[str]


# --- hidden-field codec ------------------------------------------------------


def envelope_form_fields(index: int, envelope: Envelope) -> dict[str, str]:
    """Split one envelope into the attachment's three hidden fields."""
    header = bytes([envelope.version]) + envelope.nonce + envelope.ad_bytes
    return {
        f"adata_{index}": b64url_encode(header),
        f"mac_{index}": b64url_encode(envelope.tag),
        f"ciphertext_{index}": b64url_encode(envelope.ciphertext),
    }


def envelope_from_fields(adata: str, mac: str, ciphertext: str) -> Envelope:
    """Rebuild an envelope from hidden-field values (exact inverse)."""
    header = b64url_decode(adata)
    if len(header) < 1 + NONCE_LEN:
        raise MalformedEnvelope("adata field too short")
    ad_bytes = header[1 + NONCE_LEN :]
    encoded = (
        header[: 1 + NONCE_LEN]
        + struct.pack(">I", len(ad_bytes))
        + ad_bytes
        + b64url_decode(mac)
        + b64url_decode(ciphertext)
    )
    return decode_envelope(encoded)


# --- stores -----------------------------------------------------------------


class InMemoryMessageStore:
    def __init__(self):
        self._records: dict[str, MessageRecord] = {}
        self._lock = threading.Lock()

    def add(self, record: MessageRecord) -> None:
        with self._lock:
            if record.message_id in self._records:
                raise DuplicateMessageId(record.message_id)
            self._records[record.message_id] = record

    def get(self, message_id: str) -> MessageRecord | None:
        with self._lock:
            return self._records.get(message_id)

    def mark_notified(self, message_id: str) -> bool:
        """Atomic stored->notified transition; False if already notified."""
        with self._lock:
            record = self._records[message_id]
            if record.status == "notified":
                return False
            record.status = "notified"
            return True


class FileMessageStore:
    """Append-only JSONL mirror of the in-memory store."""

    def __init__(self, path: str):
        self.path = path
        self._mem = InMemoryMessageStore()
        self._lock = threading.Lock()
        if os.path.exists(path):
            self._replay()

    def _replay(self) -> None:
        with open(self.path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                event = json.loads(line)
                if event["event"] == "submit":
                    self._mem.add(
                        MessageRecord(
                            message_id=event["message_id"],
                            sender_id=event["sender_id"],
                            recipients=[
                                RecipientRef(r["recipient_id"], r.get("token"))
                                for r in event["recipients"]
                            ],
                            envelope_texts=list(event["envelopes"]),
                            created_at=event["created_at"],
                        )
                    )
                elif event["event"] == "notified":
                    self._mem.mark_notified(event["message_id"])

    def _append(self, event: dict) -> None:
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(event, sort_keys=True) + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def add(self, record: MessageRecord) -> None:
        with self._lock:
            self._mem.add(record)
            self._append(
                {
                    "event": "submit",
                    "message_id": record.message_id,
                    "sender_id": record.sender_id,
                    "recipients": [
                        {"recipient_id": r.recipient_id, "token": r.token}
                        for r in record.recipients
                    ],
                    "envelopes": record.envelope_texts,
                    "created_at": record.created_at,
                }
            )

    def get(self, message_id: str) -> MessageRecord | None:
        return self._mem.get(message_id)

    def mark_notified(self, message_id: str) -> bool:
        with self._lock:
            changed = self._mem.mark_notified(message_id)
            if changed:
                self._append({"event": "notified", "message_id": message_id})
            return changed


# --- mail transport ----------------------------------------------------------


class OutboxTransport:
    """Writes RFC-822 files to a directory: the desk-scale stand-in for SMTP."""

    def __init__(self, outbox_dir: str):
        self.outbox_dir = outbox_dir
        os.makedirs(outbox_dir, exist_ok=True)
        self._seq = 0
        self._lock = threading.Lock()

    def deliver(self, email: EmailMessage) -> None:
        with self._lock:
            self._seq += 1
            seq = self._seq
        safe_to = "".join(c if c.isalnum() or c in "@.-_" else "_" for c in email["To"])
        path = os.path.join(self.outbox_dir, f"{seq:04d}-{safe_to}.eml")
        try:
            with open(path, "wb") as fh:
                fh.write(email.as_bytes(policy=SMTP))
        except OSError as exc:
            raise TransportFailure(str(exc)) from exc


# --- service ----------------------------------------------------------------


@dataclass
class MessageServiceConfig:
    outbox_dir: str = "outbox"
    public_base_url: str = "http://127.0.0.1:8802"
    key_service_url: str = "http://127.0.0.1:8801"
    static_dir: str | None = None
    storage_path: str | None = None


class MessageService:
    def __init__(self, config: MessageServiceConfig, store=None, transport=None):
        self.config = config
        self.store = store if store is not None else (
            FileMessageStore(config.storage_path) if config.storage_path else InMemoryMessageStore()
        )
        self.transport = transport if transport is not None else OutboxTransport(config.outbox_dir)

    # -- submit --

    def submit_message(
        self,
        message_id: str,
        sender_id: str,
        recipients: list[RecipientRef],
        envelope_texts: list[str],
    ) -> str:
        """Validate and persist one ciphertext bundle (body envelope first).

        Validation is structural only: decodability, one body part at index
        0, dense attachment indices, and a consistent message id. No keys
        are involved.
        """
        if not recipients:
            raise MalformedEnvelope("recipients must be non-empty")
        if not envelope_texts:
            raise MalformedEnvelope("bundle must contain a body envelope")
        envelopes = [decode_envelope_text(t) for t in envelope_texts]
        body, attachments = envelopes[0], envelopes[1:]
        body_ad = body.ad
        if body_ad.part_label != PART_BODY or body_ad.part_index != 0:
            raise MalformedEnvelope("first envelope is not the body part")
        if body_ad.message_id != message_id:
            raise MalformedEnvelope("bundle message id mismatch")
        for i, env in enumerate(attachments):
            ad = env.ad
            if ad.part_label != PART_ATTACHMENT or ad.part_index != i:
                raise MalformedEnvelope(f"attachment envelope {i} out of position")
            if ad.message_id != message_id:
                raise MalformedEnvelope("bundle message id mismatch")
        self.store.add(
            MessageRecord(
                message_id=message_id,
                sender_id=sender_id,
                recipients=list(recipients),
                envelope_texts=list(envelope_texts),
                created_at=time.time(),
            )
        )
        return message_id

    # -- attachment --

    def render_attachment(self, message_id: str, recipient_id: str | None = None) -> HtmlAttachment:
        """Build the standalone HTML attachment for a stored message.

        When ``recipient_id`` is given, that recipient's reading credential
        is embedded so the reading page can fetch the key.
        """
        record = self.store.get(message_id)
        if record is None:
            raise NotFound(message_id)
        envelopes = [decode_envelope_text(t) for t in record.envelope_texts]

        fields: dict[str, str] = {"message_id": message_id, "part_count": str(len(envelopes))}
        for i, env in enumerate(envelopes):
            fields.update(envelope_form_fields(i, env))
        if recipient_id is not None:
            token = next(
                (r.token for r in record.recipients if r.recipient_id == recipient_id and r.token),
                None,
            )
            if token:
                fields["credential"] = token

        inputs = "\n".join(
            f'    <input type="hidden" name="{html.escape(k)}" value="{html.escape(v)}">'
            for k, v in fields.items()
        )
        doc = f"""<!DOCTYPE html>
<html lang="en">
<head>
  <meta charset="utf-8">
  <title>Secure message</title>
</head>
<body>
  <h1>Secure message</h1>
  <p>This file contains an encrypted message. Press the button to open it
     on the reading page; decryption happens in your browser.</p>
  <form method="post" action="{html.escape(self.config.public_base_url)}/read">
{inputs}
    <button type="submit">Read secure message</button>
  </form>
</body>
</html>
"""
        return HtmlAttachment(message_id=message_id, html=doc)

    # -- notify --

    def _notification_email(self, record: MessageRecord, recipient: RecipientRef) -> EmailMessage:
        attachment = self.render_attachment(record.message_id, recipient.recipient_id)
        email = EmailMessage()
        email["From"] = "no-reply@sealmail.local"
        email["To"] = recipient.recipient_id
        email["Subject"] = "A secure message is waiting for you"
        email.set_content(
            "You have received a secure message.\n\n"
            f"Open the attached file to read it: secure-message-{record.message_id}.html\n"
            f"Reading service: {self.config.public_base_url}/read\n\n"
            "The message stays encrypted until your browser opens it.\n"
        )
        email.add_attachment(
            attachment.html.encode("utf-8"),
            maintype="text",
            subtype="html",
            filename=f"secure-message-{record.message_id}.html",
        )
        return email

    def notify_recipients(self, message_id: str) -> NotifyResult:
        """Dispatch one notification per recipient, exactly once per message.

        Transport failures are per-recipient: the count reflects successful
        hand-offs and failures are listed by recipient id.
        """
        record = self.store.get(message_id)
        if record is None:
            raise NotFound(message_id)
        if not self.store.mark_notified(message_id):
            return NotifyResult(dispatched=0, failures=[])
        dispatched = 0
        failures = []
        for recipient in record.recipients:
            try:
                self.transport.deliver(self._notification_email(record, recipient))
                dispatched += 1
            except TransportFailure:
                failures.append(recipient.recipient_id)
        return NotifyResult(dispatched=dispatched, failures=failures)

    # -- reading page --

    def reading_page(self, form: dict[str, str]) -> str:
        """Validate posted envelope fields and emit the page that bootstraps
        the in-browser client. The service never decrypts."""
        message_id = form.get("message_id", "")
        try:
            count = int(form.get("part_count", ""))
            if count < 1 or count > 10_000:
                raise ValueError(count)
            parts = []
            for i in range(count):
                envelope = envelope_from_fields(
                    form[f"adata_{i}"], form[f"mac_{i}"], form[f"ciphertext_{i}"]
                )
                # verbatim re-encode guarantees the page embeds exactly what
                # was posted, after structural validation
                parts.append(
                    {
                        "adata": form[f"adata_{i}"],
                        "mac": form[f"mac_{i}"],
                        "ciphertext": form[f"ciphertext_{i}"],
                    }
                )
                if envelope.ad.message_id != message_id:
                    raise MalformedEnvelope("envelope belongs to another message")
        except (KeyError, ValueError, MalformedEnvelope, UnsupportedVersion) as exc:
            raise MalformedEnvelope("posted fields do not form a valid envelope bundle") from exc

        payload = {
            "message_id": message_id,
            "credential": form.get("credential", ""),
            "key_service_url": self.config.key_service_url,
            "parts": parts,
        }
        return f"""<!DOCTYPE html>
<html lang="en">
<head>
  <meta charset="utf-8">
  <title>Reading secure message</title>
</head>
<body>
  <h1>Secure message</h1>
  <div id="status">Loading the client…</div>
  <div id="message" hidden></div>
  <ul id="attachments"></ul>
  <script type="application/json" id="envelope-payload">{json.dumps(payload)}</script>
  <script type="module" src="/static/js/read.js"></script>
</body>
</html>
"""


# --- HTTP layer -------------------------------------------------------------


class RecipientBody(BaseModel):
    recipient_id: str
    token: str | None = None


class SubmitBody(BaseModel):
    message_id: str
    sender_id: str
    recipients: list[RecipientBody]
    body_envelope: str
    attachment_envelopes: list[str] = []


_ERROR_PAGE = """<!DOCTYPE html>
<html lang="en"><head><meta charset="utf-8"><title>Invalid request</title></head>
<body><h1>Invalid request</h1>
<p>The submitted form did not contain a valid encrypted message.</p>
</body></html>
"""


def create_app(service: MessageService | None = None) -> FastAPI:
    service = service or MessageService(MessageServiceConfig())
    app = FastAPI(title="sealmail message service", docs_url=None, redoc_url=None)
    app.state.service = service

    @app.middleware("http")
    async def access_log(request, call_next):
        response = await call_next(request)
        log.info("%s %s -> %d", request.method, request.url.path, response.status_code)
        return response

    @app.post("/messages", status_code=201)
    def submit(body: SubmitBody):
        try:
            service.submit_message(
                body.message_id,
                body.sender_id,
                [RecipientRef(r.recipient_id, r.token) for r in body.recipients],
                [body.body_envelope, *body.attachment_envelopes],
            )
        except DuplicateMessageId:
            return JSONResponse(status_code=409, content={"error": "duplicate_message_id"})
        except (MalformedEnvelope, UnsupportedVersion):
            return JSONResponse(status_code=400, content={"error": "malformed_envelope"})
        return {"message_id": body.message_id}

    @app.get("/messages/{message_id}/attachment")
    def attachment(message_id: str):
        try:
            result = service.render_attachment(message_id)
        except NotFound:
            return JSONResponse(status_code=404, content={"error": "not_found"})
        return HTMLResponse(
            content=result.html,
            headers={
                "Content-Disposition": f'attachment; filename="secure-message-{message_id}.html"'
            },
        )

    @app.post("/messages/{message_id}/notify")
    def notify(message_id: str):
        try:
            result = service.notify_recipients(message_id)
        except NotFound:
            return JSONResponse(status_code=404, content={"error": "not_found"})
        return {"dispatched": result.dispatched, "failures": result.failures}

    @app.post("/read")
    async def read(request: Request):
        form = await request.form()
        try:
            page = service.reading_page({k: str(v) for k, v in form.items()})
        except (MalformedEnvelope, UnsupportedVersion):
            return HTMLResponse(content=_ERROR_PAGE, status_code=400)
        return HTMLResponse(content=page)

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    if service.config.static_dir:
        from fastapi.responses import FileResponse
        from fastapi.staticfiles import StaticFiles

        static_dir = service.config.static_dir

        @app.get("/")
        def compose_page():
            return FileResponse(os.path.join(static_dir, "compose.html"))

        @app.get("/bench")
        def bench_page():
            return FileResponse(os.path.join(static_dir, "bench.html"))

        app.mount("/static", StaticFiles(directory=static_dir), name="static")

    return app


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description="sealmail message service")
    parser.add_argument("--host", default=os.environ.get("SEALMAIL_MSGSVC_HOST", "127.0.0.1"))
    parser.add_argument(
        "--port", type=int, default=int(os.environ.get("SEALMAIL_MSGSVC_PORT", "8802"))
    )
    parser.add_argument("--outbox", default=os.environ.get("SEALMAIL_OUTBOX", "outbox"))
    parser.add_argument(
        "--storage",
        default=os.environ.get("SEALMAIL_MSGSVC_STORAGE"),
        help="append-only JSONL path; omit for in-memory",
    )
    parser.add_argument(
        "--key-service-url",
        default=os.environ.get("SEALMAIL_KEYSVC_URL", "http://127.0.0.1:8801"),
    )
    parser.add_argument(
        "--base-url", default=os.environ.get("SEALMAIL_MSGSVC_BASE", "http://127.0.0.1:8802")
    )
    parser.add_argument("--static-dir", default=os.environ.get("SEALMAIL_STATIC_DIR"))
    args = parser.parse_args(argv)

    config = MessageServiceConfig(
        outbox_dir=args.outbox,
        public_base_url=args.base_url,
        key_service_url=args.key_service_url,
        static_dir=args.static_dir,
        storage_path=args.storage,
    )
    app = create_app(MessageService(config))

    import uvicorn

    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
