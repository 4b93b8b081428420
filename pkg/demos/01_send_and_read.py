#!/usr/bin/env python3
"""Walkthrough: sending and reading a secure message at desk scale.

Plays both sides of the workflow against in-process services: the sender
encrypts everything locally, the key service holds the only secret, the
message service sees ciphertext only, and the recipient decrypts from the
HTML attachment. Run it and read along:

    python demos/01_send_and_read.py
"""

import tempfile
from pathlib import Path

import sealmail as sm
from sealmail.keyservice import InMemoryKeyStore, KeyService
from sealmail.messageservice import (
    MessageService,
    MessageServiceConfig,
    RecipientRef,
    envelope_from_fields,
)

workdir = Path(tempfile.mkdtemp(prefix="sealmail-demo-"))
print(f"working directory: {workdir}\n")

key_service = KeyService(InMemoryKeyStore())
message_service = MessageService(
    MessageServiceConfig(outbox_dir=str(workdir / "outbox"), public_base_url="http://localhost:8802")
)

# --- sender side: everything sensitive happens here -------------------------

message = sm.SecureMessage(
    subject="offsite agenda",
    body="Room changes at 14:00 -- see the attached plan.",
    attachments=[("plan.txt", b"14:00 room A -> room C\n15:30 wrap-up\n")],
)
message_id = "demo-0001"

key = sm.generate_key()
encrypted = sm.encrypt_message(message, key, message_id, sender_id="alice@example.test")
print(f"1. sender generated key {key.key_id[:8]}... and sealed "
      f"{1 + len(encrypted.attachment_envelopes)} envelopes")

receipt = key_service.register_key(
    message_id, key, "alice@example.test", ["bob@example.test", "carol@example.test"]
)
print(f"2. key registered; {len(receipt.credentials)} recipient credentials minted")

message_service.submit_message(
    message_id,
    "alice@example.test",
    [RecipientRef(c.recipient_id, c.token) for c in receipt.credentials],
    [sm.encode_envelope_text(encrypted.body_envelope)]
    + [sm.encode_envelope_text(e) for e in encrypted.attachment_envelopes],
)
print("3. ciphertext bundle submitted (the message service never sees a key)")

result = message_service.notify_recipients(message_id)
print(f"4. {result.dispatched} notification emails written to {workdir / 'outbox'}")

# --- recipient side ----------------------------------------------------------

attachment = message_service.render_attachment(message_id, "bob@example.test")
print(f"5. bob opens the HTML attachment ({len(attachment.html)} bytes, ciphertext only)")

# the attachment's form posts these hidden fields back; we parse them directly
from html.parser import HTMLParser


class Fields(HTMLParser):
    def __init__(self):
        super().__init__()
        self.values = {}

    def handle_starttag(self, tag, attrs):
        attrs = dict(attrs)
        if tag == "input" and attrs.get("type") == "hidden":
            self.values[attrs["name"]] = attrs["value"]


fields = Fields()
fields.feed(attachment.html)
parts = [
    envelope_from_fields(
        fields.values[f"adata_{i}"], fields.values[f"mac_{i}"], fields.values[f"ciphertext_{i}"]
    )
    for i in range(int(fields.values["part_count"]))
]

fetched = key_service.fetch_key_by_token(message_id, fields.values["credential"])
print("6. bob's browser fetched the key with his credential")

decrypted = sm.decrypt_message(
    sm.EncryptedMessage(message_id, parts[0], tuple(parts[1:])), fetched
)
print("7. decrypted locally:")
print(f"   subject: {decrypted.subject}")
print(f"   body:    {decrypted.body}")
for name, content in decrypted.attachments:
    print(f"   file:    {name} ({len(content)} bytes)")

log = key_service.audit(message_id, receipt.sender_credential)
print(f"8. sender audit log shows {len(log)} key fetch(es): {[rid for rid, _ in log]}")
