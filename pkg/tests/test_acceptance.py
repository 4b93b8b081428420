"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line
(via the conftest hook) and enforcing its stated runtime budget."""

import email as email_mod
import json
import random
import re
import time
import uuid
from dataclasses import dataclass
from pathlib import Path

import logging

import pytest
from fastapi.testclient import TestClient

import sealmail as sm
from sealmail.bench import MIB
from sealmail.efail import Mutation, MutationKind, run_encoded_suite, run_suite
from sealmail.keyservice import FileKeyStore, KeyService
from sealmail.keyservice import create_app as create_key_app
from sealmail.messageservice import (
    FileMessageStore,
    MessageService,
    MessageServiceConfig,
    RecipientRef,
    envelope_from_fields,
)
from sealmail.messageservice import create_app as create_msg_app

from cbc_baseline import cbc_decrypt, cbc_encrypt
from test_kernel import VECTORS, _kat_key
from test_messageservice import parse_attachment


# --- criterion 1 -------------------------------------------------------------


@pytest.mark.acceptance("AEAD known-answer conformance (6 vectors, bit-exact, <1s)")
def test_aead_conformance():
    start = time.perf_counter()
    assert len(VECTORS) >= 6
    for key_hex, nonce_hex, pt_hex, aad_hex, ct_hex, tag_hex in VECTORS:
        env = sm.seal_raw(
            bytes.fromhex(pt_hex),
            _kat_key(key_hex),
            bytes.fromhex(aad_hex),
            _nonce=bytes.fromhex(nonce_hex),
        )
        assert env.ciphertext.hex() == ct_hex
        assert env.tag.hex() == tag_hex
        rebuilt = sm.Envelope(
            version=1,
            nonce=bytes.fromhex(nonce_hex),
            ad_bytes=bytes.fromhex(aad_hex),
            tag=bytes.fromhex(tag_hex),
            ciphertext=bytes.fromhex(ct_hex),
        )
        assert sm.open_envelope(rebuilt, _kat_key(key_hex)) == bytes.fromhex(pt_hex)
    elapsed = time.perf_counter() - start
    assert elapsed < 1.0, f"KAT block took {elapsed:.2f}s"


# --- criterion 2 -------------------------------------------------------------


@pytest.mark.acceptance("round-trip property (1000 randomized cases, 0B-1MiB, <30s)")
def test_round_trip_property():
    start = time.perf_counter()
    rng = random.Random(20260808)
    key = sm.generate_key()
    sizes = [0, 1, 15, 16, 17, 4096, MIB]  # forced edges, incl. the 1 MiB cap
    while len(sizes) < 1000:
        sizes.append(int(2 ** rng.uniform(0, 20)))
    for i, size in enumerate(sizes):
        plaintext = rng.randbytes(size)
        ad = sm.AssociatedData(
            message_id=f"rt-{i}",
            part_label="attachment" if i % 3 else "body",
            part_index=0 if i % 3 == 0 else rng.randrange(2**16),
            sender_id=f"sender-{rng.randrange(1000)}",
            content_type=rng.choice(["text/plain", "application/pdf", "x/y"]),
        )
        assert sm.open_envelope(sm.seal(plaintext, key, ad), key) == plaintext
    elapsed = time.perf_counter() - start
    assert elapsed < 30.0, f"round-trip block took {elapsed:.2f}s"


# --- criterion 3 -------------------------------------------------------------


@pytest.mark.acceptance(
    "EFail rejection (exhaustive 64B flips + 10k sampled on 1MiB, 0 leaks; CBC contrast)"
)
def test_efail_rejection():
    start = time.perf_counter()
    key = sm.generate_key()
    ad = sm.AssociatedData("efail-acc", "body", 0, "alice", "text/plain")

    # exhaustive single-bit flips over a 64-byte-payload envelope
    small = sm.seal(bytes(range(64)), key, ad)
    small_reports = run_suite(small, key)
    attacks = [r for r in small_reports if r.mutation.kind is not MutationKind.IDENTITY]
    flips = [r for r in attacks if r.mutation.kind is MutationKind.BIT_FLIP]
    assert len(flips) == len(sm.encode_envelope(small)) * 8
    assert all(r.rejected for r in attacks)
    assert all(r.leaked_bytes == 0 for r in attacks)

    # 10,000 sampled mutations, all strategy kinds, on a 1 MiB envelope
    big = sm.seal(random.Random(1).randbytes(MIB), key, ad)
    big_reports = run_suite(big, key, samples=10_000, seed=11)
    big_attacks = [r for r in big_reports if r.mutation.kind is not MutationKind.IDENTITY]
    assert len(big_attacks) == 10_000
    assert {r.mutation.kind for r in big_attacks} == {
        MutationKind.BIT_FLIP,
        MutationKind.BLOCK_SPLICE,
        MutationKind.BLOCK_DUPLICATE,
        MutationKind.TRUNCATE,
        MutationKind.HTML_PREFIX_INJECT,
        MutationKind.AD_SWAP,
    }
    assert all(r.rejected for r in big_attacks), "an attack mutation was accepted"
    assert all(r.leaked_bytes == 0 for r in big_attacks)

    # the deliberately unauthenticated CBC baseline accepts splices
    cbc_key = bytes(range(16))
    wire = cbc_encrypt(cbc_key, b"\x42" * 16, bytes(range(64)))
    cbc_reports = run_encoded_suite(
        wire,
        lambda data: cbc_decrypt(cbc_key, data),
        [Mutation(MutationKind.BLOCK_SPLICE, i) for i in range(3)],
        ct_offset=16,
    )
    assert any(not r.rejected for r in cbc_reports), "CBC baseline rejected every splice"

    elapsed = time.perf_counter() - start
    assert elapsed < 120.0, f"EFail block took {elapsed:.2f}s"


# --- shared end-to-end plumbing ----------------------------------------------


@dataclass
class FlowResult:
    message_id: str
    sentinel: str
    credentials: list[dict]
    decrypted: sm.SecureMessage
    service_artifacts: dict[str, str]  # label -> text content
    key_store_len: int
    outbox_count: int
    submit_events: list[dict]
    register_events: list[dict]


def run_full_flow(tmp_path: Path, recipients: list[str], attachments, sentinel: str) -> FlowResult:
    """Send -> register -> submit -> notify -> read, over both HTTP surfaces,
    with file-backed stores and request logs captured to disk."""
    keys_path = tmp_path / "keys.jsonl"
    msgs_path = tmp_path / "messages.jsonl"
    outbox = tmp_path / "outbox"
    key_log = tmp_path / "keyservice.log"
    msg_log = tmp_path / "messageservice.log"

    handlers = {}
    for name, path in (("sealmail.keyservice", key_log), ("sealmail.messageservice", msg_log)):
        logger = logging.getLogger(name)
        handler = logging.FileHandler(path)
        handler.setFormatter(logging.Formatter("%(asctime)s %(message)s"))
        logger.addHandler(handler)
        logger.setLevel(logging.INFO)
        handlers[name] = handler

    key_service = KeyService(FileKeyStore(str(keys_path)))
    key_client = TestClient(create_key_app(key_service))
    msg_service = MessageService(
        MessageServiceConfig(
            outbox_dir=str(outbox),
            public_base_url="http://msg.test",
            key_service_url="http://keys.test",
            storage_path=str(msgs_path),
        )
    )
    msg_client = TestClient(create_msg_app(msg_service))

    try:
        # -- sender side (the browser client's role) --
        message_id = str(uuid.uuid4())
        key = sm.generate_key()
        message = sm.SecureMessage(
            subject="meeting notes",
            body=f"please review before friday: {sentinel}",
            attachments=attachments,
        )
        enc = sm.encrypt_message(message, key, message_id, "alice@example.test")

        registered = key_client.post(
            "/keys",
            json={
                "message_id": message_id,
                "key_b64": sm.kernel.b64url_encode(key.material),
                "sender_id": "alice@example.test",
                "recipients": recipients,
            },
        )
        assert registered.status_code == 201, registered.text
        credentials = registered.json()["credentials"]

        token_by_recipient = {c["recipient_id"]: c["token"] for c in credentials}
        submitted = msg_client.post(
            "/messages",
            json={
                "message_id": message_id,
                "sender_id": "alice@example.test",
                "recipients": [
                    {"recipient_id": rid, "token": token_by_recipient[rid]} for rid in recipients
                ],
                "body_envelope": sm.encode_envelope_text(enc.body_envelope),
                "attachment_envelopes": [
                    sm.encode_envelope_text(e) for e in enc.attachment_envelopes
                ],
            },
        )
        assert submitted.status_code == 201, submitted.text

        notified = msg_client.post(f"/messages/{message_id}/notify")
        assert notified.status_code == 200
        assert notified.json() == {"dispatched": len(recipients), "failures": []}

        # -- recipient side --
        first = recipients[0]
        eml_files = sorted(outbox.iterdir())
        mine = [p for p in eml_files if first.replace("@", "_") in p.name or first in p.name]
        parsed_mail = email_mod.message_from_bytes(mine[0].read_bytes())
        html_doc = next(
            part.get_payload(decode=True).decode()
            for part in parsed_mail.walk()
            if part.get_filename()
        )
        fields = parse_attachment(html_doc).fields
        assert fields["credential"] == token_by_recipient[first]

        page = msg_client.post("/read", data=fields)
        assert page.status_code == 200
        payload = json.loads(
            re.search(
                r'<script type="application/json" id="envelope-payload">(.*?)</script>',
                page.text,
                re.DOTALL,
            ).group(1)
        )

        fetched = key_client.get(
            f"/keys/{message_id}",
            headers={"Authorization": f"Bearer {payload['credential']}"},
        )
        assert fetched.status_code == 200
        fetched_key = sm.MessageKey(
            key_id=message_id, material=sm.kernel.b64url_decode(fetched.json()["key_b64"])
        )

        envelopes = [
            envelope_from_fields(p["adata"], p["mac"], p["ciphertext"]) for p in payload["parts"]
        ]
        rebuilt = sm.EncryptedMessage(
            message_id=payload["message_id"],
            body_envelope=envelopes[0],
            attachment_envelopes=tuple(envelopes[1:]),
        )
        decrypted = sm.decrypt_message(rebuilt, fetched_key)
    finally:
        for name, handler in handlers.items():
            handler.flush()
            logging.getLogger(name).removeHandler(handler)
            handler.close()

    artifacts = {
        "key store": keys_path.read_text(),
        "message store": msgs_path.read_text(),
        "key service log": key_log.read_text(),
        "message service log": msg_log.read_text(),
        "rendered attachment": html_doc,
        "reading page": page.text,
    }
    for eml in outbox.iterdir():
        artifacts[f"notification {eml.name}"] = eml.read_bytes().decode("utf-8", "replace")

    return FlowResult(
        message_id=message_id,
        sentinel=sentinel,
        credentials=credentials,
        decrypted=decrypted,
        service_artifacts=artifacts,
        key_store_len=len(key_service.store),
        outbox_count=len(list(outbox.iterdir())),
        submit_events=[json.loads(l) for l in msgs_path.read_text().splitlines() if l.strip()],
        register_events=[
            json.loads(l)
            for l in keys_path.read_text().splitlines()
            if l.strip() and json.loads(l)["event"] == "register"
        ],
    )


# --- criterion 4 -------------------------------------------------------------


@pytest.mark.acceptance(
    "shared-key architecture (5 recipients: 1 KeyRecord, 1 ciphertext set, 5 credentials, 5 notifications)"
)
def test_shared_key_architecture(tmp_path):
    recipients = [f"user{i}@example.test" for i in range(5)]
    result = run_full_flow(
        tmp_path, recipients, [("figures.bin", bytes(range(256)))], sentinel="s3ntinel-shared"
    )
    assert result.key_store_len == 1
    assert len(result.register_events) == 1
    assert sorted(result.register_events[0]["recipients"]) == sorted(recipients)
    assert len(result.credentials) == 5
    assert len({c["token"] for c in result.credentials}) == 5
    submits = [e for e in result.submit_events if e["event"] == "submit"]
    assert len(submits) == 1
    assert len(submits[0]["envelopes"]) == 2  # body + 1 attachment, not x5
    assert result.outbox_count == 5


# --- criterion 5 -------------------------------------------------------------


@pytest.mark.acceptance("plaintext confinement (sentinel: 0 service-side hits, exactly 1 at recipient)")
def test_plaintext_confinement(tmp_path):
    sentinel = f"SENTINEL-{uuid.uuid4().hex}"
    result = run_full_flow(
        tmp_path,
        ["bob@example.test", "carol@example.test"],
        [("notes.txt", b"attachment content, no marker")],
        sentinel=sentinel,
    )
    for label, content in result.service_artifacts.items():
        assert sentinel not in content, f"sentinel leaked into {label}"

    recovered = (
        result.decrypted.subject
        + result.decrypted.body
        + "".join(name + data.decode("utf-8", "replace") for name, data in result.decrypted.attachments)
    )
    assert recovered.count(sentinel) == 1


# --- criterion 6 -------------------------------------------------------------


@pytest.mark.acceptance("linearity (R^2 >= 0.98, normalized(20MiB) in [14,26], both ops, <5min)")
def test_linearity(tmp_path):
    """Runs the shipped `bench` CLI in a fresh process (clean heap, the
    real entry point) and checks the criterion on its CSV output."""
    import subprocess
    import sys

    import numpy as np

    from sealmail.bench import parse_csv

    out = tmp_path / "results.csv"
    start = time.perf_counter()
    proc = subprocess.run(
        [
            sys.executable, "-m", "sealmail.bench",
            "--sizes", "1,2,4,8,12,16,20", "--reps", "10",
            "--impl", "kernel_native", "--seed", "42", "--out", str(out),
        ],
        capture_output=True,
        text=True,
        timeout=280,
    )
    elapsed = time.perf_counter() - start
    assert proc.returncode == 0, proc.stderr
    rows = parse_csv(str(out))
    for op in ("encrypt", "decrypt"):
        cells = sorted(
            (r for r in rows if r["op"] == op and r["impl"] == "kernel_native"),
            key=lambda r: r["size_bytes"],
        )
        assert [r["size_bytes"] // MIB for r in cells] == [1, 2, 4, 8, 12, 16, 20]
        sizes = np.array([r["size_bytes"] / MIB for r in cells])
        means = np.array([r["mean_ms"] for r in cells])
        slope, intercept = np.polyfit(sizes, means, 1)
        predicted = slope * sizes + intercept
        ss_res = float(((means - predicted) ** 2).sum())
        ss_tot = float(((means - means.mean()) ** 2).sum())
        r_squared = 1.0 - ss_res / ss_tot
        n20 = cells[-1]["normalized"]
        assert r_squared >= 0.98, f"{op}: R^2 = {r_squared:.4f}"
        assert 20 * 0.7 <= n20 <= 20 * 1.3, f"{op}: normalized(20MiB) = {n20:.2f}"
    assert elapsed < 300.0, f"benchmark block took {elapsed:.1f}s"


# --- criterion 7 -------------------------------------------------------------


@pytest.mark.acceptance("attachment format round trip (0, 1, 3 attachments, byte-equal)")
@pytest.mark.parametrize("attachment_count", [0, 1, 3])
def test_attachment_round_trip(tmp_path, attachment_count):
    key = sm.generate_key()
    msg = sm.SecureMessage(
        subject="files",
        body="bundles of every shape",
        attachments=[(f"file{i}.bin", bytes([i]) * (100 + i)) for i in range(attachment_count)],
    )
    message_id = f"m-att-{attachment_count}"
    enc = sm.encrypt_message(msg, key, message_id, "alice")

    service = MessageService(
        MessageServiceConfig(outbox_dir=str(tmp_path / "outbox")), store=None
    )
    service.submit_message(
        message_id,
        "alice",
        [RecipientRef("bob")],
        [sm.encode_envelope_text(enc.body_envelope)]
        + [sm.encode_envelope_text(e) for e in enc.attachment_envelopes],
    )
    fields = parse_attachment(service.render_attachment(message_id).html).fields
    stored = [enc.body_envelope, *enc.attachment_envelopes]
    assert int(fields["part_count"]) == len(stored)
    for i, original in enumerate(stored):
        rebuilt = envelope_from_fields(
            fields[f"adata_{i}"], fields[f"mac_{i}"], fields[f"ciphertext_{i}"]
        )
        assert sm.encode_envelope(rebuilt) == sm.encode_envelope(original)
