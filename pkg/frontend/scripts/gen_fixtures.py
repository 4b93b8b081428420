#!/usr/bin/env python3
"""Regenerates test/fixtures/interop.json from the server-side kernel.

The fixtures pin the cross-implementation contract: envelopes sealed by
the server-side kernel that the browser kernel must open (and one
fixed-nonce envelope it must reproduce bit-exactly), plus the hidden-field
encoding of a stored message.
"""

import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[2] / "tests"))

import sealmail as sm
from sealmail.kernel import seal_raw
from sealmail.messageservice import envelope_form_fields

from test_kernel import VECTORS

FIXTURE_PATH = Path(__file__).resolve().parents[1] / "test" / "fixtures" / "interop.json"


def main() -> None:
    key = sm.MessageKey(key_id="fixture", material=bytes(range(16)))

    kats = [
        {"key": k, "nonce": n, "pt": pt, "aad": aad, "ct": ct, "tag": tag}
        for k, n, pt, aad, ct, tag in VECTORS
    ]

    envelopes = []
    for size in (0, 1, 16, 257, 65536):
        plaintext = bytes((3 * i + size) % 256 for i in range(size))
        ad = sm.AssociatedData(f"fix-{size}", "attachment", 3, "alice@example.test", "text/csv")
        env = sm.seal(plaintext, key, ad)
        envelopes.append(
            {
                "key": key.material.hex(),
                "envelope": sm.encode_envelope(env).hex(),
                "plaintext": plaintext.hex(),
                "message_id": ad.message_id,
                "part_index": ad.part_index,
            }
        )

    fixed_ad = sm.AssociatedData("fix-deterministic", "body", 0, "bob", "text/plain")
    fixed = seal_raw(
        b"fixed-nonce interop vector",
        key,
        fixed_ad.to_canonical(),
        _nonce=bytes(range(12)),
    )
    sealed_fixed = {
        "key": key.material.hex(),
        "nonce": bytes(range(12)).hex(),
        "ad_fields": {
            "messageId": fixed_ad.message_id,
            "partLabel": fixed_ad.part_label,
            "partIndex": fixed_ad.part_index,
            "senderId": fixed_ad.sender_id,
            "contentType": fixed_ad.content_type,
        },
        "plaintext": b"fixed-nonce interop vector".hex(),
        "envelope": sm.encode_envelope(fixed).hex(),
    }

    message = sm.SecureMessage(
        subject="interop bundle",
        body="body text for the browser kernel",
        attachments=[("notes.txt", b"first attachment"), ("data.bin", bytes(range(64)))],
    )
    enc = sm.encrypt_message(message, key, "fix-bundle", "alice@example.test")
    bundle_envs = [enc.body_envelope, *enc.attachment_envelopes]
    message_bundle = {
        "key": key.material.hex(),
        "message_id": "fix-bundle",
        "subject": message.subject,
        "body": message.body,
        "attachments": [{"filename": n, "content": c.hex()} for n, c in message.attachments],
        "envelopes": [sm.encode_envelope(e).hex() for e in bundle_envs],
    }

    fields = {}
    for i, env in enumerate(bundle_envs):
        fields.update(envelope_form_fields(i, env))
    attachment_fields = {"message_id": "fix-bundle", "part_count": len(bundle_envs), "fields": fields}

    # one harness mutation of each kind applied to the bundle's body part,
    # for replaying the tamper flow in the browser client's tests
    from sealmail.efail import ATTACK_KINDS, generate_mutations, apply_mutation

    body_encoded = sm.encode_envelope(bundle_envs[0])
    mutated_parts = []
    for kind in ATTACK_KINDS:
        (mutation,) = generate_mutations(
            body_encoded, [kind], samples=1, include_control=False, seed=5,
            exhaustive_bit_limit=0,
        )
        mutated_parts.append(
            {"kind": mutation.kind.value, "envelope": apply_mutation(body_encoded, mutation).hex()}
        )

    FIXTURE_PATH.parent.mkdir(parents=True, exist_ok=True)
    FIXTURE_PATH.write_text(
        json.dumps(
            {
                "kats": kats,
                "envelopes": envelopes,
                "sealed_fixed": sealed_fixed,
                "message_bundle": message_bundle,
                "attachment_fields": attachment_fields,
                "mutated_parts": mutated_parts,
            },
            indent=2,
        )
    )
    print(f"wrote {FIXTURE_PATH}")


if __name__ == "__main__":
    main()
