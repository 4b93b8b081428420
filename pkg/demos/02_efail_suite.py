#!/usr/bin/env python3
"""Walkthrough: ciphertext manipulation against sealed envelopes.

Runs the mutation suite against an AEAD envelope (everything must be
rejected) and then the same block-splice trick against an unauthenticated
CBC decryptor, which happily accepts it -- the attack class the envelope
format removes.

    python demos/02_efail_suite.py
"""

import os
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "tests"))

import sealmail as sm
from sealmail.efail import (
    Mutation,
    MutationKind,
    format_summary,
    run_encoded_suite,
    run_suite,
    summarize,
)
from cbc_baseline import cbc_decrypt, cbc_encrypt

secret = b"wire USD 250,000 to account CH93-0000-0000-0000-0000-0 today"
key = sm.generate_key()
ad = sm.AssociatedData("demo-efail", "body", 0, "alice", "text/plain")
envelope = sm.seal(secret, key, ad)

print("=== AEAD envelope under attack ===")
reports = run_suite(envelope, key, samples=2000, seed=7)
summary = summarize(reports)
print(format_summary(summary))
print()

print("=== the same splice against bare CBC (no integrity) ===")
cbc_key = os.urandom(16)
wire = cbc_encrypt(cbc_key, os.urandom(16), secret.ljust(64, b" "))
splice = Mutation(MutationKind.BLOCK_SPLICE, 0)
(report,) = run_encoded_suite(wire, lambda d: cbc_decrypt(cbc_key, d), [splice], ct_offset=16)
print(f"block_splice rejected by CBC? {report.rejected}")
print(f"bytes the attacker-controlled decryption released: {report.leaked_bytes}")
print()
print("CBC returned garbled-but-accepted plaintext; with HTML around it, that")
print("is the exfiltration primitive. The AEAD envelope rejected every variant.")
