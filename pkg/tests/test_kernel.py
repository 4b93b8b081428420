"""Kernel tests: known-answer conformance, sealing semantics, message
bundles, and the envelope codec.

Expected values in VECTORS were computed with tests/gcm_reference.py (an
independent pure-Python AES-128-GCM) and frozen; the first four are also
publicly checkable standard vectors.
"""

import struct
import uuid

import pytest

import sealmail as sm
from sealmail.kernel import seal_raw

from gcm_reference import gcm_encrypt


def _kat_key(hexmat: str) -> sm.MessageKey:
    return sm.MessageKey(key_id="kat", material=bytes.fromhex(hexmat))


# (key, nonce, plaintext, aad, expected ciphertext, expected tag) — hex
VECTORS = [
    (
        "00000000000000000000000000000000",
        "000000000000000000000000",
        "",
        "",
        "",
        "58e2fccefa7e3061367f1d57a4e7455a",
    ),
    (
        "00000000000000000000000000000000",
        "000000000000000000000000",
        "00000000000000000000000000000000",
        "",
        "0388dace60b6a392f328c2b971b2fe78",
        "ab6e47d42cec13bdf53a67b21257bddf",
    ),
    (
        "feffe9928665731c6d6a8f9467308308",
        "cafebabefacedbaddecaf888",
        "d9313225f88406e5a55909c5aff5269a86a7a9531534f7da2e4c303d8a318a72"
        "1c3c0c95956809532fcf0e2449a6b525b16aedf5aa0de657ba637b391aafd255",
        "",
        "42831ec2217774244b7221b784d0d49ce3aa212f2c02a4e035c17e2329aca12e"
        "21d514b25466931c7d8f6a5aac84aa051ba30b396a0aac973d58e091473f5985",
        "4d5c2af327cd64a62cf35abd2ba6fab4",
    ),
    (
        "feffe9928665731c6d6a8f9467308308",
        "cafebabefacedbaddecaf888",
        "d9313225f88406e5a55909c5aff5269a86a7a9531534f7da2e4c303d8a318a72"
        "1c3c0c95956809532fcf0e2449a6b525b16aedf5aa0de657ba637b39",
        "feedfacedeadbeeffeedfacedeadbeefabaddad2",
        "42831ec2217774244b7221b784d0d49ce3aa212f2c02a4e035c17e2329aca12e"
        "21d514b25466931c7d8f6a5aac84aa051ba30b396a0aac973d58e091",
        "5bc94fbc3221a5db94fae95ae7121a47",
    ),
    (
        "00000000000000000000000000000000",
        "000000000000000000000000",
        "",
        "6162636465666768696a6b6c6d6e6f70",
        "",
        "1757d2f1d040a038c8e01420c5b58724",
    ),
    (
        "0f0e0d0c0b0a09080706050403020100",
        "0102030405060708090a0b0c",
        "48656c6c6f2c20656e76656c6f7065",
        "7061727420626f6479",
        "5ba0acb0efa79c7c42c7dfddbece4e",
        "154f8e42e30869baf7994a7bae6ef750",
    ),
]


class TestKnownAnswers:
    @pytest.mark.parametrize("key,nonce,pt,aad,ct,tag", VECTORS)
    def test_seal_matches_vector(self, key, nonce, pt, aad, ct, tag):
        env = seal_raw(
            bytes.fromhex(pt),
            _kat_key(key),
            bytes.fromhex(aad),
            _nonce=bytes.fromhex(nonce),
        )
        assert env.ciphertext.hex() == ct
        assert env.tag.hex() == tag

    @pytest.mark.parametrize("key,nonce,pt,aad,ct,tag", VECTORS)
    def test_oracle_agrees(self, key, nonce, pt, aad, ct, tag):
        """Recompute each frozen vector with the independent reference."""
        got_ct, got_tag = gcm_encrypt(
            bytes.fromhex(key), bytes.fromhex(nonce), bytes.fromhex(pt), bytes.fromhex(aad)
        )
        assert got_ct.hex() == ct
        assert got_tag.hex() == tag

    @pytest.mark.parametrize("key,nonce,pt,aad,ct,tag", VECTORS)
    def test_open_recovers_plaintext(self, key, nonce, pt, aad, ct, tag):
        env = sm.Envelope(
            version=1,
            nonce=bytes.fromhex(nonce),
            ad_bytes=bytes.fromhex(aad),
            tag=bytes.fromhex(tag),
            ciphertext=bytes.fromhex(ct),
        )
        assert sm.open_envelope(env, _kat_key(key)) == bytes.fromhex(pt)


class TestGenerateKey:
    def test_material_is_128_bits(self):
        assert len(sm.generate_key().material) == 16

    def test_thousand_keys_pairwise_distinct(self):
        materials = {sm.generate_key().material for _ in range(1000)}
        assert len(materials) == 1000

    def test_key_id_is_well_formed(self):
        key = sm.generate_key()
        assert str(uuid.UUID(key.key_id)) == key.key_id

    def test_entropy_failure_raises(self, monkeypatch):
        def broken(n):
            raise OSError("no entropy")

        monkeypatch.setattr("sealmail.kernel._urandom", broken)
        with pytest.raises(sm.EntropyUnavailable):
            sm.generate_key()

    def test_repr_hides_material(self):
        key = sm.generate_key()
        assert key.material.hex() not in repr(key)


@pytest.fixture
def key():
    return sm.generate_key()


@pytest.fixture
def ad():
    return sm.AssociatedData(
        message_id="msg-1",
        part_label="body",
        part_index=0,
        sender_id="alice@example.test",
        content_type="text/plain; charset=utf-8",
    )


class TestSealOpen:
    def test_empty_plaintext(self, key, ad):
        env = sm.seal(b"", key, ad)
        assert len(env.ciphertext) == 0
        assert len(env.tag) == 16

    @pytest.mark.parametrize("size", [0, 1, 15, 16, 17, 4096, 1024 * 1024])
    def test_round_trip_at_size(self, key, ad, size):
        plaintext = bytes(i % 251 for i in range(size))
        assert sm.open_envelope(sm.seal(plaintext, key, ad), key) == plaintext

    def test_ciphertext_length_equals_plaintext_length(self, key, ad):
        for size in (0, 1, 16, 1000):
            assert len(sm.seal(b"x" * size, key, ad).ciphertext) == size

    def test_ad_binding(self, key, ad):
        env = sm.seal(b"payload", key, ad)
        other = sm.AssociatedData(
            message_id="msg-2",
            part_label=ad.part_label,
            part_index=ad.part_index,
            sender_id=ad.sender_id,
            content_type=ad.content_type,
        )
        forged = sm.Envelope(
            version=env.version,
            nonce=env.nonce,
            ad_bytes=other.to_canonical(),
            tag=env.tag,
            ciphertext=env.ciphertext,
        )
        with pytest.raises(sm.AuthenticationFailed):
            sm.open_envelope(forged, key)

    def test_wrong_key_rejected(self, key, ad):
        env = sm.seal(b"payload", key, ad)
        with pytest.raises(sm.AuthenticationFailed):
            sm.open_envelope(env, sm.generate_key())

    def test_nonce_freshness_10k(self, key, ad):
        nonces = {sm.seal(b"m", key, ad).nonce for _ in range(10_000)}
        assert len(nonces) == 10_000

    def test_fixed_nonce_is_deterministic(self, key, ad):
        nonce = bytes(range(12))
        a = sm.seal(b"same input", key, ad, _nonce=nonce)
        b = sm.seal(b"same input", key, ad, _nonce=nonce)
        assert a == b

    def test_unsupported_version(self, key, ad):
        env = sm.seal(b"x", key, ad)
        stale = sm.Envelope(
            version=2,
            nonce=env.nonce,
            ad_bytes=env.ad_bytes,
            tag=env.tag,
            ciphertext=env.ciphertext,
        )
        with pytest.raises(sm.UnsupportedVersion):
            sm.open_envelope(stale, key)

    def test_keystream_byte_frequencies_near_uniform(self):
        """1 MiB of zeros sealed with fixed key/nonce: every byte value count
        within 5 sigma of uniform."""
        key = _kat_key("000102030405060708090a0b0c0d0e0f")
        env = seal_raw(b"\x00" * (1024 * 1024), key, b"", _nonce=b"\x01" * 12)
        counts = [0] * 256
        for b in env.ciphertext:
            counts[b] += 1
        n = 1024 * 1024
        expected = n / 256
        sigma = (n * (1 / 256) * (255 / 256)) ** 0.5
        for value, count in enumerate(counts):
            assert abs(count - expected) <= 5 * sigma, f"byte {value}: {count}"


class TestMessageBundles:
    def _message(self):
        return sm.SecureMessage(
            subject="quarterly figures",
            body="see attached",
            attachments=[("a.txt", b"alpha"), ("b.bin", b"\x00\x01\x02")],
        )

    def test_two_attachments_three_envelopes(self, key):
        enc = sm.encrypt_message(self._message(), key, "m-7", "alice")
        envs = [enc.body_envelope, *enc.attachment_envelopes]
        assert len(envs) == 3
        assert {env.ad.message_id for env in envs} == {"m-7"}

    def test_no_attachments_one_envelope(self, key):
        msg = sm.SecureMessage(subject="s", body="b")
        enc = sm.encrypt_message(msg, key, "m-8", "alice")
        assert enc.attachment_envelopes == ()

    def test_part_indices_are_dense(self, key):
        enc = sm.encrypt_message(self._message(), key, "m-9", "alice")
        assert enc.body_envelope.ad.part_label == "body"
        assert enc.body_envelope.ad.part_index == 0
        for i, env in enumerate(enc.attachment_envelopes):
            assert env.ad.part_label == "attachment"
            assert env.ad.part_index == i

    def test_round_trip(self, key):
        msg = self._message()
        assert sm.decrypt_message(sm.encrypt_message(msg, key, "m-10", "alice"), key) == msg

    def test_wrong_key(self, key):
        enc = sm.encrypt_message(self._message(), key, "m-11", "alice")
        with pytest.raises(sm.AuthenticationFailed):
            sm.decrypt_message(enc, sm.generate_key())

    def test_swapped_attachments_rejected(self, key):
        enc = sm.encrypt_message(self._message(), key, "m-12", "alice")
        swapped = sm.EncryptedMessage(
            message_id=enc.message_id,
            body_envelope=enc.body_envelope,
            attachment_envelopes=(enc.attachment_envelopes[1], enc.attachment_envelopes[0]),
        )
        with pytest.raises(sm.AuthenticationFailed):
            sm.decrypt_message(swapped, key)

    def test_truncated_attachment_releases_nothing(self, key):
        enc = sm.encrypt_message(self._message(), key, "m-13", "alice")
        broken_bytes = sm.encode_envelope(enc.attachment_envelopes[1])[:-1]
        with pytest.raises((sm.MalformedEnvelope, sm.AuthenticationFailed)):
            damaged = sm.EncryptedMessage(
                message_id=enc.message_id,
                body_envelope=enc.body_envelope,
                attachment_envelopes=(
                    enc.attachment_envelopes[0],
                    sm.decode_envelope(broken_bytes),
                ),
            )
            sm.decrypt_message(damaged, key)

    def test_oversize_attachment(self, key):
        with pytest.raises(sm.AttachmentTooLarge):
            sm.SecureMessage(
                subject="s", body="b", attachments=[("big.bin", b"\x00" * (20 * 1024 * 1024 + 1))]
            )

    def test_cross_message_envelope_rejected(self, key):
        enc_a = sm.encrypt_message(self._message(), key, "m-14", "alice")
        enc_b = sm.encrypt_message(self._message(), key, "m-15", "alice")
        crossed = sm.EncryptedMessage(
            message_id="m-14",
            body_envelope=enc_b.body_envelope,
            attachment_envelopes=enc_a.attachment_envelopes,
        )
        with pytest.raises(sm.AuthenticationFailed):
            sm.decrypt_message(crossed, key)

    def test_unicode_subject_and_filename(self, key):
        msg = sm.SecureMessage(
            subject="zürich ✓", body="grüezi", attachments=[("ünïcode 文件.txt", b"ok")]
        )
        assert sm.decrypt_message(sm.encrypt_message(msg, key, "m-16", "alice"), key) == msg


class TestCodec:
    def test_round_trip(self, key, ad):
        env = sm.seal(b"binary \x00\xff payload", key, ad)
        assert sm.decode_envelope(sm.encode_envelope(env)) == env

    def test_empty_buffer(self):
        with pytest.raises(sm.MalformedEnvelope):
            sm.decode_envelope(b"")

    def test_encoded_length_formula(self, key, ad):
        for size in (0, 1, 33, 1000):
            env = sm.seal(b"q" * size, key, ad)
            expected = 1 + 12 + len(env.ciphertext) + 16 + 4 + len(env.ad_bytes)
            assert len(sm.encode_envelope(env)) == expected

    def test_text_transport_round_trip(self, key, ad):
        env = sm.seal(b"text transport", key, ad)
        text = sm.encode_envelope_text(env)
        assert "=" not in text
        assert sm.decode_envelope_text(text) == env

    def test_bad_base64(self):
        with pytest.raises(sm.MalformedEnvelope):
            sm.decode_envelope_text("!!!not-base64!!!")

    def test_unknown_version_byte(self, key, ad):
        data = bytearray(sm.encode_envelope(sm.seal(b"x", key, ad)))
        data[0] = 0x02
        with pytest.raises(sm.UnsupportedVersion):
            sm.decode_envelope(bytes(data))

    def test_ad_length_beyond_buffer(self, key, ad):
        data = bytearray(sm.encode_envelope(sm.seal(b"x", key, ad)))
        struct.pack_into(">I", data, 13, 2**31)
        with pytest.raises(sm.MalformedEnvelope):
            sm.decode_envelope(bytes(data))

    def test_short_buffer(self):
        with pytest.raises(sm.MalformedEnvelope):
            sm.decode_envelope(b"\x01" + b"\x00" * 20)


class TestAssociatedData:
    def test_canonical_round_trip(self, ad):
        assert sm.AssociatedData.from_canonical(ad.to_canonical()) == ad

    def test_body_index_must_be_zero(self):
        with pytest.raises(ValueError):
            sm.AssociatedData("m", "body", 1, "s", "t")

    def test_unknown_label(self):
        with pytest.raises(ValueError):
            sm.AssociatedData("m", "header", 0, "s", "t")

    def test_trailing_bytes_rejected(self, ad):
        with pytest.raises(sm.MalformedEnvelope):
            sm.AssociatedData.from_canonical(ad.to_canonical() + b"\x00")
