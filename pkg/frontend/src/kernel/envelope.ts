/**
 * Envelope codec and message framing, byte-identical to the server-side
 * kernel.
 *
 * Binary layout: version(1)=0x01 || nonce(12) || ad_len(4, BE) || ad
 *                || tag(16) || ciphertext
 *
 * Canonical associated data: fixed field order (message id, part label,
 * part index as 4-byte BE, sender id, content type), each field prefixed
 * with a 4-byte big-endian length. The same framing carries
 * (subject, body) in the body part plaintext and (filename, content) in
 * attachment part plaintexts.
 */

export const ENVELOPE_VERSION = 0x01;
export const NONCE_LEN = 12;
export const TAG_LEN = 16;
export const HEADER_LEN = 1 + NONCE_LEN + 4;
export const ATTACHMENT_LIMIT = 20 * 1024 * 1024;

export class KernelError extends Error {}
export class AuthenticationFailed extends KernelError {}
export class MalformedEnvelope extends KernelError {}
export class UnsupportedVersion extends KernelError {}

const utf8 = new TextEncoder();
const utf8dec = new TextDecoder("utf-8", { fatal: true });

export interface AssociatedData {
  messageId: string;
  partLabel: "body" | "attachment";
  partIndex: number;
  senderId: string;
  contentType: string;
}

export interface Envelope {
  version: number;
  nonce: Uint8Array;
  adBytes: Uint8Array;
  tag: Uint8Array;
  ciphertext: Uint8Array;
}

export function concatBytes(...parts: Uint8Array[]): Uint8Array {
  const total = parts.reduce((n, p) => n + p.length, 0);
  const out = new Uint8Array(total);
  let at = 0;
  for (const p of parts) {
    out.set(p, at);
    at += p.length;
  }
  return out;
}

function be32(value: number): Uint8Array {
  const out = new Uint8Array(4);
  new DataView(out.buffer).setUint32(0, value);
  return out;
}

function readBe32(data: Uint8Array, offset: number): number {
  return new DataView(data.buffer, data.byteOffset + offset, 4).getUint32(0);
}

export function frame(...fields: Uint8Array[]): Uint8Array {
  return concatBytes(...fields.flatMap((f) => [be32(f.length), f]));
}

export function unframe(data: Uint8Array, count: number): Uint8Array[] {
  const fields: Uint8Array[] = [];
  let at = 0;
  for (let i = 0; i < count; i++) {
    if (at + 4 > data.length) throw new MalformedEnvelope("truncated field frame");
    const len = readBe32(data, at);
    at += 4;
    if (at + len > data.length) throw new MalformedEnvelope("field length exceeds buffer");
    fields.push(data.slice(at, at + len));
    at += len;
  }
  if (at !== data.length) throw new MalformedEnvelope("trailing bytes after last field");
  return fields;
}

export function adCanonical(ad: AssociatedData): Uint8Array {
  return frame(
    utf8.encode(ad.messageId),
    utf8.encode(ad.partLabel),
    be32(ad.partIndex),
    utf8.encode(ad.senderId),
    utf8.encode(ad.contentType),
  );
}

export function adFromCanonical(data: Uint8Array): AssociatedData {
  const [mid, label, index, sender, ctype] = unframe(data, 5);
  if (index.length !== 4) throw new MalformedEnvelope("part index field must be 4 bytes");
  const partLabel = utf8dec.decode(label);
  if (partLabel !== "body" && partLabel !== "attachment") {
    throw new MalformedEnvelope(`unknown part label ${partLabel}`);
  }
  return {
    messageId: utf8dec.decode(mid),
    partLabel,
    partIndex: readBe32(index, 0),
    senderId: utf8dec.decode(sender),
    contentType: utf8dec.decode(ctype),
  };
}

export function decodeEnvelope(data: Uint8Array): Envelope {
  if (data.length < HEADER_LEN + TAG_LEN) throw new MalformedEnvelope("buffer too short");
  if (data[0] !== ENVELOPE_VERSION) throw new UnsupportedVersion(`version 0x${data[0].toString(16)}`);
  const adLen = readBe32(data, 1 + NONCE_LEN);
  if (data.length < HEADER_LEN + adLen + TAG_LEN) {
    throw new MalformedEnvelope("buffer too short for declared AD length");
  }
  return {
    version: data[0],
    nonce: data.slice(1, 1 + NONCE_LEN),
    adBytes: data.slice(HEADER_LEN, HEADER_LEN + adLen),
    tag: data.slice(HEADER_LEN + adLen, HEADER_LEN + adLen + TAG_LEN),
    ciphertext: data.slice(HEADER_LEN + adLen + TAG_LEN),
  };
}

export function encodeEnvelope(env: Envelope): Uint8Array {
  return concatBytes(
    Uint8Array.of(env.version),
    env.nonce,
    be32(env.adBytes.length),
    env.adBytes,
    env.tag,
    env.ciphertext,
  );
}

/* base64url without padding (text transport and hidden-field values) */

export function b64urlEncode(data: Uint8Array): string {
  let bin = "";
  for (let i = 0; i < data.length; i += 0x8000) {
    bin += String.fromCharCode(...data.subarray(i, i + 0x8000));
  }
  return btoa(bin).replaceAll("+", "-").replaceAll("/", "_").replace(/=+$/, "");
}

export function b64urlDecode(text: string): Uint8Array {
  if (!/^[A-Za-z0-9_-]*$/.test(text)) throw new MalformedEnvelope("invalid base64url");
  const padded = text.replaceAll("-", "+").replaceAll("_", "/");
  let bin: string;
  try {
    bin = atob(padded + "=".repeat((4 - (padded.length % 4)) % 4));
  } catch {
    throw new MalformedEnvelope("invalid base64url");
  }
  return Uint8Array.from(bin, (c) => c.charCodeAt(0));
}

/* hidden-field split used by the HTML attachment and the reading page:
   adata_i = b64url(version || nonce || ad), mac_i = b64url(tag),
   ciphertext_i = b64url(ciphertext) */

export interface EnvelopeFields {
  adata: string;
  mac: string;
  ciphertext: string;
}

export function envelopeToFields(env: Envelope): EnvelopeFields {
  return {
    adata: b64urlEncode(concatBytes(Uint8Array.of(env.version), env.nonce, env.adBytes)),
    mac: b64urlEncode(env.tag),
    ciphertext: b64urlEncode(env.ciphertext),
  };
}

export function envelopeFromFields(fields: EnvelopeFields): Envelope {
  const header = b64urlDecode(fields.adata);
  if (header.length < 1 + NONCE_LEN) throw new MalformedEnvelope("adata field too short");
  const adBytes = header.slice(1 + NONCE_LEN);
  return decodeEnvelope(
    concatBytes(
      header.slice(0, 1 + NONCE_LEN),
      be32(adBytes.length),
      adBytes,
      b64urlDecode(fields.mac),
      b64urlDecode(fields.ciphertext),
    ),
  );
}
