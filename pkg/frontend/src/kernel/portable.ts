/**
 * Kernel layer: the portable wasm AEAD module plus the message-level
 * operations built on it.
 *
 * The wasm exports (km_alloc/km_reset/km_seal/km_open) move raw byte
 * buffers; this glue supplies entropy (crypto.getRandomValues), manages
 * the module's linear memory, and implements encrypt/decrypt of whole
 * messages with the same part framing as the server-side kernel: body
 * part plaintext = frame(subject, body), attachment part plaintext =
 * frame(filename, content). Only this layer ever touches key material.
 */

import {
  ATTACHMENT_LIMIT,
  AuthenticationFailed,
  type Envelope,
  HEADER_LEN,
  KernelError,
  MalformedEnvelope,
  NONCE_LEN,
  TAG_LEN,
  UnsupportedVersion,
  adCanonical,
  adFromCanonical,
  decodeEnvelope,
  encodeEnvelope,
  frame,
  unframe,
} from "./envelope.js";

const utf8 = new TextEncoder();
const utf8dec = new TextDecoder();

export interface SecureMessage {
  subject: string;
  body: string;
  attachments: { filename: string; content: Uint8Array }[];
}

interface WasmExports {
  memory: WebAssembly.Memory;
  km_alloc(n: number): number;
  km_reset(): void;
  km_seal(
    key: number,
    nonce: number,
    ad: number,
    adLen: number,
    pt: number,
    ptLen: number,
    out: number,
  ): number;
  km_open(key: number, env: number, envLen: number, out: number): number;
  km_version(): number;
}

export class PortableKernel {
  private constructor(private wasm: WasmExports) {}

  static async load(wasmBytes: BufferSource): Promise<PortableKernel> {
    const { instance } = await WebAssembly.instantiate(wasmBytes);
    const wasm = instance.exports as unknown as WasmExports;
    if (typeof wasm.km_seal !== "function" || wasm.km_version() !== 0x01) {
      throw new KernelError("not a compatible kernel module");
    }
    return new PortableKernel(wasm);
  }

  private put(bytes: Uint8Array): number {
    const ptr = this.wasm.km_alloc(Math.max(bytes.length, 1));
    new Uint8Array(this.wasm.memory.buffer).set(bytes, ptr);
    return ptr;
  }

  private take(ptr: number, len: number): Uint8Array {
    return new Uint8Array(this.wasm.memory.buffer).slice(ptr, ptr + len);
  }

  generateKey(): Uint8Array {
    const key = new Uint8Array(16);
    crypto.getRandomValues(key);
    return key;
  }

  /** Seal plaintext under key; returns the encoded envelope. A fresh
   * random nonce is drawn unless a test fixes one. */
  seal(key: Uint8Array, plaintext: Uint8Array, adBytes: Uint8Array, testNonce?: Uint8Array): Uint8Array {
    const nonce = testNonce ?? crypto.getRandomValues(new Uint8Array(NONCE_LEN));
    if (key.length !== 16 || nonce.length !== NONCE_LEN) throw new KernelError("bad key or nonce length");
    this.wasm.km_reset();
    const keyPtr = this.put(key);
    const noncePtr = this.put(nonce);
    const adPtr = this.put(adBytes);
    const ptPtr = this.put(plaintext);
    const outLen = HEADER_LEN + adBytes.length + TAG_LEN + plaintext.length;
    const outPtr = this.wasm.km_alloc(outLen);
    const n = this.wasm.km_seal(keyPtr, noncePtr, adPtr, adBytes.length, ptPtr, plaintext.length, outPtr);
    return this.take(outPtr, n);
  }

  /** Verify and decrypt an encoded envelope; releases nothing on failure. */
  open(key: Uint8Array, envelopeBytes: Uint8Array): Uint8Array {
    this.wasm.km_reset();
    const keyPtr = this.put(key);
    const envPtr = this.put(envelopeBytes);
    const outPtr = this.wasm.km_alloc(Math.max(envelopeBytes.length, 1));
    const rc = this.wasm.km_open(keyPtr, envPtr, envelopeBytes.length, outPtr);
    if (rc === -1) throw new AuthenticationFailed("envelope tag verification failed");
    if (rc === -2) throw new MalformedEnvelope("structurally invalid envelope");
    if (rc === -3) throw new UnsupportedVersion("unsupported envelope version");
    if (rc < 0) throw new KernelError(`kernel error ${rc}`);
    return this.take(outPtr, rc);
  }

  encryptMessage(
    key: Uint8Array,
    messageId: string,
    senderId: string,
    message: SecureMessage,
  ): Uint8Array[] {
    for (const att of message.attachments) {
      if (att.content.length > ATTACHMENT_LIMIT) {
        throw new KernelError(`attachment ${att.filename} exceeds the 20 MiB limit`);
      }
    }
    const envelopes: Uint8Array[] = [];
    envelopes.push(
      this.seal(
        key,
        frame(utf8.encode(message.subject), utf8.encode(message.body)),
        adCanonical({
          messageId,
          partLabel: "body",
          partIndex: 0,
          senderId,
          contentType: "text/plain; charset=utf-8",
        }),
      ),
    );
    message.attachments.forEach((att, i) => {
      envelopes.push(
        this.seal(
          key,
          frame(utf8.encode(att.filename), att.content),
          adCanonical({
            messageId,
            partLabel: "attachment",
            partIndex: i,
            senderId,
            contentType: guessContentType(att.filename),
          }),
        ),
      );
    });
    return envelopes;
  }

  /** Open one message part and check it sits at the claimed position.
   * Body is index 0; attachments follow in order. */
  openPart(key: Uint8Array, messageId: string, index: number, envelopeBytes: Uint8Array):
    | { kind: "body"; subject: string; body: string }
    | { kind: "attachment"; filename: string; content: Uint8Array } {
    const envelope: Envelope = decodeEnvelope(envelopeBytes);
    const ad = adFromCanonical(envelope.adBytes);
    if (ad.messageId !== messageId) throw new AuthenticationFailed("envelope belongs to another message");
    if (index === 0 && (ad.partLabel !== "body" || ad.partIndex !== 0)) {
      throw new AuthenticationFailed("body envelope at wrong position");
    }
    if (index > 0 && (ad.partLabel !== "attachment" || ad.partIndex !== index - 1)) {
      throw new AuthenticationFailed(`attachment envelope at position ${index} is mismatched`);
    }
    const plaintext = this.open(key, envelopeBytes);
    const [first, second] = unframe(plaintext, 2);
    if (index === 0) {
      return { kind: "body", subject: utf8dec.decode(first), body: utf8dec.decode(second) };
    }
    return { kind: "attachment", filename: utf8dec.decode(first), content: second };
  }

  decryptMessage(key: Uint8Array, messageId: string, envelopes: Uint8Array[]): SecureMessage {
    // body first, then attachments; any failure releases nothing
    const body = this.openPart(key, messageId, 0, envelopes[0]);
    if (body.kind !== "body") throw new AuthenticationFailed("first part is not the body");
    const attachments = envelopes.slice(1).map((env, i) => {
      const part = this.openPart(key, messageId, i + 1, env);
      if (part.kind !== "attachment") throw new AuthenticationFailed("expected an attachment part");
      return { filename: part.filename, content: part.content };
    });
    return { subject: body.subject, body: body.body, attachments };
  }
}

export function guessContentType(filename: string): string {
  const ext = filename.toLowerCase().split(".").pop() ?? "";
  const table: Record<string, string> = {
    txt: "text/plain",
    pdf: "application/pdf",
    png: "image/png",
    jpg: "image/jpeg",
    jpeg: "image/jpeg",
    zip: "application/zip",
    csv: "text/csv",
    html: "text/html",
  };
  return table[ext] ?? "application/octet-stream";
}

export { encodeEnvelope, decodeEnvelope };
