/**
 * Pure-script AES-128-GCM: the benchmark baseline.
 *
 * Classic JavaScript cryptography style: 32-bit table-driven AES with a
 * table-free bitwise GHASH. Correct (same known answers as the kernel)
 * but deliberately a plain script implementation; the benchmark page
 * compares it against the wasm kernel.
 */

const SBOX = new Uint8Array(256);
const TE0 = new Uint32Array(256);
const TE1 = new Uint32Array(256);
const TE2 = new Uint32Array(256);
const TE3 = new Uint32Array(256);

function xtime(x: number): number {
  return ((x << 1) ^ (x & 0x80 ? 0x1b : 0)) & 0xff;
}

(function buildTables() {
  const exp = new Uint8Array(256);
  const log = new Uint8Array(256);
  let x = 1;
  for (let i = 0; i < 255; i++) {
    exp[i] = x;
    log[x] = i;
    x = (xtime(x) ^ x) & 0xff;
  }
  exp[255] = exp[0];
  for (let b = 0; b < 256; b++) {
    const inv = b ? exp[255 - log[b]] : 0;
    let s = inv;
    for (let r = 1; r <= 4; r++) s ^= ((inv << r) | (inv >>> (8 - r))) & 0xff;
    SBOX[b] = (s ^ 0x63) & 0xff;
  }
  for (let b = 0; b < 256; b++) {
    const s = SBOX[b];
    const s2 = xtime(s);
    const s3 = s2 ^ s;
    const w = ((s2 << 24) | (s << 16) | (s << 8) | s3) >>> 0;
    TE0[b] = w;
    TE1[b] = ((w >>> 8) | (w << 24)) >>> 0;
    TE2[b] = ((w >>> 16) | (w << 16)) >>> 0;
    TE3[b] = ((w >>> 24) | (w << 8)) >>> 0;
  }
})();

function expandKey(key: Uint8Array): Uint32Array {
  if (key.length !== 16) throw new Error("AES-128 needs a 16-byte key");
  const rk = new Uint32Array(44);
  const view = new DataView(key.buffer, key.byteOffset, 16);
  for (let i = 0; i < 4; i++) rk[i] = view.getUint32(4 * i);
  let rcon = 0x01000000;
  for (let i = 4; i < 44; i++) {
    let t = rk[i - 1];
    if (i % 4 === 0) {
      t =
        ((SBOX[(t >>> 16) & 0xff] << 24) |
          (SBOX[(t >>> 8) & 0xff] << 16) |
          (SBOX[t & 0xff] << 8) |
          SBOX[t >>> 24]) >>>
        0;
      t = (t ^ rcon) >>> 0;
      rcon = (xtime(rcon >>> 24) << 24) >>> 0;
    }
    rk[i] = (rk[i - 4] ^ t) >>> 0;
  }
  return rk;
}

function encryptBlock(rk: Uint32Array, inOut: Uint32Array): void {
  let s0 = (inOut[0] ^ rk[0]) >>> 0;
  let s1 = (inOut[1] ^ rk[1]) >>> 0;
  let s2 = (inOut[2] ^ rk[2]) >>> 0;
  let s3 = (inOut[3] ^ rk[3]) >>> 0;
  for (let round = 1; round < 10; round++) {
    const t0 = (TE0[s0 >>> 24] ^ TE1[(s1 >>> 16) & 0xff] ^ TE2[(s2 >>> 8) & 0xff] ^ TE3[s3 & 0xff] ^ rk[4 * round]) >>> 0;
    const t1 = (TE0[s1 >>> 24] ^ TE1[(s2 >>> 16) & 0xff] ^ TE2[(s3 >>> 8) & 0xff] ^ TE3[s0 & 0xff] ^ rk[4 * round + 1]) >>> 0;
    const t2 = (TE0[s2 >>> 24] ^ TE1[(s3 >>> 16) & 0xff] ^ TE2[(s0 >>> 8) & 0xff] ^ TE3[s1 & 0xff] ^ rk[4 * round + 2]) >>> 0;
    const t3 = (TE0[s3 >>> 24] ^ TE1[(s0 >>> 16) & 0xff] ^ TE2[(s1 >>> 8) & 0xff] ^ TE3[s2 & 0xff] ^ rk[4 * round + 3]) >>> 0;
    s0 = t0; s1 = t1; s2 = t2; s3 = t3;
  }
  inOut[0] = (((SBOX[s0 >>> 24] << 24) | (SBOX[(s1 >>> 16) & 0xff] << 16) | (SBOX[(s2 >>> 8) & 0xff] << 8) | SBOX[s3 & 0xff]) ^ rk[40]) >>> 0;
  inOut[1] = (((SBOX[s1 >>> 24] << 24) | (SBOX[(s2 >>> 16) & 0xff] << 16) | (SBOX[(s3 >>> 8) & 0xff] << 8) | SBOX[s0 & 0xff]) ^ rk[41]) >>> 0;
  inOut[2] = (((SBOX[s2 >>> 24] << 24) | (SBOX[(s3 >>> 16) & 0xff] << 16) | (SBOX[(s0 >>> 8) & 0xff] << 8) | SBOX[s1 & 0xff]) ^ rk[42]) >>> 0;
  inOut[3] = (((SBOX[s3 >>> 24] << 24) | (SBOX[(s0 >>> 16) & 0xff] << 16) | (SBOX[(s1 >>> 8) & 0xff] << 8) | SBOX[s2 & 0xff]) ^ rk[43]) >>> 0;
}

/* GHASH over GF(2^128), bit-by-bit with 32-bit words */

type Block4 = [number, number, number, number];

function ghashMult(x: Block4, y: Block4): Block4 {
  let z0 = 0, z1 = 0, z2 = 0, z3 = 0;
  let v0 = x[0], v1 = x[1], v2 = x[2], v3 = x[3];
  for (let i = 0; i < 128; i++) {
    const bit = (y[i >>> 5] >>> (31 - (i & 31))) & 1;
    if (bit) {
      z0 ^= v0; z1 ^= v1; z2 ^= v2; z3 ^= v3;
    }
    const lsb = v3 & 1;
    v3 = (v3 >>> 1) | ((v2 & 1) << 31);
    v2 = (v2 >>> 1) | ((v1 & 1) << 31);
    v1 = (v1 >>> 1) | ((v0 & 1) << 31);
    v0 = v0 >>> 1;
    if (lsb) v0 ^= 0xe1000000;
  }
  return [z0 >>> 0, z1 >>> 0, z2 >>> 0, z3 >>> 0];
}

function loadBlock(data: Uint8Array, offset: number): Block4 {
  const block: Block4 = [0, 0, 0, 0];
  const end = Math.min(offset + 16, data.length);
  for (let i = offset; i < end; i++) {
    block[(i - offset) >>> 2] |= data[i] << (24 - 8 * ((i - offset) & 3));
  }
  return [block[0] >>> 0, block[1] >>> 0, block[2] >>> 0, block[3] >>> 0];
}

export class ScriptAesGcm {
  private rk: Uint32Array;
  private h: Block4;

  constructor(key: Uint8Array) {
    this.rk = expandKey(key);
    const zero = new Uint32Array(4);
    encryptBlock(this.rk, zero);
    this.h = [zero[0], zero[1], zero[2], zero[3]];
  }

  private ghash(aad: Uint8Array, ct: Uint8Array): Block4 {
    let y: Block4 = [0, 0, 0, 0];
    for (const data of [aad, ct]) {
      for (let at = 0; at < data.length; at += 16) {
        const block = loadBlock(data, at);
        y = ghashMult([(y[0] ^ block[0]) >>> 0, (y[1] ^ block[1]) >>> 0, (y[2] ^ block[2]) >>> 0, (y[3] ^ block[3]) >>> 0], this.h);
      }
    }
    const aadBits = aad.length * 8;
    const ctBits = ct.length * 8;
    const lens: Block4 = [Math.floor(aadBits / 2 ** 32) >>> 0, aadBits >>> 0, Math.floor(ctBits / 2 ** 32) >>> 0, ctBits >>> 0];
    return ghashMult([(y[0] ^ lens[0]) >>> 0, (y[1] ^ lens[1]) >>> 0, (y[2] ^ lens[2]) >>> 0, (y[3] ^ lens[3]) >>> 0], this.h);
  }

  private ctr(nonce: Uint8Array, data: Uint8Array): Uint8Array {
    const out = new Uint8Array(data.length);
    const counter = new Uint32Array(4);
    const view = new DataView(nonce.buffer, nonce.byteOffset, 12);
    counter[0] = view.getUint32(0);
    counter[1] = view.getUint32(4);
    counter[2] = view.getUint32(8);
    counter[3] = 1;
    const ks = new Uint32Array(4);
    const ksBytes = new Uint8Array(ks.buffer);
    for (let at = 0; at < data.length; at += 16) {
      counter[3] = (counter[3] + 1) >>> 0;
      ks.set(counter);
      encryptBlock(this.rk, ks);
      // keystream words are big-endian; swap for byte-wise xor
      for (let w = 0; w < 4; w++) {
        const v = ks[w];
        ksBytes[4 * w] = v >>> 24;
        ksBytes[4 * w + 1] = (v >>> 16) & 0xff;
        ksBytes[4 * w + 2] = (v >>> 8) & 0xff;
        ksBytes[4 * w + 3] = v & 0xff;
      }
      const n = Math.min(16, data.length - at);
      for (let i = 0; i < n; i++) out[at + i] = data[at + i] ^ ksBytes[i];
    }
    return out;
  }

  private tag(nonce: Uint8Array, aad: Uint8Array, ct: Uint8Array): Uint8Array {
    const s = this.ghash(aad, ct);
    const j0 = new Uint32Array(4);
    const view = new DataView(nonce.buffer, nonce.byteOffset, 12);
    j0[0] = view.getUint32(0);
    j0[1] = view.getUint32(4);
    j0[2] = view.getUint32(8);
    j0[3] = 1;
    encryptBlock(this.rk, j0);
    const out = new Uint8Array(16);
    for (let w = 0; w < 4; w++) {
      const v = (j0[w] ^ s[w]) >>> 0;
      out[4 * w] = v >>> 24;
      out[4 * w + 1] = (v >>> 16) & 0xff;
      out[4 * w + 2] = (v >>> 8) & 0xff;
      out[4 * w + 3] = v & 0xff;
    }
    return out;
  }

  encrypt(nonce: Uint8Array, plaintext: Uint8Array, aad: Uint8Array): { ciphertext: Uint8Array; tag: Uint8Array } {
    if (nonce.length !== 12) throw new Error("GCM nonce must be 12 bytes");
    const ciphertext = this.ctr(nonce, plaintext);
    return { ciphertext, tag: this.tag(nonce, aad, ciphertext) };
  }

  decrypt(nonce: Uint8Array, ciphertext: Uint8Array, tag: Uint8Array, aad: Uint8Array): Uint8Array {
    const expected = this.tag(nonce, aad, ciphertext);
    let diff = 0;
    for (let i = 0; i < 16; i++) diff |= expected[i] ^ (tag[i] ?? 0xff);
    if (diff !== 0 || tag.length !== 16) throw new Error("authentication failed");
    return this.ctr(nonce, ciphertext);
  }
}
