/**
 * In-browser benchmark: times the portable kernel against the pure-script
 * baseline on the same PRNG payload grid and emits the shared CSV schema
 * (impl, op, size_bytes, mean_ms, speedup, normalized).
 *
 * Timing covers only the cryptographic call; payload generation, key
 * setup, and result assembly sit outside the window. One untimed warm-up
 * precedes the timed repetitions of each cell.
 */

import { adCanonical, decodeEnvelope } from "../kernel/envelope.js";
import type { PortableKernel } from "../kernel/portable.js";
import { ScriptAesGcm } from "../baseline/aes_gcm.js";

export const MIB = 1024 * 1024;

export interface BenchCell {
  impl: "kernel_portable" | "script_baseline";
  op: "encrypt" | "decrypt";
  sizeBytes: number;
  meanMs: number;
  durationsMs: number[];
}

export interface BenchRow {
  impl: string;
  op: string;
  size_bytes: number;
  mean_ms: number;
  speedup: number;
  normalized: number;
}

export interface BenchOptions {
  sizesBytes: number[];
  repetitions: number;
  impls?: BenchCell["impl"][]; // default: both
  now?: () => number; // performance.now by default
  seed?: number;
  onProgress?: (done: number, total: number) => void;
}

/** Deterministic PRNG payload (xorshift128): same role as the native
 * harness's generator, not cryptographic. */
export function genPayload(sizeBytes: number, seed: number): Uint8Array {
  const out = new Uint8Array(sizeBytes);
  let x = 0x9e3779b9 ^ seed;
  let y = 0x243f6a88;
  let z = 0xb7e15162 + seed;
  let w = 0xdeadbeef;
  const words = Math.ceil(sizeBytes / 4);
  const view = new DataView(out.buffer);
  for (let i = 0; i < words; i++) {
    const t = (x ^ (x << 11)) >>> 0;
    x = y; y = z; z = w;
    w = ((w ^ (w >>> 19)) ^ (t ^ (t >>> 8))) >>> 0;
    if (4 * i + 4 <= sizeBytes) view.setUint32(4 * i, w);
    else for (let b = 0; 4 * i + b < sizeBytes; b++) out[4 * i + b] = (w >>> (8 * b)) & 0xff;
  }
  return out;
}

export async function runBench(kernel: PortableKernel, options: BenchOptions): Promise<BenchCell[]> {
  const now = options.now ?? (() => performance.now());
  const seed = options.seed ?? 0;
  const impls = options.impls ?? ["kernel_portable", "script_baseline"];
  const cells: BenchCell[] = [];
  const key = new Uint8Array(16).fill(7);
  const adBytes = adCanonical({
    messageId: "bench",
    partLabel: "body",
    partIndex: 0,
    senderId: "bench",
    contentType: "application/octet-stream",
  });
  const nonce = new Uint8Array(12).fill(3);
  const baseline = new ScriptAesGcm(key);
  const total = options.sizesBytes.length * impls.length * 2;
  let done = 0;

  for (const size of options.sizesBytes) {
    const payload = genPayload(size, seed);
    const sealedEnvelope = kernel.seal(key, payload, adBytes, nonce);
    const needBaseline = impls.includes("script_baseline");
    const { ciphertext, tag } = needBaseline
      ? baseline.encrypt(nonce, payload, adBytes)
      : { ciphertext: new Uint8Array(), tag: new Uint8Array() };

    const allTasks: { impl: BenchCell["impl"]; op: BenchCell["op"]; run: () => unknown }[] = [
      { impl: "kernel_portable", op: "encrypt", run: () => kernel.seal(key, payload, adBytes, nonce) },
      { impl: "kernel_portable", op: "decrypt", run: () => kernel.open(key, sealedEnvelope) },
      { impl: "script_baseline", op: "encrypt", run: () => baseline.encrypt(nonce, payload, adBytes) },
      { impl: "script_baseline", op: "decrypt", run: () => baseline.decrypt(nonce, ciphertext, tag, adBytes) },
    ];
    const tasks = allTasks.filter((t) => impls.includes(t.impl));

    for (const task of tasks) {
      task.run(); // warm-up, untimed
      const durations: number[] = [];
      for (let rep = 0; rep < options.repetitions; rep++) {
        const start = now();
        const result = task.run();
        durations.push(now() - start);
        if (task.op === "decrypt") {
          const output = result instanceof Uint8Array ? result : (result as { ciphertext: Uint8Array }).ciphertext;
          if (output.length !== payload.length) throw new Error("decrypt guard tripped");
        }
        await Promise.resolve(); // yield so a page stays responsive
      }
      cells.push({
        impl: task.impl,
        op: task.op,
        sizeBytes: size,
        meanMs: durations.reduce((a, b) => a + b, 0) / durations.length,
        durationsMs: durations,
      });
      options.onProgress?.(++done, total);
    }
  }
  return cells;
}

export function analyzeBench(cells: BenchCell[]): BenchRow[] {
  const sizes = [...new Set(cells.map((c) => c.sizeBytes))].sort((a, b) => a - b);
  const impls = [...new Set(cells.map((c) => c.impl))].sort();
  const base = sizes[0];
  const mean = (impl: string, op: string, size: number) =>
    cells.find((c) => c.impl === impl && c.op === op && c.sizeBytes === size)!.meanMs;
  const hasBaseline = impls.includes("script_baseline");
  const rows: BenchRow[] = [];
  for (const impl of impls) {
    for (const op of ["encrypt", "decrypt"]) {
      for (const size of sizes) {
        rows.push({
          impl,
          op,
          size_bytes: size,
          mean_ms: mean(impl, op, size),
          speedup: hasBaseline ? mean("script_baseline", op, size) / mean(impl, op, size) : NaN,
          normalized: mean(impl, op, size) / mean(impl, op, base),
        });
      }
    }
  }
  return rows;
}

/** Least-squares fit of mean duration against size; returns R^2. */
export function linearity(rows: BenchRow[], impl: string, op: string): { rSquared: number; normalizedMax: number } {
  const points = rows
    .filter((r) => r.impl === impl && r.op === op)
    .sort((a, b) => a.size_bytes - b.size_bytes);
  const xs = points.map((p) => p.size_bytes / MIB);
  const ys = points.map((p) => p.mean_ms);
  const n = xs.length;
  const mx = xs.reduce((a, b) => a + b, 0) / n;
  const my = ys.reduce((a, b) => a + b, 0) / n;
  const slope = xs.reduce((acc, x, i) => acc + (x - mx) * (ys[i] - my), 0) / xs.reduce((acc, x) => acc + (x - mx) ** 2, 0);
  const intercept = my - slope * mx;
  const ssRes = ys.reduce((acc, y, i) => acc + (y - (slope * xs[i] + intercept)) ** 2, 0);
  const ssTot = ys.reduce((acc, y) => acc + (y - my) ** 2, 0);
  return {
    rSquared: ssTot === 0 ? 1 : 1 - ssRes / ssTot,
    normalizedMax: points[points.length - 1].normalized,
  };
}

export function toCsv(rows: BenchRow[]): string {
  const lines = ["impl,op,size_bytes,mean_ms,speedup,normalized"];
  for (const row of rows) {
    const speedup = Number.isFinite(row.speedup) ? String(row.speedup) : "";
    lines.push(
      `${row.impl},${row.op},${row.size_bytes},${row.mean_ms},${speedup},${row.normalized}`,
    );
  }
  return lines.join("\n") + "\n";
}
