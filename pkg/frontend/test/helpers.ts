import { readFileSync } from "node:fs";
import { fileURLToPath } from "node:url";
import { PortableKernel } from "../src/kernel/portable.js";

export function fromHex(hex: string): Uint8Array {
  return new Uint8Array(Buffer.from(hex, "hex"));
}

export function toHex(bytes: Uint8Array): string {
  return Buffer.from(bytes).toString("hex");
}

export const fixtures = JSON.parse(
  readFileSync(fileURLToPath(new URL("./fixtures/interop.json", import.meta.url)), "utf-8"),
);

let cached: Promise<PortableKernel> | null = null;

export function loadTestKernel(): Promise<PortableKernel> {
  if (!cached) {
    const wasmPath = fileURLToPath(new URL("../../portable/kernel.wasm", import.meta.url));
    cached = PortableKernel.load(readFileSync(wasmPath));
  }
  return cached;
}
