/**
 * Structural interface the flows program against. The direct wasm kernel
 * satisfies it synchronously; the worker-backed proxy satisfies it with
 * Promises. Flows await both.
 */

import type { SecureMessage } from "../kernel/portable.js";

export type OpenedPart =
  | { kind: "body"; subject: string; body: string }
  | { kind: "attachment"; filename: string; content: Uint8Array };

export interface KernelHandle {
  generateKey(): Uint8Array | Promise<Uint8Array>;
  encryptMessage(
    key: Uint8Array,
    messageId: string,
    senderId: string,
    message: SecureMessage,
  ): Uint8Array[] | Promise<Uint8Array[]>;
  openPart(
    key: Uint8Array,
    messageId: string,
    index: number,
    envelope: Uint8Array,
  ): OpenedPart | Promise<OpenedPart>;
}
