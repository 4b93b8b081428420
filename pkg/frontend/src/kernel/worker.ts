/**
 * Crypto worker: runs the portable kernel off the main thread so big
 * attachment decryptions never block the page. Message protocol:
 *
 *   -> {id, op: "init", wasmUrl}
 *   -> {id, op: "generate_key"}
 *   -> {id, op: "encrypt_message", key, messageId, senderId, message}
 *   -> {id, op: "open_part", key, messageId, index, envelope}
 *   <- {id, result} | {id, error: {kind, message}}
 */

import {
  AuthenticationFailed,
  MalformedEnvelope,
  UnsupportedVersion,
} from "./envelope.js";
import { PortableKernel } from "./portable.js";

const scope = globalThis as unknown as {
  onmessage: ((event: MessageEvent) => void) | null;
  postMessage(data: unknown, transfer?: Transferable[]): void;
  fetch: typeof fetch;
};

let kernel: PortableKernel | null = null;

function errorKind(err: unknown): string {
  if (err instanceof AuthenticationFailed) return "auth";
  if (err instanceof MalformedEnvelope) return "malformed";
  if (err instanceof UnsupportedVersion) return "version";
  return "other";
}

scope.onmessage = async (event: MessageEvent) => {
  const { id, op } = event.data;
  try {
    if (op === "init") {
      const response = await scope.fetch(event.data.wasmUrl);
      kernel = await PortableKernel.load(await response.arrayBuffer());
      scope.postMessage({ id, result: true });
      return;
    }
    if (!kernel) throw new Error("kernel not initialized");
    if (op === "generate_key") {
      scope.postMessage({ id, result: kernel.generateKey() });
    } else if (op === "encrypt_message") {
      const { key, messageId, senderId, message } = event.data;
      scope.postMessage({ id, result: kernel.encryptMessage(key, messageId, senderId, message) });
    } else if (op === "open_part") {
      const { key, messageId, index, envelope } = event.data;
      scope.postMessage({ id, result: kernel.openPart(key, messageId, index, envelope) });
    } else {
      throw new Error(`unknown op ${op}`);
    }
  } catch (err) {
    scope.postMessage({ id, error: { kind: errorKind(err), message: String(err) } });
  }
};
