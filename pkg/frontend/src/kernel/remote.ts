/**
 * Main-thread proxy to the crypto worker. Presents the same operations
 * as PortableKernel with Promise results; kernel errors cross the worker
 * boundary as tagged records and are rethrown as their real classes.
 */

import {
  AuthenticationFailed,
  KernelError,
  MalformedEnvelope,
  UnsupportedVersion,
} from "./envelope.js";
import type { SecureMessage } from "./portable.js";

interface Pending {
  resolve(value: unknown): void;
  reject(err: Error): void;
}

function rehydrate(error: { kind: string; message: string }): Error {
  switch (error.kind) {
    case "auth":
      return new AuthenticationFailed(error.message);
    case "malformed":
      return new MalformedEnvelope(error.message);
    case "version":
      return new UnsupportedVersion(error.message);
    default:
      return new KernelError(error.message);
  }
}

export class RemoteKernel {
  private nextId = 1;
  private pending = new Map<number, Pending>();

  private constructor(private worker: Worker) {
    worker.onmessage = (event: MessageEvent) => {
      const { id, result, error } = event.data;
      const entry = this.pending.get(id);
      if (!entry) return;
      this.pending.delete(id);
      if (error) entry.reject(rehydrate(error));
      else entry.resolve(result);
    };
  }

  static async connect(workerUrl: string | URL, wasmUrl: string): Promise<RemoteKernel> {
    const remote = new RemoteKernel(new Worker(workerUrl, { type: "module" }));
    await remote.call("init", { wasmUrl });
    return remote;
  }

  private call(op: string, payload: Record<string, unknown>): Promise<any> {
    const id = this.nextId++;
    return new Promise((resolve, reject) => {
      this.pending.set(id, { resolve, reject });
      this.worker.postMessage({ id, op, ...payload });
    });
  }

  generateKey(): Promise<Uint8Array> {
    return this.call("generate_key", {});
  }

  encryptMessage(
    key: Uint8Array,
    messageId: string,
    senderId: string,
    message: SecureMessage,
  ): Promise<Uint8Array[]> {
    return this.call("encrypt_message", { key, messageId, senderId, message });
  }

  openPart(
    key: Uint8Array,
    messageId: string,
    index: number,
    envelope: Uint8Array,
  ): Promise<
    | { kind: "body"; subject: string; body: string }
    | { kind: "attachment"; filename: string; content: Uint8Array }
  > {
    return this.call("open_part", { key, messageId, index, envelope });
  }

  terminate(): void {
    this.worker.terminate();
  }
}
