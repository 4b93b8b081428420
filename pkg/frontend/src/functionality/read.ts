/**
 * Functionality layer for reading: fetch the key, decrypt the body first
 * and show it, then decrypt attachments one by one. Any authentication
 * failure raises the tamper alert and clears everything already shown:
 * a manipulated message renders nothing.
 */

import {
  AuthenticationFailed,
  MalformedEnvelope,
  type EnvelopeFields,
  UnsupportedVersion,
  envelopeFromFields,
  encodeEnvelope,
} from "../kernel/envelope.js";
import { ApiError, type KeyServiceApi } from "./api.js";
import type { KernelHandle } from "./kernel_handle.js";

export interface ReadingPayload {
  message_id: string;
  credential: string;
  key_service_url: string;
  parts: EnvelopeFields[];
}

/** UI surface driven by the flow; the integration layer maps these to DOM
 * updates, tests record them. */
export interface ReadingEvents {
  bodyReady(subject: string, body: string): void;
  attachmentStarted(index: number): void;
  attachmentReady(index: number, filename: string, content: Uint8Array): void;
  tamperAlert(detail: string): void;
  accessDenied(): void;
  done(): void;
}

export interface ReadDeps {
  kernel: KernelHandle;
  keyApi: KeyServiceApi;
  events: ReadingEvents;
  /** yields control between parts so the page stays responsive */
  breathe?: () => Promise<void>;
}

export async function readFlow(payload: ReadingPayload, deps: ReadDeps): Promise<void> {
  const breathe = deps.breathe ?? (() => Promise.resolve());

  let key: Uint8Array;
  try {
    key = await deps.keyApi.fetchKey(payload.message_id, payload.credential);
  } catch (err) {
    if (err instanceof ApiError && (err.status === 404 || err.status === 403)) {
      deps.events.accessDenied();
      return;
    }
    throw err;
  }

  // decode all parts up front: structural tampering surfaces before any
  // plaintext exists
  let encoded: Uint8Array[];
  try {
    encoded = payload.parts.map((fields) => encodeEnvelope(envelopeFromFields(fields)));
  } catch (err) {
    if (err instanceof MalformedEnvelope || err instanceof UnsupportedVersion) {
      deps.events.tamperAlert(String(err));
      return;
    }
    throw err;
  }

  try {
    const body = await deps.kernel.openPart(key, payload.message_id, 0, encoded[0]);
    if (body.kind !== "body") throw new AuthenticationFailed("first part is not the body");
    deps.events.bodyReady(body.subject, body.body);

    for (let i = 1; i < encoded.length; i++) {
      deps.events.attachmentStarted(i - 1);
      await breathe();
      const part = await deps.kernel.openPart(key, payload.message_id, i, encoded[i]);
      if (part.kind !== "attachment") throw new AuthenticationFailed("expected an attachment part");
      deps.events.attachmentReady(i - 1, part.filename, part.content);
    }
    deps.events.done();
  } catch (err) {
    if (
      err instanceof AuthenticationFailed ||
      err instanceof MalformedEnvelope ||
      err instanceof UnsupportedVersion
    ) {
      // whole-message rejection: the alert replaces anything shown so far
      deps.events.tamperAlert("message failed verification");
      return;
    }
    throw err;
  }
}
