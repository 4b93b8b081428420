/**
 * Functionality layer for sending: compose-form validation and the
 * five-step send flow (generate key and encrypt locally, register the
 * key, submit ciphertexts, trigger notifications). Plaintext never
 * leaves this page's kernel calls.
 */

import { ATTACHMENT_LIMIT, b64urlEncode } from "../kernel/envelope.js";
import type { SecureMessage } from "../kernel/portable.js";
import type { KeyServiceApi, MessageServiceApi } from "./api.js";
import type { KernelHandle } from "./kernel_handle.js";

export interface ComposeForm {
  recipients: string[];
  subject: string;
  body: string;
  attachments: { filename: string; content: Uint8Array }[];
}

export interface ValidationResult {
  ok: boolean;
  errors: string[];
}

export function validateCompose(form: ComposeForm): ValidationResult {
  const errors: string[] = [];
  if (form.recipients.filter((r) => r.trim().length > 0).length === 0) {
    errors.push("at least one recipient is required");
  }
  if (form.body.trim().length === 0) {
    errors.push("the message body must not be empty");
  }
  for (const att of form.attachments) {
    if (att.content.length > ATTACHMENT_LIMIT) {
      errors.push(`attachment ${att.filename} exceeds the 20 MiB limit`);
    }
  }
  return { ok: errors.length === 0, errors };
}

export interface SendDeps {
  kernel: KernelHandle;
  keyApi: KeyServiceApi;
  messageApi: MessageServiceApi;
  senderId: string;
  newMessageId?: () => string;
}

export interface SendResult {
  messageId: string;
  notified: number;
  warnings: string[];
}

export class SendError extends Error {
  constructor(readonly step: "validate" | "register_key" | "submit" | "notify", message: string, readonly warnings: string[] = []) {
    super(message);
  }
}

/** Runs the send workflow. Throws SendError naming the failed step; a
 * submit failure after key registration carries a warning (the key
 * record has no message; compensating deletion is out of scope). */
export async function sendFlow(form: ComposeForm, deps: SendDeps): Promise<SendResult> {
  const validation = validateCompose(form);
  if (!validation.ok) {
    throw new SendError("validate", validation.errors.join("; "));
  }
  const messageId = (deps.newMessageId ?? defaultMessageId)();
  const message: SecureMessage = {
    subject: form.subject,
    body: form.body,
    attachments: form.attachments,
  };

  const key = await deps.kernel.generateKey();
  const envelopes = await deps.kernel.encryptMessage(key, messageId, deps.senderId, message);

  let credentials;
  try {
    ({ credentials } = await deps.keyApi.registerKey(
      messageId,
      key,
      deps.senderId,
      form.recipients,
    ));
  } catch (err) {
    throw new SendError("register_key", String(err));
  }

  const texts = envelopes.map(b64urlEncode);
  try {
    await deps.messageApi.submitMessage(
      messageId,
      deps.senderId,
      credentials.map((c) => ({ recipient_id: c.recipient_id, token: c.token })),
      texts[0],
      texts.slice(1),
    );
  } catch (err) {
    throw new SendError(
      "submit",
      String(err),
      [`key ${messageId} stayed registered without a message; resend will use a fresh id`],
    );
  }

  let notified = 0;
  const warnings: string[] = [];
  try {
    notified = (await deps.messageApi.notify(messageId)).dispatched;
  } catch (err) {
    warnings.push(`notifications failed: ${String(err)}`);
  }
  return { messageId, notified, warnings };
}

function defaultMessageId(): string {
  return crypto.randomUUID();
}
