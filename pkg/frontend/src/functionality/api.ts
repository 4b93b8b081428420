/**
 * REST clients for the two services. Fetch-based, byte payloads travel as
 * unpadded base64url strings; no key material or plaintext ever rides in
 * a URL.
 */

import { b64urlDecode, b64urlEncode } from "../kernel/envelope.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export interface Credential {
  recipient_id: string;
  token: string;
}

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

async function expectJson(response: Response): Promise<any> {
  if (!response.ok) {
    throw new ApiError(response.status, `service answered ${response.status}`);
  }
  return response.json();
}

export class KeyServiceApi {
  constructor(private baseUrl: string, private fetchImpl: FetchLike = fetch) {}

  async registerKey(
    messageId: string,
    key: Uint8Array,
    senderId: string,
    recipients: string[],
  ): Promise<{ credentials: Credential[]; senderToken: string }> {
    const response = await this.fetchImpl(`${this.baseUrl}/keys`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({
        message_id: messageId,
        key_b64: b64urlEncode(key),
        sender_id: senderId,
        recipients,
      }),
    });
    const body = await expectJson(response);
    return { credentials: body.credentials, senderToken: body.sender_token };
  }

  async fetchKey(messageId: string, token: string): Promise<Uint8Array> {
    const response = await this.fetchImpl(`${this.baseUrl}/keys/${encodeURIComponent(messageId)}`, {
      headers: { authorization: `Bearer ${token}` },
    });
    const body = await expectJson(response);
    return b64urlDecode(body.key_b64);
  }
}

export class MessageServiceApi {
  constructor(private baseUrl: string, private fetchImpl: FetchLike = fetch) {}

  async submitMessage(
    messageId: string,
    senderId: string,
    recipients: { recipient_id: string; token?: string }[],
    bodyEnvelope: string,
    attachmentEnvelopes: string[],
  ): Promise<string> {
    const response = await this.fetchImpl(`${this.baseUrl}/messages`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({
        message_id: messageId,
        sender_id: senderId,
        recipients,
        body_envelope: bodyEnvelope,
        attachment_envelopes: attachmentEnvelopes,
      }),
    });
    const body = await expectJson(response);
    return body.message_id;
  }

  async notify(messageId: string): Promise<{ dispatched: number; failures: string[] }> {
    const response = await this.fetchImpl(
      `${this.baseUrl}/messages/${encodeURIComponent(messageId)}/notify`,
      { method: "POST" },
    );
    return expectJson(response);
  }
}
