// Read flow: body renders before attachments, tampering renders nothing,
// access denial is its own state.

import { describe, expect, it } from "vitest";

import { decodeEnvelope, envelopeToFields } from "../src/kernel/envelope.js";
import { KeyServiceApi } from "../src/functionality/api.js";
import { readFlow, type ReadingPayload } from "../src/functionality/read.js";
import { fixtures, fromHex, loadTestKernel } from "./helpers.js";

function keyApiReturning(status: number, keyHex?: string): KeyServiceApi {
  const fetchImpl = async () =>
    new Response(JSON.stringify(keyHex ? { key_b64: Buffer.from(keyHex, "hex").toString("base64url") } : { error: "unavailable" }), {
      status,
    });
  return new KeyServiceApi("http://keys", fetchImpl);
}

function recorder() {
  const events: string[] = [];
  return {
    events,
    handlers: {
      bodyReady: (subject: string) => events.push(`body:${subject}`),
      attachmentStarted: (i: number) => events.push(`start:${i}`),
      attachmentReady: (i: number, filename: string) => events.push(`ready:${i}:${filename}`),
      tamperAlert: () => events.push("tamper"),
      accessDenied: () => events.push("denied"),
      done: () => events.push("done"),
    },
  };
}

function payloadFromBundle(): ReadingPayload {
  const bundle = fixtures.message_bundle;
  return {
    message_id: bundle.message_id,
    credential: "tok",
    key_service_url: "http://keys",
    parts: bundle.envelopes.map((hex: string) => envelopeToFields(decodeEnvelope(fromHex(hex)))),
  };
}

describe("read flow", () => {
  it("renders the body before any attachment finishes", async () => {
    const kernel = await loadTestKernel();
    const { events, handlers } = recorder();
    await readFlow(payloadFromBundle(), {
      kernel,
      keyApi: keyApiReturning(200, fixtures.message_bundle.key),
      events: handlers,
    });
    expect(events[0]).toBe("body:interop bundle");
    expect(events.at(-1)).toBe("done");
    expect(events).toContain("ready:0:notes.txt");
    expect(events).toContain("ready:1:data.bin");
    expect(events.indexOf("body:interop bundle")).toBeLessThan(events.indexOf("ready:0:notes.txt"));
  });

  it("a tampered part yields the alert and nothing else", async () => {
    const kernel = await loadTestKernel();
    const payload = payloadFromBundle();
    const mac = Buffer.from(payload.parts[1].mac, "base64url");
    mac[0] ^= 1;
    payload.parts[1] = { ...payload.parts[1], mac: mac.toString("base64url").replace(/=+$/, "") };
    const { events, handlers } = recorder();
    await readFlow(payload, {
      kernel,
      keyApi: keyApiReturning(200, fixtures.message_bundle.key),
      events: handlers,
    });
    expect(events).toContain("tamper");
    expect(events).not.toContain("done");
    expect(events.filter((e) => e.startsWith("ready:"))).toHaveLength(0);
  });

  it("a tampered body stops everything up front", async () => {
    const kernel = await loadTestKernel();
    const payload = payloadFromBundle();
    const ct = Buffer.from(payload.parts[0].ciphertext, "base64url");
    ct[0] ^= 0x80;
    payload.parts[0] = { ...payload.parts[0], ciphertext: ct.toString("base64url").replace(/=+$/, "") };
    const { events, handlers } = recorder();
    await readFlow(payload, {
      kernel,
      keyApi: keyApiReturning(200, fixtures.message_bundle.key),
      events: handlers,
    });
    expect(events).toEqual(["tamper"]);
  });

  it("wrong credential shows the not-a-recipient view, never fetches a key", async () => {
    const kernel = await loadTestKernel();
    const { events, handlers } = recorder();
    await readFlow(payloadFromBundle(), {
      kernel,
      keyApi: keyApiReturning(404),
      events: handlers,
    });
    expect(events).toEqual(["denied"]);
  });

  it("structurally corrupt fields surface as tampering before decryption", async () => {
    const kernel = await loadTestKernel();
    const payload = payloadFromBundle();
    payload.parts[1] = { ...payload.parts[1], adata: "AA" };
    const { events, handlers } = recorder();
    await readFlow(payload, {
      kernel,
      keyApi: keyApiReturning(200, fixtures.message_bundle.key),
      events: handlers,
    });
    expect(events).toEqual(["tamper"]);
  });
});
