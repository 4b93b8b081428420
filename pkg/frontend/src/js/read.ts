/**
 * Reading page bootstrap: parses the envelope payload the service
 * embedded, loads the kernel (in a worker when possible), and drives the
 * read flow. Body first, attachments afterwards; tampering renders
 * nothing but the alert.
 */

import { readFlow, type ReadingPayload } from "../functionality/read.js";
import { KeyServiceApi } from "../functionality/api.js";
import { loadKernel } from "../functionality/kernel_loader.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

function asText(parent: HTMLElement, text: string): void {
  parent.textContent = text; // never innerHTML: message content stays text
}

async function boot(): Promise<void> {
  const status = el<HTMLDivElement>("status");
  const messageBox = el<HTMLDivElement>("message");
  const attachmentList = el<HTMLUListElement>("attachments");

  const payloadNode = document.getElementById("envelope-payload");
  if (!payloadNode?.textContent) {
    asText(status, "No message payload found.");
    return;
  }
  const payload: ReadingPayload = JSON.parse(payloadNode.textContent);

  asText(status, "Loading the cryptography module…");
  const kernel = await loadKernel({
    wasmUrl: "/static/kernel.wasm",
    workerUrl: "/static/kernel/worker.js",
  });
  const keyApi = new KeyServiceApi(payload.key_service_url);

  asText(status, "Decrypting…");
  await readFlow(payload, {
    kernel,
    keyApi,
    events: {
      bodyReady(subject, body) {
        messageBox.hidden = false;
        const title = document.createElement("h2");
        asText(title, subject);
        const text = document.createElement("pre");
        asText(text, body);
        messageBox.replaceChildren(title, text);
        asText(status, "Message decrypted. Attachments follow.");
      },
      attachmentStarted(index) {
        const item = document.createElement("li");
        item.id = `attachment-${index}`;
        asText(item, "decrypting…");
        attachmentList.appendChild(item);
      },
      attachmentReady(index, filename, content) {
        const item = el<HTMLLIElement>(`attachment-${index}`);
        const link = document.createElement("a");
        link.download = filename;
        link.href = URL.createObjectURL(new Blob([content as BlobPart]));
        asText(link, `${filename} (${content.length} bytes)`);
        item.replaceChildren(link);
      },
      tamperAlert() {
        messageBox.hidden = true;
        messageBox.replaceChildren();
        attachmentList.replaceChildren();
        asText(
          status,
          "WARNING: this message failed verification and may have been tampered with. Nothing was decrypted.",
        );
      },
      accessDenied() {
        asText(status, "You are not a recipient of this message.");
      },
      done() {
        asText(status, "All parts decrypted.");
      },
    },
  });
}

boot().catch((err) => {
  const status = document.getElementById("status");
  if (status) status.textContent = `Failed to load the secure message client: ${err}`;
});
