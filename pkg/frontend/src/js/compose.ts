/**
 * Compose page wiring: reads the form, validates, and runs the send flow.
 * The submit button stays disabled until the form is valid; oversize
 * attachments never leave the page.
 */

import {
  sendFlow,
  validateCompose,
  type ComposeForm,
  SendError,
} from "../functionality/compose.js";
import { KeyServiceApi, MessageServiceApi } from "../functionality/api.js";
import { loadKernel } from "../functionality/kernel_loader.js";

function el<T extends HTMLElement>(id: string): T {
  return document.getElementById(id) as T;
}

async function currentForm(): Promise<ComposeForm> {
  const files = el<HTMLInputElement>("attachments").files;
  const attachments = [];
  for (const file of files ? Array.from(files) : []) {
    attachments.push({ filename: file.name, content: new Uint8Array(await file.arrayBuffer()) });
  }
  return {
    recipients: el<HTMLInputElement>("recipients")
      .value.split(",")
      .map((r) => r.trim())
      .filter(Boolean),
    subject: el<HTMLInputElement>("subject").value,
    body: el<HTMLTextAreaElement>("body").value,
    attachments,
  };
}

async function refreshValidity(): Promise<void> {
  const result = validateCompose(await currentForm());
  el<HTMLButtonElement>("send").disabled = !result.ok;
  el<HTMLDivElement>("errors").textContent = result.errors.join("; ");
}

async function boot(): Promise<void> {
  const status = el<HTMLDivElement>("status");
  status.textContent = "Loading the cryptography module…";
  const kernel = await loadKernel({
    wasmUrl: "/static/kernel.wasm",
    workerUrl: "/static/kernel/worker.js",
  });
  const keyApi = new KeyServiceApi(el<HTMLMetaElement>("key-service-url").content);
  const messageApi = new MessageServiceApi("");
  status.textContent = "Ready.";

  for (const id of ["recipients", "subject", "body", "attachments"]) {
    el(id).addEventListener("input", () => void refreshValidity());
  }
  await refreshValidity();

  el<HTMLButtonElement>("send").addEventListener("click", async (event) => {
    event.preventDefault();
    status.textContent = "Encrypting and sending…";
    try {
      const result = await sendFlow(await currentForm(), {
        kernel,
        keyApi,
        messageApi,
        senderId: el<HTMLInputElement>("sender").value || "me@example.test",
      });
      status.textContent =
        `Sent: message ${result.messageId}, ${result.notified} notification(s) dispatched.` +
        (result.warnings.length ? ` Warnings: ${result.warnings.join("; ")}` : "");
    } catch (err) {
      if (err instanceof SendError) {
        status.textContent = `Send failed at ${err.step}: ${err.message}. You can retry.`;
      } else {
        status.textContent = `Send failed: ${err}`;
      }
    }
  });
}

boot().catch((err) => {
  const status = document.getElementById("status");
  if (status) status.textContent = `Client failed to start: ${err}`;
});
