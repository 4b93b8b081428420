/**
 * Loads the portable kernel for the page: worker-backed when Workers are
 * available (crypto off the main thread), direct otherwise.
 */

import { KernelError } from "../kernel/envelope.js";
import { PortableKernel } from "../kernel/portable.js";
import { RemoteKernel } from "../kernel/remote.js";
import type { KernelHandle } from "./kernel_handle.js";

export interface LoaderOptions {
  wasmUrl: string;
  workerUrl?: string | URL;
}

export async function loadKernel(options: LoaderOptions): Promise<KernelHandle> {
  if (options.workerUrl && typeof Worker !== "undefined") {
    return RemoteKernel.connect(options.workerUrl, options.wasmUrl);
  }
  return loadDirectKernel(options.wasmUrl);
}

/** In-page (non-worker) kernel: the benchmark page wants the raw
 * byte-buffer surface without a postMessage hop distorting timings. */
export async function loadDirectKernel(wasmUrl: string): Promise<PortableKernel> {
  const response = await fetch(wasmUrl);
  if (!response.ok) {
    throw new KernelError(`portable kernel module unavailable (${response.status})`);
  }
  return PortableKernel.load(await response.arrayBuffer());
}
