/**
 * Benchmark page: runs the portable kernel against the pure-script
 * baseline over the size grid and offers the CSV for download (same
 * schema as the native harness).
 */

import { MIB, analyzeBench, linearity, runBench, toCsv } from "../functionality/benchmark.js";
import { loadDirectKernel } from "../functionality/kernel_loader.js";

function el<T extends HTMLElement>(id: string): T {
  return document.getElementById(id) as T;
}

async function boot(): Promise<void> {
  const status = el<HTMLDivElement>("status");
  const table = el<HTMLPreElement>("results");
  const download = el<HTMLAnchorElement>("download");
  const run = el<HTMLButtonElement>("run");

  run.addEventListener("click", async () => {
    run.disabled = true;
    try {
      const sizes = el<HTMLInputElement>("sizes")
        .value.split(",")
        .map((s) => parseInt(s.trim(), 10) * MIB);
      const reps = parseInt(el<HTMLInputElement>("reps").value, 10);

      status.textContent = "Loading the portable kernel…";
      // direct (non-worker) load: the page is dedicated to the benchmark
      const kernel = await loadDirectKernel("/static/kernel.wasm");

      status.textContent = "Running…";
      const cells = await runBench(kernel, {
        sizesBytes: sizes,
        repetitions: reps,
        onProgress: (done, total) => {
          status.textContent = `Running… ${done}/${total} cells`;
        },
      });
      const rows = analyzeBench(cells);
      const lines = rows.map(
        (r) =>
          `${r.impl.padEnd(16)} ${r.op.padEnd(8)} ${(r.size_bytes / MIB).toString().padStart(3)} MiB ` +
          `${r.mean_ms.toFixed(2).padStart(10)} ms  speedup ${r.speedup.toFixed(2).padStart(6)}  ` +
          `normalized ${r.normalized.toFixed(2).padStart(6)}`,
      );
      const fit = linearity(rows, "kernel_portable", "encrypt");
      lines.push("", `kernel_portable encrypt: R^2 = ${fit.rSquared.toFixed(4)}`);
      table.textContent = lines.join("\n");

      download.href = URL.createObjectURL(new Blob([toCsv(rows)], { type: "text/csv" }));
      download.download = "browser-bench.csv";
      download.hidden = false;
      status.textContent = "Done.";
    } catch (err) {
      status.textContent = `Benchmark failed: ${err}`;
    } finally {
      run.disabled = false;
    }
  });
}

boot().catch(console.error);
