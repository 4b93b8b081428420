import { defineConfig } from "vitest/config";

// timing-sensitive benchmark tests must not share the CPU with other
// test files; the whole suite is short enough to run sequentially
export default defineConfig({
  test: {
    fileParallelism: false,
    testTimeout: 120_000,
  },
});
