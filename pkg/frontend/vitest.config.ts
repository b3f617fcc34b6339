import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "node",
    include: ["tests/**/*.test.ts"],
    // the review-loop suite trains a checkpoint and boots the real service
    testTimeout: 120_000,
    hookTimeout: 240_000,
  },
});
