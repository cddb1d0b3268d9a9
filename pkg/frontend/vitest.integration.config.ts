import { defineConfig } from "vitest/config";

// Runs against a live server; set INTERKEY_SERVER (e.g. http://localhost:8008).
export default defineConfig({
  test: {
    environment: "node",
    include: ["tests/integration.test.ts"],
    testTimeout: 60000,
  },
});
