import { defineConfig } from "vitest/config";

// The unit-tested modules (viewState, api) are DOM-free by design, so the
// plain node environment suffices; canvas/DOM wiring is covered by the
// integration flow instead.
export default defineConfig({
  test: {
    environment: "node",
    include: ["tests/*.test.ts"],
    exclude: ["tests/integration.test.ts"],
  },
});
