import { describe, expect, it, vi } from "vitest";
import { ApiError, SessionClient } from "../src/api.js";

function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

describe("SessionClient", () => {
  it("createSession posts base64 JSON and parses the response", async () => {
    const fetchMock = vi.fn(async () =>
      jsonResponse(200, {
        session_id: "s1",
        k: 2,
        image_size: [64, 64],
        keypoints: [
          [1, 2],
          [3, 4],
        ],
        step: 0,
      }),
    );
    const client = new SessionClient("http://host", fetchMock as never);
    const resp = await client.createSession("QUJD");
    expect(resp.session_id).toBe("s1");
    expect(resp.keypoints[1]).toEqual([3, 4]);
    const [url, init] = fetchMock.mock.calls[0] as unknown as [string, RequestInit];
    expect(url).toBe("http://host/sessions");
    expect(init.method).toBe("POST");
    expect(JSON.parse(init.body as string)).toEqual({ image_base64: "QUJD" });
  });

  it("applyClick targets the session click endpoint with the payload", async () => {
    const fetchMock = vi.fn(async () =>
      jsonResponse(200, { session_id: "s1", keypoints: [[5, 6]], step: 1 }),
    );
    const client = new SessionClient("http://host", fetchMock as never);
    await client.applyClick("s1", 3, 10.5, 20.25);
    const [url, init] = fetchMock.mock.calls[0] as unknown as [string, RequestInit];
    expect(url).toBe("http://host/sessions/s1/clicks");
    expect(JSON.parse(init.body as string)).toEqual({ keypoint: 3, x: 10.5, y: 20.25 });
  });

  it("undo posts to the undo endpoint", async () => {
    const fetchMock = vi.fn(async () =>
      jsonResponse(200, { session_id: "s1", keypoints: [[1, 1]], step: 0, undone: true }),
    );
    const client = new SessionClient("http://host", fetchMock as never);
    const resp = await client.undo("s1");
    expect(resp.undone).toBe(true);
    expect((fetchMock.mock.calls[0] as unknown as [string])[0]).toBe(
      "http://host/sessions/s1/undo",
    );
  });

  it("non-2xx responses raise ApiError with status and detail", async () => {
    const fetchMock = vi.fn(async () => jsonResponse(404, { detail: "unknown session" }));
    const client = new SessionClient("http://host", fetchMock as never);
    await expect(client.getSession("nope")).rejects.toThrowError(ApiError);
    await expect(client.getSession("nope")).rejects.toMatchObject({ status: 404 });
  });

  it("non-JSON error bodies still raise ApiError", async () => {
    const fetchMock = vi.fn(
      async () => new Response("boom", { status: 500, statusText: "Internal Server Error" }),
    );
    const client = new SessionClient("http://host", fetchMock as never);
    await expect(client.health()).rejects.toMatchObject({ status: 500 });
  });

  it("deleteSession issues DELETE", async () => {
    const fetchMock = vi.fn(async () => jsonResponse(200, { deleted: true }));
    const client = new SessionClient("http://host", fetchMock as never);
    await client.deleteSession("s1");
    const [url, init] = fetchMock.mock.calls[0] as unknown as [string, RequestInit];
    expect(url).toBe("http://host/sessions/s1");
    expect(init.method).toBe("DELETE");
  });
});
