import { describe, expect, it } from "vitest";

import { ApiClient, ApiError, pollDelayMs } from "../src/api";

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

describe("request dedupe", () => {
  it("concurrent identical GETs share one network call", async () => {
    let calls = 0;
    const client = new ApiClient("", async () => {
      calls += 1;
      await new Promise((r) => setTimeout(r, 10));
      return jsonResponse({ items: [], page: 1, page_size: 50, total: 0,
                            bundle_checksum: "x" });
    });
    const [a, b, c] = await Promise.all([
      client.parcels("VineCity", 1),
      client.parcels("VineCity", 1),
      client.parcels("VineCity", 1),
    ]);
    expect(calls).toBe(1);
    expect(a).toEqual(b);
    expect(b).toEqual(c);
  });

  it("different URLs are not deduplicated", async () => {
    let calls = 0;
    const client = new ApiClient("", async () => {
      calls += 1;
      return jsonResponse({});
    });
    await Promise.all([client.parcel("A"), client.parcel("B")]);
    expect(calls).toBe(2);
  });

  it("a finished request is not reused", async () => {
    let calls = 0;
    const client = new ApiClient("", async () => {
      calls += 1;
      return jsonResponse({});
    });
    await client.parcel("A");
    await client.parcel("A");
    expect(calls).toBe(2);
  });
});

describe("error shaping", () => {
  it("surfaces the service error body", async () => {
    const client = new ApiClient("", async () =>
      jsonResponse({ code: "invalid-neighborhood", message: "unknown 'X'",
                     fields: [{ field: "neighborhood", message: "allowed: ..." }] }, 400));
    await expect(client.parcels("X", 1)).rejects.toMatchObject({
      status: 400,
      code: "invalid-neighborhood",
    });
  });
});

describe("scenario polling", () => {
  it("backoff doubles and caps", () => {
    expect(pollDelayMs(0)).toBe(500);
    expect(pollDelayMs(1)).toBe(1000);
    expect(pollDelayMs(2)).toBe(2000);
    expect(pollDelayMs(10)).toBe(8000);
  });

  it("polls a 202 job until done", async () => {
    const result = { mean_total_cost: 1, std_total_cost: 0, per_year_mean: [1],
                     eligible_count: 1, enrolled_initial: 1, enrolled_final: 1,
                     replicate_count: 9000, warnings: [] };
    let polls = 0;
    const delays: number[] = [];
    const client = new ApiClient(
      "",
      async (url, init) => {
        if (init?.method === "POST")
          return jsonResponse({ id: "j1", status: "running",
                                poll: "/api/v1/scenarios/j1", bundle_checksum: "x" }, 202);
        polls += 1;
        if (polls < 3)
          return jsonResponse({ id: "j1", status: "running", bundle_checksum: "x" });
        return jsonResponse({ id: "j1", status: "done", result, bundle_checksum: "x" });
      },
      async (ms) => { delays.push(ms); },
    );
    const response = await client.runScenario({ replicates: 9000 });
    expect(response.status).toBe("done");
    expect(response.result).toEqual(result);
    expect(polls).toBe(3);
    expect(delays).toEqual([500, 1000, 2000]);
  });

  it("raises when the job fails", async () => {
    const client = new ApiClient(
      "",
      async (_url, init) => {
        if (init?.method === "POST")
          return jsonResponse({ id: "j2", status: "running", bundle_checksum: "x" }, 202);
        return jsonResponse({ id: "j2", status: "failed", error: "boom",
                              bundle_checksum: "x" });
      },
      async () => {},
    );
    await expect(client.runScenario({})).rejects.toBeInstanceOf(ApiError);
  });
});
