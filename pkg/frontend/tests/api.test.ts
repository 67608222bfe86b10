import { describe, expect, it } from "vitest";
import { ApiError, SurveyClient, isComplete } from "../dist/api.js";

interface Call {
  url: string;
  init?: RequestInit;
}

/** fetch stand-in that pops one scripted response per request. */
function scriptedFetch(script: Array<{ status: number; body: unknown }>) {
  const calls: Call[] = [];
  const fetchFn = async (url: string, init?: RequestInit): Promise<Response> => {
    calls.push({ url, init });
    const step = script.shift();
    if (step === undefined) throw new Error(`unexpected request to ${url}`);
    return new Response(JSON.stringify(step.body), {
      status: step.status,
      headers: { "Content-Type": "application/json" },
    });
  };
  return { calls, fetchFn };
}

describe("SurveyClient", () => {
  it("registers an analyst with the form fields", async () => {
    const { calls, fetchFn } = scriptedFetch([
      { status: 200, body: { analyst_id: "a1", certified: true, state: "NY" } },
    ]);
    const client = new SurveyClient("http://svc", fetchFn);
    const analyst = await client.registerAnalyst(true, "NY");
    expect(analyst.analyst_id).toBe("a1");
    expect(calls[0].url).toBe("http://svc/api/analysts");
    expect(calls[0].init?.method).toBe("POST");
    expect(JSON.parse(calls[0].init?.body as string)).toEqual({
      certified: true,
      state: "NY",
    });
  });

  it("opens a session for an analyst", async () => {
    const { calls, fetchFn } = scriptedFetch([
      { status: 200, body: { session_id: "s1", analyst_id: "a1" } },
    ]);
    const client = new SurveyClient("", fetchFn);
    const session = await client.createSession("a1");
    expect(session.session_id).toBe("s1");
    expect(calls[0].url).toBe("/api/sessions");
    expect(JSON.parse(calls[0].init?.body as string)).toEqual({ analyst_id: "a1" });
  });

  it("fetches the next pair of a session", async () => {
    const pair = {
      pair_index: 4,
      firm_a: { id: "AAA", ticker: "AAA", name: "Alpha" },
      firm_b: { id: "BBB", ticker: "BBB", name: "Beta" },
    };
    const { calls, fetchFn } = scriptedFetch([{ status: 200, body: pair }]);
    const client = new SurveyClient("", fetchFn);
    const next = await client.nextPair("s1");
    expect(next).toEqual(pair);
    expect(isComplete(next)).toBe(false);
    expect(calls[0].url).toBe("/api/sessions/s1/next");
    expect(calls[0].init).toBeUndefined();
  });

  it("recognises a finished session", async () => {
    const { fetchFn } = scriptedFetch([{ status: 200, body: { complete: true } }]);
    const client = new SurveyClient("", fetchFn);
    expect(isComplete(await client.nextPair("s1"))).toBe(true);
  });

  it("submits a vote with pair index and winner", async () => {
    const { calls, fetchFn } = scriptedFetch([{ status: 200, body: { seq: 7 } }]);
    const client = new SurveyClient("", fetchFn);
    const ack = await client.submitVote("s1", 3, "AAA");
    expect(ack.seq).toBe(7);
    expect(calls[0].url).toBe("/api/sessions/s1/votes");
    expect(JSON.parse(calls[0].init?.body as string)).toEqual({
      pair_index: 3,
      winner: "AAA",
    });
  });

  it("raises ApiError carrying the status on a rejected call", async () => {
    const { fetchFn } = scriptedFetch([
      { status: 409, body: { detail: "OUT_OF_ORDER" } },
    ]);
    const client = new SurveyClient("", fetchFn);
    const failure = client.submitVote("s1", 3, "AAA");
    await expect(failure).rejects.toBeInstanceOf(ApiError);
    await expect(failure).rejects.toMatchObject({ status: 409 });
  });

  it("escapes session ids when building paths", async () => {
    const { calls, fetchFn } = scriptedFetch([{ status: 200, body: { complete: true } }]);
    const client = new SurveyClient("", fetchFn);
    await client.nextPair("a/b");
    expect(calls[0].url).toBe("/api/sessions/a%2Fb/next");
  });
});
