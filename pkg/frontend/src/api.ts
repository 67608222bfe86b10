/**
 * Typed client for the survey service's JSON API.
 *
 * Voting surface only: the ratings endpoints are deliberately absent, so a
 * voter-facing screen cannot fetch scores mid-session.
 */

export interface FirmCard {
  id: string;
  ticker: string;
  name: string;
}

export interface PairView {
  pair_index: number;
  firm_a: FirmCard;
  firm_b: FirmCard;
}

export interface SessionDone {
  complete: true;
}

export type NextResponse = PairView | SessionDone;

export interface AnalystInfo {
  analyst_id: string;
  certified: boolean;
  state: string;
}

export interface SessionInfo {
  session_id: string;
  analyst_id: string;
}

export interface VoteAck {
  seq: number;
}

export function isComplete(next: NextResponse): next is SessionDone {
  return (next as SessionDone).complete === true;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    detail: string,
  ) {
    super(detail ? `HTTP ${status}: ${detail}` : `HTTP ${status}`);
    this.name = "ApiError";
  }
}

/** The four calls a voting screen needs; faked in tests. */
export interface VotingApi {
  registerAnalyst(certified: boolean, state: string): Promise<AnalystInfo>;
  createSession(analystId: string): Promise<SessionInfo>;
  nextPair(sessionId: string): Promise<NextResponse>;
  submitVote(sessionId: string, pairIndex: number, winner: string): Promise<VoteAck>;
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class SurveyClient implements VotingApi {
  constructor(
    private baseUrl = "",
    private fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const res = await this.fetchFn(this.baseUrl + path, init);
    if (!res.ok) {
      const detail = await res.text().catch(() => "");
      throw new ApiError(res.status, detail);
    }
    return res.json() as Promise<T>;
  }

  private post<T>(path: string, body: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  registerAnalyst(certified: boolean, state: string): Promise<AnalystInfo> {
    return this.post("/api/analysts", { certified, state });
  }

  createSession(analystId: string): Promise<SessionInfo> {
    return this.post("/api/sessions", { analyst_id: analystId });
  }

  nextPair(sessionId: string): Promise<NextResponse> {
    return this.request(`/api/sessions/${encodeURIComponent(sessionId)}/next`);
  }

  submitVote(sessionId: string, pairIndex: number, winner: string): Promise<VoteAck> {
    return this.post(`/api/sessions/${encodeURIComponent(sessionId)}/votes`, {
      pair_index: pairIndex,
      winner,
    });
  }
}
