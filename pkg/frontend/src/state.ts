/**
 * Voting flow state machine, kept free of DOM concerns so it can run
 * against a fake API in tests and the real one in the browser.
 *
 * Every transition is driven by a server response. Local state is
 * disposable: start() rebuilds the right screen from the stored ids and
 * whatever GET /next reports.
 */

import { ApiError, isComplete } from "./api.js";
import type { PairView, VotingApi } from "./api.js";

/** Pairs served per session; mirrors the server's session size. */
export const PAIRS_PER_SESSION = 10;

/**
 * Minimal persistence for the analyst and session ids; localStorage in
 * the browser, an in-memory map in tests.
 */
export interface KeyValueStore {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

export type Screen =
  | { kind: "register" }
  | { kind: "voting"; pair: PairView; selected: string | null; inFlight: boolean }
  | { kind: "complete" }
  | { kind: "error"; message: string };

const ANALYST_KEY = "analyst_id";
const SESSION_KEY = "session_id";

export class SessionController {
  private screen: Screen = { kind: "register" };
  private listeners: Array<(screen: Screen) => void> = [];

  constructor(
    private api: VotingApi,
    private store: KeyValueStore,
  ) {}

  get current(): Screen {
    return this.screen;
  }

  subscribe(listener: (screen: Screen) => void): void {
    this.listeners.push(listener);
  }

  private show(screen: Screen): void {
    this.screen = screen;
    for (const listener of this.listeners) listener(screen);
  }

  private fail(err: unknown): void {
    const message = err instanceof Error ? err.message : String(err);
    this.show({ kind: "error", message });
  }

  /**
   * Entry point, also the retry action: resume a stored session, else
   * open one for a known analyst, else ask for registration.
   */
  async start(): Promise<void> {
    try {
      const sessionId = this.store.getItem(SESSION_KEY);
      if (sessionId !== null) {
        try {
          await this.refresh(sessionId);
          return;
        } catch (err) {
          // a vanished session is not fatal; fall through to a fresh one
          if (!(err instanceof ApiError && err.status === 404)) throw err;
          this.store.removeItem(SESSION_KEY);
        }
      }
      const analystId = this.store.getItem(ANALYST_KEY);
      if (analystId === null) {
        this.show({ kind: "register" });
        return;
      }
      try {
        await this.beginSession(analystId);
      } catch (err) {
        // the server no longer knows this analyst; register again
        if (!(err instanceof ApiError && err.status === 404)) throw err;
        this.store.removeItem(ANALYST_KEY);
        this.show({ kind: "register" });
      }
    } catch (err) {
      this.fail(err);
    }
  }

  /** Registration form action; persists the id only after the server acks. */
  async register(certified: boolean, state: string): Promise<void> {
    try {
      const analyst = await this.api.registerAnalyst(certified, state);
      this.store.setItem(ANALYST_KEY, analyst.analyst_id);
      await this.beginSession(analyst.analyst_id);
    } catch (err) {
      this.fail(err);
    }
  }

  /** Completion screen action: another ten pairs for the same analyst. */
  async anotherSession(): Promise<void> {
    try {
      const analystId = this.store.getItem(ANALYST_KEY);
      if (analystId === null) {
        this.show({ kind: "register" });
        return;
      }
      await this.beginSession(analystId);
    } catch (err) {
      this.fail(err);
    }
  }

  /** Card click; only firms of the displayed pair are selectable. */
  select(firmId: string): void {
    const screen = this.screen;
    if (screen.kind !== "voting" || screen.inFlight) return;
    if (firmId !== screen.pair.firm_a.id && firmId !== screen.pair.firm_b.id) return;
    this.show({ ...screen, selected: firmId });
  }

  /**
   * Submit the selected firm. The in-flight flag flips before any await,
   * so a double click cannot send a second request; an out-of-order
   * rejection just resyncs to whatever the server shows next.
   */
  async submit(): Promise<void> {
    const screen = this.screen;
    if (screen.kind !== "voting" || screen.selected === null || screen.inFlight) return;
    const sessionId = this.store.getItem(SESSION_KEY);
    if (sessionId === null) return;
    this.show({ ...screen, inFlight: true });
    try {
      await this.api.submitVote(sessionId, screen.pair.pair_index, screen.selected);
    } catch (err) {
      if (!(err instanceof ApiError && err.status === 409)) {
        this.fail(err);
        return;
      }
    }
    try {
      await this.refresh(sessionId);
    } catch (err) {
      this.fail(err);
    }
  }

  private async beginSession(analystId: string): Promise<void> {
    const session = await this.api.createSession(analystId);
    this.store.setItem(SESSION_KEY, session.session_id);
    await this.refresh(session.session_id);
  }

  private async refresh(sessionId: string): Promise<void> {
    const next = await this.api.nextPair(sessionId);
    if (isComplete(next)) {
      this.store.removeItem(SESSION_KEY);
      this.show({ kind: "complete" });
    } else {
      this.show({ kind: "voting", pair: next, selected: null, inFlight: false });
    }
  }
}
