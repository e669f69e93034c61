/**
 * Campaign controller: the suggest/enter/submit decision loop, kept free of
 * DOM concerns so that it can be driven headlessly.
 *
 * State transitions only happen through service responses.  A stale-revision
 * conflict (another tab moved the campaign forward) triggers a refetch and a
 * user-visible warning; the locally entered value is preserved in the input
 * for the operator to re-submit, so nothing is lost.
 */

import { ApiClient, ApiError } from "./api";
import type { SessionView, SuggestResponse } from "./types";

export type Phase = "idle" | "awaiting-entry" | "busy" | "disconnected";

export interface ControllerState {
  phase: Phase;
  session: SessionView | null;
  suggestion: SuggestResponse | null;
  warning: string | null;
}

export type Listener = (state: ControllerState) => void;

export class CampaignController {
  private state: ControllerState = {
    phase: "idle",
    session: null,
    suggestion: null,
    warning: null,
  };
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(
    private readonly api: ApiClient,
    private readonly sessionId: string,
    private readonly listener: Listener = () => {},
  ) {}

  snapshot(): ControllerState {
    return this.state;
  }

  private update(patch: Partial<ControllerState>): void {
    this.state = { ...this.state, ...patch };
    this.listener(this.state);
  }

  /** Fetch the latest session snapshot; flags disconnection on network loss. */
  async refresh(): Promise<void> {
    try {
      const session = await this.api.getSession(this.sessionId);
      const phase: Phase =
        this.state.phase === "awaiting-entry" && session.pending !== null
          ? "awaiting-entry"
          : "idle";
      this.update({ session, phase, warning: this.state.warning });
    } catch (err) {
      if (err instanceof ApiError) throw err;
      this.update({ phase: "disconnected", warning: "connection lost" });
    }
  }

  /** Ask the optimiser for the next experiment. */
  async requestSuggestion(): Promise<SuggestResponse> {
    this.update({ phase: "busy", warning: null });
    try {
      const suggestion = await this.api.suggest(this.sessionId);
      this.update({ phase: "awaiting-entry", suggestion });
      await this.refresh();
      return suggestion;
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        // a suggestion is already pending (e.g. page reload): recover it
        await this.refresh();
        const pending = this.state.session?.pending ?? null;
        if (pending) {
          const suggestion: SuggestResponse = {
            x: pending,
            acq_value: null,
            score: null,
            revision: this.state.session!.revision,
            acq_profile: null,
          };
          this.update({ phase: "awaiting-entry", suggestion, warning: null });
          return suggestion;
        }
      }
      this.update({ phase: "idle" });
      throw err;
    }
  }

  /**
   * Validate and submit a measured outcome for the pending suggestion.
   * Returns true when the observation was committed.
   */
  async submitObservation(yText: string): Promise<boolean> {
    const suggestion = this.state.suggestion;
    if (!suggestion) {
      this.update({ warning: "no pending suggestion" });
      return false;
    }
    const y = Number(yText.trim());
    if (yText.trim() === "" || !Number.isFinite(y)) {
      this.update({ warning: `not a finite number: "${yText}"` });
      return false;
    }
    this.update({ phase: "busy", warning: null });
    try {
      const told = await this.api.tell(this.sessionId, suggestion.x, y, suggestion.revision);
      // optimistic local append; the next refresh reconciles with the server
      const session = this.state.session;
      if (session) {
        this.update({
          session: {
            ...session,
            trace: [...session.trace, told.trace_row],
            recommendation: told.recommendation,
            revision: told.revision,
            pending: null,
          },
        });
      }
      this.update({ phase: "idle", suggestion: null });
      await this.refresh();
      return true;
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        await this.refresh();
        const pending = this.state.session?.pending ?? null;
        this.update({
          phase: pending ? "awaiting-entry" : "idle",
          suggestion:
            pending && suggestion
              ? { ...suggestion, x: pending, revision: this.state.session!.revision }
              : null,
          warning: "campaign advanced elsewhere; state reloaded — please re-check and re-submit",
        });
        return false;
      }
      this.update({ phase: "idle", warning: err instanceof Error ? err.message : String(err) });
      return false;
    }
  }

  /** Begin polling while a panel is visible; human cadence dominates. */
  startPolling(intervalMs = 1000): void {
    if (this.timer !== null) return;
    this.timer = setInterval(() => {
      void this.refresh().catch(() => undefined);
    }, intervalMs);
  }

  stopPolling(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }
}
