/** Session state machine: slate views, the rating queue, relearn, diffs.
 *
 * Ratings are queued and flushed immediately; each POST carries the slate
 * version current at send time. A 409 means the service moved on, so the
 * controller reloads the slate and replays everything still unsent, in
 * order. Network failures leave the queue intact for the next flush.
 */

import {
  ApiError,
  Client,
  ExplanationRow,
  RecCard,
  SlatePayload,
} from "./api.js";
import { hashString, mulberry32, seededShuffle } from "./shuffle.js";

export type TriState = 1 | -1 | 0;

export type QueuedRating =
  | { kind: "pair"; rec: string; other: string; label: 1 | -1 }
  | { kind: "item"; item: string; liked: boolean };

export interface CardView {
  item: string;
  tags: string[];
  score: number;
  rows: ExplanationRow[]; // shuffled per card with the session seed
}

export interface SlateView {
  version: number;
  state: string;
  cards: CardView[];
}

export interface SlateDiff {
  entered: string[];
  left: string[];
}

export function computeDiff(
  before: readonly string[],
  after: readonly string[],
): SlateDiff {
  const old = new Set(before);
  const now = new Set(after);
  return {
    entered: after.filter((item) => !old.has(item)),
    left: before.filter((item) => !now.has(item)),
  };
}

function toView(payload: SlatePayload, seed: number): SlateView {
  const cards = payload.recs.map((card: RecCard) => ({
    item: card.item,
    tags: card.tags,
    score: card.score,
    rows: seededShuffle(
      card.explanations,
      mulberry32(seed ^ hashString(card.item)),
    ),
  }));
  return { version: payload.version, state: payload.state, cards };
}

export class SessionController {
  slate: SlateView | null = null;
  lastDiff: SlateDiff | null = null;
  offline = false;

  private readonly queue: QueuedRating[] = [];
  private readonly pairStates = new Map<string, TriState>();
  private readonly itemStates = new Map<string, boolean>();
  private recordedPairsSinceRelearn = 0;
  private flushing = false;

  constructor(
    private readonly client: Client,
    readonly user: string,
    private readonly seed: number,
  ) {}

  async load(): Promise<SlateView> {
    this.slate = toView(await this.client.getSlate(this.user), this.seed);
    return this.slate;
  }

  pairState(rec: string, other: string): TriState {
    return this.pairStates.get(`${rec}|${other}`) ?? 0;
  }

  itemState(item: string): boolean | undefined {
    return this.itemStates.get(item);
  }

  pendingCount(): number {
    return this.queue.length;
  }

  relearnEnabled(): boolean {
    return this.recordedPairsSinceRelearn >= 1;
  }

  /** Tri-state pair control. 0 clears the local state and sends nothing:
   * absence is the service's encoding for "no feedback", and an already
   * recorded label simply stands. */
  async ratePair(rec: string, other: string, state: TriState): Promise<void> {
    this.pairStates.set(`${rec}|${other}`, state);
    if (state === 0) return;
    this.queue.push({ kind: "pair", rec, other, label: state });
    await this.flush();
  }

  async rateItem(item: string, liked: boolean): Promise<void> {
    this.itemStates.set(item, liked);
    this.queue.push({ kind: "item", item, liked });
    await this.flush();
  }

  /** Drain the queue in order. Stops (keeping the rest queued) when the
   * network is down; reloads and replays when the slate went stale. */
  async flush(): Promise<void> {
    if (this.flushing || !this.slate) return;
    this.flushing = true;
    try {
      while (this.queue.length > 0) {
        const rating = this.queue[0];
        try {
          await this.send(rating, this.slate.version);
        } catch (err) {
          if (err instanceof ApiError && err.status === 409) {
            await this.load(); // fresh version, then replay unsent ratings
            continue;
          }
          if (err instanceof ApiError) throw err; // 404/422: a real bug
          this.offline = true; // network failure: keep the queue
          return;
        }
        this.queue.shift();
        this.offline = false;
        if (rating.kind === "pair") this.recordedPairsSinceRelearn += 1;
      }
    } finally {
      this.flushing = false;
    }
  }

  private send(rating: QueuedRating, version: number): Promise<void> {
    if (rating.kind === "pair") {
      return this.client.ratePair(this.user, {
        version,
        rec: rating.rec,
        other: rating.other,
        label: rating.label,
      });
    }
    return this.client.rateItem(this.user, {
      version,
      item: rating.item,
      liked: rating.liked,
    });
  }

  /** Trigger relearning and diff the slates across it. */
  async relearn(): Promise<SlateDiff | null> {
    if (!this.slate) throw new Error("no slate loaded");
    await this.flush();
    const before = this.slate.cards.map((card) => card.item);
    const result = await this.client.relearn(this.user);
    if (result.noop) return null;
    await this.load();
    this.recordedPairsSinceRelearn = 0;
    this.lastDiff = computeDiff(
      before,
      this.slate!.cards.map((card) => card.item),
    );
    return this.lastDiff;
  }
}
