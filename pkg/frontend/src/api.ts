/** Typed client for the session service. Shapes mirror the JSON payloads. */

export interface ExplanationRow {
  item: string;
  shared: string[];
  score: number;
}

export interface RecCard {
  item: string;
  tags: string[];
  score: number;
  explanations: ExplanationRow[];
}

export interface SlatePayload {
  user: string;
  version: number;
  state: string;
  recs: RecCard[];
}

export interface ItemRating {
  version: number;
  item: string;
  liked: boolean;
}

export interface PairRating {
  version: number;
  rec: string;
  other: string;
  label: 1 | -1;
}

export interface RelearnResult {
  user: string;
  version: number;
  noop: boolean;
  objective?: number;
  densified?: number;
}

export interface MetricsPayload {
  user: string;
  version: number;
  state: string;
  counts: Record<string, number>;
  pending_pairs: number;
  relearns: number;
}

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

async function asJson<T>(response: Response): Promise<T> {
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const body = (await response.json()) as { detail?: string };
      if (body.detail) detail = body.detail;
    } catch {
      // error bodies without JSON keep the status text
    }
    throw new ApiError(response.status, detail);
  }
  return (await response.json()) as T;
}

export class Client {
  constructor(
    private readonly base: string,
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private url(user: string, tail: string): string {
    return `${this.base}/users/${encodeURIComponent(user)}${tail}`;
  }

  private post<T>(user: string, tail: string, body?: unknown): Promise<T> {
    return this.fetchFn(this.url(user, tail), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    }).then((r) => asJson<T>(r));
  }

  getSlate(user: string): Promise<SlatePayload> {
    return this.fetchFn(this.url(user, "/slate")).then((r) =>
      asJson<SlatePayload>(r),
    );
  }

  rateItem(user: string, rating: ItemRating): Promise<void> {
    return this.post(user, "/feedback/item", rating);
  }

  ratePair(user: string, rating: PairRating): Promise<void> {
    return this.post(user, "/feedback/pair", rating);
  }

  relearn(user: string): Promise<RelearnResult> {
    return this.post(user, "/relearn");
  }

  metrics(user: string): Promise<MetricsPayload> {
    return this.fetchFn(this.url(user, "/metrics")).then((r) =>
      asJson<MetricsPayload>(r),
    );
  }
}
