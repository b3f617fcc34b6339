// Typed client for the review service HTTP API. The UI never computes
// probabilities or attention itself; everything shown comes from here.

export interface EvidenceToken {
  token_index: number;
  span: [number, number];
  score: number;
  intensity: number;
}

export interface Explanation {
  tokens: EvidenceToken[];
}

export interface PredictedCode {
  code: string;
  probability: number;
  explanation: Explanation | null;
}

export interface Prediction {
  codes: PredictedCode[];
  truncated: boolean;
}

export interface DocumentSummary {
  id: string;
  split: string;
  n_tokens: number;
  codes: string[];
}

export interface DocumentPage {
  documents: DocumentSummary[];
  page: number;
  page_size: number;
  total: number;
}

export interface DocumentDetail {
  id: string;
  text: string;
  codes: string[];
  split: string;
}

export interface DecisionRecord {
  document_id: string;
  code: string;
  verdict: string;
  reviewer: string;
  probability: number | null;
  threshold: number | null;
  timestamp: string;
  timestamp_ns: number;
}

export interface DecisionInput {
  document_id: string;
  code: string;
  verdict: string;
  reviewer: string;
  probability?: number;
  threshold?: number;
}

export interface Health {
  status: string;
  checkpoint_version: number;
  m: number;
  encoder_kind: string;
}

export class ApiError extends Error {
  status: number;

  constructor(status: number, message: string) {
    super(message);
    this.status = status;
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

async function parseError(resp: Response): Promise<never> {
  let detail = resp.statusText;
  try {
    const body = (await resp.json()) as { detail?: unknown };
    if (typeof body.detail === "string") detail = body.detail;
    else if (body.detail !== undefined) detail = JSON.stringify(body.detail);
  } catch {
    // non-JSON error body, keep the status text
  }
  throw new ApiError(resp.status, detail);
}

export class ApiClient {
  readonly base: string;
  private readonly fetchFn: FetchLike;

  constructor(base: string, fetchFn?: FetchLike) {
    this.base = base.replace(/\/+$/, "");
    // bind lazily so the browser's fetch keeps its required receiver
    this.fetchFn = fetchFn ?? ((input, init) => globalThis.fetch(input, init));
  }

  private async getJson<T>(path: string): Promise<T> {
    const resp = await this.fetchFn(this.base + path);
    if (!resp.ok) await parseError(resp);
    return (await resp.json()) as T;
  }

  private async postJson<T>(path: string, payload: unknown): Promise<T> {
    const resp = await this.fetchFn(this.base + path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    });
    if (!resp.ok) await parseError(resp);
    return (await resp.json()) as T;
  }

  health(): Promise<Health> {
    return this.getJson<Health>("/health");
  }

  predictDocument(documentId: string, threshold?: number, topK?: number): Promise<Prediction> {
    const payload: Record<string, unknown> = { document_id: documentId };
    if (threshold !== undefined) payload.threshold = threshold;
    if (topK !== undefined) payload.top_k = topK;
    return this.postJson<Prediction>("/predict", payload);
  }

  predictText(text: string, threshold?: number, topK?: number): Promise<Prediction> {
    const payload: Record<string, unknown> = { text };
    if (threshold !== undefined) payload.threshold = threshold;
    if (topK !== undefined) payload.top_k = topK;
    return this.postJson<Prediction>("/predict", payload);
  }

  listDocuments(split?: string, page = 0): Promise<DocumentPage> {
    const params = new URLSearchParams();
    if (split) params.set("split", split);
    params.set("page", String(page));
    return this.getJson<DocumentPage>(`/documents?${params.toString()}`);
  }

  getDocument(id: string): Promise<DocumentDetail> {
    return this.getJson<DocumentDetail>(`/documents/${encodeURIComponent(id)}`);
  }

  postDecision(decision: DecisionInput): Promise<DecisionRecord> {
    return this.postJson<DecisionRecord>("/decisions", decision);
  }

  async listDecisions(documentId: string): Promise<DecisionRecord[]> {
    const params = new URLSearchParams({ document_id: documentId });
    const body = await this.getJson<{ decisions: DecisionRecord[] }>(
      `/decisions?${params.toString()}`,
    );
    return body.decisions;
  }
}
