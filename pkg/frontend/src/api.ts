// Thin typed client for the covarnet HTTP service.  All analysis state lives
// server-side; this module only shuttles documents and maps error envelopes
// onto exceptions the UI can branch on.

import type {
  DatasetInfo,
  EchoesResponse,
  EditResponse,
  EdgeAction,
  FilterParams,
  GraphResponse,
  ModelResponse,
  RealignReport,
  SceneDoc,
  ScoreResponse,
} from './types.js';

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
    this.name = 'ApiError';
  }
}

/** 409: the view issued a mutation against an out-of-date revision. */
export class StaleRevisionError extends ApiError {
  constructor(status: number, code: string, message: string) {
    super(status, code, message);
    this.name = 'StaleRevisionError';
  }
}

function filterQuery(f: FilterParams): string {
  const q = new URLSearchParams();
  if (f.min_z !== undefined) q.set('min_z', String(f.min_z));
  if (f.max_p !== undefined) q.set('max_p', String(f.max_p));
  if (f.min_raw !== undefined) q.set('min_raw', String(f.min_raw));
  if (f.sign !== undefined) q.set('sign', f.sign);
  const s = q.toString();
  return s ? `?${s}` : '';
}

async function raise(resp: Response): Promise<never> {
  let code = 'unknown';
  let message = `HTTP ${resp.status}`;
  try {
    const body = (await resp.json()) as { error?: { code: string; message: string } };
    if (body.error) {
      code = body.error.code;
      message = body.error.message;
    }
  } catch {
    // non-JSON error body; keep the status line
  }
  if (resp.status === 409) throw new StaleRevisionError(resp.status, code, message);
  throw new ApiError(resp.status, code, message);
}

export interface RealignOptions {
  s_max?: number;
  max_rounds?: number;
  manual_shifts?: Record<string, number>;
  revision?: number;
}

export class CovarClient {
  constructor(
    private base: string,
    private fetchImpl: typeof fetch = fetch,
  ) {
    this.base = base.replace(/\/+$/, '');
  }

  private async getJson<T>(path: string): Promise<T> {
    const resp = await this.fetchImpl(this.base + path);
    if (!resp.ok) await raise(resp);
    return (await resp.json()) as T;
  }

  private async postJson<T>(path: string, body: unknown): Promise<T> {
    const resp = await this.fetchImpl(this.base + path, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(body),
    });
    if (!resp.ok) await raise(resp);
    return (await resp.json()) as T;
  }

  uploadRows(rows: string[]): Promise<DatasetInfo> {
    return this.postJson('/datasets', { rows });
  }

  uploadText(text: string): Promise<DatasetInfo> {
    return this.postJson('/datasets', { text });
  }

  uploadDemo(name: 'hairpin' | 'shifted' = 'hairpin'): Promise<DatasetInfo> {
    return this.postJson('/datasets', { demo: name });
  }

  graph(id: string, f: FilterParams = {}): Promise<GraphResponse> {
    return this.getJson(`/datasets/${id}/graph${filterQuery(f)}`);
  }

  scene(id: string, f: FilterParams = {}): Promise<SceneDoc> {
    return this.getJson(`/datasets/${id}/scene${filterQuery(f)}`);
  }

  echoes(id: string, f: FilterParams = {}, sMax?: number): Promise<EchoesResponse> {
    let q = filterQuery(f);
    if (sMax !== undefined) q += (q ? '&' : '?') + `s_max=${sMax}`;
    return this.getJson(`/datasets/${id}/echoes${q}`);
  }

  editEdge(id: string, key: string, action: EdgeAction, revision?: number): Promise<EditResponse> {
    const body = revision === undefined ? {} : { revision };
    return this.postJson(`/datasets/${id}/edges/${encodeURIComponent(key)}:${action}`, body);
  }

  buildModel(id: string, opts: { selection?: 'visible' | 'pinned' | string[]; kappa?: number; revision?: number } = {}): Promise<ModelResponse> {
    return this.postJson(`/datasets/${id}/model`, opts);
  }

  score(modelId: string, sequences: string[], ids?: string[], reference?: string): Promise<ScoreResponse> {
    const body: Record<string, unknown> = { sequences };
    if (ids) body.ids = ids;
    if (reference !== undefined) body.reference = reference;
    return this.postJson(`/models/${modelId}/score`, body);
  }

  realign(id: string, opts: RealignOptions = {}): Promise<RealignReport> {
    return this.postJson(`/datasets/${id}/realign`, opts);
  }

  /** Raw export bytes (edges.csv / graph.json / model.json). */
  async exportArtifact(id: string, artifact: string): Promise<string> {
    const resp = await this.fetchImpl(`${this.base}/datasets/${id}/export/${artifact}`);
    if (!resp.ok) await raise(resp);
    return resp.text();
  }
}
