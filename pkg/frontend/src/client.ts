import type {
  DashboardSummary,
  HealthResponse,
  LoginResponse,
  MaterialResponse,
  ParentSummary,
  PathResponse,
  PermissionsResponse,
  SessionEventResponse,
  SupportResponse,
  WizardEvent,
} from './types.js';

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly body: Record<string, unknown>,
  ) {
    super(`${status}: ${JSON.stringify(body)}`);
    this.name = 'ApiError';
  }

  get errorKind(): string {
    return typeof this.body.error === 'string' ? this.body.error : '';
  }
}

export interface SupportBody {
  learner_id: string;
  submit: boolean;
  support_id?: string;
  events?: WizardEvent[];
  learning_objective?: string;
  short_description?: string;
  subject_area?: string;
  goal_type?: string;
  education_level?: string;
  content_language?: string;
  start_date?: string;
  end_date?: string;
  keywords?: string[];
  estimated_duration_minutes?: number;
}

/** Thin fetch wrapper over the service API. Holds the bearer token. */
export class ApiClient {
  token: string | null = null;

  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: typeof fetch = fetch,
  ) {}

  async login(username: string, password: string): Promise<LoginResponse> {
    const out = await this.request<LoginResponse>('POST', '/api/auth/login', {
      username,
      password,
    });
    this.token = out.token;
    return out;
  }

  permissions(): Promise<PermissionsResponse> {
    return this.request('GET', '/api/permissions');
  }

  postSupport(body: SupportBody): Promise<SupportResponse> {
    return this.request('POST', '/api/supports', body);
  }

  async uploadMaterial(
    supportId: string,
    filename: string,
    text: string,
  ): Promise<MaterialResponse> {
    const form = new FormData();
    form.append('file', new Blob([text], { type: 'text/plain' }), filename);
    const res = await this.fetchImpl(`${this.baseUrl}/api/supports/${supportId}/materials`, {
      method: 'POST',
      headers: this.authHeaders(),
      body: form,
    });
    return this.unwrap(res);
  }

  postEvent(
    sessionId: string,
    kind: string,
    text?: string,
  ): Promise<SessionEventResponse> {
    const event: Record<string, unknown> = { kind };
    if (text !== undefined) event.text = text;
    return this.request('POST', `/api/sessions/${sessionId}/events`, { event });
  }

  path(learnerId: string): Promise<PathResponse> {
    return this.request('GET', `/api/learners/${learnerId}/path`);
  }

  dashboard(learnerId: string): Promise<DashboardSummary | ParentSummary> {
    return this.request('GET', `/api/learners/${learnerId}/dashboard`);
  }

  health(): Promise<HealthResponse> {
    return this.request('GET', '/api/health');
  }

  private authHeaders(): Record<string, string> {
    return this.token ? { Authorization: `Bearer ${this.token}` } : {};
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = this.authHeaders();
    const init: RequestInit = { method, headers };
    if (body !== undefined) {
      headers['Content-Type'] = 'application/json';
      init.body = JSON.stringify(body);
    }
    const res = await this.fetchImpl(this.baseUrl + path, init);
    return this.unwrap(res);
  }

  private async unwrap<T>(res: Response): Promise<T> {
    let parsed: unknown = null;
    try {
      parsed = await res.json();
    } catch {
      parsed = {};
    }
    if (!res.ok) {
      throw new ApiError(res.status, (parsed ?? {}) as Record<string, unknown>);
    }
    return parsed as T;
  }
}
