// REST client. The API key is entered once and held in session storage;
// concurrent GETs to the same route share one in-flight request.

const BASE = "/v1";
const KEY_STORAGE = "meshmart_api_key";

const inflight = new Map<string, Promise<unknown>>();

export class ApiError extends Error {
  status: number;
  body: string;

  constructor(status: number, body: string) {
    super(`HTTP ${status}: ${body}`);
    this.status = status;
    this.body = body;
  }
}

export function getApiKey(): string {
  return window.sessionStorage.getItem(KEY_STORAGE) ?? "";
}

export function setApiKey(key: string): void {
  window.sessionStorage.setItem(KEY_STORAGE, key);
}

function headers(): Record<string, string> {
  const out: Record<string, string> = { "content-type": "application/json" };
  const key = getApiKey();
  if (key) out["X-Api-Key"] = key;
  return out;
}

async function parse<T>(response: Response): Promise<T> {
  const text = await response.text();
  if (!response.ok) throw new ApiError(response.status, text);
  return JSON.parse(text) as T;
}

export async function getJson<T>(path: string, params?: Record<string, string | number>): Promise<T> {
  let url = BASE + path;
  if (params && Object.keys(params).length) {
    const search = new URLSearchParams();
    for (const [k, v] of Object.entries(params)) search.set(k, String(v));
    url += "?" + search.toString();
  }
  const existing = inflight.get(url);
  if (existing) return existing as Promise<T>;
  const request = fetch(url, { headers: headers() })
    .then((r) => parse<T>(r))
    .finally(() => inflight.delete(url));
  inflight.set(url, request);
  return request;
}

export async function postJson<T>(path: string, body?: unknown): Promise<T> {
  const response = await fetch(BASE + path, {
    method: "POST",
    headers: headers(),
    body: body === undefined ? undefined : JSON.stringify(body),
  });
  return parse<T>(response);
}
