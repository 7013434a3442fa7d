// Typed client for the execution service. The UI never evaluates anything
// itself: every result on screen came over these endpoints.

export type JsonValue = number | string;

export interface ColumnSpec {
  name: string;
  type: "integer" | "double" | "string";
}

export interface RelationPayload {
  name: string;
  schema: ColumnSpec[];
  rows: JsonValue[][];
}

export interface ExecuteRequest {
  program: string;
  relations: RelationPayload[];
  limits?: { max_iterations?: number; max_rows?: number; timeout_ms?: number };
}

export interface ExecuteStats {
  iterations: number;
  rows_produced: number;
  elapsed_ms: number;
}

export interface ExecuteError {
  kind: string;
  message: string;
  line?: number | null;
  column?: number | null;
}

export interface ExecuteResponse {
  status: "ok" | "error";
  columns?: string[] | null;
  rows?: JsonValue[][] | null;
  stats?: ExecuteStats | null;
  error?: ExecuteError | null;
}

export interface ExampleInfo {
  id: string;
  title: string;
  program: string;
  relations: RelationPayload[];
}

export interface FunctionParam {
  name: string;
  type: string;
  default: JsonValue | null;
  required: boolean;
  doc: string;
}

export interface FunctionInfo {
  name: string;
  doc: string;
  slots: { name: string; attrs: ColumnSpec[] }[];
  params: FunctionParam[];
  template: string;
}

export class ApiError extends Error {
  constructor(message: string, readonly retryable: boolean) {
    super(message);
  }
}

const fetcher: typeof fetch = (...args) => fetch(...args);

export async function executeProgram(
  request: ExecuteRequest,
  doFetch: typeof fetch = fetcher,
): Promise<ExecuteResponse> {
  let response: Response;
  try {
    response = await doFetch("/v1/execute", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(request),
    });
  } catch (err) {
    throw new ApiError(`network failure: ${String(err)}`, true);
  }
  let body: unknown;
  try {
    body = await response.json();
  } catch {
    throw new ApiError(`bad response (${response.status})`, true);
  }
  return body as ExecuteResponse;
}

export async function fetchExamples(
  doFetch: typeof fetch = fetcher,
): Promise<ExampleInfo[]> {
  const response = await doFetch("/v1/examples");
  if (!response.ok) throw new ApiError(`examples: ${response.status}`, true);
  return (await response.json()) as ExampleInfo[];
}

export async function fetchFunctions(
  doFetch: typeof fetch = fetcher,
): Promise<FunctionInfo[]> {
  const response = await doFetch("/v1/functions");
  if (!response.ok) throw new ApiError(`functions: ${response.status}`, true);
  return (await response.json()) as FunctionInfo[];
}
