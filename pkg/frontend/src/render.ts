// HTML renderers. Pure string builders so they are testable without a DOM;
// main.ts assigns the output to innerHTML.

import type {
  ExecuteError,
  ExecuteResponse,
  ExecuteStats,
  FunctionInfo,
  JsonValue,
} from "./api.js";
import { sortRows, type SortSpec } from "./state.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function formatCell(value: JsonValue): string {
  return escapeHtml(String(value));
}

export function renderResultTable(
  columns: string[],
  rows: JsonValue[][],
  sort: SortSpec | null = null,
): string {
  const header = columns
    .map((c, i) => {
      const mark =
        sort && sort.column === i ? (sort.direction === "asc" ? " ▲" : " ▼") : "";
      return `<th data-col="${i}">${escapeHtml(c)}${mark}</th>`;
    })
    .join("");
  const body = sortRows(rows, sort)
    .map(
      (row) => `<tr>${row.map((v) => `<td>${formatCell(v)}</td>`).join("")}</tr>`,
    )
    .join("");
  return (
    `<table class="result-table" data-testid="result-table">` +
    `<thead><tr>${header}</tr></thead><tbody>${body}</tbody></table>`
  );
}

export function renderStats(stats: ExecuteStats): string {
  const ms = stats.elapsed_ms.toFixed(1);
  return (
    `<div class="stats-line" data-testid="stats-line">` +
    `${stats.rows_produced} rows · ${stats.iterations} iterations · ${ms} ms</div>`
  );
}

/** Error banner; when the error carries a line, that source line is shown
 * highlighted with a caret under the offending column. */
export function renderErrorBanner(
  error: ExecuteError,
  program: string,
  retryable = false,
): string {
  const parts = [
    `<div class="error-banner${retryable ? " retryable" : ""}" data-testid="error-banner">`,
    `<strong>${escapeHtml(error.kind)}</strong>: ${escapeHtml(error.message)}`,
  ];
  if (error.line != null) {
    const lines = program.split("\n");
    const lineText = lines[error.line - 1] ?? "";
    parts.push(
      `<pre class="error-context" data-line="${error.line}">` +
        `<span class="error-line-no">${error.line} | </span>` +
        `<span class="error-line">${escapeHtml(lineText)}</span>`,
    );
    if (error.column != null && error.column >= 1) {
      const pad = " ".repeat(String(error.line).length + 3 + error.column - 1);
      parts.push(`\n${pad}<span class="error-caret">^</span>`);
    }
    parts.push(`</pre>`);
  }
  if (retryable) {
    parts.push(`<button data-testid="retry-btn" class="retry">Retry</button>`);
  }
  parts.push(`</div>`);
  return parts.join("");
}

export function renderResponse(
  response: ExecuteResponse,
  program: string,
  sort: SortSpec | null = null,
): string {
  if (response.status === "ok" && response.columns && response.rows) {
    return (
      renderStats(response.stats!) +
      renderResultTable(response.columns, response.rows, sort)
    );
  }
  const error = response.error ?? {
    kind: "Error",
    message: "malformed response",
  };
  return renderErrorBanner(error, program);
}

/** Non-executable API-usage snippet for one catalog function. */
export function usageSnippet(fn: FunctionInfo): string {
  const varName = fn.name.toLowerCase();
  const lines = [`${varName} = session.new_function("${fn.name}")`];
  fn.slots.forEach((slot, i) => {
    const call = i === 0 ? "set_direction" : "set_sec_direction";
    const args = slot.attrs
      .map((a) => `${a.name}Col="${a.name}"`)
      .join(", ");
    lines.push(`${varName}.${call}(${args})`);
  });
  for (const p of fn.params) {
    const value = p.required
      ? (p.type === "string" ? '"..."' : "...")
      : JSON.stringify(p.default);
    lines.push(`${varName}.set_param("${p.name}", ${value})`);
  }
  const inputs = fn.slots.map((s) => s.name).join(", ");
  lines.push(`result = ${varName}.materialize([${inputs}], session)`);
  return lines.join("\n");
}

export function renderFunctionList(functions: FunctionInfo[]): string {
  const items = functions
    .map((fn) => {
      const slots = fn.slots
        .map(
          (slot) =>
            `${slot.name}(${slot.attrs.map((a) => `${a.name}: ${a.type}`).join(", ")})`,
        )
        .join("; ");
      const params = fn.params
        .map((p) => {
          const dflt = p.required ? "required" : `default ${p.default}`;
          return `<li><code>${escapeHtml(p.name)}</code> (${p.type}, ${dflt})` +
            `${p.doc ? ": " + escapeHtml(p.doc) : ""}</li>`;
        })
        .join("");
      return (
        `<details class="fn-entry" data-testid="fn-${fn.name}">` +
        `<summary><code>${escapeHtml(fn.name)}</code> — ${escapeHtml(fn.doc)}</summary>` +
        `<p class="fn-slots">${escapeHtml(slots)}</p>` +
        (params ? `<ul class="fn-params">${params}</ul>` : "") +
        `<pre class="fn-usage" data-testid="usage-${fn.name}">` +
        `${escapeHtml(usageSnippet(fn))}</pre>` +
        `<button class="fn-insert" data-fn="${escapeHtml(fn.name)}" ` +
        `data-testid="insert-${fn.name}">Insert template</button>` +
        `</details>`
      );
    })
    .join("");
  return `<div class="fn-list">${items}</div>`;
}

export function renderExampleOptions(
  examples: { id: string; title: string }[],
): string {
  const options = examples
    .map(
      (e) => `<option value="${escapeHtml(e.id)}">${escapeHtml(e.title)}</option>`,
    )
    .join("");
  return `<option value="">— pick an example —</option>${options}`;
}
