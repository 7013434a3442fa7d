// Run sequencing and table sorting. One request may be in flight at a time;
// a settled response is accepted only if no newer run has started since, so
// a stale response can never overwrite a newer result.

import type { ExecuteResponse, JsonValue } from "./api.js";

export interface SettledRun {
  sequence: number;
  response: ExecuteResponse;
}

export class RunSequencer {
  private nextSequence = 1;
  private inFlightSeq: number | null = null;
  latest: SettledRun | null = null;

  get inFlight(): boolean {
    return this.inFlightSeq !== null;
  }

  begin(): number {
    const seq = this.nextSequence++;
    this.inFlightSeq = seq;
    return seq;
  }

  /** Returns true when the response became the latest visible result. */
  settle(sequence: number, response: ExecuteResponse): boolean {
    if (this.inFlightSeq === sequence) {
      this.inFlightSeq = null;
    }
    if (this.latest !== null && this.latest.sequence > sequence) {
      return false; // superseded by a newer run
    }
    this.latest = { sequence, response };
    return true;
  }

  /** A failed request clears the in-flight marker without a result. */
  abort(sequence: number): void {
    if (this.inFlightSeq === sequence) {
      this.inFlightSeq = null;
    }
  }
}

export type SortDirection = "asc" | "desc";

export interface SortSpec {
  column: number;
  direction: SortDirection;
}

export function nextSort(current: SortSpec | null, column: number): SortSpec {
  if (current && current.column === column && current.direction === "asc") {
    return { column, direction: "desc" };
  }
  return { column, direction: "asc" };
}

export function sortRows(
  rows: JsonValue[][],
  sort: SortSpec | null,
): JsonValue[][] {
  if (sort === null) return rows;
  const { column, direction } = sort;
  const sign = direction === "asc" ? 1 : -1;
  return [...rows].sort((a, b) => {
    const x = a[column];
    const y = b[column];
    if (typeof x === "number" && typeof y === "number") {
      return sign * (x - y || 0);
    }
    return sign * String(x).localeCompare(String(y));
  });
}
