// Parsing for the relation editor: a schema line like
// "From:integer, To:integer" and CSV-ish rows, one per line.

import type { ColumnSpec, JsonValue, RelationPayload } from "./api.js";

export class EditError extends Error {}

const TYPES = new Set(["integer", "double", "string"]);

export function parseSchema(text: string): ColumnSpec[] {
  const columns: ColumnSpec[] = [];
  for (const part of text.split(",")) {
    const piece = part.trim();
    if (!piece) continue;
    const [name, type] = piece.split(":").map((s) => s.trim());
    if (!name || !type || !TYPES.has(type)) {
      throw new EditError(
        `bad column "${piece}" (want Name:integer|double|string)`,
      );
    }
    columns.push({ name, type: type as ColumnSpec["type"] });
  }
  if (columns.length === 0) throw new EditError("schema needs at least one column");
  return columns;
}

function splitCsvLine(line: string): string[] {
  const fields: string[] = [];
  let field = "";
  let quoted = false;
  for (let i = 0; i < line.length; i++) {
    const ch = line[i];
    if (quoted) {
      if (ch === '"' && line[i + 1] === '"') {
        field += '"';
        i++;
      } else if (ch === '"') {
        quoted = false;
      } else {
        field += ch;
      }
    } else if (ch === '"' && field === "") {
      quoted = true;
    } else if (ch === ",") {
      fields.push(field);
      field = "";
    } else {
      field += ch;
    }
  }
  fields.push(field);
  return fields;
}

export function parseRows(text: string, schema: ColumnSpec[]): JsonValue[][] {
  const rows: JsonValue[][] = [];
  for (const [lineNo, rawLine] of text.split("\n").entries()) {
    const line = rawLine.trimEnd();
    if (!line.trim()) continue;
    const fields = splitCsvLine(line);
    if (fields.length !== schema.length) {
      throw new EditError(
        `row ${lineNo + 1}: ${fields.length} fields for ${schema.length} columns`,
      );
    }
    rows.push(
      fields.map((field, i) => {
        const col = schema[i];
        if (col.type === "string") return field;
        const value = Number(field.trim());
        if (field.trim() === "" || Number.isNaN(value)) {
          throw new EditError(
            `row ${lineNo + 1}: "${field}" is not a ${col.type}`,
          );
        }
        if (col.type === "integer" && !Number.isInteger(value)) {
          throw new EditError(`row ${lineNo + 1}: "${field}" is not an integer`);
        }
        return value;
      }),
    );
  }
  return rows;
}

export function parseRelation(
  name: string,
  schemaText: string,
  rowsText: string,
): RelationPayload {
  if (!name.trim()) throw new EditError("relation needs a name");
  const schema = parseSchema(schemaText);
  return { name: name.trim(), schema, rows: parseRows(rowsText, schema) };
}

export function rowsToText(rows: JsonValue[][]): string {
  return rows
    .map((row) =>
      row
        .map((v) =>
          typeof v === "string" && /[",\n]/.test(v)
            ? `"${v.replace(/"/g, '""')}"`
            : String(v),
        )
        .join(","),
    )
    .join("\n");
}

export function schemaToText(schema: ColumnSpec[]): string {
  return schema.map((c) => `${c.name}:${c.type}`).join(", ");
}
