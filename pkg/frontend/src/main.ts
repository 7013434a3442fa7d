// Playground wiring: program editor on top, relation editors beside it,
// results below. All evaluation happens server-side via /v1/execute.

import {
  ApiError,
  executeProgram,
  fetchExamples,
  fetchFunctions,
  type ExampleInfo,
  type RelationPayload,
} from "./api.js";
import { EditError, parseRelation, rowsToText, schemaToText } from "./csv.js";
import {
  renderErrorBanner,
  renderExampleOptions,
  renderFunctionList,
  renderResponse,
} from "./render.js";
import { nextSort, RunSequencer, type SortSpec } from "./state.js";

const sequencer = new RunSequencer();
let sort: SortSpec | null = null;
let dirty = false;
let examples: ExampleInfo[] = [];

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

const programBox = () => el<HTMLTextAreaElement>("program");
const relationsBox = () => el<HTMLDivElement>("relations");
const resultBox = () => el<HTMLDivElement>("result");
const runButton = () => el<HTMLButtonElement>("run");

function relationBlock(rel?: RelationPayload): HTMLDivElement {
  const block = document.createElement("div");
  block.className = "relation-block";
  block.innerHTML = `
    <div class="relation-head">
      <input class="rel-name" placeholder="relation name" value="${rel?.name ?? ""}">
      <input class="rel-schema" placeholder="From:integer, To:integer"
             value="${rel ? schemaToText(rel.schema) : ""}">
      <button class="rel-remove" title="remove relation">×</button>
    </div>
    <textarea class="rel-rows" rows="4"
      placeholder="one CSV row per line">${rel ? rowsToText(rel.rows) : ""}</textarea>`;
  const remove = block.querySelector<HTMLButtonElement>(".rel-remove")!;
  remove.onclick = () => {
    block.remove();
    markDirty();
  };
  block.addEventListener("input", markDirty);
  return block;
}

function collectRelations(): RelationPayload[] {
  const payloads: RelationPayload[] = [];
  for (const block of relationsBox().querySelectorAll(".relation-block")) {
    const name = block.querySelector<HTMLInputElement>(".rel-name")!.value;
    const schema = block.querySelector<HTMLInputElement>(".rel-schema")!.value;
    const rows = block.querySelector<HTMLTextAreaElement>(".rel-rows")!.value;
    if (!name.trim() && !schema.trim() && !rows.trim()) continue;
    payloads.push(parseRelation(name, schema, rows));
  }
  return payloads;
}

function markDirty(): void {
  dirty = true;
}

function setRelations(rels: RelationPayload[]): void {
  const box = relationsBox();
  box.innerHTML = "";
  for (const rel of rels) box.appendChild(relationBlock(rel));
}

function showLatest(): void {
  const latest = sequencer.latest;
  if (latest) {
    resultBox().innerHTML = renderResponse(
      latest.response,
      programBox().value,
      sort,
    );
    wireTableSorting();
  }
}

function wireTableSorting(): void {
  for (const th of resultBox().querySelectorAll<HTMLTableCellElement>("th")) {
    th.onclick = () => {
      sort = nextSort(sort, Number(th.dataset.col));
      showLatest();
    };
  }
}

async function runCurrent(): Promise<void> {
  if (sequencer.inFlight) return;
  const program = programBox().value;
  if (!program.trim()) return;
  let relations: RelationPayload[];
  try {
    relations = collectRelations();
  } catch (err) {
    if (err instanceof EditError) {
      resultBox().innerHTML = renderErrorBanner(
        { kind: "RelationEdit", message: err.message },
        program,
      );
      return;
    }
    throw err;
  }
  const seq = sequencer.begin();
  runButton().disabled = true;
  resultBox().setAttribute("aria-busy", "true");
  try {
    const response = await executeProgram({ program, relations });
    sort = null;
    if (sequencer.settle(seq, response)) showLatest();
  } catch (err) {
    sequencer.abort(seq);
    const message = err instanceof ApiError ? err.message : String(err);
    resultBox().innerHTML = renderErrorBanner(
      { kind: "Network", message },
      program,
      true,
    );
    const retry = resultBox().querySelector<HTMLButtonElement>(".retry");
    if (retry) retry.onclick = () => void runCurrent();
  } finally {
    runButton().disabled = false;
    resultBox().removeAttribute("aria-busy");
  }
}

function loadExample(id: string): void {
  const example = examples.find((e) => e.id === id);
  if (!example) return;
  if (dirty && !confirm("Replace the current program and relations?")) {
    el<HTMLSelectElement>("examples").value = "";
    return;
  }
  programBox().value = example.program;
  setRelations(example.relations);
  dirty = false;
}

function insertAtCursor(textarea: HTMLTextAreaElement, text: string): void {
  const { selectionStart, selectionEnd, value } = textarea;
  textarea.value =
    value.slice(0, selectionStart) + text + value.slice(selectionEnd);
  textarea.selectionStart = textarea.selectionEnd = selectionStart + text.length;
  markDirty();
}

async function boot(): Promise<void> {
  runButton().onclick = () => void runCurrent();
  el<HTMLButtonElement>("add-relation").onclick = () => {
    relationsBox().appendChild(relationBlock());
  };
  programBox().addEventListener("input", markDirty);

  try {
    examples = await fetchExamples();
    el<HTMLSelectElement>("examples").innerHTML = renderExampleOptions(examples);
  } catch {
    el<HTMLSelectElement>("examples").innerHTML =
      `<option value="">examples unavailable</option>`;
  }
  el<HTMLSelectElement>("examples").onchange = (event) => {
    loadExample((event.target as HTMLSelectElement).value);
  };

  try {
    const functions = await fetchFunctions();
    el<HTMLDivElement>("functions").innerHTML = renderFunctionList(functions);
    for (const btn of el<HTMLDivElement>("functions")
      .querySelectorAll<HTMLButtonElement>(".fn-insert")) {
      btn.onclick = () => {
        const fn = functions.find((f) => f.name === btn.dataset.fn);
        if (fn) insertAtCursor(programBox(), fn.template);
      };
    }
  } catch {
    el<HTMLDivElement>("functions").innerHTML =
      `<p class="muted">function reference unavailable</p>`;
  }
}

document.addEventListener("DOMContentLoaded", () => void boot());
