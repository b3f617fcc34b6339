// Single-page review app. All numbers on screen come from the HTTP API;
// the only client-side logic is threshold what-if over cached predictions
// and highlight run construction from served spans.

import { ApiClient, ApiError } from "./api.js";
import type { DocumentSummary, PredictedCode } from "./api.js";
import { buildHighlightView } from "./highlight.js";
import { ReviewState } from "./state.js";

const SERVER_FLOOR = 1e-6; // fetch everything once, filter client-side
const EVIDENCE_TOP_K = 10;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const apiBase =
  new URLSearchParams(window.location.search).get("api") ?? "http://127.0.0.1:8000";
const client = new ApiClient(apiBase);
const state = new ReviewState();

let page = 0;
let split = "";
let activeCode: string | null = null;

const healthLine = el<HTMLElement>("health");
const errorLine = el<HTMLElement>("error");
const docList = el<HTMLUListElement>("doc-list");
const pageLabel = el<HTMLElement>("page-label");
const docTitle = el<HTMLElement>("doc-title");
const docMeta = el<HTMLElement>("doc-meta");
const textPanel = el<HTMLElement>("text-panel");
const codeList = el<HTMLUListElement>("code-list");
const visibleCount = el<HTMLElement>("visible-count");
const slider = el<HTMLInputElement>("threshold");
const sliderValue = el<HTMLElement>("threshold-value");
const reviewerInput = el<HTMLInputElement>("reviewer");
const submitButton = el<HTMLButtonElement>("submit");
const submitStatus = el<HTMLElement>("submit-status");
const decisionsList = el<HTMLUListElement>("decisions");

function showError(message: string | null): void {
  errorLine.textContent = message ?? "";
  errorLine.hidden = !message;
}

function describe(err: unknown): string {
  if (err instanceof ApiError) return `${err.status}: ${err.message}`;
  return err instanceof Error ? err.message : String(err);
}

function renderText(): void {
  textPanel.replaceChildren();
  if (!state.document) return;
  const predicted = activeCode
    ? state.prediction?.codes.find((c) => c.code === activeCode)
    : undefined;
  const view = buildHighlightView(state.document.text, predicted?.explanation ?? null, activeCode);
  if (view.error) showError(`highlight disabled: ${view.error}`);
  for (const run of view.runs) {
    if (run.intensity > 0) {
      const mark = document.createElement("mark");
      mark.textContent = run.text;
      mark.style.backgroundColor = `rgba(255, 170, 0, ${(0.15 + 0.85 * run.intensity).toFixed(3)})`;
      mark.title = `intensity ${run.intensity.toFixed(3)}`;
      textPanel.appendChild(mark);
    } else {
      textPanel.appendChild(document.createTextNode(run.text));
    }
  }
}

function renderCodes(): void {
  codeList.replaceChildren();
  const visible = state.visibleCodes();
  visibleCount.textContent = `${visible.length} code(s) at or above ${state.threshold.toFixed(3)}`;
  if (activeCode && !visible.some((c) => c.code === activeCode)) {
    activeCode = null;
    renderText();
  }
  for (const code of visible) {
    codeList.appendChild(codeRow(code));
  }
}

function codeRow(code: PredictedCode): HTMLLIElement {
  const li = document.createElement("li");
  li.className = "code-row" + (code.code === activeCode ? " active" : "");

  const label = document.createElement("button");
  label.type = "button";
  label.className = "code-chip";
  label.textContent = `${code.code}  p=${code.probability.toFixed(3)}`;
  label.addEventListener("click", () => {
    activeCode = code.code === activeCode ? null : code.code;
    showError(null);
    renderText();
    renderCodes();
  });
  li.appendChild(label);

  const verdict = state.verdictFor(code.code);
  for (const choice of ["accepted", "rejected"] as const) {
    const btn = document.createElement("button");
    btn.type = "button";
    btn.className = "verdict" + (verdict === choice ? " chosen" : "");
    btn.textContent = choice === "accepted" ? "accept" : "reject";
    btn.addEventListener("click", () => {
      state.mark(code.code, choice);
      renderCodes();
      updateSubmitStatus();
    });
    li.appendChild(btn);
  }
  return li;
}

function updateSubmitStatus(extra = ""): void {
  const pending = state.pendingMarks().length;
  submitButton.disabled = pending === 0;
  submitButton.textContent = pending > 0 ? `Submit ${pending} decision(s)` : "Submit";
  submitStatus.textContent = extra;
}

async function renderDecisions(): Promise<void> {
  decisionsList.replaceChildren();
  if (!state.document) return;
  const decisions = await client.listDecisions(state.document.id);
  for (const d of decisions) {
    const li = document.createElement("li");
    li.textContent = `${d.code} ${d.verdict} by ${d.reviewer} at ${d.timestamp}`;
    decisionsList.appendChild(li);
  }
}

async function selectDocument(id: string): Promise<void> {
  showError(null);
  try {
    const [detail, prediction] = await Promise.all([
      client.getDocument(id),
      client.predictDocument(id, SERVER_FLOOR, EVIDENCE_TOP_K),
    ]);
    state.loadDocument(detail, prediction);
    activeCode = null;
    docTitle.textContent = detail.id;
    docMeta.textContent =
      `split ${detail.split} | true codes: ${detail.codes.join(", ") || "none"}` +
      (prediction.truncated ? " | input truncated for the encoder" : "");
    renderText();
    renderCodes();
    updateSubmitStatus();
    await renderDecisions();
  } catch (err) {
    showError(describe(err));
  }
}

async function loadPage(): Promise<void> {
  showError(null);
  try {
    const result = await client.listDocuments(split || undefined, page);
    docList.replaceChildren();
    for (const doc of result.documents) {
      docList.appendChild(docRow(doc));
    }
    const pages = Math.max(1, Math.ceil(result.total / result.page_size));
    pageLabel.textContent = `page ${result.page + 1} / ${pages} (${result.total} docs)`;
  } catch (err) {
    showError(describe(err));
  }
}

function docRow(doc: DocumentSummary): HTMLLIElement {
  const li = document.createElement("li");
  const btn = document.createElement("button");
  btn.type = "button";
  btn.textContent = `${doc.id} [${doc.split}] ${doc.n_tokens} tokens`;
  btn.addEventListener("click", () => void selectDocument(doc.id));
  li.appendChild(btn);
  return li;
}

slider.addEventListener("input", () => {
  state.setThreshold(Number(slider.value));
  sliderValue.textContent = state.threshold.toFixed(3);
  renderCodes(); // no network: probabilities are cached
});

el<HTMLSelectElement>("split-select").addEventListener("change", (ev) => {
  split = (ev.target as HTMLSelectElement).value;
  page = 0;
  void loadPage();
});

el<HTMLButtonElement>("prev").addEventListener("click", () => {
  if (page > 0) {
    page -= 1;
    void loadPage();
  }
});

el<HTMLButtonElement>("next").addEventListener("click", () => {
  page += 1;
  void loadPage();
});

submitButton.addEventListener("click", () => {
  void (async () => {
    const reviewer = reviewerInput.value.trim();
    if (!reviewer) {
      showError("enter a reviewer id before submitting");
      return;
    }
    showError(null);
    const report = await state.submit((mark) =>
      client.postDecision({
        document_id: mark.documentId,
        code: mark.code,
        verdict: mark.verdict,
        reviewer,
        probability: mark.probability,
        threshold: mark.threshold,
      }),
    );
    const bits = [`${report.sent.length} saved`];
    if (report.skipped.length) bits.push(`${report.skipped.length} already recorded`);
    if (report.failed.length) bits.push(`${report.failed.length} failed, kept for retry`);
    updateSubmitStatus(bits.join(", "));
    renderCodes();
    await renderDecisions().catch(() => undefined);
  })();
});

async function boot(): Promise<void> {
  slider.value = String(state.threshold);
  sliderValue.textContent = state.threshold.toFixed(3);
  try {
    const health = await client.health();
    healthLine.textContent =
      `connected to ${apiBase} | ${health.m} labels | ` +
      `${health.encoder_kind} encoder | checkpoint v${health.checkpoint_version}`;
  } catch (err) {
    healthLine.textContent = `service unavailable at ${apiBase}`;
    showError(describe(err));
    return;
  }
  await loadPage();
}

void boot();
