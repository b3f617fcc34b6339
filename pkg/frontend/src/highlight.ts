// Pure highlight construction: document text plus one code's explanation
// becomes a list of runs that tile the text exactly. Intensities are taken
// verbatim from the API payload, never recomputed here.

import type { Explanation } from "./api.js";

export interface HighlightRun {
  text: string;
  /** 0 for plain text, otherwise the API-supplied intensity in (0, 1]. */
  intensity: number;
}

export interface HighlightView {
  runs: HighlightRun[];
  activeCode: string | null;
  /** Set when a span was unusable; runs then hold the unhighlighted text. */
  error: string | null;
}

function plainView(text: string, activeCode: string | null, error: string | null): HighlightView {
  const runs = text.length > 0 ? [{ text, intensity: 0 }] : [];
  return { runs, activeCode, error };
}

function spanError(span: unknown, textLength: number): string {
  return `span ${JSON.stringify(span)} does not fit text of length ${textLength}`;
}

export function buildHighlightView(
  text: string,
  explanation: Explanation | null | undefined,
  activeCode: string | null = null,
): HighlightView {
  if (!explanation || explanation.tokens.length === 0) {
    return plainView(text, activeCode, null);
  }

  for (const token of explanation.tokens) {
    const [start, end] = token.span;
    const intsOk = Number.isInteger(start) && Number.isInteger(end);
    if (!intsOk || start < 0 || end > text.length || start >= end) {
      return plainView(text, activeCode, spanError(token.span, text.length));
    }
  }

  const ordered = [...explanation.tokens].sort((a, b) => a.span[0] - b.span[0]);
  const runs: HighlightRun[] = [];
  let cursor = 0;
  for (const token of ordered) {
    // clip overlap against the previous span so the runs still tile
    const start = Math.max(token.span[0], cursor);
    const end = token.span[1];
    if (start >= end) continue;
    if (start > cursor) runs.push({ text: text.slice(cursor, start), intensity: 0 });
    runs.push({ text: text.slice(start, end), intensity: token.intensity });
    cursor = end;
  }
  if (cursor < text.length) runs.push({ text: text.slice(cursor), intensity: 0 });
  return { runs, activeCode, error: null };
}

export function highlightedRuns(view: HighlightView): HighlightRun[] {
  return view.runs.filter((run) => run.intensity > 0);
}

export function concatenation(view: HighlightView): string {
  return view.runs.map((run) => run.text).join("");
}
