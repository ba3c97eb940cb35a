/**
 * .moves schedule parsing and validation.
 *
 * Format (line-oriented text):
 *   viewport <width> <height>
 *   fps <value>
 *   move <frame> <x> <y>      (one per event, frames sequential from 0)
 *
 * Validation collects every violation with its line number instead of
 * stopping at the first.
 */
import { readFile } from "node:fs/promises";

export interface MoveEvent {
  frame: number;
  x: number;
  y: number;
}

export interface Schedule {
  viewport: { width: number; height: number };
  fps: number;
  /** 1000 / fps — the wait after every cursor move. */
  delayMs: number;
  events: MoveEvent[];
}

export interface ScheduleIssue {
  line: number;
  reason: string;
}

export interface ParseResult {
  schedule?: Schedule;
  errors: ScheduleIssue[];
}

const INT = /^-?\d+$/;

function parseIntStrict(token: string): number | undefined {
  return INT.test(token) ? Number(token) : undefined;
}

export function parseSchedule(text: string): ParseResult {
  const errors: ScheduleIssue[] = [];
  const rawLines = text.split(/\r?\n/);
  // (lineNumber, content) for non-empty lines; blank lines are ignored
  const lines: Array<{ no: number; text: string }> = [];
  rawLines.forEach((line, i) => {
    if (line.trim() !== "") lines.push({ no: i + 1, text: line.trim() });
  });

  if (lines.length === 0) {
    return { errors: [{ line: 1, reason: "empty schedule" }] };
  }

  let width = 0;
  let height = 0;
  const first = lines[0]!;
  const viewportMatch = first.text.split(/\s+/);
  if (viewportMatch[0] !== "viewport") {
    errors.push({ line: first.no, reason: "viewport line absent" });
  } else if (viewportMatch.length !== 3) {
    errors.push({ line: first.no, reason: "viewport line must be 'viewport <width> <height>'" });
  } else {
    const w = parseIntStrict(viewportMatch[1]!);
    const h = parseIntStrict(viewportMatch[2]!);
    if (w === undefined || h === undefined || w <= 0 || h <= 0) {
      errors.push({ line: first.no, reason: "viewport dimensions must be positive integers" });
    } else {
      width = w;
      height = h;
    }
  }

  let fps = 0;
  const second = lines[1];
  if (second === undefined || !second.text.startsWith("fps")) {
    errors.push({ line: second?.no ?? first.no + 1, reason: "fps line absent" });
  } else {
    const parts = second.text.split(/\s+/);
    const value = parts.length === 2 ? Number(parts[1]) : NaN;
    if (!Number.isFinite(value) || value <= 0) {
      errors.push({ line: second.no, reason: "fps value must be a positive number" });
    } else {
      fps = value;
    }
  }

  const events: MoveEvent[] = [];
  for (let i = 2; i < lines.length; i++) {
    const { no, text } = lines[i]!;
    const parts = text.split(/\s+/);
    if (parts[0] !== "move") {
      errors.push({ line: no, reason: `unknown directive '${parts[0]}'` });
      continue;
    }
    if (parts.length !== 4) {
      errors.push({ line: no, reason: "move line must be 'move <frame> <x> <y>'" });
      continue;
    }
    const frame = parseIntStrict(parts[1]!);
    const x = parseIntStrict(parts[2]!);
    const y = parseIntStrict(parts[3]!);
    if (frame === undefined || x === undefined || y === undefined) {
      errors.push({ line: no, reason: "move fields must be integers" });
      continue;
    }
    if (frame !== events.length) {
      errors.push({
        line: no,
        reason: `frame ${frame} out of sequence (expected ${events.length})`,
      });
      continue;
    }
    if (width > 0 && (x < 0 || x > width)) {
      errors.push({ line: no, reason: `x=${x} outside viewport [0, ${width}]` });
      continue;
    }
    if (height > 0 && (y < 0 || y > height)) {
      errors.push({ line: no, reason: `y=${y} outside viewport [0, ${height}]` });
      continue;
    }
    events.push({ frame, x, y });
  }

  if (events.length === 0 && errors.length === 0) {
    errors.push({ line: lines[lines.length - 1]!.no, reason: "no move events" });
  }
  if (errors.length > 0) {
    return { errors };
  }
  return {
    schedule: {
      viewport: { width, height },
      fps,
      delayMs: 1000 / fps,
      events,
    },
    errors: [],
  };
}

export async function loadSchedule(path: string): Promise<ParseResult> {
  const text = await readFile(path, "utf8");
  return parseSchedule(text);
}

export function formatIssues(path: string, issues: ScheduleIssue[]): string {
  return issues.map((e) => `${path}:${e.line}: ${e.reason}`).join("\n");
}
