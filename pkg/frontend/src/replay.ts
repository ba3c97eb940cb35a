/**
 * Replay loop: execute a parsed .moves schedule against a page controller,
 * one pointer move per frame with a 1000/fps wait after each, then collect
 * the recording and optionally hand it to an external transcoder.
 *
 * Waits are deadline-based (sleep until start + k * delay) so timer overhead
 * does not accumulate into the mean inter-move interval.
 */
import { exec } from "node:child_process";
import { mkdtemp, stat, writeFile } from "node:fs/promises";
import { tmpdir } from "node:os";
import * as path from "node:path";
import { promisify } from "node:util";

import {
  InitWait,
  MockPageController,
  PageController,
  PlaywrightPageController,
} from "./controller.js";
import { Schedule, formatIssues, loadSchedule } from "./schedule.js";

const execAsync = promisify(exec);

export const MOCK_URL = "mock://local";

export interface DriverConfig {
  /** Simulator page URL, or mock://local for the in-process mock page. */
  url: string;
  schedulePath: string;
  recordingPath: string;
  /** Must match the schedule's declared viewport when set. */
  viewport?: { width: number; height: number };
  initWaitMs?: number;
  readySelector?: string;
  /** Chromium executable for playwright-core (real-browser targets only). */
  executablePath?: string;
  /** e.g. "ffmpeg -y -i {input} {output}"; run after the recording is saved. */
  transcodeCmd?: string;
  transcodeOutput?: string;
  dryRun?: boolean;
  runLogPath?: string;
}

export interface RunLogEvent {
  frame: number;
  x: number;
  y: number;
  /** Milliseconds since replay start, measured right after the move was issued. */
  t_ms: number;
}

export interface RunLog {
  url: string;
  schedule: string;
  viewport: [number, number];
  fps: number;
  dryRun: boolean;
  /** Events declared by the schedule (issued count is events.length). */
  scheduleEvents: number;
  events: RunLogEvent[];
  /** Page-side pointer-move count; undefined for non-instrumented targets. */
  pointerEventsObserved?: number;
  meanIntervalMs?: number;
  recording?: string;
  transcoded?: string;
}

export class ScheduleError extends Error {}

function sleepUntil(deadlineMs: number): Promise<void> {
  const remaining = deadlineMs - performance.now();
  if (remaining <= 0) return Promise.resolve();
  return new Promise((resolve) => setTimeout(resolve, remaining));
}

function meanInterval(events: RunLogEvent[]): number | undefined {
  if (events.length < 2) return undefined;
  return (events[events.length - 1]!.t_ms - events[0]!.t_ms) / (events.length - 1);
}

async function makeController(config: DriverConfig, schedule: Schedule): Promise<PageController> {
  if (config.url === MOCK_URL) {
    return new MockPageController();
  }
  const videoDir = await mkdtemp(path.join(tmpdir(), "replay-video-"));
  return new PlaywrightPageController(
    { viewport: schedule.viewport, executablePath: config.executablePath },
    videoDir
  );
}

export async function replay(config: DriverConfig): Promise<RunLog> {
  const parsed = await loadSchedule(config.schedulePath);
  if (!parsed.schedule) {
    throw new ScheduleError(formatIssues(config.schedulePath, parsed.errors));
  }
  const schedule = parsed.schedule;

  if (
    config.viewport &&
    (config.viewport.width !== schedule.viewport.width ||
      config.viewport.height !== schedule.viewport.height)
  ) {
    throw new ScheduleError(
      `viewport mismatch: driver ${config.viewport.width}x${config.viewport.height}, ` +
        `schedule ${schedule.viewport.width}x${schedule.viewport.height}`
    );
  }

  const log: RunLog = {
    url: config.url,
    schedule: config.schedulePath,
    viewport: [schedule.viewport.width, schedule.viewport.height],
    fps: schedule.fps,
    dryRun: Boolean(config.dryRun),
    scheduleEvents: schedule.events.length,
    events: [],
  };

  if (config.dryRun) {
    // Validation-only mode: no browser, no writes beyond the caller's log.
    return log;
  }

  const controller = await makeController(config, schedule);
  const init: InitWait = {
    fixedMs: config.initWaitMs ?? (controller.kind === "playwright" ? 5000 : 0),
    readySelector: config.readySelector,
  };
  await controller.open(config.url, init);

  const start = performance.now();
  for (const [k, event] of schedule.events.entries()) {
    await controller.moveCursor(event.x, event.y);
    log.events.push({
      frame: event.frame,
      x: event.x,
      y: event.y,
      t_ms: performance.now() - start,
    });
    await sleepUntil(start + (k + 1) * schedule.delayMs);
  }

  log.pointerEventsObserved = await controller.pointerEventCount();
  await controller.finish(config.recordingPath);

  const recorded = await stat(config.recordingPath).catch(() => undefined);
  if (!recorded || recorded.size === 0) {
    throw new Error(`recording missing or empty at teardown: ${config.recordingPath}`);
  }
  log.recording = config.recordingPath;
  log.meanIntervalMs = meanInterval(log.events);

  if (config.transcodeCmd) {
    const output =
      config.transcodeOutput ??
      config.recordingPath.replace(/\.[^.]+$/, "") + ".mp4";
    const cmd = config.transcodeCmd
      .replaceAll("{input}", config.recordingPath)
      .replaceAll("{output}", output);
    await execAsync(cmd);
    log.transcoded = output;
  }

  if (config.runLogPath) {
    await writeFile(config.runLogPath, JSON.stringify(log, null, 2) + "\n", "utf8");
  }
  return log;
}
