/**
 * Release criteria for the replay driver, run against the in-process mock
 * page (the real simulator is a third-party service and never a test
 * dependency).
 */
import { mkdtemp, readFile, stat, writeFile } from "node:fs/promises";
import { tmpdir } from "node:os";
import * as path from "node:path";

import { describe, expect, it } from "vitest";

import { MOCK_URL, replay } from "../src/replay.js";
import { parseSchedule } from "../src/schedule.js";

describe("acceptance", () => {
  it(
    "250-event mock replay: exact pointer count, mean interval within ±10% of 40 ms, non-empty recording",
    { timeout: 30_000 },
    async () => {
      const dir = await mkdtemp(path.join(tmpdir(), "replay-accept-"));
      const rows = ["viewport 1280 720", "fps 25"];
      for (let i = 0; i < 250; i++) {
        rows.push(`move ${i} ${i % 1281} ${(2 * i) % 721}`);
      }
      const schedulePath = path.join(dir, "accept.moves");
      await writeFile(schedulePath, rows.join("\n") + "\n", "utf8");
      const recordingPath = path.join(dir, "accept-recording.jsonl");

      const started = performance.now();
      const log = await replay({ url: MOCK_URL, schedulePath, recordingPath });
      const elapsed = performance.now() - started;

      expect(log.pointerEventsObserved).toBe(250);
      expect(log.events).toHaveLength(250);

      expect(log.meanIntervalMs).toBeDefined();
      expect(log.meanIntervalMs!).toBeGreaterThanOrEqual(36);
      expect(log.meanIntervalMs!).toBeLessThanOrEqual(44);

      const recorded = await stat(recordingPath);
      expect(recorded.size).toBeGreaterThan(0);
      const lines = (await readFile(recordingPath, "utf8")).trim().split("\n");
      expect(lines).toHaveLength(251);

      expect(elapsed).toBeLessThan(30_000);
    }
  );

  it("validator rejects out-of-viewport coordinates and malformed headers with line-accurate errors", () => {
    const oob = parseSchedule(
      ["viewport 1280 720", "fps 25", "move 0 640 360", "move 1 1300 10", ""].join("\n")
    );
    expect(oob.schedule).toBeUndefined();
    expect(oob.errors).toEqual([
      { line: 4, reason: "x=1300 outside viewport [0, 1280]" },
    ]);

    const noFps = parseSchedule(["viewport 1280 720", "move 0 1 1", ""].join("\n"));
    expect(noFps.errors.some((e) => e.reason === "fps line absent" && e.line === 2)).toBe(
      true
    );

    const badViewport = parseSchedule(["viewport wide tall", "fps 25", "move 0 1 1", ""].join("\n"));
    expect(badViewport.errors[0]).toEqual({
      line: 1,
      reason: "viewport dimensions must be positive integers",
    });
  });
});
