import { describe, expect, it } from "vitest";

import { parseSchedule } from "../src/schedule.js";

function lines(...rows: string[]): string {
  return rows.join("\n") + "\n";
}

const GOOD = lines(
  "viewport 1280 720",
  "fps 25",
  "move 0 100 200",
  "move 1 101 201",
  "move 2 102 202"
);

describe("parseSchedule", () => {
  it("accepts a well-formed schedule", () => {
    const { schedule, errors } = parseSchedule(GOOD);
    expect(errors).toEqual([]);
    expect(schedule).toBeDefined();
    expect(schedule!.viewport).toEqual({ width: 1280, height: 720 });
    expect(schedule!.fps).toBe(25);
    expect(schedule!.delayMs).toBeCloseTo(40);
    expect(schedule!.events).toHaveLength(3);
    expect(schedule!.events[1]).toEqual({ frame: 1, x: 101, y: 201 });
  });

  it("accepts fractional fps and boundary coordinates", () => {
    const { schedule, errors } = parseSchedule(
      lines("viewport 1280 720", "fps 29.97", "move 0 0 0", "move 1 1280 720")
    );
    expect(errors).toEqual([]);
    expect(schedule!.delayMs).toBeCloseTo(1000 / 29.97);
  });

  it("rejects out-of-viewport coordinates with the offending line", () => {
    const { schedule, errors } = parseSchedule(
      lines("viewport 1280 720", "fps 25", "move 0 100 200", "move 1 1300 200")
    );
    expect(schedule).toBeUndefined();
    expect(errors).toHaveLength(1);
    expect(errors[0]).toMatchObject({ line: 4 });
    expect(errors[0]!.reason).toContain("x=1300");
    expect(errors[0]!.reason).toContain("1280");
  });

  it("rejects a missing fps header", () => {
    const { errors } = parseSchedule(lines("viewport 1280 720", "move 0 1 1"));
    expect(errors.some((e) => e.reason === "fps line absent" && e.line === 2)).toBe(true);
  });

  it("rejects a missing viewport header", () => {
    const { errors } = parseSchedule(lines("fps 25", "move 0 1 1"));
    expect(errors[0]).toMatchObject({ line: 1, reason: "viewport line absent" });
  });

  it("rejects malformed numbers with line accuracy", () => {
    const { errors } = parseSchedule(
      lines("viewport 1280 720", "fps 25", "move 0 12.5 7")
    );
    expect(errors).toEqual([
      { line: 3, reason: "move fields must be integers" },
    ]);
  });

  it("rejects non-positive fps", () => {
    const { errors } = parseSchedule(lines("viewport 1280 720", "fps 0", "move 0 1 1"));
    expect(errors[0]!.reason).toContain("positive");
  });

  it("rejects out-of-sequence frames", () => {
    const { errors } = parseSchedule(
      lines("viewport 1280 720", "fps 25", "move 0 1 1", "move 5 1 1")
    );
    expect(errors).toEqual([
      { line: 4, reason: "frame 5 out of sequence (expected 1)" },
    ]);
  });

  it("rejects unknown directives and keeps collecting", () => {
    const { errors } = parseSchedule(
      lines("viewport 1280 720", "fps 25", "jump 0 1 1", "move 0 -3 1")
    );
    expect(errors).toHaveLength(2);
    expect(errors[0]!.reason).toContain("unknown directive");
    expect(errors[1]!.reason).toContain("x=-3");
  });

  it("rejects an event-free schedule", () => {
    const { errors } = parseSchedule(lines("viewport 1280 720", "fps 25"));
    expect(errors[0]!.reason).toBe("no move events");
  });

  it("rejects an empty file", () => {
    const { errors } = parseSchedule("");
    expect(errors[0]!.reason).toBe("empty schedule");
  });
});
