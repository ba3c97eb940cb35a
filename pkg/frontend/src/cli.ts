#!/usr/bin/env node
/**
 * Replay driver CLI.
 *
 *   replay   --schedule s.moves --url <target|mock://local> --out rec.webm
 *            [--runlog log.json] [--init-wait-ms 5000] [--ready-selector "#ready"]
 *            [--executable-path /path/to/chromium] [--transcode-cmd "<template>"]
 *            [--dry-run]
 *   validate --schedule s.moves
 */
import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import { MOCK_URL, ScheduleError, replay } from "./replay.js";
import { formatIssues, loadSchedule } from "./schedule.js";

export async function main(argv: string[]): Promise<number> {
  let exitCode = 0;
  await yargs(argv)
    .scriptName("gazeforge-replay")
    .command(
      "replay",
      "execute a .moves schedule against a page and record it",
      (y) =>
        y
          .option("schedule", { type: "string", demandOption: true })
          .option("url", { type: "string", default: MOCK_URL })
          .option("out", { type: "string", default: "recording.webm" })
          .option("runlog", { type: "string" })
          .option("init-wait-ms", { type: "number" })
          .option("ready-selector", { type: "string" })
          .option("executable-path", { type: "string" })
          .option("transcode-cmd", { type: "string" })
          .option("transcode-out", { type: "string" })
          .option("dry-run", { type: "boolean", default: false }),
      async (args) => {
        try {
          const log = await replay({
            url: args.url,
            schedulePath: args.schedule,
            recordingPath: args.out,
            runLogPath: args.runlog,
            initWaitMs: args["init-wait-ms"],
            readySelector: args["ready-selector"],
            executablePath: args["executable-path"],
            transcodeCmd: args["transcode-cmd"],
            transcodeOutput: args["transcode-out"],
            dryRun: args["dry-run"],
          });
          if (log.dryRun) {
            console.log(
              `dry-run ok: ${log.scheduleEvents} events at ${log.fps} fps, ` +
                `viewport ${log.viewport[0]}x${log.viewport[1]}`
            );
          } else {
            console.log(
              `replayed ${log.events.length}/${log.scheduleEvents} events ` +
                `(mean interval ${log.meanIntervalMs?.toFixed(2)} ms), ` +
                `recording ${log.recording}`
            );
          }
        } catch (err) {
          exitCode = err instanceof ScheduleError ? 1 : 2;
          console.error(err instanceof Error ? err.message : String(err));
        }
      }
    )
    .command(
      "validate",
      "structurally validate a .moves schedule",
      (y) => y.option("schedule", { type: "string", demandOption: true }),
      async (args) => {
        const parsed = await loadSchedule(args.schedule);
        if (parsed.schedule) {
          console.log(
            `ok: ${parsed.schedule.events.length} events at ${parsed.schedule.fps} fps`
          );
        } else {
          exitCode = 1;
          console.error(formatIssues(args.schedule, parsed.errors));
        }
      }
    )
    .demandCommand(1)
    .strict()
    .help()
    .parseAsync();
  return exitCode;
}

const entry = process.argv[1] ?? "";
if (entry.endsWith("cli.ts") || entry.endsWith("cli.js")) {
  main(hideBin(process.argv)).then((code) => {
    process.exitCode = code;
  });
}
