/**
 * Page controllers: the replay loop talks to one small interface, backed
 * either by a real headless browser (playwright-core) or by an in-process
 * mock page.
 *
 * The mock mirrors the bundled assets/mock-page.html contract: it counts
 * pointer moves, tracks the mirrored dot position, and "records" the run as
 * one JSON line per received move. The real simulator is a third-party
 * service and is never a test dependency.
 */
import { writeFile } from "node:fs/promises";

export interface InitWait {
  /** Fixed settle time before the first move. */
  fixedMs: number;
  /** Optional readiness selector; when set it replaces the fixed wait. */
  readySelector?: string;
}

export interface PageController {
  readonly kind: "mock" | "playwright";
  /** Navigate and wait for the page to be ready for input. */
  open(url: string, init: InitWait): Promise<void>;
  moveCursor(x: number, y: number): Promise<void>;
  /**
   * Pointer-move count as observed by the page, or undefined when the target
   * page is not instrumented (e.g. the real simulator).
   */
  pointerEventCount(): Promise<number | undefined>;
  /** Tear down and write the recording; rejects if no recording exists. */
  finish(recordingPath: string): Promise<void>;
}

interface MockMove {
  x: number;
  y: number;
  t_ms: number;
}

/** In-process stand-in for a browser rendering the bundled mock page. */
export class MockPageController implements PageController {
  readonly kind = "mock";
  private moves: MockMove[] = [];
  private opened = false;
  private startedAt = 0;
  private dot: { x: number; y: number } = { x: 0, y: 0 };

  async open(_url: string, _init: InitWait): Promise<void> {
    this.opened = true;
    this.startedAt = performance.now();
  }

  async moveCursor(x: number, y: number): Promise<void> {
    if (!this.opened) throw new Error("mock page not opened");
    this.dot = { x, y };
    this.moves.push({ x, y, t_ms: performance.now() - this.startedAt });
  }

  async pointerEventCount(): Promise<number> {
    return this.moves.length;
  }

  /** Mirrored cursor element position, as the mock page would render it. */
  dotPosition(): { x: number; y: number } {
    return this.dot;
  }

  async finish(recordingPath: string): Promise<void> {
    if (!this.opened) throw new Error("mock page not opened");
    // Recording format: header line, then one JSON object per received move.
    const lines = [
      JSON.stringify({ recording: "mock-pointer-capture", version: 1 }),
      ...this.moves.map((m) => JSON.stringify(m)),
    ];
    await writeFile(recordingPath, lines.join("\n") + "\n", "utf8");
  }
}

export interface PlaywrightOptions {
  viewport: { width: number; height: number };
  executablePath?: string;
  channel?: string;
}

/** Real headless-browser controller; requires a Chromium executable. */
export class PlaywrightPageController implements PageController {
  readonly kind = "playwright";
  private browser?: import("playwright-core").Browser;
  private context?: import("playwright-core").BrowserContext;
  private page?: import("playwright-core").Page;
  private videoDir: string;

  constructor(private options: PlaywrightOptions, videoDir: string) {
    this.videoDir = videoDir;
  }

  async open(url: string, init: InitWait): Promise<void> {
    const { chromium } = await import("playwright-core");
    this.browser = await chromium.launch({
      headless: true,
      executablePath: this.options.executablePath,
      channel: this.options.channel,
    });
    this.context = await this.browser.newContext({
      viewport: this.options.viewport,
      recordVideo: { dir: this.videoDir, size: this.options.viewport },
    });
    this.page = await this.context.newPage();
    await this.page.goto(url, { waitUntil: "load" });
    if (init.readySelector) {
      // readiness = the marker exists in the DOM (it may be display:none)
      await this.page.waitForSelector(init.readySelector, {
        state: "attached",
        timeout: 60_000,
      });
    } else if (init.fixedMs > 0) {
      await this.page.waitForTimeout(init.fixedMs);
    }
  }

  async moveCursor(x: number, y: number): Promise<void> {
    if (!this.page) throw new Error("browser page not open");
    await this.page.mouse.move(x, y);
  }

  async pointerEventCount(): Promise<number | undefined> {
    if (!this.page) throw new Error("browser page not open");
    const count = await this.page.evaluate(
      () => (window as unknown as { __pointerMoves?: number }).__pointerMoves
    );
    return typeof count === "number" ? count : undefined;
  }

  async finish(recordingPath: string): Promise<void> {
    if (!this.page || !this.context || !this.browser) {
      throw new Error("browser page not open");
    }
    const video = this.page.video();
    await this.context.close(); // flushes the recording
    if (!video) {
      await this.browser.close();
      throw new Error("recording missing at teardown (no video attached)");
    }
    await video.saveAs(recordingPath);
    await this.browser.close();
  }
}
