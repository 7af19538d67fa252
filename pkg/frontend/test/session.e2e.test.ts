// @vitest-environment jsdom
//
// Scripted interactive session against the real harness API: spawn
// `snipleak serve` on an ephemeral port and drive the actual UI. Requires
// the Python package to be installed (pip install -e .. from the repo root).

import { spawn, type ChildProcess } from "node:child_process";
import { resolve } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { ConsoleClient } from "../src/api.js";
import { Console } from "../src/console.js";
import type { RoundEntry } from "../src/types.js";

// vitest runs with cwd at the frontend package; the harness lives one up
const REPO_ROOT = resolve(process.cwd(), "..");

let proc: ChildProcess;
let base: string;
let client: ConsoleClient;
let ui: Console;

function startHarness(): Promise<string> {
  proc = spawn("python3", ["-m", "snipleak.cli", "serve", "--port", "0"], {
    cwd: REPO_ROOT,
    stdio: ["ignore", "pipe", "pipe"],
  });
  return new Promise<string>((resolve, reject) => {
    let out = "";
    let err = "";
    const timer = setTimeout(
      () => reject(new Error(`harness did not come up: ${out} ${err}`)),
      20000,
    );
    proc.stdout!.on("data", (chunk: Buffer) => {
      out += chunk.toString();
      const found = out.match(/listening on (http:\/\/[\d.]+:\d+)/);
      if (found) {
        clearTimeout(timer);
        resolve(found[1]);
      }
    });
    proc.stderr!.on("data", (chunk: Buffer) => {
      err += chunk.toString();
    });
    proc.on("exit", (code) => {
      clearTimeout(timer);
      reject(new Error(`harness exited early (${code}): ${err}`));
    });
  });
}

function newestRound(): HTMLElement {
  const card = document.querySelector<HTMLElement>(".history .round");
  if (!card) throw new Error("no round card rendered");
  return card;
}

function snippetTexts(card: HTMLElement): string[] {
  return [...card.querySelectorAll(".snippet-text")].map((n) => n.textContent ?? "");
}

async function submit(query: string): Promise<void> {
  const input = document.querySelector<HTMLInputElement>(".query-form input")!;
  input.value = query;
  document.querySelector<HTMLButtonElement>(".query-form button")!.click();
  await ui.idle();
}

beforeAll(async () => {
  base = await startHarness();
  client = new ConsoleClient(base);
  const root = document.createElement("div");
  document.body.append(root);
  ui = new Console(root, client);
  await ui.init();
  await ui.idle();
});

afterAll(() => {
  proc?.kill();
});

describe("scripted session against the live harness", () => {
  it("starts on the applet scenario", () => {
    expect(document.querySelector(".scenario-id")?.textContent).toMatch(/^applet-full-/);
    expect(document.querySelector(".banner")?.classList.contains("hidden")).toBe(true);
  });

  it("leaks snippets for the first query", async () => {
    await submit("password");
    const card = newestRound();
    expect(card.querySelector(".badge")?.textContent).toBe("snippets");
    const texts = snippetTexts(card);
    expect(texts.length).toBeGreaterThan(0);
    expect(texts.join("\n")).toContain("password");
  });

  it("shows a distinct snippet set for the refined two-term query", async () => {
    const before = new Set(snippetTexts(newestRound()));
    await submit("password bank");
    const after = new Set(snippetTexts(newestRound()));
    expect(after.size).toBeGreaterThan(before.size);
    expect([...after].sort()).not.toEqual([...before].sort());
    // both rounds stay on screen, newest first
    expect(document.querySelectorAll(".history .round").length).toBe(2);
  });

  it("flips the next result to frame_src_only after an iframe toggle, no restart", async () => {
    const pidBefore = proc.pid;
    const mode = document.querySelector<HTMLSelectElement>("select[name=mitigation]")!;
    mode.value = "iframe";
    document.querySelector<HTMLButtonElement>(".scenario-panel button")!.click();
    await ui.idle();
    expect(document.querySelector(".scenario-id")?.textContent).toMatch(/^applet-iframe-/);

    await submit("password");
    const card = newestRound();
    expect(card.querySelector(".badge")?.textContent).toBe("frame_src_only");
    const texts = snippetTexts(card);
    expect(texts.some((t) => t.includes("127.0.0.1:4664"))).toBe(true);
    expect(texts.join(" ")).not.toContain("hunter2");

    expect(proc.pid).toBe(pidBefore);
    // the server kept every round across the rebuild
    const history = await client.getHistory();
    expect(history.rounds).toHaveLength(3);
    expect(document.querySelectorAll(".history .round").length).toBe(3);
  });

  it("only ever displays byte-exact API strings", async () => {
    const { rounds } = await client.getHistory();
    const served = new Set<string>();
    for (const round of rounds as RoundEntry[]) {
      for (const [path, text] of round.snippets) {
        served.add(path);
        served.add(text);
      }
    }
    const shown = document.querySelectorAll(".history .snippet-text, .history .snippet-path");
    expect(shown.length).toBeGreaterThan(0);
    for (const node of shown) {
      expect(served.has(node.textContent ?? "")).toBe(true);
    }
  });

  it("tails the live transcript and highlights the splice", async () => {
    await ui.pollTranscript();
    const rows = [...document.querySelectorAll(".timeline li")];
    expect(rows.length).toBeGreaterThan(0);
    const kinds = rows.map((r) => r.querySelector(".kind")?.textContent);
    expect(kinds).toContain("connect");
    expect(kinds).toContain("spliced");
    const splice = rows.find((r) => r.classList.contains("splice-highlight"));
    expect(splice).toBeDefined();
    expect(splice!.querySelector(".detail")?.textContent).toContain("segment 2");
    expect(document.querySelector(".digest")?.textContent).toMatch(/^sha256:/);
  });

  it("reports a clean matrix", async () => {
    await ui.refreshMatrix();
    const rows = document.querySelectorAll("table.matrix tr");
    expect(rows).toHaveLength(10);
    for (const row of rows) {
      expect(row.classList.contains("cell-ok")).toBe(true);
    }
  });

  it("shows an inline error and keeps going when the query is rejected", async () => {
    // drive a 400 through the UI: a one-term query of only whitespace is
    // blocked client-side, so use the API error path via an empty term list
    const before = document.querySelectorAll(".history .round").length;
    const err = await client.submitQuery([]).catch((e: Error) => e.message);
    expect(err).toContain("terms");
    await submit("password");
    expect(document.querySelectorAll(".history .round").length).toBe(before + 1);
  });
});
