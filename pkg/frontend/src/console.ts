// The attacker console proper: scenario controls, the query loop, round
// history, and a polled transcript timeline. Pure API client by design:
// every snippet string shown in the DOM is set verbatim via textContent,
// never rebuilt or concatenated, so what you read is exactly what the API
// returned.

import { ApiError, ConsoleClient } from "./api.js";
import type {
  AttackKind,
  MatrixCell,
  MitigationMode,
  RoundEntry,
  ScenarioInfo,
  TranscriptEvent,
} from "./types.js";

const POLL_INTERVAL_MS = 500;

const ATTACKS: AttackKind[] = ["none", "applet", "mitm_js"];
const DISPLAY_MODES: MitigationMode[] = ["full", "no_snippets", "images", "iframe"];

// which lane a transcript record renders in
const LANES: Record<string, string> = {
  resolve: "dns",
  connect: "tcp",
  segment: "tcp",
  deliver: "tcp",
  relayed_opaque: "tcp",
  classified: "intercept",
  spliced: "intercept",
  transformed: "attacker",
  replayed: "attacker",
  attacker_recv: "attacker",
  page_loaded: "browser",
  effect: "browser",
  violation: "browser",
  fabric: "harness",
  scenario: "harness",
};

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function leakBadge(leak: string): HTMLElement {
  return el("span", `badge leak-${leak}`, leak);
}

/** One-line human summary of a transcript record. */
export function describeEvent(ev: TranscriptEvent): string {
  switch (ev.event) {
    case "resolve":
      return `${ev.name} -> ${ev.address}${ev.hijacked ? " (hijacked)" : ""}${
        ev.discarded ? " forged answer discarded" : ""
      }`;
    case "connect":
      return `${ev.src} -> ${ev.dst_addr}:${ev.dst_port}${
        ev.refused ? " refused" : ""
      }${ev.secure ? " [tls]" : ""}`;
    case "classified":
      return `web search for "${(ev.terms as string[]).join(" ")}" on ${ev.provider}`;
    case "segment":
      return `response split into ${ev.count} segments`;
    case "spliced":
      return `local block (${ev.block_len}B, ${ev.mode}) inserted at segment ${ev.insert_index}`;
    case "deliver":
      return `${ev.bytes}B delivered${ev.spliced ? " (spliced)" : ""}`;
    case "transformed":
      return `proxied ${ev.host} via ${ev.upstream}, injected ${ev.payload_ops} ops`;
    case "relayed_opaque":
      return `relayed ${ev.bytes}B of TLS it cannot read`;
    case "replayed":
      return `answered from canned recording (${ev.bytes}B)`;
    case "page_loaded":
      return `${ev.url} (${ev.frames} frames, ${ev.agents} agents)`;
    case "effect":
      return `${ev.actor} ${ev.op} ${ev.ok ? "ok" : `failed: ${ev.error}`}`;
    case "violation":
      return `${ev.actor} ${ev.op} denied: ${ev.reason}`;
    case "attacker_recv":
      return `attacker received ${ev.kind}`;
    case "fabric":
      return `fabric up, seed ${ev.seed}`;
    case "scenario":
      return `${ev.attack} vs ${ev.label}`;
    default:
      return ev.event;
  }
}

export class Console {
  private pending = 0;
  private idleResolvers: (() => void)[] = [];
  private pollTimer: ReturnType<typeof setInterval> | null = null;
  private pollBusy = false;
  private lastSeq = 0;

  private queryInput!: HTMLInputElement;
  private queryButton!: HTMLButtonElement;
  private banner!: HTMLElement;
  private historyList!: HTMLElement;
  private scenarioIdEl!: HTMLElement;
  private outcomeEl!: HTMLElement;
  private attackSelect!: HTMLSelectElement;
  private modeSelect!: HTMLSelectElement;
  private integrationBox!: HTMLInputElement;
  private secureBox!: HTMLInputElement;
  private proxyBox!: HTMLInputElement;
  private applyButton!: HTMLButtonElement;
  private timelineList!: HTMLElement;
  private digestEl!: HTMLElement;
  private matrixBody!: HTMLElement;

  constructor(
    private readonly root: HTMLElement,
    private readonly client: ConsoleClient,
  ) {
    this.build();
  }

  /** Resolves once no request started so far is still in flight. */
  idle(): Promise<void> {
    if (this.pending === 0) return Promise.resolve();
    return new Promise((resolve) => this.idleResolvers.push(resolve));
  }

  private track<T>(work: Promise<T>): Promise<T> {
    this.pending += 1;
    const settle = () => {
      this.pending -= 1;
      if (this.pending === 0) {
        for (const resolve of this.idleResolvers.splice(0)) resolve();
      }
    };
    // both arms handled here so a rejected job can't surface as an
    // unhandled rejection through this side chain; callers still see it
    work.then(settle, settle);
    return work;
  }

  private build(): void {
    this.root.textContent = "";

    const header = el("header", "top");
    header.append(el("h1", undefined, "snipleak console"));
    this.scenarioIdEl = el("span", "scenario-id", "loading...");
    this.outcomeEl = el("span", "outcome");
    header.append(this.scenarioIdEl, this.outcomeEl);
    this.root.append(header);

    this.banner = el("div", "banner hidden");
    this.root.append(this.banner);

    const main = el("div", "columns");
    main.append(this.buildScenarioPanel(), this.buildQueryPanel(), this.buildTimelinePanel());
    this.root.append(main);
  }

  private buildScenarioPanel(): HTMLElement {
    const panel = el("section", "panel scenario-panel");
    panel.append(el("h2", undefined, "scenario"));

    const attackRow = el("label", "row", "attack ");
    this.attackSelect = el("select");
    this.attackSelect.name = "attack";
    for (const kind of ATTACKS) {
      const opt = el("option", undefined, kind);
      opt.value = kind;
      this.attackSelect.append(opt);
    }
    attackRow.append(this.attackSelect);

    const modeRow = el("label", "row", "result display ");
    this.modeSelect = el("select");
    this.modeSelect.name = "mitigation";
    for (const mode of DISPLAY_MODES) {
      const opt = el("option", undefined, mode);
      opt.value = mode;
      this.modeSelect.append(opt);
    }
    modeRow.append(this.modeSelect);

    // integration on/off is deliberately a checkbox: unticking it is the
    // whole mitigation
    const integrationRow = el("label", "row");
    this.integrationBox = el("input");
    this.integrationBox.type = "checkbox";
    this.integrationBox.name = "integration";
    this.integrationBox.checked = true;
    integrationRow.append(this.integrationBox, document.createTextNode(" integrate local results"));

    const secureRow = el("label", "row");
    this.secureBox = el("input");
    this.secureBox.type = "checkbox";
    this.secureBox.name = "provider_secure";
    secureRow.append(this.secureBox, document.createTextNode(" provider over TLS"));

    const proxyRow = el("label", "row");
    this.proxyBox = el("input");
    this.proxyBox.type = "checkbox";
    this.proxyBox.name = "proxy_only";
    proxyRow.append(this.proxyBox, document.createTextNode(" route through LAN proxy"));

    this.applyButton = el("button", undefined, "apply");
    this.applyButton.addEventListener("click", () => void this.applyScenario());

    panel.append(attackRow, modeRow, integrationRow, secureRow, proxyRow, this.applyButton);

    panel.append(el("h2", undefined, "outcome matrix"));
    const table = el("table", "matrix");
    this.matrixBody = el("tbody");
    table.append(this.matrixBody);
    panel.append(table);
    return panel;
  }

  private buildQueryPanel(): HTMLElement {
    const panel = el("section", "panel query-panel");
    panel.append(el("h2", undefined, "query"));

    const form = el("div", "query-form");
    this.queryInput = el("input");
    this.queryInput.type = "text";
    this.queryInput.name = "terms";
    this.queryInput.placeholder = "search terms";
    this.queryInput.addEventListener("keydown", (ev) => {
      if (ev.key === "Enter") void this.submitQuery();
    });
    this.queryButton = el("button", undefined, "send");
    this.queryButton.addEventListener("click", () => void this.submitQuery());
    form.append(this.queryInput, this.queryButton);
    panel.append(form);

    this.historyList = el("div", "history");
    panel.append(this.historyList);
    return panel;
  }

  private buildTimelinePanel(): HTMLElement {
    const panel = el("section", "panel timeline-panel");
    const head = el("h2", undefined, "timeline ");
    this.digestEl = el("span", "digest");
    head.append(this.digestEl);
    panel.append(head);
    this.timelineList = el("ol", "timeline");
    panel.append(this.timelineList);
    return panel;
  }

  // ---- data flow ----
  // public entry points wrap their whole body in track() so idle() spans
  // complete operations, DOM updates and finally blocks included

  init(): Promise<void> {
    return this.track(this.initInner());
  }

  private async initInner(): Promise<void> {
    await this.loadScenario();
    await this.loadHistory();
    await this.pollTranscript();
    void this.refreshMatrix();
  }

  start(): void {
    if (this.pollTimer !== null) return;
    this.pollTimer = setInterval(() => void this.pollTranscript(), POLL_INTERVAL_MS);
  }

  stop(): void {
    if (this.pollTimer !== null) {
      clearInterval(this.pollTimer);
      this.pollTimer = null;
    }
  }

  private showError(message: string): void {
    this.banner.textContent = message;
    this.banner.classList.remove("hidden");
  }

  private clearError(): void {
    this.banner.textContent = "";
    this.banner.classList.add("hidden");
  }

  private async loadScenario(): Promise<void> {
    const info = await this.client.getScenario();
    this.applyScenarioInfo(info);
  }

  private applyScenarioInfo(info: ScenarioInfo): void {
    this.scenarioIdEl.textContent = info.scenario_id;
    const cfg = info.config;
    this.attackSelect.value = cfg.attack;
    if (cfg.mitigation === "off") {
      this.integrationBox.checked = false;
    } else {
      this.integrationBox.checked = true;
      this.modeSelect.value = cfg.mitigation;
    }
    this.secureBox.checked = cfg.provider_secure;
    this.proxyBox.checked = cfg.proxy_only !== null;
  }

  private async loadHistory(): Promise<void> {
    const { rounds } = await this.client.getHistory();
    this.historyList.textContent = "";
    for (const round of rounds) this.renderRound(round);
  }

  submitQuery(): Promise<void> {
    if (this.queryButton.disabled) return Promise.resolve(); // one in flight max
    const terms = this.queryInput.value.trim().split(/\s+/).filter(Boolean);
    if (terms.length === 0) return Promise.resolve();
    return this.track(this.submitInner(terms));
  }

  private async submitInner(terms: string[]): Promise<void> {
    this.queryButton.disabled = true;
    this.queryInput.disabled = true;
    try {
      const round = await this.client.submitQuery(terms);
      this.clearError();
      this.renderRound(round);
      this.outcomeEl.textContent = "";
      this.outcomeEl.append(leakBadge(round.leak_class));
      this.queryInput.value = "";
    } catch (err) {
      this.showError(err instanceof ApiError ? err.message : String(err));
    } finally {
      this.queryButton.disabled = false;
      this.queryInput.disabled = false;
    }
  }

  private renderRound(round: RoundEntry): void {
    const card = el("article", "round");
    const head = el("div", "round-head");
    head.append(
      el("span", "round-terms", round.terms.join(" ")),
      el("span", "round-scenario", `${round.attack} x ${round.mitigation}`),
      leakBadge(round.leak_class),
    );
    card.append(head);
    if (round.snippets.length === 0) {
      card.append(el("div", "no-leak", "no local results on the page"));
    } else {
      for (const [path, text] of round.snippets) {
        const hit = el("div", "snippet");
        hit.append(el("div", "snippet-path", path));
        // verbatim API string; purity depends on this staying textContent
        hit.append(el("pre", "snippet-text", text));
        card.append(hit);
      }
    }
    this.historyList.prepend(card);
  }

  applyScenario(): Promise<void> {
    if (this.applyButton.disabled) return Promise.resolve();
    return this.track(this.applyInner());
  }

  private async applyInner(): Promise<void> {
    const config = {
      attack: this.attackSelect.value as AttackKind,
      mitigation: this.integrationBox.checked
        ? (this.modeSelect.value as MitigationMode)
        : ("off" as const),
      provider_secure: this.secureBox.checked,
      proxy_only: this.proxyBox.checked ? true : null,
    };
    this.applyButton.disabled = true;
    try {
      const info = await this.client.setScenario(config);
      this.clearError();
      this.applyScenarioInfo(info);
      // new fabric, new transcript: restart the lane view at seq 0
      this.lastSeq = 0;
      this.timelineList.textContent = "";
      this.outcomeEl.textContent = "";
      await this.pollTranscript();
      void this.refreshMatrix();
    } catch (err) {
      this.showError(err instanceof ApiError ? err.message : String(err));
    } finally {
      this.applyButton.disabled = false;
    }
  }

  pollTranscript(): Promise<void> {
    if (this.pollBusy) return Promise.resolve();
    return this.track(this.pollInner());
  }

  private async pollInner(): Promise<void> {
    this.pollBusy = true;
    try {
      const page = await this.client.getTranscript(this.lastSeq);
      for (const ev of page.events) {
        this.renderEvent(ev);
        if (ev.seq > this.lastSeq) this.lastSeq = ev.seq;
      }
      this.digestEl.textContent = page.digest;
    } catch {
      // polling is best-effort; the next tick retries
    } finally {
      this.pollBusy = false;
    }
  }

  private renderEvent(ev: TranscriptEvent): void {
    const row = el("li", `lane-row lane-${LANES[ev.event] ?? "harness"}`);
    if (ev.event === "spliced" && ev.insert_index === 2) {
      // the signature move: block lands right after the second segment
      row.classList.add("splice-highlight");
    }
    if (ev.event === "resolve" && ev.discarded) row.classList.add("forged");
    if (ev.event === "connect" && ev.secure) row.classList.add("opaque");
    row.append(
      el("span", "seq", String(ev.seq)),
      el("span", "lane-tag", LANES[ev.event] ?? "harness"),
      el("span", "kind", ev.event),
      el("span", "detail", describeEvent(ev)),
    );
    this.timelineList.append(row);
  }

  refreshMatrix(): Promise<void> {
    return this.track(this.matrixInner());
  }

  private async matrixInner(): Promise<void> {
    let cells: MatrixCell[];
    try {
      cells = (await this.client.getMatrix()).cells;
    } catch {
      return; // matrix strip is advisory; leave the last table standing
    }
    this.matrixBody.textContent = "";
    for (const cell of cells) {
      const row = el("tr", cell.ok ? "cell-ok" : "cell-bad");
      row.append(
        el("td", undefined, `${cell.attack} x ${cell.mitigation}`),
        el("td", undefined, cell.leak_class),
        el("td", undefined, cell.ok ? "ok" : `expected ${cell.expected}`),
      );
      this.matrixBody.append(row);
    }
  }
}
