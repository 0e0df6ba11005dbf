// Application wiring: configuration, the polling loop, and the submit flow.
// One submission may be in flight at a time; polling pauses while it is.

import { ApiError, EngineClient } from "./api.js";
import {
  buildTickBody,
  mismatchPreview,
  parsedPriorities,
  rankChanges,
  validatePriorities,
  type RankMove,
} from "./logic.js";
import type { DashboardConfig, QueueRow } from "./types.js";
import { DEFAULT_CONFIG } from "./types.js";
import {
  renderBanner,
  renderDiagnostics,
  renderPreview,
  renderQueue,
} from "./views.js";

const CONFIG_KEY = "triage-dashboard-config";

export function loadConfig(storage: Storage): DashboardConfig {
  try {
    const raw = storage.getItem(CONFIG_KEY);
    if (!raw) return { ...DEFAULT_CONFIG };
    const parsed = JSON.parse(raw) as Partial<DashboardConfig>;
    return {
      baseUrl: typeof parsed.baseUrl === "string" ? parsed.baseUrl : DEFAULT_CONFIG.baseUrl,
      pollSeconds:
        typeof parsed.pollSeconds === "number" && parsed.pollSeconds >= 1
          ? parsed.pollSeconds
          : DEFAULT_CONFIG.pollSeconds,
    };
  } catch {
    return { ...DEFAULT_CONFIG };
  }
}

export function saveConfig(storage: Storage, config: DashboardConfig): void {
  storage.setItem(CONFIG_KEY, JSON.stringify(config));
}

export interface App {
  refresh(): Promise<void>;
  submit(): Promise<void>;
  selectInstance(instanceId: string): Promise<void>;
  readonly rows: QueueRow[];
  readonly entries: Record<string, string>;
  startPolling(): void;
  stopPolling(): void;
}

export function createApp(
  doc: Document,
  fetchFn: typeof fetch,
  storage: Storage,
): App {
  const config = loadConfig(storage);
  const client = new EngineClient(config.baseUrl, fetchFn);

  const el = {
    dot: doc.getElementById("connection-dot") as HTMLElement,
    banner: doc.getElementById("banner") as HTMLElement,
    queueBody: doc.getElementById("queue-body") as HTMLElement,
    preview: doc.getElementById("preview-warnings") as HTMLElement,
    submitBtn: doc.getElementById("submit-btn") as HTMLButtonElement,
    submitNote: doc.getElementById("submit-note") as HTMLElement,
    diagnostics: doc.getElementById("diagnostics") as HTMLElement,
    baseUrl: doc.getElementById("base-url") as HTMLInputElement,
    pollSeconds: doc.getElementById("poll-seconds") as HTMLInputElement,
  };

  // volatile state: none of this survives a reload
  let rows: QueueRow[] = [];
  let entries: Record<string, string> = {};
  let moves: Record<string, RankMove> = {};
  let problems = new Set<string>();
  let selected: string | null = null;
  let submitting = false;
  let stale = false;
  let timer: ReturnType<typeof setInterval> | null = null;

  el.baseUrl.value = config.baseUrl;
  el.pollSeconds.value = String(config.pollSeconds);
  el.baseUrl.addEventListener("change", () => {
    config.baseUrl = el.baseUrl.value.replace(/\/+$/, "");
    client.setBaseUrl(config.baseUrl);
    saveConfig(storage, config);
    void refresh();
  });
  el.pollSeconds.addEventListener("change", () => {
    const value = Number(el.pollSeconds.value);
    if (Number.isFinite(value) && value >= 1) {
      config.pollSeconds = value;
      saveConfig(storage, config);
      restartPolling();
    }
  });

  function setConnected(ok: boolean): void {
    el.dot.classList.toggle("live", ok);
    el.dot.classList.toggle("dead", !ok);
  }

  function redraw(): void {
    renderQueue(el.queueBody, rows, entries, moves, problems, {
      onPriorityInput: (id, value) => {
        entries[id] = value;
        problems.delete(id);
        updateSubmitState();
      },
      onSelect: (id) => void selectInstance(id),
    });
    el.queueBody.classList.toggle("stale", stale);
    updateSubmitState();
  }

  function updateSubmitState(): void {
    const validation = validatePriorities(rows, entries);
    const discordant = validation.ok
      ? mismatchPreview(rows, parsedPriorities(rows, entries))
      : [];
    renderPreview(el.preview, discordant);
    el.submitBtn.disabled = submitting || rows.length === 0 || !validation.ok;
    if (submitting) {
      el.submitNote.textContent = "submitting…";
    } else if (rows.length === 0) {
      el.submitNote.textContent = "";
    } else if (validation.missing.length > 0) {
      el.submitNote.textContent = `enter a priority for every event (${validation.missing.length} left)`;
    } else if (validation.invalid.length > 0) {
      el.submitNote.textContent = "priorities must be positive integers";
    } else {
      el.submitNote.textContent = "";
    }
  }

  async function refresh(): Promise<void> {
    if (submitting) return;
    try {
      rows = await client.fetchQueue();
      stale = false;
      setConnected(true);
      renderBanner(el.banner, null, null);
      // drop entries for events that left the queue
      const live = new Set(rows.map((r) => r.instance_id));
      entries = Object.fromEntries(
        Object.entries(entries).filter(([id]) => live.has(id)),
      );
    } catch (err) {
      stale = true;
      setConnected(false);
      renderBanner(
        el.banner,
        `engine unreachable — showing stale data (${(err as Error).message})`,
        () => void refresh(),
      );
    }
    redraw();
  }

  async function submit(): Promise<void> {
    const validation = validatePriorities(rows, entries);
    if (!validation.ok) {
      problems = new Set([...validation.missing, ...validation.invalid]);
      redraw();
      return;
    }
    const before = rows.map((r) => r.instance_id);
    const body = buildTickBody(rows, parsedPriorities(rows, entries));
    submitting = true;
    updateSubmitState();
    try {
      await client.submitTick(body);
      entries = {};
      problems = new Set();
      submitting = false;
      await refresh();
      moves = rankChanges(
        before,
        rows.map((r) => r.instance_id),
      );
      redraw();
    } catch (err) {
      submitting = false;
      const busy =
        err instanceof ApiError && err.busy
          ? "engine is busy with another tick — try again shortly"
          : `submission failed: ${(err as Error).message}`;
      renderBanner(el.banner, busy, () => void submit());
      updateSubmitState();
    }
  }

  async function selectInstance(instanceId: string): Promise<void> {
    selected = instanceId;
    const row = rows.find((r) => r.instance_id === instanceId);
    if (!row) return;
    try {
      const [breakdown, model] = await Promise.all([
        client.deltaBreakdown(instanceId),
        client.model(row.type_id),
      ]);
      if (selected === instanceId) {
        renderDiagnostics(el.diagnostics, instanceId, row.flagged, breakdown, model);
      }
    } catch (err) {
      renderBanner(el.banner, `diagnostics failed: ${(err as Error).message}`, null);
    }
  }

  function restartPolling(): void {
    stopPolling();
    startPolling();
  }

  function startPolling(): void {
    if (timer !== null) return;
    timer = setInterval(() => void refresh(), config.pollSeconds * 1000);
  }

  function stopPolling(): void {
    if (timer !== null) {
      clearInterval(timer);
      timer = null;
    }
  }

  el.submitBtn.addEventListener("click", () => void submit());

  return {
    refresh,
    submit,
    selectInstance,
    get rows() {
      return rows;
    },
    get entries() {
      return entries;
    },
    startPolling,
    stopPolling,
  };
}

/** Boot against the real page; index.html calls this. */
export function start(): void {
  const app = createApp(document, fetch.bind(globalThis), localStorage);
  void app.refresh();
  app.startPolling();
}
