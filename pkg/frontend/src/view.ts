// DOM rendering for the workbench. The view is a pure function of the store
// (re-rendered on every store change) plus one bit of local UI state: which
// palette part is currently picked up. Gestures are forwarded to handlers;
// nothing here judges correctness.

import type { OperatorMessage } from "./api";
import { WorkbenchStore } from "./state";

export interface ViewHandlers {
  placePart(part: string, zone: string): void;
  removePart(part: string, zone: string): void;
  showConnection(connection: string, leadingProb: number, auxProb: number): void;
  timelineHref(sessionId: string): string;
}

export function describeMessage(store: WorkbenchStore, message: OperatorMessage): string {
  const payload = message.payload as Record<string, string | number>;
  const part = (id: unknown) => displayName(store, "parts", id);
  const connection = (id: unknown) => displayName(store, "connections", id);
  switch (message.type) {
    case "missing_detail":
      return `Missing: ${part(payload.part)} in ${payload.zone}`;
    case "extra_detail":
      return `Extra: ${part(payload.part)} in ${payload.zone}`;
    case "wrong_connection":
      return `Wrong connection: saw ${connection(payload.seen)}, ` +
        `expected ${connection(payload.expected)}`;
    case "proceed_next_stage":
      return `Stage complete. Proceed to step ${Number(payload.new_stage_index) + 1}`;
    case "stage_instruction":
      return String(payload.text);
    default:
      return `${message.type}: ${JSON.stringify(payload)}`;
  }
}

function displayName(store: WorkbenchStore, catalog: "parts" | "connections",
                     id: unknown): string {
  const entry = store.plan?.[catalog].find((item) => item.id === id);
  return entry ? entry.display_name : String(id);
}

export class WorkbenchView {
  selectedPart: string | null = null;

  constructor(
    readonly root: HTMLElement,
    readonly store: WorkbenchStore,
    readonly handlers: ViewHandlers,
  ) {
    store.subscribe(() => this.render());
    this.render();
  }

  render(): void {
    const { store, root } = this;
    root.textContent = "";
    if (store.connectionError) {
      root.appendChild(el("div", "error-banner", `Connection problem: ${store.connectionError}`));
    }
    if (!store.plan || !store.snapshot) {
      root.appendChild(el("div", "placeholder", "Not connected"));
      return;
    }
    root.appendChild(this.renderProgress());
    root.appendChild(this.renderBanner());
    root.appendChild(this.renderBoard());
    if (store.completed) {
      root.appendChild(this.renderCompletion());
    } else {
      root.appendChild(this.renderPalette());
      root.appendChild(this.renderConnectionPanel());
    }
    root.appendChild(this.renderFeed());
  }

  private renderProgress(): HTMLElement {
    const { store } = this;
    const wrapper = el("div", "progress");
    const label = store.completed
      ? `assembly complete (${store.stageCount} stages)`
      : `stage ${store.currentStageIndex + 1} of ${store.stageCount}`;
    wrapper.appendChild(el("span", "progress-label", label));
    const track = el("div", "progress-track");
    const fill = el("div", "progress-fill");
    const fraction = store.stageCount
      ? store.currentStageIndex / store.stageCount
      : 0;
    fill.style.width = `${Math.round(fraction * 100)}%`;
    track.appendChild(fill);
    wrapper.appendChild(track);
    return wrapper;
  }

  private renderBanner(): HTMLElement {
    const { store } = this;
    const banner = el("div", "banner");
    banner.appendChild(el("div", "instruction",
      store.instruction ?? "All stages complete"));
    const verdict = store.lastVerdict;
    if (verdict) {
      const node = el("div", `verdict verdict-${verdict.type}`,
        describeMessage(store, verdict));
      banner.appendChild(node);
    }
    return banner;
  }

  private renderBoard(): HTMLElement {
    const { store, handlers } = this;
    const board = el("div", "board");
    for (const zone of store.plan!.zones) {
      const div = el("div", zone.is_assembly_zone ? "zone assembly-zone" : "zone");
      div.dataset.zoneId = zone.id;
      div.style.left = `${zone.x * 100}%`;
      div.style.top = `${zone.y * 100}%`;
      div.style.width = `${zone.w * 100}%`;
      div.style.height = `${zone.h * 100}%`;
      div.appendChild(el("span", "zone-label",
        zone.is_assembly_zone ? `${zone.id} (assembly)` : zone.id));
      for (const { part, count } of store.occupancyFor(zone.id)) {
        const chip = el("span", "chip",
          count > 1 ? `${displayName(store, "parts", part)} x${count}`
                    : displayName(store, "parts", part));
        chip.dataset.partId = part;
        chip.title = "click to take back";
        chip.addEventListener("click", (event) => {
          event.stopPropagation();
          handlers.removePart(part, zone.id);
        });
        div.appendChild(chip);
      }
      div.addEventListener("click", () => {
        if (this.selectedPart) {
          handlers.placePart(this.selectedPart, zone.id);
          this.selectedPart = null;
          this.render();
        }
      });
      div.addEventListener("dragover", (event) => event.preventDefault());
      div.addEventListener("drop", (event) => {
        event.preventDefault();
        const part = (event as DragEvent).dataTransfer?.getData("text/part-id");
        if (part) handlers.placePart(part, zone.id);
      });
      board.appendChild(div);
    }
    return board;
  }

  private renderPalette(): HTMLElement {
    const { store } = this;
    const palette = el("div", "palette");
    palette.appendChild(el("span", "palette-label", "parts:"));
    for (const part of store.plan!.parts) {
      const button = el("button", "part-button", part.display_name);
      button.dataset.partId = part.id;
      button.draggable = true;
      if (this.selectedPart === part.id) button.classList.add("selected");
      button.addEventListener("click", () => {
        this.selectedPart = this.selectedPart === part.id ? null : part.id;
        this.render();
      });
      button.addEventListener("dragstart", (event) => {
        (event as DragEvent).dataTransfer?.setData("text/part-id", part.id);
      });
      palette.appendChild(button);
    }
    if (this.selectedPart) {
      palette.appendChild(el("span", "palette-hint", "now click a zone to place it"));
    }
    return palette;
  }

  private renderConnectionPanel(): HTMLElement {
    const { store, handlers } = this;
    const panel = el("div", "connection-panel");
    panel.appendChild(el("span", "panel-label", "demonstrate:"));

    const select = document.createElement("select");
    select.className = "connection-select";
    for (const connection of store.plan!.connections) {
      const option = document.createElement("option");
      option.value = connection.id;
      option.textContent = connection.display_name;
      select.appendChild(option);
    }
    panel.appendChild(select);

    const leading = slider("leading camera confidence");
    const aux = slider("auxiliary camera confidence");
    panel.appendChild(leading.wrapper);
    panel.appendChild(aux.wrapper);

    const button = el("button", "show-button", "Show to cameras");
    button.addEventListener("click", () => {
      handlers.showConnection(select.value, Number(leading.input.value),
                              Number(aux.input.value));
    });
    panel.appendChild(button);
    return panel;
  }

  private renderCompletion(): HTMLElement {
    const { store, handlers } = this;
    const panel = el("div", "completion");
    panel.appendChild(el("div", "completion-title", "Assembly recorded."));
    const link = document.createElement("a");
    link.className = "timeline-link";
    link.textContent = "Download stage timeline (CSV)";
    link.href = handlers.timelineHref(store.snapshot!.session_id);
    link.setAttribute("download", `${store.snapshot!.session_id}-timeline.csv`);
    panel.appendChild(link);
    return panel;
  }

  private renderFeed(): HTMLElement {
    const { store } = this;
    const feed = el("div", "feed");
    feed.appendChild(el("div", "feed-title", "operator feedback"));
    const list = el("ul", "feed-list");
    for (const entry of store.feed.slice(-30).reverse()) {
      const item = el("li", `feed-item feed-${entry.message.type}`,
        `[${(entry.message.timestamp_ms / 1000).toFixed(1)}s] ` +
        describeMessage(store, entry.message));
      list.appendChild(item);
    }
    feed.appendChild(list);
    return feed;
  }
}

function el(tag: string, className: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function slider(label: string): { wrapper: HTMLElement; input: HTMLInputElement } {
  const wrapper = el("label", "slider");
  wrapper.appendChild(el("span", "slider-label", label));
  const input = document.createElement("input");
  input.type = "range";
  input.min = "0";
  input.max = "1";
  input.step = "0.05";
  input.value = "0.8";
  wrapper.appendChild(input);
  const value = el("span", "slider-value", input.value);
  input.addEventListener("input", () => {
    value.textContent = input.value;
  });
  wrapper.appendChild(value);
  return { wrapper, input };
}
