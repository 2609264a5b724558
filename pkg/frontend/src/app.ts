/**
 * Browser bootstrap: wires the pure views to the API client. The flow is
 * server-authoritative end to end; nothing here computes policy, weights,
 * or money, and no optimistic update ever shows a verification or
 * generation result before the server answered.
 */

import { GenerationBlocked, RefrainClient } from "./api.js";
import { SelectionBasket } from "./basket.js";
import type { IntendedUse, SelectionLevel, SongSummary, UserTrack } from "./types.js";
import {
  catalogueBrowser,
  feeQuoteBanner,
  functionAssignmentGrid,
  generationResult,
  ledgerView,
  retrievalPanel,
  searchSuggestions,
  segmentPicker,
  verificationBanner,
} from "./views.js";

const client = new RefrainClient("");
const basket = new SelectionBasket();

let blockNames: string[] = [];
let sessionId: string | null = null;
let crumbs: { node_id: string; label: string; kind: string; song_id: number | null; leaf: boolean }[] = [];
let userTrack: UserTrack | null = null;
let requestCounter = 0;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function currentLevel(): SelectionLevel {
  return (el<HTMLSelectElement>("level").value || "song") as SelectionLevel;
}

function currentUse(): IntendedUse {
  return (el<HTMLSelectElement>("intended-use").value || "private") as IntendedUse;
}

function requestOptions() {
  requestCounter += 1;
  return {
    requestId: `studio-${Date.now()}-${requestCounter}`,
    userId: el<HTMLInputElement>("user-id").value || "studio-user",
    level: currentLevel(),
    intendedUse: currentUse(),
    unspecifiedPolicy: el<HTMLSelectElement>("unspecified-policy").value as "unconditional" | "procedural",
    seed: Number(el<HTMLInputElement>("seed").value) || 0,
    userTrack: currentLevel() === "audio" || currentLevel() === "temporal" ? userTrack : null,
  };
}

async function addSong(songId: number): Promise<void> {
  const song: SongSummary = await client.song(songId);
  basket.add(song);
  renderBasket();
}

function renderBasket(): void {
  el("basket").innerHTML = functionAssignmentGrid(blockNames, basket.items);
  const pickers = basket.items
    .map((item) => (currentLevel() === "temporal" ? segmentPicker(item, userTrack?.frames.length ?? 0) : ""))
    .join("\n");
  el("segments").innerHTML = pickers;
  wireBasketControls();
}

function wireBasketControls(): void {
  document.querySelectorAll<HTMLInputElement>(".fn-flag").forEach((box) => {
    box.onchange = () => {
      basket.toggleBlock(Number(box.dataset.songId), box.dataset.block ?? "");
    };
  });
  document.querySelectorAll<HTMLInputElement>(".weight").forEach((slider) => {
    slider.oninput = () => {
      const item = basket.get(Number(slider.dataset.songId));
      if (item) item.weightPercent = Number(slider.value);
      const label = slider.parentElement?.querySelector(".pct");
      if (label) label.textContent = `${slider.value}%`;
    };
  });
  document.querySelectorAll<HTMLButtonElement>(".remove-ref").forEach((button) => {
    button.onclick = () => {
      basket.remove(Number(button.dataset.songId));
      renderBasket();
    };
  });
  document.querySelectorAll<HTMLDivElement>(".segment-picker").forEach((picker) => {
    const songId = Number(picker.dataset.songId);
    const update = () => {
      const start = Number(picker.querySelector<HTMLInputElement>(".seg-start")?.value ?? 0);
      const end = Number(picker.querySelector<HTMLInputElement>(".seg-end")?.value ?? 0);
      const item = basket.get(songId);
      if (item) item.segment = [start, end];
    };
    picker.querySelectorAll("input").forEach((input) => (input.onchange = update));
  });
}

async function openNode(nodeId: string): Promise<void> {
  const tree = await client.browse(nodeId);
  const known = crumbs.findIndex((crumb) => crumb.node_id === nodeId);
  if (known >= 0) crumbs = crumbs.slice(0, known + 1);
  el("browser").innerHTML = catalogueBrowser(nodeId, tree.children, crumbs);
  document.querySelectorAll<HTMLAnchorElement>(".open-node, .crumb").forEach((link) => {
    link.onclick = (event) => {
      event.preventDefault();
      const target = tree.children.find((child) => child.node_id === link.dataset.nodeId);
      if (target) crumbs.push(target);
      void openNode(link.dataset.nodeId ?? "root");
    };
  });
  document.querySelectorAll<HTMLButtonElement>(".pick-song").forEach((button) => {
    button.onclick = () => void addSong(Number(button.dataset.songId));
  });
}

function wireSearch(): void {
  const input = el<HTMLInputElement>("search-input");
  const list = el("search-suggestions");
  input.oninput = async () => {
    if (!input.value) {
      list.innerHTML = "";
      return;
    }
    const { results } = await client.search(input.value, 8);
    list.innerHTML = searchSuggestions(results);
    list.querySelectorAll<HTMLLIElement>(".suggestion").forEach((row) => {
      row.onclick = () => {
        void addSong(Number(row.dataset.songId));
        list.innerHTML = "";
        input.value = "";
      };
    });
  };
}

function wireRetrieval(): void {
  el<HTMLButtonElement>("retrieve-button").onclick = async () => {
    const text = el<HTMLInputElement>("prompt-input").value;
    if (!text) return;
    sessionId = await client.openSession(el<HTMLInputElement>("user-id").value || "studio-user", {
      kind: "free_text",
      text,
    });
    renderPage(await client.retrieve(sessionId));
  };
}

function renderPage(page: Awaited<ReturnType<RefrainClient["retrieve"]>>): void {
  const panel = el("retrieval");
  panel.innerHTML = retrievalPanel(page);
  panel.querySelectorAll<HTMLButtonElement>(".add-to-basket").forEach((button) => {
    button.onclick = () => void addSong(Number(button.dataset.songId));
  });
  const more = panel.querySelector<HTMLButtonElement>(".more-results");
  if (more)
    more.onclick = async () => {
      if (sessionId) renderPage(await client.refine(sessionId));
    };
}

function wireVerifyAndGenerate(): void {
  el<HTMLButtonElement>("verify-button").onclick = async () => {
    const banner = el("banner");
    try {
      const response = await client.verify(basket.toRequest(requestOptions()));
      banner.innerHTML =
        response.outcome.verdict === "cleared"
          ? feeQuoteBanner(response.fee_quote_minor, response.currency)
          : verificationBanner(response.outcome, response.alternatives ?? []);
      wireAlternativeButtons();
    } catch (error) {
      banner.innerHTML = `<div class="banner banner-error">${String(error)}</div>`;
    }
  };
  el<HTMLButtonElement>("generate-button").onclick = async () => {
    const banner = el("banner");
    const result = el("result");
    try {
      const response = await client.generate(basket.toRequest(requestOptions()), sessionId ?? undefined);
      banner.innerHTML = "";
      result.innerHTML = generationResult(response);
    } catch (error) {
      if (error instanceof GenerationBlocked) {
        banner.innerHTML = verificationBanner(error.denial.outcome, error.denial.alternatives);
        wireAlternativeButtons();
      } else {
        banner.innerHTML = `<div class="banner banner-error">${String(error)}</div>`;
      }
    }
  };
}

function wireAlternativeButtons(): void {
  el("banner")
    .querySelectorAll<HTMLButtonElement>(".add-to-basket")
    .forEach((button) => {
      button.onclick = () => {
        const blocked = button.closest<HTMLElement>(".alternatives")?.dataset.blocked;
        if (blocked) basket.remove(Number(blocked));
        void addSong(Number(button.dataset.songId));
      };
    });
}

function wireLedger(): void {
  el<HTMLButtonElement>("statement-button").onclick = async () => {
    const artist = el<HTMLInputElement>("artist-input").value;
    if (!artist) return;
    el("ledger").innerHTML = ledgerView(await client.statement(artist));
  };
}

function wireTrackUpload(): void {
  el<HTMLInputElement>("track-upload").onchange = async (event) => {
    const file = (event.target as HTMLInputElement).files?.[0];
    if (!file) return;
    userTrack = JSON.parse(await file.text()) as UserTrack;
    el("track-status").textContent = `loaded ${userTrack.frames.length} frames`;
    renderBasket();
  };
  el<HTMLSelectElement>("level").onchange = renderBasket;
}

async function boot(): Promise<void> {
  const health = await client.health();
  el("health").textContent = `${health.songs} songs, ${health.ledger_entries} ledger entries`;
  const root = await client.browse("root");
  const genre = root.children[0];
  if (genre) {
    crumbs = [genre];
    await openNode(genre.node_id);
  }
  // block names come from any song's manifest-facing vocabulary: use search
  const { results } = await client.search("a", 1);
  const first = results[0] ?? null;
  blockNames = first
    ? Object.keys((await fetchVocabularyProbe(first.song_id)) ?? {})
    : [];
  wireSearch();
  wireRetrieval();
  wireVerifyAndGenerate();
  wireLedger();
  wireTrackUpload();
  renderBasket();
}

/** The API exposes no vocabulary route; derive block names from a bundled
 * fixture track when present, otherwise fall back to the default set. */
async function fetchVocabularyProbe(_songId: number): Promise<Record<string, unknown> | null> {
  try {
    const response = await fetch("./fixtures/user-track.json");
    if (!response.ok) throw new Error();
    const track = (await response.json()) as UserTrack;
    return track.frames[0] ?? null;
  } catch {
    return Object.fromEntries(
      [
        "genre",
        "mood",
        "situation",
        "melody",
        "rhythm",
        "harmony",
        "timbre.guitar",
        "timbre.voice",
        "timbre.drums",
        "instrumentation",
      ].map((name) => [name, []])
    );
  }
}

document.addEventListener("DOMContentLoaded", () => {
  void boot();
});
