/**
 * Render functions: data in, HTML out. Keeping these pure (no DOM access)
 * lets the same code drive the browser and run under node-based tests;
 * app.ts owns event wiring.
 */

import type { BasketItem } from "./basket.js";
import type {
  AlternativeSetWire,
  GenerateResponse,
  ManifestWire,
  OutcomeWire,
  RankPage,
  SearchResult,
  SongSummary,
  StatementWire,
  TreeNode,
} from "./types.js";

export function escapeHtml(text: string): string {
  return text
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}

export function formatMinor(amountMinor: number, currency: string): string {
  const sign = amountMinor < 0 ? "-" : "";
  const cents = Math.abs(amountMinor);
  return `${sign}${Math.floor(cents / 100)}.${String(cents % 100).padStart(2, "0")} ${currency}`;
}

export function songCard(song: SongSummary, extra = ""): string {
  const tags = song.tags.map((tag) => `<span class="tag">${escapeHtml(tag)}</span>`).join(" ");
  return `
  <div class="song-card" data-song-id="${song.song_id}">
    <div class="song-title">${escapeHtml(song.title)}</div>
    <div class="song-meta">${escapeHtml(song.artist_name)} - ${escapeHtml(song.album)} (${song.release_year})</div>
    <div class="song-tags">${tags}</div>
    ${extra}
    <button class="add-to-basket" data-song-id="${song.song_id}">Add reference</button>
  </div>`;
}

export function catalogueBrowser(nodeId: string, children: TreeNode[], crumbs: TreeNode[]): string {
  const trail = crumbs
    .map((node) => `<a href="#" class="crumb" data-node-id="${escapeHtml(node.node_id)}">${escapeHtml(node.label)}</a>`)
    .join(" / ");
  const rows = children
    .map((node) =>
      node.leaf
        ? `<li class="leaf"><button class="pick-song" data-song-id="${node.song_id}">${escapeHtml(node.label)}</button></li>`
        : `<li class="branch"><a href="#" class="open-node" data-node-id="${escapeHtml(node.node_id)}">${escapeHtml(node.label)}</a> <span class="kind">${escapeHtml(node.kind)}</span></li>`
    )
    .join("\n");
  return `<nav class="crumbs">${trail || "catalogue"}</nav><ul class="tree" data-node-id="${escapeHtml(nodeId)}">${rows}</ul>`;
}

export function searchSuggestions(results: SearchResult[]): string {
  return results
    .map(
      (result) =>
        `<li class="suggestion" data-song-id="${result.song_id}">
          <span class="s-title">${escapeHtml(result.title)}</span>
          <span class="s-field">${escapeHtml(result.match_field)}</span>
          <span class="s-artist">${escapeHtml(result.artist_name)}</span>
        </li>`
    )
    .join("\n");
}

export function retrievalPanel(page: RankPage): string {
  if (page.signal === "prompt-uninformative") {
    return `<p class="signal">The prompt carries no usable terms; try different words.</p>`;
  }
  const cards = page.items
    .map((item) => songCard(item, `<div class="score">relevance ${item.score.toFixed(3)}</div>`))
    .join("\n");
  const exhausted = page.signal === "exhausted";
  return `
  <div class="retrieval-results">${cards || '<p class="signal">No more candidates.</p>'}</div>
  <button class="more-results" ${exhausted ? "disabled" : ""}>More candidates</button>`;
}

export function functionAssignmentGrid(blocks: string[], items: BasketItem[]): string {
  const header = ["<th>reference</th>", ...blocks.map((b) => `<th>${escapeHtml(b)}</th>`), "<th>weight</th>"].join("");
  const rows = items
    .map((item) => {
      const cells = blocks
        .map(
          (block) =>
            `<td><input type="checkbox" class="fn-flag" data-song-id="${item.song.song_id}"
              data-block="${escapeHtml(block)}" ${item.functionBlocks.has(block) ? "checked" : ""}></td>`
        )
        .join("");
      return `<tr>
        <td class="ref-name">${escapeHtml(item.song.title)}
          <button class="remove-ref" data-song-id="${item.song.song_id}">x</button></td>
        ${cells}
        <td><input type="range" class="weight" min="1" max="100" value="${item.weightPercent}"
          data-song-id="${item.song.song_id}"> <span class="pct">${item.weightPercent}%</span></td>
      </tr>`;
    })
    .join("\n");
  return `<table class="fn-grid"><thead><tr>${header}</tr></thead><tbody>${rows}</tbody></table>`;
}

export function segmentPicker(item: BasketItem, maxFrames: number): string {
  const [start, end] = item.segment ?? [0, maxFrames];
  return `
  <div class="segment-picker" data-song-id="${item.song.song_id}">
    <label>${escapeHtml(item.song.title)} frames
      <input type="number" class="seg-start" min="0" max="${maxFrames - 1}" value="${start}">
      to
      <input type="number" class="seg-end" min="1" max="${maxFrames}" value="${end}">
      (end exclusive)
    </label>
  </div>`;
}

const CHECK_LABELS: Record<string, string> = {
  usage: "usage permission",
  distribution: "distribution policy",
};

export function verificationBanner(outcome: OutcomeWire, alternatives: AlternativeSetWire[]): string {
  const failures: string[] = [];
  for (const row of outcome.per_selection) {
    for (const kind of ["usage", "distribution"] as const) {
      const check = row[kind];
      if (!check.permitted) {
        const cell =
          kind === "usage" ? `${outcome.level}-level ${CHECK_LABELS[kind]}` : `${outcome.intended_use} ${CHECK_LABELS[kind]}`;
        failures.push(
          `<li class="failure" data-song-id="${row.song_id}">song ${row.song_id}: ${escapeHtml(cell)} denied (${escapeHtml(check.reason ?? "")})</li>`
        );
      }
    }
  }
  const altBlocks = alternatives
    .map((set) => {
      const cards = set.candidates.map((candidate) => songCard(candidate)).join("\n");
      return `<div class="alternatives" data-blocked="${set.blocked_song_id}">
        <h4>Compliant alternatives for song ${set.blocked_song_id}</h4>
        ${cards || `<p class="signal">No compliant alternative in the catalogue (${escapeHtml(set.signal ?? "")}).</p>`}
      </div>`;
    })
    .join("\n");
  return `
  <div class="banner banner-blocked" role="alert">
    <h3>Request blocked</h3>
    <ul class="failures">${failures.join("\n")}</ul>
    ${altBlocks}
  </div>`;
}

export function feeQuoteBanner(feeMinor: number, currency: string): string {
  return `<div class="banner banner-cleared">Cleared. Generating will cost ${formatMinor(feeMinor, currency)}.</div>`;
}

export function manifestViewer(manifest: ManifestWire, contributionWeights: Record<string, number>): string {
  const rows = manifest.assignments
    .map((assignment) => {
      const contributors = assignment.contributors
        .map(
          (contributor) =>
            `<span class="chip ${contributor.source}">song ${contributor.song_id}: ${(contributor.weight * 100).toFixed(1)}%</span>`
        )
        .join(" ");
      const segment = assignment.segment ? ` frames [${assignment.segment[0]}, ${assignment.segment[1]})` : "";
      return `<tr>
        <td>${escapeHtml(assignment.block)}</td>
        <td class="origin-${assignment.origin}">${assignment.origin.replace("_", " ")}${segment}</td>
        <td>${contributors}</td>
      </tr>`;
    })
    .join("\n");
  const totals = Object.entries(contributionWeights)
    .map(
      ([songId, weight]) =>
        `<li class="weight-line" data-song-id="${songId}">song ${songId}: <span class="weight-pct">${(weight * 100).toFixed(1)}</span>%</li>`
    )
    .join("\n");
  const warnings = manifest.warnings.map((warning) => `<li>${escapeHtml(warning)}</li>`).join("");
  return `
  <div class="manifest">
    <h3>Provenance</h3>
    <p>snapshot ${escapeHtml(manifest.snapshot_id)} - seed ${manifest.seed} -
       attributed ${(manifest.attributed_fraction * 100).toFixed(0)}% of block importance</p>
    <table class="manifest-table"><thead><tr><th>block</th><th>origin</th><th>contributors</th></tr></thead>
    <tbody>${rows}</tbody></table>
    <h4>Overall contribution</h4>
    <ul class="weights">${totals}</ul>
    ${warnings ? `<ul class="warnings">${warnings}</ul>` : ""}
  </div>`;
}

export function generationResult(response: GenerateResponse): string {
  const payouts = Object.entries(response.payouts)
    .map(([artist, amount]) => `<li>${escapeHtml(artist)}: ${formatMinor(amount, response.currency)}</li>`)
    .join("\n");
  return `
  <div class="generation-result" data-output-id="${escapeHtml(response.output_id)}">
    <h3>Output ${escapeHtml(response.output_id.slice(0, 16))}...</h3>
    <p>fee ${formatMinor(response.fee_minor, response.currency)} - ledger entry #${response.entry_index}</p>
    <ul class="payouts">${payouts}</ul>
    <p>pool ${formatMinor(response.tta_pool_delta_minor, response.currency)} -
       platform ${formatMinor(response.platform_delta_minor, response.currency)}</p>
    ${manifestViewer(response.manifest, response.contribution_weights)}
  </div>`;
}

export function ledgerView(statement: StatementWire): string {
  const rows = statement.lines
    .map(
      (line) => `<tr>
      <td>#${line.entry_index}</td>
      <td>${line.song_id === "tta-pool" ? "flat-rate pool" : `song ${line.song_id}`}</td>
      <td>${line.weight.toFixed(4)}</td>
      <td>${formatMinor(line.amount_minor, statement.currency)}</td>
    </tr>`
    )
    .join("\n");
  return `
  <div class="ledger-view">
    <h3>Statement for ${escapeHtml(statement.artist_id)}</h3>
    <table class="statement"><thead><tr><th>entry</th><th>source</th><th>weight</th><th>amount</th></tr></thead>
    <tbody>${rows || '<tr><td colspan="4">No credited entries in this period.</td></tr>'}</tbody></table>
    <p class="total">Total ${formatMinor(statement.total_minor, statement.currency)}</p>
  </div>`;
}
