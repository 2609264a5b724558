import { describe, expect, it } from "vitest";

import { SelectionBasket } from "../src/basket.js";
import type { ManifestWire, OutcomeWire, SongSummary, StatementWire } from "../src/types.js";
import {
  escapeHtml,
  formatMinor,
  functionAssignmentGrid,
  ledgerView,
  manifestViewer,
  retrievalPanel,
  verificationBanner,
} from "../src/views.js";

function song(songId: number): SongSummary {
  return {
    song_id: songId,
    title: `Song <${songId}>`,
    artist_id: `a-${songId}`,
    artist_name: "Artist & Co",
    album: "LP",
    genre_path: ["rock"],
    tags: ["rock"],
    release_year: 2001,
    num_frames: 24,
  };
}

describe("verificationBanner", () => {
  const outcome: OutcomeWire = {
    request_id: "r",
    snapshot_id: "snap-1",
    level: "parameter",
    intended_use: "private",
    verdict: "blocked",
    per_selection: [
      {
        song_id: 17193,
        usage: { permitted: false, reason: "not-granted" },
        distribution: { permitted: true, reason: null },
      },
    ],
  };

  it("names the failing cell and renders alternatives", () => {
    const html = verificationBanner(outcome, [
      { blocked_song_id: 17193, signal: null, candidates: [{ ...song(17189), score: 0.4 }] },
    ]);
    expect(html).toContain("song 17193: parameter-level usage permission denied (not-granted)");
    expect(html).toContain("Compliant alternatives for song 17193");
    expect(html).toContain('data-song-id="17189"');
    expect(html).toContain('role="alert"');
  });

  it("renders the no-alternative signal when the list is empty", () => {
    const html = verificationBanner(outcome, [
      { blocked_song_id: 17193, signal: "no-compliant-alternative", candidates: [] },
    ]);
    expect(html).toContain("no-compliant-alternative");
  });
});

describe("manifestViewer", () => {
  const manifest: ManifestWire = {
    request_id: "r",
    snapshot_id: "snap-1",
    seed: 11,
    level: "parameter",
    intended_use: "non_commercial",
    assignments: [
      {
        block: "timbre.guitar",
        origin: "attributed",
        importance: 1,
        contributors: [{ song_id: 17189, weight: 1, source: "user" }],
        segment: null,
      },
      {
        block: "timbre.voice",
        origin: "attributed",
        importance: 1,
        contributors: [
          { song_id: 17189, weight: 0.5, source: "user" },
          { song_id: 17194, weight: 0.5, source: "user" },
        ],
        segment: null,
      },
      { block: "melody", origin: "unattributed", importance: 1, contributors: [], segment: null },
    ],
    attributed_fraction: 0.2,
    engine_version: "x",
    blend_mode: "replace",
    blend_alpha: 1,
    warnings: [],
  };

  it("displays contribution weights that sum to 100% within 0.1", () => {
    const html = manifestViewer(manifest, { "17189": 0.75, "17194": 0.25 });
    const percents = [...html.matchAll(/class="weight-pct">([\d.]+)</g)].map((m) => Number(m[1]));
    expect(percents).toHaveLength(2);
    const total = percents.reduce((a, b) => a + b, 0);
    expect(Math.abs(total - 100)).toBeLessThanOrEqual(0.1);
    expect(html).toContain("timbre.guitar");
    expect(html).toContain("unattributed");
  });
});

describe("misc views", () => {
  it("escapes user-controlled text", () => {
    expect(escapeHtml("<b>&\"")).toBe("&lt;b&gt;&amp;&quot;");
    const grid = functionAssignmentGrid(["melody"], (() => {
      const basket = new SelectionBasket();
      basket.add(song(5));
      return basket.items;
    })());
    expect(grid).toContain("Song &lt;5&gt;");
  });

  it("formats minor units", () => {
    expect(formatMinor(1313, "CR")).toBe("13.13 CR");
    expect(formatMinor(-50, "CR")).toBe("-0.50 CR");
  });

  it("renders retrieval pages and signals", () => {
    const page = { signal: null, items: [{ ...song(7), score: 0.91 }] };
    expect(retrievalPanel(page)).toContain("relevance 0.910");
    expect(retrievalPanel({ signal: "prompt-uninformative", items: [] })).toContain("no usable terms");
    expect(retrievalPanel({ signal: "exhausted", items: [] })).toContain("disabled");
  });

  it("renders statements including the pool line", () => {
    const statement: StatementWire = {
      artist_id: "a-17189",
      period: { start_us: null, end_us: null },
      lines: [
        { entry_index: 0, song_id: 17189, weight: 0.75, amount_minor: 53 },
        { entry_index: 4, song_id: "tta-pool", weight: 0, amount_minor: 250 },
      ],
      total_minor: 303,
      currency: "CR",
    };
    const html = ledgerView(statement);
    expect(html).toContain("song 17189");
    expect(html).toContain("flat-rate pool");
    expect(html).toContain("Total 3.03 CR");
  });
});
