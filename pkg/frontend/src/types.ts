/**
 * Wire types mirroring the service API. The UI never computes verification,
 * attribution, or payout values itself; every displayed number originates
 * from one of these response shapes.
 */

export type SelectionLevel = "song" | "parameter" | "audio" | "temporal";
export type IntendedUse = "private" | "non_commercial" | "commercial";
export type UnspecifiedPolicy = "unconditional" | "procedural";

export interface SongSummary {
  song_id: number;
  title: string;
  artist_id: string;
  artist_name: string;
  album: string;
  genre_path: string[];
  tags: string[];
  release_year: number;
  num_frames: number;
}

export interface SearchResult extends SongSummary {
  match_field: string;
}

export interface TreeNode {
  node_id: string;
  label: string;
  kind: string;
  song_id: number | null;
  leaf: boolean;
}

export interface TreeResponse {
  node_id: string;
  children: TreeNode[];
}

export interface RankedSong extends SongSummary {
  score: number;
}

export interface RankPage {
  signal: string | null;
  items: RankedSong[];
}

export interface UserTrack {
  frame_duration_ms: number;
  frames: Record<string, number[]>[];
}

export interface SelectionWire {
  song_id: number;
  function_blocks: string[];
  weight: number;
  segment: [number, number] | null;
}

export interface GenerationRequestWire {
  request_id: string;
  user_id: string;
  level: SelectionLevel;
  intended_use: IntendedUse;
  unspecified_policy: UnspecifiedPolicy;
  seed: number;
  selections: SelectionWire[];
  user_track: UserTrack | null;
}

export interface CheckWire {
  permitted: boolean;
  reason: string | null;
}

export interface SelectionCheckWire {
  song_id: number;
  usage: CheckWire;
  distribution: CheckWire;
}

export interface OutcomeWire {
  request_id: string;
  snapshot_id: string;
  level: SelectionLevel;
  intended_use: IntendedUse;
  verdict: "cleared" | "blocked";
  per_selection: SelectionCheckWire[];
}

export interface AlternativeSetWire {
  blocked_song_id: number;
  signal: string | null;
  candidates: (SongSummary & { score: number })[];
}

export interface VerifyResponse {
  outcome: OutcomeWire;
  request_digest: string;
  fee_quote_minor: number;
  currency: string;
  alternatives?: AlternativeSetWire[];
}

export interface ContributorWire {
  song_id: number;
  weight: number;
  source: "user" | "procedural";
}

export interface AssignmentWire {
  block: string;
  origin: "attributed" | "unattributed" | "user_material";
  importance: number;
  contributors: ContributorWire[];
  segment: [number, number] | null;
}

export interface ManifestWire {
  request_id: string;
  snapshot_id: string;
  seed: number;
  level: SelectionLevel;
  intended_use: IntendedUse;
  assignments: AssignmentWire[];
  attributed_fraction: number;
  engine_version: string;
  blend_mode: string;
  blend_alpha: number;
  warnings: string[];
}

export interface GenerateResponse {
  verdict: "cleared";
  outcome: OutcomeWire;
  request_digest: string;
  output_id: string;
  manifest: ManifestWire;
  contribution_weights: Record<string, number>;
  fee_minor: number;
  payouts: Record<string, number>;
  tta_pool_delta_minor: number;
  platform_delta_minor: number;
  currency: string;
  entry_index: number;
}

export interface DenialDetail {
  verdict: "blocked";
  outcome: OutcomeWire;
  request_digest: string;
  entry_index: number;
  alternatives: AlternativeSetWire[];
}

export interface StatementLineWire {
  entry_index: number;
  song_id: number | "tta-pool";
  weight: number;
  amount_minor: number;
}

export interface StatementWire {
  artist_id: string;
  period: { start_us: number | null; end_us: number | null };
  lines: StatementLineWire[];
  total_minor: number;
  currency: string;
}
