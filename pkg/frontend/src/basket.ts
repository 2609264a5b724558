/**
 * The selection basket: what the user has picked and how each pick should
 * function in the generation. Weights are edited as percent sliders; the
 * serialized request carries weight = percent / 100 and the server
 * re-normalizes authoritatively. Serialization is lossless by construction:
 * the wire form below is exactly the canonical request document the server
 * digests, so `canonicalDigest(basket.toRequest(...))` must equal the
 * `request_digest` the server records.
 */

import { canonicalDigest } from "./canonical.js";
import type {
  GenerationRequestWire,
  IntendedUse,
  SelectionLevel,
  SelectionWire,
  SongSummary,
  UnspecifiedPolicy,
  UserTrack,
} from "./types.js";

export interface BasketItem {
  song: SongSummary;
  functionBlocks: Set<string>;
  weightPercent: number;
  segment: [number, number] | null;
}

export interface RequestOptions {
  requestId: string;
  userId: string;
  level: SelectionLevel;
  intendedUse: IntendedUse;
  unspecifiedPolicy?: UnspecifiedPolicy;
  seed?: number;
  userTrack?: UserTrack | null;
}

export class SelectionBasket {
  readonly items: BasketItem[] = [];

  add(song: SongSummary): BasketItem {
    const existing = this.items.find((item) => item.song.song_id === song.song_id);
    if (existing) return existing;
    const item: BasketItem = { song, functionBlocks: new Set(), weightPercent: 100, segment: null };
    this.items.push(item);
    return item;
  }

  remove(songId: number): void {
    const index = this.items.findIndex((item) => item.song.song_id === songId);
    if (index >= 0) this.items.splice(index, 1);
  }

  get(songId: number): BasketItem | undefined {
    return this.items.find((item) => item.song.song_id === songId);
  }

  clear(): void {
    this.items.length = 0;
  }

  toggleBlock(songId: number, block: string): void {
    const item = this.get(songId);
    if (!item) return;
    if (item.functionBlocks.has(block)) item.functionBlocks.delete(block);
    else item.functionBlocks.add(block);
  }

  /** Display-only normalization; the server re-normalizes per block. */
  displayShares(): Map<number, number> {
    const total = this.items.reduce((sum, item) => sum + item.weightPercent, 0);
    return new Map(
      this.items.map((item) => [item.song.song_id, total > 0 ? (100 * item.weightPercent) / total : 0])
    );
  }

  toRequest(options: RequestOptions): GenerationRequestWire {
    const selections: SelectionWire[] = this.items.map((item) => ({
      song_id: item.song.song_id,
      function_blocks: [...item.functionBlocks].sort(),
      weight: item.weightPercent / 100,
      segment: item.segment === null ? null : [item.segment[0], item.segment[1]],
    }));
    return {
      request_id: options.requestId,
      user_id: options.userId,
      level: options.level,
      intended_use: options.intendedUse,
      unspecified_policy: options.unspecifiedPolicy ?? "unconditional",
      seed: options.seed ?? 0,
      selections,
      user_track: options.userTrack ?? null,
    };
  }

  /** SHA-256 over the canonical request form; comparable with the server's. */
  requestDigest(options: RequestOptions): Promise<string> {
    return canonicalDigest(this.toRequest(options));
  }
}
