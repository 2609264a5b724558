"""Report rendering: delimited statement exports plus matplotlib figures.

Every report path that writes delimited output also renders a figure next
to it, so operators get both the machine-readable rows and a quick visual
sanity check of where the money (or the attribution) went.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .generation import ORIGIN_ATTRIBUTED, ProvenanceManifest, contribution_weights
from .ledger import TTA_POOL_LINE, CompensationStatement, Ledger, format_minor

STATEMENT_COLUMNS = ("entry_index", "song_id", "weight", "amount_minor_units", "currency")


def statement_csv(statement: CompensationStatement) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(STATEMENT_COLUMNS)
    for line in statement.lines:
        writer.writerow(
            [
                line.entry_index,
                line.song_id if line.song_id is not None else TTA_POOL_LINE,
                f"{line.weight:.9f}",
                line.amount_minor,
                statement.currency,
            ]
        )
    return buffer.getvalue()


def write_statement_csv(statement: CompensationStatement, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(statement_csv(statement), encoding="utf-8")
    return path


def statement_figure(statement: CompensationStatement, path: str | Path) -> Path:
    """Horizontal bars, one per statement line, labelled by entry and song."""
    path = Path(path)
    labels = [
        f"#{line.entry_index} " + (f"song {line.song_id}" if line.song_id is not None else TTA_POOL_LINE)
        for line in statement.lines
    ] or ["(no entries)"]
    amounts = [line.amount_minor / 100 for line in statement.lines] or [0.0]
    fig, ax = plt.subplots(figsize=(8, max(2.0, 0.4 * len(labels) + 1.2)))
    ax.barh(range(len(labels)), amounts, color="#4c72b0")
    ax.set_yticks(range(len(labels)))
    ax.set_yticklabels(labels, fontsize=8)
    ax.invert_yaxis()
    ax.set_xlabel(f"amount ({statement.currency})")
    ax.set_title(
        f"Statement for {statement.artist_id}: {format_minor(statement.total_minor, statement.currency)}"
    )
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def manifest_figure(manifest: ProvenanceManifest, path: str | Path) -> Path:
    """Stacked per-block contributor weights, coloured by reference song."""
    path = Path(path)
    blocks = [a.block for a in manifest.assignments]
    song_ids = sorted(manifest.song_ids())
    colors = plt.get_cmap("tab10")
    fig, (ax, ax2) = plt.subplots(
        2, 1, figsize=(max(6.0, 1.0 * len(blocks)), 6), height_ratios=[3, 1]
    )
    for i, assignment in enumerate(manifest.assignments):
        if assignment.origin == ORIGIN_ATTRIBUTED:
            bottom = 0.0
            for contributor in assignment.contributors:
                ax.bar(
                    i,
                    contributor.weight,
                    bottom=bottom,
                    color=colors(song_ids.index(contributor.song_id) % 10),
                    edgecolor="white",
                )
                bottom += contributor.weight
        else:
            ax.bar(i, 1.0, color="#d9d9d9", hatch="//" if assignment.origin == "unattributed" else "..")
    ax.set_xticks(range(len(blocks)))
    ax.set_xticklabels(blocks, rotation=45, ha="right", fontsize=8)
    ax.set_ylabel("contributor weight")
    ax.set_title(f"Provenance by block (attributed fraction {manifest.attributed_fraction:.0%})")
    handles = [plt.Rectangle((0, 0), 1, 1, color=colors(i % 10)) for i in range(len(song_ids))]
    if handles:
        ax.legend(handles, [f"song {song_id}" for song_id in song_ids], fontsize=8, loc="upper right")

    weights = contribution_weights(manifest)
    if weights:
        ax2.bar(
            range(len(weights)),
            list(weights.values()),
            color=[colors(song_ids.index(song_id) % 10) for song_id in weights],
        )
        ax2.set_xticks(range(len(weights)))
        ax2.set_xticklabels([f"song {song_id}" for song_id in weights], fontsize=8)
    ax2.set_ylabel("overall share")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def ledger_csv(ledger: Ledger) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(("entry_index", "kind", "request_id", "fee_minor", "tta_delta", "platform_delta", "entry_hash"))
    for entry in ledger.entries:
        writer.writerow(
            (
                entry.entry_index,
                entry.kind,
                entry.request_id,
                entry.fee_minor,
                entry.tta_pool_delta_minor,
                entry.platform_delta_minor,
                entry.entry_hash,
            )
        )
    return buffer.getvalue()
