"""Operator CLI: ingest, consent admin, serve, ledger audit, statements, demo.

Exit codes: 0 success, 1 validation failure, 2 I/O failure. Data goes to
stdout, diagnostics to stderr.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import fixtures
from .catalogue import Catalogue
from .config import ServiceConfig, load_config
from .consent import ConsentRegistry, load_consent_lines
from .errors import ConfigurationError, RefrainError
from .ledger import Ledger, format_minor
from .reporting import manifest_figure, statement_csv, statement_figure, write_statement_csv
from .service import AppState, orchestrate_generate

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2


def _fail(message: str, code: int) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _load_config(path: str | None) -> ServiceConfig:
    try:
        return load_config(path)
    except FileNotFoundError as exc:
        _fail(str(exc), EXIT_IO)
    except ConfigurationError as exc:
        _fail(str(exc), EXIT_VALIDATION)
    raise AssertionError("unreachable")


@click.group()
@click.option("--config", "config_path", type=click.Path(), default=None, help="Path to a key=value config file.")
@click.pass_context
def main(ctx: click.Context, config_path: str | None) -> None:
    """Attribution-first generation service: operator commands."""
    ctx.obj = _load_config(config_path)


@main.command()
@click.option("--catalogue", "catalogue_path", type=click.Path(), required=False)
@click.pass_obj
def ingest(config: ServiceConfig, catalogue_path: str | None) -> None:
    """Validate and load a catalogue JSONL file, reporting rejections."""
    path = catalogue_path or config.catalogue_path
    if not path:
        _fail("no catalogue path (use --catalogue or set catalogue_path)", EXIT_VALIDATION)
    catalogue = Catalogue(config.block_vocabulary, config.hierarchies)
    try:
        report = catalogue.ingest(path)
    except OSError as exc:
        _fail(str(exc), EXIT_IO)
        return
    for rejection in report.rejections:
        click.echo(str(rejection), err=True)
    click.echo(f"loaded {report.loaded} songs ({len(report.rejections)} rejected)")


@main.command("consent-load")
@click.option("--consent", "consent_path", type=click.Path(), required=False)
@click.pass_obj
def consent_load(config: ServiceConfig, consent_path: str | None) -> None:
    """Validate a consent JSONL fixture against the configured catalogue."""
    path = consent_path or config.consent_path
    if not path or not config.catalogue_path:
        _fail("consent-load needs catalogue_path and a consent file", EXIT_VALIDATION)
    catalogue = Catalogue(config.block_vocabulary, config.hierarchies)
    try:
        catalogue.ingest(config.catalogue_path)
        with open(path, "r", encoding="utf-8") as handle:
            report = load_consent_lines(ConsentRegistry(catalogue.__contains__), handle)
    except OSError as exc:
        _fail(str(exc), EXIT_IO)
        return
    for rejection in report.rejections:
        click.echo(rejection, err=True)
    click.echo(f"applied {report.applied} consent records ({len(report.rejections)} rejected)")
    if report.rejections:
        sys.exit(EXIT_VALIDATION)


@main.command("consent-revoke")
@click.argument("song_id", type=int)
@click.option("--actor", "actor_id", default="admin", show_default=True)
@click.pass_obj
def consent_revoke(config: ServiceConfig, song_id: int, actor_id: str) -> None:
    """Append a revocation to the configured consent file."""
    if not config.consent_path:
        _fail("consent_path is not configured", EXIT_VALIDATION)
    line = json.dumps({"song_id": song_id, "revoke": True, "actor_id": actor_id})
    try:
        with open(config.consent_path, "a", encoding="utf-8") as handle:
            handle.write(line + "\n")
    except OSError as exc:
        _fail(str(exc), EXIT_IO)
    click.echo(f"revoked consent for song {song_id}")


@main.command()
@click.pass_obj
def serve(config: ServiceConfig) -> None:
    """Run the HTTP service."""
    import uvicorn

    from .service import build_app

    try:
        app = build_app(config)
    except (ConfigurationError, OSError) as exc:
        _fail(str(exc), EXIT_VALIDATION if isinstance(exc, ConfigurationError) else EXIT_IO)
        return
    host, port = config.host_and_port()
    uvicorn.run(app, host=host, port=port, log_level="info")


@main.command("verify-ledger")
@click.option("--ledger", "ledger_path", type=click.Path(), required=False)
@click.pass_obj
def verify_ledger(config: ServiceConfig, ledger_path: str | None) -> None:
    """Recompute the hash chain from genesis and report the first break."""
    path = ledger_path or config.ledger_path
    if not path:
        _fail("no ledger path (use --ledger or set ledger_path)", EXIT_VALIDATION)
    try:
        ledger = Ledger.load(path)
    except OSError as exc:
        _fail(str(exc), EXIT_IO)
        return
    except RefrainError as exc:
        _fail(f"unreadable ledger: {exc}", EXIT_VALIDATION)
        return
    check = ledger.verify_chain()
    if check.ok:
        click.echo(f"OK at {len(ledger.entries)} entries")
    else:
        click.echo(f"BROKEN at entry {check.broken_at}")
        sys.exit(EXIT_VALIDATION)


def _build_state(config: ServiceConfig, *, demo_fallback: bool = False) -> AppState:
    if config.catalogue_path:
        return AppState.from_config(config)
    if not demo_fallback:
        _fail("catalogue_path is not configured", EXIT_VALIDATION)
    catalogue = fixtures.build_demo_catalogue(config.block_vocabulary)
    registry = fixtures.build_demo_registry(catalogue)
    return AppState.assemble(config, catalogue, registry)


@main.command()
@click.option("--artist", "artist_id", required=True)
@click.option("--from", "from_us", type=int, default=None, help="Period start (epoch microseconds).")
@click.option("--to", "to_us", type=int, default=None, help="Period end (epoch microseconds, exclusive).")
@click.option("--format", "fmt", type=click.Choice(["csv", "json", "text"]), default="csv", show_default=True)
@click.option("--out", "out_dir", type=click.Path(), default=None, help="Write CSV + figure into this directory.")
@click.pass_obj
def statement(config: ServiceConfig, artist_id: str, from_us: int | None, to_us: int | None, fmt: str, out_dir: str | None) -> None:
    """Export one artist's compensation statement (CSV plus figure with --out)."""
    if not config.ledger_path:
        _fail("ledger_path is not configured", EXIT_VALIDATION)
    state = _build_state(config, demo_fallback=True)
    try:
        ledger = Ledger.load(config.ledger_path)
    except RefrainError as exc:
        _fail(f"unreadable ledger: {exc}", EXIT_VALIDATION)
        return
    stmt = ledger.statement(artist_id, state.catalogue.song_to_artist(), start_us=from_us, end_us=to_us)
    if fmt == "json":
        click.echo(json.dumps(stmt.to_dict(), indent=2, sort_keys=True))
    elif fmt == "text":
        for line in stmt.lines:
            subject = f"song {line.song_id}" if line.song_id is not None else "tta-pool"
            click.echo(f"entry {line.entry_index}: {subject} weight {line.weight:.4f} -> {format_minor(line.amount_minor, stmt.currency)}")
        click.echo(f"total {format_minor(stmt.total_minor, stmt.currency)}")
    else:
        click.echo(statement_csv(stmt), nl=False)
    if out_dir is not None:
        directory = Path(out_dir)
        try:
            directory.mkdir(parents=True, exist_ok=True)
            csv_path = write_statement_csv(stmt, directory / f"statement_{artist_id}.csv")
            fig_path = statement_figure(stmt, directory / f"statement_{artist_id}.png")
        except OSError as exc:
            _fail(str(exc), EXIT_IO)
            return
        click.echo(f"wrote {csv_path} and {fig_path}", err=True)


@main.command()
@click.option("--seed", type=int, default=11, show_default=True)
@click.option("--out", "out_dir", type=click.Path(), default=None, help="Write output doc, manifest, and figures here.")
@click.option("--format", "fmt", type=click.Choice(["json", "text"]), default="text", show_default=True)
@click.pass_obj
def demo(config: ServiceConfig, seed: int, out_dir: str | None, fmt: str) -> None:
    """Headless end-to-end run of the two-reference guitar/voice scenario.

    Uses the configured catalogue and consent files when present, otherwise
    the bundled demo fixture. Prints the manifest and the payouts.
    """
    state = _build_state(config, demo_fallback=True)
    request = fixtures.demo_reference_request(seed=seed)
    try:
        result = orchestrate_generate(state, request)
    except RefrainError as exc:
        _fail(str(exc), EXIT_VALIDATION)
        return
    if fmt == "json":
        click.echo(json.dumps(result, indent=2, sort_keys=True))
    elif result["verdict"] != "cleared":
        click.echo("BLOCKED")
        for check in result["outcome"]["per_selection"]:
            for kind in ("usage", "distribution"):
                if not check[kind]["permitted"]:
                    click.echo(f"  song {check['song_id']}: {kind} {check[kind]['reason']}")
        for alt in result["alternatives"]:
            ids = ", ".join(str(c["song_id"]) for c in alt["candidates"]) or "(none)"
            click.echo(f"  alternatives for {alt['blocked_song_id']}: {ids}")
    else:
        click.echo(f"CLEARED output {result['output_id']}")
        click.echo(f"snapshot {result['manifest']['snapshot_id']} entry {result['entry_index']}")
        for assignment in result["manifest"]["assignments"]:
            contributors = ", ".join(
                f"{c['song_id']}@{c['weight']:.2f}" for c in assignment["contributors"]
            )
            click.echo(f"  {assignment['block']:<16} {assignment['origin']:<13} {contributors}")
        click.echo(f"fee {format_minor(result['fee_minor'], result['currency'])}")
        for artist, amount in sorted(result["payouts"].items()):
            click.echo(f"  payout {artist}: {format_minor(amount, result['currency'])}")
        click.echo(f"  tta pool: {format_minor(result['tta_pool_delta_minor'], result['currency'])}")
        click.echo(f"  platform: {format_minor(result['platform_delta_minor'], result['currency'])}")
    if out_dir is not None and result["verdict"] == "cleared":
        directory = Path(out_dir)
        try:
            directory.mkdir(parents=True, exist_ok=True)
            output = state.outputs[result["output_id"]]
            (directory / "output.json").write_text(
                json.dumps(output.to_doc(), indent=2, sort_keys=True), encoding="utf-8"
            )
            manifest_figure(output.manifest, directory / "manifest.png")
            stmt = state.ledger.statement(
                state.catalogue.artist_of(fixtures.OPEN_SONG), state.catalogue.song_to_artist()
            )
            write_statement_csv(stmt, directory / "statement.csv")
            statement_figure(stmt, directory / "statement.png")
        except OSError as exc:
            _fail(str(exc), EXIT_IO)
            return
        click.echo(f"wrote artifacts to {directory}", err=True)


@main.command("fixtures")
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.pass_obj
def fixtures_cmd(config: ServiceConfig, out_dir: str) -> None:
    """Write the bundled demo catalogue and consent fixtures as JSONL."""
    directory = Path(out_dir)
    try:
        directory.mkdir(parents=True, exist_ok=True)
        fixtures.write_jsonl(directory / "catalogue.jsonl", fixtures.demo_catalogue_records(config.block_vocabulary))
        fixtures.write_jsonl(directory / "consent.jsonl", fixtures.demo_consent_records())
    except OSError as exc:
        _fail(str(exc), EXIT_IO)
        return
    click.echo(f"wrote {directory / 'catalogue.jsonl'} and {directory / 'consent.jsonl'}")


if __name__ == "__main__":  # pragma: no cover
    main()
