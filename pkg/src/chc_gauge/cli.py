"""gauge command line.

Exit codes: 0 success, 1 violations or failed checks, 2 usage errors.
Heavy imports (HTTP service) stay inside their subcommands so scoring and
validation stay fast.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .battery import SuiteLoadError, load_suite
from .config import GaugeConfig, load_config
from .fixtures import load_fixture
from .ledger import Ledger, LedgerCorruption, read_ledger_file, replay
from .parsing import ParseFailure
from .report import render_delta, render_profile, summary_row
from .scoring import aggregate, compare_profiles
from .taxonomy import canonical_taxonomy, parse_taxonomy, taxonomy_to_json, validate_taxonomy


def _load_taxonomy(path: str | None):
    if not path:
        return canonical_taxonomy()
    return parse_taxonomy(Path(path).read_bytes())


def _read_suite_dir(directory: Path, taxonomy):
    documents = [(str(p), p.read_bytes()) for p in sorted(directory.glob("*.json"))]
    return load_suite(documents, taxonomy)


def _print_profile(profile, taxonomy):
    roots = taxonomy.roots
    header = ["Model"] + [str(r.path) for r in roots] + ["Total"]
    click.echo("| " + " | ".join(header) + " |")
    click.echo("|" + "---|" * len(header))
    click.echo(summary_row(profile.per_node, roots, profile.total,
                           profile.model_id or "model"))
    if profile.bottlenecks:
        flagged = ", ".join(f"{p} ({n})" for p, n in profile.bottlenecks)
    else:
        flagged = "none"
    click.echo(f"Spread: {profile.spread}; bottlenecks: {flagged}")
    click.echo(f"Total: {profile.total}")


@click.group()
def main():
    """Cognitive-profile evaluation engine."""


@main.group()
def taxonomy():
    """Inspect the ability hierarchy."""


@taxonomy.command("dump")
@click.option("--taxonomy-path", default=None, help="Alternate taxonomy document.")
def taxonomy_dump(taxonomy_path):
    """Print the active taxonomy as JSON."""
    t = _load_taxonomy(taxonomy_path)
    violations = validate_taxonomy(t)
    if violations:
        for violation in violations:
            click.echo(str(violation), err=True)
        sys.exit(1)
    click.echo(json.dumps(taxonomy_to_json(t), indent=1))


@main.command()
@click.argument("directory", type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--taxonomy-path", default=None)
def validate(directory, taxonomy_path):
    """Parse and validate every battery document in DIRECTORY."""
    t = _load_taxonomy(taxonomy_path)
    try:
        suite = _read_suite_dir(directory, t)
    except SuiteLoadError as exc:
        for name, message in exc.problems:
            click.echo(f"{name}: {message}", err=True)
        sys.exit(1)
    click.echo(f"{len(suite.docs)} batteries valid; "
               f"{len(suite.uncovered)} leaf abilities uncovered")
    sys.exit(0)


@main.command()
@click.option("--fixtures", "fixtures_path", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--compare", "compare_path", default=None,
              type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="Second fixture; prints the per-ability delta.")
@click.option("--json", "as_json", is_flag=True, help="Emit the raw profile object.")
@click.option("--taxonomy-path", default=None)
def score(fixtures_path, compare_path, as_json, taxonomy_path):
    """Compute a profile from a verdict/percentile fixture file."""
    t = _load_taxonomy(taxonomy_path)
    try:
        fixture = load_fixture(fixtures_path.read_bytes(), t)
    except ParseFailure as exc:
        for error in exc.errors:
            click.echo(str(error), err=True)
        sys.exit(1)
    profile = aggregate(t, fixture.verdicts, fixture.percentiles,
                        model_id=fixture.model_id)
    if compare_path is not None:
        other = load_fixture(compare_path.read_bytes(), t)
        other_profile = aggregate(t, other.verdicts, other.percentiles,
                                  model_id=other.model_id)
        delta = compare_profiles(profile, other_profile)
        click.echo(render_delta(delta, profile, other_profile, t))
        return
    if as_json:
        click.echo(json.dumps(profile.to_json(), indent=1))
        return
    click.echo(f"Model: {fixture.model_id} (taxonomy {t.version})")
    _print_profile(profile, t)


@main.command("replay")
@click.argument("ledger_path", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--batteries", default=None,
              type=click.Path(exists=True, file_okay=False, path_type=Path),
              help="Battery directory supplying requirement context.")
@click.option("--json", "as_json", is_flag=True)
@click.option("--taxonomy-path", default=None)
def replay_cmd(ledger_path, batteries, as_json, taxonomy_path):
    """Recompute the profile from an append-only ledger file."""
    t = _load_taxonomy(taxonomy_path)
    suite = None
    if batteries is not None:
        suite = _read_suite_dir(batteries, t)
    try:
        events = read_ledger_file(ledger_path)
        profile = replay(events, t, suite=suite)
    except LedgerCorruption as exc:
        click.echo(str(exc), err=True)
        sys.exit(1)
    if as_json:
        click.echo(json.dumps(profile.to_json(), indent=1))
    else:
        _print_profile(profile, t)


@main.command("report")
@click.option("--ledger", "ledger_path", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--format", "fmt", default="markdown",
              type=click.Choice(["markdown", "json"]))
@click.option("--batteries", default=None,
              type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--output", default=None, type=click.Path(dir_okay=False, path_type=Path))
@click.option("--taxonomy-path", default=None)
def report_cmd(ledger_path, fmt, batteries, output, taxonomy_path):
    """Render the full profile report from a ledger."""
    t = _load_taxonomy(taxonomy_path)
    suite = _read_suite_dir(batteries, t) if batteries is not None else None
    try:
        events = read_ledger_file(ledger_path)
        profile = replay(events, t, suite=suite)
        document = render_profile(profile, events, t, fmt=fmt, suite=suite)
    except LedgerCorruption as exc:
        click.echo(str(exc), err=True)
        sys.exit(1)
    if output is not None:
        output.write_text(document, encoding="utf-8")
        click.echo(f"wrote {output}")
    else:
        click.echo(document)


@main.command()
@click.argument("suite_dir", type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--adapter", "adapter_id", default="stub",
              help="Adapter id: 'stub' or 'http'.")
@click.option("--ability", "abilities", multiple=True,
              help="Restrict to these ability paths (repeatable).")
@click.option("--ledger", "ledger_path", default="gauge.ledger",
              type=click.Path(dir_okay=False, path_type=Path))
@click.option("--stub-script", default=None,
              type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="JSON object mapping prompt text to stub responses.")
@click.option("--config", "config_path", default=None,
              type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--model-id", default="")
@click.option("--taxonomy-path", default=None)
def run(suite_dir, adapter_id, abilities, ledger_path, stub_script, config_path,
        model_id, taxonomy_path):
    """Run automated threshold benchmarks and record the measurements."""
    from .harness import HttpChatAdapter, StubAdapter, run_threshold_benchmark

    t = _load_taxonomy(taxonomy_path)
    config = load_config(config_path) if config_path else GaugeConfig()
    try:
        suite = _read_suite_dir(suite_dir, t)
    except SuiteLoadError as exc:
        for name, message in exc.problems:
            click.echo(f"{name}: {message}", err=True)
        sys.exit(1)

    if adapter_id == "stub":
        script = {}
        if stub_script is not None:
            script = json.loads(stub_script.read_text(encoding="utf-8"))
        adapter = StubAdapter(script=script)
    elif adapter_id == "http":
        endpoint = config.adapter.resolve_endpoint()
        if not endpoint:
            click.echo(f"no endpoint configured; set {config.adapter.endpoint_env}",
                       err=True)
            sys.exit(1)
        adapter = HttpChatAdapter(endpoint, api_key=config.adapter.resolve_key(),
                                  timeout_s=config.adapter.timeout_s)
    else:
        raise click.UsageError(f"unknown adapter {adapter_id!r}")

    ledger = Ledger(ledger_path, t, suite=suite, separation=config.separation,
                    actor=f"run:{adapter.id}")
    if model_id and not ledger.model_id:
        ledger.model_id = model_id
    wanted = set(abilities)
    ran = 0
    for doc in suite.docs:
        ability = str(doc.ability)
        if wanted and ability not in wanted:
            continue
        runnable = [item for item in doc.items if item.expected.kind == "exact"
                    and item.memory_protocol is None]
        if not runnable:
            continue
        for requirement in doc.requirements:
            if requirement.source == "manual" or requirement.metric in (
                    "manual_pass_rate", "latency_ms", "stroop_ms", "percentile"):
                continue
            measurement = run_threshold_benchmark(
                adapter, requirement, runnable, ledger=ledger, ability=ability,
                parallelism=config.parallelism,
                retry_transport_errors=config.adapter.retry_transport_errors)
            click.echo(f"{ability} {requirement.id}: {requirement.metric} = "
                       f"{measurement.value:.4f} over {measurement.sample_size} items")
            ran += 1
    if ran == 0:
        click.echo("no automatable requirements matched", err=True)
        sys.exit(1)
    click.echo(f"{ran} measurements recorded in {ledger_path}")


@main.command()
@click.option("--config", "config_path", default=None,
              type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--host", default=None)
@click.option("--port", default=None, type=int)
@click.option("--with-ui", is_flag=True, help="Serve the grading workbench bundle.")
def serve(config_path, host, port, with_ui):
    """Start the grading API (and optionally the workbench UI)."""
    import uvicorn

    from .service import build_service

    config = load_config(config_path) if config_path else GaugeConfig()
    app = build_service(config, with_ui=with_ui)
    uvicorn.run(app, host=host or config.host, port=port or config.port,
                log_level="warning")


if __name__ == "__main__":
    main()
