"""Command-line pipeline: scan -> ctm -> score -> sample -> (serve) -> analyze.

Every subcommand writes a ``*.manifest.json`` next to its primary
output recording the command, its arguments, and the produced files;
``scenestat rerun MANIFEST`` replays it byte-for-byte.  All randomness
enters through explicit ``--seed`` flags.  Options also read
environment variables prefixed ``SCENESTAT_``.

Exit codes: 0 success, 2 usage or input errors, 3 data or numerical
errors.
"""

from __future__ import annotations

import json
from pathlib import Path

import click

from scenestat import __version__
from scenestat.analysis import (
    ScoreRow,
    analysis_rows_to_csv,
    analyze,
    correlations_to_csv,
    join_rows,
    scores_from_csv,
    scores_to_csv,
)
from scenestat.complexity import (
    InsufficientSamplesError,
    bdm,
    load_ctm_table,
    sample_ctm,
    save_ctm_table,
)
from scenestat.experiment import (
    ExperimentStore,
    StimulusSet,
    aggregates_from_csv,
    sample_stimuli,
)
from scenestat.grid import (
    Pattern,
    PgmParseError,
    frequency_table_from_csv,
    frequency_table_to_csv,
    load_pgm,
    natural_randomness,
    pattern_hex_width,
    scan_corpus,
)
from scenestat.stats import CollinearityError, DegenerateInputError
from scenestat.svgplot import ScatterPanel, scatter_svg


class DataError(click.ClickException):
    """Data or numerical failure; scripting contract exit code 3."""

    exit_code = 3


def _write_manifest(manifest_path: Path, command: str, args: dict, outputs: list[Path]) -> Path:
    manifest = {
        "command": command,
        "args": args,
        "outputs": [str(p) for p in outputs],
        "version": __version__,
    }
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest_path


def _manifest_for(primary_output: Path) -> Path:
    return Path(str(primary_output) + ".manifest.json")


@click.group(context_settings={"auto_envvar_prefix": "SCENESTAT"})
@click.version_option(__version__)
def cli():
    """Natural scene statistics, algorithmic complexity, and randomness judgments."""


# --- scan -------------------------------------------------------------------


def _corpus_paths(corpus: Path) -> list[Path]:
    if corpus.is_dir():
        paths = sorted(corpus.glob("*.pgm")) + sorted(corpus.glob("*.PGM"))
        return sorted(paths, key=lambda p: str(p))
    listed = []
    for line in corpus.read_text().splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            p = Path(line)
            listed.append(p if p.is_absolute() else corpus.parent / p)
    return sorted(listed, key=lambda p: str(p))


def _run_scan(corpus: str, side: int, mode: str, out: str) -> None:
    paths = _corpus_paths(Path(corpus))
    if not paths:
        raise click.UsageError(f"no PGM files found in {corpus}")
    images = []
    for path in paths:
        try:
            images.append(load_pgm(path.read_bytes()))
        except PgmParseError as err:
            raise click.UsageError(f"{path}: {err}") from err
        except OSError as err:
            raise click.UsageError(f"{path}: {err}") from err
    table = scan_corpus(images, side, mode)
    out_path = Path(out)
    out_path.write_text(frequency_table_to_csv(table))
    _write_manifest(
        _manifest_for(out_path),
        "scan",
        {"corpus": corpus, "side": side, "mode": mode, "out": out},
        [out_path],
    )
    click.echo(
        f"scanned {len(images)} images: {len(table.counts)} distinct {side}x{side} "
        f"patterns, {table.total} windows -> {out}"
    )


@cli.command("scan")
@click.argument("corpus", type=click.Path(exists=True))
@click.option("--side", "-k", default=4, show_default=True, type=click.IntRange(min=1))
@click.option(
    "--mode",
    default="tiled",
    show_default=True,
    type=click.Choice(["tiled", "sliding"]),
    help="tiled = adjacent non-overlapping windows; sliding = stride 1.",
)
@click.option("--out", "-o", required=True, type=click.Path(dir_okay=False))
def cmd_scan(corpus, side, mode, out):
    """Scan a PGM corpus (directory or path-list file) into a frequency CSV."""
    _run_scan(corpus, side, mode, out)


# --- ctm --------------------------------------------------------------------


def _run_ctm(side: int, states: int, samples: int, max_steps: int, seed: int, out: str) -> None:
    try:
        table = sample_ctm(side, states, samples, max_steps, seed)
    except InsufficientSamplesError as err:
        raise DataError(f"{err} -- increase --samples or --states") from err
    out_path = Path(out)
    out_path.write_bytes(save_ctm_table(table))
    _write_manifest(
        _manifest_for(out_path),
        "ctm",
        {
            "side": side,
            "states": states,
            "samples": samples,
            "max_steps": max_steps,
            "seed": seed,
            "out": out,
        },
        [out_path],
    )
    observed = sum(1 for v in table.entries.values() if v != table.ceiling)
    click.echo(
        f"sampled {samples} machines ({table.n_halting} halted): "
        f"{observed}/{len(table.entries)} classes observed -> {out}"
    )


@cli.command("ctm")
@click.option("--side", "-k", default=2, show_default=True, type=click.IntRange(2, 3))
@click.option("--states", default=4, show_default=True, type=click.IntRange(min=1))
@click.option("--samples", default=1_000_000, show_default=True, type=click.IntRange(min=1))
@click.option("--max-steps", default=200, show_default=True, type=click.IntRange(min=1))
@click.option("--seed", default=1, show_default=True, type=int)
@click.option("--out", "-o", required=True, type=click.Path(dir_okay=False))
def cmd_ctm(side, states, samples, max_steps, seed, out):
    """Estimate a CTM table by sampling random 2-D Turing machines."""
    _run_ctm(side, states, samples, max_steps, seed, out)


# --- score ------------------------------------------------------------------


def _load_frequency(path: str):
    try:
        return frequency_table_from_csv(Path(path).read_text())
    except (OSError, ValueError) as err:
        raise click.UsageError(f"{path}: {err}") from err


def _load_ctm(path: str):
    try:
        return load_ctm_table(Path(path).read_bytes())
    except (OSError, ValueError) as err:
        raise click.UsageError(f"{path}: {err}") from err


def _run_score(freq_csv: str, ctm_csv: str, stimulus_set: str | None, alpha: float, out: str) -> None:
    table = _load_frequency(freq_csv)
    ctm_table = _load_ctm(ctm_csv)
    if table.side % ctm_table.side:
        raise DataError(
            f"pattern side {table.side} not divisible by CTM block side {ctm_table.side}"
        )
    if stimulus_set is not None:
        sset = StimulusSet.from_dict(json.loads(Path(stimulus_set).read_text()))
        if sset.side != table.side:
            raise click.UsageError(
                f"stimulus set side {sset.side} != frequency table side {table.side}"
            )
        patterns = list(sset.patterns)
    else:
        patterns = sorted(table.counts)
    if alpha == 0:
        unobserved = [b for b in patterns if table.count(b) == 0]
        if unobserved:
            width = pattern_hex_width(table.side)
            shown = ", ".join(format(b, f"0{width}x") for b in unobserved[:8])
            raise DataError(
                f"{len(unobserved)} patterns unobserved with alpha=0: {shown}"
                + ("..." if len(unobserved) > 8 else "")
            )
    rows = []
    for bits in patterns:
        pattern = Pattern(table.side, bits)
        rows.append(
            ScoreRow(
                pattern_hex=pattern.hex(),
                complexity_bits=bdm(pattern, ctm_table),
                natural_randomness=natural_randomness(pattern, table, alpha),
            )
        )
    out_path = Path(out)
    out_path.write_text(
        scores_to_csv(
            rows,
            meta={
                "side": table.side,
                "alpha": alpha,
                "ctm_side": ctm_table.side,
                "n_patterns": len(rows),
            },
        )
    )
    _write_manifest(
        _manifest_for(out_path),
        "score",
        {
            "freq_csv": freq_csv,
            "ctm_csv": ctm_csv,
            "stimulus_set": stimulus_set,
            "alpha": alpha,
            "out": out,
        },
        [out_path],
    )
    click.echo(f"scored {len(rows)} patterns -> {out}")


@cli.command("score")
@click.argument("freq_csv", type=click.Path(exists=True))
@click.argument("ctm_csv", type=click.Path(exists=True))
@click.option("--set", "stimulus_set", type=click.Path(exists=True), default=None,
              help="Score only this stimulus set (JSON); default: all observed patterns.")
@click.option("--alpha", default=1.0, show_default=True, type=click.FloatRange(min=0),
              help="Laplace smoothing over the full pattern space.")
@click.option("--out", "-o", required=True, type=click.Path(dir_okay=False))
def cmd_score(freq_csv, ctm_csv, stimulus_set, alpha, out):
    """Score patterns: block-decomposed complexity + natural randomness."""
    _run_score(freq_csv, ctm_csv, stimulus_set, alpha, out)


# --- sample ------------------------------------------------------------------


def _run_sample(freq_csv: str, n: int, seed: int, set_id: str | None, out: str) -> None:
    table = _load_frequency(freq_csv)
    try:
        sset = sample_stimuli(table, n, seed, set_id=set_id)
    except ValueError as err:
        raise DataError(str(err)) from err
    out_path = Path(out)
    out_path.write_text(json.dumps(sset.to_dict(), indent=1, sort_keys=True) + "\n")
    _write_manifest(
        _manifest_for(out_path),
        "sample",
        {"freq_csv": freq_csv, "n": n, "seed": seed, "set_id": set_id, "out": out},
        [out_path],
    )
    click.echo(f"sampled {len(sset.patterns)} patterns into set {sset.set_id} -> {out}")


@cli.command("sample")
@click.argument("freq_csv", type=click.Path(exists=True))
@click.option("-n", "--n", default=100, show_default=True, type=click.IntRange(min=1))
@click.option("--seed", default=1, show_default=True, type=int)
@click.option("--id", "set_id", default=None, help="Set id; default derives from the draw.")
@click.option("--out", "-o", required=True, type=click.Path(dir_okay=False))
def cmd_sample(freq_csv, n, seed, set_id, out):
    """Draw a frequency-weighted stimulus set from a frequency CSV."""
    _run_sample(freq_csv, n, seed, set_id, out)


# --- analyze ------------------------------------------------------------------


def _run_analyze(scores_csv: str, aggregates_csv: str, out_prefix: str) -> None:
    try:
        scores = scores_from_csv(Path(scores_csv).read_text())
        aggregates = aggregates_from_csv(Path(aggregates_csv).read_text())
    except (OSError, ValueError) as err:
        raise click.UsageError(str(err)) from err
    try:
        rows = join_rows(scores, aggregates)
        result = analyze(rows)
    except CollinearityError as err:
        raise DataError(f"collinear predictors: {err}") from err
    except (DegenerateInputError, ValueError) as err:
        raise DataError(str(err)) from err

    report_path = Path(out_prefix + ".report.json")
    correlations_path = Path(out_prefix + ".correlations.csv")
    rows_path = Path(out_prefix + ".analysis.csv")
    svg_path = Path(out_prefix + ".svg")

    report_path.write_text(json.dumps(result.report_dict(), indent=2, sort_keys=True) + "\n")
    correlations_path.write_text(correlations_to_csv(result.correlations))
    rows_path.write_text(analysis_rows_to_csv(result.rows))
    subjective = [r.subjective for r in result.rows]
    svg_path.write_text(
        scatter_svg(
            [
                ScatterPanel(
                    title="Judgments vs natural randomness",
                    x_label="natural randomness (bits)",
                    y_label="subjective randomness (log2 share)",
                    xs=[r.natural_randomness for r in result.rows],
                    ys=subjective,
                ),
                ScatterPanel(
                    title="Judgments vs complexity",
                    x_label="complexity (bits)",
                    y_label="subjective randomness (log2 share)",
                    xs=[r.complexity_bits for r in result.rows],
                    ys=subjective,
                ),
            ]
        )
    )
    _write_manifest(
        Path(out_prefix + ".manifest.json"),
        "analyze",
        {"scores_csv": scores_csv, "aggregates_csv": aggregates_csv, "out_prefix": out_prefix},
        [report_path, correlations_path, rows_path, svg_path],
    )
    rep = result.report
    click.echo(
        f"n={rep.n}: c={rep.c:.3f}, c'={rep.c_prime:.3f}, a={rep.a:.3f}, b={rep.b:.3f}, "
        f"sobel z={rep.sobel_z:.2f} (p={rep.sobel_p:.2g}), adj R2={result.adjusted_r_squared:.3f}"
    )
    click.echo(f"wrote {report_path}, {correlations_path}, {rows_path}, {svg_path}")


@cli.command("analyze")
@click.argument("scores_csv", type=click.Path(exists=True))
@click.argument("aggregates_csv", type=click.Path(exists=True))
@click.option("--out-prefix", "-o", required=True,
              help="Prefix for .report.json, .correlations.csv, .analysis.csv, .svg.")
def cmd_analyze(scores_csv, aggregates_csv, out_prefix):
    """Correlations, mediation report, and scatter SVG from scores + judgments."""
    _run_analyze(scores_csv, aggregates_csv, out_prefix)


# --- serve --------------------------------------------------------------------


def _run_serve(host: str, port: int, data_dir: str, master_seed: int, static_dir: str | None) -> None:
    import uvicorn

    from scenestat.server import create_app

    data_path = Path(data_dir)
    if data_path.exists() and not data_path.is_dir():
        raise click.UsageError(f"data dir {data_dir} exists and is not a directory")
    if not data_path.parent.exists():
        raise click.UsageError(f"parent of data dir {data_dir} does not exist")
    store = ExperimentStore(data_path, master_seed=master_seed)
    _write_manifest(
        data_path / "serve.manifest.json",
        "serve",
        {
            "host": host,
            "port": port,
            "data_dir": data_dir,
            "master_seed": master_seed,
            "static_dir": static_dir,
        },
        [],
    )
    if store.sets:
        click.echo("stimulus sets: " + ", ".join(sorted(store.sets)))
    else:
        click.echo(f"no stimulus sets in {data_path / 'sets'}; drop set JSON files there")
    app = create_app(store, static_dir=static_dir)
    try:
        uvicorn.run(app, host=host, port=port, log_level="info")
    finally:
        store.close()


@cli.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
@click.option("--data-dir", required=True, type=click.Path())
@click.option("--master-seed", default=0, show_default=True, type=int)
@click.option("--static-dir", default=None, type=click.Path(),
              help="Built web UI to serve at / (e.g. frontend/dist).")
def cmd_serve(host, port, data_dir, master_seed, static_dir):
    """Run the judgment experiment HTTP service."""
    _run_serve(host, port, data_dir, master_seed, static_dir)


# --- rerun ---------------------------------------------------------------------

_RUNNERS = {
    "scan": lambda a: _run_scan(a["corpus"], a["side"], a["mode"], a["out"]),
    "ctm": lambda a: _run_ctm(
        a["side"], a["states"], a["samples"], a["max_steps"], a["seed"], a["out"]
    ),
    "score": lambda a: _run_score(
        a["freq_csv"], a["ctm_csv"], a.get("stimulus_set"), a["alpha"], a["out"]
    ),
    "sample": lambda a: _run_sample(
        a["freq_csv"], a["n"], a["seed"], a.get("set_id"), a["out"]
    ),
    "analyze": lambda a: _run_analyze(
        a["scores_csv"], a["aggregates_csv"], a["out_prefix"]
    ),
    "serve": lambda a: _run_serve(
        a["host"], a["port"], a["data_dir"], a["master_seed"], a.get("static_dir")
    ),
}


@cli.command("rerun")
@click.argument("manifest", type=click.Path(exists=True))
def cmd_rerun(manifest):
    """Replay a subcommand from its manifest, reproducing outputs exactly."""
    try:
        data = json.loads(Path(manifest).read_text())
        command, args = data["command"], data["args"]
    except (ValueError, KeyError) as err:
        raise click.UsageError(f"{manifest}: malformed manifest ({err})") from err
    if command not in _RUNNERS:
        raise click.UsageError(f"{manifest}: unknown command {command!r}")
    _RUNNERS[command](args)


def main() -> None:
    cli(auto_envvar_prefix="SCENESTAT")


if __name__ == "__main__":
    main()
