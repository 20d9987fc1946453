"""
CLI - reproducible experiments for the folded and shifted double-dimer models.

This module provides:
- verify-kenyon: Pfaffian against loop/arc sums over the oracle corpus
- moments / strip-check: arc statistics, exact or Monte Carlo
- trace / identity: zipper trace series and the finite-mesh identity
- coupling: inverse Kasteleyn couplings on the strip against the kernel
- cylinder: traversing arcs on the folded cylinder
- render: SVG of one sampled configuration
- version / info

Every run reads an optional flat YAML run configuration, applies the command
line overrides and writes CSV/JSON/SVG files carrying a manifest.

Exit codes: 0 pass, 1 tolerance failure, 2 usage or configuration error.

Version: 0.1.0
"""

import math
from collections.abc import Iterator
from contextlib import contextmanager
from pathlib import Path
from typing import Annotated, Any, NoReturn

import numpy as np
import typer
from rich.console import Console
from rich.panel import Panel
from rich.progress import Progress, SpinnerColumn, TextColumn
from rich.table import Table

from dimerfold import __version__
from dimerfold.capabilities.arcs import (
    ModelGraphs,
    arc_stats,
    combine,
    estimate_moments,
    sample_configurations,
    sample_matchings,
    summarize,
)
from dimerfold.capabilities.continuum import (
    MIN_COUPLING_ORDER,
    STRIP_COUPLING_PAIRS,
    ale_targets,
    compute_cn,
    convergence_order,
    coupling_asymptotic_check,
    limit_moments,
    strip_cn,
    strip_kernel,
)
from dimerfold.capabilities.cylinder import (
    enumerated_distribution,
    limit_product,
    limit_table,
    traversal_distribution,
)
from dimerfold.capabilities.enumeration import fault_edge, load_corpus, verify_kenyon
from dimerfold.capabilities.sampler import dump_matchings
from dimerfold.capabilities.zipper import (
    build_zipper,
    domain_trace_series,
    finite_eps_identity,
    legs_from_waypoints,
)
from dimerfold.core.config import get_config
from dimerfold.core.exceptions import (
    CLIError,
    ConfigError,
    DimerFoldError,
    EnumerationCapError,
    LatticeError,
    ToleranceError,
    ZipperError,
)
from dimerfold.core.logging import configure_logging, get_logger, run_context
from dimerfold.core.models import Model, Provenance, RunConfig, load_run_config
from dimerfold.domain.kasteleyn import complex_phases
from dimerfold.domain.lattice import (
    DomainDescriptor,
    Point,
    SymmetricLatticeDomain,
    TemperleyanGraph,
    build_symmetric_domain,
    build_temperleyan,
    load_descriptor,
    rectangle,
    restrict_upper,
    snap_to_face,
    strip,
)
from dimerfold.services.reports import Manifest, make_manifest, write_csv, write_json, write_manifest
from dimerfold.services.render import render_configuration

logger = get_logger(__name__)

app = typer.Typer(
    name="dimerfold",
    help="dimerfold: folded and shifted double-dimer models with arcs",
    add_completion=True,
    no_args_is_help=True,
)
console = Console()

EXIT_TOLERANCE = 1
EXIT_USAGE = 2

# =============================================================================
# Shared Options
# =============================================================================

ConfigOption = Annotated[
    Path | None,
    typer.Option("--config", "-c", help="Run configuration (flat YAML key-value file)"),
]
SeedOption = Annotated[int | None, typer.Option("--seed", help="Root random seed")]
ThreadsOption = Annotated[
    int | None, typer.Option("--threads", help="Worker threads (results do not depend on it)")
]
OutOption = Annotated[Path | None, typer.Option("--out", "-o", help="Output directory")]
NoTimestampOption = Annotated[
    bool, typer.Option("--no-timestamp", help="Omit the timestamp from manifests")
]

# =============================================================================
# Helper Functions
# =============================================================================


def _fail(error: DimerFoldError, code: int) -> NoReturn:
    colour = "yellow" if code == EXIT_TOLERANCE else "red"
    console.print(f"[{colour}]Error: {error}[/{colour}]")
    raise typer.Exit(code)


def _load(
    config: Path | None,
    seed: int | None,
    threads: int | None,
    out: Path | None,
    no_timestamp: bool,
) -> RunConfig:
    """RunConfig from file and flags; configuration problems exit with 2."""
    try:
        cfg = load_run_config(config)
        return cfg.with_overrides(
            seed=seed,
            threads=threads,
            output_dir=out,
            timestamp=False if no_timestamp else None,
        )
    except ConfigError as e:
        for line in e.details.get("validation_errors", []):
            console.print(f"[dim]  {line}[/dim]")
        _fail(e, EXIT_USAGE)


@contextmanager
def _run(command: str, cfg: RunConfig) -> Iterator[Manifest]:
    """Bind the run's logging context and map errors to exit codes."""
    manifest = make_manifest(command, cfg)
    with run_context(command, seed=cfg.seed, run_id=manifest.config_digest[:12]):
        try:
            yield manifest
        except ToleranceError as e:
            _fail(e, EXIT_TOLERANCE)
        except (ConfigError, CLIError, LatticeError, ZipperError) as e:
            _fail(e, EXIT_USAGE)
        except DimerFoldError as e:
            _fail(e, EXIT_TOLERANCE)


def _spinner() -> Progress:
    return Progress(
        SpinnerColumn(),
        TextColumn("[progress.description]{task.description}"),
        console=console,
        transient=True,
    )


def _descriptor(cfg: RunConfig) -> DomainDescriptor:
    return load_descriptor(cfg.domain) if cfg.domain else strip(cfg.height, cfg.half_width)


def _domain(cfg: RunConfig) -> SymmetricLatticeDomain:
    return build_symmetric_domain(_descriptor(cfg))


def _face(upper: TemperleyanGraph, z: tuple[float, float]) -> Point:
    snapped = snap_to_face(upper, complex(*z))
    logger.debug("face_snapped", face=snapped.face, distance=snapped.snap_distance)
    return snapped.face


def _corpus_face(upper: TemperleyanGraph) -> Point:
    """Lowest face off the axis, nearest the anchor, whose staircase reaches the top."""
    anchor_x = upper.anchor[0] if upper.anchor else 0
    candidates = sorted(
        (f for f in upper.faces if f[1] >= 1),
        key=lambda f: (f[1], abs(f[0] + 0.5 - anchor_x), f[0]),
    )
    for face in candidates:
        try:
            build_zipper(upper, face, check_flat=False)
        except ZipperError:
            continue
        return face
    raise ZipperError("no face of the graph has a staircase to the top")


def _fmt(value: float | None, digits: int = 6) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "-"
    return f"{value:.{digits}g}"


def _z_score(estimate: float, target: float, stderr: float) -> float | None:
    return (estimate - target) / stderr if stderr > 0 else None


def _strip_rows(cfg: RunConfig, height: int, y_values: list[float]) -> tuple[float, list[dict[str, Any]]]:
    """Monte Carlo moments at each y on the strip of ``height`` rows."""
    domain = build_symmetric_domain(strip(height, cfg.half_width))
    graphs = ModelGraphs.build(domain, cfg.model)
    with _spinner() as progress:
        progress.add_task(f"Sampling {cfg.samples} configurations (H={height})...", total=None)
        configs = sample_configurations(graphs, cfg.samples, cfg.seed, cfg.sampler, cfg.threads)

    rows = []
    for y in y_values:
        face = _face(graphs.upper, (cfg.z[0], y))
        stats = [arc_stats(c, face, graphs.upper) for c in configs]
        report = summarize(stats, cfg.model, Provenance.MONTE_CARLO, domain.eps, face)
        target_n, target_o = ale_targets(y)
        bell = limit_moments(strip_cn(y, n_max=4, x=cfg.z[0]))
        rows.append(
            {
                "height": height,
                "y": y,
                "mean_o": report.mean_o,
                "stderr_o": report.stderr_o,
                "target_o": target_o,
                "gap_o": abs(report.mean_o - target_o),
                "z_o": _z_score(report.mean_o, target_o, report.stderr_o),
                "mean_n": report.mean_n,
                "stderr_n": report.stderr_n,
                "target_n": target_n,
                "gap_n": abs(report.mean_n - target_n),
                "bell_n": bell.mean_n,
                "z_n": _z_score(report.mean_n, target_n, report.stderr_n),
                "var_n": report.var_n,
                "bell_var_n": bell.var_n,
            }
        )
    return domain.eps, rows


# =============================================================================
# Commands
# =============================================================================


@app.command("verify-kenyon")
def cmd_verify_kenyon(
    config: ConfigOption = None,
    seed: SeedOption = None,
    threads: ThreadsOption = None,
    out: OutOption = None,
    no_timestamp: NoTimestampOption = False,
) -> None:
    """
    Check Pf K against the loop/arc expansion over the oracle corpus.

    Uses ``connections`` random SL(2,C) connections per graph; with
    ``inject_fault: true`` one Kasteleyn phase is flipped per graph and the
    check is expected to fail.

    Examples:
        dimerfold verify-kenyon
        dimerfold verify-kenyon --config runs/fault.yaml --seed 3
    """
    cfg = _load(config, seed, threads, out, no_timestamp)
    with _run("verify-kenyon", cfg) as manifest:
        entries = load_corpus(cfg.corpus)
        if not entries:
            raise CLIError("corpus is empty", details={"corpus": str(cfg.corpus)})
        rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(cfg.seed).spawn(len(entries))]

        reports = []
        with _spinner() as progress:
            task = progress.add_task("Verifying corpus...", total=len(entries))
            for entry, rng in zip(entries, rngs, strict=True):
                fg = entry.folded()
                phases = complex_phases(fg.base)
                if cfg.inject_fault:
                    edge = fault_edge(fg)
                    phases = phases.with_phase(edge, -phases[edge])
                reports.append(
                    verify_kenyon(fg, rng, cfg.connections, cfg.tolerance, phases, entry.name)
                )
                progress.advance(task)

        table = Table(title="Kenyon identity over the corpus")
        table.add_column("Graph", style="cyan")
        table.add_column("|V|", justify="right")
        table.add_column("Configs", justify="right")
        table.add_column("Max error", justify="right")
        table.add_column("Status")
        for r in reports:
            status = "[green]✓[/green]" if r.passed else "[red]✗[/red]"
            table.add_row(r.name, str(r.vertices), str(r.configurations), _fmt(r.max_error, 3), status)
        console.print(table)

        out_dir = cfg.output_dir
        write_csv(out_dir / "kenyon.csv", [r.to_row() for r in reports], manifest)
        failed = [r.name for r in reports if not r.passed]
        write_json(
            out_dir / "kenyon.json",
            {
                "graphs": len(reports),
                "connections": cfg.connections,
                "failed": failed,
                "inject_fault": cfg.inject_fault,
                "max_error": max(r.max_error for r in reports),
                "tolerance": cfg.tolerance,
            },
            manifest,
        )
        if failed:
            raise ToleranceError(
                f"{len(failed)} of {len(reports)} graphs failed",
                error=max(r.max_error for r in reports),
                tolerance=cfg.tolerance,
                details={"failed": failed},
            )
        console.print(f"[green]✓ All {len(reports)} graphs pass[/green]")


@app.command("moments")
def cmd_moments(
    config: ConfigOption = None,
    seed: SeedOption = None,
    threads: ThreadsOption = None,
    out: OutOption = None,
    no_timestamp: NoTimestampOption = False,
) -> None:
    """
    Moments of the enclosing-arc count n and parity o at the face of z.

    Small domains are enumerated exactly; larger ones are sampled
    (``samples``, ``sampler``) with jackknife errors.

    Examples:
        dimerfold moments --config runs/strip40.yaml --seed 1 --threads 4
    """
    cfg = _load(config, seed, threads, out, no_timestamp)
    with _run("moments", cfg) as manifest:
        domain = _domain(cfg)
        graphs = ModelGraphs.build(domain, cfg.model)
        face = _face(graphs.upper, cfg.z)
        with _spinner() as progress:
            progress.add_task(f"Estimating moments ({cfg.model.value})...", total=None)
            report = estimate_moments(
                cfg.model,
                domain,
                face,
                cfg.samples,
                seed=cfg.seed,
                method=cfg.sampler,
                threads=cfg.threads,
                graphs=graphs,
            )

        table = Table(title=f"Arc moments at face {face} ({report.provenance.value})")
        table.add_column("Quantity", style="cyan")
        table.add_column("Estimate", justify="right", style="green")
        table.add_column("Std. error", justify="right")
        table.add_row("E[o]", _fmt(report.mean_o), _fmt(report.stderr_o, 3))
        table.add_row("E[n]", _fmt(report.mean_n), _fmt(report.stderr_n, 3))
        table.add_row("var(n)", _fmt(report.var_n), _fmt(report.stderr_var_n, 3))
        console.print(table)

        write_json(cfg.output_dir / "moments.json", report.to_dict(), manifest)
        write_csv(
            cfg.output_dir / "moments.csv",
            [s.as_row() for s in report.rows],
            manifest,
            columns=["n", "o", "r", "l"],
        )


@app.command("trace")
def cmd_trace(
    config: ConfigOption = None,
    seed: SeedOption = None,
    threads: ThreadsOption = None,
    out: OutOption = None,
    no_timestamp: NoTimestampOption = False,
) -> None:
    """
    Zipper trace series T_k = tr((S K^-1)^k) and the continuum c_k.

    The zipper starts at the face of z, climbs through ``waypoints`` in
    alternating staircase directions and leaves through the top. On the strip
    the normalized traces are compared with c_k.

    Examples:
        dimerfold trace --config runs/strip32.yaml
    """
    cfg = _load(config, seed, threads, out, no_timestamp)
    with _run("trace", cfg) as manifest:
        descriptor = _descriptor(cfg)
        domain = build_symmetric_domain(descriptor)
        upper = restrict_upper(build_temperleyan(domain))
        snapped = snap_to_face(upper, complex(*cfg.z))
        legs, final = legs_from_waypoints(snapped.centre, cfg.waypoints, cfg.direction, domain.eps)
        with _spinner() as progress:
            progress.add_task("Factorizing K...", total=None)
            series, zipper = domain_trace_series(
                domain, snapped.face, cfg.model, cfg.n_max, legs, final
            )

        continuum: list[float | None] = [None] * cfg.n_max
        if descriptor.kind == "strip":
            exit_point = complex(zipper.exit_x * upper.scale, math.pi / 2)
            corners = [complex(*w) for w in cfg.waypoints]
            table_c = compute_cn(
                strip_kernel(), snapped.centre, exit_point, path=corners, n_max=cfg.n_max
            )
            continuum = [table_c[k] for k in range(1, cfg.n_max + 1)]

        normalized = series.normalized
        rows = [
            {
                "k": k,
                "trace_re": float(series.traces[k - 1].real),
                "trace_im": float(series.traces[k - 1].imag),
                "normalized": float(normalized[k - 1].real),
                "c_k": continuum[k - 1],
                "gap": None if continuum[k - 1] is None else abs(float(normalized[k - 1].real) - continuum[k - 1]),
            }
            for k in range(1, cfg.n_max + 1)
        ]

        table = Table(title=f"Trace series ({cfg.model.value}, eps={domain.eps:.4g}, {len(zipper)} zipper edges)")
        table.add_column("k", justify="right", style="cyan")
        table.add_column("(c/2)^k T_k", justify="right", style="green")
        table.add_column("c_k", justify="right")
        table.add_column("Gap", justify="right")
        for row in rows:
            table.add_row(str(row["k"]), _fmt(row["normalized"]), _fmt(row["c_k"]), _fmt(row["gap"], 3))
        console.print(table)

        write_csv(cfg.output_dir / "trace.csv", rows, manifest)
        write_json(
            cfg.output_dir / "trace.json",
            {**series.to_dict(), "face": list(snapped.face), "zipper_edges": len(zipper), "c": continuum},
            manifest,
        )


@app.command("identity")
def cmd_identity(
    config: ConfigOption = None,
    seed: SeedOption = None,
    threads: ThreadsOption = None,
    out: OutOption = None,
    no_timestamp: NoTimestampOption = False,
) -> None:
    """
    Finite-mesh generating identity: enumeration against Pf ratio and det series.

    Without ``domain`` the identity runs on every upper-half-plane entry of the
    corpus for both models; with it, on that domain and the configured model.

    Examples:
        dimerfold identity
        dimerfold identity --config runs/tiny.yaml --no-timestamp
    """
    cfg = _load(config, seed, threads, out, no_timestamp)
    with _run("identity", cfg) as manifest:
        cases: list[tuple[str, SymmetricLatticeDomain, Model]] = []
        if cfg.domain is not None:
            cases.append((cfg.domain.stem, _domain(cfg), cfg.model))
        else:
            for entry in load_corpus(cfg.corpus):
                if entry.kind != "upper":
                    continue
                domain = build_symmetric_domain(rectangle(0, entry.x_max, entry.y_max, eps=1.0))
                cases += [(entry.name, domain, model) for model in Model]

        rows: list[dict[str, Any]] = []
        skipped: list[str] = []
        with _spinner() as progress:
            task = progress.add_task("Checking identity...", total=len(cases))
            for name, domain, model in cases:
                upper = restrict_upper(build_temperleyan(domain))
                face = _face(upper, cfg.z) if cfg.domain is not None else _corpus_face(upper)
                try:
                    final = cfg.direction if cfg.domain is not None else "NE"
                    result = finite_eps_identity(
                        domain, face, model, cfg.alphas, final=final, n_max=cfg.n_max
                    )
                except EnumerationCapError:
                    skipped.append(f"{name}/{model.value}")
                    progress.advance(task)
                    continue
                rows += [{"domain": name, "model": model.value, **r.to_row()} for r in result]
                progress.advance(task)

        table = Table(title="Finite-mesh identity")
        table.add_column("Domain", style="cyan")
        table.add_column("Model")
        table.add_column("alpha", justify="right")
        table.add_column("LHS", justify="right", style="green")
        table.add_column("Pf ratio", justify="right")
        table.add_column("Error", justify="right")
        for row in rows:
            table.add_row(
                row["domain"],
                row["model"],
                _fmt(row["alpha"], 3),
                _fmt(row["lhs"], 10),
                _fmt(row["rhs_pfaffian"], 10),
                _fmt(row["error"], 3),
            )
        console.print(table)
        for name in skipped:
            console.print(f"[yellow]⚠ {name} skipped (over enumeration caps)[/yellow]")

        worst = max((row["error"] for row in rows), default=0.0)
        write_csv(cfg.output_dir / "identity.csv", rows, manifest)
        write_json(
            cfg.output_dir / "identity.json",
            {"rows": len(rows), "skipped": skipped, "max_error": worst, "tolerance": cfg.tolerance},
            manifest,
        )
        if worst > cfg.tolerance:
            raise ToleranceError("identity rows exceed tolerance", error=worst, tolerance=cfg.tolerance)
        console.print(f"[green]✓ All {len(rows)} rows pass[/green]")

@app.command("strip-check")
def cmd_strip_check(
    config: ConfigOption = None,
    seed: SeedOption = None,
    threads: ThreadsOption = None,
    out: OutOption = None,
    no_timestamp: NoTimestampOption = False,
) -> None:
    """
    Monte Carlo arc moments on the strip against the closed-form limits.

    One batch of ``samples`` configurations is shared by all ``y_values``;
    each row reports the estimate, the limit, the Bell-polynomial limit from
    c_1..c_4 and the z-score of the gap. Gaps above ``tolerance_o`` or
    ``tolerance_n`` fail the run. With ``confirm`` the strip is resampled at
    twice the height and both gaps at y = z[1] must shrink.

    Examples:
        dimerfold strip-check --seed 7 --threads 8
    """
    cfg = _load(config, seed, threads, out, no_timestamp)
    with _run("strip-check", cfg) as manifest:
        eps, rows = _strip_rows(cfg, cfg.height, cfg.y_values)
        confirmation: list[dict[str, Any]] = []
        if cfg.confirm:
            _, confirmation = _strip_rows(cfg, 2 * cfg.height, [cfg.z[1]])

        table = Table(title=f"Strip check (N={cfg.samples}, {cfg.model.value})")
        table.add_column("H", justify="right")
        table.add_column("y", justify="right", style="cyan")
        table.add_column("E[o]", justify="right", style="green")
        table.add_column("limit", justify="right")
        table.add_column("z", justify="right")
        table.add_column("E[n]", justify="right", style="green")
        table.add_column("limit", justify="right")
        table.add_column("z", justify="right")
        for row in rows + confirmation:
            table.add_row(
                str(row["height"]),
                _fmt(row["y"], 4),
                _fmt(row["mean_o"], 4),
                _fmt(row["target_o"], 4),
                _fmt(row["z_o"], 3),
                _fmt(row["mean_n"], 4),
                _fmt(row["target_n"], 4),
                _fmt(row["z_n"], 3),
            )
        console.print(table)

        write_csv(cfg.output_dir / "strip_check.csv", rows + confirmation, manifest)
        write_json(
            cfg.output_dir / "strip_check.json",
            {
                "height": cfg.height,
                "eps": eps,
                "samples": cfg.samples,
                "tolerance_o": cfg.tolerance_o,
                "tolerance_n": cfg.tolerance_n,
                "rows": rows,
                "confirmation": confirmation,
            },
            manifest,
        )

        worst_o = max(row["gap_o"] for row in rows)
        worst_n = max(row["gap_n"] for row in rows)
        if worst_o > cfg.tolerance_o:
            raise ToleranceError("E[o] gap exceeds tolerance", error=worst_o, tolerance=cfg.tolerance_o)
        if worst_n > cfg.tolerance_n:
            raise ToleranceError("E[n] gap exceeds tolerance", error=worst_n, tolerance=cfg.tolerance_n)
        if confirmation:
            coarse = next((row for row in rows if row["y"] == cfg.z[1]), None)
            if coarse is None:
                _, (coarse,) = _strip_rows(cfg, cfg.height, [cfg.z[1]])
            fine = confirmation[0]
            for key in ("gap_o", "gap_n"):
                if fine[key] >= coarse[key]:
                    raise ToleranceError(
                        f"{key} does not shrink at H={fine['height']}",
                        error=fine[key],
                        tolerance=coarse[key],
                    )
        console.print(f"[green]✓ Gaps within ({cfg.tolerance_o}, {cfg.tolerance_n})[/green]")


@app.command("coupling")
def cmd_coupling(
    config: ConfigOption = None,
    seed: SeedOption = None,
    threads: ThreadsOption = None,
    out: OutOption = None,
    no_timestamp: NoTimestampOption = False,
) -> None:
    """
    Inverse Kasteleyn couplings on the strip against the kernel prediction.

    Runs on strips of ``height`` and twice ``height`` rows. Folded compares
    K^-1 on the symmetric graph; shifted compares (K^1)^-1 - (K^2)^-1. Every
    class pair must converge with order at least 1.7 and the Green identity
    must hold to ``tolerance``.

    Examples:
        dimerfold coupling --config runs/strip16.yaml
    """
    cfg = _load(config, seed, threads, out, no_timestamp)
    with _run("coupling", cfg) as manifest:
        kernel = strip_kernel()
        heights = (cfg.height, 2 * cfg.height)
        reports = []
        with _spinner() as progress:
            task = progress.add_task("Solving K...", total=len(heights))
            for height in heights:
                g = build_temperleyan(build_symmetric_domain(strip(height, cfg.half_width)))
                reports.append(
                    coupling_asymptotic_check(g, kernel, STRIP_COUPLING_PAIRS, model=cfg.model)
                )
                progress.advance(task)
        orders = convergence_order(*reports)

        table = Table(title=f"Coupling order ({cfg.model.value}, H={heights[0]} vs {heights[1]})")
        table.add_column("(r, s)", style="cyan")
        table.add_column(f"Error H={heights[0]}", justify="right")
        table.add_column(f"Error H={heights[1]}", justify="right")
        table.add_column("Order", justify="right", style="green")
        for (r, s), order in orders.items():
            table.add_row(
                f"({r:+d}, {s:+d})",
                _fmt(reports[0].max_error(r, s), 3),
                _fmt(reports[1].max_error(r, s), 3),
                _fmt(order, 3),
            )
        console.print(table)

        rows = [
            {"height": height, **row.to_row()}
            for height, report in zip(heights, reports, strict=True)
            for row in report.rows
        ]
        identity = max(report.green_identity_error for report in reports)
        worst = min(orders.values())
        write_csv(cfg.output_dir / "coupling.csv", rows, manifest)
        write_json(
            cfg.output_dir / "coupling.json",
            {
                "model": cfg.model.value,
                "heights": list(heights),
                "orders": {f"{r},{s}": order for (r, s), order in orders.items()},
                "min_order": worst,
                "identity_error": identity,
                "tolerance": cfg.tolerance,
            },
            manifest,
        )
        if identity > cfg.tolerance:
            raise ToleranceError("Green identity exceeds tolerance", error=identity, tolerance=cfg.tolerance)
        if worst < MIN_COUPLING_ORDER:
            raise ToleranceError(
                "coupling convergence order too low", error=worst, tolerance=MIN_COUPLING_ORDER
            )
        console.print(f"[green]✓ Order {worst:.2f} on all class pairs[/green]")


@app.command("cylinder")
def cmd_cylinder(
    config: ConfigOption = None,
    seed: SeedOption = None,
    threads: ThreadsOption = None,
    out: OutOption = None,
    no_timestamp: NoTimestampOption = False,
) -> None:
    """
    Traversing arcs on the folded cylinder.

    For each of ``cylinder_sizes`` the law of N recovered from Pf ratios is
    compared with brute-force enumeration; ``limit_sizes`` (or the same sizes)
    are tabulated over ``y_grid`` against the mode product of the same
    cylinder and against the limit product at q = exp(-pi n / (m + 1)), with
    the gap at q = exp(-pi n / m) alongside.

    Examples:
        dimerfold cylinder --config runs/cylinder.yaml
    """
    cfg = _load(config, seed, threads, out, no_timestamp)
    with _run("cylinder", cfg) as manifest:
        distributions = []
        worst = 0.0
        for n, m in cfg.cylinder_sizes:
            pfaffian_law = traversal_distribution(n, m)
            try:
                enumerated: dict[int, float] | None = enumerated_distribution(n, m)
            except EnumerationCapError:
                enumerated = None
            for k, p in enumerate(pfaffian_law):
                exact = None if enumerated is None else enumerated.get(k, 0.0)
                gap = None if exact is None else abs(float(p) - exact)
                worst = max(worst, gap or 0.0)
                distributions.append({"n": n, "m": m, "k": k, "pfaffian": float(p), "enumerated": exact, "gap": gap})

        limits = limit_table(cfg.limit_sizes or cfg.cylinder_sizes, cfg.y_grid)
        normalization = {str(q): limit_product(q, 1.0) for q in (0.01, 0.1, 0.5)}

        table = Table(title="Traversing arcs: finite vs limit")
        table.add_column("n x m", style="cyan")
        table.add_column("Y", justify="right")
        table.add_column("Pf K_a / Pf K", justify="right", style="green")
        table.add_column("Limit", justify="right")
        table.add_column("Gap", justify="right")
        table.add_column("Gap at n/m", justify="right", style="dim")
        for row in limits:
            table.add_row(
                f"{row.n}x{row.m}",
                _fmt(row.Y, 4),
                _fmt(row.finite),
                _fmt(row.limit),
                _fmt(row.gap, 3),
                _fmt(row.gap_nominal, 3),
            )
        closed_form_gap = max((row.closed_form_gap for row in limits), default=0.0)
        console.print(table)

        write_csv(cfg.output_dir / "cylinder_distribution.csv", distributions, manifest)
        write_csv(cfg.output_dir / "cylinder_limit.csv", [r.to_row() for r in limits], manifest)
        write_json(
            cfg.output_dir / "cylinder.json",
            {
                "max_distribution_gap": worst,
                "max_closed_form_gap": closed_form_gap,
                "max_limit_gap": max((row.gap for row in limits), default=0.0),
                "limit_at_Y1": normalization,
                "tolerance": cfg.tolerance,
            },
            manifest,
        )
        if worst > cfg.tolerance:
            raise ToleranceError("Pf-ratio law differs from enumeration", error=worst, tolerance=cfg.tolerance)
        if closed_form_gap > cfg.tolerance:
            raise ToleranceError(
                "Pf ratio differs from the mode product", error=closed_form_gap, tolerance=cfg.tolerance
            )


@app.command("render")
def cmd_render(
    config: ConfigOption = None,
    seed: SeedOption = None,
    threads: ThreadsOption = None,
    out: OutOption = None,
    no_timestamp: NoTimestampOption = False,
) -> None:
    """
    SVG of one sampled configuration, arcs coloured by orientation.

    The underlying covers are dumped next to the SVG as edge-index lines.

    Examples:
        dimerfold render --seed 11 --out figures
    """
    cfg = _load(config, seed, threads, out, no_timestamp)
    with _run("render", cfg) as manifest:
        domain = _domain(cfg)
        graphs = ModelGraphs.build(domain, cfg.model)
        face = _face(graphs.upper, cfg.z)
        covers = sample_matchings(graphs, 1, cfg.seed, cfg.sampler, cfg.threads)[0]
        configuration = combine(graphs, covers)

        svg = render_configuration(
            configuration,
            graphs.upper,
            cfg.output_dir / "render.svg",
            face=face,
            title=f"{cfg.model.value} model, eps={domain.eps:.4g}, seed={cfg.seed}",
            metadata=manifest.to_dict(),
        )
        write_manifest(svg, manifest)
        hosts = [graphs.symmetric] if cfg.model is Model.FOLDED else [graphs.upper, graphs.strict_upper]
        for host, cover in zip(hosts, covers, strict=True):
            dump = dump_matchings([cover], host, cfg.output_dir / f"render.{host.variant.value}.txt")  # type: ignore[arg-type]
            write_manifest(dump, manifest)

        console.print(
            f"[green]✓[/green] {svg} ({len(configuration.arcs)} arcs, {len(configuration.loops)} loops)"
        )


@app.command()
def version() -> None:
    """Show the package version."""
    console.print(f"dimerfold {__version__}")


@app.command()
def info() -> None:
    """Show settings and corpus information."""
    settings = get_config()
    corpus = load_corpus()

    table = Table(title="dimerfold: double-dimer models with arcs")
    table.add_column("Property", style="cyan")
    table.add_column("Value", style="green")
    info_data = [
        ("Version", __version__),
        ("", ""),
        ("Pfaffian method", settings.linalg.pfaffian_method),
        ("Condition limit", f"{settings.linalg.condition_limit:.0e}"),
        ("Enumeration cap", f"{settings.enumeration.max_vertices} vertices"),
        ("Quadrature nodes", str(settings.quadrature.nodes)),
        ("Series depth", str(settings.series.n_max)),
        ("Sampler drift tol.", f"{settings.sampler.drift_tolerance:.0e}"),
        ("", ""),
        ("Corpus graphs", str(len(corpus))),
    ]
    for prop, val in info_data:
        if prop == "":
            table.add_row("─" * 15, "─" * 20)
        else:
            table.add_row(prop, val)
    console.print(table)

    commands = """
• verify-kenyon  Pfaffian vs loop/arc sums on the corpus
• moments        arc statistics at a face
• trace          zipper trace series vs continuum c_k
• identity       finite-mesh generating identity
• strip-check    Monte Carlo vs strip closed forms
• cylinder       traversing arcs on the folded cylinder
• render         SVG of a sampled configuration
    """
    console.print(Panel(commands.strip(), title="Commands", border_style="green"))


# =============================================================================
# Entry Point
# =============================================================================


@app.callback()
def _configure(
    log_level: Annotated[
        str | None, typer.Option("--log-level", help="DEBUG, INFO, WARNING or ERROR")
    ] = None,
) -> None:
    settings = get_config()
    configure_logging(level=log_level or settings.logging.level, format_type=settings.logging.format)


def main() -> None:
    """Main entry point for CLI."""
    app()


if __name__ == "__main__":
    main()
