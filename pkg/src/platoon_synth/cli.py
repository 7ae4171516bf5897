"""
Command-line interface for platoon-synth.
"""

import click
import itertools
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from functools import partial
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from rich.console import Console
from rich.panel import Panel
from rich.progress import Progress
from rich.table import Table

from platoon_synth import __version__
from platoon_synth.config import (
    KAPPA_STAR_CASE1,
    K_STAR_CASE1,
    NAMED_GAINS,
    RunConfig,
    load_run_config,
    thread_count,
)
from platoon_synth.exceptions import (
    CertificationFailed,
    ConfigurationError,
    PlatoonSynthError,
)
from platoon_synth.model import (
    DelayTF,
    Gains,
    VehicleParams,
    exact_magnitude,
    lemma1_eta,
    local_stability,
    taylor_magnitude,
    taylor_string_stability,
)
from platoon_synth.norms import (
    DEFAULT_BAND,
    PeakOptions,
    global_band_limit,
    hinf_global,
    magnitude_profile,
    peak_on_band,
    relative_error_profile,
)
from platoon_synth.pade import approx_tf
from platoon_synth.sim import (
    ChirpProfile,
    LeaderProfile,
    PlatoonScenario,
    SinusoidProfile,
    amplification_report,
    platoon,
    simulate as run_simulation,
    stop_and_go_profile,
)
from platoon_synth.synthesis import (
    Stage1Mode,
    SynthesisResult,
    branch_objective,
    synthesize,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FAILED = 2

MAX_SWEEP_POINTS = 10_000_000


def setup_logging(verbose: bool) -> logging.Logger:
    """Set up logging configuration."""
    level = logging.DEBUG if verbose else logging.INFO

    logger = logging.getLogger("platoon_synth")
    # file handler always records DEBUG
    logger.setLevel(logging.DEBUG)

    for handler in logger.handlers[:]:
        logger.removeHandler(handler)

    console_handler = logging.StreamHandler()
    console_handler.setLevel(level)

    log_dir = Path.home() / ".platoon-synth" / "logs"
    log_dir.mkdir(parents=True, exist_ok=True)
    file_handler = logging.FileHandler(log_dir / "platoon_synth.log")
    file_handler.setLevel(logging.DEBUG)

    formatter = logging.Formatter(
        "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
    )
    console_handler.setFormatter(formatter)
    file_handler.setFormatter(formatter)

    logger.addHandler(console_handler)
    logger.addHandler(file_handler)

    logger.propagate = False

    return logger


def _header() -> Dict[str, str]:
    return {
        "tool": "platoon-synth",
        "version": __version__,
        "generated_at": datetime.now(timezone.utc).isoformat(),
    }


def _write_json(path: Path, payload: Dict[str, Any]) -> None:
    document = {"header": _header()}
    document.update(payload)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(document, f, indent=2)


def _write_csv(
    path: Path, columns: Sequence[str], rows: Sequence[Sequence[float]]
) -> None:
    np.savetxt(
        path,
        np.asarray(rows, dtype=float).reshape(len(rows), len(columns)),
        delimiter=",",
        header=",".join(columns),
        comments="",
        fmt="%.10g",
    )


def _fail(
    console: Console,
    error: Exception,
    out: Optional[Path],
    code: int,
    logger: Optional[logging.Logger] = None,
) -> None:
    """Report an error, record it in ``out`` when given, and exit."""
    if isinstance(error, PlatoonSynthError):
        payload = error.to_dict()
    else:
        payload = {"error": type(error).__name__, "message": str(error)}
    console.print(f"[red]Error ({payload['error']}):[/red] {payload['message']}")
    if logger is not None:
        logger.debug(f"Command failed with {payload['error']}", exc_info=error)
    if out is not None:
        _write_json(out, payload)
    sys.exit(code)


def _parse_vector(text: str, name: str) -> List[float]:
    try:
        values = [float(v) for v in text.replace(" ", "").split(",") if v]
    except ValueError:
        raise ConfigurationError(
            f"{name} must be comma-separated numbers, got {text!r}"
        )
    if len(values) != 4:
        raise ConfigurationError(f"{name} needs 4 values, got {len(values)}")
    return values


def _parse_gains(text: str) -> Gains:
    """A preset name (``unc``, ``case1``, ...) or ``k1,k2,k3,k4``."""
    preset = NAMED_GAINS.get(text.strip().lower())
    if preset is not None:
        return preset
    return Gains.from_sequence(_parse_vector(text, "Gains"))


def _parse_axis(text: str) -> Tuple[int, np.ndarray]:
    """``index:start:stop:count`` with a 1-based kappa index."""
    parts = text.split(":")
    if len(parts) != 4:
        raise ConfigurationError(f"Axis must be index:start:stop:count, got {text!r}")
    try:
        index = int(parts[0])
        start, stop = float(parts[1]), float(parts[2])
        count = int(parts[3])
    except ValueError:
        raise ConfigurationError(f"Malformed axis {text!r}")
    if not 1 <= index <= 4:
        raise ConfigurationError(f"Axis index must be 1..4, got {index}")
    if count < 1:
        raise ConfigurationError(f"Axis count must be >= 1, got {count}")
    values = np.array([start]) if count == 1 else np.linspace(start, stop, count)
    return index, values


def _load_config(
    config: Optional[Path], seed: Optional[int], overrides: Dict[str, Any]
) -> RunConfig:
    run = load_run_config(config)
    if seed is not None:
        run.seed = seed
    for key, value in overrides.items():
        if value is not None:
            setattr(run, key, value)
    return run


def _format_vector(values: Sequence[float]) -> str:
    return "[" + ", ".join(f"{v:.4f}" for v in values) + "]"


@click.group()
@click.version_option(version=__version__)
@click.option("--verbose", "-v", is_flag=True, help="Enable verbose output")
@click.pass_context
def cli(ctx: click.Context, verbose: bool) -> None:
    """platoon-synth - string-stable controller synthesis for CAV platoons."""
    ctx.ensure_object(dict)
    ctx.obj["verbose"] = verbose
    ctx.obj["logger"] = setup_logging(verbose)
    ctx.obj["console"] = Console()


config_option = click.option(
    "--config",
    "-c",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="Flat JSON run configuration",
)
seed_option = click.option("--seed", type=int, help="Random seed (overrides config)")
out_option = click.option(
    "--out", "-o", type=click.Path(path_type=Path), help="Output file"
)
format_option = click.option(
    "--format",
    "fmt",
    type=click.Choice(["json", "csv"], case_sensitive=False),
    default=None,
    help="Output format for --out (default: json)",
)


@cli.command()
@config_option
@seed_option
@out_option
@click.option(
    "--stage1",
    type=click.Choice([m.value for m in Stage1Mode]),
    help="Stage-1 mode (overrides config)",
)
@click.option("--omega1", type=float, help="Lower band edge (overrides config)")
@click.pass_context
def synth(
    ctx: click.Context,
    config: Optional[Path],
    seed: Optional[int],
    out: Optional[Path],
    stage1: Optional[str],
    omega1: Optional[float],
) -> None:
    """Run the two-stage synthesis and certify the result."""
    console: Console = ctx.obj["console"]
    logger: logging.Logger = ctx.obj["logger"]

    try:
        run = _load_config(config, seed, {"stage1_mode": stage1, "omega1": omega1})
        cfg = run.to_synthesis_config(max_workers=thread_count())
    except ConfigurationError as e:
        _fail(console, e, out, EXIT_USAGE, logger)
        return
    out = out or (Path(run.out) if run.out else None)

    console.print(
        f"[bold blue]Synthesizing:[/bold blue] theta = {cfg.params.theta}, "
        f"band [{cfg.omega1}, {cfg.omega2}], seed {cfg.seed}"
    )

    def progress_callback(message: str) -> None:
        if ctx.obj["verbose"]:
            console.print(f"[dim]{message}[/dim]")

    try:
        with console.status("[bold green]Synthesizing gains..."):
            result = synthesize(cfg, progress_callback=progress_callback, logger=logger)
    except ConfigurationError as e:
        _fail(console, e, out, EXIT_USAGE, logger)
        return
    except PlatoonSynthError as e:
        _fail(console, e, out, EXIT_FAILED, logger)
        return

    _display_synthesis_result(console, result)

    if out:
        payload = {"config": cfg.to_dict(), "result": result.to_dict()}
        if not result.feasible:
            failure = CertificationFailed(result.diagnostics["certification"])
            payload.update(failure.to_dict())
        _write_json(out, payload)
        console.print(f"\n[green]Result saved to:[/green] {out}")

    if not result.feasible:
        console.print(
            f"[red]CertificationFailed:[/red] {result.diagnostics['certification']}"
        )
        sys.exit(EXIT_FAILED)


@cli.command()
@config_option
@out_option
@click.option("--gains", "-g", "gains_text", help="Preset name or k1,k2,k3,k4")
@click.option(
    "--omega1",
    "omega1_values",
    type=float,
    multiple=True,
    help="Lower band edge; repeat for a band table",
)
@click.option("--theta", type=float, help="Communication delay (overrides config)")
@click.pass_context
def verify(
    ctx: click.Context,
    config: Optional[Path],
    out: Optional[Path],
    gains_text: Optional[str],
    omega1_values: Tuple[float, ...],
    theta: Optional[float],
) -> None:
    """Check local stability and string stability of a gain set."""
    console: Console = ctx.obj["console"]
    logger: logging.Logger = ctx.obj["logger"]

    try:
        run = _load_config(config, None, {"theta": theta})
        if gains_text is not None:
            k = _parse_gains(gains_text)
        else:
            k = run.gain_set() or K_STAR_CASE1
        params = run.params
        peak = PeakOptions(grid_points=run.grid_points)
        omega1_list = list(omega1_values) or [run.omega1]
        report = _verification(params, k, omega1_list, run.omega2, peak)
    except PlatoonSynthError as e:
        _fail(console, e, out, EXIT_USAGE, logger)
        return

    _display_verification(console, report)

    if out:
        _write_json(out, report)
        console.print(f"\n[green]Report saved to:[/green] {out}")


def _verification(
    params: VehicleParams,
    k: Gains,
    omega1_values: Sequence[float],
    omega2: float,
    peak: PeakOptions,
) -> Dict[str, Any]:
    stability = local_stability(params, k)
    taylor = taylor_string_stability(params, k)
    report: Dict[str, Any] = {
        "params": params.to_dict(),
        "gains": k.as_list(),
        "stability": stability.to_dict(),
        "verdict": "locally stable" if stability.hurwitz else "locally unstable",
        "eta": lemma1_eta(params, k),
        "taylor": taylor.to_dict(),
        "bands": [],
        "global_norm": None,
        "omega_star": None,
    }
    if not stability.hurwitz:
        return report

    mag = partial(exact_magnitude, DelayTF.from_gains(params, k))
    for omega1 in omega1_values:
        result = peak_on_band(mag, omega1, omega2, peak)
        report["bands"].append(
            {
                "omega1": omega1,
                "omega2": omega2,
                "banded_norm": result.peak,
                "omega_star": result.omega_star,
            }
        )
    limit = global_band_limit(params.T, params.theta, omega2)
    global_result = hinf_global(mag, limit, peak)
    report["global_norm"] = global_result.peak
    report["omega_star"] = global_result.omega_star
    return report


@cli.command()
@config_option
@out_option
@format_option
@click.option(
    "--axis",
    "axes",
    multiple=True,
    required=True,
    help="index:start:stop:count over kappa (1 to 3 axes)",
)
@click.option("--center", help="Fixed kappa k1,k2,k3,k4 (default: small-delay optimum)")
@click.pass_context
def sweep(
    ctx: click.Context,
    config: Optional[Path],
    out: Optional[Path],
    fmt: Optional[str],
    axes: Tuple[str, ...],
    center: Optional[str],
) -> None:
    """Evaluate the branch objective on a grid of kappa values."""
    console: Console = ctx.obj["console"]
    logger: logging.Logger = ctx.obj["logger"]

    try:
        run = _load_config(config, None, {})
        cfg = run.to_synthesis_config()
        if not 1 <= len(axes) <= 3:
            raise ConfigurationError(f"Sweep takes 1 to 3 axes, got {len(axes)}")
        parsed = [_parse_axis(a) for a in axes]
        indices = [index for index, _ in parsed]
        if len(set(indices)) != len(indices):
            raise ConfigurationError("Sweep axes must use distinct kappa indices")
        total = int(np.prod([values.size for _, values in parsed]))
        if total > MAX_SWEEP_POINTS:
            raise ConfigurationError(
                f"Grid of {total} points exceeds the limit of {MAX_SWEEP_POINTS}"
            )
        base = _parse_vector(center, "Center") if center else list(KAPPA_STAR_CASE1)
    except PlatoonSynthError as e:
        _fail(console, e, out, EXIT_USAGE, logger)
        return

    points = []
    for combo in itertools.product(*(values for _, values in parsed)):
        kappa = list(base)
        for index, value in zip(indices, combo):
            kappa[index - 1] = float(value)
        points.append(kappa)

    objective = partial(branch_objective, cfg=cfg)
    workers = thread_count()
    console.print(f"[bold blue]Sweeping[/bold blue] {total} points over kappa{indices}")
    with Progress(console=console) as progress:
        task = progress.add_task("Evaluating objective...", total=total)
        values: List[float] = []
        if workers and workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as executor:
                for value in executor.map(objective, points):
                    values.append(value)
                    progress.update(task, advance=1)
        else:
            for kappa in points:
                values.append(objective(kappa))
                progress.update(task, advance=1)

    best = min(range(total), key=lambda i: (values[i], points[i]))
    console.print(
        f"[green]Minimum[/green] h = {values[best]:.6f} at kappa = "
        f"{_format_vector(points[best])}"
    )

    if out:
        if (fmt or run.format) == "csv":
            rows = [p + [v] for p, v in zip(points, values)]
            _write_csv(out, ["kappa1", "kappa2", "kappa3", "kappa4", "h"], rows)
        else:
            _write_json(
                out,
                {
                    "axes": [
                        {"index": index, "values": vals.tolist()}
                        for index, vals in parsed
                    ],
                    "center": base,
                    "alpha": cfg.alpha,
                    "points": [{"kappa": p, "h": v} for p, v in zip(points, values)],
                    "minimum": {"kappa": points[best], "h": values[best]},
                },
            )
        console.print(f"\n[green]Grid saved to:[/green] {out}")


@cli.command("pade-error")
@config_option
@out_option
@format_option
@click.option("--gains", "-g", "gains_text", help="Preset name or k1,k2,k3,k4")
@click.option("--theta", type=float, help="Communication delay (overrides config)")
@click.option("--order", "-n", type=int, help="Padé order (overrides config)")
@click.option("--points", type=int, default=501, show_default=True)
@click.pass_context
def pade_error(
    ctx: click.Context,
    config: Optional[Path],
    out: Optional[Path],
    fmt: Optional[str],
    gains_text: Optional[str],
    theta: Optional[float],
    order: Optional[int],
    points: int,
) -> None:
    """Relative magnitude error of the Taylor and Padé approximations."""
    console: Console = ctx.obj["console"]
    logger: logging.Logger = ctx.obj["logger"]

    try:
        run = _load_config(config, None, {"theta": theta, "pade_order": order})
        k = _parse_gains(gains_text) if gains_text else (run.gain_set() or K_STAR_CASE1)
        tf = DelayTF.from_gains(run.params, k)
        exact = partial(exact_magnitude, tf)
        pade = relative_error_profile(
            exact, approx_tf(tf, run.pade_order).magnitude, DEFAULT_BAND, points
        )
        taylor = relative_error_profile(
            exact, partial(taylor_magnitude, tf), DEFAULT_BAND, points
        )
    except PlatoonSynthError as e:
        _fail(console, e, out, EXIT_USAGE, logger)
        return

    table = Table(title="Relative magnitude error (%)")
    table.add_column("Approximation", style="cyan")
    table.add_column("Max |error|", style="yellow")
    table.add_row(f"Padé (N = {run.pade_order})", f"{pade.max_abs:.6f}")
    table.add_row("Taylor", f"{taylor.max_abs:.6f}")
    console.print(table)

    if out:
        if (fmt or run.format) == "csv":
            rows = np.column_stack([pade.omega, pade.values, taylor.values])
            _write_csv(out, ["omega", "pade_percent", "taylor_percent"], rows.tolist())
        else:
            _write_json(
                out,
                {
                    "gains": k.as_list(),
                    "theta": run.params.theta,
                    "order": run.pade_order,
                    "pade": pade.to_dict(),
                    "taylor": taylor.to_dict(),
                },
            )
        console.print(f"\n[green]Series saved to:[/green] {out}")


@cli.command()
@config_option
@out_option
@format_option
@click.option(
    "--gains",
    "-g",
    "gains_list",
    multiple=True,
    help="Preset name or k1,k2,k3,k4; repeat to compare",
)
@click.option("--theta", type=float, help="Communication delay (overrides config)")
@click.option("--points", type=int, default=501, show_default=True)
@click.pass_context
def response(
    ctx: click.Context,
    config: Optional[Path],
    out: Optional[Path],
    fmt: Optional[str],
    gains_list: Tuple[str, ...],
    theta: Optional[float],
    points: int,
) -> None:
    """Exact magnitude response |F(jw)| of one or more gain sets."""
    console: Console = ctx.obj["console"]
    logger: logging.Logger = ctx.obj["logger"]

    try:
        run = _load_config(config, None, {"theta": theta})
        names = list(gains_list) or ["unc", "case1"]
        gain_sets = [_parse_gains(name) for name in names]
        series = [
            magnitude_profile(
                partial(exact_magnitude, DelayTF.from_gains(run.params, k)),
                DEFAULT_BAND,
                points,
            )
            for k in gain_sets
        ]
    except PlatoonSynthError as e:
        _fail(console, e, out, EXIT_USAGE, logger)
        return

    table = Table(title=f"|F(jw)| on [{DEFAULT_BAND[0]}, {DEFAULT_BAND[1]}] rad/s")
    table.add_column("Gains", style="cyan")
    table.add_column("k", style="blue")
    table.add_column("Max |F|", style="yellow")
    for name, k, s in zip(names, gain_sets, series):
        table.add_row(name, _format_vector(k.as_list()), f"{s.max_abs:.6f}")
    console.print(table)

    if out:
        if (fmt or run.format) == "csv":
            columns = ["omega"] + [f"mag_{i + 1}" for i in range(len(series))]
            rows = np.column_stack([series[0].omega] + [s.values for s in series])
            _write_csv(out, columns, rows.tolist())
        else:
            _write_json(
                out,
                {
                    "theta": run.params.theta,
                    "responses": [
                        {"name": name, "gains": k.as_list(), **s.to_dict()}
                        for name, k, s in zip(names, gain_sets, series)
                    ],
                },
            )
        console.print(f"\n[green]Responses saved to:[/green] {out}")


@cli.command()
@config_option
@out_option
@format_option
@click.option(
    "--scenario",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="JSON scenario document (overrides the platoon options)",
)
@click.option(
    "--platoon",
    "platoon_text",
    default="HDV,CAV,HDV",
    show_default=True,
    help="Comma-separated vehicle types",
)
@click.option("--gains", "-g", "gains_text", help="CAV gains: preset or k1,k2,k3,k4")
@click.option(
    "--profile",
    type=click.Choice(["stop-and-go", "sinusoid", "chirp"]),
    default="stop-and-go",
    show_default=True,
)
@click.option("--omega", type=float, default=1.0, help="Sinusoid frequency (rad/s)")
@click.option("--duration", type=float, default=60.0, help="Sinusoid/chirp length (s)")
@click.option("--dt", type=float, help="Integration step (s)")
@click.option("--horizon", type=float, help="Simulated time (s)")
@click.option("--report", is_flag=True, help="Print the amplification report")
@click.pass_context
def simulate(
    ctx: click.Context,
    config: Optional[Path],
    out: Optional[Path],
    fmt: Optional[str],
    scenario: Optional[Path],
    platoon_text: str,
    gains_text: Optional[str],
    profile: str,
    omega: float,
    duration: float,
    dt: Optional[float],
    horizon: Optional[float],
    report: bool,
) -> None:
    """Simulate a mixed platoon driven by a leader disturbance."""
    console: Console = ctx.obj["console"]
    logger: logging.Logger = ctx.obj["logger"]

    try:
        run = _load_config(config, None, {})
        if scenario is not None:
            with open(scenario, "r", encoding="utf-8") as f:
                sc = PlatoonScenario.from_dict(json.load(f))
        else:
            k = (
                _parse_gains(gains_text)
                if gains_text
                else (run.gain_set() or K_STAR_CASE1)
            )
            leader: LeaderProfile
            if profile == "sinusoid":
                leader = SinusoidProfile(1.0, omega, duration)
            elif profile == "chirp":
                leader = ChirpProfile(1.0, run.omega1, run.omega2, duration)
            else:
                leader = stop_and_go_profile()
            kinds = [s for s in platoon_text.split(",") if s.strip()]
            try:
                vehicles = platoon([s.strip() for s in kinds], run.params, k)
            except ValueError as e:
                if isinstance(e, ConfigurationError):
                    raise
                raise ConfigurationError(f"Unknown vehicle type in {platoon_text!r}")
            sc = PlatoonScenario(vehicles, leader, dt=dt, horizon=horizon)
    except (PlatoonSynthError, OSError, json.JSONDecodeError, KeyError) as e:
        _fail(console, e, out, EXIT_USAGE, logger)
        return

    console.print(
        f"[bold blue]Simulating[/bold blue] {len(sc.vehicles)} followers for "
        f"{sc.horizon} s (dt = {sc.dt})"
    )
    with console.status("[bold green]Integrating..."):
        trajectory = run_simulation(sc, logger=logger)
    amplification = amplification_report(trajectory)

    if report:
        _display_amplification(console, trajectory.summary(), amplification.to_dict())

    if out:
        if (fmt or run.format) == "csv":
            trajectory.to_csv(out)
        else:
            _write_json(
                out,
                {
                    "scenario": sc.to_dict(),
                    "summary": trajectory.summary(),
                    "amplification": amplification.to_dict(),
                },
            )
        console.print(f"\n[green]Trajectory saved to:[/green] {out}")


def _display_synthesis_result(console: Console, result: SynthesisResult) -> None:
    """Display the synthesized gains and their certification."""
    table = Table(title="Synthesis Result")
    table.add_column("Quantity", style="cyan")
    table.add_column("Value", style="yellow")
    table.add_row("k*", _format_vector(result.k_star.as_list()))
    table.add_row("kappa*", _format_vector(result.kappa_star.tolist()))
    table.add_row("k0", _format_vector(result.k0.as_list()))
    table.add_row("kappa0", _format_vector(result.kappa0.tolist()))
    if result.mu0 is not None:
        table.add_row("mu0", _format_vector(result.mu0.tolist()))
    table.add_row("Banded norm", f"{result.banded_norm:.6f}")
    table.add_row("Global norm", f"{result.global_norm:.6f}")
    eigenvalues = ", ".join(f"{ev:.4f}" for ev in result.stability.eigenvalues)
    table.add_row("Eigenvalues", eigenvalues)
    table.add_row("Spectral abscissa", f"{result.stability.spectral_abscissa:.3e}")
    console.print(table)

    status = "[green]feasible[/green]" if result.feasible else "[red]infeasible[/red]"
    console.print(
        Panel(
            f"Certification: {status}\n"
            f"Iterations: {result.diagnostics.get('iterations')}, "
            f"evaluations: {result.diagnostics.get('evaluations')}",
            title="Certification",
        )
    )


def _display_verification(console: Console, report: Dict[str, Any]) -> None:
    """Display a verification report."""
    info = Table.grid(padding=1)
    info.add_column(style="bold blue")
    info.add_column()
    stability = report["stability"]
    info.add_row("Gains:", _format_vector(report["gains"]))
    info.add_row("Margins:", _format_vector(stability["margins"]))
    info.add_row(
        "Eigenvalues:",
        ", ".join(f"{complex(re, im):.4f}" for re, im in stability["eigenvalues"]),
    )
    verdict_style = "green" if stability["hurwitz"] else "red"
    info.add_row("Verdict:", f"[{verdict_style}]{report['verdict']}[/{verdict_style}]")
    info.add_row("eta:", f"{report['eta']:.6f}")
    taylor = report["taylor"]
    info.add_row(
        "Taylor check:",
        f"p = {taylor['p']:.4f}, q = {taylor['q']:.4f}, r = {taylor['r']:.4f} "
        f"({'certified' if taylor['certified'] else 'not certified'})",
    )
    if report["global_norm"] is not None:
        info.add_row("Global norm:", f"{report['global_norm']:.6f}")
    console.print(Panel(info, title="Verification"))

    if report["bands"]:
        table = Table(title="Banded norms")
        table.add_column("omega1", style="cyan")
        table.add_column("omega2", style="cyan")
        table.add_column("Norm", style="yellow")
        table.add_column("omega*", style="green")
        for band in report["bands"]:
            table.add_row(
                f"{band['omega1']:g}",
                f"{band['omega2']:g}",
                f"{band['banded_norm']:.4f}",
                f"{band['omega_star']:.4f}",
            )
        console.print(table)


def _display_amplification(
    console: Console, summary: Dict[str, Any], amplification: Dict[str, Any]
) -> None:
    """Display per-link energy ratios."""
    table = Table(title="Acceleration amplification")
    table.add_column("Link", style="cyan")
    table.add_column("Type", style="magenta")
    table.add_column("L2 ratio", style="yellow")
    table.add_column("Peak ratio", style="green")

    def fmt(value: Optional[float]) -> str:
        return "undefined" if value is None else f"{value:.4f}"

    for link in [amplification["leader_link"]] + amplification["links"]:
        table.add_row(
            f"{link['upstream']} -> {link['downstream']}",
            link["kind"],
            fmt(link["l2_ratio"]),
            fmt(link["peak_ratio"]),
        )
    console.print(table)
    verdict = "attenuating" if amplification["attenuating"] else "amplifying"
    console.print(
        f"[blue]CAV links:[/blue] {verdict}; min spacing "
        f"{_format_vector(summary['min_spacing'])}"
    )


def main() -> None:
    """Main entry point for the CLI."""
    try:
        cli(standalone_mode=False)
    except click.exceptions.Abort:
        sys.exit(EXIT_USAGE)
    except click.ClickException as e:
        e.show()
        sys.exit(EXIT_USAGE)


if __name__ == "__main__":
    main()
