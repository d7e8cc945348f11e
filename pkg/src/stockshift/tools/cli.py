"""
stockshift command-line interface
"""

import dataclasses
import json
import sys
from pathlib import Path

import click
import tabulate
from halo import Halo
from loguru import logger
from pydantic import ValidationError

from stockshift.__about__ import __version__
from stockshift.bench.harness import SchemeSpec, run_benchmark
from stockshift.bench.plots import plot_policy_sweep, plot_profiles
from stockshift.bench.policies import compare_policies
from stockshift.domain import InstanceError, MovementPolicy, ObjectiveTerms, SendRule
from stockshift.instgen import PRESETS, GeneratorError, GeneratorParams, generate_instance
from stockshift.model import build_transfer_model
from stockshift.optimizer.branch_bound import SolverFault
from stockshift.optimizer.export import ExportFormat, export_model
from stockshift.packing import PackingFault, pack_all
from stockshift.pipelines import PipelineReport, run_rtrp, run_tp
from stockshift.serialization import dumps_instance, load_instance, load_solution, save_solution
from stockshift.settings.schema import SettingsSchema, load_settings

DEFAULT_CONFIG = Path("config") / "options.toml"
EXIT_USAGE = 1
EXIT_NO_SOLUTION = 2
EXIT_SOLVER_FAULT = 3

CONTEXT = {"help_option_names": ["-h", "--help"], "max_content_width": 120}


class FloatList(click.ParamType):
    name = "floats"

    def convert(self, value, param, ctx):
        if isinstance(value, list | tuple):
            return [float(v) for v in value]
        try:
            return [float(v) for v in str(value).split(",") if v.strip()]
        except ValueError:
            self.fail(f"{value!r} is not a comma-separated list of numbers", param, ctx)


FLOATS = FloatList()


def _configure_logging(*, verbose: bool) -> None:
    logger.remove()
    logger.add(
        sys.stderr,
        level="DEBUG" if verbose else "INFO",
        format="<green>{time:HH:mm:ss}</green> | <level>{level: <7}</level> | {message}",
    )


def _settings(ctx: click.Context) -> SettingsSchema:
    return ctx.find_object(SettingsSchema) or SettingsSchema()


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
        logger.info(f"Wrote {out}")
    else:
        click.echo(text, nl=False)


@click.group(
    context_settings=CONTEXT,
    epilog="Exit codes: 0 success, 1 usage or validation error, 2 infeasible or no solution within the time limit, "
    "3 solver or packing failure.",
)
@click.version_option(version=__version__, prog_name="stockshift")
@click.option("--config", "config_path", type=click.Path(dir_okay=False), help="TOML options file")
@click.option("-v", "--verbose", is_flag=True, help="Log solver progress at DEBUG level")
@click.pass_context
def cli(ctx: click.Context, config_path: str | None, *, verbose: bool = False):
    """Stock redistribution for warehouse and outlet networks"""
    _configure_logging(verbose=verbose)
    if config_path is not None and not Path(config_path).exists():
        msg = f"config file {config_path} does not exist"
        raise click.BadParameter(msg, param_hint="--config")
    ctx.obj = load_settings(config_path or DEFAULT_CONFIG)


@click.command()
@click.option("--preset", type=click.Choice(list(PRESETS)), default="small", show_default=True)
@click.option("--seed", type=click.IntRange(min=0), default=0, show_default=True)
@click.option("--policy", type=click.Choice([p.value for p in MovementPolicy]), default="GR", show_default=True)
@click.option("--factor", type=click.FloatRange(min=0), default=1.0, show_default=True, help="Warehouse cost factor")
@click.option("--out", type=click.Path(dir_okay=False), help="Instance file (default: standard output)")
def generate(preset: str, seed: int, policy: str, factor: float, out: str | None):
    """Generate a synthetic instance"""
    params = GeneratorParams.from_preset(preset, rng_seed=seed, movement_policy=policy, ware_pack_cost_factor=factor)
    instance = generate_instance(params)
    _emit(dumps_instance(instance), out)


def _report_table(report: PipelineReport) -> str:
    rows = [
        ["scheme", report.scheme],
        ["status", report.status],
        ["MILP objective", report.milp_objective],
        ["MILP bound", report.milp_bound],
        ["MILP gap", report.milp_gap],
        ["nodes", report.milp_nodes],
    ]
    for phase, count in report.packages.items():
        rows.append([f"packages ({phase})", count])
    for phase, cost in report.transport.items():
        rows.append([f"transport ({phase})", cost])
    rows += [["lower bound", report.lower_bound], ["upper bound", report.upper_bound]]
    rows += [[f"time {phase} [s]", seconds] for phase, seconds in report.times.items()]
    return tabulate.tabulate(rows, headers=["Quantity", "Value"], tablefmt="heavy_grid", floatfmt=".6g")


@click.command()
@click.argument("instance_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--scheme", type=click.Choice(["tp", "rtrp"]), default="tp", show_default=True)
@click.option("--delta", type=click.FloatRange(0, 1, min_open=True), help="Capacity fill factor for rtrp")
@click.option("--alpha", type=click.FloatRange(min=0), help="Weight on unmet variable demand")
@click.option("--epsilon", type=click.FloatRange(min=0), help="Tie-break weight on transfers")
@click.option("--send-rule", type=click.Choice([r.value for r in SendRule]))
@click.option("--policy", type=click.Choice([p.value for p in MovementPolicy]), help="Restrict the movement set")
@click.option("--time-limit", type=click.FloatRange(min=0, min_open=True), help="Seconds for the MILP phase")
@click.option("--seed", type=click.IntRange(min=0), help="Seed for the rounding runs")
@click.option("--out", type=click.Path(dir_okay=False), help="Solution file")
@click.option("--report", "report_path", type=click.Path(dir_okay=False), help="Pipeline report JSON")
@click.option("--manifest", type=click.Path(dir_okay=False), help="Package manifest JSON")
@click.pass_context
def solve(
    ctx: click.Context,
    instance_file: str,
    scheme: str,
    delta: float | None,
    alpha: float | None,
    epsilon: float | None,
    send_rule: str | None,
    policy: str | None,
    time_limit: float | None,
    seed: int | None,
    out: str | None,
    report_path: str | None,
    manifest: str | None,
):
    """Solve an instance with T-P or RT-R-P"""
    settings = _settings(ctx).stockshift
    config = settings.solver_config(
        alpha=alpha, epsilon=epsilon, delta=delta, send_rule=send_rule, time_limit=time_limit, rng_seed=seed
    )
    limits = settings.solve_limits(time_limit)
    instance = load_instance(instance_file)
    if policy is not None:
        instance = instance.with_policy(MovementPolicy(policy))

    with Halo(text=f"Solving {instance_file} ({scheme})", spinner="dots", stream=sys.stderr, enabled=sys.stderr.isatty()):
        if scheme == "tp":
            report = run_tp(instance, config, limits, settings.packing.exact_threshold)
        else:
            report = run_rtrp(
                instance, config, limits, settings.rounding_config(config.rng_seed), settings.packing.exact_threshold
            )

    click.echo(_report_table(report))
    if report_path:
        Path(report_path).write_text(report.to_json() + "\n", encoding="utf-8")
    if not report.solved:
        logger.error(f"No solution: {report.status}")
        ctx.exit(EXIT_NO_SOLUTION)
    terms = report.terms["P"]
    solution = dataclasses.replace(
        report.packed.solution, objective=ObjectiveTerms(terms["transport"], terms["shortfall"], terms["tiebreak"])
    )
    if out:
        save_solution(solution, out, instance_path=instance_file)
        logger.info(f"Wrote {out}")
    if manifest:
        Path(manifest).write_text(json.dumps(report.packed.manifest_document(), indent=1) + "\n", encoding="utf-8")


@click.command(name="compare-policies")
@click.option("--instances", type=click.IntRange(min=1), default=5, show_default=True)
@click.option("--preset", type=click.Choice(list(PRESETS)), default="small", show_default=True)
@click.option("--alphas", type=FLOATS, help="Comma-separated aggressiveness values")
@click.option("--factors", type=FLOATS, help="Comma-separated warehouse cost factors")
@click.option("--time-limit", type=click.FloatRange(min=0, min_open=True))
@click.option("--seed", type=click.IntRange(min=0), default=0, show_default=True)
@click.option("--jobs", type=click.IntRange(min=1))
@click.option("--out-dir", type=click.Path(file_okay=False), default=".", show_default=True)
@click.pass_context
def compare_policies_command(
    ctx: click.Context,
    instances: int,
    preset: str,
    alphas: list[float] | None,
    factors: list[float] | None,
    time_limit: float | None,
    seed: int,
    jobs: int | None,
    out_dir: str,
):
    """Compare the CR, DR and GR policies over warehouse cost factors"""
    settings = _settings(ctx).stockshift
    Path(out_dir).mkdir(parents=True, exist_ok=True)
    result = compare_policies(
        instances,
        alphas or settings.bench.alphas,
        factors or settings.bench.scaling_factors,
        settings.solve_limits(time_limit),
        seed=seed,
        preset=preset,
        base_config=settings.solver_config(time_limit=time_limit),
        jobs=jobs or settings.bench.jobs,
        progress=True,
    )
    csv_path = Path(out_dir) / "policies.csv"
    result.records.to_csv(csv_path, index=False)
    logger.info(f"Wrote {csv_path}")
    for metric in ("worsening", "transport_worsening"):
        table = result.averages(metric)
        click.echo(f"\nmean {metric.replace('_', ' ')}")
        click.echo(tabulate.tabulate(table.reset_index(), headers="keys", tablefmt="heavy_grid", showindex=False))
        plot_policy_sweep(result, out_dir, metric)
    if result.excluded_count:
        click.echo(f"{result.excluded_count} comparisons excluded (no incumbent for some policy)")


@click.command()
@click.option("--set", "preset", type=click.Choice(list(PRESETS)), default="small", show_default=True)
@click.option("--schemes", help="Comma-separated schemes, tp or rtrp:<delta> [default: tp plus rtrp at each configured delta]")
@click.option("--instances", type=click.IntRange(min=1), default=1, show_default=True, help="Base instances")
@click.option("--alphas", type=FLOATS, help="Comma-separated alpha variations of each base instance")
@click.option("--seed", type=click.IntRange(min=0), default=0, show_default=True)
@click.option("--time-limit", type=click.FloatRange(min=0, min_open=True))
@click.option("--limits", "solved_limits", type=FLOATS, help="Time limits for the solved-percentage table")
@click.option("--jobs", type=click.IntRange(min=1))
@click.option("--out-dir", type=click.Path(file_okay=False), default=".", show_default=True)
@click.pass_context
def benchmark(
    ctx: click.Context,
    preset: str,
    schemes: str | None,
    instances: int,
    alphas: list[float] | None,
    seed: int,
    time_limit: float | None,
    solved_limits: list[float] | None,
    jobs: int | None,
    out_dir: str,
):
    """Benchmark T-P against RT-R-P on a generated test set"""
    settings = _settings(ctx).stockshift
    try:
        names = schemes.split(",") if schemes else settings.bench.schemes()
        specs = [SchemeSpec.parse(s) for s in names if s.strip()]
    except ValueError as exc:
        raise click.BadParameter(str(exc), param_hint="--schemes") from exc
    config = settings.solver_config(time_limit=time_limit)
    result = run_benchmark(
        preset,
        specs,
        settings.solve_limits(time_limit),
        n_instances=instances,
        seed=seed,
        alphas=alphas or settings.bench.benchmark_alphas,
        config=config,
        rounding=settings.rounding_config(config.rng_seed),
        exact_threshold=settings.packing.exact_threshold,
        jobs=jobs or settings.bench.jobs,
        progress=True,
    )
    Path(out_dir).mkdir(parents=True, exist_ok=True)
    csv_path = Path(out_dir) / f"benchmark_{preset}.csv"
    result.to_csv(csv_path)
    logger.info(f"Wrote {csv_path}")
    for metric in ("packages", "transport"):
        click.echo(f"\n{metric} per phase, normalized by the per-instance minimum")
        table = result.phase_table(metric)
        click.echo(tabulate.tabulate(table, headers="keys", tablefmt="heavy_grid", floatfmt=".4f"))
    limits = solved_limits or [config.time_limit or 300.0]
    click.echo("\ninstances with an incumbent within the limit [%]")
    click.echo(tabulate.tabulate(result.solved_table(limits), headers="keys", tablefmt="heavy_grid", floatfmt=".1f"))
    for metric in ("upper_bound", "time_total"):
        plot_profiles(result.profiles(metric), out_dir, f"benchmark_{preset}", metric)


@click.command()
@click.argument("instance_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--format", "fmt", type=click.Choice([f.value for f in ExportFormat]), default="mps", show_default=True)
@click.option("--relaxed", is_flag=True, help="Export RT_delta instead of T")
@click.option("--delta", type=click.FloatRange(0, 1, min_open=True))
@click.option("--alpha", type=click.FloatRange(min=0))
@click.option("--epsilon", type=click.FloatRange(min=0))
@click.option("--send-rule", type=click.Choice([r.value for r in SendRule]))
@click.option("--out", type=click.Path(dir_okay=False), help="Model file (default: standard output)")
@click.pass_context
def export(
    ctx: click.Context,
    instance_file: str,
    fmt: str,
    delta: float | None,
    alpha: float | None,
    epsilon: float | None,
    send_rule: str | None,
    out: str | None,
    *,
    relaxed: bool = False,
):
    """Write the MILP of an instance as MPS or LP"""
    config = _settings(ctx).stockshift.solver_config(alpha=alpha, epsilon=epsilon, delta=delta, send_rule=send_rule)
    model = build_transfer_model(load_instance(instance_file), config, relaxed=relaxed)
    _emit(export_model(model, fmt).decode("ascii"), out)


@click.command()
@click.argument("solution_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--instance", "instance_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--exact-threshold", type=click.IntRange(min=0))
@click.option("--out", type=click.Path(dir_okay=False), help="Manifest file (default: standard output)")
@click.pass_context
def pack(ctx: click.Context, solution_file: str, instance_file: str | None, exact_threshold: int | None, out: str | None):
    """Pack the transfers of a solution file into individual packages"""
    threshold = exact_threshold if exact_threshold is not None else _settings(ctx).stockshift.packing.exact_threshold
    instance = load_instance(instance_file) if instance_file else None
    solution, instance = load_solution(solution_file, instance)
    packed = pack_all(instance, solution, threshold)
    _emit(json.dumps(packed.manifest_document(), indent=1) + "\n", out)
    click.echo(
        tabulate.tabulate(
            [
                ["movements", len(packed.manifests)],
                ["packages", packed.solution.package_count],
                ["transport", packed.transport_cost],
                ["exact", packed.all_exact],
            ],
            tablefmt="heavy_grid",
        ),
        err=True,
    )


cli.add_command(generate)
cli.add_command(solve)
cli.add_command(compare_policies_command)
cli.add_command(benchmark)
cli.add_command(export)
cli.add_command(pack)


def main(argv: list[str] | None = None) -> int:
    """Run the CLI and map failures onto exit codes: 1 for bad input, 2 for no solution, 3 for a solver fault."""
    try:
        rv = cli.main(args=argv, prog_name="stockshift", standalone_mode=False)
    except click.exceptions.Abort:
        click.echo("Aborted!", err=True)
        return EXIT_USAGE
    except click.ClickException as exc:
        exc.show()
        return EXIT_USAGE
    except (ValidationError, InstanceError, GeneratorError, FileNotFoundError) as exc:
        logger.error(str(exc))
        return EXIT_USAGE
    except (SolverFault, PackingFault) as exc:
        logger.error(str(exc))
        return EXIT_SOLVER_FAULT
    return rv if isinstance(rv, int) else 0


def run():  # no cov
    sys.exit(main())


if __name__ == "__main__":
    run()
