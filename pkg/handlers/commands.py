import json
import os
import sys
from functools import wraps

import click
import numpy as np

import messages
from app import logger
from app.loader import cli
from config.settings import settings
from handlers.decorators import EXIT_CHECK_FAILURE, error_command_handler
from services import (
    EnsembleKind,
    EnsembleService,
    EnsembleSpec,
    ExperimentConfig,
    ExperimentService,
    LdpService,
    ModGaussService,
    PartitionService,
    RngSeed,
    RunRegistryService,
    SamplerService,
    Statistic,
    VerificationService,
)
from services.errors import DomainError
from services.modgauss_service import ZONE_XI_GRID


def ensemble_options(func):
    """Общие опции выбора ансамбля: --ensemble и его параметры."""

    @click.option(
        "--ensemble",
        type=click.Choice([kind.value for kind in EnsembleKind]),
        required=True,
    )
    @click.option("--theta", type=float, default=None)
    @click.option("--kappa1", type=float, default=None)
    @click.option("--kappa2", type=float, default=None)
    @click.option("--d", "d", type=float, default=None)
    @wraps(func)
    def wrapper(ensemble, theta, kappa1, kappa2, d, **kwargs):
        spec = EnsembleSpec.from_name(ensemble, theta, kappa1, kappa2, d)
        return func(spec=spec, **kwargs)

    return wrapper


def _emit(text: str, out: str | None) -> None:
    if out is None:
        click.echo(text)
        return
    directory = os.path.dirname(out)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(out, "w", encoding="utf-8") as stream:
        stream.write(text)
        stream.write("\n")


@cli.command()
@error_command_handler
@ensemble_options
@click.option("--n", type=int, required=True)
@click.option("--beta", type=float, default=None)
@click.option(
    "--complex",
    "complex_beta",
    type=float,
    nargs=2,
    default=None,
    help="Комплексное beta: действительная и мнимая части.",
)
def partition(spec, n, beta, complex_beta):
    """log Z_n(beta) по формуле Сельберга."""
    if complex_beta:
        value = PartitionService.log_partition_complex(spec, n, complex(*complex_beta))
        if isinstance(value, complex):
            click.echo(
                messages.partition_complex_text.format(real=value.real, imag=value.imag)
            )
            return
    else:
        if beta is None:
            raise DomainError("Нужно задать --beta или --complex")
        value = PartitionService.log_partition(spec, n, beta)
    click.echo(messages.partition_text.format(value=value))


@cli.command()
@error_command_handler
@ensemble_options
@click.option("--n", type=int, required=True)
@click.option("--beta", type=float, required=True)
@click.option("--z", "z_real", type=float, required=True)
@click.option("--zi", "z_imag", type=float, default=0.0)
def cgf(spec, n, beta, z_real, z_imag):
    """log E[exp(z L_n)] точно."""
    z = complex(z_real, z_imag) if z_imag else z_real
    value = PartitionService.cgf(spec, n, beta, z).value
    if isinstance(value, complex):
        click.echo(messages.partition_complex_text.format(real=value.real, imag=value.imag))
    else:
        click.echo(messages.partition_text.format(value=value))


@cli.command()
@error_command_handler
@ensemble_options
@click.option("--beta", type=float, required=True)
@click.option("--x", "xs", type=float, multiple=True, help="Точка сетки, можно повторять.")
@click.option(
    "--grid",
    type=(float, float, int),
    default=None,
    help="Равномерная сетка: начало, конец, число точек.",
)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def rate(spec, beta, xs, grid, out):
    """Функция скорости Lambda*(x) в формате CSV."""
    points = list(xs)
    if grid is not None:
        start, stop, num = grid
        points.extend(np.linspace(start, stop, num).tolist())
    if not points:
        raise DomainError("Сетка x пуста: задайте --x или --grid")

    rows = [messages.rate_csv_header]
    for result in LdpService.rate_function_grid(spec, beta, points):
        argmax = "" if result.argmax_t is None else repr(result.argmax_t)
        rows.append(f"{result.x!r},{messages.format_rate(result.value)},{argmax}")
    _emit("\n".join(rows), out)


@cli.command()
@error_command_handler
@ensemble_options
@click.option("--n", type=int, required=True)
@click.option("--beta", type=float, required=True)
@click.option(
    "--kind",
    type=click.Choice(["clt", "mdp", "llt", "kolmogorov"]),
    required=True,
)
@click.option("--y", type=float, default=0.0, help="Порог для clt.")
@click.option("--x", type=float, default=None, help="Точка для mdp и llt.")
@click.option("--a", type=float, default=-1.0)
@click.option("--b", type=float, default=1.0)
def predict(spec, n, beta, kind, y, x, a, b):
    """Предсказания мод-гауссовой теории в формате JSON."""
    ModGaussService.check_spec(spec, n)
    params = ModGaussService.mod_gauss_params(n, beta)
    record = {
        "ensemble": spec.label(),
        "n": n,
        "beta": beta,
        "kind": kind,
        "t_n": params.t_n,
        "sigma2": params.sigma2,
        "a_beta": params.a_coeff,
        "e_beta": EnsembleService.e_beta(spec, beta),
    }
    if kind == "clt":
        record.update(y=y, value=ModGaussService.clt_tail(y))
    elif kind == "mdp":
        x = 0.5 if x is None else x
        record.update(x=x, value=ModGaussService.mdp_tail(spec, n, beta, x))
    elif kind == "llt":
        x = 0.0 if x is None else x
        record.update(x=x, a=a, b=b, value=ModGaussService.llt_value(x, a, b))
    else:
        zone = ModGaussService.zone_control_fit(spec, beta, [n], ZONE_XI_GRID)
        record.update(
            gamma=zone.gamma,
            v=zone.v,
            w=zone.w,
            D=zone.D,
            K1=zone.K1,
            K2=zone.K2,
            dominated=zone.dominated,
            constant=ModGaussService.kolmogorov_bound_constant(zone.D, zone.v, zone.K1),
            value=ModGaussService.kolmogorov_bound(zone, n, beta),
        )
    click.echo(json.dumps(record, sort_keys=True, indent=2, ensure_ascii=False))


@cli.command()
@error_command_handler
@ensemble_options
@click.option("--n", type=int, required=True)
@click.option("--beta", type=float, required=True)
@click.option("--seed", type=int, default=None)
@click.option("--replicas", type=int, default=1)
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv")
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def sample(spec, n, beta, seed, replicas, fmt, out):
    """Независимые конфигурации ансамбля."""
    seed = settings.DEFAULT_SEED if seed is None else seed
    samples = SamplerService.replicate(
        lambda stream: SamplerService.sample(spec, n, beta, stream),
        replicas,
        RngSeed(seed),
    )
    if fmt == "json":
        payload = [
            {"replica": i, "points": s.points.tolist(), "log_density": s.log_density}
            for i, s in enumerate(samples)
        ]
        _emit(json.dumps(payload, indent=2), out)
        return
    rows = [messages.sample_csv_header]
    for i, s in enumerate(samples):
        rows.extend(
            f"{i},{k},{point!r},{s.log_density!r}"
            for k, point in enumerate(s.points.tolist())
        )
    _emit("\n".join(rows), out)


@cli.command()
@error_command_handler
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--ensemble", type=click.Choice([kind.value for kind in EnsembleKind]))
@click.option("--theta", type=float, default=None)
@click.option("--kappa1", type=float, default=None)
@click.option("--kappa2", type=float, default=None)
@click.option("--d", "d", type=float, default=None)
@click.option("--n", type=int, default=None)
@click.option("--beta", type=float, default=None)
@click.option("--replicas", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--statistic", type=click.Choice([s.value for s in Statistic]), default=None)
@click.option("--checks", type=str, default=None, help="Имена проверок через запятую.")
@click.option("--out", type=str, default=None, help="Префикс путей отчета.")
@click.option("--record", is_flag=True, help="Сохранить итог в реестре запусков.")
def experiment(config_path, record, **flags):
    """Эксперимент Монте-Карло с отчетом JSON и CSV. Код 1, если проверка не пройдена."""
    overrides = {
        "ENSEMBLE": flags["ensemble"],
        "THETA": flags["theta"],
        "KAPPA1": flags["kappa1"],
        "KAPPA2": flags["kappa2"],
        "D": flags["d"],
        "N": flags["n"],
        "BETA": flags["beta"],
        "REPLICAS": flags["replicas"],
        "SEED": flags["seed"],
        "STATISTIC": flags["statistic"],
        "CHECKS": flags["checks"],
        "OUTPUT_PATH": flags["out"],
    }
    if config_path:
        config = ExperimentConfig.from_file(config_path, **overrides)
    else:
        if overrides["SEED"] is None:
            overrides["SEED"] = settings.DEFAULT_SEED
        if overrides["OUTPUT_PATH"] is None:
            overrides["OUTPUT_PATH"] = os.path.join(settings.REPORTS_DIR, "experiment")
        config = ExperimentConfig.from_mapping(
            {k: str(v) for k, v in overrides.items() if v is not None}
        )

    report = ExperimentService.run_experiment(config)
    click.echo(
        messages.experiment_summary_text.format(
            label=config.spec.label(),
            n=config.n,
            beta=config.beta,
            replicas=config.replicas,
            ks=messages.format_value(report.ks_distance),
            ks_exact=report.ks_distance_exact,
            flags=", ".join(f"{k}={'ok' if v else 'FAIL'}" for k, v in report.pass_flags.items()),
            verdict=messages.passed_text if report.passed else messages.failed_text,
        )
    )
    click.echo(
        messages.experiment_files_text.format(
            json_path=f"{config.output_path}.json", csv_path=f"{config.output_path}.csv"
        )
    )
    if record:
        run_id = RunRegistryService.record_run(
            config, report, f"{config.output_path}.json"
        )
        click.echo(messages.experiment_recorded_text.format(run_id=run_id))
    if not report.passed:
        sys.exit(EXIT_CHECK_FAILURE)


@cli.command()
@error_command_handler
@click.option("--check", "names", multiple=True, help="Запустить только эти проверки.")
def verify(names):
    """Батарея оракулов; код 0, только если все проверки пройдены."""
    results = VerificationService.verify_suite(list(names) or None)
    click.echo(messages.verify_header_text)
    for r in results:
        click.echo(
            messages.verify_row_text.format(
                name=r.name,
                value=messages.format_value(r.value),
                tolerance=r.tolerance,
                status=r.status.value,
            )
        )
    if not VerificationService.all_passed(results):
        logger.info("verify: есть непройденные проверки")
        sys.exit(EXIT_CHECK_FAILURE)


@cli.command()
@error_command_handler
@click.option("--limit", type=int, default=20)
def runs(limit):
    """Последние запуски из реестра."""
    entries = RunRegistryService.list_runs(limit)
    if not entries:
        click.echo(messages.no_runs_text)
        return
    for run in entries:
        click.echo(
            messages.runs_row_text.format(
                id=run.id,
                created_at=run.created_at,
                ensemble=run.ensemble,
                n=run.n,
                beta=run.beta,
                replicas=run.replicas,
                statistic=run.statistic,
                verdict=messages.passed_text if run.passed else messages.failed_text,
            )
        )
