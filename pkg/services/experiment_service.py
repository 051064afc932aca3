import csv
import json
import math
import os
import time

import numpy as np
from scipy import stats

from app.dependencies import logger
from config.settings import settings
from services.ensemble_service import EnsembleService
from services.entities import (
    EXPERIMENT_CHECKS,
    BetaParam,
    ExperimentConfig,
    ExperimentReport,
    RngSeed,
    Statistic,
)
from services.errors import DomainError, FitFailureError, UnsupportedEnsembleError
from services.modgauss_service import ZONE_GAMMA, ZONE_XI_GRID, ModGaussService
from services.partition_service import PartitionService
from services.sampler_service import SamplerService

REPORT_SCHEMA_VERSION = 1
CSV_HEADER = ("replica", "statistic", "log_density")

CERTIFICATION_TS = (-0.5, 0.2, 0.5)
# t = -0.5 только в отчете: e^{-L/2} может иметь бесконечную дисперсию
CERTIFICATION_CHECKED_TS = (0.2, 0.5)
CLT_THRESHOLDS = (0.5, 1.0, 1.5, 2.0)
MDP_THRESHOLDS = (0.1, 0.2)
LLT_POINTS = (0.0, 1.0)
LLT_INTERVAL = (-1.0, 1.0)
LLT_DELTA = 0.25
SE_MULTIPLIER = 3.0
POPESCU_IDENTITY_TOLERANCE = 1e-9
# эксцесс e^{tL}, начиная с которого SE считается джекнайфом
_HEAVY_TAIL_KURTOSIS = 50.0


def _finite_or_none(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def _clean(obj):
    """Заменяет nan/inf на null, numpy-скаляры на числа python."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        obj = obj.item()
    return _finite_or_none(obj)


def cumulants_with_errors(values: np.ndarray) -> dict:
    """Первые три k-статистики и их асимптотические стандартные ошибки."""
    values = np.asarray(values, dtype=float)
    m = values.size
    centered = values - values.mean()
    mu = {k: float(np.mean(centered**k)) for k in (2, 3, 4, 6)}
    var_k3 = mu[6] - mu[3] ** 2 - 6 * mu[2] * mu[4] + 9 * mu[2] ** 3
    return {
        "mean": float(values.mean()),
        "mean_se": math.sqrt(mu[2] / m),
        "variance": float(stats.kstat(values, 2)) if m > 1 else 0.0,
        "variance_se": math.sqrt(max(mu[4] - mu[2] ** 2, 0.0) / m),
        "third": float(stats.kstat(values, 3)) if m > 2 else 0.0,
        "third_se": math.sqrt(max(var_k3, 0.0) / m),
    }


def empirical_log_mgf(values: np.ndarray, t: float) -> tuple[float, float, str]:
    """
    Оценка log E[e^{tX}] и ее стандартная ошибка: дельта-метод по среднему e^{tX}
    или джекнайф, если e^{tX} тяжелохвостая.
    """
    values = np.asarray(values, dtype=float)
    m = values.size
    shift = float(values.max() if t > 0 else values.min())
    weights = np.exp(t * (values - shift))
    total = float(weights.sum())
    estimate = math.log(total / m) + t * shift

    kurtosis = float(stats.kurtosis(weights, fisher=False)) if m > 3 else 0.0
    if t >= 0 and kurtosis < _HEAVY_TAIL_KURTOSIS:
        se = float(weights.std(ddof=1) / (math.sqrt(m) * weights.mean()))
        return estimate, se, "delta"

    leave_one_out = np.log((total - weights) / (m - 1))
    se = math.sqrt((m - 1) / m * float(np.sum((leave_one_out - leave_one_out.mean()) ** 2)))
    return estimate, se, "jackknife"


class ExperimentService:

    @staticmethod
    def _draw(config: ExperimentConfig, beta: BetaParam):
        """Конфигурации и L_n по репликам; для ансамблей без матричной модели - цепь MCMC."""
        spec, n = config.spec, config.n
        if SamplerService.has_matrix_model(spec):
            samples = SamplerService.replicate(
                lambda seed: SamplerService.sample(spec, n, beta, seed),
                config.replicas,
                config.seed,
            )
            points = np.stack([s.points for s in samples])
            log_densities = np.array([s.log_density for s in samples])
            return points, log_densities, None

        chain = SamplerService.mcmc_chain(
            spec, n, beta, config.replicas, RngSeed(config.seed)
        )
        diagnostics = {
            "acceptance_rate": chain.diagnostics.acceptance_rate,
            "burn_in": chain.diagnostics.burn_in,
            "thinning": chain.diagnostics.thinning,
            "ess_estimate": chain.diagnostics.ess_estimate,
            "step_size": chain.diagnostics.step_size,
        }
        return chain.configurations, chain.log_densities, diagnostics

    @staticmethod
    def _limits(config: ExperimentConfig, beta: BetaParam, notes: list[str]) -> dict:
        limits = {
            "sigma2_beta": EnsembleService.sigma2_beta(beta),
            "a_beta": EnsembleService.a_beta(beta),
            "e_beta": None,
        }
        try:
            limits["e_beta"] = EnsembleService.e_beta(config.spec, beta)
        except UnsupportedEnsembleError as e:
            notes.append(f"E_beta недоступна: {e}")
        return limits

    @staticmethod
    def _ks_threshold(config: ExperimentConfig, beta: BetaParam, notes: list[str]) -> dict:
        """Порог KS: max(C n^(-1/6), универсальный порог); для прочих ансамблей - только универсальный."""
        fallback = settings.KS_FALLBACK_THRESHOLD
        result = {
            "ks_threshold": fallback,
            "kolmogorov_bound": None,
            "zone_control": None,
        }
        if config.spec.kind not in ZONE_GAMMA:
            return result
        try:
            zone = ModGaussService.zone_control_fit(
                config.spec, beta, [config.n], ZONE_XI_GRID
            )
            bound = ModGaussService.kolmogorov_bound(zone, config.n, beta)
        except (FitFailureError, DomainError) as e:
            notes.append(f"Оценка Колмогорова недоступна, порог KS {fallback:g}: {e}")
            return result
        result["ks_threshold"] = max(bound, fallback)
        result["kolmogorov_bound"] = bound
        result["zone_control"] = {
            "K1": zone.K1,
            "K2": zone.K2,
            "D": zone.D,
            "dominated": zone.dominated,
        }
        return result

    @staticmethod
    def _statistic(
        config: ExperimentConfig,
        log_densities: np.ndarray,
        energies: np.ndarray | None,
        limits: dict,
    ) -> np.ndarray:
        n = config.n
        if config.statistic is Statistic.LOG_DENSITY:
            return log_densities
        if config.statistic is Statistic.POPESCU_ENERGY:
            if energies is None:
                raise DomainError("Энергия Попеску определена при n >= 2")
            return energies
        if limits["e_beta"] is None:
            raise UnsupportedEnsembleError(
                f"Статистика {config.statistic.value} требует E_beta, "
                f"недоступную для {config.spec.label()}"
            )
        centered = log_densities + n * limits["e_beta"]
        if config.statistic is Statistic.CENTERED_Y:
            return centered
        return centered / math.sqrt(n * limits["sigma2_beta"])

    @staticmethod
    def _tail_table(
        config: ExperimentConfig, beta: BetaParam, centered: np.ndarray, notes: list[str]
    ) -> list[dict]:
        n = config.n
        sigma = math.sqrt(EnsembleService.sigma2_beta(beta))
        normalized = centered / (sigma * math.sqrt(n))
        rows = [
            {
                "kind": "clt",
                "threshold": y,
                "empirical_frequency": float(np.mean(normalized >= y)),
                "predicted_value": ModGaussService.clt_tail(y),
            }
            for y in CLT_THRESHOLDS
        ]

        try:
            ModGaussService.check_spec(config.spec, n)
        except DomainError as e:
            notes.append(f"mdp и llt пропущены: {e}")
            return rows

        params = ModGaussService.mod_gauss_params(n, beta)
        moderate = centered / (n ** (2 / 3) * params.sigma2)
        for x in MDP_THRESHOLDS:
            rows.append(
                {
                    "kind": "mdp",
                    "threshold": x,
                    "empirical_frequency": float(np.mean(moderate >= x)),
                    "predicted_value": ModGaussService.mdp_tail(config.spec, n, beta, x),
                }
            )

        scale = params.t_n**LLT_DELTA
        a, b = LLT_INTERVAL
        for x in LLT_POINTS:
            shifted = normalized - x
            frequency = float(np.mean((shifted > a / scale) & (shifted < b / scale)))
            rows.append(
                {
                    "kind": "llt",
                    "threshold": x,
                    "empirical_frequency": frequency,
                    "scaled_value": scale * frequency,
                    "predicted_value": ModGaussService.llt_value(x, a, b),
                }
            )
        return rows

    @staticmethod
    def _certification(
        config: ExperimentConfig, beta: BetaParam, log_densities: np.ndarray
    ) -> list[dict]:
        rows = []
        for t in CERTIFICATION_TS:
            estimate, se, method = empirical_log_mgf(log_densities, t)
            exact = PartitionService.cgf(config.spec, config.n, beta, t).value
            rows.append(
                {
                    "t": t,
                    "empirical": estimate,
                    "standard_error": se,
                    "se_method": method,
                    "exact": exact,
                    "within_3se": bool(abs(estimate - exact) <= SE_MULTIPLIER * se),
                    "checked": t in CERTIFICATION_CHECKED_TS,
                }
            )
        return rows

    @staticmethod
    def _popescu(
        config: ExperimentConfig, beta: BetaParam, points: np.ndarray, log_densities
    ) -> tuple[np.ndarray, dict]:
        spec, n = config.spec, config.n
        energies = np.array([PartitionService.popescu_energy(spec, p) for p in points])
        potentials = np.array(
            [float(np.sum(EnsembleService.potential(spec, p))) for p in points]
        )
        implied = np.array(
            [
                PartitionService.popescu_from_log_density(spec, n, beta, ld, vs)
                for ld, vs in zip(log_densities, potentials)
            ]
        )
        spread = float(energies.std(ddof=1)) if energies.size > 1 else 0.0
        studentized = (energies - energies.mean()) / spread if spread > 0 else energies
        block = {
            "centering": "empirical",
            "mean": float(energies.mean()),
            "scaled_variance": float(n**3 * energies.var(ddof=1)) if energies.size > 1 else 0.0,
            "identity_max_error": float(np.max(np.abs(energies - implied))),
            "ks_studentized": float(stats.kstest(studentized, "norm").statistic),
        }
        return energies, block

    @staticmethod
    def run_experiment(config: ExperimentConfig, write: bool = True) -> ExperimentReport:
        """
        Выборка, статистика по репликам и сравнение с точными предсказаниями.
        Файлы пишутся только после успешного завершения всех вычислений.
        """
        started = time.perf_counter()
        beta = BetaParam.coerce(config.beta)
        spec, n = config.spec, config.n
        notes: list[str] = []
        logger.info(
            f"Эксперимент {spec.label()} n={n} beta={beta.beta:g} "
            f"m={config.replicas} seed={config.seed}"
        )

        points, log_densities, mcmc = ExperimentService._draw(config, beta)
        if mcmc is not None:
            notes.append("реплики - прореженные состояния одной цепи MCMC")

        limits = ExperimentService._limits(config, beta, notes)
        energies, popescu = None, None
        if n >= 2:
            energies, popescu = ExperimentService._popescu(
                config, beta, points, log_densities
            )
        statistic = ExperimentService._statistic(config, log_densities, energies, limits)

        exact_mean, exact_var, exact_third = PartitionService.cgf_derivatives(spec, n, beta)
        log_cumulants = cumulants_with_errors(log_densities)
        scaled = {
            "mean_over_n": log_cumulants["mean"] / n,
            "variance_over_n": log_cumulants["variance"] / n,
            "third_over_n": log_cumulants["third"] / n,
            "minus_e_beta": None if limits["e_beta"] is None else -limits["e_beta"],
            "sigma2_beta": limits["sigma2_beta"],
            "minus_a_beta": -limits["a_beta"],
            "exact_mean_over_n": exact_mean / n,
            "exact_variance_over_n": exact_var / n,
            "exact_third_over_n": exact_third / n,
        }

        exact_normalized = (log_densities - exact_mean) / math.sqrt(exact_var)
        ks_exact = float(stats.kstest(exact_normalized, "norm").statistic)
        ks = math.nan
        tail_table: list[dict] = []
        if limits["e_beta"] is not None:
            centered = log_densities + n * limits["e_beta"]
            ks = float(
                stats.kstest(
                    centered / math.sqrt(n * limits["sigma2_beta"]), "norm"
                ).statistic
            )
            tail_table = ExperimentService._tail_table(config, beta, centered, notes)

        certification = ExperimentService._certification(config, beta, log_densities)
        exact_predictions = {
            **limits,
            "exact_mean": exact_mean,
            "exact_variance": exact_var,
            "exact_third_cumulant": exact_third,
            "cgf": {str(row["t"]): row["exact"] for row in certification},
        }
        ks_threshold = ExperimentService._ks_threshold(config, beta, notes)
        exact_predictions.update(ks_threshold)

        available = {
            "mean": abs(log_cumulants["mean"] - exact_mean)
            <= SE_MULTIPLIER * log_cumulants["mean_se"],
            "variance": abs(log_cumulants["variance"] - exact_var)
            <= SE_MULTIPLIER * log_cumulants["variance_se"],
            "third-cumulant": abs(log_cumulants["third"] - exact_third)
            <= SE_MULTIPLIER * log_cumulants["third_se"],
            "ks": ks_exact <= ks_threshold["ks_threshold"],
            "certification": all(r["within_3se"] for r in certification if r["checked"]),
        }
        if popescu is not None:
            available["popescu"] = (
                popescu["identity_max_error"] <= POPESCU_IDENTITY_TOLERANCE
            )
        selected = config.checks or tuple(c for c in EXPERIMENT_CHECKS if c in available)
        missing = [c for c in selected if c not in available]
        if missing:
            raise DomainError(f"Проверки {missing} неприменимы к этому эксперименту")
        pass_flags = {c: bool(available[c]) for c in selected}

        report = ExperimentReport(
            schema_version=REPORT_SCHEMA_VERSION,
            config=config.to_dict(),
            empirical_cumulants=cumulants_with_errors(statistic),
            scaled_cumulants=scaled,
            ks_distance=ks,
            ks_distance_exact=ks_exact,
            tail_table=tail_table,
            exact_predictions=exact_predictions,
            certification=certification,
            pass_flags=pass_flags,
            runtime_seconds=time.perf_counter() - started,
            mcmc=mcmc,
            popescu=popescu,
            notes=notes,
        )
        if write:
            ExperimentService.write_report(report, config.output_path, statistic, log_densities)
        logger.info(
            f"Эксперимент {spec.label()} n={n}: "
            f"{'пройден' if report.passed else 'не пройден'} {pass_flags}"
        )
        return report

    @staticmethod
    def report_json(report: ExperimentReport) -> str:
        return json.dumps(
            _clean(report.to_dict()), sort_keys=True, indent=2, ensure_ascii=False
        )

    @staticmethod
    def write_report(
        report: ExperimentReport,
        output_path: str,
        statistic: np.ndarray,
        log_densities: np.ndarray,
    ) -> tuple[str, str]:
        """Пишет {output_path}.json и {output_path}.csv через временные файлы."""
        directory = os.path.dirname(output_path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        json_path, csv_path = f"{output_path}.json", f"{output_path}.csv"
        json_tmp, csv_tmp = f"{json_path}.tmp", f"{csv_path}.tmp"
        try:
            with open(json_tmp, "w", encoding="utf-8") as stream:
                stream.write(ExperimentService.report_json(report))
                stream.write("\n")
            with open(csv_tmp, "w", encoding="utf-8", newline="") as stream:
                writer = csv.writer(stream)
                writer.writerow(CSV_HEADER)
                for i, (value, ld) in enumerate(zip(statistic, log_densities)):
                    writer.writerow((i, repr(float(value)), repr(float(ld))))
            os.replace(json_tmp, json_path)
            os.replace(csv_tmp, csv_path)
        except Exception:
            for path in (json_tmp, csv_tmp):
                if os.path.exists(path):
                    os.remove(path)
            logger.error(f"Отчет {output_path} не записан")
            raise
        return json_path, csv_path
