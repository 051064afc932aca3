"""
Генераторы конфигураций бета-ансамблей.

Эрмит: трехдиагональная модель с N(0,1) на диагонали и chi_{beta(n-k)}/sqrt(2)
вне ее; ее собственные значения имеют плотность ~ |Delta|^beta exp(-sum x^2/2),
поэтому они масштабируются множителем sqrt(2/(n beta)).

Лагерр: L = B B^T, B нижняя двудиагональная с chi_{2a - beta(k-1)} на диагонали
и chi_{beta(n-k)} под ней, a = beta'(n theta - 1) + 1; собственные значения
масштабируются множителем 1/(n beta theta).

Круговой ансамбль: коэффициенты Верблюнского |alpha_k|^2 ~ Beta(1, beta(n-k-1)/2)
с равномерной фазой, alpha_{n-1} равномерно на окружности; спектр матрицы CMV.

Остальные ансамбли: метрополис по одной координате.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable

import numpy as np
from scipy.linalg import eigh_tridiagonal

from app.dependencies import logger
from config.settings import settings
from services.ensemble_service import EnsembleService
from services.entities import (
    BetaParam,
    ConfigurationSample,
    EnsembleKind,
    EnsembleSpec,
    McmcChain,
    McmcDiagnostics,
    RngSeed,
)
from services.errors import AepError, DomainError, SamplerError
from services.partition_service import PartitionService

# Скорость адаптации шага; равновесие при доле принятий MCMC_TARGET_ACCEPTANCE
_ADAPTION_RATE = 0.05


def _sorted_sample(
    spec: EnsembleSpec, n: int, beta: BetaParam, points: np.ndarray
) -> ConfigurationSample:
    points = np.sort(np.asarray(points, dtype=float))
    log_density = PartitionService.log_density(spec, n, beta, points)
    return ConfigurationSample(points, log_density, spec, beta, n)


def _check_size(n: int) -> None:
    if n < 1:
        raise DomainError(f"n должно быть >= 1, получено {n}")


class _MetropolisChain:
    """Метрополис со случайным блужданием по одной координате."""

    def __init__(
        self,
        spec: EnsembleSpec,
        beta: BetaParam,
        points: np.ndarray,
        step_size: float,
        rng: np.random.Generator,
    ):
        self.spec = spec
        self.beta = beta
        self.points = np.array(points, dtype=float)
        self.n = self.points.size
        self.step_size = step_size
        self.rng = rng
        self.accepted = 0
        self.proposed = 0
        target = settings.MCMC_TARGET_ACCEPTANCE
        self.adaption_uprate = math.exp(_ADAPTION_RATE * (1 - target))
        self.adaption_downrate = math.exp(-_ADAPTION_RATE * target)
        self.log_target = self._log_target(self.points)
        if not math.isfinite(self.log_target):
            raise SamplerError("Начальная конфигурация имеет нулевую плотность")

    def _log_target(self, points: np.ndarray) -> float:
        log_gaps = PartitionService.pair_log_sums(self.spec, points[None, :])[0]
        potential = float(np.sum(EnsembleService.potential(self.spec, points)))
        return self.beta.beta * log_gaps - self.n * self.beta.beta_half * potential

    def _gap_logs(self, value: float, j: int) -> float:
        diffs = value - self.points
        diffs[j] = 1.0
        if self.spec.is_circular:
            gaps = 2 * np.abs(np.sin(0.5 * diffs))
            gaps[j] = 1.0
        else:
            gaps = np.abs(diffs)
        if np.any(gaps == 0):
            return -math.inf
        return float(np.sum(np.log(gaps)))

    def _potential(self, value: float) -> float:
        try:
            return float(EnsembleService.potential(self.spec, value))
        except DomainError:
            return math.inf

    def _move(self, j: int, adapt: bool) -> None:
        current = self.points[j]
        proposal = current + self.rng.uniform(-self.step_size, self.step_size)
        if self.spec.is_circular:
            proposal = proposal % (2 * math.pi)

        new_potential = self._potential(proposal)
        new_gaps = self._gap_logs(proposal, j)
        delta = -math.inf
        if math.isfinite(new_potential) and math.isfinite(new_gaps):
            delta = self.beta.beta * (
                new_gaps - self._gap_logs(current, j)
            ) - self.n * self.beta.beta_half * (new_potential - self._potential(current))

        accepted = math.log(self.rng.random()) < delta
        if accepted:
            self.points[j] = proposal
            self.log_target += delta
            self.accepted += 1
        self.proposed += 1

        if adapt:
            if accepted:
                self.step_size *= self.adaption_uprate
            else:
                self.step_size *= self.adaption_downrate

    def sweep(self, adapt: bool = False) -> None:
        for j in range(self.n):
            self._move(j, adapt)

    def reset_counters(self) -> None:
        self.accepted = 0
        self.proposed = 0

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.proposed if self.proposed else 0.0


def _effective_sample_size(trace: np.ndarray) -> float:
    """ESS по автокорреляции с обрывом на первом отрицательном значении."""
    m = trace.size
    if m < 4 or np.ptp(trace) == 0:
        return float(max(m, 1))
    centered = trace - trace.mean()
    spectrum = np.fft.rfft(centered, n=2 * m)
    acf = np.fft.irfft(spectrum * np.conj(spectrum))[:m]
    acf /= acf[0]
    tau = 1.0
    for lag in range(1, m):
        if acf[lag] < 0:
            break
        tau += 2 * acf[lag]
    return float(m / tau)


class SamplerService:

    @staticmethod
    def sample_hermite(
        n: int, beta: BetaParam | float, seed: RngSeed
    ) -> ConfigurationSample:
        _check_size(n)
        beta = BetaParam.coerce(beta)
        rng = seed.generator()
        diag = rng.standard_normal(n)
        if n == 1:
            eigenvalues = diag
        else:
            degrees = beta.beta * np.arange(n - 1, 0, -1)
            off = np.sqrt(rng.chisquare(degrees)) / math.sqrt(2.0)
            eigenvalues = eigh_tridiagonal(diag, off, eigvals_only=True)
        scale = math.sqrt(2.0 / (n * beta.beta))
        return _sorted_sample(EnsembleSpec.hermite(), n, beta, scale * eigenvalues)

    @staticmethod
    def sample_laguerre(
        n: int, beta: BetaParam | float, theta: float, seed: RngSeed
    ) -> ConfigurationSample:
        _check_size(n)
        beta = BetaParam.coerce(beta)
        spec = EnsembleSpec.laguerre(theta)
        shape = beta.beta_half * (n * theta - 1) + 1
        k = np.arange(1, n + 1)
        diag_degrees = 2 * shape - beta.beta * (k - 1)
        if np.any(diag_degrees <= 0):
            raise DomainError(
                f"Двудиагональная модель Лагерра требует положительных степеней "
                f"свободы, получено {diag_degrees.min():g}"
            )
        rng = seed.generator()
        d = np.sqrt(rng.chisquare(diag_degrees))
        s = np.sqrt(rng.chisquare(beta.beta * np.arange(n - 1, 0, -1))) if n > 1 else []
        s = np.asarray(s, dtype=float)

        # трехдиагональная L = B B^T
        tri_diag = d**2
        tri_diag[1:] += s**2
        tri_off = d[:-1] * s
        if n == 1:
            eigenvalues = tri_diag
        else:
            eigenvalues = eigh_tridiagonal(tri_diag, tri_off, eigvals_only=True)
        if np.any(eigenvalues <= 0):
            raise SamplerError("Модель Лагерра дала неположительное собственное значение")
        return _sorted_sample(spec, n, beta, eigenvalues / (n * beta.beta * theta))

    @staticmethod
    def sample_circular(
        n: int, beta: BetaParam | float, seed: RngSeed
    ) -> ConfigurationSample:
        _check_size(n)
        beta = BetaParam.coerce(beta)
        rng = seed.generator()

        k = np.arange(n - 1)
        moduli = np.sqrt(rng.beta(1.0, beta.beta * (n - k - 1) / 2))
        phases = rng.uniform(0.0, 2 * math.pi, size=n)
        alphas = np.empty(n, dtype=complex)
        alphas[:-1] = moduli * np.exp(1j * phases[:-1])
        alphas[-1] = np.exp(1j * phases[-1])
        rhos = np.sqrt(np.clip(1 - np.abs(alphas[:-1]) ** 2, 0.0, None))

        def factor(start: int) -> np.ndarray:
            matrix = np.eye(n, dtype=complex)
            for j in range(start, n, 2):
                if j == n - 1:
                    matrix[j, j] = np.conj(alphas[j])
                else:
                    matrix[j : j + 2, j : j + 2] = [
                        [np.conj(alphas[j]), rhos[j]],
                        [rhos[j], -alphas[j]],
                    ]
            return matrix

        cmv = factor(0) @ factor(1)
        angles = np.mod(np.angle(np.linalg.eigvals(cmv)), 2 * math.pi)
        return _sorted_sample(EnsembleSpec.circular(), n, beta, angles)

    @staticmethod
    def _default_schedule(
        n: int, burn_in: int | None, thinning: int | None
    ) -> tuple[int, int]:
        burn_in = settings.MCMC_BURN_IN_FACTOR * n if burn_in is None else burn_in
        thinning = (
            max(1, settings.MCMC_THINNING_FACTOR * n) if thinning is None else thinning
        )
        if burn_in < 0 or thinning < 1:
            raise DomainError(f"Некорректные burn_in={burn_in}, thinning={thinning}")
        return burn_in, thinning

    @staticmethod
    def _start_chain(
        spec: EnsembleSpec, n: int, beta: BetaParam, seed: RngSeed, burn_in: int
    ) -> _MetropolisChain:
        points = EnsembleService.equilibrium_quantiles(spec, n)
        support = EnsembleService.equilibrium_support(spec)
        chain = _MetropolisChain(
            spec, beta, points, (support.hi - support.lo) / (2 * n), seed.generator()
        )
        for _ in range(burn_in):
            chain.sweep(adapt=True)
        chain.reset_counters()
        return chain

    @staticmethod
    def mcmc_chain(
        spec: EnsembleSpec,
        n: int,
        beta: BetaParam | float,
        kept: int,
        seed: RngSeed,
        burn_in: int | None = None,
        thinning: int | None = None,
    ) -> McmcChain:
        """Прореженная цепь из kept конфигураций после адаптивного прогрева."""
        _check_size(n)
        if kept < 1:
            raise DomainError(f"kept должно быть >= 1, получено {kept}")
        beta = BetaParam.coerce(beta)
        burn_in, thinning = SamplerService._default_schedule(n, burn_in, thinning)
        chain = SamplerService._start_chain(spec, n, beta, seed, burn_in)

        configurations = np.empty((kept, n))
        for i in range(kept):
            for _ in range(thinning):
                chain.sweep()
            configurations[i] = np.sort(chain.points)
        log_densities = PartitionService.log_density_batch(spec, n, beta, configurations)
        diagnostics = McmcDiagnostics(
            acceptance_rate=chain.acceptance_rate,
            burn_in=burn_in,
            thinning=thinning,
            ess_estimate=_effective_sample_size(log_densities),
            step_size=chain.step_size,
        )
        logger.info(
            f"MCMC {spec.label()} n={n} beta={beta.beta:g}: {kept} конфигураций, "
            f"принятие {diagnostics.acceptance_rate:.3f}, ESS {diagnostics.ess_estimate:.1f}"
        )
        return McmcChain(configurations, log_densities, diagnostics)

    @staticmethod
    def sample_mcmc(
        spec: EnsembleSpec,
        n: int,
        beta: BetaParam | float,
        steps: int,
        seed: RngSeed,
        burn_in: int | None = None,
        thinning: int | None = None,
    ) -> tuple[ConfigurationSample, McmcDiagnostics]:
        """steps - общее число проходов, включая прогрев."""
        _check_size(n)
        beta = BetaParam.coerce(beta)
        burn_in, thinning = SamplerService._default_schedule(n, burn_in, thinning)
        if steps <= burn_in:
            raise DomainError(
                f"steps должно превышать прогрев {burn_in}, получено {steps}"
            )
        chain = SamplerService._start_chain(spec, n, beta, seed, burn_in)
        trace = []
        for sweep in range(1, steps - burn_in + 1):
            chain.sweep()
            if sweep % thinning == 0:
                trace.append(chain.log_target)
        sample = _sorted_sample(spec, n, beta, chain.points)
        diagnostics = McmcDiagnostics(
            acceptance_rate=chain.acceptance_rate,
            burn_in=burn_in,
            thinning=thinning,
            ess_estimate=_effective_sample_size(np.asarray(trace)),
            step_size=chain.step_size,
        )
        return sample, diagnostics

    @staticmethod
    def metropolis_sweeps(
        spec: EnsembleSpec,
        beta: BetaParam | float,
        points,
        sweeps: int,
        step_size: float,
        seed: RngSeed,
    ) -> ConfigurationSample:
        """Несколько проходов без адаптации из заданной конфигурации."""
        beta = BetaParam.coerce(beta)
        chain = _MetropolisChain(spec, beta, points, step_size, seed.generator())
        for _ in range(sweeps):
            chain.sweep()
        return _sorted_sample(spec, chain.n, beta, chain.points)

    @staticmethod
    def sample(
        spec: EnsembleSpec, n: int, beta: BetaParam | float, seed: RngSeed
    ) -> ConfigurationSample:
        """Матричная модель, если она есть, иначе одна MCMC-цепь с прогревом."""
        kind = spec.kind
        if kind is EnsembleKind.HERMITE:
            return SamplerService.sample_hermite(n, beta, seed)
        if kind is EnsembleKind.LAGUERRE:
            return SamplerService.sample_laguerre(n, beta, spec.theta, seed)
        if kind is EnsembleKind.CIRCULAR:
            return SamplerService.sample_circular(n, beta, seed)
        burn_in, _ = SamplerService._default_schedule(n, None, None)
        sample, _ = SamplerService.sample_mcmc(spec, n, beta, burn_in + n, seed)
        return sample

    @staticmethod
    def has_matrix_model(spec: EnsembleSpec) -> bool:
        return spec.kind in (
            EnsembleKind.HERMITE,
            EnsembleKind.LAGUERRE,
            EnsembleKind.CIRCULAR,
        )

    @staticmethod
    def replicate(
        op: Callable[[RngSeed], ConfigurationSample],
        m: int,
        seed: RngSeed | int,
        workers: int | None = None,
    ) -> list[ConfigurationSample]:
        """
        m независимых выборок с потоками 0..m-1 от общего сида.
        Порядок результата не зависит от числа потоков.
        """
        if m < 1:
            raise DomainError(f"m должно быть >= 1, получено {m}")
        master = seed.master_seed if isinstance(seed, RngSeed) else int(seed)
        workers = settings.WORKERS if workers is None else workers

        def run(index: int) -> ConfigurationSample:
            try:
                return op(RngSeed(master, index))
            except SamplerError:
                raise
            except (AepError, ValueError, np.linalg.LinAlgError) as e:
                raise SamplerError(str(e), replica=index) from e

        if workers <= 1:
            return [run(i) for i in range(m)]
        with ThreadPoolExecutor(max_workers=workers) as executor:
            return list(executor.map(run, range(m)))
