"""
Набор оракулов: каждое замкнутое выражение сверяется с независимым вычислением
(квадратурой, точными суммами, тождествами).
"""

import math
import time
from itertools import product
from typing import Callable

import numpy as np
from scipy import special

import utils
from app.dependencies import logger
from services.ensemble_service import LOG_2PI, EnsembleService
from services.entities import (
    BetaParam,
    CheckStatus,
    EnsembleKind,
    EnsembleSpec,
    VerificationCheck,
)
from services.errors import ConvergenceError, DomainError, QuadratureBudgetError
from services.ldp_service import LdpService
from services.partition_service import PartitionService

_QUADRATURE_BOX = {
    EnsembleKind.HERMITE: (-10.0, 10.0),
    EnsembleKind.LAGUERRE: (0.0, 60.0),
    EnsembleKind.JACOBI: (0.0, 1.0),
    EnsembleKind.CAUCHY: (-math.inf, math.inf),
    EnsembleKind.CIRCULAR: (0.0, 2 * math.pi),
    EnsembleKind.CIRCULAR_JACOBI: (0.0, 2 * math.pi),
}


def _gauss_rule(spec: EnsembleSpec, n: int, beta: BetaParam, k: int):
    """
    Узлы и логарифмы весов одномерного правила, точного для многочленов
    (тригонометрических для круга) против веса e^{-n b V}.
    """
    nb = n * beta.beta_half
    kind = spec.kind
    if kind is EnsembleKind.HERMITE:
        u, w = special.roots_hermite(k)
        scale = 1 / math.sqrt(nb / 2)
        return u * scale, np.log(w) + math.log(scale)
    if kind is EnsembleKind.LAGUERRE:
        power = nb * (spec.theta - 1)
        rate = nb * spec.theta
        u, w = special.roots_genlaguerre(k, power)
        return u / rate, np.log(w) - (power + 1) * math.log(rate)
    if kind is EnsembleKind.JACOBI:
        a, c = nb * spec.kappa1, nb * spec.kappa2
        t, w = special.roots_jacobi(k, c, a)
        return (1 + t) / 2, np.log(w) - (a + c + 1) * math.log(2)
    if kind is EnsembleKind.CIRCULAR:
        nodes = 2 * math.pi * np.arange(k) / k
        return nodes, np.full(k, math.log(2 * math.pi / k))
    raise DomainError(f"Правило Гаусса для {spec.label()} не определено")


def tensor_gauss_log_partition(spec: EnsembleSpec, n: int, beta: BetaParam | float) -> float:
    """
    log Z тензорным правилом Гаусса. Точно при четном целом beta, когда
    |Delta|^beta - многочлен степени beta (n-1) по каждой переменной.
    """
    beta = BetaParam.coerce(beta)
    if beta.beta != round(beta.beta) or int(beta.beta) % 2:
        raise DomainError(f"Тензорное правило точно только при четном beta, получено {beta.beta}")
    k = int(beta.beta) * n + 2
    nodes, log_weights = _gauss_rule(spec, n, beta, k)
    index = np.array(list(product(range(k), repeat=n)))
    log_gaps = PartitionService.pair_log_sums(spec, nodes[index])
    return float(special.logsumexp(beta.beta * log_gaps + log_weights[index].sum(axis=1)))


def quadrature_log_partition_n2(spec: EnsembleSpec, beta: BetaParam | float) -> float:
    """log Z при n = 2 вложенной адаптивной квадратурой с изломом на диагонали."""
    beta = BetaParam.coerce(beta)
    lo, hi = _QUADRATURE_BOX[spec.kind]
    nb = 2 * beta.beta_half

    def weight(x: float) -> float:
        return math.exp(-nb * EnsembleService.potential(spec, x))

    def gap(x: float, y: float) -> float:
        if spec.is_circular:
            return abs(2 * math.sin(0.5 * (x - y)))
        return abs(x - y)

    def inner(x: float) -> float:
        wx = weight(x)
        if wx == 0.0:
            return 0.0

        def integrand(y: float) -> float:
            wy = weight(y)
            return 0.0 if wy == 0.0 else gap(x, y) ** beta.beta * wy

        # излом на диагонали: интеграл делится в точке y = x
        left = utils.integrate(integrand, lo, x, epsabs=1e-14, epsrel=1e-10)
        right = utils.integrate(integrand, x, hi, epsabs=1e-14, epsrel=1e-10)
        return (left + right) * wx

    return math.log(utils.integrate(inner, lo, hi, epsabs=1e-14, epsrel=1e-9))


def _relative(a: float, b: float) -> float:
    return abs(a - b) / max(abs(b), 1e-300)


def _selberg_gauss(spec: EnsembleSpec, n: int, beta: float) -> float:
    exact = PartitionService.log_partition(spec, n, beta)
    return abs(math.expm1(tensor_gauss_log_partition(spec, n, beta) - exact))


def _selberg_adaptive(spec: EnsembleSpec, beta: float) -> float:
    exact = PartitionService.log_partition(spec, 2, beta)
    return abs(math.expm1(quadrature_log_partition_n2(spec, beta) - exact))


def _log_gamma_known() -> float:
    return max(
        abs(utils.log_gamma(0.5) - 0.5 * math.log(math.pi)),
        abs(utils.log_gamma(11.0) - math.log(math.factorial(10))),
        abs(utils.log_gamma(1.0)),
    )


def _log_gamma_recurrence() -> float:
    xs = np.logspace(-2, 6, 41)
    return max(
        abs(utils.log_gamma(1 + x) - utils.log_gamma(x) - math.log(x))
        / max(1.0, abs(utils.log_gamma(1 + x)))
        for x in xs
    )


def _binet_reconstruction() -> float:
    worst = 0.0
    for z in (0.5, 1.0, 2.0, 5.0, 10.0, 50.0, 100.0):
        rebuilt = (
            (z + 0.5) * math.log(z)
            - z
            + 0.5 * LOG_2PI
            + 1 / (12 * z)
            - utils.binet_remainder(z)
        )
        worst = max(worst, abs(rebuilt - utils.log_gamma(1 + z)))
    return worst


def _barnes_asymptotic() -> float:
    return abs(utils.log_barnes_g_asymptotic(100) - utils.log_barnes_g_integer(100))


def _entropy(spec: EnsembleSpec) -> float:
    return _relative(EnsembleService.entropy_quadrature(spec), EnsembleService.entropy(spec))


def _hermite_entropy_exact() -> float:
    return abs(EnsembleService.entropy(EnsembleSpec.hermite()) - (0.5 - LOG_2PI))


def _expansion_residual() -> float:
    n, beta = 10_000, 2.0
    difference = PartitionService.hermite_expansion_residual(
        2 * n, beta
    ) - PartitionService.hermite_expansion_residual(n, beta)
    expected = PartitionService.expansion_logn_coefficient(beta) * math.log(2)
    return _relative(difference, expected)


def _ldp_duality() -> float:
    spec, beta = EnsembleSpec.hermite(), 2.0
    worst = 0.0
    for t in (-0.8, -0.5, 0.1, 1.0, 4.0):
        slope = LdpService.scaled_cgf_prime(spec, beta, t)
        legendre = t * slope - LdpService.scaled_cgf(spec, beta, t)
        worst = max(worst, abs(LdpService.rate_function(spec, beta, slope).value - legendre))
    return worst


def _ldp_zero() -> float:
    spec = EnsembleSpec.laguerre(2.0)
    return abs(
        LdpService.rate_function(spec, 2.0, -EnsembleService.e_beta(spec, 2.0)).value
    )


def _circular_shift() -> float:
    return max(LdpService.rate_function_shift_check(2.0, x) for x in (-2.0, -1.5, -1.0))


# имя, вычисление погрешности, допуск
CHECKS: list[tuple[str, Callable[[], float], float]] = [
    ("log_gamma_known_values", _log_gamma_known, 1e-12),
    ("log_gamma_recurrence", _log_gamma_recurrence, 1e-12),
    ("binet_reconstruction", _binet_reconstruction, 1e-10),
    ("barnes_asymptotic_n100", _barnes_asymptotic, 1e-4),
    ("selberg_hermite_n2_beta1", lambda: _selberg_adaptive(EnsembleSpec.hermite(), 1.0), 1e-5),
    ("selberg_circular_n2_beta1", lambda: _selberg_adaptive(EnsembleSpec.circular(), 1.0), 1e-5),
    ("selberg_cauchy_d1_n2_beta2", lambda: _selberg_adaptive(EnsembleSpec.cauchy(1.0), 2.0), 1e-5),
    (
        "selberg_circular_jacobi_n2_beta2",
        lambda: _selberg_adaptive(EnsembleSpec.circular_jacobi(0.5), 2.0),
        1e-5,
    ),
    ("selberg_hermite_n3_beta2", lambda: _selberg_gauss(EnsembleSpec.hermite(), 3, 2.0), 1e-5),
    ("selberg_hermite_n3_beta4", lambda: _selberg_gauss(EnsembleSpec.hermite(), 3, 4.0), 1e-5),
    ("selberg_circular_n3_beta2", lambda: _selberg_gauss(EnsembleSpec.circular(), 3, 2.0), 1e-5),
    ("selberg_circular_n3_beta4", lambda: _selberg_gauss(EnsembleSpec.circular(), 3, 4.0), 1e-5),
    (
        "selberg_laguerre_n3_theta2",
        lambda: _selberg_gauss(EnsembleSpec.laguerre(2.0), 3, 2.0),
        1e-5,
    ),
    (
        "selberg_jacobi_n3_kappa1",
        lambda: _selberg_gauss(EnsembleSpec.jacobi(1.0, 1.0), 3, 2.0),
        1e-5,
    ),
    ("entropy_hermite_exact", _hermite_entropy_exact, 1e-15),
    ("entropy_laguerre_theta2", lambda: _entropy(EnsembleSpec.laguerre(2.0)), 1e-6),
    ("entropy_jacobi_kappa1", lambda: _entropy(EnsembleSpec.jacobi(1.0, 1.0)), 1e-6),
    ("entropy_cauchy_d1", lambda: _entropy(EnsembleSpec.cauchy(1.0)), 1e-6),
    ("entropy_cauchy_d2", lambda: _entropy(EnsembleSpec.cauchy(2.0)), 1e-6),
    ("expansion_residual_beta2", _expansion_residual, 0.05),
    ("ldp_duality_hermite", _ldp_duality, 1e-8),
    ("ldp_zero_at_mean_laguerre", _ldp_zero, 1e-9),
    ("ldp_circular_shift", _circular_shift, 1e-8),
]


class VerificationService:

    @staticmethod
    def run_check(name: str, func: Callable[[], float], tolerance: float) -> VerificationCheck:
        try:
            value = float(func())
        except (QuadratureBudgetError, ConvergenceError) as e:
            return VerificationCheck(name, None, tolerance, CheckStatus.INCONCLUSIVE, str(e))
        status = CheckStatus.PASS if value <= tolerance else CheckStatus.FAIL
        return VerificationCheck(name, value, tolerance, status)

    @staticmethod
    def verify_suite(names: list[str] | None = None) -> list[VerificationCheck]:
        """Прогоняет все оракулы (или выбранные по имени) в фиксированном порядке."""
        started = time.perf_counter()
        selected = CHECKS
        if names:
            known = {name for name, _, _ in CHECKS}
            unknown = [name for name in names if name not in known]
            if unknown:
                raise DomainError(f"Неизвестные проверки: {unknown}")
            selected = [check for check in CHECKS if check[0] in names]

        results = [VerificationService.run_check(*check) for check in selected]
        failed = [r.name for r in results if r.status is not CheckStatus.PASS]
        logger.info(
            f"Проверка: {len(results) - len(failed)}/{len(results)} пройдено "
            f"за {time.perf_counter() - started:.1f} с; не пройдены: {failed}"
        )
        return results

    @staticmethod
    def all_passed(results: list[VerificationCheck]) -> bool:
        return all(r.status is CheckStatus.PASS for r in results)
