import cmath
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special

import utils
from services.ensemble_service import LOG_2PI, EnsembleService
from services.entities import BetaParam, CgfEvaluation, EnsembleKind, EnsembleSpec
from services.errors import DomainError

# Шаг конечных разностей для кумулянтов
_CUMULANT_STEP = 1e-3
# Сколько попарных разностей держим в памяти за раз
_PAIR_CHUNK_ELEMENTS = 1 << 22


@dataclass(frozen=True)
class SelbergTerms:
    """
    log Z(b) = p11 b log b + p10 log b + p01 b + p00 + sum c_k log Г(a_k + b u_k),
    где b = beta/2. alpha1, alpha0, gamma0 - коэффициенты после выделения
    главной части Стирлинга из каждого log Г.
    """

    coeffs: np.ndarray
    shifts: np.ndarray
    scales: np.ndarray
    p11: float
    p10: float
    p01: float
    p00: float
    alpha1: float
    alpha0: float
    gamma0: float


def _fsum(values) -> float | complex:
    values = np.asarray(values)
    if np.iscomplexobj(values):
        return complex(math.fsum(values.real), math.fsum(values.imag))
    return math.fsum(values)


def _block(coeff: float, shift: float, scales) -> list[np.ndarray]:
    scales = np.atleast_1d(np.asarray(scales, dtype=float))
    return [
        np.stack([np.full_like(scales, coeff), np.full_like(scales, shift), scales])
    ]


@lru_cache(maxsize=64)
def selberg_terms(spec: EnsembleSpec, n: int) -> SelbergTerms:
    """Разложение формулы Сельберга ансамбля на гамма-множители и префактор."""
    if n < 1:
        raise DomainError(f"n должно быть >= 1, получено {n}")
    kind = spec.kind
    j1 = np.arange(1, n + 1, dtype=float)
    j0 = np.arange(0, n, dtype=float)
    p11 = p10 = p01 = p00 = 0.0

    if kind is EnsembleKind.HERMITE:
        terms = _block(1.0, 1.0, j1) + _block(-n, 1.0, 1.0)
        p11 = 0.5 * (n - n * n)
        p10 = -0.5 * n
        p01 = 0.5 * (n - n * n) * math.log(n)
        p00 = 0.5 * n * LOG_2PI - 0.5 * n * math.log(n)
    elif kind is EnsembleKind.LAGUERRE:
        theta = spec.theta
        shifted = theta * n - n + j1 - 1
        # log Г(1 + 0 b) = 0 при theta = 1
        terms = (
            _block(1.0, 1.0, j1)
            + _block(1.0, 1.0, shifted[shifted > 0])
            + _block(-n, 1.0, 1.0)
        )
        log_nt = math.log(n * theta)
        p11 = -n * (theta * n - 1)
        p10 = -float(n)
        p01 = -n * (theta * n - 1) * log_nt
        p00 = -n * log_nt
    elif kind is EnsembleKind.JACOBI:
        k1, k2 = spec.kappa1, spec.kappa2
        terms = (
            _block(1.0, 1.0, k1 * n + j0)
            + _block(1.0, 1.0, k2 * n + j0)
            + _block(1.0, 1.0, j0 + 1)
            + _block(-1.0, 2.0, (k1 + k2 + 1) * n + j0 - 1)
            + _block(-float(n), 1.0, 1.0)
        )
    elif kind is EnsembleKind.CAUCHY:
        d = spec.d
        terms = (
            _block(1.0, -1.0, j0 + 2 * d * n + 2)
            + _block(1.0, 1.0, j0 + 1)
            + _block(-2.0, 0.0, j0 + d * n + 1)
            + _block(-float(n), 1.0, 1.0)
        )
        p01 = (n * (n - 1) - 2 * (1 + d) * n * n) * math.log(2)
        p00 = 2 * n * math.log(2) + n * math.log(math.pi)
    elif kind is EnsembleKind.CIRCULAR:
        terms = _block(1.0, 1.0, float(n)) + _block(-float(n), 1.0, 1.0)
        p00 = n * LOG_2PI
    else:
        d = spec.d
        terms = (
            _block(1.0, 1.0, j0 + 2 * d * n)
            + _block(1.0, 1.0, j0 + 1)
            + _block(-2.0, 1.0, j0 + d * n)
            + _block(-float(n), 1.0, 1.0)
        )
        p00 = n * LOG_2PI

    coeffs, shifts, scales = np.concatenate(terms, axis=1)
    alpha1 = p11 + _fsum(coeffs * scales)
    alpha0 = p10 + _fsum(coeffs * (shifts - 0.5))
    gamma0 = p00 + _fsum(
        coeffs * ((shifts - 0.5) * np.log(scales) + utils.HALF_LOG_2PI)
    )
    return SelbergTerms(
        coeffs, shifts, scales, p11, p10, p01, p00, alpha1, alpha0, gamma0
    )


def _check_gamma_arguments(spec: EnsembleSpec, args: np.ndarray) -> None:
    real_parts = np.real(args)
    if np.any(real_parts <= 0):
        worst = args[np.argmin(real_parts)]
        raise DomainError(
            f"{spec.label()}: аргумент гамма-функции {worst} имеет "
            f"неположительную вещественную часть"
        )


def _beta_value(beta) -> float:
    return BetaParam.coerce(beta).beta


@lru_cache(maxsize=256)
def _log_partition_cached(spec: EnsembleSpec, n: int, beta: float) -> float:
    terms = selberg_terms(spec, n)
    b = beta / 2
    args = terms.shifts + b * terms.scales
    _check_gamma_arguments(spec, args)
    log_b = math.log(b)
    prefactor = (terms.p11 * b + terms.p10) * log_b + terms.p01 * b + terms.p00
    return prefactor + math.fsum(terms.coeffs * special.gammaln(args))


class PartitionService:

    @staticmethod
    def log_partition(spec: EnsembleSpec, n: int, beta: BetaParam | float) -> float:
        """Точный log Z_n^V(beta) по формуле Сельберга."""
        return _log_partition_cached(spec, int(n), _beta_value(beta))

    @staticmethod
    def log_partition_complex(spec: EnsembleSpec, n: int, beta_complex: complex) -> complex:
        """Та же формула при комплексном beta с Re beta > 0, главные ветви."""
        beta_complex = complex(beta_complex)
        if not beta_complex.real > 0:
            raise DomainError(f"Re beta должно быть > 0, получено {beta_complex}")
        if beta_complex.imag == 0:
            return complex(PartitionService.log_partition(spec, n, beta_complex.real), 0.0)
        terms = selberg_terms(spec, n)
        b = beta_complex / 2
        args = terms.shifts + b * terms.scales
        _check_gamma_arguments(spec, args)
        log_b = cmath.log(b)
        prefactor = (terms.p11 * b + terms.p10) * log_b + terms.p01 * b + terms.p00
        return prefactor + _fsum(terms.coeffs * special.loggamma(args))

    @staticmethod
    def cgf(
        spec: EnsembleSpec, n: int, beta: BetaParam | float, z: complex | float
    ) -> CgfEvaluation:
        """
        log E[exp(z L_n)] = log Z(beta(1+z)) - (1+z) log Z(beta).
        Главные части Стирлинга сокращаются аналитически, поэтому значение
        не теряет точности при n до 10^7.
        """
        beta = BetaParam.coerce(beta)
        is_complex = isinstance(z, complex) and z.imag != 0
        z = complex(z) if is_complex else float(np.real(z))
        if not np.real(z) > -1:
            raise DomainError(f"cgf: нужно Re z > -1, получено z = {z}")
        if z == 0:
            zero = 0j if is_complex else 0.0
            return CgfEvaluation(z, zero, n, spec, beta)

        terms = selberg_terms(spec, n)
        b = beta.beta_half
        b_shifted = b * (1 + z)
        _check_gamma_arguments(spec, terms.shifts + b_shifted * terms.scales)
        _check_gamma_arguments(spec, terms.shifts + b * terms.scales)

        log1p = cmath.log(1 + z) if is_complex else math.log1p(z)
        value = (
            terms.alpha1 * (1 + z) * b * log1p
            + terms.alpha0 * (log1p - z * math.log(b))
            - z * terms.gamma0
        )
        remainders = []
        for shift in np.unique(terms.shifts):
            mask = terms.shifts == shift
            x = b * terms.scales[mask]
            mu_shifted = utils.stirling_remainder(x * (1 + z), float(shift))
            mu = utils.stirling_remainder(x, float(shift))
            remainders.append(terms.coeffs[mask] * (mu_shifted - (1 + z) * mu))
        value += _fsum(np.concatenate(remainders))
        if not is_complex:
            value = float(np.real(value))
        return CgfEvaluation(z, value, n, spec, beta)

    @staticmethod
    def cgf_derivatives(
        spec: EnsembleSpec, n: int, beta: BetaParam | float, h: float = _CUMULANT_STEP
    ) -> tuple[float, float, float]:
        """Точные первые три кумулянта L_n: пятиточечные разности cgf в нуле."""
        c = {
            k: PartitionService.cgf(spec, n, beta, k * h).value
            for k in (-2, -1, 1, 2)
        }
        mean = (-c[2] + 8 * c[1] - 8 * c[-1] + c[-2]) / (12 * h)
        variance = (-c[2] + 16 * c[1] + 16 * c[-1] - c[-2]) / (12 * h * h)
        third = (c[2] - 2 * c[1] + 2 * c[-1] - c[-2]) / (2 * h**3)
        return mean, variance, third

    @staticmethod
    def expansion_logn_coefficient(beta: BetaParam | float) -> float:
        """R(beta) = 1/4 + beta/24 + 1/(6 beta)."""
        value = _beta_value(beta)
        return 0.25 + value / 24 + 1 / (6 * value)

    @staticmethod
    def hermite_expansion_residual(n: int, beta: BetaParam | float) -> float:
        """log Z_n^H - [-(3/4) b n^2 + b n log n + n f0(beta)]; растет как R(beta) log n."""
        if n < 2:
            raise DomainError(f"hermite_expansion_residual: n >= 2, получено {n}")
        b = BetaParam.coerce(beta).beta_half
        log_z = PartitionService.log_partition(EnsembleSpec.hermite(), n, beta)
        return log_z - (
            -0.75 * b * n * n + b * n * math.log(n) + n * EnsembleService.f0(beta)
        )

    @staticmethod
    def cgf_logn_coefficient(beta: BetaParam | float, zeta: float) -> float:
        """B(zeta) = -zeta (1/4 + (2 + zeta)/(12 b (1 + zeta)))."""
        if not zeta > -1:
            raise DomainError(f"cgf_logn_coefficient: zeta > -1, получено {zeta}")
        b = BetaParam.coerce(beta).beta_half
        return -zeta * (0.25 + (2 + zeta) / (12 * b * (1 + zeta)))

    @staticmethod
    def circular_cgf_decomposition(
        n: int, beta: BetaParam | float, t: float
    ) -> dict[str, float]:
        """
        Точное разложение cgf кругового ансамбля по порядкам n; сумма слагаемых
        равна cgf(circular, n, beta, t).
        """
        if not t > -1:
            raise DomainError(f"circular_cgf_decomposition: t > -1, получено {t}")
        beta = BetaParam.coerce(beta)
        b = beta.beta_half
        lambda_h = EnsembleService.f0(beta.beta * (1 + t)) - (1 + t) * EnsembleService.f0(
            beta
        )
        if t == 0:
            binet = 0.0
        else:
            binet = utils.binet_remainder(n * b * (1 + t)) - (1 + t) * utils.binet_remainder(
                n * b
            )
        return {
            "linear": n * (lambda_h - t / 2),
            "log_n": -0.5 * t * math.log(n),
            "constant": -0.5 * t * math.log(2 * math.pi * b) + 0.5 * math.log1p(t),
            "inverse_n": -t * (t + 2) / (12 * b * n * (1 + t)),
            "binet": -binet,
        }

    @staticmethod
    def log_density_batch(
        spec: EnsembleSpec, n: int, beta: BetaParam | float, configs
    ) -> np.ndarray:
        """
        L_n для массива конфигураций формы (m, n).
        Совпадающие точки дают -inf; нечисловые координаты и выход из области
        определения - DomainError.
        """
        beta = BetaParam.coerce(beta)
        points = np.atleast_2d(np.asarray(configs, dtype=float))
        if points.shape[1] != n:
            raise DomainError(f"Ожидалось {n} точек, получено {points.shape[1]}")
        if not np.all(np.isfinite(points)):
            raise DomainError("Конфигурация содержит NaN или бесконечные координаты")
        if spec.is_circular:
            points = np.mod(points, 2 * math.pi)

        log_z = PartitionService.log_partition(spec, n, beta)
        potential_sum = np.sum(EnsembleService.potential(spec, points), axis=1)
        log_gaps = PartitionService.pair_log_sums(spec, points)
        with np.errstate(invalid="ignore"):
            values = beta.beta * log_gaps - n * beta.beta_half * potential_sum - log_z
        return np.where(np.isnan(values), -np.inf, values)

    @staticmethod
    def log_density(
        spec: EnsembleSpec, n: int, beta: BetaParam | float, config
    ) -> float:
        values = PartitionService.log_density_batch(spec, n, beta, [config])
        return float(values[0])

    @staticmethod
    def pair_log_sums(spec: EnsembleSpec, points: np.ndarray) -> np.ndarray:
        """Сумма log|x_j - x_k| по парам j < k для каждой строки; -inf при совпадении."""
        points = np.atleast_2d(points)
        n = points.shape[1]
        if n < 2:
            return np.zeros(points.shape[0])
        first, second = np.triu_indices(n, 1)
        chunk = max(1, _PAIR_CHUNK_ELEMENTS // first.size)
        out = np.empty(points.shape[0])
        for start in range(0, points.shape[0], chunk):
            rows = points[start : start + chunk]
            diffs = rows[:, first] - rows[:, second]
            if spec.is_circular:
                gaps = 2 * np.abs(np.sin(0.5 * diffs))
            else:
                gaps = np.abs(diffs)
            with np.errstate(divide="ignore"):
                out[start : start + chunk] = np.sum(np.log(gaps), axis=1)
        return out

    @staticmethod
    def popescu_energy(spec: EnsembleSpec, config) -> float:
        """E_n = (1/n) sum V - 2/(n(n-1)) sum_{j<k} log|x_j - x_k|."""
        points = np.asarray(config, dtype=float)
        n = points.size
        if n < 2:
            raise DomainError("Энергия Попеску определена при n >= 2")
        if spec.is_circular:
            points = np.mod(points, 2 * math.pi)
        potential_sum = float(np.sum(EnsembleService.potential(spec, points)))
        log_gaps = float(PartitionService.pair_log_sums(spec, points[None, :])[0])
        return potential_sum / n - 2 * log_gaps / (n * (n - 1))

    @staticmethod
    def popescu_from_log_density(
        spec: EnsembleSpec,
        n: int,
        beta: BetaParam | float,
        log_density: float,
        potential_sum: float,
    ) -> float:
        """E_n, восстановленная из L_n, log Z и суммы потенциала."""
        beta = BetaParam.coerce(beta)
        log_z = PartitionService.log_partition(spec, n, beta)
        log_gaps = (log_density + log_z + n * beta.beta_half * potential_sum) / beta.beta
        return potential_sum / n - 2 * log_gaps / (n * (n - 1))
