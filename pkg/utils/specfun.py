"""
Специальные функции: логарифм гамма-функции, полигамма, ядра Бине,
остаток Стирлинга и G-функция Барнса.

Все функции чистые и потокобезопасные.
"""

import math
from functools import lru_cache

import numpy as np
from scipy import special

from services.entities import PolygammaOrder
from services.errors import DomainError, SumOverflowError

from .quadrature import integrate

HALF_LOG_2PI = 0.5 * math.log(2 * math.pi)
EULER_GAMMA = float(np.euler_gamma)
# zeta'(-1)
ZETA_PRIME_MINUS_ONE = -0.16542114370045092

# Ряд Тейлора ядра Бине около нуля: сумма B_{2k}/(2k)! * s^(2k-2)
_KERNEL_SMALL_S = 0.125
_KERNEL_SERIES = np.array(
    [special.bernoulli(2 * k)[-1] / math.factorial(2 * k) for k in range(1, 8)]
)

# Асимптотический ряд остатка Стирлинга
_ASYMPTOTIC_RADIUS = 30.0
_ASYMPTOTIC_TERMS = 12


def log_gamma(z: complex | float) -> complex | float:
    """
    Главная ветвь log Г(z) при Re z > 0.
    Для вещественного аргумента возвращает float, для комплексного - complex.
    """
    if isinstance(z, complex):
        if not z.real > 0:
            raise DomainError(f"log_gamma: Re z <= 0 для z = {z}")
        if z.imag == 0:
            return complex(special.gammaln(z.real), 0.0)
        return complex(special.loggamma(z))
    x = float(z)
    if not x > 0:
        raise DomainError(f"log_gamma: z <= 0 для z = {x}")
    return float(special.gammaln(x))


def polygamma(order: int, x: float) -> float:
    """Дигамма (0), тригамма (1) и тетрагамма (2) функции при x > 0."""
    try:
        order = PolygammaOrder(order)
    except ValueError:
        raise DomainError(f"Неподдерживаемый порядок полигаммы: {order}") from None
    if not x > 0:
        raise DomainError(f"polygamma: x <= 0 для x = {x}")
    if order is PolygammaOrder.DIGAMMA:
        return float(special.digamma(x))
    return float(special.polygamma(int(order), x))


def binet_kernel(s: float) -> float:
    """Ядро Бине [1/2 - 1/s + 1/(e^s - 1)]/s, равное 1/12 в нуле."""
    s = float(s)
    if s < 0:
        raise DomainError(f"binet_kernel: s < 0 для s = {s}")
    if s < _KERNEL_SMALL_S:
        return float(np.polynomial.polynomial.polyval(s * s, _KERNEL_SERIES))
    return (0.5 - 1.0 / s + math.exp(-s) / -math.expm1(-s)) / s


def binet_phi(s: float) -> float:
    """phi(s) = 1/12 - binet_kernel(s); около нуля ведет себя как s^2/720."""
    s = float(s)
    if s < 0:
        raise DomainError(f"binet_phi: s < 0 для s = {s}")
    if s < _KERNEL_SMALL_S:
        # без первого члена ряда, чтобы не вычитать близкие числа
        return -s * s * float(np.polynomial.polynomial.polyval(s * s, _KERNEL_SERIES[1:]))
    return 1.0 / 12.0 - binet_kernel(s)


def binet_remainder(z: float) -> float:
    """
    Интеграл от phi(s) e^{-sz} по [0, inf).
    Хвост за 40/z не превосходит e^{-40}/(12z) и отбрасывается.
    """
    z = float(z)
    if not z > 0:
        raise DomainError(f"binet_remainder: z <= 0 для z = {z}")
    return integrate(
        lambda s: binet_phi(s) * math.exp(-s * z),
        0.0,
        40.0 / z,
        epsabs=1e-15,
        epsrel=1e-12,
    )


def sum_log_gamma(n: int, b: float) -> float:
    """Сумма log Г(1 + b j) по j = 1..n с компенсированным суммированием."""
    if n < 1 or not b > 0:
        raise DomainError(f"sum_log_gamma: нужны n >= 1 и b > 0, получено {n}, {b}")
    values = special.gammaln(1.0 + b * np.arange(1, n + 1, dtype=float))
    total = math.fsum(values)
    if not math.isfinite(total):
        raise SumOverflowError(f"sum_log_gamma переполнение при n={n}, b={b}")
    return total


def log_barnes_g_asymptotic(z: float) -> float:
    """Асимптотика log G(z+1) для больших z."""
    z = float(z)
    if z < 1:
        raise DomainError(f"log_barnes_g_asymptotic: z < 1 для z = {z}")
    log_z = math.log(z)
    return (
        0.5 * z * z * log_z
        - 0.75 * z * z
        + z * HALF_LOG_2PI
        - log_z / 12.0
        + ZETA_PRIME_MINUS_ONE
    )


def log_barnes_g_integer(n: int) -> float:
    """Точное значение log G(n+1) как сумма log k! по k = 1..n-1."""
    if n < 1:
        raise DomainError(f"log_barnes_g_integer: n < 1 для n = {n}")
    return math.fsum(special.gammaln(np.arange(2, n + 1, dtype=float)))


@lru_cache(maxsize=None)
def bernoulli_polynomial(m: int, a: float) -> float:
    numbers = special.bernoulli(m)
    return float(
        sum(
            special.comb(m, j, exact=True) * numbers[j] * a ** (m - j)
            for j in range(m + 1)
        )
    )


def stirling_remainder(x, shift: float = 1.0):
    """
    mu_a(x) = log Г(a + x) - [(x + a - 1/2) log x - x + log(2 pi)/2].
    Векторизовано по x; x вещественный или комплексный с Re x > 0.
    """
    x = np.asarray(x)
    is_complex = np.iscomplexobj(x)
    out = np.empty(x.shape, dtype=complex if is_complex else float)

    large = np.abs(x) >= _ASYMPTOTIC_RADIUS
    if large.any():
        inv = 1.0 / x[large]
        power = inv.copy()
        acc = np.zeros_like(inv)
        for k in range(1, _ASYMPTOTIC_TERMS + 1):
            coeff = (-1) ** (k + 1) * bernoulli_polynomial(k + 1, shift) / (k * (k + 1))
            acc = acc + coeff * power
            power = power * inv
        out[large] = acc

    small = ~large
    if small.any():
        xs = x[small]
        if is_complex:
            lg = special.loggamma(xs + shift)
        else:
            lg = special.gammaln(xs + shift)
        out[small] = lg - ((xs + shift - 0.5) * np.log(xs) - xs + HALF_LOG_2PI)
    return out
