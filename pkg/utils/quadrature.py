import math
from typing import Callable

from scipy import integrate as sp_integrate

from config.settings import settings
from services.errors import QuadratureBudgetError


def integrate(
    func: Callable[[float], float],
    lo: float,
    hi: float,
    *,
    epsabs: float = 1e-12,
    epsrel: float = 1e-10,
    limit: int = 200,
    points: list[float] | None = None,
) -> float:
    """
    Адаптивная квадратура scipy с проверкой бюджета вычислений.
    Предупреждения quad принимаются, только если оценка ошибки все равно мала.
    """
    result = sp_integrate.quad(
        func,
        lo,
        hi,
        epsabs=epsabs,
        epsrel=epsrel,
        limit=limit,
        points=points,
        full_output=1,
    )
    value, abserr, info = result[:3]
    if info["neval"] > settings.QUADRATURE_MAX_EVALUATIONS:
        raise QuadratureBudgetError(
            f"Превышен бюджет квадратуры: {info['neval']} вычислений"
        )
    if len(result) > 3:
        tolerance = 1e3 * max(epsabs, epsrel * abs(value))
        if not (math.isfinite(value) and abserr <= tolerance):
            raise QuadratureBudgetError(
                f"Квадратура не сошлась на [{lo}, {hi}]: {result[3]} "
                f"(оценка ошибки {abserr:.3e})"
            )
    return float(value)


def integrate_sqrt_endpoints(
    func: Callable[[float], float],
    lo: float,
    hi: float,
    **kwargs,
) -> float:
    """
    Интеграл по [lo, hi] с заменой x = lo + t^2 и x = hi - t^2 на половинах отрезка.
    Снимает корневые особенности плотностей на концах носителя.
    """
    mid = 0.5 * (lo + hi)
    half = math.sqrt(mid - lo)
    left = integrate(lambda t: 2.0 * t * func(lo + t * t), 0.0, half, **kwargs)
    right = integrate(lambda t: 2.0 * t * func(hi - t * t), 0.0, half, **kwargs)
    return left + right


def integrate_2d(
    func: Callable[[float, float], float],
    x_lo: float,
    x_hi: float,
    y_lo: float,
    y_hi: float,
    *,
    epsabs: float = 1e-12,
    epsrel: float = 1e-9,
) -> float:
    """Двумерный интеграл вложенными адаптивными квадратурами с общим бюджетом."""
    calls = 0

    def counted(y: float, x: float) -> float:
        nonlocal calls
        calls += 1
        if calls > settings.QUADRATURE_MAX_EVALUATIONS:
            raise QuadratureBudgetError(
                f"Превышен бюджет двумерной квадратуры: {calls} вычислений"
            )
        return func(x, y)

    def inner(x: float) -> float:
        return integrate(
            lambda y: counted(y, x), y_lo, y_hi, epsabs=epsabs, epsrel=epsrel
        )

    return integrate(inner, x_lo, x_hi, epsabs=epsabs, epsrel=epsrel)
