import math

from scipy import optimize

from app.dependencies import logger
from services.ensemble_service import EnsembleService
from services.entities import BetaParam, EnsembleKind, EnsembleSpec, RateFunctionResult
from services.errors import ConvergenceError, DomainError

_T_LOWER_GAP = 1e-12
# ближе к -1 шаг double не различает
_T_LOWER_FLOOR = 1e-15
_T_UPPER_MAX = 1e12
_ROOT_MAX_ITER = 80


class LdpService:

    @staticmethod
    def _shift(spec: EnsembleSpec) -> float:
        if spec.kind is EnsembleKind.CIRCULAR:
            return 0.5
        return EnsembleService.entropy_shift(spec)

    @staticmethod
    def scaled_cgf(spec: EnsembleSpec, beta: BetaParam | float, t: float) -> float:
        """Lambda_{beta,V}(t) = f0((1+t) beta) - (1+t) f0(beta) - t Delta_{H,V}."""
        if not t > -1:
            raise DomainError(f"Lambda определена при t > -1, получено {t}")
        if t == 0:
            return 0.0
        beta = BetaParam.coerce(beta)
        return (
            EnsembleService.f0(beta.beta * (1 + t))
            - (1 + t) * EnsembleService.f0(beta)
            - t * LdpService._shift(spec)
        )

    @staticmethod
    def scaled_cgf_prime(spec: EnsembleSpec, beta: BetaParam | float, t: float) -> float:
        if not t > -1:
            raise DomainError(f"Lambda' определена при t > -1, получено {t}")
        beta = BetaParam.coerce(beta)
        return (
            beta.beta * EnsembleService.f0_prime(beta.beta * (1 + t))
            - EnsembleService.f0(beta)
            - LdpService._shift(spec)
        )

    @staticmethod
    def limiting_slope(spec: EnsembleSpec, beta: BetaParam | float) -> float:
        """Предел Lambda'(t) при t -> inf: beta/4 - f0(beta) - Delta."""
        beta = BetaParam.coerce(beta)
        return beta.beta / 4 - EnsembleService.f0(beta) - LdpService._shift(spec)

    @staticmethod
    def rate_function(
        spec: EnsembleSpec, beta: BetaParam | float, x: float
    ) -> RateFunctionResult:
        """
        Преобразование Лежандра-Фенхеля sup_{t>-1}(t x - Lambda(t)).
        Корень Lambda'(t) = x ищется в геометрически расширяемой вилке.
        При x не меньше предельного наклона значение равно +inf.
        """
        beta = BetaParam.coerce(beta)
        x = float(x)
        if x >= LdpService.limiting_slope(spec, beta):
            return RateFunctionResult(x, math.inf, None)

        def equation(t: float) -> float:
            return LdpService.scaled_cgf_prime(spec, beta, t) - x

        gap = _T_LOWER_GAP
        while equation(-1 + gap) > 0:
            if gap <= _T_LOWER_FLOOR:
                # точка левее всех достижимых наклонов: супремум на границе t = -1
                t_star = -1 + gap
                value = t_star * x - LdpService.scaled_cgf(spec, beta, t_star)
                logger.warning(
                    f"Lambda*({x:g}) для {spec.label()}: корень Lambda' левее t = -1 + {gap:g}, "
                    f"возвращена нижняя оценка {value:.6g}"
                )
                return RateFunctionResult(x, max(value, 0.0), t_star, lower_bound=True)
            gap = max(gap * 0.1, _T_LOWER_FLOOR)
        lower = -1 + gap

        upper = 1.0
        while equation(upper) < 0:
            upper *= 2
            if upper > _T_UPPER_MAX:
                raise ConvergenceError(
                    f"Не удалось найти вилку для Lambda'(t) = {x}: t > {_T_UPPER_MAX}"
                )

        try:
            t_star = optimize.brentq(
                equation, lower, upper, xtol=1e-15, rtol=1e-15, maxiter=_ROOT_MAX_ITER
            )
        except RuntimeError as e:
            raise ConvergenceError(f"Решатель Lambda'(t) = {x} не сошелся: {e}") from e

        value = t_star * x - LdpService.scaled_cgf(spec, beta, t_star)
        return RateFunctionResult(x, max(value, 0.0), t_star)

    @staticmethod
    def rate_function_grid(
        spec: EnsembleSpec, beta: BetaParam | float, xs
    ) -> list[RateFunctionResult]:
        return [LdpService.rate_function(spec, beta, x) for x in xs]

    @staticmethod
    def rate_function_shift_check(beta: BetaParam | float, x: float) -> float:
        """|Lambda*_C(x) - Lambda*_H(x + 1/2)|."""
        circular = LdpService.rate_function(EnsembleSpec.circular(), beta, x).value
        hermite = LdpService.rate_function(EnsembleSpec.hermite(), beta, x + 0.5).value
        if math.isinf(circular) and math.isinf(hermite):
            return 0.0
        return abs(circular - hermite)
