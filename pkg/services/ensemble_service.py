import math

import numpy as np
from scipy import integrate as sp_integrate
from scipy import special

import utils
from services.entities import (
    BetaParam,
    EnsembleKind,
    EnsembleSpec,
    SupportDescriptor,
    SupportKind,
)
from services.errors import DomainError, UnsupportedEnsembleError

LOG_2PI = math.log(2 * math.pi)

# Число узлов сетки для численной функции распределения равновесной меры
_CDF_GRID_SIZE = 4001


def _scalar_or_array(values: np.ndarray, like):
    return float(values) if np.ndim(like) == 0 else values


def _h(x: float) -> float:
    return float(special.xlogy(x, x))


class EnsembleService:

    @staticmethod
    def potential(spec: EnsembleSpec, x):
        """
        Потенциал V ансамбля. Для круговых ансамблей x - угол на окружности.
        Принимает число или массив.
        """
        arr = np.asarray(x, dtype=float)
        kind = spec.kind

        if kind is EnsembleKind.HERMITE:
            values = 0.5 * arr**2
        elif kind is EnsembleKind.LAGUERRE:
            if np.any(arr <= 0):
                raise DomainError(f"Потенциал Лагерра определен при x > 0, получено {x}")
            values = spec.theta * arr - (spec.theta - 1) * np.log(arr)
        elif kind is EnsembleKind.JACOBI:
            if np.any((arr <= 0) | (arr >= 1)):
                raise DomainError(
                    f"Потенциал Якоби определен при x из (0, 1), получено {x}"
                )
            values = -spec.kappa1 * np.log(arr) - spec.kappa2 * np.log1p(-arr)
        elif kind is EnsembleKind.CAUCHY:
            values = (1 + spec.d) * np.log1p(arr**2)
        elif kind is EnsembleKind.CIRCULAR:
            values = np.zeros_like(arr)
        else:
            # |1 - e^{i theta}| = 2 |sin(theta/2)|
            with np.errstate(divide="ignore"):
                values = -2 * spec.d * np.log(2 * np.abs(np.sin(0.5 * arr)))
        return _scalar_or_array(values, x)

    @staticmethod
    def equilibrium_support(spec: EnsembleSpec) -> SupportDescriptor:
        kind = spec.kind
        if kind is EnsembleKind.HERMITE:
            return SupportDescriptor.interval(-2.0, 2.0)
        if kind is EnsembleKind.LAGUERRE:
            root = math.sqrt(spec.theta)
            return SupportDescriptor.interval(
                (1 - root) ** 2 / spec.theta, (1 + root) ** 2 / spec.theta
            )
        if kind is EnsembleKind.JACOBI:
            k1, k2 = spec.kappa1, spec.kappa2
            spread = 4 * math.sqrt((1 + k1) * (1 + k2) * (1 + k1 + k2))
            denominator = 2 * (2 + k1 + k2) ** 2
            return SupportDescriptor.interval(
                0.5 + (k1**2 - k2**2 - spread) / denominator,
                0.5 + (k1**2 - k2**2 + spread) / denominator,
            )
        if kind is EnsembleKind.CAUCHY:
            m = math.sqrt(1 + 2 * spec.d) / spec.d
            return SupportDescriptor.interval(-m, m)
        if kind is EnsembleKind.CIRCULAR:
            return SupportDescriptor.full_circle()
        theta_d = 2 * math.asin(spec.d / (1 + spec.d))
        return SupportDescriptor.arc(theta_d, 2 * math.pi - theta_d)

    @staticmethod
    def equilibrium_density(spec: EnsembleSpec, x):
        """Плотность равновесной меры; вне носителя и в его концах равна 0."""
        arr = np.asarray(x, dtype=float)
        if spec.is_circular:
            arr = np.mod(arr, 2 * math.pi)
        support = EnsembleService.equilibrium_support(spec)
        lo, hi = support.lo, support.hi
        kind = spec.kind

        if kind is EnsembleKind.CIRCULAR:
            return _scalar_or_array(np.full_like(arr, 1 / (2 * math.pi)), x)

        inside = (arr > lo) & (arr < hi)
        # вне носителя подставляем середину, чтобы не получить nan
        xs = np.where(inside, arr, 0.5 * (lo + hi))
        if kind is EnsembleKind.HERMITE:
            values = np.sqrt(4 - xs**2) / (2 * math.pi)
        elif kind is EnsembleKind.LAGUERRE:
            values = spec.theta * np.sqrt((hi - xs) * (xs - lo)) / (2 * math.pi * xs)
        elif kind is EnsembleKind.JACOBI:
            c = 2 + spec.kappa1 + spec.kappa2
            values = (
                c * np.sqrt((hi - xs) * (xs - lo)) / (2 * math.pi * xs * (1 - xs))
            )
        elif kind is EnsembleKind.CAUCHY:
            m2 = hi * hi
            values = np.sqrt(m2 - xs**2) / (
                math.pi * (math.sqrt(1 + m2) - 1) * (1 + xs**2)
            )
        else:
            s = spec.d / (1 + spec.d)
            half_sin = np.sin(0.5 * xs)
            values = (
                (1 + spec.d)
                * np.sqrt(np.clip(half_sin**2 - s * s, 0.0, None))
                / (2 * math.pi * half_sin)
            )
        return _scalar_or_array(np.where(inside, values, 0.0), x)

    @staticmethod
    def entropy(spec: EnsembleSpec) -> float:
        """Энтропия Шеннона S(V) = int rho log rho в замкнутой форме."""
        kind = spec.kind
        if kind is EnsembleKind.HERMITE:
            return 0.5 - LOG_2PI
        if kind is EnsembleKind.LAGUERRE:
            theta = spec.theta
            return (
                1
                - LOG_2PI
                + 0.5 * _h(theta - 1)
                - 0.5 * (theta - 2) * math.log(theta)
            )
        if kind is EnsembleKind.JACOBI:
            k1, k2 = spec.kappa1, spec.kappa2
            return (
                -LOG_2PI
                + 0.5 * (_h(k1) + _h(k2) - _h(1 + k1) - _h(1 + k2))
                + 1.5 * (_h(2 + k1 + k2) - _h(1 + k1 + k2))
            )
        if kind is EnsembleKind.CAUCHY:
            d = spec.d
            return (
                -math.log(math.pi)
                - _h(1 + d)
                + 3 * _h(d + 0.5)
                - 0.5 * math.log(2)
                - 2 * _h(d)
            )
        if kind is EnsembleKind.CIRCULAR:
            return -LOG_2PI
        raise UnsupportedEnsembleError(
            "Энтропия кругового ансамбля Якоби в замкнутой форме не реализована"
        )

    @staticmethod
    def entropy_shift(spec: EnsembleSpec) -> float:
        """Сдвиг Delta_{H,V} = S(H) - S(V)."""
        return EnsembleService.entropy(EnsembleSpec.hermite()) - EnsembleService.entropy(
            spec
        )

    @staticmethod
    def entropy_quadrature(spec: EnsembleSpec) -> float:
        """Энтропия численным интегрированием с заменой x = конец +- t^2."""
        support = EnsembleService.equilibrium_support(spec)

        def integrand(x: float) -> float:
            rho = EnsembleService.equilibrium_density(spec, x)
            return float(special.xlogy(rho, rho))

        if support.kind is SupportKind.FULL_CIRCLE:
            return utils.integrate(integrand, support.lo, support.hi)
        return utils.integrate_sqrt_endpoints(
            integrand, support.lo, support.hi, epsabs=1e-13, epsrel=1e-11
        )

    @staticmethod
    def log_potential_hermite(y: float) -> float:
        """Логарифмический потенциал полукруговой меры U^H(y) = -int log|y-x| rho_H."""
        if abs(y) < 2:
            raise DomainError(f"log_potential_hermite: нужно |y| >= 2, получено {y}")
        a = abs(y)
        root = math.sqrt(a * a - 4)
        minus_u = math.log(2) - 0.5 + a * a / 4 - a * root / 4 - math.log(a - root)
        return -minus_u

    @staticmethod
    def log_potential_quadrature(spec: EnsembleSpec, y: float) -> float:
        """-int log|y - x| rho_V(x) dx численно; только для ансамблей на прямой."""
        if spec.is_circular:
            raise UnsupportedEnsembleError(
                "Логарифмический потенциал считается только для ансамблей на прямой"
            )
        support = EnsembleService.equilibrium_support(spec)

        def integrand(x: float) -> float:
            rho = EnsembleService.equilibrium_density(spec, x)
            if rho == 0.0:
                return 0.0
            return math.log(abs(y - x)) * rho

        pieces = [(support.lo, support.hi)]
        if support.lo < y < support.hi:
            pieces = [(support.lo, y), (y, support.hi)]
        return -sum(
            utils.integrate_sqrt_endpoints(integrand, lo, hi, epsabs=1e-13)
            for lo, hi in pieces
        )

    @staticmethod
    def equilibrium_quantiles(spec: EnsembleSpec, n: int) -> np.ndarray:
        """Квантили уровней (k - 1/2)/n равновесной меры, по возрастанию."""
        levels = (np.arange(1, n + 1) - 0.5) / n
        support = EnsembleService.equilibrium_support(spec)
        if support.kind is SupportKind.FULL_CIRCLE:
            return 2 * math.pi * levels

        # косинусная сетка сгущается к концам носителя
        u = np.linspace(0.0, 1.0, _CDF_GRID_SIZE)
        width = support.hi - support.lo
        grid = support.lo + width * 0.5 * (1 - np.cos(math.pi * u))
        jacobian = width * 0.5 * math.pi * np.sin(math.pi * u)
        weights = EnsembleService.equilibrium_density(spec, grid) * jacobian
        cdf = sp_integrate.cumulative_trapezoid(weights, u, initial=0.0)
        cdf /= cdf[-1]
        return np.interp(levels, cdf, grid)

    @staticmethod
    def f0(beta: BetaParam | float) -> float:
        b = BetaParam.coerce(beta).beta_half
        return LOG_2PI - utils.log_gamma(1 + b) + b * math.log(b) - (1 + b) / 2

    @staticmethod
    def f0_prime(big_b: float) -> float:
        b = big_b / 2
        return 0.5 * (-utils.polygamma(0, 1 + b) + math.log(b) + 0.5)

    @staticmethod
    def f0_second(big_b: float) -> float:
        b = big_b / 2
        return 0.25 * (-utils.polygamma(1, 1 + b) + 1 / b)

    @staticmethod
    def e_beta_hermite(beta: BetaParam | float) -> float:
        b = BetaParam.coerce(beta).beta_half
        return (
            LOG_2PI
            - 0.5
            - b
            + b * utils.polygamma(0, 1 + b)
            - utils.log_gamma(1 + b)
        )

    @staticmethod
    def e_beta(spec: EnsembleSpec, beta: BetaParam | float) -> float:
        """Предел -L_n/n: E_beta^V = E_beta^H + Delta_{H,V}."""
        return EnsembleService.e_beta_hermite(beta) + EnsembleService.entropy_shift(
            spec
        )

    @staticmethod
    def sigma2_beta(beta: BetaParam | float) -> float:
        b = BetaParam.coerce(beta).beta_half
        return b - b * b * utils.polygamma(1, 1 + b)

    @staticmethod
    def a_beta(beta: BetaParam | float) -> float:
        b = BetaParam.coerce(beta).beta_half
        return b**3 * utils.polygamma(2, 1 + b) + b
