import cmath
import math

import numpy as np
from scipy import special

from app.dependencies import logger
from services.ensemble_service import EnsembleService
from services.entities import (
    BetaParam,
    EnsembleKind,
    EnsembleSpec,
    ModGaussParams,
    ZoneControl,
)
from services.errors import (
    DomainError,
    FitFailureError,
    ModGaussDomainError,
    UnsupportedEnsembleError,
)
from services.partition_service import PartitionService

MOD_GAUSS_KINDS = (EnsembleKind.HERMITE, EnsembleKind.LAGUERRE, EnsembleKind.CIRCULAR)
ZONE_GAMMA = {EnsembleKind.HERMITE: 0.25, EnsembleKind.CIRCULAR: 1.0}
ZONE_XI_GRID = np.linspace(-2.0, 2.0, 41)

# Доля наибольшего |xi|, на которой подбирается линейная константа K1
_K1_WINDOW = 0.25


class ModGaussService:

    @staticmethod
    def mod_gauss_params(n: int, beta: BetaParam | float) -> ModGaussParams:
        beta = BetaParam.coerce(beta)
        sigma2 = EnsembleService.sigma2_beta(beta)
        return ModGaussParams(
            t_n=n ** (1 / 3) * sigma2,
            sigma2=sigma2,
            a_coeff=EnsembleService.a_beta(beta),
            n=n,
            beta=beta,
        )

    @staticmethod
    def require_integer_n_theta(spec: EnsembleSpec, n: int) -> None:
        if spec.kind is not EnsembleKind.LAGUERRE:
            return
        q = n * spec.theta
        if abs(q - round(q)) > 1e-9:
            raise ModGaussDomainError(
                f"Мод-гауссовы предсказания для Лагерра требуют целого n*theta, "
                f"получено n*theta = {q:g}"
            )

    @staticmethod
    def check_spec(spec: EnsembleSpec, n: int) -> None:
        if spec.kind not in MOD_GAUSS_KINDS:
            raise UnsupportedEnsembleError(
                f"Мод-гауссова сходимость доказана только для hermite, laguerre, "
                f"circular; получено {spec.kind.value}"
            )
        ModGaussService.require_integer_n_theta(spec, n)

    @staticmethod
    def psi_limit(beta: BetaParam | float, z: complex) -> complex:
        """psi(z) = exp(-A_beta z^3 / 6)."""
        return cmath.exp(-EnsembleService.a_beta(beta) * complex(z) ** 3 / 6)

    @staticmethod
    def psi_n(
        spec: EnsembleSpec, n: int, beta: BetaParam | float, z: complex
    ) -> complex:
        """
        psi_n(z) = E[exp(z X_n)] exp(-t_n z^2 / 2), X_n = n^{-1/3}(L_n + n E).
        Считается точно через cgf, без выборок.
        """
        ModGaussService.check_spec(spec, n)
        beta = BetaParam.coerce(beta)
        z = complex(z)
        if z == 0:
            return 1 + 0j
        zeta = z * n ** (-1 / 3)
        if not zeta.real > -1:
            raise DomainError(f"psi_n: нужно Re(z n^(-1/3)) > -1, получено z = {z}")
        argument = zeta if zeta.imag != 0 else zeta.real
        log_mgf = PartitionService.cgf(spec, n, beta, argument).value
        params = ModGaussService.mod_gauss_params(n, beta)
        e_beta = EnsembleService.e_beta(spec, beta)
        return cmath.exp(
            log_mgf + z * n ** (2 / 3) * e_beta - params.t_n * z * z / 2
        )

    @staticmethod
    def mdp_tail(spec: EnsembleSpec, n: int, beta: BetaParam | float, x: float) -> float:
        """
        Главный член умеренных уклонений для P[Y/(n^{2/3} sigma^2) >= x] при x > 0
        (и нижнего хвоста при x < 0).
        """
        ModGaussService.check_spec(spec, n)
        if x == 0 or abs(x) >= 1:
            raise DomainError(f"mdp_tail: нужно 0 < |x| < 1, получено {x}")
        params = ModGaussService.mod_gauss_params(n, beta)
        sigma = math.sqrt(params.sigma2)
        psi = ModGaussService.psi_limit(beta, x).real
        return (
            math.exp(-x * x * params.t_n / 2)
            / (abs(x) * sigma * math.sqrt(2 * math.pi * n ** (1 / 3)))
            * psi
        )

    @staticmethod
    def clt_tail(y: float) -> float:
        """P[N(0,1) >= y]."""
        return float(special.ndtr(-y))

    @staticmethod
    def kolmogorov_bound_constant(D: float, v: float, K1: float) -> float:
        if not (D > 0 and K1 > 0 and v >= 1):
            raise DomainError(f"Нужно D > 0, K1 > 0, v >= 1: {D}, {K1}, {v}")
        return (3 / (2 * math.pi)) * (
            2 ** (v - 1) * math.gamma(v / 2) * K1 + (7 / D) * math.sqrt(math.pi / 2)
        )

    @staticmethod
    def kolmogorov_bound(
        zone: ZoneControl, n: int, beta: BetaParam | float
    ) -> float:
        """Оценка расстояния Колмогорова C(D, v, K1) / t_n^{min(gamma, (v-1)/2) + 1/2}."""
        t_n = ModGaussService.mod_gauss_params(n, beta).t_n
        gamma_eff = min(zone.gamma, (zone.v - 1) / 2)
        constant = ModGaussService.kolmogorov_bound_constant(zone.D, zone.v, zone.K1)
        return constant / t_n ** (gamma_eff + 0.5)

    @staticmethod
    def llt_value(x: float, a: float, b: float) -> float:
        if not a < b:
            raise DomainError(f"llt_value: нужно a < b, получено {a}, {b}")
        return (b - a) * math.exp(-x * x / 2) / math.sqrt(2 * math.pi)

    @staticmethod
    def zone_control_fit(
        spec: EnsembleSpec, beta: BetaParam | float, n_list, xi_grid
    ) -> ZoneControl:
        """
        Подбирает наименьшие K1, K2, при которых K1|xi| exp(K2 xi^2)
        мажорирует |psi_n(i xi) - 1| на сетке для всех n из списка.
        """
        if spec.kind not in ZONE_GAMMA:
            raise UnsupportedEnsembleError(
                f"Зона контроля подбирается для hermite и circular, "
                f"получено {spec.kind.value}"
            )
        beta = BetaParam.coerce(beta)
        gamma = ZONE_GAMMA[spec.kind]
        xi = np.asarray([x for x in xi_grid if x != 0], dtype=float)
        if xi.size == 0:
            raise FitFailureError("Сетка xi не содержит ненулевых точек")

        deviations = np.array(
            [
                [abs(ModGaussService.psi_n(spec, n, beta, 1j * x) - 1) for x in xi]
                for n in n_list
            ]
        )
        if not np.all(np.isfinite(deviations)):
            raise FitFailureError("|psi_n(i xi) - 1| содержит нечисловые значения")

        abs_xi = np.abs(xi)
        window = abs_xi <= _K1_WINDOW * abs_xi.max()
        if not window.any():
            window = abs_xi == abs_xi.min()
        ratios = deviations / abs_xi
        K1 = float(ratios[:, window].max())
        if not K1 > 0:
            raise FitFailureError("Не удалось подобрать K1 > 0")
        with np.errstate(divide="ignore"):
            exponents = np.log(ratios / K1) / abs_xi**2
        K2 = max(0.0, float(exponents.max()))

        envelope = K1 * abs_xi * np.exp(K2 * abs_xi**2)
        dominated = bool(np.all(deviations <= envelope * (1 + 1e-9)))
        min_tn = min(ModGaussService.mod_gauss_params(n, beta).t_n for n in n_list)
        D = float(abs_xi.max() / min_tn**gamma)
        logger.info(
            f"Зона контроля {spec.label()} beta={beta.beta:g}: "
            f"K1={K1:.4g}, K2={K2:.4g}, D={D:.4g}"
        )
        return ZoneControl(gamma, 1.0, 2.0, D, K1, K2, dominated)
