import math
from dataclasses import asdict, dataclass, field
from enum import Enum, IntEnum

import numpy as np
from dotenv import dotenv_values

from services.errors import ConfigError, DomainError


class PolygammaOrder(IntEnum):
    DIGAMMA = 0
    TRIGAMMA = 1
    TETRAGAMMA = 2


class EnsembleKind(str, Enum):
    HERMITE = "hermite"
    LAGUERRE = "laguerre"
    JACOBI = "jacobi"
    CAUCHY = "cauchy"
    CIRCULAR = "circular"
    CIRCULAR_JACOBI = "circular-jacobi"


class SupportKind(str, Enum):
    INTERVAL = "interval"
    ARC = "arc"
    FULL_CIRCLE = "full-circle"


class Statistic(str, Enum):
    LOG_DENSITY = "log-density"
    CENTERED_Y = "centered-y"
    NORMALIZED_Y = "normalized-y"
    POPESCU_ENERGY = "popescu-energy"


@dataclass(frozen=True)
class EnsembleSpec:
    """
    Один из шести ансамблей с его параметрами.
    theta для Лагерра, kappa1/kappa2 для Якоби, d для Коши и кругового Якоби.
    """

    kind: EnsembleKind
    theta: float | None = None
    kappa1: float | None = None
    kappa2: float | None = None
    d: float | None = None

    def __post_init__(self):
        kind = EnsembleKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind is EnsembleKind.LAGUERRE:
            if self.theta is None or not self.theta >= 1:
                raise DomainError(f"Лагерр требует theta >= 1, получено {self.theta}")
        elif kind is EnsembleKind.JACOBI:
            if self.kappa1 is None or self.kappa2 is None:
                raise DomainError("Якоби требует kappa1 и kappa2")
            if not (self.kappa1 > 0 and self.kappa2 > 0):
                raise DomainError(
                    f"Якоби требует kappa1, kappa2 > 0, получено "
                    f"{self.kappa1}, {self.kappa2}"
                )
        elif kind in (EnsembleKind.CAUCHY, EnsembleKind.CIRCULAR_JACOBI):
            if self.d is None or not self.d > 0:
                raise DomainError(f"{kind.value} требует d > 0, получено {self.d}")

    @classmethod
    def hermite(cls) -> "EnsembleSpec":
        return cls(EnsembleKind.HERMITE)

    @classmethod
    def laguerre(cls, theta: float) -> "EnsembleSpec":
        return cls(EnsembleKind.LAGUERRE, theta=float(theta))

    @classmethod
    def jacobi(cls, kappa1: float, kappa2: float) -> "EnsembleSpec":
        return cls(EnsembleKind.JACOBI, kappa1=float(kappa1), kappa2=float(kappa2))

    @classmethod
    def cauchy(cls, d: float) -> "EnsembleSpec":
        return cls(EnsembleKind.CAUCHY, d=float(d))

    @classmethod
    def circular(cls) -> "EnsembleSpec":
        return cls(EnsembleKind.CIRCULAR)

    @classmethod
    def circular_jacobi(cls, d: float) -> "EnsembleSpec":
        return cls(EnsembleKind.CIRCULAR_JACOBI, d=float(d))

    @classmethod
    def from_name(
        cls,
        name: str,
        theta: float | None = None,
        kappa1: float | None = None,
        kappa2: float | None = None,
        d: float | None = None,
    ) -> "EnsembleSpec":
        """Собирает спецификацию из имени ансамбля и параметров командной строки."""
        try:
            kind = EnsembleKind(name.strip().lower())
        except ValueError:
            raise DomainError(f"Неизвестный ансамбль: {name}") from None
        params = {
            EnsembleKind.LAGUERRE: {"theta": theta},
            EnsembleKind.JACOBI: {"kappa1": kappa1, "kappa2": kappa2},
            EnsembleKind.CAUCHY: {"d": d},
            EnsembleKind.CIRCULAR_JACOBI: {"d": d},
        }.get(kind, {})
        return cls(
            kind, **{k: None if v is None else float(v) for k, v in params.items()}
        )

    @property
    def is_circular(self) -> bool:
        return self.kind in (EnsembleKind.CIRCULAR, EnsembleKind.CIRCULAR_JACOBI)

    def params(self) -> dict:
        return {
            k: v
            for k, v in asdict(self).items()
            if k != "kind" and v is not None
        }

    def label(self) -> str:
        params = ", ".join(f"{k}={v:g}" for k, v in self.params().items())
        return f"{self.kind.value}({params})" if params else self.kind.value


@dataclass(frozen=True)
class BetaParam:
    beta: float

    def __post_init__(self):
        if not (math.isfinite(self.beta) and self.beta > 0):
            raise DomainError(f"beta должно быть > 0, получено {self.beta}")

    @property
    def beta_half(self) -> float:
        return self.beta / 2

    @classmethod
    def coerce(cls, value: "BetaParam | float") -> "BetaParam":
        if isinstance(value, BetaParam):
            return value
        return cls(float(value))


@dataclass(frozen=True)
class SupportDescriptor:
    """Носитель равновесной меры: отрезок, дуга [theta_lo, theta_hi] или вся окружность."""

    kind: SupportKind
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise DomainError(f"Пустой носитель [{self.lo}, {self.hi}]")
        if self.kind is SupportKind.ARC and not 0 < self.lo < math.pi:
            raise DomainError(f"Дуга должна начинаться в (0, pi), получено {self.lo}")

    @classmethod
    def interval(cls, lo: float, hi: float) -> "SupportDescriptor":
        return cls(SupportKind.INTERVAL, float(lo), float(hi))

    @classmethod
    def arc(cls, theta_lo: float, theta_hi: float) -> "SupportDescriptor":
        return cls(SupportKind.ARC, float(theta_lo), float(theta_hi))

    @classmethod
    def full_circle(cls) -> "SupportDescriptor":
        return cls(SupportKind.FULL_CIRCLE, 0.0, 2 * math.pi)


@dataclass(frozen=True)
class CgfEvaluation:
    z: complex
    value: complex | float
    n: int
    spec: EnsembleSpec
    beta: BetaParam


@dataclass(frozen=True)
class RateFunctionResult:
    x: float
    value: float
    argmax_t: float | None
    # супремум не достигнут: value - нижняя оценка, взятая у границы t = -1
    lower_bound: bool = False

    @property
    def is_finite(self) -> bool:
        return math.isfinite(self.value)


@dataclass(frozen=True)
class ModGaussParams:
    t_n: float
    sigma2: float
    a_coeff: float
    n: int
    beta: BetaParam


@dataclass(frozen=True)
class ZoneControl:
    gamma: float
    v: float
    w: float
    D: float
    K1: float
    K2: float
    dominated: bool = True

    def __post_init__(self):
        if self.v < 1 or self.w < 2:
            raise DomainError(f"Зона контроля требует v >= 1, w >= 2: {self.v}, {self.w}")
        if not (-0.5 < self.gamma and self.D > 0):
            raise DomainError(f"Некорректные gamma={self.gamma}, D={self.D}")
        if self.w > 2 and self.gamma > 1 / (self.w - 2):
            raise DomainError(f"gamma={self.gamma} вне допустимого диапазона")


@dataclass(frozen=True)
class RngSeed:
    master_seed: int
    stream_index: int = 0

    def __post_init__(self):
        for value in (self.master_seed, self.stream_index):
            if not 0 <= value < 2**64:
                raise DomainError(f"Сид должен быть 64-битным беззнаковым: {value}")

    def generator(self) -> np.random.Generator:
        sequence = np.random.SeedSequence(
            self.master_seed, spawn_key=(self.stream_index,)
        )
        return np.random.default_rng(sequence)


@dataclass(frozen=True, eq=False)
class ConfigurationSample:
    points: np.ndarray
    log_density: float
    spec: EnsembleSpec
    beta: BetaParam
    n: int


@dataclass(frozen=True)
class McmcDiagnostics:
    acceptance_rate: float
    burn_in: int
    thinning: int
    ess_estimate: float
    step_size: float


@dataclass(frozen=True, eq=False)
class McmcChain:
    configurations: np.ndarray
    log_densities: np.ndarray
    diagnostics: McmcDiagnostics


EXPERIMENT_CHECKS = (
    "mean",
    "variance",
    "third-cumulant",
    "ks",
    "certification",
    "popescu",
)

EXPERIMENT_FILE_KEYS = {
    "ENSEMBLE",
    "THETA",
    "KAPPA1",
    "KAPPA2",
    "D",
    "BETA",
    "N",
    "REPLICAS",
    "SEED",
    "STATISTIC",
    "CHECKS",
    "OUTPUT_PATH",
}


@dataclass(frozen=True)
class ExperimentConfig:
    spec: EnsembleSpec
    beta: float
    n: int
    replicas: int
    seed: int
    statistic: Statistic = Statistic.LOG_DENSITY
    checks: tuple[str, ...] = ()
    output_path: str = "reports/experiment"

    def __post_init__(self):
        object.__setattr__(self, "statistic", Statistic(self.statistic))
        object.__setattr__(self, "checks", tuple(self.checks))
        if self.replicas < 1:
            raise ConfigError(f"replicas должно быть >= 1, получено {self.replicas}")
        if self.n < 1:
            raise ConfigError(f"n должно быть >= 1, получено {self.n}")
        unknown = [c for c in self.checks if c not in EXPERIMENT_CHECKS]
        if unknown:
            raise ConfigError(f"Неизвестные проверки: {unknown}")
        BetaParam(self.beta)
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed должен быть 64-битным: {self.seed}")

    @classmethod
    def from_mapping(cls, values: dict[str, str | None]) -> "ExperimentConfig":
        """Собирает конфигурацию из пар КЛЮЧ=значение (файл в формате dotenv)."""
        unknown = set(values) - EXPERIMENT_FILE_KEYS
        if unknown:
            raise ConfigError(f"Неизвестные ключи конфигурации: {sorted(unknown)}")
        missing = {"ENSEMBLE", "BETA", "N", "REPLICAS"} - {
            k for k, v in values.items() if v not in (None, "")
        }
        if missing:
            raise ConfigError(f"Не заданы обязательные ключи: {sorted(missing)}")

        def _float(key: str) -> float | None:
            raw = values.get(key)
            return None if raw in (None, "") else float(raw)

        try:
            spec = EnsembleSpec.from_name(
                values["ENSEMBLE"],
                theta=_float("THETA"),
                kappa1=_float("KAPPA1"),
                kappa2=_float("KAPPA2"),
                d=_float("D"),
            )
            checks = tuple(
                c.strip() for c in (values.get("CHECKS") or "").split(",") if c.strip()
            )
            return cls(
                spec=spec,
                beta=float(values["BETA"]),
                n=int(values["N"]),
                replicas=int(values["REPLICAS"]),
                seed=int(values.get("SEED") or 0),
                statistic=Statistic(values.get("STATISTIC") or "log-density"),
                checks=checks,
                output_path=values.get("OUTPUT_PATH") or "reports/experiment",
            )
        except ValueError as e:
            if isinstance(e, DomainError):
                raise
            raise ConfigError(f"Некорректное значение в конфигурации: {e}") from e

    @classmethod
    def from_file(cls, path: str, **overrides) -> "ExperimentConfig":
        """
        Читает файл КЛЮЧ=значение; непустые overrides (ключи в любом регистре)
        перекрывают значения из файла.
        """
        try:
            with open(path, encoding="utf-8") as stream:
                values = dict(dotenv_values(stream=stream))
        except OSError as e:
            raise ConfigError(f"Не удалось прочитать конфигурацию {path}: {e}") from e
        for key, value in overrides.items():
            if value is not None:
                values[key.upper()] = str(value)
        return cls.from_mapping(values)

    def to_dict(self) -> dict:
        return {
            "ensemble": self.spec.kind.value,
            "params": self.spec.params(),
            "beta": self.beta,
            "n": self.n,
            "replicas": self.replicas,
            "seed": self.seed,
            "statistic": self.statistic.value,
            "checks": list(self.checks),
            "output_path": self.output_path,
        }


@dataclass
class ExperimentReport:
    schema_version: int
    config: dict
    empirical_cumulants: dict
    scaled_cumulants: dict
    ks_distance: float
    ks_distance_exact: float
    tail_table: list[dict]
    exact_predictions: dict
    certification: list[dict]
    pass_flags: dict[str, bool]
    runtime_seconds: float
    mcmc: dict | None = None
    popescu: dict | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(self.pass_flags.values())

    def to_dict(self) -> dict:
        return asdict(self)


class CheckStatus(str, Enum):
    PASS = "pass"
    FAIL = "fail"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class VerificationCheck:
    name: str
    value: float | None
    tolerance: float
    status: CheckStatus
    message: str = ""
