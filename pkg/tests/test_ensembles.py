import math

import numpy as np
import pytest
from scipy import integrate, special

from services import EnsembleService, EnsembleSpec, SupportKind
from services.errors import DomainError, UnsupportedEnsembleError

LOG_2PI = math.log(2 * math.pi)
ZETA3 = float(special.zeta(3))


def test_spec_validation():
    with pytest.raises(DomainError):
        EnsembleSpec.laguerre(0.5)
    with pytest.raises(DomainError):
        EnsembleSpec.jacobi(0.0, 1.0)
    with pytest.raises(DomainError):
        EnsembleSpec.cauchy(-1.0)
    with pytest.raises(DomainError):
        EnsembleSpec.from_name("gaussian")


def test_from_name_keeps_only_relevant_parameters():
    spec = EnsembleSpec.from_name("Laguerre", theta=2, kappa1=5)
    assert spec == EnsembleSpec.laguerre(2.0)
    assert spec.label() == "laguerre(theta=2)"


def test_potential_values(hermite, laguerre2):
    assert EnsembleService.potential(hermite, 2.0) == 2.0
    assert EnsembleService.potential(laguerre2, 1.0) == pytest.approx(2.0)
    assert EnsembleService.potential(EnsembleSpec.circular(), 1.3) == 0.0
    value = EnsembleService.potential(EnsembleSpec.circular_jacobi(1.0), math.pi)
    assert value == pytest.approx(-2 * math.log(2))


def test_potential_domain_errors(laguerre2, jacobi11):
    with pytest.raises(DomainError):
        EnsembleService.potential(laguerre2, 0.0)
    with pytest.raises(DomainError):
        EnsembleService.potential(jacobi11, 1.0)


def test_supports():
    hermite = EnsembleService.equilibrium_support(EnsembleSpec.hermite())
    assert (hermite.lo, hermite.hi) == (-2.0, 2.0)
    laguerre = EnsembleService.equilibrium_support(EnsembleSpec.laguerre(1.0))
    assert (laguerre.lo, laguerre.hi) == pytest.approx((0.0, 4.0))
    cauchy = EnsembleService.equilibrium_support(EnsembleSpec.cauchy(1.0))
    assert cauchy.hi == pytest.approx(math.sqrt(3))
    arc = EnsembleService.equilibrium_support(EnsembleSpec.circular_jacobi(1.0))
    assert arc.kind is SupportKind.ARC
    assert math.sin(arc.lo / 2) == pytest.approx(0.5)


@pytest.mark.parametrize("theta", [1.5, 2.0, 5.0])
def test_laguerre_endpoints_geometric_mean(theta):
    support = EnsembleService.equilibrium_support(EnsembleSpec.laguerre(theta))
    assert math.sqrt(support.lo * support.hi) == pytest.approx((theta - 1) / theta)


def test_density_values(hermite):
    assert EnsembleService.equilibrium_density(hermite, 0.0) == pytest.approx(1 / math.pi)
    assert EnsembleService.equilibrium_density(hermite, 2.0) == 0.0
    assert EnsembleService.equilibrium_density(hermite, -3.0) == 0.0
    values = EnsembleService.equilibrium_density(hermite, np.array([-1.0, 0.0, 5.0]))
    assert values.shape == (3,)


def test_jacobi_density_at_center(jacobi11):
    support = EnsembleService.equilibrium_support(jacobi11)
    expected = 4 * math.sqrt((support.hi - 0.5) * (0.5 - support.lo)) / (2 * math.pi * 0.25)
    assert EnsembleService.equilibrium_density(jacobi11, 0.5) == pytest.approx(expected)


SPECS = [
    EnsembleSpec.hermite(),
    EnsembleSpec.laguerre(1.0),
    EnsembleSpec.laguerre(2.0),
    EnsembleSpec.laguerre(5.0),
    EnsembleSpec.jacobi(0.5, 3.0),
    EnsembleSpec.jacobi(1.0, 1.0),
    EnsembleSpec.cauchy(0.5),
    EnsembleSpec.cauchy(1.0),
    EnsembleSpec.cauchy(2.0),
    EnsembleSpec.circular_jacobi(1.0),
]


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.label())
def test_density_normalized(spec):
    support = EnsembleService.equilibrium_support(spec)

    def weight(t, sign, end):
        x = end + sign * t * t
        return 2 * t * EnsembleService.equilibrium_density(spec, x)

    mid = 0.5 * (support.lo + support.hi)
    half = math.sqrt(mid - support.lo)
    left, _ = integrate.quad(weight, 0, half, args=(1, support.lo), epsabs=1e-12, limit=200)
    right, _ = integrate.quad(weight, 0, half, args=(-1, support.hi), epsabs=1e-12, limit=200)
    assert left + right == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("spec", SPECS[:-1], ids=lambda s: s.label())
def test_entropy_matches_quadrature(spec):
    closed = EnsembleService.entropy(spec)
    assert EnsembleService.entropy_quadrature(spec) == pytest.approx(closed, rel=1e-6)


def test_entropy_closed_forms():
    assert EnsembleService.entropy(EnsembleSpec.hermite()) == 0.5 - LOG_2PI
    assert EnsembleService.entropy(EnsembleSpec.laguerre(2.0)) == pytest.approx(1 - LOG_2PI)
    assert EnsembleService.entropy(EnsembleSpec.circular()) == -LOG_2PI
    cauchy_d1 = (
        -math.log(math.pi)
        - 2 * math.log(2)
        + 4.5 * math.log(1.5)
        - 0.5 * math.log(2)
    )
    assert EnsembleService.entropy(EnsembleSpec.cauchy(1.0)) == pytest.approx(cauchy_d1)


def test_circular_jacobi_entropy_unsupported():
    with pytest.raises(UnsupportedEnsembleError):
        EnsembleService.entropy(EnsembleSpec.circular_jacobi(1.0))
    assert math.isfinite(EnsembleService.entropy_quadrature(EnsembleSpec.circular_jacobi(1.0)))


def test_entropy_shift_circular_is_half():
    assert EnsembleService.entropy_shift(EnsembleSpec.circular()) == pytest.approx(0.5)


@pytest.mark.parametrize("y", [2.0, 2.5, 3.0, 5.0, -4.0])
def test_log_potential_hermite_matches_quadrature(y, hermite):
    assert EnsembleService.log_potential_hermite(y) == pytest.approx(
        EnsembleService.log_potential_quadrature(hermite, y), abs=1e-8
    )


def test_log_potential_hermite_endpoint_and_domain():
    assert EnsembleService.log_potential_hermite(2.0) == pytest.approx(-0.5)
    assert EnsembleService.log_potential_hermite(-2.0) == pytest.approx(-0.5)
    with pytest.raises(DomainError):
        EnsembleService.log_potential_hermite(1.0)


def test_equilibrium_quantiles(hermite, circular):
    q = EnsembleService.equilibrium_quantiles(hermite, 5)
    assert np.all(np.diff(q) > 0)
    assert q[2] == pytest.approx(0.0, abs=1e-6)
    assert np.all(np.abs(q) < 2)
    np.testing.assert_allclose(
        EnsembleService.equilibrium_quantiles(circular, 4),
        2 * math.pi * (np.arange(1, 5) - 0.5) / 4,
    )


def test_f0_values():
    assert EnsembleService.f0(2.0) == pytest.approx(LOG_2PI - 1)
    expected = LOG_2PI - math.lgamma(1.5) - 0.5 * math.log(2) - 0.75
    assert EnsembleService.f0(1.0) == pytest.approx(expected)


def test_limit_constants_at_beta_two(hermite, circular, laguerre2):
    e_h = EnsembleService.e_beta(hermite, 2.0)
    assert e_h == pytest.approx(LOG_2PI - 0.5 - float(np.euler_gamma))
    assert EnsembleService.e_beta(circular, 2.0) == pytest.approx(e_h + 0.5)
    assert EnsembleService.e_beta(laguerre2, 2.0) == pytest.approx(e_h - 0.5)
    assert EnsembleService.sigma2_beta(2.0) == pytest.approx(2 - math.pi**2 / 6)
    assert EnsembleService.a_beta(2.0) == pytest.approx(3 - 2 * ZETA3)


def test_constants_positive_on_grid():
    for beta in np.logspace(math.log10(0.05), 2, 25):
        assert EnsembleService.sigma2_beta(beta) > 0
        assert EnsembleService.a_beta(beta) > 0


@pytest.mark.parametrize("beta", [0.5, 1.0, 2.0, 4.0])
def test_constants_are_scaled_derivatives_of_f0(beta, hermite):
    h = 1e-3
    f = EnsembleService.f0
    first = (f(beta + h) - f(beta - h)) / (2 * h)
    second = (f(beta + h) - 2 * f(beta) + f(beta - h)) / h**2
    assert EnsembleService.f0_prime(beta) == pytest.approx(first, rel=1e-5)
    assert EnsembleService.f0_second(beta) == pytest.approx(second, rel=1e-4)
    # -E = beta f0'(beta) - f0(beta), sigma^2 = beta^2 f0''(beta)
    assert beta * EnsembleService.f0_prime(beta) - f(beta) == pytest.approx(
        -EnsembleService.e_beta(hermite, beta), rel=1e-12
    )
    assert beta**2 * EnsembleService.f0_second(beta) == pytest.approx(
        EnsembleService.sigma2_beta(beta), rel=1e-12
    )


def test_a_beta_is_third_derivative_of_f0():
    beta, h = 2.0, 1e-2
    f = EnsembleService.f0_second
    third = (f(beta + h) - f(beta - h)) / (2 * h)
    assert -(beta**3) * third == pytest.approx(EnsembleService.a_beta(beta), rel=1e-4)
