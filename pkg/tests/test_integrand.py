import numpy as np
import pytest

from tanhom.errors import (
    ConfigError,
    HypothesisViolated,
    InvalidProfile,
    UnsupportedGrowth,
)
from tanhom.integrand import (
    Integrand,
    StepProfile,
    finite_difference_grad,
    integrand_from_config,
    make_fbar,
    make_g_extension,
    make_isotropic_quadratic,
    make_laminate_quadratic,
    make_norm_linear,
    verify_extension_bounds,
    verify_hypotheses,
)
from tanhom.manifold import Sphere


def test_step_profile_basic():
    p = StepProfile((0.5,), (1.0, 2.0))
    assert p(0.25) == 1.0
    assert p(0.75) == 2.0
    assert p(1.25) == 1.0  # 1-periodic
    assert p(-0.25) == 2.0
    assert p.integral() == pytest.approx(1.5)
    assert p.reciprocal_integral() == pytest.approx(0.75)
    np.testing.assert_allclose(p(np.array([0.1, 0.6])), [1.0, 2.0])


def test_step_profile_validation():
    with pytest.raises(InvalidProfile):
        StepProfile((0.5,), (1.0, -2.0))
    with pytest.raises(InvalidProfile):
        StepProfile((0.5, 0.4), (1.0, 2.0, 3.0))
    with pytest.raises(InvalidProfile):
        StepProfile((0.0,), (1.0, 2.0))
    with pytest.raises(InvalidProfile):
        StepProfile((0.5,), (1.0,))


def test_laminate_examples(profile_a, profile_b):
    iso = make_laminate_quadratic(StepProfile.constant(1.0), StepProfile.constant(1.0), 2)
    rng = np.random.default_rng(0)
    y = rng.uniform(0, 1, size=(5, 2))
    xi = rng.standard_normal((5, 2, 2))
    np.testing.assert_allclose(iso.eval(y, xi), np.sum(xi**2, axis=(1, 2)))

    f = make_laminate_quadratic(profile_a, profile_b, 2)
    xi_unit = np.zeros((2, 2))
    xi_unit[0, 0] = 1.0
    assert f.eval(np.array([0.75, 0.3]), xi_unit) == pytest.approx(2.0)
    assert f.eval(np.array([0.75, 0.3]), np.zeros((2, 2))) == 0.0
    assert f.alpha == 1.0 and f.beta == 2.0 and f.quadratic


def test_finite_difference_grad(laminate2):
    rng = np.random.default_rng(1)
    y = rng.uniform(0, 1, size=2)
    xi = rng.standard_normal((2, 2))
    fd = finite_difference_grad(laminate2, y, xi, h=1e-4)
    exact = laminate2.grad_xi(y, xi)
    assert np.max(np.abs(fd - exact)) <= 1e-6

    const = Integrand(eval=lambda y, xi: np.ones(np.shape(xi)[:-2]) * 3.0,
                      p=2, alpha=1e-9, beta=3.0, dims=(2, 2))
    np.testing.assert_allclose(finite_difference_grad(const, y, xi), 0.0, atol=1e-9)

    iso = make_isotropic_quadratic(2, 2)
    np.testing.assert_allclose(finite_difference_grad(iso, y, xi), 2 * xi, atol=1e-8)


def test_fbar_restriction_and_penalty(laminate2, s1):
    fbar = make_fbar(laminate2, s1)
    y = np.array([0.3, 0.8])
    s = np.array([0.0, 1.0])
    tangent = np.array([[1.0, -2.0], [0.0, 0.0]])
    assert fbar.eval(y, s, tangent) == pytest.approx(laminate2.eval(y, tangent))
    normal = np.array([[0.0, 0.0], [2.0, 1.0]])  # purely normal at (0, 1)
    assert fbar.eval(y, s, normal) == pytest.approx(
        laminate2.eval(y, np.zeros((2, 2))) + np.sum(normal**2)
    )
    assert fbar.eval(y, s, np.zeros((2, 2))) == pytest.approx(0.0)
    assert fbar.quadratic


def test_fbar_consistency_sample(laminate2, s1):
    fbar = make_fbar(laminate2, s1)
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(1000):
        s = s1.random_point(rng)
        xi = s1.tangent_from_coeffs(s, rng.standard_normal((1, 2)) * 3.0)
        y = rng.uniform(0, 1, size=2)
        worst = max(worst, abs(fbar.eval(y, s, xi) - laminate2.eval(y, xi)))
    assert worst <= 1e-12


def test_fbar_growth_sample(laminate2, s1):
    fbar = make_fbar(laminate2, s1)
    rng = np.random.default_rng(3)
    for _ in range(500):
        s = s1.random_point(rng)
        xi = rng.standard_normal((2, 2)) * rng.uniform(0, 10)
        v = float(fbar.eval(rng.uniform(0, 1, size=2), s, xi))
        norm_p = np.sum(xi**2)
        assert fbar.alpha * norm_p <= v + 1e-12
        assert v <= fbar.beta * (1.0 + norm_p) + 1e-12


def test_fbar_gradient_matches_fd(laminate2, s1):
    fbar = make_fbar(laminate2, s1)
    rng = np.random.default_rng(4)
    s = s1.random_point(rng)
    y = rng.uniform(0, 1, size=2)
    xi = rng.standard_normal((2, 2))
    g = fbar.grad_xi(y, s, xi)
    h = 1e-6
    for a in range(2):
        for j in range(2):
            bump = np.zeros((2, 2))
            bump[a, j] = h
            fd = (fbar.eval(y, s, xi + bump) - fbar.eval(y, s, xi - bump)) / (2 * h)
            assert abs(fd - g[a, j]) <= 1e-6


def test_g_extension_requires_linear_growth(laminate2, s1):
    with pytest.raises(UnsupportedGrowth):
        make_g_extension(laminate2, s1)


def test_g_extension_values(s1):
    c = StepProfile((0.5,), (1.0, 2.0))
    f = make_norm_linear(c, 1, 2)
    g = make_g_extension(f, s1, 0.5)
    y = np.array([0.25])
    s = np.array([0.0, 1.0])
    xi = s1.tangent_basis(s).T.copy()  # tangent column
    assert g.eval(y, s, xi) == pytest.approx(f.eval(y, xi))
    far = np.array([5.0, 0.0])
    assert g.eval(y, far, xi) == pytest.approx(f.eval(y, np.zeros((2, 1))) + 1.0)
    assert g.eval(y, s, np.zeros((2, 1))) == pytest.approx(f.eval(y, np.zeros((2, 1))))
    assert g.s_lipschitz is not None and g.xi_lipschitz == pytest.approx(
        f.lipschitz_L + 1.0
    )


def test_g_extension_sampled_bounds(s1):
    c = StepProfile((0.25, 0.75), (2.0, 1.0, 3.0))
    f = make_norm_linear(c, 2, 2)
    g = make_g_extension(f, s1, 0.5)
    report = verify_extension_bounds(g, 10000, seed=9)
    assert report.periodicity_residual <= 1e-12  # restriction residual slot


def test_verify_hypotheses_pass(laminate2):
    report = verify_hypotheses(laminate2, 1000, seed=1)
    assert report.periodicity_residual <= 1e-12
    assert report.coercivity_margin <= 1e-12
    assert report.growth_margin <= 1e-12


def test_declared_constants_large_sample(laminate2):
    # 1e4 draws with |xi| up to 10 against the declared growth constants.
    report = verify_hypotheses(laminate2, 10000, seed=21)
    assert report.coercivity_margin <= 1e-12
    assert report.growth_margin <= 1e-12


def test_verify_hypotheses_norm_linear():
    f = make_norm_linear(StepProfile((0.5,), (1.0, 2.0)), 1, 2)
    report = verify_hypotheses(f, 2000, seed=2)
    assert report.lipschitz_margin is not None
    assert report.lipschitz_margin <= 1e-9


def test_verify_hypotheses_overstated_alpha():
    bogus = Integrand(
        eval=lambda y, xi: np.sum(np.asarray(xi) ** 2, axis=(-2, -1)),
        p=2,
        alpha=2.0,
        beta=2.0,
        dims=(1, 2),
    )
    with pytest.raises(HypothesisViolated) as err:
        verify_hypotheses(bogus, 500, seed=3)
    assert err.value.sample is not None


def test_integrand_validation():
    with pytest.raises(ValueError):
        Integrand(eval=lambda y, xi: 0.0, p=1, alpha=1.0, beta=1.0, dims=(1, 2))
    with pytest.raises(UnsupportedGrowth):
        Integrand(eval=lambda y, xi: 0.0, p=0.5, alpha=1.0, beta=1.0, dims=(1, 2))
    with pytest.raises(ValueError):
        Integrand(eval=lambda y, xi: 0.0, p=2, alpha=2.0, beta=1.0, dims=(1, 2))


def test_integrand_from_config():
    f = integrand_from_config(
        {
            "kind": "laminate",
            "a": {"breaks": [0.5], "values": [1, 2]},
            "b": {"values": [1]},
            "N": 2,
        }
    )
    assert f.dims == (2, 2) and f.p == 2
    f = integrand_from_config({"kind": "isotropic_quadratic", "N": 1, "d": 3})
    assert f.dims == (1, 3)
    f = integrand_from_config({"kind": "norm_linear", "c": {"values": [2]}, "N": 1})
    assert f.p == 1 and f.lipschitz_L == 2.0
    with pytest.raises(ConfigError):
        integrand_from_config({"kind": "laminate", "a": {"values": [1]}, "b": {"values": [1]}, "N": 1, "junk": 0})
    with pytest.raises(ConfigError):
        integrand_from_config({"kind": "mystery"})


def test_smoothed_forms_bias():
    c = StepProfile.constant(1.0)
    f = make_norm_linear(c, 1, 2)
    ev, gr = f.solver_forms(1e-3)
    xi = np.array([[3.0], [4.0]])
    y = np.zeros(1)
    assert f.eval(y, xi) == pytest.approx(5.0)
    assert 0.0 <= f.eval(y, xi) - ev(y, xi) <= 5e-4  # huber bias at most mu/2
    np.testing.assert_allclose(gr(y, xi), f.grad_xi(y, xi), atol=1e-12)
