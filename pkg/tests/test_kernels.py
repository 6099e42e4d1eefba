import math

import numpy as np
import pytest
from scipy.special import gamma as G

from dilative.errors import DomainError, InvalidKappa, InvalidParams, NonConvergent
from dilative.kernels import (
    Fractional,
    Homogeneous,
    Indicator,
    StepDiscretized,
    check_homogeneity,
    eval_fc,
    eval_fractional,
    l2_norm_sq,
)

FC = StepDiscretized(Fractional(0.25), 2.0, 1.0)


def fractional_l2_closed_form(kappa, t=1.0):
    # ||(t-u)_+^k - (-u)_+^k||^2 = t^(2k+1) G(k+1)^2 / (G(2k+2) sin(pi (k + 1/2)))
    return t ** (2 * kappa + 1) * G(kappa + 1) ** 2 / (G(2 * kappa + 2) * math.sin(math.pi * (kappa + 0.5)))


def test_fractional_examples():
    assert eval_fractional(0.25, 0.0, 3.3) == 0.0
    assert eval_fractional(0.25, 0.0, -3.3) == 0.0
    assert eval_fractional(0.25, 1.0, 2.0) == 0.0
    assert eval_fractional(0.25, 1.0, -1.0) == pytest.approx(2**0.25 - 1, abs=1e-15)
    assert eval_fractional(0.25, 1.0, -1.0) == pytest.approx(0.189207, abs=1e-6)


def test_fractional_far_field_is_accurate():
    # (1 + 1/w)^k - 1 ~ k / w: no cancellation for large |u|
    w = 1e12
    assert eval_fractional(0.25, 1.0, -w) == pytest.approx(w**0.25 * 0.25 / w, rel=1e-9)


@pytest.mark.parametrize("kappa", [0.0, 0.5, -0.1, 0.7])
def test_invalid_kappa(kappa):
    with pytest.raises(InvalidKappa):
        eval_fractional(kappa, 1.0, 0.0)
    with pytest.raises(InvalidKappa):
        Fractional(kappa)


def test_fractional_metadata():
    k = Fractional(0.3)
    assert (k.alpha, k.delta) == pytest.approx((0.8, 1.0))


@pytest.mark.parametrize("T", np.geomspace(0.1, 10.0, 9))
def test_fractional_homogeneity(T):
    assert check_homogeneity(Fractional(0.25), 0.75, 1.0, T) <= 1e-12


def test_homogeneity_at_identity_is_zero():
    for k, a, d in [(Fractional(0.1), 0.6, 1.0), (FC, 0.75, 1.0), (Indicator(), 0.5, 1.0)]:
        assert check_homogeneity(k, a, d, 1.0) == 0.0


def test_fc_on_lattice_points_equals_base():
    base = Fractional(0.25)
    for m in (-2, 0, 1, 3):
        for j in (-1, 0, 2):
            for s in (1.0, -1.0):
                u = s * 2.0**j
                assert eval_fc(base, 2.0, 1.0, 2.0**m, u) == base(2.0**m, u)


def test_fc_cell_constancy():
    rng = np.random.default_rng(3)
    t = rng.uniform(1.0, 2.0, 50)
    u = rng.uniform(1.0, 2.0, 50)
    vals = [FC(a, b) for a, b in zip(t, u)]
    assert vals == [Fractional(0.25)(1.0, 1.0)] * 50
    neg = [FC(a, -b) for a, b in zip(t, u)]
    assert neg == [Fractional(0.25)(1.0, -1.0)] * 50


def test_fc_lattice_scaling_on_random_grid():
    rng = np.random.default_rng(11)
    t = rng.uniform(0.05, 20.0, 200)
    u = rng.uniform(0.01, 30.0, 200) * rng.choice([-1.0, 1.0], 200)
    for a, b in zip(t, u):
        assert abs(FC(2 * a, 2 * b) - 2**0.25 * FC(a, b)) <= 1e-12


@pytest.mark.parametrize("T", [0.25, 0.5, 2.0, 4.0])
def test_fc_homogeneous_on_lattice(T):
    assert check_homogeneity(FC, 0.75, 1.0, T) <= 1e-12


def test_fc_not_homogeneous_off_lattice():
    assert check_homogeneity(FC, 0.75, 1.0, 1.5) > 0.01


def test_fc_domain():
    with pytest.raises(DomainError):
        FC(0.0, 1.0)
    with pytest.raises(DomainError):
        FC(1.0, 0.0)
    with pytest.raises(DomainError):
        check_homogeneity(FC, 0.75, 1.0, -2.0)


def test_step_kernel_parameters():
    with pytest.raises(InvalidParams):
        StepDiscretized(Fractional(0.25), 1.0, 1.0)
    with pytest.raises(InvalidParams):
        StepDiscretized(Fractional(0.25), 2.0, 0.5)
    with pytest.raises(InvalidParams):
        StepDiscretized(FC, 2.0, 1.0)


def test_l2_zero_time():
    assert l2_norm_sq(Fractional(0.25), 0.0) == 0.0


@pytest.mark.parametrize("kappa", [0.1, 0.25, 0.4])
def test_fractional_l2_against_closed_form(kappa):
    assert l2_norm_sq(Fractional(kappa), 1.0) == pytest.approx(fractional_l2_closed_form(kappa), rel=1e-7)


def _smooth_map(s):
    # S(s) = s^4 (35 - 84 s + 70 s^2 - 20 s^3), S'(s) = 140 s^3 (1 - s)^3
    return s**4 * (35 - 84 * s + 70 * s**2 - 20 * s**3), 140 * s**3 * (1 - s) ** 3


def _fixed_grid_l2(kappa, n, L):
    """Trapezoid sums on n cells: [-1, 0] and [0, 1] through a map flattening both
    endpoints, [-L, -1] in log u, plus two terms of the expansion beyond -L."""
    s = np.linspace(0.0, 1.0, n + 1)
    S, dS = _smooth_map(s)
    f = lambda u: eval_fractional(kappa, 1.0, u) ** 2
    total = np.trapezoid(f(-1.0 + S) * dS, s) + np.trapezoid(f(S) * dS, s)
    y = np.linspace(0.0, math.log(L), n + 1)
    w = np.exp(y)
    total += np.trapezoid(f(-w) * w, y)
    # f(-w)^2 = k^2 w^(2k-2) (1 + (k-1)/w + O(w^-2))
    c = 2 * kappa - 2
    total += kappa**2 * (L ** (c + 1) / -(c + 1) + (kappa - 1) * L**c / -c)
    return total


def test_fractional_l2_against_fixed_grid_richardson():
    k, L = 0.25, 1e4
    a1, a2 = _fixed_grid_l2(k, 4000, L), _fixed_grid_l2(k, 8000, L)
    oracle = a2 + (a2 - a1) / 3.0
    assert oracle == pytest.approx(fractional_l2_closed_form(k), rel=1e-7)
    assert l2_norm_sq(Fractional(k), 1.0) == pytest.approx(oracle, rel=1e-7)


@pytest.mark.parametrize("T", [2.0, 0.5, 3.3])
def test_l2_scaling_law(T):
    k = Fractional(0.25)
    assert l2_norm_sq(k, 1.3 * T) / l2_norm_sq(k, 1.3) == pytest.approx(T ** (2 * k.alpha), rel=1e-6)


def test_l2_scaling_law_general_homogeneous():
    h = Homogeneous(0.9, 2.0, lambda v: np.exp(-v * v) * (1 + v), name="gauss-profile")
    for T in (2.0, 0.7):
        assert l2_norm_sq(h, T) / l2_norm_sq(h, 1.0) == pytest.approx(T**1.8, rel=1e-6)
    assert check_homogeneity(h, 0.9, 2.0, 2.7, [(t, u) for t in (0.4, 1.0, 2.5) for u in (-1.0, 0.3, 2.0)]) <= 1e-12


def test_fc_l2_scales_on_lattice():
    ratio = l2_norm_sq(FC, 2.0) / l2_norm_sq(FC, 1.0)
    assert ratio == pytest.approx(2.0**1.5, rel=1e-9)
    assert l2_norm_sq(FC, 1.7) == l2_norm_sq(FC, 1.0)


def test_non_square_integrable_kernel_is_rejected():
    flat = Homogeneous(0.5, 1.0, lambda v: np.ones_like(v), name="flat")
    with pytest.raises(NonConvergent):
        l2_norm_sq(flat, 1.0)


def test_indicator_kernel():
    k = Indicator()
    assert list(k(2.0, np.array([-0.1, 0.0, 1.9, 2.0]))) == [0.0, 1.0, 1.0, 0.0]
    assert list(k(-1.0, np.array([-1.0, -0.5, 0.0]))) == [-1.0, -1.0, 0.0]
    assert l2_norm_sq(k, 2.5) == pytest.approx(2.5, rel=1e-12)
