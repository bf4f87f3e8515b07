import itertools
import math

import numpy as np
import pytest

from bellhv.core import JOINT, get_model
from bellhv.distributions import (
    ConditionalDensity,
    LinearWeight,
    PiecewiseWeights,
    PointWeights,
    density_at,
    equilibrium_for,
    l1_distance,
    mass,
    normalization_check,
    perturb,
    sample,
    sample_many,
)
from bellhv.errors import DegenerateDistributionError
from bellhv.sets import IntervalSet
from bellhv.statistics import settings_grid

PI = math.pi
W2111 = PointWeights((2, 1, 1, 1))


def brans_weighted(w=(2, 1, 1, 1)):
    return perturb(equilibrium_for("sd-brans"), PointWeights(w))


def test_density_at_examples():
    eq = equilibrium_for("sd-brans")
    assert density_at(eq, (1, 1), 0.0, PI / 2) == pytest.approx(0.25, abs=1e-15)
    assert density_at(eq, (1, 1), 0.7, 0.7) == 0.0
    assert density_at(brans_weighted(), (1, 1), 0.0, PI / 2) == pytest.approx(0.4, abs=1e-15)


def test_weighted_masses_examples():
    d = brans_weighted()
    assert d.resolve(0, PI / 2).masses == pytest.approx((0.4, 0.2, 0.2, 0.2), abs=1e-15)
    # the extra weight sits on a point of zero equilibrium mass
    assert d.resolve(0, 0).masses == pytest.approx((0.0, 0.5, 0.5, 0.0), abs=1e-15)


def test_nl_linear_density():
    d = perturb(equilibrium_for("nl-interval"), LinearWeight())
    for x in (0.0, 0.1, 0.5, 0.99):
        assert density_at(d, x, 0.3, 1.7) == pytest.approx(2 * x, abs=1e-14)
    # settings-independent
    assert d.resolve(0, 1).edges == d.resolve(2, 5).edges


def _all_densities():
    hist = PiecewiseWeights((3.0, 0.5, 1.0, 2.0, 0.0, 1.0))
    arc_edges = (0.0, 1.0, 2.5, 4.0, 2 * PI)
    return [
        equilibrium_for("sd-brans"),
        brans_weighted(),
        brans_weighted((1, 3, 0.5, 2)),
        equilibrium_for("sd-arc"),
        perturb(equilibrium_for("sd-arc"), PiecewiseWeights((1.0, 4.0, 0.5, 2.0), arc_edges)),
        perturb(equilibrium_for("sd-arc"), hist),
        equilibrium_for("nl-interval"),
        perturb(equilibrium_for("nl-interval"), LinearWeight()),
        perturb(equilibrium_for("nl-interval"), hist),
    ]


@pytest.mark.parametrize("d", _all_densities(), ids=lambda d: f"{d.model_id}-{type(d.weight).__name__}")
def test_normalization_grid(d):
    grid = settings_grid(20)
    for a, b in itertools.product(grid, grid):
        assert normalization_check(d, a, b) < 1e-12


def test_normalization_examples():
    assert normalization_check(brans_weighted(), 0.0, PI / 2) < 1e-12
    assert normalization_check(perturb(equilibrium_for("nl-interval"), LinearWeight()), 0, 0) < 1e-12


def _singlet(a_out, b_out, a, b):
    return (1 - a_out * b_out * math.cos(a - b)) / 4


def _quadrature_joint(model, d, a, b, n=50_000):
    """Midpoint rule using only pointwise density and pointwise indicators."""
    lo, hi = model.space.domain
    h = (hi - lo) / n
    xs = lo + h * (np.arange(n) + 0.5)
    rho = np.array([density_at(d, x, a, b) for x in xs])
    av, bv = model.outcomes_a(xs, a, b), model.outcomes_b(xs, a, b)
    return {(s, t): float(np.sum(rho[(av == s) & (bv == t)]) * h) for s, t in JOINT}


@pytest.mark.parametrize("model_id", ["sd-arc", "nl-interval"])
def test_equilibrium_matches_singlet_by_quadrature(model_id):
    model = get_model(model_id)
    d = equilibrium_for(model_id)
    for a, b in [(0.0, PI / 3), (1.0, 2.5), (4.0, 0.5), (0.2, 0.2)]:
        joint = _quadrature_joint(model, d, a, b)
        for key, p in joint.items():
            # four jump points, each costing at most h * max(rho)
            assert p == pytest.approx(_singlet(*key, a, b), abs=5e-4)


def test_equilibrium_matches_singlet_by_enumeration():
    d = equilibrium_for("sd-brans")
    for a, b in itertools.product(settings_grid(20), repeat=2):
        for p in JOINT:
            assert density_at(d, p, a, b) == pytest.approx(_singlet(*p, a, b), abs=1e-15)


def test_perturb_unit_weights_is_equilibrium():
    xs = np.linspace(0, 1, 37, endpoint=False)
    for model_id, unit in [
        ("sd-brans", PointWeights((1, 1, 1, 1))),
        ("sd-arc", PiecewiseWeights((1.0,) * 7)),
        ("nl-interval", PiecewiseWeights((1.0,) * 3)),
    ]:
        eq = equilibrium_for(model_id)
        pert = perturb(eq, unit)
        space = get_model(model_id).space
        points = JOINT if space.discrete else [space.domain[1] * x for x in xs]
        for a, b in [(0, PI / 2), (0.4, 2.9)]:
            for lam in points:
                assert density_at(pert, lam, a, b) == pytest.approx(density_at(eq, lam, a, b), abs=1e-14)


def test_mechanism_indexing_equality():
    d11 = ConditionalDensity("sd-brans", W2111, (1, 1))
    d21 = ConditionalDensity("sd-brans", W2111, (2, 1))
    assert d11 == d21
    assert d11.mechanism != d21.mechanism
    assert ConditionalDensity("sd-brans", None, (2, 1)) != d11


def test_invalid_specs():
    with pytest.raises(ValueError):
        PointWeights((1, 1, 1))
    with pytest.raises(ValueError):
        PointWeights((0, 0, 0, 0))
    with pytest.raises(ValueError):
        PointWeights((1, -1, 1, 1))
    with pytest.raises(ValueError):
        PiecewiseWeights((1.0,) * 10_001)
    with pytest.raises(ValueError):
        PiecewiseWeights((1.0, float("inf")))
    with pytest.raises(ValueError):
        ConditionalDensity("sd-brans", LinearWeight())
    with pytest.raises(ValueError):
        ConditionalDensity("sd-arc", LinearWeight())
    with pytest.raises(ValueError):
        ConditionalDensity("nl-interval", W2111)
    with pytest.raises(ValueError):
        ConditionalDensity("nl-interval", PiecewiseWeights((1.0, 1.0), (0.0, 0.5, 2.0)))
    with pytest.raises(ValueError):
        ConditionalDensity("nl-interval", None, (0, 1))


def test_degenerate_weight():
    d = brans_weighted((1, 0, 0, 1))
    with pytest.raises(DegenerateDistributionError):
        density_at(d, (1, 1), 0.3, 0.3)
    # fine away from equal settings
    assert density_at(d, (1, 1), 0.0, PI / 2) == pytest.approx(0.5)


def test_sample_zero_mass_points_never_drawn():
    rng = np.random.default_rng(11)
    lams = sample_many(equilibrium_for("sd-brans"), 0.3, 0.3, rng, 200_000)
    assert np.all(lams[:, 0] != lams[:, 1])


def test_sample_single_point_types():
    rng = np.random.default_rng(0)
    assert sample(equilibrium_for("sd-brans"), 0, 1, rng) in JOINT
    x = sample(equilibrium_for("nl-interval"), 0, 1, rng)
    assert isinstance(x, float) and 0 <= x < 1


def test_sample_reproducible():
    d = perturb(equilibrium_for("nl-interval"), LinearWeight())
    a = sample_many(d, 0, 0, np.random.default_rng(42), 1000)
    b = sample_many(d, 0, 0, np.random.default_rng(42), 1000)
    assert np.array_equal(a, b)


def test_sample_uniform_mean():
    x = sample_many(equilibrium_for("nl-interval"), 0, 0, np.random.default_rng(1), 10**6)
    sigma = (1 / math.sqrt(12)) / 1e3
    assert abs(x.mean() - 0.5) < 4 * sigma


def test_sample_linear_mean():
    d = perturb(equilibrium_for("nl-interval"), LinearWeight())
    x = sample_many(d, 0, 0, np.random.default_rng(2), 10**6)
    sigma = math.sqrt(1 / 2 - 4 / 9) / 1e3  # E[x^2] = 1/2 under 2x
    assert abs(x.mean() - 2 / 3) < 4 * sigma
    assert x.min() >= 0 and x.max() < 1


def _check_histogram(counts, probs, n):
    for c, p in zip(counts, probs):
        sd = math.sqrt(n * p * (1 - p))
        assert abs(c - n * p) <= 5 * sd + 1e-9, (c, n * p)


@pytest.mark.parametrize("d", _all_densities(), ids=lambda d: f"{d.model_id}-{type(d.weight).__name__}")
def test_sample_histogram_matches_density(d):
    n = 10**6
    a, b = 0.4, 2.2
    model = d.model
    lams = sample_many(d, a, b, np.random.default_rng(7), n)
    if model.space.discrete:
        counts = [np.count_nonzero((lams[:, 0] == p) & (lams[:, 1] == q)) for p, q in JOINT]
        probs = [density_at(d, pt, a, b) for pt in JOINT]
    else:
        r = d.resolve(a, b)
        edges = np.asarray(r.edges)
        counts = np.histogram(lams, bins=edges)[0]
        probs = r.piece_masses()
    _check_histogram(counts, probs, n)


def test_mass_of_subsets():
    d = perturb(equilibrium_for("nl-interval"), LinearWeight())
    assert mass(d, IntervalSet(((0.0, 0.25),)), 0, 0) == pytest.approx(1 / 16, abs=1e-15)
    assert mass(d, IntervalSet(((0.75, 1.0),)), 0, 0) == pytest.approx(7 / 16, abs=1e-15)


def test_l1_distance():
    d = brans_weighted()
    assert l1_distance(d.resolve(0, PI / 2), d.resolve(0, 0)) == pytest.approx(0.4 + 0.3 + 0.3 + 0.2)
    lin = perturb(equilibrium_for("nl-interval"), LinearWeight()).resolve(0, 0)
    uni = equilibrium_for("nl-interval").resolve(0, 0)
    # integral |2x - 1| over [0, 1] = 1/2
    assert l1_distance(lin, uni) == pytest.approx(0.5, abs=1e-15)
