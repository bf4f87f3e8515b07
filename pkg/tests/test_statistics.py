import itertools
import math

import pytest

from bellhv.core import JOINT, get_model
from bellhv.distributions import LinearWeight, PointWeights, equilibrium_for, perturb
from bellhv.errors import DegenerateDistributionError
from bellhv.statistics import (
    MonteCarlo,
    chsh,
    expectations,
    marginal_violation,
    mechanism_dependence,
    settings_grid,
    total_variation,
)

PI = math.pi
MODELS = ("sd-brans", "sd-arc", "nl-interval")
STD_ANGLES = (0.0, PI / 2, PI / 4, 3 * PI / 4)


def brans(w=(2, 1, 1, 1), mech=(1, 1)):
    return perturb(equilibrium_for("sd-brans", mech), PointWeights(w))


def enumerate_brans(w, a, b):
    """Independent oracle: weight the four singlet masses by hand."""
    raw = {p: w[k] * (1 - p[0] * p[1] * math.cos(a - b)) / 4 for k, p in enumerate(JOINT)}
    z = sum(raw.values())
    p = {k: v / z for k, v in raw.items()}
    e_ab = sum(p[k] * k[0] * k[1] for k in JOINT)
    e_a = sum(p[k] * k[0] for k in JOINT)
    e_b = sum(p[k] * k[1] for k in JOINT)
    return e_ab, e_a, e_b


def test_brans_equal_settings():
    rep = expectations(get_model("sd-brans"), equilibrium_for("sd-brans"), 1.0, 1.0)
    assert rep.E_AB == pytest.approx(-1.0, abs=1e-15)
    assert rep.E_A == pytest.approx(0.0, abs=1e-15)
    assert rep.E_B == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("model_id", MODELS)
def test_equilibrium_singlet_grid(model_id):
    model = get_model(model_id)
    d = equilibrium_for(model_id)
    for a, b in itertools.product(settings_grid(20), repeat=2):
        rep = expectations(model, d, a, b)
        assert rep.E_AB == pytest.approx(-math.cos(a - b), abs=1e-9)
        assert abs(rep.E_A) < 1e-9 and abs(rep.E_B) < 1e-9
        assert sum(rep.joint) == pytest.approx(1.0, abs=1e-12)


def test_weighted_brans_example():
    rep = expectations(get_model("sd-brans"), brans(), 0.0, PI / 2)
    assert rep.E_A == pytest.approx(0.2, abs=1e-12)
    assert rep.E_AB == pytest.approx(0.2, abs=1e-12)
    assert rep.joint == pytest.approx((0.4, 0.2, 0.2, 0.2), abs=1e-12)


def test_weighted_brans_against_enumeration_grid():
    model = get_model("sd-brans")
    w = (2, 1, 0.5, 3)
    d = brans(w)
    for a, b in itertools.product(settings_grid(12), repeat=2):
        rep = expectations(model, d, a, b)
        assert (rep.E_AB, rep.E_A, rep.E_B) == pytest.approx(enumerate_brans(w, a, b), abs=1e-12)


@pytest.mark.parametrize("model_id", MODELS)
def test_chsh_equilibrium(model_id):
    rep = chsh(get_model(model_id), equilibrium_for(model_id), *STD_ANGLES)
    assert rep.S == pytest.approx(-2 * math.sqrt(2), abs=1e-6)
    assert abs(rep.S) > 2


def test_chsh_weighted_brans_enumeration():
    w = (2, 1, 1, 1)
    a, a2, b, b2 = STD_ANGLES
    e = lambda x, y: enumerate_brans(w, x, y)[0]  # noqa: E731
    expected = e(a, b) - e(a, b2) + e(a2, b) + e(a2, b2)
    rep = chsh(get_model("sd-brans"), brans(w), *STD_ANGLES)
    assert rep.S == pytest.approx(expected, abs=1e-12)


def test_chsh_repeated_b_cancels():
    model = get_model("nl-interval")
    d = perturb(equilibrium_for("nl-interval"), LinearWeight())
    rep = chsh(model, d, 0.3, 1.1, 2.0, 2.0)
    assert rep.S == pytest.approx(2 * expectations(model, d, 1.1, 2.0).E_AB, abs=1e-12)
    assert abs(rep.S) <= 4


@pytest.mark.parametrize("model_id", MODELS)
def test_violation_zero_in_equilibrium(model_id):
    model = get_model(model_id)
    d = equilibrium_for(model_id)
    grid = settings_grid(8)
    for triple in itertools.product(grid, repeat=3):
        assert abs(marginal_violation(model, d, *triple).delta_A) < 1e-12


def test_violation_examples():
    rep = marginal_violation(get_model("sd-brans"), brans(), 0.0, PI / 2, 0.0)
    assert rep.delta_A == pytest.approx(-0.2, abs=1e-12)
    nl = perturb(equilibrium_for("nl-interval"), LinearWeight())
    rep = marginal_violation(get_model("nl-interval"), nl, 0.0, PI / 2, 0.0)
    # P(A=+) goes 3/8 -> 3/4 by direct interval integration of 2x
    assert rep.before.p_a_plus == pytest.approx(3 / 8, abs=1e-12)
    assert rep.after.p_a_plus == pytest.approx(3 / 4, abs=1e-12)
    assert rep.delta_A == pytest.approx(0.75, abs=1e-12)
    assert abs(rep.delta_A) <= 2


def test_mechanism_dependence_examples():
    model = get_model("sd-brans")
    fam = {(1, 1): brans((2, 1, 1, 1), (1, 1)), (2, 1): brans((1, 1, 1, 1), (2, 1))}
    rep = mechanism_dependence(model, fam, 0.0, PI / 2)
    assert rep.joints[(1, 1)] == pytest.approx((0.4, 0.2, 0.2, 0.2), abs=1e-15)
    assert rep.joints[(2, 1)] == pytest.approx((0.25,) * 4, abs=1e-15)
    assert rep.max_tv == pytest.approx(0.15, abs=1e-12)

    eq = {(i, j): equilibrium_for("sd-brans", (i, j)) for i in (1, 2) for j in (1, 2)}
    assert mechanism_dependence(model, eq, 0.3, 1.9).max_tv < 1e-15
    assert mechanism_dependence(model, {(1, 1): brans()}, 0, 1).max_tv == 0.0


def test_mechanism_dependence_errors():
    with pytest.raises(ValueError):
        mechanism_dependence(get_model("sd-brans"), {}, 0, 0)
    with pytest.raises(ValueError):
        mechanism_dependence(get_model("sd-brans"), {(1, 1): equilibrium_for("sd-arc")}, 0, 0)


def test_total_variation():
    assert total_variation((0.4, 0.2, 0.2, 0.2), (0.25,) * 4) == pytest.approx(0.15)


def test_mismatched_density_rejected():
    with pytest.raises(ValueError):
        expectations(get_model("sd-arc"), equilibrium_for("sd-brans"), 0, 0)


def test_degenerate_propagates():
    with pytest.raises(DegenerateDistributionError):
        expectations(get_model("sd-brans"), brans((1, 0, 0, 1)), 0.5, 0.5)


def _dens(model_id):
    if model_id == "sd-brans":
        return brans()
    if model_id == "nl-interval":
        return perturb(equilibrium_for(model_id), LinearWeight())
    return equilibrium_for(model_id)


@pytest.mark.parametrize("model_id", MODELS)
def test_exact_vs_monte_carlo(model_id):
    model = get_model(model_id)
    d = _dens(model_id)
    for k, (a, b) in enumerate([(0.0, PI / 2), (0.3, 2.0), (1.0, 1.0)]):
        ex = expectations(model, d, a, b)
        mc = expectations(model, d, a, b, MonteCarlo(n=10**6, seed=123, key=(k,)))
        for e1, e2, se in zip((ex.E_AB, ex.E_A, ex.E_B), (mc.E_AB, mc.E_A, mc.E_B), mc.std_errors):
            assert abs(e1 - e2) <= 4 * se + 1e-12


def test_monte_carlo_independent_of_workers():
    model = get_model("sd-arc")
    d = equilibrium_for("sd-arc")
    plan = MonteCarlo(n=300_000, seed=9, chunk=10_000)
    one = expectations(model, d, 0.2, 1.3, plan)
    four = expectations(model, d, 0.2, 1.3, MonteCarlo(n=300_000, seed=9, chunk=10_000, workers=4))
    assert (one.joint, one.E_AB, one.std_errors) == (four.joint, four.E_AB, four.std_errors)


def test_monte_carlo_chsh_within_4_sigma():
    rep = chsh(get_model("sd-brans"), equilibrium_for("sd-brans"), *STD_ANGLES, MonteCarlo(n=10**6, seed=5))
    assert abs(rep.S + 2 * math.sqrt(2)) <= 4 * rep.std_error
