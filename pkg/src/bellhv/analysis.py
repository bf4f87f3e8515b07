"""Set-level account of how a distant setting change moves the A marginal.

For a nonlocal model the density is fixed and the outcome partition moves:
hidden variables in the transition sets flip their A outcome, and the
marginal changes by the imbalance of the two transition-set masses.

For a superdeterministic model the outcome partition is fixed and the
density moves: the same set ``S_A+`` is weighed by two different
conditionals (a reshuffle), and no hidden variable changes its outcome.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from bellhv.core import MINUS, PLUS, Family, HVModel, SettingLike, angle_of
from bellhv.distributions import ConditionalDensity, l1_distance
from bellhv.errors import NotApplicableError
from bellhv.sets import MeasurableSubset

# shifts smaller than this are reported as "no mechanism fired"
FIRE_TOL = 1e-12


def _settings(*ms: SettingLike) -> tuple[float, ...]:
    return tuple(angle_of(m) for m in ms)


def support(
    model: HVModel, d: ConditionalDensity, m_a: SettingLike, m_b: SettingLike, m_b2: SettingLike | None = None
) -> MeasurableSubset:
    """``S = {lambda : rho(lambda) > 0}``.

    With ``m_b2`` given, the union of the supports under both B settings.
    For a nonlocal model the density ignores the settings, so the two agree.
    """
    s = d.resolve(m_a, m_b).support()
    if m_b2 is not None:
        s = s | d.resolve(m_a, m_b2).support()
    return s


@dataclass(frozen=True)
class PartitionReport:
    settings: tuple[float, float, float]  # (M_A, M_B, M_B')
    family: Family
    S: MeasurableSubset
    S_A_plus: MeasurableSubset
    S_A_minus: MeasurableSubset
    S_A_plus_prime: MeasurableSubset
    S_A_minus_prime: MeasurableSubset

    def to_json(self) -> dict:
        return {
            "settings": list(self.settings),
            "family": self.family.value,
            "S": self.S.to_json(),
            "S_A_plus": self.S_A_plus.to_json(),
            "S_A_minus": self.S_A_minus.to_json(),
            "S_A_plus_prime": self.S_A_plus_prime.to_json(),
            "S_A_minus_prime": self.S_A_minus_prime.to_json(),
        }


def partition(model, d, m_a, m_b, m_b2) -> PartitionReport:
    a, b, b2 = _settings(m_a, m_b, m_b2)
    s = support(model, d, a, b, b2)
    return PartitionReport(
        (a, b, b2),
        model.family,
        s,
        s & model.region("A", PLUS, a, b),
        s & model.region("A", MINUS, a, b),
        s & model.region("A", PLUS, a, b2),
        s & model.region("A", MINUS, a, b2),
    )


@dataclass(frozen=True)
class TransitionReport:
    settings: tuple[float, float, float]
    family: Family
    T_plus_minus: MeasurableSubset
    T_minus_plus: MeasurableSubset
    mass_plus_minus: float
    mass_minus_plus: float

    def to_json(self) -> dict:
        return {
            "settings": list(self.settings),
            "family": self.family.value,
            "T_plus_minus": self.T_plus_minus.to_json(),
            "T_minus_plus": self.T_minus_plus.to_json(),
            "mass_plus_minus": self.mass_plus_minus,
            "mass_minus_plus": self.mass_minus_plus,
        }


def transitions(model, d, m_a, m_b, m_b2, part: PartitionReport | None = None) -> TransitionReport:
    """Transition sets ``T(+,-) = S_A+ & S'_A-`` and ``T(-,+) = S_A- & S'_A+``.

    Masses are taken under ``rho(. | M_A, M_B)``; for nonlocal models that
    is the only density there is.
    """
    part = part or partition(model, d, m_a, m_b, m_b2)
    a, b, _ = part.settings
    t_pm = part.S_A_plus & part.S_A_minus_prime
    t_mp = part.S_A_minus & part.S_A_plus_prime
    r = d.resolve(a, b)
    return TransitionReport(part.settings, part.family, t_pm, t_mp, r.mass(t_pm), r.mass(t_mp))


def _require(family: Family, wanted: Family, what: str):
    if family is not wanted:
        raise NotApplicableError(f"{what} applies to {wanted.value} models, not {family.value}")


def detailed_balance_residual(d: ConditionalDensity, t: TransitionReport) -> float:
    """``mass(T(+,-)) - mass(T(-,+))``; zero exactly when the A marginal is unchanged."""
    _require(t.family, Family.NONLOCAL, "detailed balance")
    a, b, _ = t.settings
    r = d.resolve(a, b)
    return math.fsum((r.mass(t.T_plus_minus), -r.mass(t.T_minus_plus)))


@dataclass(frozen=True)
class NonlocalShift:
    """Change in ``P(A=+)`` computed two ways; they agree by set algebra."""

    settings: tuple[float, float, float]
    via_transitions: float
    via_supports: float
    transitions: TransitionReport

    @property
    def mechanism(self) -> str:
        return "transition-imbalance" if abs(self.via_transitions) > FIRE_TOL else "none"

    def to_json(self) -> dict:
        return {
            "settings": list(self.settings),
            "via_transitions": self.via_transitions,
            "via_supports": self.via_supports,
            "mechanism": self.mechanism,
        }


def marginal_shift_nonlocal(model, d, m_a, m_b, m_b2) -> NonlocalShift:
    _require(model.family, Family.NONLOCAL, "the transition-set shift")
    part = partition(model, d, m_a, m_b, m_b2)
    t = transitions(model, d, m_a, m_b, m_b2, part)
    r = d.resolve(part.settings[0], part.settings[1])
    via_t = math.fsum((t.mass_minus_plus, -t.mass_plus_minus))
    via_s = math.fsum((r.mass(part.S_A_plus_prime), -r.mass(part.S_A_plus)))
    return NonlocalShift(part.settings, via_t, via_s, t)


@dataclass(frozen=True)
class ReshuffleShift:
    """Change in ``P(A=+)`` from reweighing a fixed ``S_A+``.

    ``reshuffled_mass`` is half the L1 distance between the two conditionals,
    the total probability moved around inside ``S``.
    """

    settings: tuple[float, float, float]
    measure_before: float
    measure_after: float
    shift: float
    reshuffled_mass: float

    @property
    def mechanism(self) -> str:
        return "reshuffle" if abs(self.shift) > FIRE_TOL else "none"

    def to_json(self) -> dict:
        return {
            "settings": list(self.settings),
            "measure_S_A_plus_before": self.measure_before,
            "measure_S_A_plus_after": self.measure_after,
            "shift": self.shift,
            "reshuffled_mass": self.reshuffled_mass,
            "mechanism": self.mechanism,
        }


def marginal_shift_sd(model, d, m_a, m_b, m_b2) -> ReshuffleShift:
    _require(model.family, Family.SUPERDETERMINISTIC, "the reshuffle shift")
    part = partition(model, d, m_a, m_b, m_b2)
    a, b, b2 = part.settings
    before, after = d.resolve(a, b), d.resolve(a, b2)
    m0 = before.mass(part.S_A_plus)
    m1 = after.mass(part.S_A_plus)
    return ReshuffleShift(part.settings, m0, m1, math.fsum((m1, -m0)), 0.5 * l1_distance(before, after))


@dataclass(frozen=True)
class MechanismReport:
    """Both candidate mechanisms evaluated side by side for one triple."""

    settings: tuple[float, float, float]
    family: Family
    shift: float
    transition_imbalance: float
    reshuffle_shift: float

    @property
    def mechanism(self) -> str:
        fired = [
            name
            for name, v in (("transition-imbalance", self.transition_imbalance), ("reshuffle", self.reshuffle_shift))
            if abs(v) > FIRE_TOL
        ]
        if len(fired) > 1:
            raise AssertionError(f"both mechanisms fired at {self.settings}")
        return fired[0] if fired else "none"


def signalling_mechanism(model, d, m_a, m_b, m_b2) -> MechanismReport:
    """Evaluate the transition imbalance and the reshuffle for any model.

    The transition imbalance uses the density at ``M_B`` on both partitions;
    the reshuffle weighs the unprimed ``S_A+`` under both conditionals.
    """
    part = partition(model, d, m_a, m_b, m_b2)
    a, b, b2 = part.settings
    t = transitions(model, d, a, b, b2, part)
    before, after = d.resolve(a, b), d.resolve(a, b2)
    imbalance = math.fsum((t.mass_minus_plus, -t.mass_plus_minus))
    reshuffle = math.fsum((after.mass(part.S_A_plus), -before.mass(part.S_A_plus)))
    shift = math.fsum((after.mass(part.S_A_plus_prime), -before.mass(part.S_A_plus)))
    return MechanismReport(part.settings, model.family, shift, imbalance, reshuffle)
