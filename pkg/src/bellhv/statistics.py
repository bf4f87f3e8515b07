"""Expectation values, CHSH, marginal violations and mechanism dependence.

``Exact`` integrates the resolved density over each joint-outcome cell in
closed form. ``MonteCarlo`` draws seeded samples in fixed-size chunks; every
chunk has its own stream derived from ``(seed, key, chunk index)``, so the
result does not depend on how many workers process the chunks.
"""
from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Mapping, Union

import numpy as np

from bellhv.core import JOINT, HVModel, SettingLike, angle_of
from bellhv.distributions import ConditionalDensity


@dataclass(frozen=True)
class Exact:
    def to_json(self) -> dict:
        return {"kind": "exact"}


@dataclass(frozen=True)
class MonteCarlo:
    n: int = 1_000_000
    seed: int = 0
    workers: int = 1
    chunk: int = 1 << 16
    key: tuple[int, ...] = ()

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("Monte Carlo needs n >= 1")
        if self.chunk < 1 or self.workers < 1:
            raise ValueError("chunk and workers must be positive")

    def child(self, *key: int) -> MonteCarlo:
        return replace(self, key=self.key + tuple(key))

    def to_json(self) -> dict:
        return {"kind": "mc", "n": self.n, "seed": self.seed}


Method = Union[Exact, MonteCarlo]
EXACT = Exact()


@dataclass(frozen=True)
class ExpectationReport:
    m_a: float
    m_b: float
    joint: tuple[float, float, float, float]  # (++, +-, -+, --)
    E_AB: float
    E_A: float
    E_B: float
    method: Method = EXACT
    std_errors: tuple[float, float, float] | None = None  # (E_AB, E_A, E_B)

    @property
    def p_a_plus(self) -> float:
        return self.joint[0] + self.joint[1]

    def to_row(self) -> dict:
        row = {
            "m_a": self.m_a,
            "m_b": self.m_b,
            "E_AB": self.E_AB,
            "E_A": self.E_A,
            "E_B": self.E_B,
            "p_pp": self.joint[0],
            "p_pm": self.joint[1],
            "p_mp": self.joint[2],
            "p_mm": self.joint[3],
        }
        if self.std_errors is not None:
            row.update(se_AB=self.std_errors[0], se_A=self.std_errors[1], se_B=self.std_errors[2])
        return row


def _from_joint(p) -> tuple[float, float, float]:
    pp, pm, mp, mm = p
    e_ab = math.fsum((pp, -pm, -mp, mm))
    e_a = math.fsum((pp, pm, -mp, -mm))
    e_b = math.fsum((pp, -pm, mp, -mm))
    return e_ab, e_a, e_b


def _check_pair(model: HVModel, d: ConditionalDensity):
    if d.model_id != model.id:
        raise ValueError(f"density is for {d.model_id!r}, model is {model.id!r}")


def _mc_counts(model, d, m_a, m_b, plan: MonteCarlo) -> np.ndarray:
    resolved = d.resolve(m_a, m_b)
    n_chunks = -(-plan.n // plan.chunk)

    def run(c: int) -> np.ndarray:
        size = min(plan.chunk, plan.n - c * plan.chunk)
        ss = np.random.SeedSequence(plan.seed, spawn_key=plan.key + (c,))
        lams = resolved.sample(np.random.default_rng(ss), size)
        a = model.outcomes_a(lams, m_a, m_b)
        b = model.outcomes_b(lams, m_a, m_b)
        code = (a < 0).astype(np.int64) * 2 + (b < 0)
        return np.bincount(code, minlength=4)

    if plan.workers > 1 and n_chunks > 1:
        with ThreadPoolExecutor(plan.workers) as pool:
            parts = list(pool.map(run, range(n_chunks)))
    else:
        parts = [run(c) for c in range(n_chunks)]
    return np.sum(parts, axis=0)


def expectations(
    model: HVModel, d: ConditionalDensity, m_a: SettingLike, m_b: SettingLike, method: Method = EXACT
) -> ExpectationReport:
    _check_pair(model, d)
    a, b = angle_of(m_a), angle_of(m_b)
    if isinstance(method, MonteCarlo):
        counts = _mc_counts(model, d, a, b, method)
        n = method.n
        joint = tuple((counts / n).tolist())
        e_ab, e_a, e_b = _from_joint(joint)
        # each product is +-1, so var = 1 - E^2
        se = tuple(math.sqrt(max(1.0 - e * e, 0.0) / n) for e in (e_ab, e_a, e_b))
        return ExpectationReport(a, b, joint, e_ab, e_a, e_b, method, se)
    resolved = d.resolve(a, b)
    cells = model.cells(a, b)
    joint = tuple(resolved.mass(cells[k]) for k in JOINT)
    e_ab, e_a, e_b = _from_joint(joint)
    return ExpectationReport(a, b, joint, e_ab, e_a, e_b, EXACT)


@dataclass(frozen=True)
class ChshReport:
    settings: tuple[float, float, float, float]  # (a, a', b, b')
    S: float
    terms: tuple[ExpectationReport, ...]
    std_error: float | None = None

    def to_row(self) -> dict:
        row = dict(zip(("a", "a_prime", "b", "b_prime"), self.settings))
        row["S"] = self.S
        for name, t in zip(("E_ab", "E_ab_prime", "E_a_prime_b", "E_a_prime_b_prime"), self.terms):
            row[name] = t.E_AB
        if self.std_error is not None:
            row["se_S"] = self.std_error
        return row


def chsh(model, d, a, a2, b, b2, method: Method = EXACT) -> ChshReport:
    """``S = E(a,b) - E(a,b') + E(a',b) + E(a',b')``."""
    pairs = ((a, b), (a, b2), (a2, b), (a2, b2))
    terms = []
    for k, (x, y) in enumerate(pairs):
        m = method.child(k) if isinstance(method, MonteCarlo) else method
        terms.append(expectations(model, d, x, y, m))
    s = math.fsum((terms[0].E_AB, -terms[1].E_AB, terms[2].E_AB, terms[3].E_AB))
    se = None
    if isinstance(method, MonteCarlo):
        se = math.sqrt(math.fsum(t.std_errors[0] ** 2 for t in terms))
    return ChshReport(tuple(angle_of(x) for x in (a, a2, b, b2)), s, tuple(terms), se)


@dataclass(frozen=True)
class ViolationReport:
    """``delta_A = E[A | M_A, M_B'] - E[A | M_A, M_B]`` and its B-side twin."""

    m_a: float
    m_b: float
    m_b_prime: float
    delta_A: float
    before: ExpectationReport
    after: ExpectationReport

    @property
    def delta_p_a_plus(self) -> float:
        return self.after.p_a_plus - self.before.p_a_plus

    def to_row(self) -> dict:
        return {
            "m_a": self.m_a,
            "m_b": self.m_b,
            "m_b_prime": self.m_b_prime,
            "E_A": self.before.E_A,
            "E_A_prime": self.after.E_A,
            "delta_A": self.delta_A,
        }


def marginal_violation(model, d, m_a, m_b, m_b2, method: Method = EXACT) -> ViolationReport:
    if isinstance(method, MonteCarlo):
        before = expectations(model, d, m_a, m_b, method.child(0))
        after = expectations(model, d, m_a, m_b2, method.child(1))
    else:
        before = expectations(model, d, m_a, m_b, method)
        after = expectations(model, d, m_a, m_b2, method)
    delta = math.fsum((after.p_a_plus, -before.p_a_plus)) * 2.0
    return ViolationReport(before.m_a, before.m_b, after.m_b, delta, before, after)


def total_variation(p, q) -> float:
    return 0.5 * math.fsum(abs(x - y) for x, y in zip(p, q))


@dataclass(frozen=True)
class MechanismReport:
    m_a: float
    m_b: float
    max_tv: float
    joints: dict = field(default_factory=dict)  # mechanism pair -> joint
    table: tuple = ()  # ((pair1, pair2, tv), ...)

    def to_rows(self) -> list[dict]:
        return [
            {
                "m_a": self.m_a,
                "m_b": self.m_b,
                "mechanism_1": f"{p[0]},{p[1]}",
                "mechanism_2": f"{q[0]},{q[1]}",
                "tv": tv,
            }
            for p, q, tv in self.table
        ]


def mechanism_dependence(
    model: HVModel,
    densities: Mapping[tuple[int, int], ConditionalDensity],
    m_a: SettingLike,
    m_b: SettingLike,
    method: Method = EXACT,
) -> MechanismReport:
    """Largest total-variation distance between joint outcome distributions
    obtained with different setting mechanisms at the same settings."""
    if not densities:
        raise ValueError("no mechanism pairs given")
    joints = {}
    for k, pair in enumerate(sorted(densities)):
        d = densities[pair]
        if d.model_id != model.id:
            raise ValueError(f"mechanism {pair} density is for {d.model_id!r}, model is {model.id!r}")
        m = method.child(k) if isinstance(method, MonteCarlo) else method
        joints[pair] = expectations(model, d, m_a, m_b, m).joint
    table = tuple(
        (p, q, total_variation(joints[p], joints[q])) for p, q in itertools.combinations(sorted(joints), 2)
    )
    max_tv = max((tv for _, _, tv in table), default=0.0)
    return MechanismReport(angle_of(m_a), angle_of(m_b), max_tv, joints, table)


def settings_grid(n: int = 20) -> list[float]:
    """``n`` evenly spaced angles in ``[0, 2*pi)``."""
    return [2.0 * math.pi * k / n for k in range(n)]
