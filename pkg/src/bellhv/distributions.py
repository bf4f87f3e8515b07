"""Conditional hidden-variable densities ``rho(lambda | M_A, M_B)``.

A ``ConditionalDensity`` is a declarative description (model id, form,
mechanism pair). Evaluating it at a settings pair yields a *resolved*
density that supports exact integration over measurable subsets and
inverse-CDF sampling:

* ``DiscreteMasses`` on the four-point space;
* ``PiecewiseLinear`` on an interval domain, ``rho = c0 + c1 * lambda`` per piece.

Equilibrium forms reproduce the singlet joint distribution. Nonequilibrium
forms multiply the equilibrium conditional by a settings-independent weight
(superdeterministic models) or replace the uniform density outright
(``nl-interval``, whose density never depends on the settings).

The weight family is one convenient parameterisation; nothing singles it
out beyond being exactly integrable.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from bellhv.core import (
    JOINT,
    Family,
    HVModel,
    SettingLike,
    angle_of,
    get_model,
    singlet_joint,
)
from bellhv.errors import DegenerateDistributionError, DomainError
from bellhv.sets import IntervalSet, MeasurableSubset, PointSet

MAX_BINS = 10_000


# ---------------------------------------------------------------------------
# weight specifications


def _check_weights(values, what: str) -> tuple[float, ...]:
    vals = tuple(float(v) for v in values)
    if not vals:
        raise ValueError(f"{what}: no weights given")
    if any(not math.isfinite(v) or v < 0 for v in vals):
        raise ValueError(f"{what}: weights must be finite and nonnegative, got {vals}")
    if not any(v > 0 for v in vals):
        raise ValueError(f"{what}: at least one weight must be positive")
    return vals


@dataclass(frozen=True)
class PointWeights:
    """Weights on the four points, ordered ``(++, +-, -+, --)``."""

    weights: tuple[float, float, float, float]

    def __post_init__(self):
        vals = _check_weights(self.weights, "point weights")
        if len(vals) != 4:
            raise ValueError(f"point weights need exactly 4 values, got {len(vals)}")
        object.__setattr__(self, "weights", vals)

    def to_json(self) -> dict:
        return {"form": "weighted", "weights": list(self.weights)}


@dataclass(frozen=True)
class PiecewiseWeights:
    """Piecewise-constant weight on an interval domain.

    ``edges`` defaults to equal-width bins spanning the model's domain; when
    given it must run from the domain start to the domain end.
    """

    heights: tuple[float, ...]
    edges: tuple[float, ...] | None = None

    def __post_init__(self):
        vals = _check_weights(self.heights, "histogram")
        if len(vals) > MAX_BINS:
            raise ValueError(f"histogram has {len(vals)} bins; at most {MAX_BINS} allowed")
        object.__setattr__(self, "heights", vals)
        if self.edges is not None:
            edges = tuple(float(e) for e in self.edges)
            if len(edges) != len(vals) + 1:
                raise ValueError("histogram needs len(heights) + 1 edges")
            if any(not math.isfinite(e) for e in edges) or any(b <= a for a, b in zip(edges, edges[1:])):
                raise ValueError("histogram edges must be finite and strictly increasing")
            object.__setattr__(self, "edges", edges)

    def edges_on(self, domain: tuple[float, float]) -> np.ndarray:
        lo, hi = domain
        if self.edges is None:
            return np.linspace(lo, hi, len(self.heights) + 1)
        edges = np.array(self.edges)
        if abs(edges[0] - lo) > 1e-12 or abs(edges[-1] - hi) > 1e-12:
            raise ValueError(f"histogram edges must span the domain [{lo}, {hi}]")
        edges[0], edges[-1] = lo, hi
        return edges

    def to_json(self) -> dict:
        out = {"form": "histogram", "heights": list(self.heights)}
        if self.edges is not None:
            out["edges"] = list(self.edges)
        return out


@dataclass(frozen=True)
class LinearWeight:
    """The weight ``w(lambda) = lambda`` on the unit interval (normalised: ``2 lambda``)."""

    def to_json(self) -> dict:
        return {"form": "linear"}


WeightSpec = Union[PointWeights, PiecewiseWeights, LinearWeight]


@dataclass(frozen=True)
class ConditionalDensity:
    """Density of hidden variables conditioned on the settings.

    ``weight is None`` means equilibrium. The mechanism pair labels which
    setting mechanisms ``(alpha_i, beta_j)`` this density belongs to; it is
    excluded from equality so that two mechanisms carrying the same form
    compare equal.
    """

    model_id: str
    weight: WeightSpec | None = None
    mechanism: tuple[int, int] = field(default=(1, 1), compare=False)

    def __post_init__(self):
        model = get_model(self.model_id)
        i, j = self.mechanism
        if int(i) < 1 or int(j) < 1:
            raise ValueError(f"mechanism indices must be >= 1, got {self.mechanism}")
        object.__setattr__(self, "mechanism", (int(i), int(j)))
        _check_compatible(model, self.weight)

    @property
    def is_equilibrium(self) -> bool:
        return self.weight is None

    @property
    def model(self) -> HVModel:
        return get_model(self.model_id)

    def resolve(self, m_a: SettingLike, m_b: SettingLike) -> "ResolvedDensity":
        return _resolve(self, angle_of(m_a), angle_of(m_b))

    def to_json(self) -> dict:
        body = {"form": "equilibrium"} if self.weight is None else self.weight.to_json()
        return {"model": self.model_id, "mechanism": list(self.mechanism), **body}


def _check_compatible(model: HVModel, weight):
    if weight is None:
        return
    if model.space.discrete:
        if not isinstance(weight, PointWeights):
            raise ValueError(f"{model.id} needs point weights, got {type(weight).__name__}")
    elif isinstance(weight, PointWeights):
        raise ValueError(f"{model.id} needs a histogram or linear weight, not point weights")
    elif isinstance(weight, LinearWeight) and model.space.periodic:
        raise ValueError("the linear weight is defined on the unit interval only")
    elif isinstance(weight, PiecewiseWeights):
        weight.edges_on(model.space.domain)


def equilibrium_for(model_id: str, mechanism: tuple[int, int] = (1, 1)) -> ConditionalDensity:
    return ConditionalDensity(model_id, None, mechanism)


def perturb(d: ConditionalDensity, spec: WeightSpec) -> ConditionalDensity:
    """Replace the form of ``d`` with the nonequilibrium weight ``spec``."""
    return ConditionalDensity(d.model_id, spec, d.mechanism)


# ---------------------------------------------------------------------------
# resolved densities


@dataclass(frozen=True)
class DiscreteMasses:
    """Probability masses on the four points (counting base measure)."""

    masses: tuple[float, float, float, float]

    @property
    def points(self):
        return JOINT

    def at(self, lam) -> float:
        return self.masses[JOINT.index(tuple(lam))]

    def mass(self, subset: PointSet) -> float:
        return math.fsum(m for p, m in zip(JOINT, self.masses) if p in subset)

    def total(self) -> float:
        return math.fsum(self.masses)

    def support(self) -> PointSet:
        return PointSet(frozenset(p for p, m in zip(JOINT, self.masses) if m > 0), JOINT)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """``n`` draws as an ``(n, 2)`` array of outcome pairs."""
        cdf = np.cumsum(self.masses)
        u = rng.random(n) * cdf[-1]
        idx = np.searchsorted(cdf, u, side="right")
        # never land on a zero-mass point through rounding at the top end
        idx = np.minimum(idx, int(np.flatnonzero(np.asarray(self.masses) > 0)[-1]))
        return np.array(JOINT, dtype=np.int8)[idx]


@dataclass(frozen=True)
class PiecewiseLinear:
    """``rho(x) = c0[k] + c1[k] * x`` on ``[edges[k], edges[k+1])``."""

    edges: tuple[float, ...]
    c0: tuple[float, ...]
    c1: tuple[float, ...]

    @property
    def domain(self) -> tuple[float, float]:
        return self.edges[0], self.edges[-1]

    def _arrays(self):
        return np.asarray(self.edges), np.asarray(self.c0), np.asarray(self.c1)

    def at(self, x: float) -> float:
        lo, hi = self.domain
        if not lo <= x < hi:
            raise DomainError(f"{x!r} outside [{lo}, {hi})")
        k = int(np.searchsorted(self.edges, x, side="right")) - 1
        return self.c0[k] + self.c1[k] * x

    def piece_masses(self) -> np.ndarray:
        e, c0, c1 = self._arrays()
        s, t = e[:-1], e[1:]
        return c0 * (t - s) + 0.5 * c1 * (t * t - s * s)

    def _integral(self, s: float, t: float) -> float:
        e, c0, c1 = self._arrays()
        lo = np.maximum(e[:-1], s)
        hi = np.minimum(e[1:], t)
        ok = hi > lo
        lo, hi = lo[ok], hi[ok]
        return math.fsum((c0[ok] * (hi - lo) + 0.5 * c1[ok] * (hi * hi - lo * lo)).tolist())

    def mass(self, subset: IntervalSet) -> float:
        return math.fsum(self._integral(s, t) for s, t in subset.intervals)

    def total(self) -> float:
        return math.fsum(self.piece_masses().tolist())

    def support(self) -> IntervalSet:
        m = self.piece_masses()
        keep = [(self.edges[k], self.edges[k + 1]) for k in range(len(m)) if m[k] > 0]
        return IntervalSet(tuple(keep), self.domain)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        e, c0, c1 = self._arrays()
        m = self.piece_masses()
        cdf = np.cumsum(m)
        u = rng.random((2, n))
        k = np.searchsorted(cdf, u[0] * cdf[-1], side="right")
        k = np.minimum(k, int(np.flatnonzero(m > 0)[-1]))
        s, width = e[k], e[k + 1] - e[k]
        # solve c1/2 t^2 + (c0 + c1 s) t = u m_k for the offset t in the piece
        q = u[1] * m[k]
        b = c0[k] + c1[k] * s
        root = np.sqrt(b * b + 2.0 * c1[k] * q)
        denom = b + root
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(denom > 0, 2.0 * q / denom, 0.0)
        return s + np.clip(t, 0.0, np.nextafter(width, 0.0))


ResolvedDensity = Union[DiscreteMasses, PiecewiseLinear]


def _equilibrium_pieces(model: HVModel, m_a: float, m_b: float):
    """Equilibrium as (edges, c0): uniform for the nonlocal model, else cell-uniform."""
    lo, hi = model.space.domain
    if model.family is Family.NONLOCAL:
        return np.array([lo, hi]), np.array([1.0 / (hi - lo)])
    pieces = []
    for (a_out, b_out), cell in model.cells(m_a, m_b).items():
        length = cell.measure()
        if length <= 0:
            continue
        height = singlet_joint(a_out, b_out, m_a, m_b) / length
        pieces.extend((s, t, height) for s, t in cell.intervals)
    pieces.sort()
    edges, heights = [lo], []
    for s, t, h in pieces:
        if s > edges[-1]:
            heights.append(0.0)
            edges.append(s)
        heights.append(h)
        edges.append(t)
    if edges[-1] < hi:
        heights.append(0.0)
        edges.append(hi)
    return np.array(edges), np.array(heights)


def _overlay(edges_a, edges_b):
    edges = np.union1d(edges_a, edges_b)
    keep = np.concatenate(([True], np.diff(edges) > 1e-15))
    return edges[keep]


def _lookup(edges, values, points):
    k = np.clip(np.searchsorted(edges, points, side="right") - 1, 0, len(values) - 1)
    return np.asarray(values)[k]


@functools.lru_cache(maxsize=4096)
def _resolve(d: ConditionalDensity, m_a: float, m_b: float) -> ResolvedDensity:
    model = d.model
    w = d.weight
    if model.space.discrete:
        eq = np.array([singlet_joint(a, b, m_a, m_b) for a, b in JOINT])
        raw = eq if w is None else eq * np.array(w.weights)
        z = math.fsum(raw.tolist())
        if not z > 0:
            raise DegenerateDistributionError(
                f"weights {w.weights} annihilate all equilibrium mass at ({m_a}, {m_b})"
            )
        return DiscreteMasses(tuple((raw / z).tolist()))

    domain = model.space.domain
    eq_edges, eq_h = _equilibrium_pieces(model, m_a, m_b)
    if w is None:
        edges, c0, c1 = eq_edges, eq_h, np.zeros_like(eq_h)
    elif isinstance(w, LinearWeight):
        edges = eq_edges
        c0, c1 = np.zeros_like(eq_h), eq_h
    else:
        w_edges = w.edges_on(domain)
        edges = _overlay(eq_edges, w_edges)
        mids = 0.5 * (edges[:-1] + edges[1:])
        c0 = _lookup(eq_edges, eq_h, mids) * _lookup(w_edges, w.heights, mids)
        c1 = np.zeros_like(c0)
    raw = PiecewiseLinear(tuple(edges.tolist()), tuple(c0.tolist()), tuple(c1.tolist()))
    z = raw.total()
    if not z > 0:
        raise DegenerateDistributionError(f"weight annihilates all equilibrium mass at ({m_a}, {m_b})")
    return PiecewiseLinear(raw.edges, tuple((c0 / z).tolist()), tuple((c1 / z).tolist()))


# ---------------------------------------------------------------------------
# public operations


def density_at(d: ConditionalDensity, lam, m_a: SettingLike, m_b: SettingLike) -> float:
    """Density (mass, on the four-point space) of ``lam`` given the settings."""
    lam = d.model.space.check(lam)
    return float(d.resolve(m_a, m_b).at(lam))


def mass(d: ConditionalDensity, subset: MeasurableSubset, m_a: SettingLike, m_b: SettingLike) -> float:
    """Exact probability of ``subset`` under ``rho(. | m_a, m_b)``."""
    return d.resolve(m_a, m_b).mass(subset)


def normalization_check(d: ConditionalDensity, m_a: SettingLike, m_b: SettingLike) -> float:
    """``|integral(rho) - 1|`` by exact piecewise integration."""
    r = d.resolve(m_a, m_b)
    return abs(r.mass(d.model.space.full()) - 1.0)


def sample_many(d: ConditionalDensity, m_a: SettingLike, m_b: SettingLike, rng: np.random.Generator, n: int) -> np.ndarray:
    """``n`` independent draws; ``(n, 2)`` outcome pairs or ``(n,)`` floats."""
    return d.resolve(m_a, m_b).sample(rng, int(n))


def sample(d: ConditionalDensity, m_a: SettingLike, m_b: SettingLike, rng: np.random.Generator):
    """A single hidden-variable point."""
    x = sample_many(d, m_a, m_b, rng, 1)[0]
    if d.model.space.discrete:
        return tuple(int(v) for v in x)
    return float(x)


def l1_distance(r1: ResolvedDensity, r2: ResolvedDensity) -> float:
    """Exact ``integral |rho1 - rho2|`` between two resolved densities on one space."""
    if isinstance(r1, DiscreteMasses):
        return math.fsum(abs(a - b) for a, b in zip(r1.masses, r2.masses))
    edges = _overlay(np.asarray(r1.edges), np.asarray(r2.edges))
    mids = 0.5 * (edges[:-1] + edges[1:])
    d0 = _lookup(r1.edges, r1.c0, mids) - _lookup(r2.edges, r2.c0, mids)
    d1 = _lookup(r1.edges, r1.c1, mids) - _lookup(r2.edges, r2.c1, mids)
    total = []
    for s, t, a, b in zip(edges[:-1], edges[1:], d0, d1):
        cuts = [s, t]
        if b != 0 and s < -a / b < t:
            cuts = [s, -a / b, t]
        for u, v in zip(cuts, cuts[1:]):
            total.append(abs(a * (v - u) + 0.5 * b * (v * v - u * u)))
    return math.fsum(total)
