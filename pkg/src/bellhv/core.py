"""Hidden-variable spaces, the built-in deterministic models, and causal audit.

Three models are provided, keyed by string id:

``sd-brans``
    Superdeterministic model on four points ``(a_pre, b_pre)``; each wing
    reads its predetermined outcome.
``sd-arc``
    Superdeterministic model on the circle, ``A = sgn cos(phi - M_A)`` and
    ``B = -sgn cos(phi - M_B)``.
``nl-interval``
    Nonlocal deterministic model on ``[0, 1)``: four consecutive blocks
    ``(+,+), (-,+), (+,-), (-,-)`` whose lengths are the singlet joint
    probabilities at ``(M_A, M_B)``.

All indicator functions accept either a single hidden-variable point or a
numpy array of them, so the Monte Carlo paths reuse the same code.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

from bellhv.errors import DomainError
from bellhv.sets import IntervalSet, MeasurableSubset, PointSet

TWO_PI = 2.0 * math.pi
PLUS, MINUS = 1, -1
OUTCOMES = (PLUS, MINUS)
# joint outcome cells, in the order used everywhere for weights and tables
JOINT = ((1, 1), (1, -1), (-1, 1), (-1, -1))


def canonical_angle(x: float) -> float:
    """Reduce an angle to ``[0, 2*pi)``."""
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"setting angle must be finite, got {x!r}")
    r = math.fmod(x, TWO_PI)
    if r < 0.0:
        r += TWO_PI
    if r >= TWO_PI:
        r = 0.0
    return r


@dataclass(frozen=True)
class Setting:
    """A measurement direction in the plane, stored canonically."""

    angle: float

    def __post_init__(self):
        object.__setattr__(self, "angle", canonical_angle(self.angle))

    def __float__(self):
        return self.angle


SettingLike = Union[Setting, float, int]


def angle_of(m: SettingLike) -> float:
    return m.angle if isinstance(m, Setting) else canonical_angle(m)


def singlet_joint(a_out: int, b_out: int, m_a: SettingLike, m_b: SettingLike) -> float:
    """Singlet probability ``p(A, B | a, b) = (1 - A B cos(a - b)) / 4``."""
    return (1.0 - a_out * b_out * math.cos(angle_of(m_a) - angle_of(m_b))) / 4.0


# ---------------------------------------------------------------------------
# spaces


class SpaceKind(str, enum.Enum):
    FOUR_POINT = "four-point"
    UNIT_INTERVAL = "unit-interval"
    CIRCLE = "circle"


@dataclass(frozen=True)
class LambdaSpace:
    kind: SpaceKind

    @property
    def discrete(self) -> bool:
        return self.kind is SpaceKind.FOUR_POINT

    @property
    def points(self) -> tuple:
        if not self.discrete:
            raise AttributeError(f"{self.kind.value} space has no point list")
        return JOINT

    @property
    def domain(self) -> tuple[float, float]:
        if self.kind is SpaceKind.UNIT_INTERVAL:
            return (0.0, 1.0)
        if self.kind is SpaceKind.CIRCLE:
            return (0.0, TWO_PI)
        raise AttributeError("four-point space has no interval domain")

    @property
    def periodic(self) -> bool:
        return self.kind is SpaceKind.CIRCLE

    def total_measure(self) -> float:
        if self.discrete:
            return 4.0
        lo, hi = self.domain
        return hi - lo

    def full(self) -> MeasurableSubset:
        if self.discrete:
            return PointSet.full(JOINT)
        return IntervalSet.full(self.domain)

    def empty(self) -> MeasurableSubset:
        if self.discrete:
            return PointSet(frozenset(), JOINT)
        return IntervalSet.empty(self.domain)

    def contains(self, lam) -> bool:
        if self.discrete:
            try:
                return tuple(int(v) for v in lam) in JOINT and len(lam) == 2
            except (TypeError, ValueError):
                return False
        try:
            x = float(lam)
        except (TypeError, ValueError):
            return False
        lo, hi = self.domain
        return lo <= x < hi

    def check(self, lam):
        """Return ``lam`` in normal form or raise ``DomainError``."""
        if not self.contains(lam):
            raise DomainError(f"{lam!r} is not a point of the {self.kind.value} space")
        if self.discrete:
            return tuple(int(v) for v in lam)
        return float(lam)


FOUR_POINT = LambdaSpace(SpaceKind.FOUR_POINT)
UNIT_INTERVAL = LambdaSpace(SpaceKind.UNIT_INTERVAL)
CIRCLE = LambdaSpace(SpaceKind.CIRCLE)


# ---------------------------------------------------------------------------
# causal metadata


class Family(str, enum.Enum):
    NONLOCAL = "nonlocal-deterministic"
    SUPERDETERMINISTIC = "superdeterministic"


NODES = ("lambda", "M_A", "M_B", "A", "B")


@dataclass(frozen=True)
class CausalMetadata:
    """Declared causal graph over ``lambda, M_A, M_B, A, B``.

    ``sd_type`` is a free annotation ("I" or "II") with no semantics.
    """

    family: Family
    edges: frozenset = frozenset()
    sd_type: str | None = None

    def __post_init__(self):
        edges = frozenset(tuple(e) for e in self.edges)
        for src, dst in edges:
            if src not in NODES or dst not in NODES:
                raise ValueError(f"edge {src}->{dst} uses an unknown node")
        object.__setattr__(self, "edges", edges)
        if self.family is Family.SUPERDETERMINISTIC:
            forbidden = {("M_B", "A"), ("M_A", "B"), ("M_A", "lambda"), ("M_B", "lambda")}
            bad = edges & forbidden
            if bad:
                raise ValueError(f"superdeterministic graph contains {sorted(bad)}")
        else:
            missing = {("M_B", "A"), ("M_A", "B")} - edges
            if missing:
                raise ValueError(f"nonlocal graph lacks {sorted(missing)}")
        if self.sd_type not in (None, "I", "II"):
            raise ValueError("sd_type must be 'I', 'II' or None")

    def is_ancestor(self, src: str, dst: str) -> bool:
        """True if a directed path ``src -> ... -> dst`` exists."""
        frontier, seen = [src], {src}
        while frontier:
            node = frontier.pop()
            for a, b in self.edges:
                if a == node and b not in seen:
                    if b == dst:
                        return True
                    seen.add(b)
                    frontier.append(b)
        return False

    def to_json(self) -> dict:
        return {
            "family": self.family.value,
            "edges": sorted(f"{a}->{b}" for a, b in self.edges),
            "sd_type": self.sd_type,
        }


SD_EDGES = frozenset({("lambda", "A"), ("lambda", "B"), ("lambda", "M_A"), ("lambda", "M_B")})
NL_EDGES = frozenset(
    {("lambda", "A"), ("lambda", "B"), ("M_A", "A"), ("M_B", "A"), ("M_A", "B"), ("M_B", "B")}
)


def classify_signal(marginal_violated: bool, causally_dependent: bool) -> str:
    """Two-condition reading of a signal from ``M_B`` to ``A``.

    Returns ``"actual"`` when the marginal changes and the outcome depends
    causally on the distant setting, ``"apparent"`` when only the marginal
    changes, and ``"none"`` otherwise.
    """
    if not marginal_violated:
        return "none"
    return "actual" if causally_dependent else "apparent"


# ---------------------------------------------------------------------------
# models


class HVModel:
    """Deterministic hidden-variables model of the two-wing singlet experiment."""

    id: str
    space: LambdaSpace
    meta: CausalMetadata

    @property
    def family(self) -> Family:
        return self.meta.family

    # vectorised outcome maps, implemented per family
    def outcomes_a(self, lams, m_a: float, m_b: float) -> np.ndarray:
        raise NotImplementedError

    def outcomes_b(self, lams, m_a: float, m_b: float) -> np.ndarray:
        raise NotImplementedError

    def region(self, wing: str, outcome: int, m_a: SettingLike, m_b: SettingLike) -> MeasurableSubset:
        """Exact set of hidden variables giving ``outcome`` on ``wing``."""
        raise NotImplementedError

    def outcome_a(self, lam, m_a: SettingLike, m_b: SettingLike) -> int:
        lam = self.space.check(lam)
        return int(self.outcomes_a(np.asarray(lam), angle_of(m_a), angle_of(m_b)))

    def outcome_b(self, lam, m_a: SettingLike, m_b: SettingLike) -> int:
        lam = self.space.check(lam)
        return int(self.outcomes_b(np.asarray(lam), angle_of(m_a), angle_of(m_b)))

    def cells(self, m_a: SettingLike, m_b: SettingLike) -> dict[tuple[int, int], MeasurableSubset]:
        """Joint-outcome cells ``{(A, B): subset}``; they partition the space."""
        out = {}
        for a_out, b_out in JOINT:
            out[(a_out, b_out)] = self.region("A", a_out, m_a, m_b) & self.region("B", b_out, m_a, m_b)
        return out

    def __repr__(self):
        return f"<{type(self).__name__} {self.id!r}>"


class SuperdeterministicModel(HVModel):
    """Local indicators ``A(lambda, M_A)`` and ``B(lambda, M_B)``.

    The generic three-argument maps drop the distant setting before calling
    the local indicator, so locality holds by construction.
    """

    def indicator_a(self, lams, m_a: float) -> np.ndarray:
        raise NotImplementedError

    def indicator_b(self, lams, m_b: float) -> np.ndarray:
        raise NotImplementedError

    def region_a(self, outcome: int, m_a: float) -> MeasurableSubset:
        raise NotImplementedError

    def region_b(self, outcome: int, m_b: float) -> MeasurableSubset:
        raise NotImplementedError

    def outcomes_a(self, lams, m_a, m_b):
        return self.indicator_a(lams, m_a)

    def outcomes_b(self, lams, m_a, m_b):
        return self.indicator_b(lams, m_b)

    def region(self, wing, outcome, m_a, m_b):
        if wing == "A":
            return self.region_a(outcome, angle_of(m_a))
        if wing == "B":
            return self.region_b(outcome, angle_of(m_b))
        raise ValueError(f"wing must be 'A' or 'B', got {wing!r}")


class SdBrans(SuperdeterministicModel):
    id = "sd-brans"
    space = FOUR_POINT
    meta = CausalMetadata(Family.SUPERDETERMINISTIC, SD_EDGES)

    def indicator_a(self, lams, m_a):
        return np.asarray(lams)[..., 0]

    def indicator_b(self, lams, m_b):
        return np.asarray(lams)[..., 1]

    def region_a(self, outcome, m_a):
        return PointSet(frozenset(p for p in JOINT if p[0] == outcome), JOINT)

    def region_b(self, outcome, m_b):
        return PointSet(frozenset(p for p in JOINT if p[1] == outcome), JOINT)


class SdArc(SuperdeterministicModel):
    id = "sd-arc"
    space = CIRCLE
    meta = CausalMetadata(Family.SUPERDETERMINISTIC, SD_EDGES)

    # sgn(0) is taken as +1
    def indicator_a(self, lams, m_a):
        return np.where(np.cos(np.asarray(lams, dtype=float) - m_a) >= 0.0, 1, -1)

    def indicator_b(self, lams, m_b):
        return np.where(np.cos(np.asarray(lams, dtype=float) - m_b) >= 0.0, -1, 1)

    def region_a(self, outcome, m_a):
        plus = IntervalSet.arc(m_a - math.pi / 2, m_a + math.pi / 2)
        return plus if outcome == PLUS else plus.complement()

    def region_b(self, outcome, m_b):
        minus = IntervalSet.arc(m_b - math.pi / 2, m_b + math.pi / 2)
        return minus if outcome == MINUS else minus.complement()


class NlInterval(HVModel):
    id = "nl-interval"
    space = UNIT_INTERVAL
    meta = CausalMetadata(Family.NONLOCAL, NL_EDGES)

    @staticmethod
    def boundaries(m_a: float, m_b: float) -> tuple[float, float, float]:
        """Block edges; blocks are (+,+) (-,+) (+,-) (-,-) left to right."""
        same = (1.0 - math.cos(m_a - m_b)) / 4.0
        return same, 0.5, 1.0 - same

    def outcomes_a(self, lams, m_a, m_b):
        x = np.asarray(lams, dtype=float)
        b1, b2, b3 = self.boundaries(m_a, m_b)
        plus = (x < b1) | ((x >= b2) & (x < b3))
        return np.where(plus, 1, -1)

    def outcomes_b(self, lams, m_a, m_b):
        x = np.asarray(lams, dtype=float)
        return np.where(x < 0.5, 1, -1)

    def region(self, wing, outcome, m_a, m_b):
        b1, b2, b3 = self.boundaries(angle_of(m_a), angle_of(m_b))
        if wing == "A":
            plus = IntervalSet(((0.0, b1), (b2, b3)))
        elif wing == "B":
            plus = IntervalSet(((0.0, b2),))
        else:
            raise ValueError(f"wing must be 'A' or 'B', got {wing!r}")
        return plus if outcome == PLUS else plus.complement()


MODELS: dict[str, HVModel] = {m.id: m for m in (SdBrans(), SdArc(), NlInterval())}


def get_model(model_id: str) -> HVModel:
    try:
        return MODELS[model_id]
    except KeyError:
        raise ValueError(f"unknown model id {model_id!r}; expected one of {sorted(MODELS)}") from None


def outcome_a(model: HVModel, lam, m_a: SettingLike, m_b: SettingLike) -> int:
    return model.outcome_a(lam, m_a, m_b)


def outcome_b(model: HVModel, lam, m_a: SettingLike, m_b: SettingLike) -> int:
    return model.outcome_b(lam, m_a, m_b)


def causal_signature(model: HVModel) -> CausalMetadata:
    return model.meta


# ---------------------------------------------------------------------------
# functional locality audit


@dataclass(frozen=True)
class Witness:
    """A hidden-variable point whose outcome on ``wing`` flips when the
    distant setting changes from ``distant`` to ``distant_prime``."""

    lam: object
    wing: str
    local: float
    distant: float
    distant_prime: float
    before: int
    after: int

    def to_json(self) -> dict:
        lam = list(self.lam) if isinstance(self.lam, tuple) else self.lam
        return {
            "lambda": lam,
            "wing": self.wing,
            "local_setting": self.local,
            "distant_setting": self.distant,
            "distant_setting_prime": self.distant_prime,
            "before": self.before,
            "after": self.after,
        }


@dataclass(frozen=True)
class AuditReport:
    model_id: str
    passes_locality: bool
    witnesses: tuple[Witness, ...] = ()
    n_probed: int = 0
    n_triples: int = 0

    def to_json(self) -> dict:
        return {
            "model": self.model_id,
            "passes_locality": self.passes_locality,
            "n_probed": self.n_probed,
            "n_triples": self.n_triples,
            "witnesses": [w.to_json() for w in self.witnesses],
        }


def _probe_points(model: HVModel, probe, settings: Iterable[tuple[float, float]]):
    if model.space.discrete:
        if isinstance(probe, int):
            if probe <= 0:
                raise ValueError("probe must be a positive grid size or a nonempty point list")
            return np.array(JOINT, dtype=np.int8)
        pts = [model.space.check(p) for p in probe]
        if not pts:
            raise ValueError("empty probe")
        return np.array(pts, dtype=np.int8)
    if isinstance(probe, int):
        if probe <= 0:
            raise ValueError("probe must be a positive grid size or a nonempty point list")
        lo, hi = model.space.domain
        pts = set((lo + (hi - lo) * (np.arange(probe) + 0.5) / probe).tolist())
        # one point inside every cell, so no block or arc is missed
        for m_a, m_b in settings:
            for cell in model.cells(m_a, m_b).values():
                pts.update(cell.midpoints())
        return np.array(sorted(pts))
    pts = [model.space.check(p) for p in probe]
    if not pts:
        raise ValueError("empty probe")
    return np.array(pts, dtype=float)


def _as_lambda(model, row):
    return tuple(int(v) for v in row) if model.space.discrete else float(row)


def functional_locality_audit(
    model: HVModel,
    settings_grid: Sequence[tuple[SettingLike, SettingLike, SettingLike]],
    probe: int | Sequence = 1000,
    max_witnesses: int = 4,
) -> AuditReport:
    """Probe whether either wing's outcome functionally depends on the distant setting.

    Each grid entry ``(x, y, y')`` is used twice: wing A with local setting
    ``x`` and distant setting ``y -> y'``, and wing B with local setting ``x``
    and distant (A-side) setting ``y -> y'``. ``probe`` is a grid resolution
    (cell midpoints are always added) or an explicit list of points.
    At most ``max_witnesses`` witnesses are kept per triple and wing.
    """
    triples = [tuple(angle_of(s) for s in t) for t in settings_grid]
    if not triples:
        raise ValueError("settings grid is empty")
    pairs = set()
    for x, y, y2 in triples:
        pairs.update({(x, y), (x, y2), (y, x), (y2, x)})
    lams = _probe_points(model, probe, sorted(pairs))

    witnesses = []
    passes = True
    for x, y, y2 in triples:
        checks = (
            ("A", model.outcomes_a(lams, x, y), model.outcomes_a(lams, x, y2)),
            ("B", model.outcomes_b(lams, y, x), model.outcomes_b(lams, y2, x)),
        )
        for wing, before, after in checks:
            flipped = np.flatnonzero(before != after)
            if flipped.size:
                passes = False
            # spread the kept witnesses over all flipping regions
            if flipped.size > max_witnesses:
                flipped = flipped[np.unique(np.linspace(0, flipped.size - 1, max_witnesses).astype(int))]
            for k in flipped:
                witnesses.append(
                    Witness(_as_lambda(model, lams[k]), wing, x, y, y2, int(before[k]), int(after[k]))
                )
    return AuditReport(model.id, passes, tuple(witnesses), int(len(lams)), len(triples))
