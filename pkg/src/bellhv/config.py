"""Run configuration: one flat JSON file per run.

Example::

    {
      "model": "sd-brans",
      "density": {"form": "weighted", "weights": [2, 1, 1, 1]},
      "settings": {"grid": 20},
      "method": {"kind": "exact"},
      "output": {"dir": "out", "format": "csv"}
    }

Angles are radians, given as numbers or as ``"pi/2"``-style strings.
``emit(parse(text))`` is a fixed point of ``emit``.
"""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from typing import Any

from bellhv.core import MODELS, canonical_angle
from bellhv.distributions import (
    ConditionalDensity,
    LinearWeight,
    PiecewiseWeights,
    PointWeights,
)
from bellhv.errors import ConfigError
from bellhv.statistics import EXACT, Method, MonteCarlo

DEFAULT_CHSH = (0.0, math.pi / 2, math.pi / 4, 3 * math.pi / 4)
_PI_EXPR = re.compile(r"^\s*(-?\d*\.?\d*)\s*\*?\s*pi\s*(?:/\s*(\d*\.?\d+))?\s*$")


def _real(value: Any, where: str) -> float:
    """A number, or a ``k*pi/m`` expression, without angle reduction."""
    if isinstance(value, bool):
        raise ConfigError("expected an angle, got a boolean", where)
    if isinstance(value, (int, float)):
        x = float(value)
    elif isinstance(value, str):
        m = _PI_EXPR.match(value)
        if not m:
            try:
                x = float(value)
            except ValueError:
                raise ConfigError(f"cannot read angle {value!r}", where) from None
        else:
            coef = m.group(1)
            k = -1.0 if coef == "-" else float(coef) if coef else 1.0
            x = k * math.pi / (float(m.group(2)) if m.group(2) else 1.0)
    else:
        raise ConfigError(f"expected an angle, got {type(value).__name__}", where)
    if not math.isfinite(x):
        raise ConfigError("angle must be finite", where)
    return x


def parse_angle(value: Any, where: str) -> float:
    return canonical_angle(_real(value, where))


def _get(obj: dict, key: str, where: str, kind=None, default=...):
    if key not in obj:
        if default is ...:
            raise ConfigError("missing required field", f"{where}.{key}" if where else key)
        return default
    value = obj[key]
    if kind is None:
        return value
    if not isinstance(value, kind) or (isinstance(value, bool) and kind is not bool):
        name = kind.__name__ if isinstance(kind, type) else "/".join(k.__name__ for k in kind)
        raise ConfigError(f"expected {name}, got {type(value).__name__}", f"{where}.{key}" if where else key)
    return value


def _check_keys(obj: dict, allowed: set[str], where: str):
    extra = sorted(set(obj) - allowed)
    if extra:
        raise ConfigError(f"unknown field(s) {extra}", where or "<root>")


def parse_density(obj: Any, model_id: str, where: str, mechanism=(1, 1)) -> ConditionalDensity:
    if not isinstance(obj, dict):
        raise ConfigError("expected an object", where)
    _check_keys(obj, {"form", "weights", "heights", "edges", "pair"}, where)
    form = _get(obj, "form", where, str, "equilibrium")
    try:
        if form == "equilibrium":
            weight = None
        elif form == "weighted":
            weight = PointWeights(tuple(_get(obj, "weights", where, list)))
        elif form == "histogram":
            edges = obj.get("edges")
            weight = PiecewiseWeights(
                tuple(_get(obj, "heights", where, list)),
                None if edges is None else tuple(_real(e, f"{where}.edges[{i}]") for i, e in enumerate(edges)),
            )
        elif form == "linear":
            weight = LinearWeight()
        else:
            raise ConfigError(
                f"unknown form {form!r}; expected equilibrium, weighted, histogram or linear", f"{where}.form"
            )
        return ConditionalDensity(model_id, weight, mechanism)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), where) from None


@dataclass(frozen=True)
class Telephone:
    m_a: float = 0.0
    bit0: float = math.pi / 2
    bit1: float = 0.0
    pairs_per_bit: int = 1000
    threshold: float | None = None
    message: str | None = None
    random_bits: int | None = None
    seed: int = 0
    diagnostic: bool = False

    def to_json(self) -> dict:
        out = {
            "m_a": self.m_a,
            "bit0": self.bit0,
            "bit1": self.bit1,
            "pairs_per_bit": self.pairs_per_bit,
            "seed": self.seed,
            "diagnostic": self.diagnostic,
        }
        for key in ("threshold", "message", "random_bits"):
            if getattr(self, key) is not None:
                out[key] = getattr(self, key)
        return out


@dataclass(frozen=True)
class RunConfig:
    model: str
    density: ConditionalDensity
    mechanisms: tuple[ConditionalDensity, ...] = ()
    grid: int | None = 20
    pairs: tuple[tuple[float, float], ...] = ()
    triples: tuple[tuple[float, float, float], ...] = ()
    chsh: tuple[float, float, float, float] = DEFAULT_CHSH
    method: Method = EXACT
    telephone: Telephone | None = None
    probe: int = 1000
    out_dir: str | None = None
    format: str = "csv"

    def to_json(self) -> dict:
        density = self.density.to_json()
        density.pop("model")
        density.pop("mechanism")
        out: dict[str, Any] = {"model": self.model, "density": density}
        if self.mechanisms:
            mechs = []
            for d in self.mechanisms:
                body = d.to_json()
                body.pop("model")
                body["pair"] = body.pop("mechanism")
                mechs.append(body)
            out["mechanisms"] = mechs
        settings: dict[str, Any] = {}
        if self.grid is not None:
            settings["grid"] = self.grid
        if self.pairs:
            settings["pairs"] = [list(p) for p in self.pairs]
        if self.triples:
            settings["triples"] = [list(t) for t in self.triples]
        out["settings"] = settings
        out["chsh"] = list(self.chsh)
        out["method"] = self.method.to_json()
        if self.telephone is not None:
            out["telephone"] = self.telephone.to_json()
        out["audit"] = {"probe": self.probe}
        output: dict[str, Any] = {"format": self.format}
        if self.out_dir is not None:
            output["dir"] = self.out_dir
        out["output"] = output
        return out


def emit(cfg: RunConfig) -> str:
    return json.dumps(cfg.to_json(), indent=2, sort_keys=True) + "\n"


def _angles(seq: Any, n: int, where: str) -> tuple[float, ...]:
    if not isinstance(seq, list) or len(seq) != n:
        raise ConfigError(f"expected a list of {n} angles", where)
    return tuple(parse_angle(v, f"{where}[{i}]") for i, v in enumerate(seq))


def from_dict(obj: Any) -> RunConfig:
    if not isinstance(obj, dict):
        raise ConfigError("top level must be an object", "<root>")
    _check_keys(obj, {"model", "density", "mechanisms", "settings", "chsh", "method", "telephone", "audit", "output"}, "")
    model = _get(obj, "model", "", str)
    if model not in MODELS:
        raise ConfigError(f"unknown model id {model!r}; expected one of {sorted(MODELS)}", "model")
    density = parse_density(obj.get("density", {}), model, "density")

    mechanisms = []
    for k, m in enumerate(_get(obj, "mechanisms", "", list, [])):
        where = f"mechanisms[{k}]"
        if not isinstance(m, dict):
            raise ConfigError("expected an object", where)
        pair = m.get("pair")
        if not (isinstance(pair, list) and len(pair) == 2 and all(isinstance(v, int) and not isinstance(v, bool) and v >= 1 for v in pair)):
            raise ConfigError("pair must be two integers >= 1", f"{where}.pair")
        mechanisms.append(parse_density(m, model, where, tuple(pair)))
    pairs_seen = [d.mechanism for d in mechanisms]
    if len(set(pairs_seen)) != len(pairs_seen):
        raise ConfigError("duplicate mechanism pair", "mechanisms")

    settings = _get(obj, "settings", "", dict, {"grid": 20})
    _check_keys(settings, {"grid", "pairs", "triples"}, "settings")
    grid = _get(settings, "grid", "settings", int, None)
    if grid is not None and not 1 <= grid <= 1000:
        raise ConfigError("grid must be between 1 and 1000", "settings.grid")
    pairs = tuple(_angles(p, 2, f"settings.pairs[{i}]") for i, p in enumerate(_get(settings, "pairs", "settings", list, [])))
    triples = tuple(
        _angles(t, 3, f"settings.triples[{i}]") for i, t in enumerate(_get(settings, "triples", "settings", list, []))
    )
    chsh = _angles(obj.get("chsh", list(DEFAULT_CHSH)), 4, "chsh")

    method_obj = _get(obj, "method", "", dict, {"kind": "exact"})
    _check_keys(method_obj, {"kind", "n", "seed"}, "method")
    kind = _get(method_obj, "kind", "method", str, "exact")
    if kind == "exact":
        method: Method = EXACT
    elif kind == "mc":
        n = _get(method_obj, "n", "method", int, 1_000_000)
        seed = _get(method_obj, "seed", "method", int, 0)
        if n < 1:
            raise ConfigError("n must be >= 1", "method.n")
        if not 0 <= seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer", "method.seed")
        method = MonteCarlo(n=n, seed=seed)
    else:
        raise ConfigError(f"unknown method {kind!r}; expected exact or mc", "method.kind")

    telephone = None
    if "telephone" in obj:
        t = _get(obj, "telephone", "", dict)
        _check_keys(
            t,
            {"m_a", "bit0", "bit1", "pairs_per_bit", "threshold", "message", "random_bits", "seed", "diagnostic"},
            "telephone",
        )
        ppb = _get(t, "pairs_per_bit", "telephone", int, 1000)
        if ppb < 1:
            raise ConfigError("pairs_per_bit must be >= 1", "telephone.pairs_per_bit")
        thr = _get(t, "threshold", "telephone", (int, float), None)
        message = _get(t, "message", "telephone", str, None)
        random_bits = _get(t, "random_bits", "telephone", int, None)
        if message is None and random_bits is None:
            raise ConfigError("give either message or random_bits", "telephone")
        if random_bits is not None and random_bits < 1:
            raise ConfigError("random_bits must be >= 1", "telephone.random_bits")
        seed = _get(t, "seed", "telephone", int, 0)
        if not 0 <= seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer", "telephone.seed")
        telephone = Telephone(
            m_a=parse_angle(t.get("m_a", 0.0), "telephone.m_a"),
            bit0=parse_angle(t.get("bit0", math.pi / 2), "telephone.bit0"),
            bit1=parse_angle(t.get("bit1", 0.0), "telephone.bit1"),
            pairs_per_bit=ppb,
            threshold=None if thr is None else float(thr),
            message=message,
            random_bits=random_bits,
            seed=seed,
            diagnostic=_get(t, "diagnostic", "telephone", bool, False),
        )

    audit = _get(obj, "audit", "", dict, {})
    _check_keys(audit, {"probe"}, "audit")
    probe = _get(audit, "probe", "audit", int, 1000)
    if probe < 1:
        raise ConfigError("probe must be >= 1", "audit.probe")

    output = _get(obj, "output", "", dict, {})
    _check_keys(output, {"dir", "format"}, "output")
    fmt = _get(output, "format", "output", str, "csv")
    if fmt not in ("csv", "json"):
        raise ConfigError(f"format must be csv or json, got {fmt!r}", "output.format")

    return RunConfig(
        model=model,
        density=density,
        mechanisms=tuple(mechanisms),
        grid=grid,
        pairs=pairs,
        triples=triples,
        chsh=chsh,
        method=method,
        telephone=telephone,
        probe=probe,
        out_dir=_get(output, "dir", "output", str, None),
        format=fmt,
    )


def parse(text: str, source: str = "<config>") -> RunConfig:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(exc.msg, f"{source}:{exc.lineno}:{exc.colno}") from None
    return from_dict(obj)


def load(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read(), str(path))
