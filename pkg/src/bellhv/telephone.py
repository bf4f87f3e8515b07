"""Bit transmission through a marginal-independence violation.

Wing B encodes each bit as a choice between two settings. For every bit,
``pairs_per_bit`` hidden variables are drawn from the conditional density at
that B setting, wing A records ``A(lambda, M_A)``, and the receiver decodes
by thresholding the empirical ``P(A=+)``.

For a superdeterministic model the replay audit shows every recorded A
outcome is reproduced with either B setting substituted: the outcomes carry
the message without depending on the distant setting.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from bellhv.core import Family, angle_of, get_model
from bellhv.distributions import ConditionalDensity
from bellhv.statistics import expectations

GAP_TOL = 1e-12


@dataclass(frozen=True)
class ChannelConfig:
    """Telephone parameters. ``diagnostic=True`` admits nonlocal models."""

    density: ConditionalDensity
    m_a: float
    bit0_setting: float
    bit1_setting: float
    pairs_per_bit: int = 1000
    decision_threshold: float | None = None
    master_seed: int = 0
    diagnostic: bool = False
    p_plus: tuple[float, float] = field(init=False, compare=False)

    def __post_init__(self):
        model = self.density.model
        if model.family is not Family.SUPERDETERMINISTIC and not self.diagnostic:
            raise ValueError(f"the telephone needs a superdeterministic model, got {model.id!r}")
        if int(self.pairs_per_bit) < 1:
            raise ValueError("pairs_per_bit must be >= 1")
        for name in ("m_a", "bit0_setting", "bit1_setting"):
            object.__setattr__(self, name, angle_of(getattr(self, name)))
        object.__setattr__(self, "pairs_per_bit", int(self.pairs_per_bit))
        p0 = expectations(model, self.density, self.m_a, self.bit0_setting).p_a_plus
        p1 = expectations(model, self.density, self.m_a, self.bit1_setting).p_a_plus
        if abs(p0 - p1) <= GAP_TOL:
            raise ValueError(f"zero-gap channel: P(A=+) is {p0:.12g} for both bit settings")
        object.__setattr__(self, "p_plus", (p0, p1))
        thr = self.decision_threshold
        if thr is None:
            thr = 0.5 * (p0 + p1)
        if not min(p0, p1) < thr < max(p0, p1):
            raise ValueError(f"threshold {thr} not strictly between {p0:.12g} and {p1:.12g}")
        object.__setattr__(self, "decision_threshold", float(thr))

    @property
    def model_id(self) -> str:
        return self.density.model_id

    @property
    def gap(self) -> float:
        return abs(self.p_plus[0] - self.p_plus[1])

    def setting_for(self, bit: int) -> float:
        return self.bit1_setting if bit else self.bit0_setting

    def decode(self, p_hat: float) -> int:
        above = p_hat > self.decision_threshold
        return 0 if above == (self.p_plus[0] > self.p_plus[1]) else 1


@dataclass(frozen=True)
class BitRecord:
    index: int
    sent: int
    lams: np.ndarray = field(repr=False, compare=False)
    outcomes: np.ndarray = field(repr=False, compare=False)
    p_hat: float = 0.0
    decoded: int = 0

    def to_json(self, include_pairs: bool = False) -> dict:
        out = {
            "index": self.index,
            "sent": self.sent,
            "n_pairs": int(len(self.outcomes)),
            "n_plus": int(np.count_nonzero(self.outcomes > 0)),
            "p_hat": self.p_hat,
            "decoded": self.decoded,
        }
        if include_pairs:
            out["lambda"] = self.lams.tolist()
            out["A"] = self.outcomes.tolist()
        return out


@dataclass(frozen=True)
class TransmissionLog:
    records: tuple[BitRecord, ...]

    @property
    def n_bits(self) -> int:
        return len(self.records)

    @property
    def n_errors(self) -> int:
        return sum(r.sent != r.decoded for r in self.records)

    @property
    def bit_error_rate(self) -> float:
        return self.n_errors / self.n_bits if self.records else 0.0

    @property
    def sent(self) -> list[int]:
        return [r.sent for r in self.records]

    @property
    def decoded(self) -> list[int]:
        return [r.decoded for r in self.records]

    def summary(self) -> dict:
        return {"n_bits": self.n_bits, "n_errors": self.n_errors, "bit_error_rate": self.bit_error_rate}

    def to_jsonl(self, include_pairs: bool = False) -> str:
        return "".join(json.dumps(r.to_json(include_pairs), sort_keys=True) + "\n" for r in self.records)


def encode_message(message: str) -> list[int]:
    """ASCII text to bits (8 per character, most significant first), or a
    literal bitstring if ``message`` consists only of 0s and 1s."""
    if message and set(message) <= {"0", "1"}:
        return [int(c) for c in message]
    try:
        data = message.encode("ascii")
    except UnicodeEncodeError as exc:
        raise ValueError("message must be ASCII") from exc
    return [(byte >> k) & 1 for byte in data for k in range(7, -1, -1)]


def decode_message(bits: Sequence[int]) -> str:
    usable = len(bits) - len(bits) % 8
    chars = []
    for i in range(0, usable, 8):
        chars.append(chr(int("".join(str(b) for b in bits[i : i + 8]), 2)))
    return "".join(chars)


def transmit(cfg: ChannelConfig, message: Iterable[int] | str, workers: int = 1) -> TransmissionLog:
    bits = encode_message(message) if isinstance(message, str) else [int(b) for b in message]
    if any(b not in (0, 1) for b in bits):
        raise ValueError("message bits must be 0 or 1")
    model = cfg.density.model
    resolved = {bit: cfg.density.resolve(cfg.m_a, cfg.setting_for(bit)) for bit in (0, 1)}

    def send(i: int) -> BitRecord:
        bit = bits[i]
        rng = np.random.default_rng(np.random.SeedSequence(cfg.master_seed, spawn_key=(i,)))
        lams = resolved[bit].sample(rng, cfg.pairs_per_bit)
        a = model.outcomes_a(lams, cfg.m_a, cfg.setting_for(bit)).astype(np.int8)
        p_hat = float(np.count_nonzero(a > 0)) / cfg.pairs_per_bit
        return BitRecord(i, bit, lams, a, p_hat, cfg.decode(p_hat))

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            records = tuple(pool.map(send, range(len(bits))))
    else:
        records = tuple(send(i) for i in range(len(bits)))
    return TransmissionLog(records)


def mutual_information(xs: Sequence[int], ys: Sequence[int]) -> float:
    """Empirical mutual information in bits between two binary sequences."""
    n = len(xs)
    if n == 0:
        return 0.0
    counts = np.zeros((2, 2))
    np.add.at(counts, (np.asarray(xs, dtype=int), np.asarray(ys, dtype=int)), 1)
    p = counts / n
    px, py = p.sum(axis=1), p.sum(axis=0)
    terms = [p[i, j] * math.log2(p[i, j] / (px[i] * py[j])) for i in range(2) for j in range(2) if p[i, j] > 0]
    return max(math.fsum(terms), 0.0)


@dataclass(frozen=True)
class CoincidenceAudit:
    functional_independence: bool
    mutual_information_estimate: float
    n_mismatches: int = 0

    def to_json(self) -> dict:
        return {
            "functional_independence": self.functional_independence,
            "mutual_information_estimate": self.mutual_information_estimate,
            "n_mismatches": self.n_mismatches,
        }


def coincidence_audit(log: TransmissionLog, cfg: ChannelConfig) -> CoincidenceAudit:
    """Replay every logged A outcome with each B setting substituted at fixed lambda."""
    if not log.records:
        raise ValueError("empty transmission log")
    model = get_model(cfg.model_id)
    mismatches = 0
    for r in log.records:
        for m_b in (cfg.bit0_setting, cfg.bit1_setting):
            replay = model.outcomes_a(r.lams, cfg.m_a, m_b)
            mismatches += int(np.count_nonzero(replay != r.outcomes))
    return CoincidenceAudit(mismatches == 0, mutual_information(log.sent, log.decoded), mismatches)
