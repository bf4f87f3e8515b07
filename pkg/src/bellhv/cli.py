"""Command-line front end.

    bellhv <subcommand> --config run.json [--out DIR] [--seed N] [--format csv|json] [--workers N]

Exit codes: 0 success, 2 configuration error, 3 numeric/degenerate error.
The default output directory is taken from ``$BELLHV_OUT`` (else the config,
else ``./bellhv-out``).
"""
from __future__ import annotations

import argparse
import dataclasses
import itertools
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from bellhv import analysis, config, output, statistics, telephone
from bellhv.core import Family, functional_locality_audit, get_model
from bellhv.errors import ConfigError, DegenerateDistributionError
from bellhv.statistics import MonteCarlo

log = logging.getLogger("bellhv")

SUBCOMMANDS = ("correlations", "chsh", "violation", "transitions", "mechanisms", "telephone", "audit")
ENV_OUT = "BELLHV_OUT"


def _pairs(cfg: config.RunConfig):
    if cfg.pairs:
        return list(cfg.pairs)
    if cfg.grid is None:
        raise ConfigError("no settings pairs: give settings.grid or settings.pairs", "settings")
    grid = statistics.settings_grid(cfg.grid)
    return list(itertools.product(grid, grid))


def _triples(cfg: config.RunConfig):
    if cfg.triples:
        return list(cfg.triples)
    if cfg.grid is None:
        raise ConfigError("no settings triples: give settings.grid or settings.triples", "settings")
    grid = statistics.settings_grid(cfg.grid)
    return list(itertools.product(grid, grid, grid))


def _method(cfg, k: int):
    return cfg.method.child(k) if isinstance(cfg.method, MonteCarlo) else cfg.method


def _map(fn, items, workers: int):
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _tabular(name: str, rows: list[dict], cfg) -> dict[str, str]:
    if cfg.format == "json":
        return {f"{name}.json": output.json_text(rows)}
    return {f"{name}.csv": output.csv_text(rows)}


def cmd_correlations(cfg, workers):
    model = get_model(cfg.model)
    pairs = _pairs(cfg)

    def one(k):
        a, b = pairs[k]
        return {"model": cfg.model, **statistics.expectations(model, cfg.density, a, b, _method(cfg, k)).to_row()}

    return _tabular("correlations", _map(one, range(len(pairs)), workers), cfg)


def cmd_chsh(cfg, workers):
    model = get_model(cfg.model)
    rep = statistics.chsh(model, cfg.density, *cfg.chsh, cfg.method)
    return _tabular("chsh", [{"model": cfg.model, **rep.to_row()}], cfg)


def cmd_violation(cfg, workers):
    model = get_model(cfg.model)
    triples = _triples(cfg)

    def one(k):
        rep = statistics.marginal_violation(model, cfg.density, *triples[k], _method(cfg, k))
        return {"model": cfg.model, **rep.to_row()}

    return _tabular("violation", _map(one, range(len(triples)), workers), cfg)


def cmd_transitions(cfg, workers):
    model = get_model(cfg.model)
    d = cfg.density
    triples = _triples(cfg)

    def one(triple):
        part = analysis.partition(model, d, *triple)
        t = analysis.transitions(model, d, *triple, part)
        row = {
            "model": cfg.model,
            "m_a": part.settings[0],
            "m_b": part.settings[1],
            "m_b_prime": part.settings[2],
            "mass_T_plus_minus": t.mass_plus_minus,
            "mass_T_minus_plus": t.mass_minus_plus,
            "detailed_balance_residual": None,
            "delta_P_A_plus": None,
            "reshuffled_mass": None,
            "mechanism": None,
        }
        if model.family is Family.NONLOCAL:
            shift = analysis.marginal_shift_nonlocal(model, d, *triple)
            row.update(
                detailed_balance_residual=analysis.detailed_balance_residual(d, t),
                delta_P_A_plus=shift.via_supports,
                mechanism=shift.mechanism,
            )
        else:
            shift = analysis.marginal_shift_sd(model, d, *triple)
            row.update(delta_P_A_plus=shift.shift, reshuffled_mass=shift.reshuffled_mass, mechanism=shift.mechanism)
        return row, part, t

    results = _map(one, triples, workers)
    files = _tabular("transitions", [r for r, _, _ in results], cfg)
    reports = [rep for _, part, t in results for rep in (part, t)]
    ext = "json" if cfg.format == "json" else "csv"
    files[f"transitions_plotdata.{ext}"] = output.emit_plotdata(reports, d, cfg.format)
    return files


def cmd_mechanisms(cfg, workers):
    if not cfg.mechanisms:
        raise ConfigError("the mechanisms subcommand needs a nonempty 'mechanisms' list", "mechanisms")
    model = get_model(cfg.model)
    family = {d.mechanism: d for d in cfg.mechanisms}
    pairs = _pairs(cfg)

    def one(k):
        a, b = pairs[k]
        rep = statistics.mechanism_dependence(model, family, a, b, _method(cfg, k))
        worst = max(rep.table, key=lambda r: r[2], default=None)
        return {
            "model": cfg.model,
            "m_a": rep.m_a,
            "m_b": rep.m_b,
            "n_mechanisms": len(family),
            "max_tv": rep.max_tv,
            "argmax": "" if worst is None else f"{worst[0][0]},{worst[0][1]}|{worst[1][0]},{worst[1][1]}",
        }

    return _tabular("mechanisms", _map(one, range(len(pairs)), workers), cfg)


def _message_bits(t: config.Telephone) -> list[int]:
    if t.message is not None:
        return telephone.encode_message(t.message)
    rng = np.random.default_rng(np.random.SeedSequence(t.seed, spawn_key=(2**63,)))
    return rng.integers(0, 2, t.random_bits).tolist()


def cmd_telephone(cfg, workers):
    t = cfg.telephone
    if t is None:
        raise ConfigError("the telephone subcommand needs a 'telephone' section", "telephone")
    try:
        channel = telephone.ChannelConfig(
            cfg.density, t.m_a, t.bit0, t.bit1, t.pairs_per_bit, t.threshold, t.seed, t.diagnostic
        )
        bits = _message_bits(t)
    except DegenerateDistributionError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc), "telephone") from None
    record = telephone.transmit(channel, bits, workers)
    audit = telephone.coincidence_audit(record, channel)
    summary = {
        "model": cfg.model,
        **record.summary(),
        "p_plus_bit0": channel.p_plus[0],
        "p_plus_bit1": channel.p_plus[1],
        "threshold": channel.decision_threshold,
        "pairs_per_bit": channel.pairs_per_bit,
        **audit.to_json(),
    }
    if t.message is not None and not set(t.message) <= {"0", "1"}:
        summary["decoded_text"] = telephone.decode_message(record.decoded)
    files = {"telephone.jsonl": output.jsonl_text(r.to_json() for r in record.records)}
    files.update(_tabular("telephone_summary", [summary], cfg))
    return files


def cmd_audit(cfg, workers):
    model = get_model(cfg.model)
    rep = functional_locality_audit(model, _triples(cfg), cfg.probe)
    files = {"audit.json": output.json_text({**rep.to_json(), "signature": model.meta.to_json()})}
    if cfg.format == "csv":
        rows = [{"model": cfg.model, **w.to_json()} for w in rep.witnesses]
        for row in rows:
            if isinstance(row["lambda"], list):
                row["lambda"] = output._point_label(tuple(row["lambda"]))
        files["audit_witnesses.csv"] = output.csv_text(
            rows,
            ["model", "wing", "lambda", "local_setting", "distant_setting", "distant_setting_prime", "before", "after"],
        )
    return files


COMMANDS = {
    "correlations": cmd_correlations,
    "chsh": cmd_chsh,
    "violation": cmd_violation,
    "transitions": cmd_transitions,
    "mechanisms": cmd_mechanisms,
    "telephone": cmd_telephone,
    "audit": cmd_audit,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bellhv", description="Hidden-variables Bell laboratory")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=COMMANDS[name].__name__.replace("cmd_", ""))
        p.add_argument("--config", required=True, help="path to the JSON run config")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int, help="override the Monte Carlo / telephone seed")
        p.add_argument("--format", choices=("csv", "json"), help="override the output format")
        p.add_argument("--workers", type=int, default=1, help="worker threads for sweeps")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def apply_overrides(cfg: config.RunConfig, seed: int | None, fmt: str | None) -> config.RunConfig:
    if seed is not None:
        if not 0 <= seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer", "--seed")
        if isinstance(cfg.method, MonteCarlo):
            cfg = dataclasses.replace(cfg, method=dataclasses.replace(cfg.method, seed=seed))
        if cfg.telephone is not None:
            cfg = dataclasses.replace(cfg, telephone=dataclasses.replace(cfg.telephone, seed=seed))
    if fmt is not None:
        cfg = dataclasses.replace(cfg, format=fmt)
    return cfg


def run(command: str, cfg: config.RunConfig, out_dir: Path, workers: int = 1) -> list[Path]:
    files = COMMANDS[command](cfg, max(1, workers))
    return [output.write_text(out_dir / name, text) for name, text in sorted(files.items())]


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        try:
            cfg = config.load(args.config)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc.strerror}", args.config) from None
        cfg = apply_overrides(cfg, args.seed, args.format)
        out_dir = Path(args.out or os.environ.get(ENV_OUT) or cfg.out_dir or "bellhv-out")
        log.info("running %s on %s", args.command, cfg.model)
        paths = run(args.command, cfg, out_dir, args.workers)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DegenerateDistributionError, ArithmeticError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3
    for p in paths:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
