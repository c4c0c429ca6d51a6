"""Experiment runner: scenario simulation, sweeps, comparisons and reports.

Every command is reproducible from its arguments and seed, and every output
file starts with a provenance record of the invocation that produced it.
On failure a machine-readable error record is printed to stderr and the
exit code is nonzero.
"""

from __future__ import annotations

import argparse
import csv
import json
import statistics
import sys
from pathlib import Path

import numpy as np

from . import channel, experiments
from .errors import SkeceError

DEFAULT_ALPHAS = (0.0, 0.2, 0.4, 0.7, 1.0)


def _provenance(args: argparse.Namespace) -> dict:
    keep = ("command", "scenario", "trials", "seed", "alpha", "gamma", "theta", "key_length")
    return {k: getattr(args, k) for k in keep if getattr(args, k, None) is not None}


def _provenance_line(args: argparse.Namespace) -> str:
    parts = [f"{k}={v}" for k, v in _provenance(args).items() if k != "command"]
    return f"skece {args.command} " + " ".join(parts)


def _write_rows(path: Path, rows: list[dict], fmt: str, args) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        payload = {"experiment": _provenance(args), "rows": rows}
        path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
        return
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# {_provenance_line(args)}\n")
        if not rows:
            return
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)


def _out_path(base: str, suffix: str, fmt: str) -> Path:
    return Path(f"{base}{suffix}.{fmt}")


def _scenario(args, name: str | None = None) -> experiments.Scenario:
    scenario = experiments.load_scenario(name or args.scenario)
    if args.alpha is not None:
        scenario = experiments.Scenario(
            name=scenario.name,
            description=scenario.description,
            alpha=args.alpha,
            config=scenario.config,
        )
    return scenario


def cmd_simulate(args) -> int:
    scenario = _scenario(args).with_seed(args.seed)
    traces = channel.simulate(scenario.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for trace in (traces.alice, traces.bob, traces.eve):
        channel.save_trace(trace, out / f"{trace.party}.csv")
    summary = {
        "experiment": _provenance(args),
        "scenario": scenario.name,
        "description": scenario.description,
        "m": traces.m,
        "n": traces.n,
        "files": [f"{p}.csv" for p in ("alice", "bob", "eve")],
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(f"wrote {traces.m}x{traces.n} traces for scenario {scenario.name} to {out}")
    return 0


def cmd_extract(args) -> int:
    scenario = _scenario(args)
    alphas = args.alphas or DEFAULT_ALPHAS
    rows = experiments.alpha_sweep(scenario, alphas, trials=args.trials, base_seed=args.seed)
    path = Path(args.out)
    _write_rows(path, rows, args.format, args)
    print(f"alpha sweep over {list(alphas)} ({args.trials} trials) -> {path}")
    return 0


def cmd_compare(args) -> int:
    rows = experiments.overhead_comparison(
        trials=args.trials,
        base_seed=args.seed,
        stream_length=args.key_length,
        gamma=args.gamma,
        theta=args.theta,
    )
    trials_path = _out_path(args.out, "_trials", args.format)
    _write_rows(trials_path, rows, args.format, args)

    cdf_rows = []
    for proto in ("skece", "cascade"):
        for value, frac in experiments.empirical_cdf([r[f"{proto}_messages"] for r in rows]):
            cdf_rows.append({"protocol": proto, "messages": value, "cdf": frac})
    cdf_path = _out_path(args.out, "_cdf", args.format)
    _write_rows(cdf_path, cdf_rows, args.format, args)

    med_s = statistics.median(r["skece_messages"] for r in rows)
    med_c = statistics.median(r["cascade_messages"] for r in rows)
    within = sum(r["skece_messages"] <= 10 for r in rows) / len(rows)
    print(
        f"median messages: skece={med_s} cascade={med_c}; "
        f"skece within 10 messages in {within:.1%} of trials"
    )
    print(f"wrote {trials_path} and {cdf_path}")
    return 0


def cmd_randomness(args) -> int:
    names = list(experiments.PRESET_NAMES) if args.scenario == "all" else [args.scenario]
    scenarios = [_scenario(args, n) for n in names]
    rows = experiments.randomness_battery(scenarios, runs=args.trials, base_seed=args.seed)
    path = Path(args.out)
    _write_rows(path, rows, args.format, args)
    by_scenario: dict[str, list] = {}
    for r in rows:
        by_scenario.setdefault(r["scenario"], []).append(r["all_pass"])
    for name, flags in by_scenario.items():
        print(f"scenario {name}: {sum(flags)}/{len(flags)} runs pass all four tests")
    print(f"wrote {path}")
    return 0


def cmd_attack(args) -> int:
    results = experiments.attack_experiment(seed=args.seed)
    scores = {}
    for mode, res in results.items():
        traces = res["traces"]
        for trace in (traces.alice, traces.bob):
            channel.save_trace(trace, _out_path(args.out, f"_{mode}_{trace.party}", "csv"))
        bit_rows = []
        for i, wave in enumerate(res["bit_waves"]):
            for k in np.flatnonzero(wave != 0.0):
                bit_rows.append(
                    {"stream": i, "probe": int(k), "bit": int(wave[k] > 0)}
                )
        _write_rows(_out_path(args.out, f"_{mode}_bits", "csv"), bit_rows, "csv", args)
        scores[mode] = {
            "lag_probes": res["lag"],
            "max_periodicity_z": res["max_periodicity_z"],
            "frequency_p": res["frequency_p"],
            "key_bits": res["key_bits"],
        }
        print(
            f"{mode}: max periodicity z={res['max_periodicity_z']:.1f}, "
            f"frequency p={res['frequency_p']:.4f}"
        )
    report = {"experiment": _provenance(args), "modes": scores}
    path = _out_path(args.out, "_scores", "json")
    path.write_text(json.dumps(report, indent=2) + "\n")
    print(f"wrote {path}")
    return 0


def _parse_alpha_grid(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip() != "")
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad alpha grid {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="skece",
        description="CSI secret-key extraction experiments at desk scale",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, default_out: str):
        p.add_argument("--scenario", default="C", help="preset letter A-F, 'attack', or a JSON config path")
        p.add_argument("--trials", type=int, default=100, help="trial or run count")
        p.add_argument("--seed", type=int, default=0, help="base RNG seed")
        p.add_argument("--alpha", type=float, default=None, help="quantizer alpha override")
        p.add_argument("--gamma", type=float, default=0.98, help="validation confidence target")
        p.add_argument("--theta", type=int, default=5, help="difference-degree modulus")
        p.add_argument("--key-length", dest="key_length", type=int, default=300, help="key length in bits")
        p.add_argument("--out", default=default_out, help="output path or prefix")
        p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = sub.add_parser("simulate", help="write scenario traces as CSV files")
    common(p, "traces")

    p = sub.add_parser("extract", help="alpha sweep of bit extraction outcomes")
    common(p, "extract.csv")
    p.add_argument("--alphas", type=_parse_alpha_grid, default=None, help="comma-separated alpha grid")

    p = sub.add_parser("compare", help="message overhead: recombination vs Cascade")
    common(p, "compare")

    p = sub.add_parser("randomness", help="the four-test battery on generated keys")
    common(p, "randomness.csv")
    p.set_defaults(scenario="all")

    p = sub.add_parser("attack", help="predictable-channel attack experiment")
    common(p, "attack")
    return parser


_COMMANDS = {
    "simulate": cmd_simulate,
    "extract": cmd_extract,
    "compare": cmd_compare,
    "randomness": cmd_randomness,
    "attack": cmd_attack,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.trials < 1:
        parser.error("--trials must be >= 1")
    if args.alpha is not None and args.alpha < 0:
        parser.error("--alpha must be >= 0")
    try:
        return _COMMANDS[args.command](args)
    except (SkeceError, OSError) as exc:
        record = {
            "error": type(exc).__name__,
            "message": str(exc),
            "command": args.command,
        }
        print(json.dumps(record), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
