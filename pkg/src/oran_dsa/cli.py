"""Command-line entry point: run, sweep, predict and a standalone xApp server."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from oran_dsa.control_plane import CodecError, TransportError, serve
from oran_dsa.radio import GridError
from oran_dsa.rapp import select_numerology
from oran_dsa.scenario import ConfigError, ScenarioConfig, apply_overrides, load_config
from oran_dsa.sim import build_traffic, run_scenario
from oran_dsa.streams import derive_seed
from oran_dsa.traffic import (
    SAMPLES_PER_DAY,
    ExternalPredictions,
    ForecastConfig,
    TrafficError,
    forecast,
    ingest_csv,
    minmax_normalize,
    mse,
)
from oran_dsa.xapp import XApp

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_RUNTIME = 0, 2, 3, 4

SLOT_COLUMNS = ["episode", "slot", "ue", "ru", "prb", "rate_bps", "satisfied", "preempted"]
SWEEP_COLUMNS = ["axis", "axis_value", "success_rate_pct", "jfi_pct"]
SWEEP_AXES = ("numerology", "demand", "coloring-scheme", "fairness-scheme", "ue-count")
FULL_SCALE = {"episodes": 96, "slots_per_episode": 900}

log = logging.getLogger("oran_dsa")


def _fmt(x: float) -> str:
    return repr(float(x))


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def slot_rows(records):
    for rec in records:
        for u in rec.ues:
            yield [
                rec.episode,
                rec.slot,
                u.ue,
                u.ru,
                "" if u.prb is None else u.prb,
                _fmt(u.rate_bps),
                int(u.satisfied),
                int(u.preempted),
            ]


def summary_document(cfg: ScenarioConfig, summary) -> dict:
    doc = summary.to_dict()
    doc["config"] = cfg.to_dict()
    doc["config_hash"] = cfg.config_hash()
    doc["seed"] = cfg.seed
    return doc


def _resolve(args, extra: list[str] | None = None) -> ScenarioConfig:
    overrides = list(args.set or [])
    if getattr(args, "full", False):
        overrides = [f"{k}={v}" for k, v in FULL_SCALE.items()] + overrides
    return load_config(args.config, overrides + list(extra or []), args.seed)


def cmd_run(args) -> int:
    cfg = _resolve(args)
    summary, records = run_scenario(cfg, transport=args.transport)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "summary.json", summary_document(cfg, summary))
    write_csv(out / "slots.csv", SLOT_COLUMNS, slot_rows(records))
    print(
        f"success_rate={summary.success_rate:.2f}% jfi={summary.jfi:.2f}% "
        f"mu={summary.mu_trace} -> {out}"
    )
    return EXIT_OK


def axis_overrides(axis: str, value: str, cfg: ScenarioConfig) -> list[str]:
    if axis == "numerology":
        return [f"numerology={int(value)}"]
    if axis == "demand":
        return [f"demand_mix=[[{float(value)!r},1.0]]"]
    if axis == "coloring-scheme":
        return [f"coloring_scheme={json.dumps(value)}"]
    if axis == "fairness-scheme":
        return [f"fairness_scheme={json.dumps(value)}"]
    # ue-count: constant load split as evenly as possible across RUs
    total = int(value)
    ids = sorted(r["id"] for r in cfg.rus)
    per_ru = [
        {"ru_id": rid, "base": float(total // len(ids) + (i < total % len(ids))), "amplitude": 0.0, "noise_sd": 0.0}
        for i, rid in enumerate(ids)
    ]
    return ["traffic.source=\"synthetic\"", f"traffic.per_ru={json.dumps(per_ru)}"]


def _sweep_point(job):
    cfg, transport = job
    summary, _ = run_scenario(cfg, transport=transport)
    return summary.success_rate, summary.jfi


def cmd_sweep(args) -> int:
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    if not values:
        raise ConfigError(["--values: at least one value is required"])
    base = _resolve(args)
    jobs = []
    for i, v in enumerate(values):
        try:
            extra = axis_overrides(args.axis, v, base)
        except ValueError:
            raise ConfigError([f"--values: {v!r} is not valid for axis {args.axis}"]) from None
        seed = base.seed if args.common_seed else derive_seed(base.seed, i)
        cfg = ScenarioConfig.from_dict(_with(base.to_dict(), extra, seed))
        jobs.append((cfg, args.transport))
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_sweep_point, jobs))
    else:
        results = [_sweep_point(j) for j in jobs]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = [[args.axis, v, _fmt(s), _fmt(j)] for v, (s, j) in zip(values, results)]
    write_csv(out / "sweep.csv", SWEEP_COLUMNS, rows)
    for row in rows:
        print(",".join(str(c) for c in row))
    return EXIT_OK


def _with(data: dict, overrides: list[str], seed: int) -> dict:
    data = apply_overrides(data, overrides)
    data["seed"] = seed
    return data


def cmd_predict(args) -> int:
    cfg = _resolve(args)
    if args.traffic:
        series = ingest_csv(args.traffic, known_rus=[r["id"] for r in cfg.rus])
    else:
        series = build_traffic(cfg)
    kind = args.kind or cfg.forecast.kind
    fc = ForecastConfig(
        args.lookback or cfg.forecast.lookback, args.horizon or cfg.forecast.horizon, kind
    )
    external_path = args.external or cfg.forecast.external_path
    external = ExternalPredictions.from_csv(external_path) if kind == "external" else None
    n = min(len(s) for s in series.values())
    test_len = args.test_days * SAMPLES_PER_DAY
    split = n - test_len
    if split < 1 or split - fc.horizon + 1 < fc.lookback:
        raise TrafficError(
            f"insufficient history: {n} samples leave {split} before the test split, "
            f"lookback {fc.lookback} needs {fc.lookback + fc.horizon - 1}"
        )

    by_ru, rows, pred_all, act_all = [], [], [], []
    for t in range(split, n):
        preds = {rid: forecast(s, fc, t - fc.horizon, external) for rid, s in series.items()}
        actual = {rid: s.loads[t] for rid, s in series.items()}
        worst_pred = max(preds.values())
        mu = select_numerology(worst_pred, cfg.bandwidth_hz, cfg.guard_band_hz, cfg.headroom)
        ts = next(iter(series.values())).timestamp_at(t)
        stamp = ts.isoformat() if hasattr(ts, "isoformat") else ts
        rows.append([stamp, _fmt(max(actual.values())), _fmt(worst_pred), mu])
        for rid in sorted(series):
            by_ru.append([stamp, rid, _fmt(actual[rid]), _fmt(preds[rid])])
            train = series[rid].values[:split]
            lo, hi = float(train.min()), float(train.max())
            pred_all.append(minmax_normalize([preds[rid]], lo, hi)[0])
            act_all.append(minmax_normalize([actual[rid]], lo, hi)[0])

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "predictions.csv", ["timestamp", "actual_worst", "predicted_worst", "numerology"], rows)
    write_csv(out / "predictions_by_ru.csv", ["timestamp", "ru_id", "actual", "predicted"], by_ru)
    write_json(
        out / "metrics.json",
        {
            "forecaster": kind,
            "lookback": fc.lookback,
            "horizon": fc.horizon,
            "test_samples": test_len,
            "normalized_mse": float(mse(pred_all, act_all)),
            "seed": cfg.seed,
            "config_hash": cfg.config_hash(),
        },
    )
    print(f"normalized_mse={mse(pred_all, act_all):.6g} rows={len(rows)} -> {out}")
    return EXIT_OK


def cmd_xapp(args) -> int:
    def ready(endpoint):
        print(f"LISTENING {endpoint}", flush=True)

    try:
        serve(args.listen, XApp, ready)
    except KeyboardInterrupt:
        pass
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", "-c", help="scenario JSON (defaults when omitted)")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", help="dotted-path override, repeatable")
    common.add_argument("--seed", type=int, help="override the scenario seed")
    common.add_argument("--out", "-o", default="out", help="output directory (default: out)")

    transport = argparse.ArgumentParser(add_help=False)
    transport.add_argument(
        "--transport",
        default="loopback",
        help="loopback (default), subprocess, or host:port of a running xApp",
    )
    transport.add_argument("--full", action="store_true", help="full-scale run: 96 episodes x 900 slots")

    p = argparse.ArgumentParser(prog="oran-dsa", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", parents=[common, transport], help="run one scenario")
    run.set_defaults(func=cmd_run)

    sweep = sub.add_parser("sweep", parents=[common, transport], help="one run per axis value")
    sweep.add_argument("--axis", required=True, choices=SWEEP_AXES)
    sweep.add_argument("--values", required=True, help="comma-separated axis values")
    sweep.add_argument("--jobs", type=int, default=1, help="parallel sweep points")
    sweep.add_argument(
        "--common-seed", action="store_true", help="use the base seed for every point instead of derived seeds"
    )
    sweep.set_defaults(func=cmd_sweep)

    pred = sub.add_parser("predict", parents=[common], help="evaluate a forecaster on the last day(s)")
    src = pred.add_mutually_exclusive_group()
    src.add_argument("--traffic", help="timestamp,ru_id,load CSV")
    src.add_argument("--synth", action="store_true", help="use the scenario's synthetic traffic (default)")
    pred.add_argument("--kind", choices=("seasonal-naive", "moving-average", "external"))
    pred.add_argument("--lookback", type=int)
    pred.add_argument("--horizon", type=int)
    pred.add_argument("--external", help="timestamp,ru_id,predicted_load CSV")
    pred.add_argument("--test-days", type=int, default=1)
    pred.set_defaults(func=cmd_predict)

    xapp = sub.add_parser("xapp", help="serve the xApp over TCP")
    xapp.add_argument("--listen", default="127.0.0.1:0", help="host:port (port 0 picks a free one)")
    xapp.set_defaults(func=cmd_xapp)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    except (TransportError, CodecError) as exc:
        print(f"transport error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (TrafficError, GridError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
