"""Command-line interface.

Subcommands:
    layout    analyze a page image into a layout JSON (+ optional overlay)
    simulate  generate a synthetic prediction trace over layouts
    run       replay a trace through filter/policy/device, writing a log
    evaluate  score a session log against an oracle file

Exit codes: 0 success, 1 usage error, 2 data error, 3 device error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from PIL import UnidentifiedImageError

from . import __version__
from .device import device_from_spec
from .errors import (
    BadConfig,
    DeviceError,
    LogMismatch,
    NoInk,
    NonMonotonicTrace,
    PageFlipError,
    ParseError,
)
from .images import load_image, save_layout_overlay
from .layout import LayoutConfig, PageLayout, analyze_page
from .policy import POLICY_KINDS, PolicyConfig
from .session import SessionConfig, SessionLog, evaluate_turns, run_session
from .simulate import SyntheticConfig, load_trace, oracle_turn_time, save_trace, synth_trajectory

USAGE_ERROR, DATA_ERROR, DEVICE_ERROR = 1, 2, 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pageflip",
        description="Automatic page turning tools for sheet-music images.",
    )
    parser.add_argument("--version", action="version", version=f"pageflip {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_layout = sub.add_parser("layout", help="detect systems on a page image")
    p_layout.add_argument("--image", required=True, help="PNG/PGM/PPM page image")
    p_layout.add_argument("--config", help="JSON file with LayoutConfig fields")
    p_layout.add_argument("--out", required=True, help="layout JSON output path")
    p_layout.add_argument("--overlay", help="optional annotated PNG output path")
    p_layout.add_argument("--page", type=int, default=0, help="0-based page index (default 0)")
    p_layout.set_defaults(func=_cmd_layout)

    p_sim = sub.add_parser("simulate", help="generate a synthetic prediction trace")
    p_sim.add_argument("--layout", required=True, nargs="+", help="layout JSON files, in page order")
    p_sim.add_argument("--spp", required=True, type=float, help="seconds per page")
    p_sim.add_argument("--noise", type=float, default=3.0, help="positional noise sigma in px")
    p_sim.add_argument("--outliers", type=float, default=0.05, help="outlier probability per sample")
    p_sim.add_argument("--seed", type=int, default=0, help="random seed")
    p_sim.add_argument("--rate", type=float, default=20.0, help="predictions per second")
    p_sim.add_argument("--out", required=True, help="trace JSONL output path")
    p_sim.add_argument("--oracle-out", help="also write ground-truth turn times as JSON")
    p_sim.add_argument(
        "--turn-fraction", type=float, default=0.5,
        help="in-system fraction used for the oracle times (default 0.5)",
    )
    p_sim.set_defaults(func=_cmd_simulate)

    p_run = sub.add_parser("run", help="replay a trace through the turning pipeline")
    p_run.add_argument("--layout", required=True, nargs="+", help="layout JSON files, in page order")
    p_run.add_argument("--trace", required=True, help="prediction trace JSONL")
    p_run.add_argument("--policy", choices=POLICY_KINDS, default="halfway")
    p_run.add_argument("--device", default="mock", help="mock or serial:PATH")
    p_run.add_argument("--log", required=True, help="session log JSONL output path")
    p_run.add_argument("--config", help="JSON file with SessionConfig fields")
    p_run.set_defaults(func=_cmd_run)

    p_eval = sub.add_parser("evaluate", help="score a session log against an oracle")
    p_eval.add_argument("--log", required=True, help="session log JSONL")
    p_eval.add_argument("--oracle", required=True, help="oracle JSON with per-page turn times")
    p_eval.set_defaults(func=_cmd_evaluate)

    return parser


def _load_json(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _load_layouts(paths) -> list[PageLayout]:
    layouts = []
    for position, path in enumerate(paths):
        layout = PageLayout.from_dict(_load_json(path))
        if layout.page_index != position:
            layout = dataclasses.replace(layout, page_index=position)
        layouts.append(layout)
    return layouts


def _cmd_layout(args) -> int:
    cfg = LayoutConfig.from_dict(_load_json(args.config)) if args.config else LayoutConfig()
    img = load_image(args.image)
    layout = analyze_page(img, page_index=args.page, cfg=cfg)
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(layout.to_dict(), fh, indent=2)
        fh.write("\n")
    if args.overlay:
        save_layout_overlay(img, layout, args.overlay)
    for warning in layout.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    print(f"{len(layout.systems)} system(s) -> {args.out}")
    return 0


def _cmd_simulate(args) -> int:
    layouts = _load_layouts(args.layout)
    cfg = SyntheticConfig(
        seconds_per_page=args.spp,
        rate_hz=args.rate,
        noise_px=args.noise,
        outlier_prob=args.outliers,
        seed=args.seed,
    )
    samples = synth_trajectory(layouts, cfg)
    save_trace([pred for _, pred in samples], args.out)
    if args.oracle_out:
        policy_cfg = PolicyConfig(turn_fraction=args.turn_fraction)
        pages = [
            {
                "page": page,
                "turn_t": page * cfg.seconds_per_page
                + oracle_turn_time(layouts[page], cfg, policy_cfg),
            }
            for page in range(len(layouts) - 1)
        ]
        with open(args.oracle_out, "w", encoding="utf-8") as fh:
            json.dump({"pages": pages}, fh, indent=2)
            fh.write("\n")
    print(f"{len(samples)} prediction(s) -> {args.out}")
    return 0


def _cmd_run(args) -> int:
    layouts = _load_layouts(args.layout)
    cfg = SessionConfig.from_dict(_load_json(args.config)) if args.config else SessionConfig()
    if cfg.policy.kind != args.policy:
        cfg = dataclasses.replace(
            cfg, policy=dataclasses.replace(cfg.policy, kind=args.policy)
        )
    source = load_trace(args.trace)
    device = device_from_spec(args.device, timeout_ms=cfg.device_timeout_ms)
    try:
        log = run_session(layouts, source, cfg, device)
    finally:
        device.close()
    log.save(args.log)
    turns = log.turns()
    print(
        f"{len(turns)} turn(s), {log.accepted_count} accepted, "
        f"{log.rejected_count} rejected -> {args.log}"
    )
    return 0


def _cmd_evaluate(args) -> int:
    log = SessionLog.load(args.log)
    oracle_doc = _load_json(args.oracle)
    oracle_times = {int(p["page"]): float(p["turn_t"]) for p in oracle_doc["pages"]}
    metrics = evaluate_turns(log, oracle_times)
    print(json.dumps(metrics.to_dict(), indent=2))
    return 0


def cli_dispatch(argv) -> int:
    """Parse and execute; returns a process exit code instead of raising."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else USAGE_ERROR
    try:
        return args.func(args)
    except DeviceError as exc:
        print(f"pageflip: device error: {exc}", file=sys.stderr)
        return DEVICE_ERROR
    except FileNotFoundError as exc:
        print(f"pageflip: file not found: {exc.filename}", file=sys.stderr)
        return DATA_ERROR
    except (ParseError, NonMonotonicTrace, NoInk, BadConfig, LogMismatch) as exc:
        print(f"pageflip: {exc}", file=sys.stderr)
        return DATA_ERROR
    except (json.JSONDecodeError, UnidentifiedImageError, KeyError, ValueError) as exc:
        print(f"pageflip: bad input data: {exc}", file=sys.stderr)
        return DATA_ERROR
    except PageFlipError as exc:
        print(f"pageflip: {exc}", file=sys.stderr)
        return DATA_ERROR


def main() -> None:
    sys.exit(cli_dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
