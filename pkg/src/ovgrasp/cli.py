"""Command line entry points.

Exit codes: 0 on success, 1 for I/O and environment failures (missing
files, unwritable output, busy ports), 2 for invalid input (malformed
scenarios, bad wire bytes, inconsistent data files). Logging goes to
stderr at the level named by OVGRASP_LOG (error, info, or debug).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import __version__
from .evaluation import (EvalError, evaluate_splits, format_ap_table,
                         format_consistency_table, format_gas_table,
                         gas_report, load_ground_truth, load_published_gas,
                         read_trials_csv, verify_published_gas)
from .geometry import GeometryError
from .intent import IntentError
from .ovdetect import DetectError, load_vocabulary, read_detection_log
from .protocol import ProtocolError, decode_command, encode_command
from .sim import ScenarioInvalid, load_scenario, run_scenario

log = logging.getLogger("ovgrasp")

EXIT_OK = 0
EXIT_IO = 1
EXIT_INVALID = 2


def _setup_logging() -> None:
    level = os.environ.get("OVGRASP_LOG", "error").lower()
    chosen = {"error": logging.ERROR, "info": logging.INFO,
              "debug": logging.DEBUG}.get(level, logging.ERROR)
    logging.basicConfig(stream=sys.stderr, level=chosen,
                        format="%(levelname)s %(name)s: %(message)s")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ovgrasp",
        description="Grasp-assistance pipeline: simulate, evaluate, encode.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="play a scripted scenario and write traces")
    p.add_argument("--scenario", required=True, help="scenario JSON file")
    p.add_argument("--out", default="out", help="output directory (default: out)")
    p.add_argument("--seed", type=int, default=None,
                   help="override the scenario's detector noise seed")
    p.add_argument("--distance-space", choices=("mixed", "metric"), default=None,
                   help="override the target ranking distance")

    p = sub.add_parser("eval-ap", help="average precision from logged detections")
    p.add_argument("--detections", required=True, help="detection log JSONL")
    p.add_argument("--ground-truth", required=True, help="ground truth JSON")
    p.add_argument("--vocab", default=None,
                   help="vocabulary JSON supplying seen/unseen splits")
    p.add_argument("--iou", type=float, default=0.5, help="match threshold")
    p.add_argument("--json", action="store_true", help="emit JSON, not a table")

    p = sub.add_parser("eval-gas", help="grasping ability scores from trials")
    p.add_argument("--trials", required=True, help="trial outcomes CSV")
    p.add_argument("--published", default=None,
                   help="published scores JSON to cross-check")
    p.add_argument("--tol", type=float, default=0.02,
                   help="tolerance for the published-score check")
    p.add_argument("--json", action="store_true", help="emit JSON, not a table")

    p = sub.add_parser("proto-encode", help="encode one command frame as hex")
    p.add_argument("--token", required=True, choices=("G", "R", "S"))
    p.add_argument("--seq", type=int, default=0, help="sequence number 0..255")

    p = sub.add_parser("proto-decode", help="decode a hex command frame")
    p.add_argument("--hex", required=True, dest="hexstr",
                   help="frame bytes as hex, e.g. a500475a")

    p = sub.add_parser("serve", help="serve a scenario to UI clients")
    p.add_argument("--scenario", required=True, help="scenario JSON file")
    p.add_argument("--port", type=int, default=8080, help="TCP NDJSON port")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--http-port", type=int, default=None,
                   help="also serve HTTP/WebSocket on this port")
    p.add_argument("--ui-dir", default=None,
                   help="static UI bundle for the HTTP bridge")
    p.add_argument("--out", default=None,
                   help="write trace files here when the run ends")
    p.add_argument("--seed", type=int, default=None)
    return parser


def cmd_run(args) -> int:
    scenario = load_scenario(args.scenario)
    trace = run_scenario(scenario, seed=args.seed,
                         distance_space=args.distance_space)
    trace.write(args.out)
    print(f"{trace.name}: {trace.outcome['frames']} frames, "
          f"commands {trace.outcome['commands']}, "
          f"final phase {trace.outcome['final_phase']} -> {args.out}")
    return EXIT_OK


def cmd_eval_ap(args) -> int:
    dets = read_detection_log(args.detections)
    gts = load_ground_truth(args.ground_truth)
    vocab = load_vocabulary(args.vocab) if args.vocab else None
    report = evaluate_splits(dets, gts, vocab, iou_thresh=args.iou)
    if args.json:
        print(json.dumps(report.to_json(), indent=2, sort_keys=True))
    else:
        print(format_ap_table(report))
    return EXIT_OK


def cmd_eval_gas(args) -> int:
    rows = read_trials_csv(args.trials)
    report = gas_report(rows)
    if args.json:
        doc = report.to_json()
        if args.published:
            checks = verify_published_gas(load_published_gas(args.published),
                                          tol=args.tol)
            doc["published_check"] = checks
        print(json.dumps(doc, indent=2, sort_keys=True))
    else:
        print(format_gas_table(report))
        if args.published:
            checks = verify_published_gas(load_published_gas(args.published),
                                          tol=args.tol)
            print()
            print(format_consistency_table(checks))
    return EXIT_OK


def cmd_proto_encode(args) -> int:
    if not 0 <= args.seq <= 255:
        print("seq must be in 0..255", file=sys.stderr)
        return EXIT_INVALID
    print(encode_command(args.token, args.seq).hex())
    return EXIT_OK


def cmd_proto_decode(args) -> int:
    try:
        raw = bytes.fromhex(args.hexstr)
    except ValueError:
        print("not valid hex", file=sys.stderr)
        return EXIT_INVALID
    decoded = decode_command(raw)
    if decoded is None:
        print(f"short frame: need 4 bytes, got {len(raw)}", file=sys.stderr)
        return EXIT_INVALID
    token, seq = decoded
    print(json.dumps({"token": token, "seq": seq}))
    return EXIT_OK


def cmd_serve(args) -> int:
    from .server import serve_scenario
    scenario = load_scenario(args.scenario)
    server = serve_scenario(scenario, host=args.host, port=args.port,
                            out_dir=args.out, seed=args.seed)
    httpd = None
    if args.http_port is not None:
        from .webbridge import start_bridge
        httpd = start_bridge(server, host=args.host, http_port=args.http_port,
                             ui_dir=args.ui_dir)
    mode = "interactive" if scenario.interactive else "scripted"
    # report bound ports, not requested ones: --port 0 / --http-port 0
    # pick free ports and callers parse the banner to find them
    print(f"serving {scenario.name} ({mode}) on {args.host}:{server.port}"
          + (f", http {httpd.server_address[1]}" if httpd else ""))
    try:
        trace = server.serve()
        print(f"run ended after {trace.outcome['frames']} frames")
    except KeyboardInterrupt:
        server.stop()
        trace = server.runner.finish(interrupted=True)
        if args.out is not None:
            trace.write(args.out)
        print(f"\ninterrupted after {trace.outcome['frames']} frames")
    finally:
        server.shutdown()
        if httpd is not None:
            httpd.shutdown()
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "run": cmd_run,
        "eval-ap": cmd_eval_ap,
        "eval-gas": cmd_eval_gas,
        "proto-encode": cmd_proto_encode,
        "proto-decode": cmd_proto_decode,
        "serve": cmd_serve,
    }
    try:
        return handlers[args.command](args)
    except (ScenarioInvalid, DetectError, EvalError, ProtocolError,
            IntentError, GeometryError, ValueError) as exc:
        log.debug("invalid input", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        log.debug("I/O failure", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
