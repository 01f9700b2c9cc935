"""Command-line interface; a thin client over the HTTP service.

Without --server the service runs in-process, so the CLI is fully standalone;
with --server it drives a remote instance. Machine-readable output always
goes to files, human-readable summaries to stdout.

Exit codes: 0 ok, 1 usage error, 2 input error, 3 budget violation.
"""

from __future__ import annotations

import argparse
import json
import sys

from .config import config_keys, default_config_text
from .service import EngineClient, ServiceError
from .service import models

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_BUDGET = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's default 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _add_config_flags(parser: argparse.ArgumentParser, skip: tuple[str, ...] = ()) -> None:
    group = parser.add_argument_group("config overrides (each maps 1:1 to a config key)")
    for key, _, default in config_keys():
        if key in skip:
            continue
        group.add_argument(
            f"--{key}", dest=_dest(key), metavar="V", default=None,
            help=f"default: {default}",
        )


def _dest(key: str) -> str:
    return "cfgkey__" + key.replace(".", "__")


def _collect_overrides(args: argparse.Namespace) -> dict[str, str]:
    overrides = {}
    for key, _, _ in config_keys():
        value = getattr(args, _dest(key), None)
        if value is not None:
            overrides[key] = value
    return overrides


def _read(path: str) -> str:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise ServiceError(f"cannot read {path}: {exc}") from exc


def _write(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _config_text(args: argparse.Namespace) -> str | None:
    return _read(args.config) if getattr(args, "config", None) else None


def build_parser() -> _Parser:
    parser = _Parser(prog="egowarn", description=__doc__)
    parser.add_argument("--server", help="service URL; omit to run in-process")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic recording + ground truth")
    p.add_argument("--preset", choices=("easy", "hard", "uncontrolled"), default="easy")
    p.add_argument("--spec", help="custom scenario JSON document (overrides --preset)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--duration", type=float, default=None, help="seconds")
    p.add_argument("--out", required=True, help="output prefix (.rec/.truth)")
    _add_config_flags(p, skip=("seed",))

    p = sub.add_parser("run", help="process a recording into alerts + predictions")
    p.add_argument("--rec", required=True)
    p.add_argument("--config", help=".cfg file")
    p.add_argument("--out", required=True, help="output prefix (.alerts/.pred)")
    _add_config_flags(p)

    p = sub.add_parser("eval", help="score alerts/predictions against ground truth")
    p.add_argument("--alerts", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--equivalence", action="store_true",
                   help="also compute the semi-local equivalence residuals")
    p.add_argument("--config", help=".cfg file")
    p.add_argument("--out", required=True, help="output prefix (.metrics)")
    _add_config_flags(p)

    p = sub.add_parser("stream", help="replay a recording on the wall clock")
    p.add_argument("--rec", required=True)
    p.add_argument("--rate", type=float, default=1.0,
                   help="playback speed multiplier; 0 = as fast as possible")
    p.add_argument("--budget-ms", type=float, default=None,
                   help="per-frame budget; violations exit 3")
    p.add_argument("--config", help=".cfg file")
    p.add_argument("--out", help="optional output prefix (.alerts/.pred)")
    _add_config_flags(p)

    p = sub.add_parser("inspect", help="summarize a recording")
    p.add_argument("--rec", required=True)

    p = sub.add_parser("config", help="print the default configuration")

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8750)
    return parser


def cmd_simulate(client: EngineClient, args) -> int:
    spec = json.loads(_read(args.spec)) if args.spec else None
    resp = client.simulate(
        models.SimulateRequest(
            preset=args.preset,
            seed=args.seed,
            duration=args.duration,
            spec=spec,
            overrides=_collect_overrides(args),
        )
    )
    _write(args.out + ".rec", resp.recording)
    _write(args.out + ".truth", resp.truth)
    print(
        f"wrote {args.out}.rec ({resp.frames} frames) and {args.out}.truth "
        f"({resp.pedestrians} pedestrians, {resp.collision_intervals} collision intervals)"
    )
    return EXIT_OK


def cmd_run(client: EngineClient, args) -> int:
    resp = client.run(
        models.RunRequest(
            recording=_read(args.rec),
            config_text=_config_text(args),
            overrides=_collect_overrides(args),
        )
    )
    _write(args.out + ".alerts", resp.alerts)
    _write(args.out + ".pred", resp.predictions)
    print(
        f"processed {resp.frames} frames: {resp.events} alert events, "
        f"latency p50/p99 = {resp.latency_p50_ms:.2f}/{resp.latency_p99_ms:.2f} ms, "
        f"max concurrent tracks {resp.max_concurrent_tracks}"
    )
    return EXIT_OK


def cmd_eval(client: EngineClient, args) -> int:
    resp = client.evaluate(
        models.EvaluateRequest(
            truth=_read(args.truth),
            alerts=_read(args.alerts),
            predictions=_read(args.pred),
            equivalence=args.equivalence,
            config_text=_config_text(args),
            overrides=_collect_overrides(args),
        )
    )
    _write(args.out + ".metrics", resp.metrics)
    report = resp.report

    def fmt(key):
        value = report.get(key)
        return "null" if value is None else f"{value:.4f}"

    print(
        f"ade={fmt('ade')} fde={fmt('fde')} precision={fmt('precision')} "
        f"recall={fmt('recall')} f1={fmt('f1')}"
    )
    if report.get("equivalence_residual_max") is not None:
        print(
            f"equivalence residual max={report['equivalence_residual_max']:.3e} "
            f"mean={report['equivalence_residual_mean']:.3e}"
        )
    print(f"counts: {report['counts']}")
    return EXIT_OK


def cmd_stream(client: EngineClient, args) -> int:
    def show(event: dict) -> None:
        tier = f" [{event['tier']}]" if event.get("tier") else ""
        ttc = f" ttc={event['ttc']:.1f}s" if event.get("ttc") is not None else ""
        print(f"t={event['t']:7.2f}  track {event['track_id']:<4d} {event['event'].upper():8s}{tier}{ttc}")

    final = client.stream(
        models.StreamRequest(
            recording=_read(args.rec),
            config_text=_config_text(args),
            overrides=_collect_overrides(args),
            rate=args.rate,
            budget_ms=args.budget_ms,
        ),
        on_event=show,
    )
    print(
        f"streamed {final['frames']} frames: latency p50/p99 = "
        f"{final['latency_p50_ms']:.2f}/{final['latency_p99_ms']:.2f} ms, "
        f"max queue depth {final['queue_depth_max']}, "
        f"budget violations {final['budget_violations']}"
    )
    if args.out:
        _write(args.out + ".alerts", final["alerts"])
        _write(args.out + ".pred", final["predictions"])
    if args.budget_ms is not None and final["budget_violations"] > 0:
        print(f"budget of {args.budget_ms} ms violated on {final['budget_violations']} frames",
              file=sys.stderr)
        return EXIT_BUDGET
    return EXIT_OK


def cmd_inspect(client: EngineClient, args) -> int:
    resp = client.inspect(models.InspectRequest(recording=_read(args.rec)))
    print(f"frames:         {resp.frames}")
    print(f"duration:       {resp.duration:.2f} s at {resp.native_fps} fps")
    print(f"detections:     {resp.detections}")
    print(f"track estimate: {resp.track_estimate}")
    print(f"metadata:       {json.dumps(resp.metadata, sort_keys=True)}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "config":
        print(default_config_text(), end="")
        return EXIT_OK
    if args.command == "serve":
        from .service.app import serve

        serve(host=args.host, port=args.port)
        return EXIT_OK
    handlers = {
        "simulate": cmd_simulate,
        "run": cmd_run,
        "eval": cmd_eval,
        "stream": cmd_stream,
        "inspect": cmd_inspect,
    }
    try:
        with EngineClient(args.server) as client:
            return handlers[args.command](client, args)
    except ServiceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
