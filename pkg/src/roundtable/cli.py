"""Service entrypoint.

Startup validates the locale packs, the data directory, and the image
provider configuration before binding, and fails with a one-line reason on
stderr and a nonzero exit if anything is wrong. In real-clock mode a
background ticker drives the timers; with --simulated-clock the
/clock/advance endpoint is enabled instead and no wall time ever passes.
"""

from __future__ import annotations

import argparse
import logging
import socket
import sys
import threading

import uvicorn

from .api import Service, create_app
from .errors import RoundtableError
from .images import API_KEY_ENV, ENGINE_ID_ENV

logger = logging.getLogger(__name__)

TICK_INTERVAL_S = 0.25

EPILOG = f"""\
environment:
  {API_KEY_ENV}   API key for the live image provider (live mode only)
  {ENGINE_ID_ENV}        search engine id for the live image provider (live mode only)

Credentials are read only from the environment, never from flags or files.
"""


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="roundtable",
        description="Run the group-session orchestration service.",
        epilog=EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument(
        "--listen", default="127.0.0.1:8000", metavar="HOST:PORT",
        help="bind address (port 0 picks a free port; default %(default)s)",
    )
    parser.add_argument(
        "--data-dir", default="./data", metavar="PATH",
        help="root for session logs, audio files, and the image cache",
    )
    parser.add_argument(
        "--locale", default="en", choices=("en", "ja"), help="default session locale"
    )
    parser.add_argument(
        "--provider-mode", default="fixture", choices=("live", "fixture"),
        help="image provider backend",
    )
    parser.add_argument(
        "--fixture-dir", default=None, metavar="PATH",
        help="image fixture tree (<dir>/<locale>/<keyword>/1.jpg); required in fixture mode",
    )
    parser.add_argument(
        "--simulated-clock", action="store_true",
        help="freeze time and enable POST /clock/advance (for tests and rehearsal)",
    )
    parser.add_argument(
        "--log-level", default="info",
        choices=("debug", "info", "warning", "error"),
    )
    return parser


def _parse_listen(value: str) -> tuple[str, int]:
    host, sep, port = value.rpartition(":")
    if not sep or not port.isdigit():
        raise RoundtableError(f"--listen must look like HOST:PORT, got {value!r}")
    return host or "127.0.0.1", int(port)


def _start_ticker(service: Service, stop: threading.Event) -> threading.Thread:
    def run():
        while not stop.wait(TICK_INTERVAL_S):
            with service.write_lock:
                service.engine.tick(service.clock.now())

    thread = threading.Thread(target=run, name="roundtable-ticker", daemon=True)
    thread.start()
    return thread


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=args.log_level.upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    try:
        host, port = _parse_listen(args.listen)
        service = Service(
            data_dir=args.data_dir,
            provider_mode=args.provider_mode,
            fixture_dir=args.fixture_dir,
            locale=args.locale,
            simulated_clock=args.simulated_clock,
        )
    except RoundtableError as exc:
        print(f"roundtable: startup failed: {exc}", file=sys.stderr)
        return 1

    sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    try:
        sock.bind((host, port))
    except OSError as exc:
        print(f"roundtable: startup failed: address in use or unbindable ({exc})", file=sys.stderr)
        sock.close()
        return 1
    bound_host, bound_port = sock.getsockname()[:2]
    print(f"roundtable listening on http://{bound_host}:{bound_port}", flush=True)

    app = create_app(service)
    stop = threading.Event()
    if not args.simulated_clock:
        _start_ticker(service, stop)
    try:
        config = uvicorn.Config(app, log_level=args.log_level, access_log=False)
        uvicorn.Server(config).run(sockets=[sock])
    finally:
        stop.set()
        sock.close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
