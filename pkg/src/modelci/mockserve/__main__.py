"""Entry point: ``python -m modelci.mockserve --model weights.bin ...``

Prints ``READY <port>`` on stdout once the socket is listening (the
dispatcher's handshake), then serves until killed. Exits 2 if the model
file does not decode as a toy format.
"""

import argparse
import signal
import sys
import time
from pathlib import Path

from modelci.errors import ToyFormatError
from modelci.mockserve.server import FaultScript, LatencyModel, MockServer


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="modelci-mockserve",
                                     description="synthetic model serving backend")
    parser.add_argument("--model", required=True, help="path to a toy-format model file")
    parser.add_argument("--base-ms", type=float, default=0.0)
    parser.add_argument("--per-sample-ms", type=float, default=0.0)
    parser.add_argument("--jitter-ms", type=float, default=0.0)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--fault-script", default=None, help="file of '<t_ms> <action>' lines")
    parser.add_argument("--protocol", choices=["rest", "grpc-style"], default="rest")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--ready-delay-ms", type=float, default=0.0,
                        help="artificial delay before announcing readiness (for tests)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        model_bytes = Path(args.model).read_bytes()
    except OSError as exc:
        print(f"cannot read model: {exc}", file=sys.stderr)
        return 2
    try:
        latency = LatencyModel(base_ms=args.base_ms, per_sample_ms=args.per_sample_ms,
                               jitter_ms=args.jitter_ms, seed=args.seed)
        fault = FaultScript.from_file(args.fault_script) if args.fault_script else None
        server = MockServer(model_bytes, latency, protocol=args.protocol,
                            host=args.host, fault_script=fault)
    except (ToyFormatError, ValueError, OSError) as exc:
        print(f"cannot start: {exc}", file=sys.stderr)
        return 2

    if args.ready_delay_ms > 0:
        time.sleep(args.ready_delay_ms / 1000.0)

    signal.signal(signal.SIGTERM, lambda *_: sys.exit(0))
    print(f"READY {server.port}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    return 0


if __name__ == "__main__":
    sys.exit(main())
