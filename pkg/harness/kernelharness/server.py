"""Line-delimited JSON server over standard streams.

Reads one request per line, writes one response per line, strictly in
order. A request the harness cannot parse or validate gets an error
document; everything else gets a full evaluation response. End of input
ends the process with status 0.
"""

import argparse
import json
import sys

from .protocol import error_doc, validate_request
from .runner import Runner


def serve(stdin=None, stdout=None, runner=None) -> int:
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    runner = runner or Runner()

    def emit(doc):
        stdout.write(json.dumps(doc) + "\n")
        stdout.flush()

    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            request = json.loads(line)
        except json.JSONDecodeError as exc:
            emit(error_doc(f"invalid JSON: {exc}"))
            continue
        problems = validate_request(request)
        if problems:
            kernel_id = (
                request.get("kernel_id") if isinstance(request, dict) else None
            )
            emit(error_doc("; ".join(problems), kernel_id))
            continue
        emit(runner.evaluate(request))
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="kernelharness",
        description="Kernel measurement harness speaking line-delimited "
        "JSON on stdin/stdout.",
    )
    parser.parse_args(argv)
    return serve()


if __name__ == "__main__":
    raise SystemExit(main())
