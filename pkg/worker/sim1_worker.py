"""Reference external simulator speaking the line protocol on stdio.

Implements the linear one-confounder generator: a hidden Z ~ N(0,1), a
covariate X ~ N(0,1), treatment Bernoulli(expit(rho Z + beta X + N(0, 0.1)))
and outcome Y = rho Z + beta X + tau T + N(0, 0.1).

Protocol: each request is one JSON line {"theta":{...},"n":<int>,
"seed":<uint64>}; the response is a BEGIN_CSV line, the dataset as CSV with
header x,t,y, then END_CSV. Malformed requests get a single ERROR line and
the loop continues. With --oneshot the process exits after one request.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

REQUIRED_PARAMS = ("rho", "beta", "tau")


def generate_rows(theta: dict, n: int, seed: int) -> list[str]:
    gen = np.random.default_rng(seed)
    z = gen.standard_normal(n)
    x = gen.standard_normal(n)
    lp = (theta["rho"] * z + theta["beta"] * x
          + 0.1 * gen.standard_normal(n))
    t = (gen.random(n) < 1.0 / (1.0 + np.exp(-lp))).astype(int)
    y = (theta["rho"] * z + theta["beta"] * x + theta["tau"] * t
         + 0.1 * gen.standard_normal(n))
    rows = ["x,t,y"]
    rows.extend(f"{float(x[i])!r},{t[i]},{float(y[i])!r}" for i in range(n))
    return rows


def parse_request(line: str) -> tuple[dict, int, int]:
    req = json.loads(line)
    if not isinstance(req, dict):
        raise ValueError("request must be a JSON object")
    theta = req["theta"]
    missing = [p for p in REQUIRED_PARAMS if p not in theta]
    if missing:
        raise ValueError(f"theta is missing {missing}")
    theta = {k: float(v) for k, v in theta.items()}
    n = int(req["n"])
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    seed = int(req["seed"])
    return theta, n, seed


def serve(stdin, stdout, oneshot: bool = False) -> None:
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            theta, n, seed = parse_request(line)
            rows = generate_rows(theta, n, seed)
        except (KeyError, TypeError, ValueError) as exc:
            stdout.write(f"ERROR {exc}\n")
            stdout.flush()
            if oneshot:
                return
            continue
        stdout.write("BEGIN_CSV\n")
        stdout.write("\n".join(rows))
        stdout.write("\nEND_CSV\n")
        stdout.flush()
        if oneshot:
            return


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        description="reference linear simulator worker (stdio line protocol)")
    parser.add_argument("--oneshot", action="store_true",
                        help="serve a single request and exit")
    args = parser.parse_args(argv)
    serve(sys.stdin, sys.stdout, oneshot=args.oneshot)
    return 0


if __name__ == "__main__":
    sys.exit(main())
