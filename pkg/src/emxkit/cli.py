"""emxkit command line.

    emxkit scheme verify --scheme max --ground-n 100
    emxkit kuratowski build --k 1 --n 8 --out d.json
    emxkit kuratowski check d.json
    emxkit kuratowski to-scheme d.json
    emxkit emx eval --dist u5.json --learner rank --d 3 --epsilon 1/3 --mode exact
    emxkit emx sweep --random 200 --seed 0 --learner rank --d 3 --epsilon 1/3
    emxkit emx derive-scheme --learner rank --d 3 --ground-n 30
    emxkit fiber probe --selector drop-last --m 2 --trials 1000 --seed 1

Exit codes: 0 success, 1 verified false (a mathematical finding),
2 usage or parse error, 3 enumeration budget exceeded.
Output is JSON on stdout, or in --out, or in $EMXKIT_OUTPUT_DIR/<command>.json.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from emxkit import __version__
from emxkit import emx, errors, fiberprobe, kuratowski, schemes
from emxkit.ground import OrderedGround, parse_fraction

OUTPUT_DIR_ENV = "EMXKIT_OUTPUT_DIR"

EXIT_OK, EXIT_FALSE, EXIT_USAGE, EXIT_BUDGET = 0, 1, 2, 3

FINDINGS = (
    errors.NotMonotone,
    errors.CoverFailure,
    errors.NoCompressingSubset,
    errors.ImageDrift,
    errors.NotPartition,
    errors.DeltaNotSelected,
    errors.GroundExhausted,
)


class Outcome(Exception):
    """Carries a finished payload with a non-zero exit status."""

    def __init__(self, result: dict, status: int):
        super().__init__(status)
        self.result = result
        self.status = status


def nonneg_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text}")
    return value


def pos_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def rational(text: str):
    try:
        return parse_fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _read_json(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _write_csv(path: str, rows) -> None:
    with open(path, "w", newline="") as fh:
        csv.writer(fh).writerows(rows)


def _write_json(path, doc) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


# --- commands ------------------------------------------------------------------


def cmd_scheme_verify(args) -> dict:
    ground = OrderedGround(args.ground_kind, args.ground_n)
    if args.table:
        scheme = schemes.scheme_from_table(_read_json(args.table), name=Path(args.table).stem)
    else:
        scheme = schemes.max_scheme()
    report = schemes.verify_scheme(scheme, ground, jobs=args.jobs, raise_on_failure=False)
    if args.csv:
        _write_csv(args.csv, report.histogram_csv_rows())
    result = {"scheme": scheme.name, "ground": ground.to_config(), "report": report.to_dict(args.fibers)}
    if not (report.monotone_ok and report.cover_ok):
        raise Outcome(result, EXIT_FALSE)
    return result


def cmd_kuratowski_build(args) -> dict:
    policy = kuratowski.OrderPolicy(args.policy, args.seed)
    return kuratowski.build_decomposition(args.k, args.n, policy).to_dict()


def cmd_kuratowski_check(args) -> dict:
    D = kuratowski.Decomposition.from_dict(_read_json(args.file))
    report = kuratowski.check_decomposition(D, args.against_n or 2 * D.n)
    if args.csv:
        _write_csv(args.csv, kuratowski.fiber_table(D))
    result = {"report": report.to_dict()}
    if not (report.partition_ok and report.truncation_stable):
        raise Outcome(result, EXIT_FALSE)
    return result


def cmd_kuratowski_to_scheme(args) -> dict:
    D = kuratowski.Decomposition.from_dict(_read_json(args.file))
    scheme = kuratowski.scheme_from_decomposition(D)
    ground = OrderedGround.naturals(D.n)
    report = schemes.verify_scheme(scheme, ground, raise_on_failure=False)
    if args.scheme_out:
        _write_json(args.scheme_out, dict(schemes.tabulate(scheme, ground), config=_config(args)))
    result = {"scheme": scheme.name, "scheme_file": args.scheme_out, "report": report.to_dict()}
    if not (report.monotone_ok and report.cover_ok):
        raise Outcome(result, EXIT_FALSE)
    return result


def _learner(name: str) -> emx.Learner:
    return emx.LEARNERS[name]()


def cmd_emx_eval(args) -> dict:
    P = emx.FiniteSupportDistribution.from_dict(_read_json(args.dist))
    learner = _learner(args.learner)
    if args.mode == "exact":
        rep = emx.eval_exact(learner, P, args.d, args.epsilon, args.delta, args.budget, jobs=args.jobs)
    else:
        rep = emx.eval_mc(learner, P, args.d, args.epsilon, args.trials, args.seed, args.delta)
    result = {"dist": args.dist, "report": rep.to_dict()}
    if not rep.satisfied:
        raise Outcome(result, EXIT_FALSE)
    return result


def _sweep_dists(args) -> list:
    dists = [(Path(p).stem, emx.FiniteSupportDistribution.from_dict(_read_json(p))) for p in args.dist or []]
    if args.random:
        rng = np.random.default_rng(args.seed)
        for i in range(args.random):
            dists.append((f"random-{i}", emx.random_distribution(rng, args.max_support, args.random_ground_n)))
    if not dists:
        raise ValueError("sweep needs --dist files or --random N")
    return dists


def cmd_emx_sweep(args) -> dict:
    rows = emx.sweep(_learner(args.learner), _sweep_dists(args), args.d, args.epsilon, args.delta, args.budget)
    if args.csv:
        _write_csv(args.csv, rows)
    header, body = rows[0], rows[1:]
    result = {
        "rows": [dict(zip(header, r)) for r in body],
        "all_satisfied": all(r[-1] for r in body),
    }
    if not result["all_satisfied"]:
        raise Outcome(result, EXIT_FALSE)
    return result


def cmd_emx_derive(args) -> dict:
    scheme = emx.scheme_from_learner(_learner(args.learner), args.d)
    ground = OrderedGround.naturals(args.ground_n)
    report = schemes.verify_scheme(scheme, ground, jobs=args.jobs, raise_on_failure=False)
    if args.table_out:
        _write_json(args.table_out, dict(schemes.tabulate(scheme, ground), config=_config(args)))
    result = {"scheme": scheme.name, "m": scheme.m, "d": scheme.d, "report": report.to_dict()}
    if not (report.monotone_ok and report.cover_ok):
        raise Outcome(result, EXIT_FALSE)
    return result


def cmd_fiber_probe(args) -> dict:
    sel = fiberprobe.GALLERY[args.selector](args.m)
    if args.expect_drift:
        points = [fiberprobe.parity_boundary_point(args.m, args.seed + i) for i in range(args.points)]
    else:
        points = fiberprobe.random_increasing(args.m, args.points, np.random.default_rng(args.seed))
    witnesses = args.witnesses if args.witnesses is not None else args.trials
    reports = [fiberprobe.probe(sel, x, args.trials, args.seed + i, witnesses) for i, x in enumerate(points)]
    drifted = any(r.drift is not None for r in reports)
    result = {
        "selector": sel.name,
        "claimed_continuous": sel.claimed_continuous,
        "drift_found": drifted,
        "probes": [r.to_dict() for r in reports],
    }
    if args.expect_drift:
        status = EXIT_OK if drifted else EXIT_FALSE
    else:
        status = EXIT_FALSE if (sel.claimed_continuous and drifted) else EXIT_OK
    if status:
        raise Outcome(result, status)
    return result


# --- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="emxkit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"emxkit {__version__}")
    top = parser.add_subparsers(dest="group", required=True)

    def common(p):
        p.add_argument("--out", help="write the JSON result here instead of stdout")
        p.add_argument("--record", help="also write a run record (timestamp, duration) here")

    # scheme
    sp = top.add_parser("scheme", help="compression schemes").add_subparsers(dest="action", required=True)
    p = sp.add_parser("verify", help="exhaustively verify a scheme")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--scheme", choices=["max"], default="max")
    src.add_argument("--table", help="scheme table JSON")
    p.add_argument("--ground-n", type=nonneg_int, required=True)
    p.add_argument("--ground-kind", choices=["naturals", "rationals"], default="naturals")
    p.add_argument("--csv", help="fiber histogram CSV")
    p.add_argument("--fibers", action="store_true", help="include every fiber size in the report")
    p.add_argument("--jobs", type=pos_int, default=1)
    common(p)
    p.set_defaults(func=cmd_scheme_verify)

    # kuratowski
    kp = top.add_parser("kuratowski", help="Kuratowski decompositions").add_subparsers(dest="action", required=True)
    p = kp.add_parser("build")
    p.add_argument("--k", type=nonneg_int, required=True)
    p.add_argument("--n", type=pos_int, required=True)
    p.add_argument("--policy", choices=["identity", "seeded"], default="identity")
    p.add_argument("--seed", type=int, default=0)
    common(p)
    p.set_defaults(func=cmd_kuratowski_build)
    p = kp.add_parser("check")
    p.add_argument("file")
    p.add_argument("--against-n", type=pos_int, help="larger side for the stability check (default 2n)")
    p.add_argument("--csv", help="direction-fiber table CSV")
    common(p)
    p.set_defaults(func=cmd_kuratowski_check)
    p = kp.add_parser("to-scheme")
    p.add_argument("file")
    p.add_argument("--scheme-out", help="scheme table JSON")
    common(p)
    p.set_defaults(func=cmd_kuratowski_to_scheme)

    # emx
    ep = top.add_parser("emx", help="EMX learning").add_subparsers(dest="action", required=True)

    def learning(p):
        p.add_argument("--learner", choices=sorted(emx.LEARNERS), default="rank")
        p.add_argument("--d", type=pos_int, default=3)

    def criterion(p):
        p.add_argument("--epsilon", type=rational, default=emx.THIRD)
        p.add_argument("--delta", type=rational, default=emx.THIRD)
        p.add_argument("--budget", type=pos_int, default=emx.DEFAULT_BUDGET)

    p = ep.add_parser("eval")
    p.add_argument("--dist", required=True)
    learning(p)
    criterion(p)
    p.add_argument("--mode", choices=["exact", "mc"], default="exact")
    p.add_argument("--trials", type=pos_int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=pos_int, default=1)
    common(p)
    p.set_defaults(func=cmd_emx_eval)
    p = ep.add_parser("sweep")
    p.add_argument("--dist", nargs="*")
    p.add_argument("--random", type=nonneg_int, default=0, help="add N seeded random distributions")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-support", type=pos_int, default=8)
    p.add_argument("--random-ground-n", type=pos_int, default=20)
    learning(p)
    criterion(p)
    p.add_argument("--csv")
    common(p)
    p.set_defaults(func=cmd_emx_sweep)
    p = ep.add_parser("derive-scheme")
    learning(p)
    p.add_argument("--ground-n", type=pos_int, required=True)
    p.add_argument("--table-out", help="scheme table JSON (large)")
    p.add_argument("--jobs", type=pos_int, default=1)
    common(p)
    p.set_defaults(func=cmd_emx_derive)

    # fiber
    fp = top.add_parser("fiber", help="continuity probes").add_subparsers(dest="action", required=True)
    p = fp.add_parser("probe")
    p.add_argument("--selector", required=True)
    p.add_argument("--m", type=pos_int, default=2)
    p.add_argument("--points", type=pos_int, default=1)
    p.add_argument("--trials", type=nonneg_int, default=1000)
    p.add_argument("--witnesses", type=pos_int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--expect-drift", action="store_true")
    common(p)
    p.set_defaults(func=cmd_fiber_probe)
    return parser


def _config(args) -> dict:
    cfg = {}
    for key, value in sorted(vars(args).items()):
        if key in ("func", "out", "record"):
            continue
        if key in ("epsilon", "delta") and value is not None:
            value = f"{value.numerator}/{value.denominator}"
        elif key in ("file", "dist", "table") and value:
            value = [str(Path(v).resolve()) for v in value] if isinstance(value, list) else str(Path(value).resolve())
        cfg[key] = value
    return cfg


def _destination(args):
    if args.out:
        return args.out
    env = os.environ.get(OUTPUT_DIR_ENV)
    if env:
        return os.path.join(env, f"{args.group}-{args.action}.json")
    return None


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.group == "fiber" and args.selector not in fiberprobe.GALLERY:
        parser.error(f"unknown selector {args.selector!r}; choose from {', '.join(fiberprobe.GALLERY)}")

    command = f"{args.group} {args.action}"
    config = _config(args)
    started = time.perf_counter()
    status = EXIT_OK
    try:
        result = args.func(args)
    except Outcome as out:
        result, status = out.result, out.status
    except errors.EmxkitError as exc:
        result = exc.to_dict()
        if isinstance(exc, errors.BudgetExceeded):
            status = EXIT_BUDGET
            result["hint"] = "switch to --mode mc"
        elif isinstance(exc, FINDINGS):
            status = EXIT_FALSE
        else:
            status = EXIT_USAGE
    except (ValueError, OSError) as exc:
        result = {"error": type(exc).__name__, "message": str(exc)}
        status = EXIT_USAGE

    payload = {"command": command, "version": __version__, "config": config, "status": status}
    payload["error" if "error" in result else "result"] = result
    dest = _destination(args)
    if dest:
        _write_json(dest, payload)
    else:
        json.dump(payload, sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
    if status:
        print(f"emxkit: {command} exited with status {status}", file=sys.stderr)
    if args.record:
        record = dict(
            payload,
            timestamp=datetime.now(timezone.utc).isoformat(),
            duration_s=round(time.perf_counter() - started, 6),
        )
        _write_json(args.record, record)
    return status


if __name__ == "__main__":
    sys.exit(main())
