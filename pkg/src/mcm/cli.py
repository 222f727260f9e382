"""Command-line entry point: ``mcm <subcommand> [options]``.

Exit status is 0 when every verdict of the run is ``pass`` or ``match``,
1 on a verdict failure (the first witness goes to stderr) and 2 on usage
errors.  Plain output is the bare JSON result; ``--json`` wraps it with
the run parameters and verdicts; ``--csv`` prints a flat table.
``--manifest PATH`` also writes a RunManifest with wall time and a result
digest, and ``--replay PATH`` re-runs a manifest and compares digests.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
import time
from importlib import metadata, resources
from itertools import combinations

from . import __version__
from .baselocus import characterization_check, full_rank_H_check, merge_full_rank
from .codim import DEFAULT_BUDGET, FAMILIES, estimate_dimension, make_spec
from .errors import MCMError
from .hypersurfaces import (
    HypersurfaceSystem,
    all_rewrites,
    residues_in_ideal,
    sample_system,
    verify_rewrite,
)
from .parallel import WORKERS_ENV, chunks, default_workers, pmap
from .polyring import PolyRing, Ring
from .schedule import (
    MODES,
    MCMConfig,
    MCMSchedule,
    admissible_cr,
    build_schedule,
    closed_form_S,
    degree_bound_report,
    direct_S,
    negativity_report,
    product_decompose,
    validate_full,
    validate_structure,
    very_ample_kappa,
)
from .symforms import identity_suite

PASSING = ("pass", "match")


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- argument parsing


def parse_int(text: str) -> int:
    """Integers written plainly or as ``a^b`` / ``a**b`` / ``1e7``."""
    t = str(text).strip().replace("**", "^")
    try:
        if "^" in t:
            base, exp = t.split("^", 1)
            return int(base) ** int(exp)
        if "e" in t.lower():
            val = float(t)
            if val != int(val):
                raise ValueError
            return int(val)
        return int(t)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None


def parse_int_list(text: str) -> list[int]:
    try:
        return [parse_int(x) for x in str(text).split(",") if x.strip()]
    except argparse.ArgumentTypeError:
        raise argparse.ArgumentTypeError(f"not a comma-separated integer list: {text!r}") from None


def _common(p: argparse.ArgumentParser, seed=True, q=None, samples=None, mode=None) -> None:
    out = p.add_mutually_exclusive_group()
    out.add_argument("--json", action="store_true", help="wrap the result with parameters and verdicts")
    out.add_argument("--csv", action="store_true", help="print a flat CSV table")
    p.add_argument("--manifest", metavar="PATH", help="also write a RunManifest to PATH")
    if seed:
        p.add_argument("--seed", type=parse_int, default=0)
    if q is not None:
        p.add_argument("--q", type=parse_int, default=q)
    if samples is not None:
        p.add_argument("--samples", type=parse_int, default=samples)
    if mode is not None:
        p.add_argument("--mode", choices=MODES, default=mode)


def _config_args(p: argparse.ArgumentParser, required=True) -> None:
    p.add_argument("--N", type=int, required=required)
    p.add_argument("--c", type=int, required=required)
    p.add_argument("--r", type=int, required=required)
    p.add_argument("--heart", type=int, default=1)
    p.add_argument("--eps", type=parse_int_list, default=None, help="comma-separated epsilons")


def _workers_arg(p: argparse.ArgumentParser) -> None:
    p.add_argument("--workers", type=int, default=None,
                   help=f"worker processes (default from ${WORKERS_ENV}, else 1); never changes results")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mcm", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"mcm {__version__}")
    ap.add_argument("--replay", metavar="PATH", help="re-run a saved manifest and compare its digest")
    sub = ap.add_subparsers(dest="command")

    p = sub.add_parser("schedule", help="degree schedule and validator verdicts")
    _config_args(p)
    _common(p, seed=False, mode="tight")

    p = sub.add_parser("bounds", help="closed forms, delta steps, degree sweep, negativity")
    p.add_argument("--Nmin", type=int, default=3)
    p.add_argument("--Nmax", type=int, default=13)
    _config_args(p, required=False)
    _common(p, seed=False, mode="tight")

    p = sub.add_parser("forms", help="gluing, descent, degree and chart-transition identities")
    _config_args(p)
    _common(p, q=10007, samples=50, mode="tight")
    p.add_argument("--allow-small-q", action="store_true")
    _workers_arg(p)

    p = sub.add_parser("rewrite", help="rewrite one sampled system every way and check reassembly")
    _config_args(p, required=False)
    _common(p, q=10007, mode="tight")
    p.add_argument("--load", metavar="PATH", help="read the system from a JSON dump instead of sampling")
    p.add_argument("--dump", metavar="PATH", help="write the sampled system as JSON")
    p.add_argument("--zero-moving", action="store_true")
    p.add_argument("--allow-small-q", action="store_true")

    p = sub.add_parser("codim", help="codimension of a rank-condition family from point counts")
    p.add_argument("--family", choices=FAMILIES, required=True)
    p.add_argument("--p", type=int)
    p.add_argument("--l", type=int)
    p.add_argument("--cols", type=int, help="column count m for Xpq")
    p.add_argument("--N", type=int)
    p.add_argument("--R", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--j", type=int)
    p.add_argument("--budget", type=parse_int, default=DEFAULT_BUDGET)
    p.add_argument("--mc", type=parse_int_list, default=[], help="primes to estimate by Monte Carlo")
    p.add_argument("--q", type=parse_int_list, default=[2, 3, 5, 7], help="comma-separated primes")
    _common(p, samples=10**7)

    p = sub.add_parser("baselocus", help="base-locus characterization or full-rank statistics")
    _config_args(p)
    _common(p, q=10007, samples=500, mode="tight")
    p.add_argument("--eta", type=int, default=0)
    p.add_argument("--full-rank", action="store_true", help="report H full-rank statistics instead")
    p.add_argument("--zero-moving", action="store_true")
    p.add_argument("--allow-small-q", action="store_true")
    _workers_arg(p)

    p = sub.add_parser("decompose", help="p(d+1) + q(d+2) = d0 with p, q >= 0")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--d0", type=int, required=True)
    _common(p, seed=False)

    p = sub.add_parser("kappa", help="very-ampleness constant 16 (sum of both degree lists)^2")
    p.add_argument("--first", type=parse_int_list, required=True, help="degrees of the first c equations")
    p.add_argument("--all", dest="all_degrees", type=parse_int_list, required=True, help="all degrees")
    _common(p, seed=False)
    return ap


# ---------------------------------------------------------------- commands


def _schedule(args):
    if args.N is None or args.c is None or args.r is None:
        raise UsageError("--N, --c and --r are required")
    eps = tuple(args.eps) if args.eps else ()
    return build_schedule(MCMConfig(args.N, args.c, args.r, args.heart, eps), args.mode)


def _verdict(ok: bool) -> str:
    return "pass" if ok else "fail"


def cmd_schedule(args):
    s = _schedule(args)
    errs = validate_structure(s) if s.mode == "mock" else validate_full(s)
    result = {**s.to_dict(), "validator_errors": errs}
    rows = [{"l": l, "k": k, "mu": str(m)} for l in s.levels for k, m in enumerate(s.mu[l])]
    return result, {"validator": _verdict(not errs)}, rows, (errs[0] if errs else None)


def cmd_bounds(args):
    sweep = degree_bound_report(args.Nmin, args.Nmax, args.heart)
    closed_checked = closed_bad = 0
    closed_witness = None
    for N in range(max(2, args.Nmin), args.Nmax + 1):
        for c, r in admissible_cr(N):
            s = build_schedule(MCMConfig(N, c, r, args.heart), "paper9")
            for l in s.levels:
                for k in range(l + 1):
                    closed_checked += 1
                    if closed_form_S(s, l, k) != direct_S(s, l, k):
                        closed_bad += 1
                        closed_witness = closed_witness or {"N": N, "c": c, "r": r, "l": l, "k": k}
    steps = [st for row in sweep["rows"] for pc in row["per_cr"] for st in pc["delta_steps"]]
    stated = [st for st in steps if st["in_stated_range"]]
    replay_ok = all(pc["replay_agrees"] for row in sweep["rows"] for pc in row["per_cr"])
    result = {
        "degree_sweep": sweep,
        "closed_form": {"checked": closed_checked, "mismatches": closed_bad, "first_witness": closed_witness},
        "delta_steps": {"checked": len(steps), "stated_range_checked": len(stated),
                        "stated_range_failures": sum(not st["holds"] for st in stated),
                        "outside_range_failures": sum(not st["holds"] for st in steps if not st["in_stated_range"])},
        "flags": [f"degree bound fails at N={n}" for n in sweep["stated_range_failures"]],
    }
    verdicts = {
        "closed_form": _verdict(closed_bad == 0),
        "replay": _verdict(replay_ok),
        "delta_steps": _verdict(result["delta_steps"]["stated_range_failures"] == 0),
    }
    if args.N is not None:
        neg = negativity_report(_schedule(args))
        result["negativity"] = neg
        verdicts["negativity"] = _verdict(neg["all_negative"])
    rows = [{"N": row["N"], "best_c": row["best_c"], "best_r": row["best_r"], "top": row["top"],
             "bound_holds": row["bound_holds"]} for row in sweep["rows"]]
    witness = closed_witness or (result.get("negativity") or {}).get("first_failures")
    return result, verdicts, rows, witness


def _forms_part(task):
    sched_dict, q, seed, start, count, small = task
    reps = identity_suite(MCMSchedule.from_dict(sched_dict), q, seed, count, start, allow_small_q=small)
    return {k: v.to_dict() for k, v in reps.items()}


def cmd_forms(args):
    s = _schedule(args)
    workers = default_workers() if args.workers is None else args.workers
    tasks = [(s.to_dict(), args.q, args.seed, a, n, args.allow_small_q)
             for a, n in chunks(args.samples, workers)]
    parts = pmap(_forms_part, tasks, workers)
    merged = {}
    for part in parts:
        for name, rep in part.items():
            m = merged.setdefault(name, {"check": name, "samples": 0, "comparisons": 0,
                                         "failures": 0, "first_witness": None})
            m["samples"] += rep["samples"]
            m["comparisons"] += rep["comparisons"]
            m["failures"] += rep["failures"]
            if m["first_witness"] is None:
                m["first_witness"] = rep["first_witness"]
    result = {"schedule": s.to_dict(), "q": args.q, "seed": args.seed, "reports": merged}
    verdicts = {name: _verdict(rep["failures"] == 0 and rep["samples"] > 0) for name, rep in merged.items()}
    rows = [{k: rep[k] for k in ("check", "samples", "comparisons", "failures")} for rep in merged.values()]
    witness = next((rep["first_witness"] for rep in merged.values() if rep["failures"]), None)
    return result, verdicts, rows, witness


def cmd_rewrite(args):
    if args.load:
        with open(args.load) as fh:
            system = HypersurfaceSystem.from_dict(json.load(fh))
    else:
        s = _schedule(args)
        ring = PolyRing(Ring.prime_field(args.q), s.config.N + 1)
        system = sample_system(s, ring, seed=args.seed, zero_moving=args.zero_moving,
                               allow_small_q=args.allow_small_q)
    if args.dump:
        with open(args.dump, "w") as fh:
            fh.write(system.to_json())
    cfg = system.config
    checks = []
    witness = None
    for eta in range(cfg.n):
        for vset in combinations(range(cfg.N + 1), eta):
            for rw in all_rewrites(system, vset):
                chk = verify_rewrite(system, rw)
                ideal = residues_in_ideal(system, rw)
                checks.append({"variant": rw.tag(), "eta": eta, "residual_zero": chk.ok,
                               "residues_in_ideal": ideal})
                if witness is None and not (chk.ok and ideal):
                    witness = {"variant": rw.tag(), "residuals": list(chk.residuals)}
    result = {"schedule": system.schedule.to_dict(), "q": system.ring.coeff.q, "seed": system.seed,
              "rewrites": checks}
    verdicts = {
        "reassembly": _verdict(all(c["residual_zero"] for c in checks)),
        "residues": _verdict(all(c["residues_in_ideal"] for c in checks)),
    }
    return result, verdicts, checks, witness


def cmd_codim(args):
    kw = {k: getattr(args, k) for k in ("p", "l", "cols", "N", "R", "k", "j") if getattr(args, k) is not None}
    spec = make_spec(args.family, **kw)
    est = estimate_dimension(spec, args.q, budget=args.budget, seed=args.seed,
                             mc_samples=args.samples, monte_carlo=tuple(args.mc))
    result = est.to_dict()
    rows = []
    for q, v in result["counts"].items():
        rows.append({"q": q, "method": v["method"], "count": v.get("count", v.get("estimate")),
                     "samples": v.get("samples", ""), "hits": v.get("hits", "")})
    witness = None if est.verdict == "match" else {"fitted_codim": result["fitted_codim"],
                                                   "expected_codim": result["expected_codim"]}
    return result, {"codim": est.verdict}, rows, witness


def _baselocus_part(task):
    sched_dict, q, seed, eta, start, count, full, zero_moving, small = task
    s = MCMSchedule.from_dict(sched_dict)
    if full:
        return full_rank_H_check(s, q, count, seed, eta, zero_moving, small, start=start)
    return characterization_check(s, q, count, seed, eta, start=start)


def cmd_baselocus(args):
    s = _schedule(args)
    if not 0 <= args.eta <= s.config.n - 1:
        raise UsageError(f"--eta must lie in [0, {s.config.n - 1}]")
    workers = default_workers() if args.workers is None else args.workers
    tasks = [(s.to_dict(), args.q, args.seed, args.eta, a, n, args.full_rank, args.zero_moving,
              args.allow_small_q) for a, n in chunks(args.samples, workers)]
    parts = pmap(_baselocus_part, tasks, workers)
    if args.full_rank:
        result = merge_full_rank(parts)
        frac = result["fraction_full_rank"].get("all", 0.0)
        verdicts = {"full_rank": _verdict(frac >= 0.99),
                    "column_sum": _verdict(result["column_sum_failures"] == 0)}
        rows = [{"matrix": k, "full_rank": v, "fraction": result["fraction_full_rank"][k]}
                for k, v in result["full_rank"].items()]
        return result, verdicts, rows, None
    rep = parts[0]
    for other in parts[1:]:
        rep.merge(other)
    result = rep.to_dict()
    rows = [{"key": k, "value": result[k]} for k in ("samples", "agreements", "failures", "vanish_and_member",
                                                     "vanish_not_member", "member_not_vanish", "neither",
                                                     "engineered", "filtered_out")]
    return result, {"equivalence": result["verdict"]}, rows, (rep.witnesses[0] if rep.witnesses else None)


def cmd_decompose(args):
    pq = product_decompose(args.d, args.d0)
    result = None if pq is None else list(pq)
    rows = [] if pq is None else [{"p": pq[0], "q": pq[1]}]
    return result, {}, rows, None


def cmd_kappa(args):
    k = very_ample_kappa(args.first, args.all_degrees)
    return k, {}, [{"kappa": k}], None


COMMANDS = {
    "schedule": cmd_schedule,
    "bounds": cmd_bounds,
    "forms": cmd_forms,
    "rewrite": cmd_rewrite,
    "codim": cmd_codim,
    "baselocus": cmd_baselocus,
    "decompose": cmd_decompose,
    "kappa": cmd_kappa,
}

OUTPUT_KEYS = ("json", "csv", "manifest", "command", "replay", "workers", "dump")


# ---------------------------------------------------------------- output


def params_of(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in OUTPUT_KEYS}


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def digest(result) -> str:
    return hashlib.sha256(dumps(result).encode()).hexdigest()


def tool_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return __version__


def envelope(command: str, args, result, verdicts: dict) -> dict:
    return {
        "command": command,
        "params": params_of(args),
        "seed": getattr(args, "seed", None),
        "version": tool_version(),
        "verdicts": verdicts,
        "result": result,
    }


def to_csv(rows: list) -> str:
    buf = io.StringIO()
    if rows:
        fields = list(rows[0])
        for row in rows[1:]:
            fields += [k for k in row if k not in fields]
        w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    return buf.getvalue()


def load_schema(name: str) -> dict:
    """Shipped JSON schema for a command result, "run" or "manifest"."""
    return json.loads(resources.files("mcm").joinpath("schemas", f"{name}.schema.json").read_text())


def overall_ok(verdicts: dict) -> bool:
    return all(v in PASSING for v in verdicts.values())


def execute(args):
    """Run one parsed command; returns (result, verdicts, rows, witness, wall seconds)."""
    t0 = time.perf_counter()
    result, verdicts, rows, witness = COMMANDS[args.command](args)
    return result, verdicts, rows, witness, time.perf_counter() - t0


def replay(path: str, out) -> int:
    with open(path) as fh:
        man = json.load(fh)
    args = build_parser().parse_args(man["argv"])
    result, verdicts, _, _, _ = execute(args)
    same = digest(result) == man["result_sha256"] and verdicts == man["verdicts"]
    out.write(dumps({"manifest": path, "reproduced": same, "verdicts": verdicts}) + "\n")
    return 0 if same else 1


def main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.replay:
            return replay(args.replay, out)
        if not args.command:
            parser.print_usage(err)
            return 2
        result, verdicts, rows, witness, wall = execute(args)
    except UsageError as exc:
        parser.print_usage(err)
        err.write(f"mcm: error: {exc}\n")
        return 2
    except MCMError as exc:
        err.write(f"mcm: error: {type(exc).__name__}: {exc}\n")
        return 2
    except OSError as exc:
        err.write(f"mcm: error: {exc}\n")
        return 2
    if args.json:
        out.write(dumps(envelope(args.command, args, result, verdicts)) + "\n")
    elif args.csv:
        out.write(to_csv(rows))
    else:
        out.write(dumps(result) + "\n")
    if args.manifest:
        man = {**envelope(args.command, args, None, verdicts), "argv": argv,
               "result_sha256": digest(result), "wall_time": round(wall, 3)}
        del man["result"]
        with open(args.manifest, "w") as fh:
            fh.write(json.dumps(man, sort_keys=True, indent=2) + "\n")
    ok = overall_ok(verdicts)
    if not ok:
        first_bad = next(k for k, v in verdicts.items() if v not in PASSING)
        err.write(f"verdict {first_bad}: {verdicts[first_bad]}\n")
        if witness is not None:
            err.write("first witness: " + dumps(witness) + "\n")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
