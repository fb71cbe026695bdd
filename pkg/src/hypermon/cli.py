"""Command-line front end.

Exit codes: 0 satisfied, 1 violated, 2 inconclusive (unknown, gave up or
timed out), 3 formula or specification error, 4 I/O error, 5 usage error.
The last line printed by ``monitor`` and ``oracle eval`` is a JSON report.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

from . import oracle
from .errors import GeneratorError, HypermonError, SpecificationError, UpdateError
from .formula import atoms, parse, pretty
from .generators import GeneratorObject, GenSpec, build
from .monitor import Monitor, MonitorConfig
from .trace_model import DataDomain, Observation, apply_jsonl_line, generic_domain, load_traces, write_jsonl
from .transducer import compile_atom
from .verdict import Verdict

EXIT_TRUE, EXIT_FALSE, EXIT_INCONCLUSIVE, EXIT_SPEC, EXIT_IO, EXIT_USAGE = 0, 1, 2, 3, 4, 5

STATUS_LABEL = {
    "true": "SATISFIED",
    "false": "VIOLATED",
    "unknown": "UNKNOWN",
    "unknown-gave-up": "UNKNOWN-GAVE-UP",
    "timeout": "TIMEOUT",
}

log = logging.getLogger("hypermon")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------------------
# helpers


def _read_meta(path: str | None) -> dict:
    if not path:
        return {}
    p = Path(path)
    meta = (p if p.is_dir() else p.parent) / "meta.json"
    if meta.exists():
        return json.loads(meta.read_text(encoding="utf-8"))
    return {}


def _domain(name: str | None, meta: dict, obs: Observation | None, vars_: str | None = None) -> DataDomain:
    name = name or meta.get("domain")
    if vars_ and name in (None, "generic"):
        return DataDomain(vars_.split(","), name="generic")
    if name == "robot":
        from .scenarios.robot import robot_domain

        return robot_domain()
    if name == "queue":
        from .scenarios.queue import queue_domain

        return queue_domain()
    if name in (None, "generic"):
        if meta.get("variables"):
            return DataDomain(meta["variables"], name="generic")
        return generic_domain(obs.traces if obs is not None else ())
    raise UsageError(f"unknown domain {name!r} (choose robot, queue or generic)")


def _system(meta: dict):
    if "system" not in meta:
        return None
    from .scenarios.robot import system_from_json

    return system_from_json(meta["system"])


def _generators(specs: list[str], meta: dict, seed: int) -> dict[str, GeneratorObject]:
    system = _system(meta)
    gens = {}
    for text in specs or []:
        spec = GenSpec.parse(text)
        gens[spec.name] = build(spec, system, seed)
    return gens


def _formula_text(arg: str) -> str:
    if os.path.exists(arg):
        return Path(arg).read_text(encoding="utf-8")
    return arg


def _emit(report: dict, out: str | None) -> None:
    line = json.dumps(report, sort_keys=True)
    if out:
        Path(out).write_text(line + "\n", encoding="utf-8")
    print(line)


def _exit_for(status: str) -> int:
    return {"true": EXIT_TRUE, "false": EXIT_FALSE}.get(status, EXIT_INCONCLUSIVE)


# ---------------------------------------------------------------------------
# monitor


def cmd_monitor(args) -> int:
    if not args.traces and not args.stream:
        raise UsageError("monitor needs --traces or --stream")
    meta = _read_meta(args.traces or (args.stream if args.stream != "-" else None))
    gens = _generators(args.gen, meta, args.seed)
    config = MonitorConfig(
        timeout=args.timeout,
        give_up=args.give_up,
        budget=args.budget,
        allow_passive_alternation=args.allow_passive_alternation,
    )
    text = _formula_text(args.formula)
    if args.traces:
        obs = load_traces(args.traces)
        dom = _domain(args.domain, meta, obs, args.vars)
        phi = parse(text, dom, generators=set(gens))
        m = Monitor(phi, obs, gens, dom, config)
        res = m.run()
        status, verdict, stats, elapsed = res.status, res.verdict, res.stats, res.elapsed
    else:
        if not args.vars and args.domain in (None, "generic") and not meta:
            raise UsageError("--stream needs --domain or --vars (an empty stream shows no variables)")
        dom = _domain(args.domain, meta, None, args.vars)
        phi = parse(text, dom, generators=set(gens))
        obs = Observation()
        m = Monitor(phi, obs, gens, dom, config)
        status, elapsed = _run_stream(m, obs, args.stream, args.timeout)
        verdict, stats = m.verdict, m.stats
    print(f"verdict: {STATUS_LABEL[status]}")
    if verdict.conclusive and m.witness:
        print("witness: " + ", ".join(f"{k}={v}" for k, v in m.witness.items()))
    if args.stats:
        for k, v in stats.as_dict().items():
            print(f"  {k}: {v}")
        print(f"  elapsed: {elapsed:.3f}s")
    report = {
        "verdict": verdict.value,
        "status": STATUS_LABEL[status],
        "witness": m.witness if verdict.conclusive else None,
        "formula": pretty(phi),
        "traces": len(obs),
    }
    if args.stats:
        report["stats"] = stats.as_dict()
        report["elapsed"] = round(elapsed, 6)
    _emit(report, args.out)
    return _exit_for(status)


def _run_stream(m: Monitor, obs: Observation, path: str, timeout: float | None) -> tuple[str, float]:
    """Tail a JSON Lines file (``-`` for stdin) until closure and a stable verdict."""
    start = time.perf_counter()
    fh = sys.stdin if path == "-" else open(path, encoding="utf-8")
    try:
        idle = 0
        while True:
            line = fh.readline()
            if line:
                apply_jsonl_line(obs, line)
                idle = 0
            else:
                idle += 1
            before = m._fingerprint()
            v = m.step()
            if v.conclusive or v is Verdict.UNKNOWN_GAVE_UP:
                return v.value, time.perf_counter() - start
            if timeout is not None and time.perf_counter() - start > timeout:
                return "timeout", time.perf_counter() - start
            if not line:
                if obs.closed and m._fingerprint() == before:
                    return v.value, time.perf_counter() - start
                if path == "-" and idle > 1:
                    # stdin reached EOF: nothing else will arrive
                    obs.close()
                time.sleep(0.02 if idle > 1 else 0)
    finally:
        if fh is not sys.stdin:
            fh.close()


# ---------------------------------------------------------------------------
# oracle


def cmd_oracle(args) -> int:
    meta = _read_meta(args.traces)
    obs = load_traces(args.traces)
    dom = _domain(args.domain, meta, obs, args.vars)
    gens = _generators(args.gen, meta, args.seed)
    phi = parse(_formula_text(args.formula), dom, require_simple=False, generators=set(gens))
    interp = {k: g.__call__ for k, g in gens.items()}
    if args.action == "eval":
        ok = oracle.evaluate(phi, obs.traces, dom, interp)
        print(f"oracle: {'SATISFIED' if ok else 'VIOLATED'}")
        _emit({"verdict": "true" if ok else "false", "traces": len(obs)}, args.out)
        return EXIT_TRUE if ok else EXIT_FALSE
    alphabet = json.loads(args.alphabet) if args.alphabet else _alphabet(obs)
    cls = oracle.classify_observation(
        phi, obs.traces, dom, alphabet, interp, args.max_events, args.max_new_traces, obs.closed and args.closed
    )
    print(f"classification: {cls}")
    _emit({"classification": cls}, args.out)
    return {oracle.GOOD: EXIT_TRUE, oracle.BAD: EXIT_FALSE}.get(cls, EXIT_INCONCLUSIVE)


def _alphabet(obs: Observation) -> list:
    seen = []
    for t in obs.traces:
        for v in t.events:
            if v not in seen:
                seen.append(v)
    return seen


# ---------------------------------------------------------------------------
# generation, compilation, benchmarks


def cmd_gen(args) -> int:
    from .scenarios import queue as q
    from .scenarios import robot as r

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.kind == "od":
        wl = r.gen_od_traces(args.seed, args.inputs or 4, args.count, leak=args.leak)
        traces, meta = wl.traces, {**wl.meta(), "domain": "robot"}
    elif args.kind == "opacity":
        wl = r.gen_opacity_traces(args.seed, args.inputs or 8, args.count, opaque=args.mode != "bug")
        traces, meta = wl.traces, {**wl.meta(), "domain": "robot"}
    else:
        traces = q.gen_queue_histories(args.seed, args.nops, args.count, args.jitter, args.mode)
        meta = {"domain": "queue", "nops": args.nops, "mode": args.mode}
    with open(out / "traces.jsonl", "w", encoding="utf-8") as fh:
        write_jsonl(traces, fh, close=True)
    (out / "meta.json").write_text(json.dumps(meta, sort_keys=True, indent=1) + "\n", encoding="utf-8")
    print(f"wrote {len(traces)} traces to {out}")
    return 0


def cmd_compile(args) -> int:
    meta = _read_meta(args.traces)
    dom = _domain(args.domain, meta, load_traces(args.traces) if args.traces else None)
    if dom.name == "generic" and not dom.system_vars and args.vars:
        dom = DataDomain(args.vars.split(","), name="generic")
    text = _formula_text(args.formula)
    try:
        phi = parse(text, dom, generators=None)
        atom_list = list(dict.fromkeys(atoms(phi)))
    except SpecificationError:
        from .formula import Leq, parse_trace_formula

        left, _, right = text.partition("<=")
        if not right:
            raise
        atom_list = [Leq(parse_trace_formula(left), parse_trace_formula(right))]
    for i, a in enumerate(atom_list):
        A = compile_atom(a, dom)
        print(f"== atom {i}: {len(A.registers)} register(s), {A.sync.n_states} state(s)")
        if args.dump_automaton:
            print(A.dump())
    return 0


def cmd_bench(args) -> int:
    from .scenarios import bench

    if args.kind == "od":
        rows = bench.od_bench(args.trials, (None, 1, 5), args.inputs or 4, args.seed, args.give_up)
    else:
        nops = [int(x) for x in args.nops_list.split(",")] if args.nops_list else [8, 16, 32]
        rows = bench.queue_bench(nops, args.seed, args.count)
    table = bench.csv_table(rows) if args.format == "csv" else bench.markdown_table(rows)
    print(table)
    if args.out:
        Path(args.out).write_text(table + "\n", encoding="utf-8")
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hypermon", description="Runtime monitor for hyperproperties with generator functions.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp, traces_required=False):
        sp.add_argument("--formula", required=True, help="formula text or a file containing it")
        sp.add_argument("--traces", required=traces_required, help="JSON Lines file or directory of them")
        sp.add_argument("--gen", action="append", default=[], metavar="NAME=BUILTIN[:k=v,...]")
        sp.add_argument("--domain", choices=["robot", "queue", "generic"])
        sp.add_argument("--vars", help="comma-separated system variables for a generic domain")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out")

    m = sub.add_parser("monitor", help="monitor a formula over traces")
    common(m)
    m.add_argument("--stream", help="tail a JSON Lines file ('-' for stdin) until {\"close\": true}")
    m.add_argument("--timeout", type=_positive_float, default=30.0)
    m.add_argument("--give-up", type=_positive_int, default=2048)
    m.add_argument("--budget", type=_positive_int, default=20000, help="work units per monitor step")
    m.add_argument("--stats", action="store_true")
    m.add_argument("--allow-passive-alternation", action="store_true")
    m.set_defaults(func=cmd_monitor)

    o = sub.add_parser("oracle", help="brute-force reference semantics")
    o.add_argument("action", choices=["eval", "classify"])
    common(o, traces_required=True)
    o.add_argument("--alphabet", help="JSON list of valuations for extensions")
    o.add_argument("--max-events", type=int, default=2)
    o.add_argument("--max-new-traces", type=int, default=1)
    o.add_argument("--closed", action="store_true")
    o.set_defaults(func=cmd_oracle)

    g = sub.add_parser("gen", help="generate scenario traces")
    g.add_argument("kind", choices=["od", "opacity", "queue"])
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--inputs", type=int)
    g.add_argument("--count", type=int, default=100)
    g.add_argument("--nops", type=int, default=3)
    g.add_argument("--jitter", type=float, default=1.0)
    g.add_argument("--leak", type=float, default=0.5)
    g.add_argument("--mode", choices=["correct", "bug"], default="correct")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    c = sub.add_parser("compile", help="compile the atoms of a formula")
    c.add_argument("--formula", required=True)
    c.add_argument("--traces")
    c.add_argument("--domain", choices=["robot", "queue", "generic"])
    c.add_argument("--vars", help="comma-separated system variables for a generic domain")
    c.add_argument("--dump-automaton", action="store_true")
    c.set_defaults(func=cmd_compile)

    b = sub.add_parser("bench", help="reproduce the experiment tables")
    b.add_argument("kind", choices=["od", "queue"])
    b.add_argument("--trials", type=int, default=10)
    b.add_argument("--inputs", type=int)
    b.add_argument("--nops", dest="nops_list", help="comma-separated, e.g. 8,16,32")
    b.add_argument("--count", type=int, default=1)
    b.add_argument("--give-up", type=_positive_int, default=2048)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--format", choices=["md", "csv"], default="md")
    b.add_argument("--out")
    b.set_defaults(func=cmd_bench)
    return p


def _positive_float(s: str) -> float:
    v = float(s)
    if v <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _positive_int(s: str) -> int:
    v = int(s)
    if v <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=os.environ.get("HYPERMON_LOG", "WARNING").upper(), format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "func", None):
            raise UsageError("missing command")
        return args.func(args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except (SpecificationError, GeneratorError) as e:
        print(f"formula error: {e}", file=sys.stderr)
        return EXIT_SPEC
    except (OSError, UpdateError, json.JSONDecodeError, KeyError) as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return EXIT_IO
    except HypermonError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_SPEC


if __name__ == "__main__":
    sys.exit(main())
