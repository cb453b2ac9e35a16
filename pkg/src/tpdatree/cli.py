"""Command-line entry point: ``tpdatree <command> ...``.

Exit status is 0 whenever a question was decided (EMPTY and NONEMPTY alike),
2 when the search hit its state cap and 1 on bad input.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .engine import EngineOptions, check_emptiness, verify_witness
from .mazegen import MazeError, cargo_maze, load_maze, maze_to_tpda
from .model import ParseError, compute_constants, load_system, print_system
from .oracle import oracle_check
from .tcw import tcw_from_json, tcw_to_json
from .treeterm import DecomposeError, TermError, decompose, is_restricted, term_to_text, width

EXIT_OK, EXIT_INPUT, EXIT_CAPPED = 0, 1, 2


def _params(items) -> dict:
    out = {}
    for item in items or ():
        name, sep, value = item.partition("=")
        if not sep or not value.isdigit():
            raise ValueError(f"bad --param '{item}', expected name=integer")
        out[name.strip()] = int(value)
    return out


def _pairs(sys_, run, ts) -> list:
    ts = tuple(ts)
    states = [sys_.initial] + [t.target for t in run]
    return list(zip(states, ts[-len(states):]))


def _fmt_pairs(pairs) -> str:
    return " -> ".join(f"({s}, {float(t)})" for s, t in pairs)


def witness_json(sys_, verdict) -> dict:
    w = verdict.witness
    out = {"status": verdict.status, "stats": verdict.stats, "witness": None}
    if w is not None:
        out["witness"] = {
            "run": [{"tid": t.tid, "source": t.source, "target": t.target, "label": t.label} for t in w.run],
            "ts": list(w.ts),
            "pairs": [[s, t] for s, t in _pairs(sys_, w.run, w.ts)],
            "tcw": tcw_to_json(w.tcw, w.ts),
            "term": term_to_text(w.term) if w.term is not None else None,
        }
    return out


def _options(args) -> EngineOptions:
    return EngineOptions(
        K=args.K,
        canonical=not args.no_canonical,
        aggressive=args.aggressive,
        state_cap=args.state_cap,
        threads=args.threads,
        trace=(lambda kind, st: print(f"[{kind}] {st}", file=sys.stderr)) if args.trace else None,
    )


def _load_input(path, params):
    """A system file, or a maze description (by suffix) translated on the fly."""
    if str(path).endswith(".maze"):
        return maze_to_tpda(load_maze(path), params)
    return load_system(path)


def cmd_check(args) -> int:
    sys_ = _load_input(args.input, _params(args.param))
    verdict = check_emptiness(sys_, _options(args))
    if args.json:
        print(json.dumps(witness_json(sys_, verdict), indent=2, sort_keys=True))
    else:
        print(verdict.status)
        if args.witness and verdict.witness is not None:
            print(_fmt_pairs(_pairs(sys_, verdict.witness.run, verdict.witness.ts)))
        if args.dump_term and verdict.witness is not None and verdict.witness.term is not None:
            print(term_to_text(verdict.witness.term))
        if args.stats:
            print(" ".join(f"{k}={v}" for k, v in verdict.stats.items()))
    return EXIT_CAPPED if verdict.status == "UNDECIDED-CAPPED" else EXIT_OK


def cmd_oracle(args) -> int:
    sys_ = _load_input(args.input, _params(args.param))
    res = oracle_check(sys_, args.max_len)
    if args.json:
        print(json.dumps({"status": res.status, "bound": res.bound, "explored": res.explored,
                          "pairs": [[s, t] for s, t in _pairs(sys_, res.run, res.ts)] if res.ts else []},
                         indent=2, sort_keys=True))
    else:
        print(res.status if res.status != "EMPTY_UPTO" else f"EMPTY_UPTO {res.bound}")
        if args.witness and res.status == "NONEMPTY":
            print(_fmt_pairs(_pairs(sys_, res.run, res.ts)))
    return EXIT_OK


def cmd_maze(args) -> int:
    maze = load_maze(args.input)
    sys_ = maze_to_tpda(maze, _params(args.param))
    text = print_system(sys_)
    if args.output:
        Path(args.output).write_text(text)
    else:
        print(text, end="")
    return EXIT_OK


def cmd_decompose(args) -> int:
    tcw, _ = tcw_from_json(Path(args.input).read_text())
    clocks = sorted({e.clock for e in tcw.edges if e.kind == "clock"})
    term = decompose(tcw, args.K, clocks=clocks)
    if args.json:
        print(json.dumps({"term": term_to_text(term), "width": width(term),
                          "restricted": is_restricted(term)}, indent=2, sort_keys=True))
    else:
        print(term_to_text(term))
        if args.stats:
            print(f"width={width(term)} restricted={is_restricted(term)}")
    return EXIT_OK


def cmd_verify(args) -> int:
    sys_ = _load_input(args.input, _params(args.param))
    data = json.loads(Path(args.witness_file).read_text())
    w = data.get("witness", data)
    by_id = {t.tid: t for t in sys_.transitions}
    try:
        run = [by_id[int(step["tid"])] for step in w["run"]]
    except (KeyError, TypeError, ValueError):
        print("INVALID: witness refers to unknown transitions")
        return EXIT_INPUT
    res = verify_witness(sys_, run, w["ts"])
    print("VALID" if res else f"INVALID: {res.reason}")
    return EXIT_OK if res else EXIT_INPUT


def bench_rows(constants, maze=None, opts=None) -> list:
    """One row per c: the cargo maze with m=c and n=c+1, with the system's largest constant.

    The fixed corridor bounds dominate for small c, so ``constant`` only grows once n exceeds them.
    """
    maze = maze or cargo_maze()
    rows = []
    for c in constants:
        sys_ = maze_to_tpda(maze, {"m": c, "n": c + 1})
        v = check_emptiness(sys_, opts or EngineOptions())
        rows.append({"m": c, "constant": compute_constants(sys_).M - 1, "reached_states": v.stats["reached_states"],
                     "time_ms": v.stats["time_ms"], "status": v.status})
    return rows


def write_bench(rows, out_dir) -> tuple:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path, png_path = out_dir / "bench.csv", out_dir / "bench.png"
    with open(csv_path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["m", "constant", "reached_states", "time_ms", "status"])
        w.writeheader()
        w.writerows(rows)
    fig, ax1 = plt.subplots(figsize=(5, 3.2))
    xs = [r["m"] for r in rows]
    ax1.plot(xs, [r["reached_states"] for r in rows], "o-", color="tab:blue")
    ax1.set_xlabel("m (n = m + 1)")
    ax1.set_ylabel("reached states", color="tab:blue")
    ax2 = ax1.twinx()
    ax2.plot(xs, [r["time_ms"] / 1000 for r in rows], "s--", color="tab:red")
    ax2.set_ylabel("time (s)", color="tab:red")
    ax1.set_title("cargo maze")
    fig.tight_layout()
    fig.savefig(png_path, dpi=120)
    plt.close(fig)
    return csv_path, png_path


def cmd_bench(args) -> int:
    lo, _, hi = args.constants.partition("..")
    constants = range(int(lo), int(hi or lo) + 1)
    maze = load_maze(args.input) if args.input else None
    rows = bench_rows(constants, maze, _options(args))
    csv_path, png_path = write_bench(rows, args.out_dir)
    if args.json:
        print(json.dumps(rows, indent=2))
    else:
        for r in rows:
            print(f"{r['m']},{r['constant']},{r['reached_states']},{r['time_ms']},{r['status']}")
        print(f"wrote {csv_path} and {png_path}", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tpdatree", description="Emptiness of timed pushdown automata via tree automata.")
    sub = p.add_subparsers(dest="command", required=True)

    def engine_flags(sp):
        sp.add_argument("--state-cap", type=int, default=5_000_000)
        sp.add_argument("--K", type=int, default=None, help="color budget (default depends on the system)")
        sp.add_argument("--aggressive", action=argparse.BooleanOptionalAction, default=True,
                        help="forget internal points greedily after each step")
        sp.add_argument("--no-canonical", action="store_true", help="explicit colors with renaming (slow, for debugging)")
        sp.add_argument("--trace", action="store_true", help="log every new state to stderr")
        sp.add_argument("--threads", type=int, default=1)

    def common(sp):
        sp.add_argument("--json", action="store_true")
        sp.add_argument("--param", action="append", metavar="k=v", help="maze parameter binding")

    sp = sub.add_parser("check", help="decide emptiness")
    sp.add_argument("input")
    sp.add_argument("--witness", action="store_true")
    sp.add_argument("--stats", action="store_true")
    sp.add_argument("--dump-term", action="store_true")
    engine_flags(sp)
    common(sp)
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("oracle", help="bounded brute-force search")
    sp.add_argument("input")
    sp.add_argument("--max-len", type=int, default=None)
    sp.add_argument("--witness", action="store_true")
    common(sp)
    sp.set_defaults(func=cmd_oracle)

    sp = sub.add_parser("maze", help="translate a maze description into a system file")
    sp.add_argument("input")
    sp.add_argument("-o", "--output")
    common(sp)
    sp.set_defaults(func=cmd_maze)

    sp = sub.add_parser("decompose", help="tree term of a TCW given as JSON")
    sp.add_argument("input")
    sp.add_argument("--K", type=int, default=None)
    sp.add_argument("--stats", action="store_true")
    sp.add_argument("--json", action="store_true")
    sp.set_defaults(func=cmd_decompose)

    sp = sub.add_parser("verify", help="replay a witness JSON against a system")
    sp.add_argument("input")
    sp.add_argument("witness_file")
    common(sp)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("bench", help="sweep the maze constant; writes CSV and PNG")
    sp.add_argument("input", nargs="?", default=None, help="maze with parameters m and n (default: bundled cargo maze)")
    sp.add_argument("--constants", default="2..6", help="range lo..hi for m (n = m + 1)")
    sp.add_argument("--out-dir", default="bench_out")
    engine_flags(sp)
    common(sp)
    sp.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, MazeError, TermError, DecomposeError, ValueError, OSError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
