"""Command-line interface: deterministic runs, the two demo applications,
and config inspection.

Errors exit nonzero with a single machine-readable line on stderr:
``error: <category>: <detail>``.
"""

from __future__ import annotations

import argparse
import sys

from . import apps
from .netio import (
    ConfigError,
    NetworkDescription,
    StimulusTrace,
    load_network,
    run,
    save_cycles,
    save_raster,
)
from .processor import hierarchy_op_reduction, synapse_count


def _cmd_run(args) -> int:
    desc = load_network(args.config)
    stim = StimulusTrace.load(args.stimulus) if args.stimulus else None
    raster, rows, agg = run(desc, stim, steps=args.steps, seed=args.seed)
    save_raster(args.raster_out, raster)
    if args.cycles_out:
        save_cycles(args.cycles_out, rows)
    print(
        f"steps={agg.timesteps} spikes={len(raster)} "
        f"cycles_parallel={agg.total_parallel} cycles_serial={agg.total_serial} "
        f"timesteps_per_sec={agg.timesteps_per_sec(desc.clock_hz):.0f}"
    )
    return 0


def _cmd_sudoku(args) -> int:
    if args.puzzle:
        with open(args.puzzle) as f:
            puzzle = apps.SudokuPuzzle.from_text(f.read())
        if puzzle.n != args.n:
            raise ValueError(f"puzzle is {puzzle.n}x{puzzle.n}, --n says {args.n}")
    else:
        puzzle = apps.random_puzzle(args.n, seed=args.seed)
    result = apps.solve_sudoku(puzzle, seed=args.seed, max_steps=args.max_steps)
    if result.solved:
        print(f"solved steps={result.steps} cycles={result.cycles.total_parallel}")
        for row in result.grid:
            print(" ".join(str(d) for d in row))
        return 0
    print(f"unsolved steps={result.steps}", file=sys.stderr)
    return 1


def _cmd_avoid(args) -> int:
    desc = apps.build_avoidance_network()
    stim = StimulusTrace.load(args.stimulus)
    steps = args.windows * args.window_steps
    raster, _, agg = run(desc, stim, steps=steps, seed=args.seed)
    win = apps.DecisionWindow(window_steps=args.window_steps)
    for idx, direction, tie, counts in apps.decide_windows(raster, steps, win):
        print(f"{idx},{direction},{int(tie)}," + ",".join(str(c) for c in counts))
    per_decision = agg.total_parallel / max(args.windows, 1)
    print(f"# cycles_per_decision={per_decision:.0f}", file=sys.stderr)
    return 0


def _cmd_inspect(args) -> int:
    desc = load_network(args.config)
    t1 = desc.npu1.total_neurons
    t2 = desc.npu2.total_neurons
    words = desc.weights1.shape[0] * -(-t1 // 8) + desc.weights2.shape[0] * -(-t2 // 8)
    print(f"npu1_neurons={t1} npu2_neurons={t2}")
    print(f"synapse_count={synapse_count(t1, t2)}")
    print(f"hierarchy_op_reduction={hierarchy_op_reduction(t1, t2):.4f}")
    print(f"weight_memory_words={words}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="snnemu")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="execute a network for a number of timesteps")
    r.add_argument("--config", required=True)
    r.add_argument("--stimulus")
    r.add_argument("--steps", type=int, required=True)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--raster-out", required=True)
    r.add_argument("--cycles-out")
    r.set_defaults(func=_cmd_run)

    s = sub.add_parser("sudoku", help="solve a puzzle with the constraint network")
    s.add_argument("--n", type=int, default=4)
    s.add_argument("--puzzle", help="text grid, 0 or . for blanks")
    s.add_argument("--max-steps", type=int, default=100_000)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=_cmd_sudoku)

    a = sub.add_parser("avoid", help="decide motion directions from a stimulus trace")
    a.add_argument("--stimulus", required=True)
    a.add_argument("--windows", type=int, default=1)
    a.add_argument("--window-steps", type=int, default=50)
    a.add_argument("--seed", type=int, default=0)
    a.set_defaults(func=_cmd_avoid)

    i = sub.add_parser("inspect", help="print network statistics")
    i.add_argument("--config", required=True)
    i.set_defaults(func=_cmd_inspect)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"error: config: {e}", file=sys.stderr)
        return 2
    except (ValueError, IndexError, OSError) as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
