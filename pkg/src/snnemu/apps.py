"""Demo applications on top of the processor: Sudoku constraint solving via
winner-take-all competition, 8-direction avoidance decisions, and the neuron
behavior sweep harness.

Sudoku mapping: one neuron per (cell, digit) in NPU2. Conflicting assignments
(same cell/different digit; same digit in a row, column, or box) inhibit each
other, every neuron excites itself, clue neurons receive a strong constant
stimulus, and all other neurons receive seeded noise. Boxes exist only when
the side length is a perfect square (4 -> 2x2 boxes); 2x2, 3x3 and 5x5 grids
are solved as Latin squares.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .neuron import NeuronParams, NeuronState, neuron_step
from .npu import ExternalEvent, GlobalNeuronConfig, NpuConfig
from .netio import (
    DcSource,
    Lcg,
    NetworkDescription,
    NoiseSource,
    StimulusTrace,
)
from .processor import CycleReport

# Pure-integrator neuron: drift is zero everywhere, the membrane just sums
# the synaptic current until it overflows.
INTEGRATOR = NeuronParams(a_num=0, b_num=0, v_r=0, v_t=255, v_reset=0)
# Leaky variant: strong pull toward 0 below the switch point, mild drag above.
LEAKY = NeuronParams(a_num=4, b_num=1, v_r=0, v_t=255, v_reset=0)


class NoDecisionError(ValueError):
    """Raised when a decode window contains no usable spikes."""


def _next_pow2(n: int) -> int:
    return 1 << max(0, (n - 1).bit_length())


# ---------------------------------------------------------------------------
# Sudoku

@dataclass
class SudokuPuzzle:
    n: int
    clues: list[tuple[int, int, int]]  # (row, col, digit 1..n)

    def __post_init__(self):
        if not 2 <= self.n <= 5:
            raise ValueError(f"side length must be 2..5, got {self.n}")
        seen = {}
        for r, c, d in self.clues:
            if not (0 <= r < self.n and 0 <= c < self.n and 1 <= d <= self.n):
                raise ValueError(f"clue out of range: {(r, c, d)}")
            if seen.get((r, c), d) != d:
                raise ValueError(f"conflicting clues at cell {(r, c)}")
            seen[(r, c)] = d
        for (r1, c1, d1) in self.clues:
            for (r2, c2, d2) in self.clues:
                if (r1, c1) >= (r2, c2):
                    continue
                if d1 == d2 and _same_unit(self.n, r1, c1, r2, c2):
                    raise ValueError(
                        f"inconsistent clues: digit {d1} at {(r1, c1)} and {(r2, c2)}"
                    )

    @classmethod
    def from_text(cls, text: str) -> "SudokuPuzzle":
        """Parse a text grid, 0 (or .) for blanks, whitespace-separated."""
        rows = [line.split() for line in text.strip().splitlines() if line.strip()]
        n = len(rows)
        clues = []
        for r, row in enumerate(rows):
            if len(row) != n:
                raise ValueError(f"row {r} has {len(row)} entries, expected {n}")
            for c, tok in enumerate(row):
                d = 0 if tok == "." else int(tok)
                if d:
                    clues.append((r, c, d))
        return cls(n=n, clues=clues)


def box_shape(n: int) -> tuple[int, int] | None:
    """Box dimensions (rows, cols), or None when n has no square box layout."""
    root = math.isqrt(n)
    return (root, root) if root * root == n else None


def _same_unit(n: int, r1: int, c1: int, r2: int, c2: int) -> bool:
    if r1 == r2 or c1 == c2:
        return True
    box = box_shape(n)
    if box is not None:
        bh, bw = box
        if (r1 // bh, c1 // bw) == (r2 // bh, c2 // bw):
            return True
    return False


def neuron_index(n: int, r: int, c: int, d: int) -> int:
    """NPU2 address of the (cell, digit) neuron; digits are 1-based."""
    return (r * n + c) * n + (d - 1)


def conflict_matrix(n: int, kind: str = "all") -> np.ndarray:
    """Boolean (n^3, n^3) adjacency of mutually exclusive assignments.

    kind selects the subset: "cell" for same-cell/different-digit pairs,
    "unit" for same-digit row/column/box pairs, "all" for their union.
    """
    size = n**3
    conflicts = np.zeros((size, size), dtype=bool)
    for r1 in range(n):
        for c1 in range(n):
            for d1 in range(1, n + 1):
                i = neuron_index(n, r1, c1, d1)
                if kind in ("cell", "all"):
                    for d2 in range(1, n + 1):
                        if d2 != d1:
                            conflicts[i, neuron_index(n, r1, c1, d2)] = True
                if kind in ("unit", "all"):
                    for r2 in range(n):
                        for c2 in range(n):
                            if (r2, c2) != (r1, c1) and _same_unit(n, r1, c1, r2, c2):
                                conflicts[i, neuron_index(n, r2, c2, d1)] = True
    return conflicts


@dataclass
class SudokuWeights:
    """Winner-take-all tuning knobs. Within-cell inhibition is the hard
    competition; unit (row/column/box) inhibition is the softer constraint
    bias; noise drives the stochastic search."""

    inhibit_cell: int = -8
    inhibit_unit: int = -4
    excite: int = 2
    clue_value: int = 96
    noise_low: int = 0
    noise_high: int = 20
    decay_a: int = 5


def build_sudoku_network(
    puzzle: SudokuPuzzle, weights: SudokuWeights | None = None
) -> tuple[NetworkDescription, StimulusTrace]:
    """Map a puzzle onto NPU2. All stimulus (clue drive and noise) is declared
    in the config, so the returned trace is empty."""
    w = weights or SudokuWeights()
    n = puzzle.n
    size = n**3
    active2 = _next_pow2(size)
    t2 = active2 + 1

    npu1 = NpuConfig(
        max_neurons=32, active_neurons=1, params=[INTEGRATOR],
        global_neuron=GlobalNeuronConfig(params=INTEGRATOR),
    )
    npu2 = NpuConfig(
        max_neurons=128, active_neurons=active2, params=[INTEGRATOR] * active2,
        global_neuron=GlobalNeuronConfig(params=INTEGRATOR),
        decay_a=w.decay_a,
    )

    rec = np.zeros((size, size), dtype=np.int64)
    rec[conflict_matrix(n, "unit")] = w.inhibit_unit
    rec[conflict_matrix(n, "cell")] = w.inhibit_cell
    np.fill_diagonal(rec, w.excite)
    weights2 = np.zeros((npu1.total_neurons + active2, t2), dtype=np.int64)
    weights2[npu1.total_neurons : npu1.total_neurons + size, :size] = rec

    clue_addrs = {neuron_index(n, r, c, d) for r, c, d in puzzle.clues}
    dc = [DcSource(npu=2, addr=a, value=w.clue_value) for a in sorted(clue_addrs)]
    noise_addrs = [a for a in range(size) if a not in clue_addrs]
    noise = (
        [NoiseSource(npu=2, addrs=noise_addrs, low=w.noise_low, high=w.noise_high)]
        if noise_addrs
        else []
    )

    desc = NetworkDescription(
        npu1=npu1,
        npu2=npu2,
        weights1=np.zeros((1, 2), dtype=np.int64),
        weights2=weights2,
        gs_mode="auto",
        dc=dc,
        noise=noise,
    )
    return desc, StimulusTrace()


@dataclass
class SudokuDecode:
    grid: list[list[int]]
    low_confidence: set[tuple[int, int]] = field(default_factory=set)


def decode_sudoku_solution(
    raster: list[tuple[int, int, int]], window: tuple[int, int], n: int
) -> SudokuDecode:
    """Per cell, pick the digit whose neuron spiked most inside
    [window[0], window[1]). Ties go to the lowest digit and are flagged."""
    t0, t1 = window
    counts = np.zeros(n**3, dtype=np.int64)
    for t, npu, addr in raster:
        if npu == 2 and t0 <= t < t1 and addr < n**3:
            counts[addr] += 1
    grid = [[0] * n for _ in range(n)]
    low_conf: set[tuple[int, int]] = set()
    for r in range(n):
        for c in range(n):
            cell = counts[neuron_index(n, r, c, 1) : neuron_index(n, r, c, n) + 1]
            if cell.sum() == 0:
                raise NoDecisionError(f"no spikes for cell ({r}, {c}) in window")
            best = int(cell.argmax())
            if (cell == cell[best]).sum() > 1:
                low_conf.add((r, c))
            grid[r][c] = best + 1
    return SudokuDecode(grid=grid, low_confidence=low_conf)


def verify_sudoku(grid: list[list[int]], puzzle: SudokuPuzzle) -> bool:
    """Exhaustive validity check: every unit holds each digit once and all
    clues are respected. Independent of the network entirely."""
    n = puzzle.n
    if len(grid) != n or any(len(row) != n for row in grid):
        return False
    digits = set(range(1, n + 1))
    for r in range(n):
        if set(grid[r]) != digits:
            return False
    for c in range(n):
        if {grid[r][c] for r in range(n)} != digits:
            return False
    box = box_shape(n)
    if box is not None:
        bh, bw = box
        for br in range(0, n, bh):
            for bc in range(0, n, bw):
                cells = {
                    grid[r][c]
                    for r in range(br, br + bh)
                    for c in range(bc, bc + bw)
                }
                if cells != digits:
                    return False
    for r, c, d in puzzle.clues:
        if grid[r][c] != d:
            return False
    return True


def solve_exact(puzzle: SudokuPuzzle, limit: int = 2) -> list[list[list[int]]]:
    """Backtracking solver, used to generate puzzles and as an independent
    check that an instance is satisfiable. Returns up to `limit` solutions."""
    n = puzzle.n
    grid = [[0] * n for _ in range(n)]
    for r, c, d in puzzle.clues:
        grid[r][c] = d
    sols: list[list[list[int]]] = []

    def admissible(r, c, d):
        for k in range(n):
            if grid[r][k] == d or grid[k][c] == d:
                return False
        box = box_shape(n)
        if box is not None:
            bh, bw = box
            for r2 in range(r // bh * bh, r // bh * bh + bh):
                for c2 in range(c // bw * bw, c // bw * bw + bw):
                    if grid[r2][c2] == d:
                        return False
        return True

    def rec(i):
        if len(sols) >= limit:
            return
        if i == n * n:
            sols.append([row[:] for row in grid])
            return
        r, c = divmod(i, n)
        if grid[r][c]:
            rec(i + 1)
            return
        for d in range(1, n + 1):
            if admissible(r, c, d):
                grid[r][c] = d
                rec(i + 1)
                grid[r][c] = 0

    rec(0)
    return sols


def random_puzzle(n: int, seed: int, n_clues: int | None = None) -> SudokuPuzzle:
    """Seeded solvable puzzle: build a full grid by randomized backtracking,
    then keep a random subset of cells as clues."""
    lcg = Lcg(seed)
    if n_clues is None:
        n_clues = max(2, (n * n) // 3)
    base = solve_exact(SudokuPuzzle(n=n, clues=[]), limit=1)[0]
    # shuffle digits and permute rows/cols within band structure-preserving ops
    perm = list(range(1, n + 1))
    for i in range(n - 1, 0, -1):
        j = lcg.int_range(0, i)
        perm[i], perm[j] = perm[j], perm[i]
    full = [[perm[base[r][c] - 1] for c in range(n)] for r in range(n)]
    cells = [(r, c) for r in range(n) for c in range(n)]
    for i in range(len(cells) - 1, 0, -1):
        j = lcg.int_range(0, i)
        cells[i], cells[j] = cells[j], cells[i]
    clues = [(r, c, full[r][c]) for r, c in cells[:n_clues]]
    return SudokuPuzzle(n=n, clues=clues)


@dataclass
class SudokuResult:
    solved: bool
    steps: int
    grid: list[list[int]] | None
    cycles: CycleReport
    raster: list[tuple[int, int, int]]


def solve_sudoku(
    puzzle: SudokuPuzzle,
    seed: int = 0,
    max_steps: int = 100_000,
    check_every: int = 200,
    weights: SudokuWeights | None = None,
) -> SudokuResult:
    """Run the network, decoding every `check_every` steps over the trailing
    window, until the decoded grid verifies or the step budget runs out."""
    desc, _ = build_sudoku_network(puzzle, weights)
    proc = desc.build_processor()
    lcg = Lcg(seed)
    agg = CycleReport()
    raster: list[tuple[int, int, int]] = []
    n = puzzle.n
    for t in range(max_steps):
        events = [
            (dc.npu, ExternalEvent(neuron_addr=dc.addr, value=dc.value))
            for dc in desc.dc
        ]
        for ns in desc.noise:
            for addr in ns.addrs:
                events.append(
                    (ns.npu, ExternalEvent(neuron_addr=addr,
                                           value=lcg.int_range(ns.low, ns.high)))
                )
        _, s2, rep = proc.timestep(events)
        agg.merge(rep)
        for addr in np.nonzero(s2)[0]:
            raster.append((t, 2, int(addr)))
        if (t + 1) % check_every == 0:
            try:
                decode = decode_sudoku_solution(raster, (t + 1 - check_every, t + 1), n)
            except NoDecisionError:
                continue
            if verify_sudoku(decode.grid, puzzle):
                return SudokuResult(True, t + 1, decode.grid, agg, raster)
    return SudokuResult(False, max_steps, None, agg, raster)


# ---------------------------------------------------------------------------
# avoidance

N_DIRECTIONS = 8


@dataclass
class DecisionWindow:
    window_steps: int = 50
    direction_count: int = N_DIRECTIONS

    def __post_init__(self):
        if self.window_steps < 1:
            raise ValueError("window_steps must be >= 1")


def build_avoidance_network(inhibit: int = -2) -> NetworkDescription:
    """Eight direction neurons in NPU1 with mutual winner-take-all
    inhibition. Motion evidence arrives as external stimulus per direction."""
    npu1 = NpuConfig(
        max_neurons=32, active_neurons=N_DIRECTIONS,
        params=[INTEGRATOR] * N_DIRECTIONS,
        global_neuron=GlobalNeuronConfig(params=INTEGRATOR),
        decay_a=2,
    )
    npu2 = NpuConfig(
        max_neurons=128, active_neurons=1, params=[INTEGRATOR],
        global_neuron=GlobalNeuronConfig(params=INTEGRATOR),
    )
    t1 = npu1.total_neurons
    w1 = np.full((N_DIRECTIONS, t1), inhibit, dtype=np.int64)
    np.fill_diagonal(w1, 0)
    w1[:, N_DIRECTIONS] = 0  # global neuron stays out of the competition
    return NetworkDescription(
        npu1=npu1,
        npu2=npu2,
        weights1=w1,
        weights2=np.zeros((t1 + 1, 2), dtype=np.int64),
        gs_mode="auto",
    )


def make_direction_stimulus(
    direction: int,
    steps: int,
    seed: int = 0,
    strong: int = 48,
    weak: int = 16,
    jitter: int = 6,
) -> StimulusTrace:
    """Evidence trace with one dominant direction plus seeded jitter on all
    channels (stands in for the off-chip visual pre-processing)."""
    if not 0 <= direction < N_DIRECTIONS:
        raise ValueError(f"direction must be 0..{N_DIRECTIONS - 1}")
    lcg = Lcg(seed)
    records = []
    for t in range(steps):
        for d in range(N_DIRECTIONS):
            base = strong if d == direction else weak
            value = base + lcg.int_range(-jitter, jitter)
            records.append((t, 1, d, max(-128, min(127, value))))
    return StimulusTrace(records=records)


def decide_direction(
    raster: list[tuple[int, int, int]],
    window: tuple[int, int],
    n_directions: int = N_DIRECTIONS,
) -> tuple[int, bool, list[int]]:
    """Argmax of per-direction NPU1 spike counts over [window[0], window[1]).
    Returns (direction, tie_flag, counts); ties resolve to the lowest index."""
    t0, t1 = window
    counts = [0] * n_directions
    for t, npu, addr in raster:
        if npu == 1 and t0 <= t < t1 and addr < n_directions:
            counts[addr] += 1
    total = sum(counts)
    if total == 0:
        raise NoDecisionError(f"no spikes in window [{t0}, {t1})")
    best = max(range(n_directions), key=lambda d: counts[d])
    tie = counts.count(counts[best]) > 1
    # lowest index wins on a tie
    best = counts.index(counts[best])
    return best, tie, counts


def decide_windows(
    raster: list[tuple[int, int, int]],
    total_steps: int,
    window: DecisionWindow | None = None,
) -> list[tuple[int, int, bool, list[int]]]:
    """One decision per consecutive window: (index, direction, tie, counts)."""
    win = window or DecisionWindow()
    out = []
    for i, t0 in enumerate(range(0, total_steps, win.window_steps)):
        d, tie, counts = decide_direction(
            raster, (t0, t0 + win.window_steps), win.direction_count
        )
        out.append((i, d, tie, counts))
    return out


# ---------------------------------------------------------------------------
# neuron behavior sweep

def behavior_sweep(
    cases: dict[str, tuple[NeuronParams, list[int]]]
) -> dict[str, dict]:
    """Record (v_m, spike) trajectories per named (params, current profile)
    case. Output is JSON-friendly so fixtures can be pinned verbatim."""
    out = {}
    for name, (params, currents) in cases.items():
        state = NeuronState(v_m=params.v_r)
        vs, spikes = [], []
        for i_t in currents:
            state, spiked = neuron_step(state, params, i_t)
            vs.append(state.v_m)
            spikes.append(int(spiked))
        out[name] = {
            "params": {
                "a_num": params.a_num, "b_num": params.b_num,
                "v_r": params.v_r, "v_t": params.v_t, "v_reset": params.v_reset,
            },
            "currents": list(currents),
            "v_m": vs,
            "spikes": spikes,
        }
    return out


def isi_signature(spikes: list[int]) -> tuple[int, int]:
    """(spike count, ISI coefficient-of-variation bucket in tenths)."""
    times = [t for t, s in enumerate(spikes) if s]
    if len(times) < 2:
        return len(times), 0
    isis = np.diff(times)
    cv = float(isis.std() / isis.mean()) if isis.mean() else 0.0
    return len(times), int(round(cv * 10))


def default_behavior_cases(steps: int = 400) -> dict[str, tuple[NeuronParams, list[int]]]:
    """Five parameter/input sets chosen to produce distinct inter-spike
    interval signatures (different counts or CV buckets)."""
    ramp = [min(60, 2 + t // 8) for t in range(steps)]
    burst_drive = ([70] * 40 + [0] * 40) * (steps // 80)
    return {
        "tonic_slow": (INTEGRATOR, [20] * steps),
        "tonic_fast": (INTEGRATOR, [85] * steps),
        "accelerating": (NeuronParams(a_num=0, b_num=3, v_r=0, v_t=60, v_reset=70),
                         ramp),
        "phasic_onset": (NeuronParams(a_num=6, b_num=0, v_r=0, v_t=255, v_reset=0),
                         [40] * 30 + [12] * (steps - 30)),
        "burst_pause": (INTEGRATOR, burst_drive[:steps]),
    }
