"""Synaptic weight memory, group-sparse spike decoding, post-synaptic
accumulation and reciprocal decay.

Weights are signed 4-bit (-8..+7), packed eight to a 32-bit word with nibble 0
holding the lowest-indexed target. One word read costs one clock cycle in the
cycle model. Targets are partitioned into groups of 8; a group-sparse bitmask
selects which words are actually read for a given presynaptic source.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

WEIGHT_MIN = -8
WEIGHT_MAX = 7
GROUP_SIZE = 8
SAT_MAX = 2047
SAT_MIN = -2048


def _popcount(x: int) -> int:
    return bin(x).count("1")


class WeightMemory:
    """Word-addressable synaptic SRAM: one row per presynaptic source, each
    row zero-padded to a whole number of 32-bit words."""

    def __init__(self, words: np.ndarray, n_targets: int):
        words = np.asarray(words, dtype=np.uint32)
        if words.ndim != 2:
            raise ValueError("words must be a (rows, stride) array")
        if words.shape[1] * GROUP_SIZE < n_targets:
            raise ValueError("row stride too small for target count")
        self.words = words
        self.n_targets = n_targets

    @property
    def n_rows(self) -> int:
        return self.words.shape[0]

    @property
    def row_stride_words(self) -> int:
        return self.words.shape[1]

    @property
    def n_groups(self) -> int:
        return self.words.shape[1]

    @classmethod
    def from_matrix(cls, matrix) -> "WeightMemory":
        """Pack a (sources, targets) weight matrix, one row per source."""
        matrix = np.asarray(matrix, dtype=np.int64)
        if matrix.ndim != 2:
            raise ValueError("weight matrix must be 2-D")
        n_rows, n_targets = matrix.shape
        bad = np.argwhere((matrix < WEIGHT_MIN) | (matrix > WEIGHT_MAX))
        if bad.size:
            r, c = bad[0]
            raise ValueError(
                f"weight out of range at row {r}, target {c}: {matrix[r, c]}"
            )
        stride = max(1, -(-n_targets // GROUP_SIZE))
        padded = np.zeros((n_rows, stride * GROUP_SIZE), dtype=np.int64)
        padded[:, :n_targets] = matrix
        nibbles = (padded & 0xF).astype(np.uint32).reshape(n_rows, stride, GROUP_SIZE)
        shifts = (4 * np.arange(GROUP_SIZE, dtype=np.uint32))[None, None, :]
        words = (nibbles << shifts).sum(axis=2, dtype=np.uint32)
        return cls(words, n_targets)

    def word(self, source: int, group: int) -> int:
        return int(self.words[source, group])

    def row_weights(self, source: int, gs_code: int | None = None) -> np.ndarray:
        """Unpack one row to signed weights; groups cleared in gs_code read 0."""
        if not 0 <= source < self.n_rows:
            raise IndexError(f"source {source} out of range (rows={self.n_rows})")
        w = self.words[source]
        shifts = (4 * np.arange(GROUP_SIZE, dtype=np.uint32))[None, :]
        nib = ((w[:, None] >> shifts) & np.uint32(0xF)).astype(np.int64)
        nib[nib >= 8] -= 16
        if gs_code is not None:
            mask = np.array(
                [(gs_code >> g) & 1 for g in range(self.n_groups)], dtype=bool
            )
            nib[~mask] = 0
        return nib.reshape(-1)[: self.n_targets]

    def unpack(self) -> np.ndarray:
        """Full (sources, targets) signed weight matrix."""
        return np.stack([self.row_weights(r) for r in range(self.n_rows)])


def pack_weights(weights) -> WeightMemory:
    """Pack a flat weight sequence as a single zero-padded row."""
    weights = np.asarray(list(weights), dtype=np.int64)
    for i, w in enumerate(weights):
        if not WEIGHT_MIN <= w <= WEIGHT_MAX:
            raise ValueError(f"weight out of range at index {i}: {w}")
    return WeightMemory.from_matrix(weights[None, :])


@dataclass
class GroupSparseConfig:
    """Bitmask over 8-target weight groups. A cleared bit skips that word's
    SRAM read entirely. `per_source` overrides the default mask per row."""

    n_groups: int
    gs_code: int
    per_source: list[int] | None = None

    def __post_init__(self):
        full = (1 << self.n_groups) - 1
        if self.gs_code & ~full:
            raise ValueError("gs_code has bits beyond the group count")
        if self.per_source is not None:
            for i, code in enumerate(self.per_source):
                if code & ~full:
                    raise ValueError(f"per-source gs_code {i} beyond group count")

    @classmethod
    def dense(cls, n_targets: int) -> "GroupSparseConfig":
        n_groups = max(1, -(-n_targets // GROUP_SIZE))
        return cls(n_groups=n_groups, gs_code=(1 << n_groups) - 1)

    @classmethod
    def from_memory(cls, mem: WeightMemory) -> "GroupSparseConfig":
        """Per-source masks with all-zero words disabled."""
        per_source = [
            int(sum(1 << g for g in range(mem.n_groups) if mem.words[r, g] != 0))
            for r in range(mem.n_rows)
        ]
        n_groups = mem.n_groups
        return cls(
            n_groups=n_groups, gs_code=(1 << n_groups) - 1, per_source=per_source
        )

    def code_for(self, source: int) -> int:
        if self.per_source is not None and source < len(self.per_source):
            return self.per_source[source]
        return self.gs_code

    @property
    def gs_num(self) -> int:
        return _popcount(self.gs_code)

    def mac_cycles(self, source: int) -> int:
        return _popcount(self.code_for(source))


@dataclass
class PostSynapticState:
    """Per-target accumulators y with once-per-timestep signed-12-bit
    saturation and power-of-two reciprocal decay."""

    y: np.ndarray
    decay_a: int = 3

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=np.int64)
        if not 0 <= self.decay_a <= 7:
            raise ValueError(f"decay_a must be 0..7, got {self.decay_a}")

    @classmethod
    def zeros(cls, n: int, decay_a: int = 3) -> "PostSynapticState":
        return cls(y=np.zeros(n, dtype=np.int64), decay_a=decay_a)

    def saturate(self) -> None:
        np.clip(self.y, SAT_MIN, SAT_MAX, out=self.y)

    def decay(self) -> None:
        self.y = decay_array(self.y, self.decay_a)


def decay_value(y: int, decay_a: int) -> int:
    """One reciprocal-decay step: y - SEL(y >> decay_a, +/-1).

    The selector substitutes sign(y)*1 whenever the arithmetic shift truncates
    to zero, so the magnitude strictly decreases until y reaches exactly 0.
    """
    if not 0 <= decay_a <= 7:
        raise ValueError(f"decay_a must be 0..7, got {decay_a}")
    if y == 0:
        return 0
    s = y >> decay_a
    if s == 0:
        s = 1 if y > 0 else -1
    return y - s


def decay_array(y: np.ndarray, decay_a: int) -> np.ndarray:
    """Vectorized decay_value; bit-identical to the scalar form."""
    y = np.asarray(y, dtype=np.int64)
    s = y >> decay_a
    s = np.where((s == 0) & (y > 0), 1, s)
    s = np.where((s == 0) & (y < 0), -1, s)
    return y - s


def steps_to_fraction(y0: int, decay_a: int, fraction: float) -> int:
    """Steps of decay_value until |y| falls to fraction*|y0| or below."""
    if y0 == 0:
        return 0
    if not 0 < fraction < 1:
        raise ValueError("fraction must be in (0, 1)")
    target = fraction * abs(y0)
    y = y0
    n = 0
    while abs(y) > target:
        y = decay_value(y, decay_a)
        n += 1
    return n


def decode_spike_stream(
    bits, gs: GroupSparseConfig
) -> tuple[list[tuple[int, int]], int]:
    """Scan a spike stream two bits per clock from the LSB (circular shift),
    yielding (source, mac_cycles) per set bit.

    Returns (schedule, scan_cycles). Odd-length streams are padded with a zero
    bit. Total cycle charge under the sequential model is scan_cycles plus the
    sum of mac_cycles.
    """
    bits = list(bits)
    if len(bits) % 2:
        bits.append(0)
    scan_cycles = len(bits) // 2
    schedule = [
        (src, gs.mac_cycles(src)) for src, b in enumerate(bits) if b
    ]
    return schedule, scan_cycles


def accumulate_spike(
    source: int,
    mem: WeightMemory,
    gs: GroupSparseConfig,
    psp: PostSynapticState,
) -> int:
    """Add one source row into the accumulators (enabled groups only).

    Returns the cycle charge: one word read per enabled group. Saturation is
    deliberately NOT applied here; callers clamp once per timestep so results
    are independent of accumulation order.
    """
    if not 0 <= source < mem.n_rows:
        raise IndexError(f"source {source} out of range (rows={mem.n_rows})")
    code = gs.code_for(source)
    psp.y[: mem.n_targets] += mem.row_weights(source, gs_code=code)
    return _popcount(code)
