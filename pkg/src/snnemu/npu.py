"""One neuromorphic processing unit: population controller, I-QIF neuron
cluster, virtualized-crossbar accumulation, optional half-hierarchy chop, and
per-phase cycle accounting.

A timestep runs four phases in fixed order: external stimulus accumulation,
inter-spike accumulation (previous-step recurrent spikes plus any feedforward
stream), synaptic decay, then the neuron update. Spikes emitted at timestep t
therefore reach accumulators at t+1, never earlier.

Each NPU carries one extra neuron at the highest address: the global
excitatory/inhibitory neuron. Its fan-out is a single shared weight broadcast
to every accumulator instead of an SRAM row.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .neuron import NeuronParams, pde_threshold, step_arrays
from .synapse import (
    GroupSparseConfig,
    PostSynapticState,
    WeightMemory,
    decode_spike_stream,
)


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass
class GlobalNeuronConfig:
    params: NeuronParams
    out_weight: int = 0
    mode: str = "excitatory"

    def __post_init__(self):
        if not -8 <= self.out_weight <= 7:
            raise ValueError(f"out_weight must fit signed 4-bit, got {self.out_weight}")
        if self.mode not in ("excitatory", "inhibitory"):
            raise ValueError(f"mode must be excitatory or inhibitory, got {self.mode}")

    @property
    def effective_weight(self) -> int:
        """Broadcast weight with the sign imposed by the configured path."""
        mag = abs(self.out_weight)
        return mag if self.mode == "excitatory" else -mag


@dataclass
class NpuConfig:
    max_neurons: int
    active_neurons: int
    params: list[NeuronParams]
    global_neuron: GlobalNeuronConfig
    decay_a: int = 3
    chop: tuple[int, int] | None = None

    def __post_init__(self):
        if self.max_neurons not in (32, 128):
            raise ValueError(f"max_neurons must be 32 or 128, got {self.max_neurons}")
        if not _is_pow2(self.active_neurons) or self.active_neurons > self.max_neurons:
            raise ValueError(
                f"active_neurons must be a power of two <= {self.max_neurons}, "
                f"got {self.active_neurons}"
            )
        if len(self.params) != self.active_neurons:
            raise ValueError(
                f"need {self.active_neurons} neuron parameter sets, got {len(self.params)}"
            )
        if not 0 <= self.decay_a <= 7:
            raise ValueError(f"decay_a must be 0..7, got {self.decay_a}")
        if self.chop is not None:
            n1, n2 = self.chop
            if not (_is_pow2(n1) and _is_pow2(n2)):
                raise ValueError(f"chop sizes must be powers of two, got {self.chop}")
            if n1 + n2 > self.max_neurons:
                raise ValueError(f"chop sizes exceed max_neurons: {self.chop}")
            if n1 + n2 != self.active_neurons:
                raise ValueError("chop sizes must sum to active_neurons")

    @property
    def total_neurons(self) -> int:
        """Active neurons plus the global neuron."""
        return self.active_neurons + 1


def configure_chop(cfg: NpuConfig, n1: int, n2: int) -> NpuConfig:
    """Split the population into two uni-directional sub-populations
    (sub-population 1 feeds 2, never the reverse)."""
    if not (_is_pow2(n1) and _is_pow2(n2)):
        raise ValueError(f"chop sizes must be powers of two, got ({n1}, {n2})")
    if n1 + n2 > cfg.max_neurons:
        raise ValueError(f"chop sizes {n1}+{n2} exceed max_neurons {cfg.max_neurons}")
    new_params = cfg.params
    if n1 + n2 != cfg.active_neurons:
        if len(cfg.params) < n1 + n2:
            raise ValueError("not enough neuron parameter sets for chop sizes")
        new_params = cfg.params[: n1 + n2]
    return dataclasses.replace(
        cfg, chop=(n1, n2), active_neurons=n1 + n2, params=new_params
    )


def dense_op_count(n: int) -> int:
    """Synaptic operations per dense timestep for a flat n-neuron population."""
    return n * n

def chop_op_count(n1: int, n2: int) -> int:
    """Synaptic operations per dense timestep for a chopped (n1 -> n2) layout:
    sub1 is recurrent over n1, sub2 sees both sub-populations."""
    return n1 * n1 + (n1 + n2) * n2


def check_chop_weights(mem: WeightMemory, n_ff: int, n1: int, n2: int) -> None:
    """Reject recurrent weights flowing from sub-population 2 back to 1.

    Rows n_ff..n_ff+n1+n2-1 are the NPU's own sources; the last n2 of them
    must carry zero weight toward targets 0..n1-1.
    """
    for src in range(n1, n1 + n2):
        row = mem.row_weights(n_ff + src)
        bad = np.nonzero(row[:n1])[0]
        if bad.size:
            raise ValueError(
                f"chop violation: source {src} (sub-population 2) has weight "
                f"to target {int(bad[0])} (sub-population 1)"
            )


@dataclass
class ExternalEvent:
    neuron_addr: int
    value: int

    def __post_init__(self):
        if not -128 <= self.value <= 127:
            raise ValueError(f"event value must fit signed 8-bit, got {self.value}")


@dataclass
class PhaseCycles:
    """Clock cycles charged per timestep phase (sequential model)."""

    external: int = 0
    scan: int = 0
    mac: int = 0
    decay: int = 0
    pde: int = 0

    @property
    def total(self) -> int:
        return self.external + self.scan + self.mac + self.decay + self.pde

    def __iadd__(self, other: "PhaseCycles") -> "PhaseCycles":
        self.external += other.external
        self.scan += other.scan
        self.mac += other.mac
        self.decay += other.decay
        self.pde += other.pde
        return self


@dataclass
class NpuState:
    v_m: np.ndarray
    psp: PostSynapticState
    last_spikes: np.ndarray


class Npu:
    """Execution engine for one NPU.

    `memory` holds one row per non-global source: first `n_ff_sources`
    feedforward rows (sources in the upstream NPU, global included), then
    `active_neurons` recurrent rows. Every row spans `total_neurons` targets,
    so the global neuron can receive ordinary synaptic weight.
    """

    def __init__(
        self,
        cfg: NpuConfig,
        memory: WeightMemory,
        gs: GroupSparseConfig | None = None,
        n_ff_sources: int = 0,
    ):
        total = cfg.total_neurons
        expected_rows = n_ff_sources + cfg.active_neurons
        if memory.n_rows != expected_rows:
            raise ValueError(
                f"memory has {memory.n_rows} rows, expected {expected_rows}"
            )
        if memory.n_targets != total:
            raise ValueError(
                f"memory spans {memory.n_targets} targets, expected {total}"
            )
        if cfg.chop is not None:
            check_chop_weights(memory, n_ff_sources, *cfg.chop)
        self.cfg = cfg
        self.memory = memory
        self.gs = gs if gs is not None else GroupSparseConfig.dense(total)
        self.n_ff_sources = n_ff_sources

        all_params = list(cfg.params) + [cfg.global_neuron.params]
        self._a = np.array([p.a_num for p in all_params], dtype=np.int64)
        self._b = np.array([p.b_num for p in all_params], dtype=np.int64)
        self._vr = np.array([p.v_r for p in all_params], dtype=np.int64)
        self._vt = np.array([p.v_t for p in all_params], dtype=np.int64)
        self._vreset = np.array([p.v_reset for p in all_params], dtype=np.int64)
        self._pde_th = np.array([pde_threshold(p) for p in all_params], dtype=np.int64)

    def initial_state(self, v_m: int | None = None) -> NpuState:
        total = self.cfg.total_neurons
        v0 = self._vr.copy() if v_m is None else np.full(total, v_m, dtype=np.int64)
        return NpuState(
            v_m=v0,
            psp=PostSynapticState.zeros(total, decay_a=self.cfg.decay_a),
            last_spikes=np.zeros(total, dtype=np.uint8),
        )

    def timestep(
        self,
        state: NpuState,
        external: list[ExternalEvent],
        feedforward: np.ndarray | None = None,
    ) -> tuple[NpuState, np.ndarray, PhaseCycles]:
        """Run one timestep in place; returns (state, fresh spikes, cycles)."""
        cfg = self.cfg
        total = cfg.total_neurons
        cycles = PhaseCycles()
        y = state.psp.y

        # Phase 1: external stimulus, one input-bus cycle per event.
        for ev in external:
            if not 0 <= ev.neuron_addr < total:
                raise IndexError(
                    f"external event address {ev.neuron_addr} out of range "
                    f"(total neurons {total})"
                )
            y[ev.neuron_addr] += ev.value
            cycles.external += 1

        # Phase 2: inter-spike accumulation from the previous timestep.
        if self.n_ff_sources:
            if feedforward is None or len(feedforward) != self.n_ff_sources:
                got = 0 if feedforward is None else len(feedforward)
                raise ValueError(
                    f"feedforward stream length {got}, expected {self.n_ff_sources}"
                )
            schedule, scan = decode_spike_stream(feedforward, self.gs)
            cycles.scan += scan
            for src, mac in schedule:
                y += self.memory.row_weights(src, gs_code=self.gs.code_for(src))
                cycles.mac += mac
        elif feedforward is not None and len(feedforward):
            raise ValueError("this NPU accepts no feedforward stream")

        rec_sched, rec_scan = decode_spike_stream(state.last_spikes, self.gs)
        cycles.scan += rec_scan
        for src, _ in rec_sched:
            if src == cfg.active_neurons:
                # Global neuron: dedicated broadcast path, one cycle.
                y += cfg.global_neuron.effective_weight
                cycles.mac += 1
            else:
                # Per-source group masks are indexed by memory row.
                row = self.n_ff_sources + src
                code = self.gs.code_for(row)
                y += self.memory.row_weights(row, gs_code=code)
                cycles.mac += bin(code).count("1")

        state.psp.saturate()

        # Phase 3: reciprocal decay, one shifter pass per accumulator.
        state.psp.decay()
        cycles.decay += total

        # Phase 4: neuron update with i_t sampled after decay.
        state.v_m, spiked = step_arrays(
            state.v_m,
            self._a,
            self._b,
            self._vr,
            self._vt,
            self._vreset,
            self._pde_th,
            state.psp.y,
        )
        cycles.pde += total

        spikes = spiked.astype(np.uint8)
        state.last_spikes = spikes
        return state, spikes, cycles
