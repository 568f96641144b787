"""Bit-exact emulator of a two-NPU population-based spiking neural processor
with integer QIF neurons, 4-bit synaptic weight SRAM, and cycle accounting."""

from .neuron import NeuronParams, NeuronState, delta_vm, neuron_step, pde_threshold
from .npu import (
    ExternalEvent,
    GlobalNeuronConfig,
    Npu,
    NpuConfig,
    NpuState,
    PhaseCycles,
    chop_op_count,
    configure_chop,
    dense_op_count,
)
from .processor import (
    CycleReport,
    Processor,
    SchedulerBuffer,
    hierarchy_op_reduction,
    synapse_count,
)
from .synapse import (
    GroupSparseConfig,
    PostSynapticState,
    WeightMemory,
    accumulate_spike,
    decay_value,
    decode_spike_stream,
    pack_weights,
    steps_to_fraction,
)

__version__ = "0.1.0"
