"""Integer quadratic integrate-and-fire (I-QIF) neuron model.

All arithmetic is plain integer arithmetic. The membrane potential is an
unsigned 8-bit value; the per-step update is a piecewise-linear drift with
3-bit fractional slopes realized as (num * x) >> 3, i.e. floor division by 8
(rounds toward -inf, matching an arithmetic right shift in hardware).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

V_MAX = 255


@dataclass(frozen=True)
class NeuronParams:
    """I-QIF parameters: slopes a = a_num/8 and b = b_num/8, plus potentials."""

    a_num: int
    b_num: int
    v_r: int
    v_t: int
    v_reset: int

    def __post_init__(self):
        if not 0 <= self.a_num <= 7:
            raise ValueError(f"a_num must be 0..7, got {self.a_num}")
        if not 0 <= self.b_num <= 7:
            raise ValueError(f"b_num must be 0..7, got {self.b_num}")
        for name in ("v_r", "v_t", "v_reset"):
            v = getattr(self, name)
            if not 0 <= v <= V_MAX:
                raise ValueError(f"{name} must be 0..{V_MAX}, got {v}")
        if self.v_r > self.v_t:
            raise ValueError(f"v_r ({self.v_r}) must not exceed v_t ({self.v_t})")


@dataclass
class NeuronState:
    """Membrane potential, kept in 0..255 after every step."""

    v_m: int = 0


def pde_threshold(params: NeuronParams) -> int:
    """Branch-switch potential (a*v_r + b*v_t) / (a + b), floored.

    With a_num = b_num = 0 both branches reduce to the input current alone,
    so the threshold choice is unobservable; v_t is returned for definiteness.
    """
    denom = params.a_num + params.b_num
    if denom == 0:
        return params.v_t
    return (params.a_num * params.v_r + params.b_num * params.v_t) // denom


def delta_vm(v_prev: int, params: NeuronParams, i_t: int) -> int:
    """Per-step membrane increment: restoring branch below the switch point,
    regenerative branch at or above it, plus the synaptic current."""
    if v_prev < pde_threshold(params):
        drift = (params.a_num * (params.v_r - v_prev)) >> 3
    else:
        drift = (params.b_num * (v_prev - params.v_t)) >> 3
    return drift + i_t


def neuron_step(
    state: NeuronState, params: NeuronParams, i_t: int
) -> tuple[NeuronState, bool]:
    """Advance one timestep; returns (new state, spiked).

    The candidate sum v_m + delta is evaluated at full width (the hardware's
    8-bit register plus overflow bit); overflow past 255 emits a spike and
    resets to v_reset, underflow clamps at 0.
    """
    s = state.v_m + delta_vm(state.v_m, params, i_t)
    if s > V_MAX:
        return NeuronState(v_m=params.v_reset), True
    if s < 0:
        return NeuronState(v_m=0), False
    return NeuronState(v_m=s), False


def step_arrays(v, a, b, v_r, v_t, v_reset, pde_th, i_t):
    """Vectorized neuron_step over int64 arrays; bit-identical to the scalar
    form element-wise. Used by the NPU neuron cluster."""
    drift = np.where(v < pde_th, (a * (v_r - v)) >> 3, (b * (v - v_t)) >> 3)
    s = v + drift + i_t
    spiked = s > V_MAX
    v_new = np.where(spiked, v_reset, np.clip(s, 0, V_MAX))
    return v_new, spiked
