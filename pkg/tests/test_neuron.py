"""Unit and property tests for the integer QIF neuron."""

import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from snnemu.neuron import NeuronParams, NeuronState, delta_vm, neuron_step, pde_threshold


def reference_step(v_m, a_num, b_num, v_r, v_t, v_reset, i_t):
    """Independent evaluator of the published update rule, written directly
    from the two-branch equation with floor semantics. Kept deliberately
    separate from the implementation under test."""
    if a_num + b_num == 0:
        th = v_t
    else:
        th = math.floor((a_num * v_r + b_num * v_t) / (a_num + b_num))
    if v_m < th:
        dv = math.floor(a_num * (v_r - v_m) / 8) + i_t
    else:
        dv = math.floor(b_num * (v_m - v_t) / 8) + i_t
    s = v_m + dv
    if s > 255:
        return v_reset, True
    if s < 0:
        return 0, False
    return s, False


params_st = st.builds(
    lambda a, b, lo, hi, rst: NeuronParams(
        a_num=a, b_num=b, v_r=min(lo, hi), v_t=max(lo, hi), v_reset=rst
    ),
    st.integers(0, 7),
    st.integers(0, 7),
    st.integers(0, 255),
    st.integers(0, 255),
    st.integers(0, 255),
)


class TestPdeThreshold:
    def test_symmetric_midpoint(self):
        p = NeuronParams(a_num=4, b_num=4, v_r=50, v_t=150, v_reset=0)
        assert pde_threshold(p) == 100

    def test_degenerate_zero_slopes(self):
        p = NeuronParams(a_num=0, b_num=0, v_r=50, v_t=150, v_reset=0)
        assert pde_threshold(p) == 150

    def test_weighted(self):
        p = NeuronParams(a_num=2, b_num=6, v_r=40, v_t=160, v_reset=0)
        assert pde_threshold(p) == 130


class TestDeltaVm:
    P = NeuronParams(a_num=2, b_num=4, v_r=50, v_t=150, v_reset=30)

    def test_resting_fixed_point(self):
        assert delta_vm(50, self.P, 0) == 0

    def test_upper_branch(self):
        # 4 * (200 - 150) = 200; 200 >> 3 = 25
        assert delta_vm(200, self.P, 0) == 25

    def test_lower_branch_floor(self):
        # threshold = (2*50 + 4*150) // 6 = 116; 2*(50-100) = -100 -> floor -13
        assert pde_threshold(self.P) == 116
        assert delta_vm(100, self.P, 0) == -13


class TestNeuronStep:
    P = NeuronParams(a_num=2, b_num=4, v_r=50, v_t=150, v_reset=30)

    def test_overflow_spike_and_reset(self):
        st_, spiked = neuron_step(NeuronState(v_m=240), self.P, 0)
        assert spiked
        assert st_.v_m == 30

    def test_subthreshold(self):
        st_, spiked = neuron_step(NeuronState(v_m=100), self.P, 0)
        assert not spiked
        assert st_.v_m == 87

    def test_underflow_clamp(self):
        p = NeuronParams(a_num=2, b_num=0, v_r=50, v_t=200, v_reset=0)
        # threshold = v_r = 50; drift at v=5 is (2*45)>>3 = 11
        st_, spiked = neuron_step(NeuronState(v_m=5), p, -20)
        assert not spiked
        assert st_.v_m == 0

    def test_invalid_params_rejected(self):
        with pytest.raises(ValueError):
            NeuronParams(a_num=8, b_num=0, v_r=0, v_t=100, v_reset=0)
        with pytest.raises(ValueError):
            NeuronParams(a_num=1, b_num=1, v_r=200, v_t=100, v_reset=0)

    def test_long_trajectory_matches_reference(self):
        rng = random.Random(1234)
        for _ in range(20):
            a, b = rng.randrange(8), rng.randrange(8)
            v_r = rng.randrange(256)
            v_t = rng.randrange(v_r, 256)
            v_reset = rng.randrange(256)
            p = NeuronParams(a_num=a, b_num=b, v_r=v_r, v_t=v_t, v_reset=v_reset)
            state = NeuronState(v_m=rng.randrange(256))
            ref_v = state.v_m
            for _ in range(10_000):
                i_t = rng.randrange(-64, 65)
                state, spiked = neuron_step(state, p, i_t)
                ref_v, ref_spiked = reference_step(ref_v, a, b, v_r, v_t, v_reset, i_t)
                assert (state.v_m, spiked) == (ref_v, ref_spiked)


class TestProperties:
    @given(params_st, st.integers(0, 255), st.integers(-2048, 2047))
    def test_range_and_reset(self, p, v0, i_t):
        st_, spiked = neuron_step(NeuronState(v_m=v0), p, i_t)
        assert 0 <= st_.v_m <= 255
        assert spiked == (v0 + delta_vm(v0, p, i_t) > 255)
        if spiked:
            assert st_.v_m == p.v_reset

    @given(params_st)
    def test_resting_fixed_point(self, p):
        if not p.v_r < pde_threshold(p):
            return
        st_, spiked = neuron_step(NeuronState(v_m=p.v_r), p, 0)
        assert not spiked
        assert st_.v_m == p.v_r

    @settings(max_examples=30, deadline=None)
    @given(params_st, st.integers(0, 40), st.integers(1, 20))
    def test_fi_monotone(self, p, i_lo, di):
        def count(i_t, horizon=300):
            s, n = NeuronState(v_m=p.v_r), 0
            for _ in range(horizon):
                s, spiked = neuron_step(s, p, i_t)
                n += spiked
            return n

        assert count(i_lo + di) >= count(i_lo)
