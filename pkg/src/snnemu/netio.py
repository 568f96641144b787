"""File formats and the deterministic run harness.

A network lives in two files: a YAML description (topology, neuron parameters,
decay, group-sparse mode, stimulus generators) and a binary weight image it
references. Spike rasters and cycle reports are comma-separated text with a
one-line header.

The only randomness in a run comes from noise generators declared in the
config, driven by a fixed linear congruential generator
(x' = 1664525*x + 1013904223 mod 2^32, seeded from the CLI), so traces are
reproducible across implementations.
"""

from __future__ import annotations

import os
import struct
import zlib
from dataclasses import dataclass, field

import numpy as np
import yaml

from .neuron import NeuronParams
from .npu import GlobalNeuronConfig, Npu, NpuConfig
from .processor import DEFAULT_CLOCK_HZ, CycleReport, Processor
from .synapse import GroupSparseConfig, WeightMemory
from .npu import ExternalEvent

WEIGHT_MAGIC = b"SNNW"
WEIGHT_VERSION = 1
CONFIG_VERSION = 1

LCG_MULT = 1664525
LCG_INC = 1013904223


class ConfigError(ValueError):
    """Invalid network description; message starts with the field path."""

    def __init__(self, path: str, msg: str):
        super().__init__(f"{path}: {msg}")
        self.path = path


class Lcg:
    """32-bit linear congruential generator with the documented constants."""

    def __init__(self, seed: int):
        self.state = seed & 0xFFFFFFFF

    def next_u32(self) -> int:
        self.state = (LCG_MULT * self.state + LCG_INC) & 0xFFFFFFFF
        return self.state

    def int_range(self, lo: int, hi: int) -> int:
        """Uniform-ish integer in [lo, hi] (modulo bias is acceptable and
        fully reproducible)."""
        return lo + self.next_u32() % (hi - lo + 1)


# ---------------------------------------------------------------------------
# weight image

def save_weight_image(path: str, matrices: list[np.ndarray]) -> None:
    """Write packed weight sections: header, per-section geometry, CRC32 of
    the word payload, then raw little-endian 32-bit words."""
    mems = [WeightMemory.from_matrix(m) for m in matrices]
    payload = b"".join(
        mem.words.astype("<u4").tobytes() for mem in mems
    )
    with open(path, "wb") as f:
        f.write(WEIGHT_MAGIC)
        f.write(struct.pack("<II", WEIGHT_VERSION, len(mems)))
        for mem in mems:
            f.write(
                struct.pack(
                    "<III", mem.n_rows, mem.row_stride_words, mem.n_targets
                )
            )
        f.write(struct.pack("<I", zlib.crc32(payload)))
        f.write(payload)


def load_weight_image(path: str) -> list[WeightMemory]:
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != WEIGHT_MAGIC:
        raise ConfigError(path, "not a weight image (bad magic)")
    version, n_sections = struct.unpack_from("<II", data, 4)
    if version != WEIGHT_VERSION:
        raise ConfigError(path, f"unsupported weight image version {version}")
    off = 12
    geoms = []
    for _ in range(n_sections):
        geoms.append(struct.unpack_from("<III", data, off))
        off += 12
    (crc,) = struct.unpack_from("<I", data, off)
    off += 4
    payload = data[off:]
    if zlib.crc32(payload) != crc:
        raise ConfigError(path, "weight image checksum mismatch")
    mems = []
    pos = 0
    for rows, stride, n_targets in geoms:
        count = rows * stride
        words = np.frombuffer(
            payload, dtype="<u4", count=count, offset=pos
        ).reshape(rows, stride)
        pos += count * 4
        mems.append(WeightMemory(words.astype(np.uint32), n_targets))
    return mems


# ---------------------------------------------------------------------------
# network description

@dataclass
class NoiseSource:
    """Seeded external-event generator: one event per listed address per
    timestep with value drawn uniformly from [low, high]."""

    npu: int
    addrs: list[int]
    low: int
    high: int

    def __post_init__(self):
        if self.npu not in (1, 2):
            raise ConfigError("stimulus.noise.npu", f"must be 1 or 2, got {self.npu}")
        if not -128 <= self.low <= self.high <= 127:
            raise ConfigError(
                "stimulus.noise", f"need -128 <= low <= high <= 127, got [{self.low}, {self.high}]"
            )


@dataclass
class DcSource:
    """Constant external event applied every timestep."""

    npu: int
    addr: int
    value: int

    def __post_init__(self):
        if self.npu not in (1, 2):
            raise ConfigError("stimulus.dc.npu", f"must be 1 or 2, got {self.npu}")
        if not -128 <= self.value <= 127:
            raise ConfigError("stimulus.dc.value", f"must fit signed 8-bit, got {self.value}")


def _params_from_dict(d: dict, path: str) -> NeuronParams:
    try:
        return NeuronParams(
            a_num=int(d["a_num"]),
            b_num=int(d["b_num"]),
            v_r=int(d["v_r"]),
            v_t=int(d["v_t"]),
            v_reset=int(d["v_reset"]),
        )
    except KeyError as e:
        raise ConfigError(path, f"missing neuron field {e}") from e
    except ValueError as e:
        raise ConfigError(path, str(e)) from e


def _params_to_dict(p: NeuronParams) -> dict:
    return {
        "a_num": p.a_num,
        "b_num": p.b_num,
        "v_r": p.v_r,
        "v_t": p.v_t,
        "v_reset": p.v_reset,
    }


@dataclass
class NetworkDescription:
    """Everything needed to instantiate a Processor: the two NPU configs,
    their weight matrices, group-sparse mode, and declared stimulus."""

    npu1: NpuConfig
    npu2: NpuConfig
    weights1: np.ndarray  # (n1_active, n1_total)
    weights2: np.ndarray  # (n1_total + n2_active, n2_total) ff rows first
    gs_mode: str = "auto"  # auto: mask all-zero words; dense: read everything
    clock_hz: int = DEFAULT_CLOCK_HZ
    dc: list[DcSource] = field(default_factory=list)
    noise: list[NoiseSource] = field(default_factory=list)

    def __post_init__(self):
        if self.gs_mode not in ("auto", "dense"):
            raise ConfigError("gs_mode", f"must be auto or dense, got {self.gs_mode}")
        t1 = self.npu1.total_neurons
        t2 = self.npu2.total_neurons
        self.weights1 = np.asarray(self.weights1, dtype=np.int64)
        self.weights2 = np.asarray(self.weights2, dtype=np.int64)
        if self.weights1.shape != (self.npu1.active_neurons, t1):
            raise ConfigError(
                "weights.npu1",
                f"shape {self.weights1.shape}, expected {(self.npu1.active_neurons, t1)}",
            )
        if self.weights2.shape != (t1 + self.npu2.active_neurons, t2):
            raise ConfigError(
                "weights.npu2",
                f"shape {self.weights2.shape}, expected {(t1 + self.npu2.active_neurons, t2)}",
            )
        for src in self.dc + self.noise:
            cfg = self.npu1 if src.npu == 1 else self.npu2
            addrs = src.addrs if isinstance(src, NoiseSource) else [src.addr]
            for a in addrs:
                if not 0 <= a < cfg.total_neurons:
                    raise ConfigError(
                        "stimulus", f"address {a} out of range for npu{src.npu}"
                    )

    def build_processor(self) -> Processor:
        mem1 = WeightMemory.from_matrix(self.weights1)
        mem2 = WeightMemory.from_matrix(self.weights2)
        if self.gs_mode == "auto":
            gs1 = GroupSparseConfig.from_memory(mem1)
            gs2 = GroupSparseConfig.from_memory(mem2)
        else:
            gs1 = GroupSparseConfig.dense(mem1.n_targets)
            gs2 = GroupSparseConfig.dense(mem2.n_targets)
        npu1 = Npu(self.npu1, mem1, gs=gs1)
        npu2 = Npu(self.npu2, mem2, gs=gs2, n_ff_sources=self.npu1.total_neurons)
        return Processor(npu1, npu2, clock_hz=self.clock_hz)

    # -- serialization ------------------------------------------------------

    def _npu_to_dict(self, cfg: NpuConfig) -> dict:
        pdicts = [_params_to_dict(p) for p in cfg.params]
        neurons = pdicts[0] if all(d == pdicts[0] for d in pdicts) else pdicts
        d = {
            "max_neurons": cfg.max_neurons,
            "active_neurons": cfg.active_neurons,
            "decay_a": cfg.decay_a,
            "neurons": neurons,
            "global": {
                "mode": cfg.global_neuron.mode,
                "out_weight": cfg.global_neuron.out_weight,
                "params": _params_to_dict(cfg.global_neuron.params),
            },
        }
        if cfg.chop is not None:
            d["chop"] = list(cfg.chop)
        return d

    @staticmethod
    def _npu_from_dict(d: dict, path: str) -> NpuConfig:
        try:
            active = int(d["active_neurons"])
            neurons = d["neurons"]
            if isinstance(neurons, dict):
                params = [_params_from_dict(neurons, f"{path}.neurons")] * active
            else:
                params = [
                    _params_from_dict(nd, f"{path}.neurons[{i}]")
                    for i, nd in enumerate(neurons)
                ]
            g = d["global"]
            cfg = NpuConfig(
                max_neurons=int(d["max_neurons"]),
                active_neurons=active,
                params=params,
                global_neuron=GlobalNeuronConfig(
                    params=_params_from_dict(g["params"], f"{path}.global.params"),
                    out_weight=int(g.get("out_weight", 0)),
                    mode=g.get("mode", "excitatory"),
                ),
                decay_a=int(d.get("decay_a", 3)),
                chop=tuple(d["chop"]) if "chop" in d else None,
            )
        except KeyError as e:
            raise ConfigError(path, f"missing field {e}") from e
        except ValueError as e:
            raise ConfigError(path, str(e)) from e
        return cfg

    def save(self, path: str) -> None:
        """Write the YAML description plus the weight image next to it."""
        weight_name = os.path.splitext(os.path.basename(path))[0] + ".weights.bin"
        doc = {
            "version": CONFIG_VERSION,
            "clock_hz": self.clock_hz,
            "weight_image": weight_name,
            "gs_mode": self.gs_mode,
            "npu1": self._npu_to_dict(self.npu1),
            "npu2": self._npu_to_dict(self.npu2),
        }
        stim = {}
        if self.dc:
            stim["dc"] = [
                {"npu": s.npu, "addr": s.addr, "value": s.value} for s in self.dc
            ]
        if self.noise:
            stim["noise"] = [
                {"npu": s.npu, "addrs": list(s.addrs), "low": s.low, "high": s.high}
                for s in self.noise
            ]
        if stim:
            doc["stimulus"] = stim
        save_weight_image(
            os.path.join(os.path.dirname(path) or ".", weight_name),
            [self.weights1, self.weights2],
        )
        with open(path, "w") as f:
            yaml.safe_dump(doc, f, sort_keys=False)

    @classmethod
    def load(cls, path: str) -> "NetworkDescription":
        with open(path) as f:
            doc = yaml.safe_load(f)
        if not isinstance(doc, dict):
            raise ConfigError(path, "not a mapping")
        version = doc.get("version")
        if version != CONFIG_VERSION:
            raise ConfigError("version", f"unsupported config version {version}")
        npu1 = cls._npu_from_dict(doc["npu1"], "npu1")
        npu2 = cls._npu_from_dict(doc["npu2"], "npu2")
        mems = load_weight_image(
            os.path.join(os.path.dirname(path) or ".", doc["weight_image"])
        )
        if len(mems) != 2:
            raise ConfigError("weight_image", f"expected 2 sections, got {len(mems)}")
        stim = doc.get("stimulus", {}) or {}
        dc = [
            DcSource(npu=int(s["npu"]), addr=int(s["addr"]), value=int(s["value"]))
            for s in stim.get("dc", [])
        ]
        noise = [
            NoiseSource(
                npu=int(s["npu"]),
                addrs=[int(a) for a in s["addrs"]],
                low=int(s["low"]),
                high=int(s["high"]),
            )
            for s in stim.get("noise", [])
        ]
        return cls(
            npu1=npu1,
            npu2=npu2,
            weights1=mems[0].unpack(),
            weights2=mems[1].unpack(),
            gs_mode=doc.get("gs_mode", "auto"),
            clock_hz=int(doc.get("clock_hz", DEFAULT_CLOCK_HZ)),
            dc=dc,
            noise=noise,
        )


def load_network(path: str) -> NetworkDescription:
    """Load and fully validate a network description file."""
    return NetworkDescription.load(path)


# ---------------------------------------------------------------------------
# stimulus trace / raster / cycles

@dataclass
class StimulusTrace:
    """Ordered external events: (timestep, npu_id, neuron_addr, value)."""

    records: list[tuple[int, int, int, int]] = field(default_factory=list)

    def __post_init__(self):
        last = -1
        for i, (t, npu, addr, value) in enumerate(self.records):
            if t < last:
                raise ValueError(f"record {i}: timesteps must be non-decreasing")
            last = t
            if npu not in (1, 2):
                raise ValueError(f"record {i}: npu must be 1 or 2, got {npu}")
            if not -128 <= value <= 127:
                raise ValueError(f"record {i}: value must fit signed 8-bit")

    def by_timestep(self) -> dict[int, list[tuple[int, int, int]]]:
        out: dict[int, list[tuple[int, int, int]]] = {}
        for t, npu, addr, value in self.records:
            out.setdefault(t, []).append((npu, addr, value))
        return out

    def save(self, path: str) -> None:
        with open(path, "w") as f:
            f.write("timestep,npu,neuron,value\n")
            for t, npu, addr, value in self.records:
                f.write(f"{t},{npu},{addr},{value}\n")

    @classmethod
    def load(cls, path: str) -> "StimulusTrace":
        records = []
        with open(path) as f:
            header = f.readline().strip()
            if header != "timestep,npu,neuron,value":
                raise ValueError(f"{path}: unexpected stimulus header {header!r}")
            for line in f:
                line = line.strip()
                if not line:
                    continue
                t, npu, addr, value = (int(x) for x in line.split(","))
                records.append((t, npu, addr, value))
        return cls(records=records)


RASTER_HEADER = "timestep,npu,neuron"
CYCLES_FIELDS = ["external", "scan", "mac", "decay", "pde"]
CYCLES_HEADER = (
    "timestep,"
    + ",".join(f"npu1_{f}" for f in CYCLES_FIELDS)
    + ","
    + ",".join(f"npu2_{f}" for f in CYCLES_FIELDS)
    + ",total_parallel,total_serial,model"
)


def save_raster(path: str, records: list[tuple[int, int, int]]) -> None:
    records = sorted(records)
    with open(path, "w") as f:
        f.write(RASTER_HEADER + "\n")
        for t, npu, addr in records:
            f.write(f"{t},{npu},{addr}\n")


def load_raster(path: str) -> list[tuple[int, int, int]]:
    records = []
    with open(path) as f:
        header = f.readline().strip()
        if header != RASTER_HEADER:
            raise ValueError(f"{path}: unexpected raster header {header!r}")
        for line in f:
            line = line.strip()
            if not line:
                continue
            t, npu, addr = (int(x) for x in line.split(","))
            records.append((t, npu, addr))
    return records


def save_cycles(path: str, rows: list[tuple[int, CycleReport]]) -> None:
    with open(path, "w") as f:
        f.write(CYCLES_HEADER + "\n")
        for t, rep in rows:
            vals = [t]
            for pc in (rep.npu1, rep.npu2):
                vals += [getattr(pc, name) for name in CYCLES_FIELDS]
            vals += [rep.total_parallel, rep.total_serial]
            f.write(",".join(str(v) for v in vals) + f",{rep.model}\n")


# ---------------------------------------------------------------------------
# run harness

def run(
    desc: NetworkDescription,
    stimulus: StimulusTrace | None,
    steps: int,
    seed: int = 0,
) -> tuple[list[tuple[int, int, int]], list[tuple[int, CycleReport]], CycleReport]:
    """Execute `steps` timesteps; returns (raster records, per-step cycle
    rows, aggregate report). Only declared noise generators consume the seed."""
    proc = desc.build_processor()
    by_t = stimulus.by_timestep() if stimulus is not None else {}
    lcg = Lcg(seed)
    raster: list[tuple[int, int, int]] = []
    cycle_rows: list[tuple[int, CycleReport]] = []
    agg = CycleReport()
    for t in range(steps):
        events: list[tuple[int, ExternalEvent]] = []
        for npu, addr, value in by_t.get(t, []):
            events.append((npu, ExternalEvent(neuron_addr=addr, value=value)))
        for dc in desc.dc:
            events.append((dc.npu, ExternalEvent(neuron_addr=dc.addr, value=dc.value)))
        for ns in desc.noise:
            for addr in ns.addrs:
                events.append(
                    (ns.npu, ExternalEvent(neuron_addr=addr,
                                           value=lcg.int_range(ns.low, ns.high)))
                )
        s1, s2, rep = proc.timestep(events)
        for addr in np.nonzero(s1)[0]:
            raster.append((t, 1, int(addr)))
        for addr in np.nonzero(s2)[0]:
            raster.append((t, 2, int(addr)))
        cycle_rows.append((t, rep))
        agg.merge(rep)
    return raster, cycle_rows, agg
