"""Reproducible random streams, compound-Poisson jump streams and coupled
Wiener increment grids."""
from __future__ import annotations

import hashlib
import math
import struct
import threading
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .errors import DimensionMismatch, InvalidParameter
from .model import JumpLaw

_MASK64 = (1 << 64) - 1


class Channel(IntEnum):
    WIENER_FINE = 0
    THETA_RARE = 1
    THETA_FINE = 2
    JUMPS = 3
    MARKS = 4
    INITIAL = 5


@dataclass(frozen=True)
class StreamKey:
    base_seed: int
    trajectory_index: int
    channel: Channel

    def generator(self) -> np.random.Generator:
        return make_generator(self.base_seed, self.trajectory_index, self.channel)


def _stream_state(base_seed, trajectory_index, channel) -> dict:
    """SFC64 state for a key: blake2b of the key gives the three state words,
    the counter starts at 1 and 12 warm-up outputs are discarded afterwards,
    as in SFC64's own seeding."""
    if trajectory_index < 0:
        raise InvalidParameter("trajectory_index", "must be >= 0")
    key = struct.pack("<QQQ", int(base_seed) & _MASK64, int(trajectory_index), int(channel))
    words = np.frombuffer(hashlib.blake2b(key, digest_size=24, person=b"jumpeuler").digest(), "<u8")
    state = np.empty(4, dtype=np.uint64)
    state[:3] = words
    state[3] = 1
    return {"bit_generator": "SFC64", "state": {"state": state}, "has_uint32": 0, "uinteger": 0}


def _reset(gen: np.random.Generator, state: dict) -> np.random.Generator:
    bg = gen.bit_generator
    bg.state = state
    bg.random_raw(12)
    return gen


def make_generator(base_seed, trajectory_index, channel) -> np.random.Generator:
    """Fresh generator for the substream keyed by ``(base_seed, index, channel)``.

    The key is hashed, so nearby keys give unrelated states, and the stream of
    a trajectory never depends on how trajectories are spread over workers.
    """
    state = _stream_state(base_seed, trajectory_index, channel)
    return _reset(np.random.Generator(np.random.SFC64(0)), state)


_pool = threading.local()


def pooled_generator(base_seed, trajectory_index, channel) -> np.random.Generator:
    """Same stream as ``make_generator`` but reusing one generator object per
    (thread, channel); a later call for the same channel in the same thread
    restarts the object. For code that finishes with a trajectory before
    starting the next one."""
    gens = getattr(_pool, "gens", None)
    if gens is None:
        gens = _pool.gens = {}
    gen = gens.get(int(channel))
    if gen is None:
        gen = gens[int(channel)] = np.random.Generator(np.random.SFC64(0))
    return _reset(gen, _stream_state(base_seed, trajectory_index, channel))


@dataclass(frozen=True)
class JumpStream:
    times: np.ndarray
    marks: np.ndarray
    intensity: float
    horizon: float

    def __post_init__(self):
        if len(self.times) != len(self.marks):
            raise DimensionMismatch("times and marks differ in length")

    def __len__(self):
        return len(self.times)


def _source(seed, index, channel, pooled):
    return (pooled_generator if pooled else make_generator)(seed, index, channel)


def generate_jump_stream(law: JumpLaw, T: float, key: StreamKey, pooled: bool = False) -> JumpStream:
    """Arrival times of a rate-``law.intensity`` Poisson process on ``(0, T]``
    with iid marks.

    Times come from ``key`` (exponential gaps, accumulated in order); marks
    from the MARKS channel of the same trajectory.
    """
    if not T > 0:
        raise InvalidParameter("T", "must be > 0")
    lam = float(law.intensity)
    if lam == 0.0:
        return JumpStream(np.empty(0), np.empty((0, law.mark_dim)), lam, T)

    rng = _source(key.base_seed, key.trajectory_index, Channel.JUMPS, pooled)
    chunk = max(8, int(lam * T + 4.0 * math.sqrt(lam * T)) + 1)
    parts = []
    t = 0.0
    while True:
        # cumsum adds left to right, so this equals the running sum t += gap
        acc = np.cumsum(np.concatenate(([t], rng.standard_exponential(chunk) / lam)))[1:]
        stop = int(np.searchsorted(acc, T, side="right"))
        parts.append(acc[:stop])
        if stop < chunk:
            break
        t = acc[-1]
    times = np.concatenate(parts)
    if len(times) == 0:
        marks = np.empty((0, law.mark_dim))
    elif law.mark_sampler is None:
        marks = np.ones((len(times), law.mark_dim))
    else:
        marks_rng = _source(key.base_seed, key.trajectory_index, Channel.MARKS, pooled)
        marks = law.sample_marks(marks_rng, len(times))
    return JumpStream(times, marks, lam, T)


def grid_time(T: float, j: int, N: int) -> float:
    """Grid point ``t_j`` of an ``N``-step uniform grid on ``[0, T]``.

    Computed as ``T * (j / N)`` so nested grids share grid points exactly and
    ``t_N == T``.
    """
    return T * (j / N)


def jump_windows(times: np.ndarray, T: float, N: int) -> np.ndarray:
    """Index ``j`` of the half-open window ``(t_j, t_{j+1}]`` holding each time."""
    out = np.empty(len(times), dtype=np.int64)
    for k, tau in enumerate(times):
        j = min(max(int(math.ceil(tau * N / T)) - 1, 0), N - 1)
        while j > 0 and tau <= grid_time(T, j, N):
            j -= 1
        while j < N - 1 and tau > grid_time(T, j + 1, N):
            j += 1
        out[k] = j
    return out


@dataclass(frozen=True)
class NoiseGrid:
    """Wiener increments ``increments[i, k] = W_{k+1}(t_{i+1}) - W_{k+1}(t_i)``."""

    increments: np.ndarray
    horizon: float

    @property
    def steps(self):
        return self.increments.shape[0]

    @property
    def dims(self):
        return self.increments.shape[1]

    @property
    def step_size(self):
        return self.horizon / self.steps


def generate_fine_grid(M_fine: int, n_fine: int, T: float, key: StreamKey) -> NoiseGrid:
    """Draw an ``n_fine x M_fine`` grid of N(0, T/n_fine) increments.

    Draw order is step-major, dimension-minor: drawing the grid in slabs of
    whole steps reproduces the same numbers.
    """
    if n_fine < 1:
        raise InvalidParameter("n_fine", "must be >= 1")
    if M_fine < 0:
        raise InvalidParameter("M_fine", "must be >= 0")
    if not T > 0:
        raise InvalidParameter("T", "must be > 0")
    rng = key.generator()
    z = rng.standard_normal((n_fine, M_fine))
    return NoiseGrid(z * math.sqrt(T / n_fine), T)


def aggregate_to_rare(fine: NoiseGrid, ratio: int, M_rare: int) -> NoiseGrid:
    """Sum blocks of ``ratio`` consecutive fine steps, keeping ``M_rare`` dims.

    Each rare entry is accumulated left to right, so the result is bit-exact
    against a plain sequential loop.
    """
    if ratio < 1 or fine.steps % ratio:
        raise DimensionMismatch(f"{fine.steps} fine steps not divisible by ratio {ratio}")
    if M_rare < 0 or M_rare > fine.dims:
        raise DimensionMismatch(f"M_rare={M_rare} exceeds fine dims {fine.dims}")
    if ratio == 1:
        return NoiseGrid(fine.increments[:, :M_rare].copy(), fine.horizon)
    blocks = fine.increments.reshape(fine.steps // ratio, ratio, fine.dims)
    acc = np.zeros((fine.steps // ratio, M_rare))
    for j in range(ratio):
        acc = acc + blocks[:, j, :M_rare]
    return NoiseGrid(acc, fine.horizon)
