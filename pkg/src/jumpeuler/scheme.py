"""Truncated-dimension randomized Euler scheme.

One step from ``x`` at ``t_j`` reads

    x' = x + a(theta_j, x) h_j + sum_{k <= M} b^(k)(t_j, x) dW_{j,k}
           + sum_{jumps in (t_j, t_{j+1}]} c(t_j, x, xi)

with ``theta_j ~ U[t_j, t_{j+1}]``. Every coefficient sees the pre-step state.

Draw protocol per trajectory (each item is its own keyed stream):

* INITIAL      initial value, only when the model's initial value is random
* JUMPS/MARKS  the jump stream, shared by every grid of the trajectory
* WIENER_FINE  ``full`` noise: the finest grid needed, step-major;
               ``collapsed`` noise: scalar projections ``sum_k w_k dW_k``
* THETA_RARE / THETA_FINE  uniform drift times of the coarse / fine scheme,
               skipped for time-homogeneous drifts

``collapsed`` noise is available for factorized diffusions
``b^(k)(t, x) = base(t, x) w_k``. It has the same joint law as ``full`` noise
but costs one Gaussian per step instead of one per dimension.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DimensionMismatch, InvalidParameter, NonFiniteState
from .model import ModelSpec, truncated_diffusion_apply
from .noise import (
    Channel,
    JumpStream,
    NoiseGrid,
    aggregate_to_rare,
    generate_jump_stream,
    grid_time,
    jump_windows,
    pooled_generator,
    StreamKey,
)


@dataclass(frozen=True)
class SchemeParams:
    M: int
    n: int
    p: float = 2.0

    def __post_init__(self):
        if not (int(self.M) == self.M and self.M >= 1):
            raise InvalidParameter("M", "must be an integer >= 1")
        if not (int(self.n) == self.n and self.n >= 1):
            raise InvalidParameter("n", "must be an integer >= 1")
        if not self.p >= 2:
            raise InvalidParameter("p", "must be >= 2")


@dataclass(frozen=True)
class StepInputs:
    """Inputs of one step. Exactly one of ``dW`` (per-dimension increments)
    and ``projection`` (scalar ``sum_k w_k dW_k``, factorized models only)
    is given."""

    t_j: float
    h: float
    theta_j: float
    dW: Optional[np.ndarray] = None
    projection: Optional[float] = None
    jump_times: np.ndarray = np.empty(0)
    jump_marks: np.ndarray = np.empty((0, 1))

    def check(self):
        if not self.t_j <= self.theta_j <= self.t_j + self.h:
            raise InvalidParameter("theta_j", "must lie in [t_j, t_j + h]")
        for tau in self.jump_times:
            if not self.t_j < tau <= self.t_j + self.h:
                raise InvalidParameter("jump_times", f"{tau} outside (t_j, t_j + h]")
        if len(self.jump_times) != len(self.jump_marks):
            raise DimensionMismatch("jump times and marks differ in length")
        if (self.dW is None) == (self.projection is None):
            raise InvalidParameter("dW", "give exactly one of dW and projection")


@dataclass(frozen=True)
class TerminalValue:
    value: np.ndarray
    jump_count: int
    params: SchemeParams
    path: Optional[np.ndarray] = None


def _step(model, M, x, t_j, h, theta, dW, projection, marks):
    xn = x + model.drift(theta, x) * h
    if projection is not None:
        xn = xn + model.diffusion.base(t_j, x) * projection
    else:
        xn = xn + truncated_diffusion_apply(model, M, t_j, x, dW)
    for y in marks:
        xn = xn + model.jump_coeff(t_j, x, y)
    return xn


def randomized_euler_step(model: ModelSpec, M: int, x, inputs: StepInputs) -> np.ndarray:
    """Advance the scheme by one step; raises ``NonFiniteState`` on overflow."""
    inputs.check()
    if inputs.dW is not None and len(inputs.dW) != M:
        raise DimensionMismatch(f"expected {M} increments, got {len(inputs.dW)}")
    if inputs.projection is not None and not model.factorized:
        raise InvalidParameter("projection", "needs a FactorizedDiffusion")
    x = np.asarray(x, dtype=float).reshape(model.dim)
    xn = _step(model, M, x, inputs.t_j, inputs.h, inputs.theta_j, inputs.dW,
               inputs.projection, inputs.jump_marks)
    if not np.all(np.isfinite(xn)):
        raise NonFiniteState(0, xn)
    return xn


# ---------------------------------------------------------------------------
# engine selection


def _resolve(model, noise, engine, record_path=False):
    if noise == "auto":
        noise = "collapsed" if model.factorized else "full"
    if noise not in ("full", "collapsed"):
        raise InvalidParameter("noise", f"unknown noise mode {noise!r}")
    if noise == "collapsed" and not model.factorized:
        raise InvalidParameter("noise", "collapsed noise needs a FactorizedDiffusion")
    can_compile = model.compiled is not None and noise == "collapsed" and not record_path
    if engine == "auto":
        engine = "compiled" if can_compile else "python"
    if engine not in ("python", "compiled"):
        raise InvalidParameter("engine", f"unknown engine {engine!r}")
    if engine == "compiled" and not can_compile:
        raise InvalidParameter("engine", "compiled engine needs compiled coefficients and collapsed noise")
    return noise, engine


class _Trajectory:
    """Lazily created keyed streams plus the shared jump stream of one trajectory."""

    def __init__(self, model, seed, index):
        self.model = model
        self.seed = seed
        self.index = index
        self.eta = model.initial_value(lambda: self.rng(Channel.INITIAL))
        self.jumps = generate_jump_stream(
            model.jump_law, model.horizon, StreamKey(seed, index, Channel.JUMPS), pooled=True
        )

    def rng(self, channel):
        return pooled_generator(self.seed, self.index, channel)

    def thetas(self, channel, count):
        if self.model.drift_time_homogeneous:
            return None
        return self.rng(channel).random(count)


def _theta(t0, h, u, j):
    return t0 if u is None else t0 + u[j] * h


def _group_marks(jumps: JumpStream, windows, N):
    out = [jumps.marks[:0]] * N
    if len(jumps):
        for j in np.unique(windows):
            out[j] = jumps.marks[windows == j]
    return out


def _fail(step, value):
    raise NonFiniteState(step, value)


# ---------------------------------------------------------------------------
# reference (pure Python) engine


def _py_terminal(model, M, n, tr, noise, ref_M=None):
    """Returns (x_T, path, endpoint data for a reference solution)."""
    T = model.horizon
    marks = _group_marks(tr.jumps, jump_windows(tr.jumps.times, T, n), n)
    u = tr.thetas(Channel.THETA_RARE, n)
    wrng = tr.rng(Channel.WIENER_FINE)
    width = M if ref_M is None else ref_M
    if noise == "full":
        dW = wrng.standard_normal((n, width)) * math.sqrt(T / n)
    else:
        sd = math.sqrt(T / n * model.diffusion.band_sq_sum(0, M))
        z = wrng.standard_normal(n)
    x = tr.eta.copy()
    path = [x]
    proj = 0.0
    t0 = 0.0
    for j in range(n):
        t1 = grid_time(T, j + 1, n)
        h = t1 - t0
        if noise == "full":
            xn = _step(model, M, x, t0, h, _theta(t0, h, u, j), dW[j, :M], None, marks[j])
        else:
            P = sd * z[j]
            proj += P
            xn = _step(model, M, x, t0, h, _theta(t0, h, u, j), None, P, marks[j])
        if not np.all(np.isfinite(xn)):
            _fail(j, xn)
        x = xn
        path.append(x)
        t0 = t1
    extra = None
    if ref_M is not None:
        if noise == "full":
            acc = np.zeros(width)
            for j in range(n):
                acc = acc + dW[j]
            extra = acc
        else:
            sd_hi = math.sqrt(T * model.diffusion.band_sq_sum(M, ref_M))
            extra = proj + sd_hi * wrng.standard_normal()
    return x, np.array(path), extra


def _py_coupled(model, M, n, tr, noise, fM, fn):
    T = model.horizon
    N = n * fn
    Mf = M * fM
    win = jump_windows(tr.jumps.times, T, N)
    marks_f = _group_marks(tr.jumps, win, N)
    marks_r = _group_marks(tr.jumps, win // fn, n)
    ur = tr.thetas(Channel.THETA_RARE, n)
    uf = tr.thetas(Channel.THETA_FINE, N)
    wrng = tr.rng(Channel.WIENER_FINE)
    sqH = math.sqrt(T / N)
    if noise == "collapsed":
        diff = model.diffusion
        v_lo = diff.band_sq_sum(0, M)
        v_f = v_lo + diff.band_sq_sum(M, Mf)
        sd_fine = math.sqrt(T / N * v_f)
        rho = v_lo / v_f if v_f > 0 else 0.0
        sd_resid = math.sqrt(T / n * v_lo * (v_f - v_lo) / v_f) if v_f > 0 else 0.0
    xr = tr.eta.copy()
    xf = tr.eta.copy()
    t0 = 0.0
    s0 = 0.0
    for j in range(n):
        if noise == "full":
            slab = NoiseGrid(wrng.standard_normal((fn, Mf)) * sqH, T * (fn / N))
            rare_dW = aggregate_to_rare(slab, fn, M).increments[0]
        else:
            z = wrng.standard_normal(fn + 1)
            F = 0.0
        for i in range(fn):
            g = j * fn + i
            s1 = grid_time(T, g + 1, N)
            H = s1 - s0
            if noise == "full":
                xn = _step(model, Mf, xf, s0, H, _theta(s0, H, uf, g), slab.increments[i], None,
                           marks_f[g])
            else:
                P = sd_fine * z[i]
                F = F + P
                xn = _step(model, Mf, xf, s0, H, _theta(s0, H, uf, g), None, P, marks_f[g])
            if not np.all(np.isfinite(xn)):
                _fail(g, xn)
            xf = xn
            s0 = s1
        t1 = grid_time(T, j + 1, n)
        h = t1 - t0
        if noise == "full":
            xn = _step(model, M, xr, t0, h, _theta(t0, h, ur, j), rare_dW, None, marks_r[j])
        else:
            R = rho * F + sd_resid * z[fn]
            xn = _step(model, M, xr, t0, h, _theta(t0, h, ur, j), None, R, marks_r[j])
        if not np.all(np.isfinite(xn)):
            _fail(j, xn)
        xr = xn
        t0 = t1
    return xr, xf


# ---------------------------------------------------------------------------
# compiled engine


_EMPTY = np.empty(0)


def _kernel_jumps(tr):
    times = tr.jumps.times
    return times, np.ascontiguousarray(tr.jumps.marks[:, 0])


def _nb_terminal(model, M, n, tr, ref_M=None):
    from ._kernels import specialized

    T = model.horizon
    c = model.compiled
    diff = model.diffusion
    sd = math.sqrt(T / n * diff.band_sq_sum(0, M))
    times, marks = _kernel_jumps(tr)
    u = tr.thetas(Channel.THETA_RARE, n)
    z = tr.rng(Channel.WIENER_FINE).standard_normal(n + (ref_M is not None))
    terminal, _ = specialized(c.drift, c.base, c.jump)
    x, proj, failed = terminal(
        c.params, float(tr.eta[0]), float(T), int(n), sd, z, _EMPTY if u is None else u,
        times, marks, jump_windows(times, T, n),
    )
    if failed >= 0:
        _fail(failed, x)
    extra = None
    if ref_M is not None:
        extra = proj + math.sqrt(T * diff.band_sq_sum(M, ref_M)) * z[n]
    return np.array([x]), extra


def _nb_coupled(model, M, n, tr, fM, fn):
    from ._kernels import specialized

    T = model.horizon
    c = model.compiled
    diff = model.diffusion
    N = n * fn
    v_lo = diff.band_sq_sum(0, M)
    v_f = v_lo + diff.band_sq_sum(M, M * fM)
    sd_fine = math.sqrt(T / N * v_f)
    rho = v_lo / v_f if v_f > 0 else 0.0
    sd_resid = math.sqrt(T / n * v_lo * (v_f - v_lo) / v_f) if v_f > 0 else 0.0
    times, marks = _kernel_jumps(tr)
    ur = tr.thetas(Channel.THETA_RARE, n)
    uf = tr.thetas(Channel.THETA_FINE, N)
    z = tr.rng(Channel.WIENER_FINE).standard_normal(n * (fn + 1))
    _, coupled = specialized(c.drift, c.base, c.jump)
    xr, xf, failed, fine_failed = coupled(
        c.params, float(tr.eta[0]), float(T), int(n), int(fn), sd_fine, rho, sd_resid, z,
        _EMPTY if ur is None else ur, _EMPTY if uf is None else uf, times, marks,
        jump_windows(times, T, N),
    )
    if failed >= 0:
        _fail(failed, xf if fine_failed else xr)
    return np.array([xr]), np.array([xf])


# ---------------------------------------------------------------------------
# public simulators


def simulate_terminal(model: ModelSpec, params: SchemeParams, seed: int, index: int = 0, *,
                      noise: str = "auto", engine: str = "auto",
                      record_path: bool = False) -> TerminalValue:
    """Terminal value of the scheme at ``(params.M, params.n)`` for trajectory
    ``index``; a pure function of its arguments."""
    noise, engine = _resolve(model, noise, engine, record_path)
    tr = _Trajectory(model, seed, index)
    if engine == "compiled":
        x, _ = _nb_terminal(model, params.M, params.n, tr)
        path = None
    else:
        x, path, _ = _py_terminal(model, params.M, params.n, tr, noise)
    return TerminalValue(x, len(tr.jumps), params, path if record_path else None)


def simulate_coupled_pair(model: ModelSpec, params: SchemeParams, seed: int, index: int = 0,
                          fine_M_mult: int = 10, fine_n_mult: int = 100, *,
                          noise: str = "auto", engine: str = "auto"):
    """Coarse scheme at ``(M, n)`` and fine scheme at
    ``(M * fine_M_mult, n * fine_n_mult)`` driven by one fine noise draw and
    one jump stream. Returns ``(rare, fine)`` terminal values."""
    if fine_M_mult < 1 or fine_n_mult < 1:
        raise InvalidParameter("multipliers", "must be >= 1")
    noise, engine = _resolve(model, noise, engine)
    tr = _Trajectory(model, seed, index)
    if engine == "compiled":
        xr, xf = _nb_coupled(model, params.M, params.n, tr, fine_M_mult, fine_n_mult)
    else:
        xr, xf = _py_coupled(model, params.M, params.n, tr, noise, fine_M_mult, fine_n_mult)
    fine_params = SchemeParams(params.M * fine_M_mult, params.n * fine_n_mult, params.p)
    k = len(tr.jumps)
    return TerminalValue(xr, k, params), TerminalValue(xf, k, fine_params)


def simulate_with_reference(model: ModelSpec, params: SchemeParams, seed: int, index: int = 0,
                            ref_mult: int = 10, *, noise: str = "auto", engine: str = "auto"):
    """Scheme terminal value together with the closed-form truncated solution
    at ``M * ref_mult`` dimensions, both driven by the same noise."""
    from .errors import MissingReference

    ref = model.exact_reference
    if ref is None:
        raise MissingReference(f"model {model.name!r} has no exact reference")
    noise, engine = _resolve(model, noise, engine)
    if noise == "collapsed" and ref.from_projection is None:
        noise, engine = _resolve(model, "full", "python")
    ref_M = params.M * ref_mult
    tr = _Trajectory(model, seed, index)
    if engine == "compiled":
        x, proj = _nb_terminal(model, params.M, params.n, tr, ref_M)
    else:
        x, _, proj = _py_terminal(model, params.M, params.n, tr, noise, ref_M)
    if noise == "full":
        exact = ref.from_endpoints(tr.eta, proj, tr.jumps)
    else:
        exact = ref.from_projection(tr.eta, ref_M, proj, tr.jumps)
    return TerminalValue(x, len(tr.jumps), params), np.asarray(exact, dtype=float).reshape(model.dim)
