"""Model description types for jump-diffusion SDEs driven by a countably
dimensional Wiener process and a compound Poisson jump measure.

Coefficient callables follow a single-trajectory convention:

* ``drift(t, x) -> (d,)``
* ``diffusion.eval_term(j, t, x) -> (d,)`` for ``j = 1, 2, ...``
* ``jump_coeff(t, x, y) -> (d,)`` with ``y`` a mark of shape ``(d',)``

``x`` is always a float64 array of shape ``(d,)``. All of them must be pure.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

import numpy as np

from .errors import DimensionMismatch, InvalidParameter, NonFiniteCoefficient


@dataclass(frozen=True)
class ClassParams:
    """Parameters of the admissible input-data class. Metadata only."""

    p: float = 2.0
    rho1: float = 1.0
    rho2: float = 1.0
    lipschitz_L: float = 1.0
    growth_D: float = 1.0
    tail_C: float = 1.0

    def __post_init__(self):
        if not self.p >= 2:
            raise InvalidParameter("p", "must be >= 2")
        for name in ("rho1", "rho2"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise InvalidParameter(name, "must lie in (0, 1]")
        for name in ("lipschitz_L", "growth_D", "tail_C"):
            if not getattr(self, name) >= 0:
                raise InvalidParameter(name, "must be nonnegative")


@dataclass(frozen=True)
class JumpLaw:
    """Finite Levy measure written as ``intensity * (mark distribution)``.

    ``mark_sampler(rng, size)`` returns an array of shape ``(size, mark_dim)``
    of iid marks; consecutive calls on one generator continue the same iid
    sequence.
    """

    intensity: float
    mark_dim: int = 1
    mark_sampler: Optional[Callable[[np.random.Generator, int], np.ndarray]] = None
    mark_p_moment: Optional[float] = None

    def __post_init__(self):
        if not self.intensity >= 0 or not math.isfinite(self.intensity):
            raise InvalidParameter("intensity", "must be finite and >= 0")
        if self.mark_dim < 1:
            raise InvalidParameter("mark_dim", "must be >= 1")

    def sample_marks(self, rng, size):
        if self.mark_sampler is None:
            return np.ones((size, self.mark_dim))
        marks = np.asarray(self.mark_sampler(rng, size), dtype=float)
        return marks.reshape(size, self.mark_dim)


@dataclass(frozen=True)
class SeriesDiffusion:
    """Diffusion ``b = (b^(1), b^(2), ...)`` given term by term.

    ``tail_delta(k)`` is the user-supplied sequence bounding the truncation
    error ``||b - P_k b|| <= C (1 + ||x||) delta(k)``. ``None`` means unknown
    (or a zero diffusion).
    """

    eval_term: Callable[[int, float, np.ndarray], np.ndarray]
    tail_delta: Optional[Callable[[int], float]] = None


class FactorizedDiffusion(SeriesDiffusion):
    """Diffusion of the form ``b^(j)(t, x) = base(t, x) * weight(j)``.

    For such models the truncated Wiener sum only enters through the scalar
    projection ``sum_j weight(j) dW_j``, which lets the simulator draw one
    Gaussian per step instead of one per dimension.
    """

    def __init__(self, base, weight, tail_delta=None):
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "weight", weight)
        object.__setattr__(self, "_band_cache", {})

        def eval_term(j, t, x):
            return base(t, x) * weight(j)

        super().__init__(eval_term=eval_term, tail_delta=tail_delta)

    def band_sq_sum(self, lo, hi):
        """``sum_{lo < j <= hi} weight(j)**2``, summed in ascending j."""
        if hi <= lo:
            return 0.0
        key = (lo, hi)
        cached = self._band_cache.get(key)
        if cached is None:
            w = np.array([self.weight(j) for j in range(lo + 1, hi + 1)], dtype=float)
            cached = float(np.add.accumulate(w * w)[-1])
            self._band_cache[key] = cached
        return cached


@dataclass(frozen=True)
class CompiledCoefficients:
    """numba-jitted scalar coefficients used by the compiled engine.

    Signatures (all scalars, ``params`` a float64 array):
    ``drift(t, x, params)``, ``base(t, x, params)``, ``jump(t, x, y, params)``.
    They must agree with the Python coefficients of the owning model.
    """

    drift: Any
    base: Any
    jump: Any
    params: np.ndarray = field(default_factory=lambda: np.zeros(1))


@dataclass(frozen=True)
class ExactReference:
    """Closed-form terminal value of the truncated equation.

    ``from_endpoints(eta, endpoints, jumps)`` takes the Wiener endpoints
    ``W_1(T) .. W_Mref(T)``; ``from_projection(eta, m_ref, projection, jumps)``
    takes ``sum_j weight(j) W_j(T)`` for factorized diffusions.
    """

    from_endpoints: Callable
    from_projection: Optional[Callable] = None


@dataclass(frozen=True)
class ModelSpec:
    dim: int
    drift: Callable[[float, np.ndarray], np.ndarray]
    diffusion: SeriesDiffusion
    jump_coeff: Callable[[float, np.ndarray, np.ndarray], np.ndarray]
    jump_law: JumpLaw
    initial: Any
    horizon: float
    class_params: ClassParams = field(default_factory=ClassParams)
    exact_reference: Optional[ExactReference] = None
    compiled: Optional[CompiledCoefficients] = None
    drift_time_homogeneous: bool = False
    name: str = "custom"

    def initial_value(self, rng_factory):
        """Draw (or return) the initial value; ``rng_factory`` is only
        called when ``initial`` is a sampler."""
        if callable(self.initial):
            eta = np.asarray(self.initial(rng_factory()), dtype=float)
        else:
            eta = np.asarray(self.initial, dtype=float)
        return eta.reshape(self.dim).copy()

    @property
    def initial_is_random(self):
        return callable(self.initial)

    @property
    def factorized(self):
        return isinstance(self.diffusion, FactorizedDiffusion)


def _check_finite(name, value, point):
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise NonFiniteCoefficient(name, point)
    return arr


def validate_model(model: ModelSpec) -> None:
    """Raise if the model is malformed; return ``None`` when it is usable."""
    if not (model.horizon > 0 and math.isfinite(model.horizon)):
        raise InvalidParameter("horizon", "must be finite and > 0")
    if not (isinstance(model.dim, (int, np.integer)) and model.dim >= 1):
        raise InvalidParameter("dim", "must be an integer >= 1")
    if not model.jump_law.intensity >= 0:
        raise InvalidParameter("intensity", "must be >= 0")
    if not isinstance(model.class_params, ClassParams):
        raise InvalidParameter("class_params", "must be a ClassParams")

    d, dm = model.dim, model.jump_law.mark_dim
    x0 = np.zeros(d)
    y0 = np.zeros(dm)
    point = (0.0, tuple(x0))
    checks = [
        ("drift", lambda: model.drift(0.0, x0)),
        ("diffusion", lambda: model.diffusion.eval_term(1, 0.0, x0)),
        ("jump_coeff", lambda: model.jump_coeff(0.0, x0, y0)),
    ]
    for name, fn in checks:
        first = _check_finite(name, fn(), point)
        if first.shape != (d,):
            raise DimensionMismatch(f"{name} returned shape {first.shape}, expected ({d},)")
        if not np.array_equal(first, np.asarray(fn(), dtype=float)):
            raise InvalidParameter(name, "coefficient is not pure (two evaluations differ)")

    if not callable(model.initial):
        eta = _check_finite("initial", model.initial, "eta")
        if eta.size != d:
            raise DimensionMismatch(f"initial value has {eta.size} entries, expected {d}")

    delta = model.diffusion.tail_delta
    if delta is not None:
        ks = [1, 2, 3, 5, 10, 100, 1000]
        vals = [float(delta(k)) for k in ks]
        if any(not math.isfinite(v) or v < 0 for v in vals):
            raise InvalidParameter("tail_delta", "must be finite and nonnegative")
        if any(b > a for a, b in zip(vals, vals[1:])):
            raise InvalidParameter("tail_delta", "must be nonincreasing")

    if model.compiled is not None:
        _check_compiled(model)


def _check_compiled(model):
    if model.dim != 1 or model.jump_law.mark_dim != 1:
        raise InvalidParameter("compiled", "compiled coefficients require d = d' = 1")
    if not model.factorized:
        raise InvalidParameter("compiled", "compiled engine needs a FactorizedDiffusion")
    c = model.compiled
    prm = c.params
    T = model.horizon
    for t, x, y in ((0.0, 0.0, 0.0), (0.5 * T, 0.75, 1.25), (T, -1.5, -0.5)):
        xs = np.array([x])
        pairs = (
            ("drift", c.drift(t, x, prm), model.drift(t, xs)[0]),
            ("diffusion", c.base(t, x, prm), model.diffusion.base(t, xs)[0]),
            ("jump_coeff", c.jump(t, x, y, prm), model.jump_coeff(t, xs, np.array([y]))[0]),
        )
        for name, a, b in pairs:
            if not math.isclose(a, b, rel_tol=1e-12, abs_tol=1e-12):
                raise InvalidParameter(
                    "compiled", f"compiled {name} disagrees with Python {name} at t={t}, x={x}"
                )


def truncated_diffusion_apply(model: ModelSpec, M: int, t: float, x, dW) -> np.ndarray:
    """Return ``sum_{j=1..M} b^(j)(t, x) dW_j`` accumulated in ascending j."""
    dW = np.asarray(dW, dtype=float)
    if M < 1:
        raise InvalidParameter("M", "must be >= 1")
    if dW.shape != (M,):
        raise DimensionMismatch(f"expected {M} Wiener increments, got shape {dW.shape}")
    x = np.asarray(x, dtype=float)
    acc = np.zeros(model.dim)
    for j in range(M):
        acc = acc + model.diffusion.eval_term(j + 1, t, x) * dW[j]
    return acc


# Euler-Maclaurin tail of sum_{j >= J} j^{-s}; J >= 64 keeps the first
# neglected term below 1e-17 for s >= 2.
_EM_START = 64


def _power_tail_sum(s, M):
    J = max(M + 1, _EM_START)
    terms = [float(j) ** -s for j in range(M + 1, J)]
    Jf = float(J)
    terms += [
        Jf ** (1.0 - s) / (s - 1.0),
        0.5 * Jf ** -s,
        s * Jf ** (-s - 1.0) / 12.0,
        -s * (s + 1) * (s + 2) * Jf ** (-s - 3.0) / 720.0,
        s * (s + 1) * (s + 2) * (s + 3) * (s + 4) * Jf ** (-s - 5.0) / 30240.0,
    ]
    return math.fsum(terms)


def power_tail_delta(alpha: float, M: int) -> float:
    """``(sum_{j > M} j^{-2 alpha})^{1/2}``, the truncation tail of the
    power-law diffusion ``b^(j) = sigma x / j^alpha`` (with sigma = 1).

    Accurate to about 1e-15 absolute for ``alpha >= 1``.
    """
    if not alpha >= 1:
        raise InvalidParameter("alpha", "must be >= 1")
    if M < 0:
        raise InvalidParameter("M", "must be >= 0")
    return math.sqrt(_power_tail_sum(2.0 * alpha, int(M)))
