"""Thermal Lindblad evolution of a single cavity mode.

The generator is

    d rho/dt = kappa (n+1) (2 a rho a^dag - a^dag a rho - rho a^dag a)
             + kappa n     (2 a^dag rho a - a a^dag rho - rho a a^dag)

so the mean occupation relaxes as exp(-2 kappa t). Integration uses classical
fixed-step RK4; the step is fixed by ``IntegratorSpec.max_step`` (kappa units) so
that repeated runs are bit-reproducible.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import PositivityError, TruncationWarning
from .states import DensityMatrix, hermitize

POSITIVITY_FAIL = 1e-6
EDGE_WARN = 1e-6


@dataclass(frozen=True)
class BathSpec:
    kappa: float = 1.0
    nbar_bath: float = 1.0

    def __post_init__(self):
        for name in ("kappa", "nbar_bath"):
            val = getattr(self, name)
            if not math.isfinite(val) or val < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {val!r}")


@dataclass(frozen=True)
class IntegratorSpec:
    max_step: float = 1e-3  # kappa * dt
    method: str = "rk4"

    def __post_init__(self):
        if not self.max_step > 0:
            raise ValueError(f"max_step must be > 0, got {self.max_step!r}")
        if self.method != "rk4":
            raise ValueError(f"unsupported integrator {self.method!r}")


@lru_cache(maxsize=32)
def _coefficients(dim: int, kappa: float, nbar_bath: float):
    lev = np.arange(dim, dtype=float)
    # a a^dag of the truncated matrices has a zero in the top level; keeping it
    # makes the generator exactly trace preserving
    raised = lev + 1
    raised[-1] = 0.0
    decay = -kappa * ((nbar_bath + 1) * (lev[:, None] + lev[None, :])
                      + nbar_bath * (raised[:, None] + raised[None, :]))
    # sqrt((m+1)(n+1)) laid out on the flattened matrix, so that the (m, n) <- (m+1, n+1)
    # shift is a contiguous offset of dim+1; entries that would wrap a row are zero
    hop = np.zeros((dim, dim))
    hop[:-1, :-1] = np.sqrt(lev[1:, None] * lev[None, 1:])
    hop = hop.ravel()[: dim * dim - dim - 1]
    down = 2 * kappa * (nbar_bath + 1) * hop
    up = 2 * kappa * nbar_bath * hop
    return decay.ravel(), down, up


def lindblad_rhs(rho: np.ndarray, bath: BathSpec) -> np.ndarray:
    """Right-hand side of the master equation.

    a and a^dag are bidiagonal, so every sandwich is a shifted, rescaled copy
    of rho: (a rho a^dag)_{mn} = sqrt((m+1)(n+1)) rho_{m+1,n+1}.
    """
    dim = rho.shape[0]
    decay, down, up = _coefficients(dim, bath.kappa, bath.nbar_bath)
    flat = np.ascontiguousarray(rho).ravel()
    out = decay * flat
    shift = dim + 1
    out[:-shift] += down * flat[shift:]
    if bath.nbar_bath:
        out[shift:] += up * flat[:-shift]
    return out.reshape(dim, dim)


def rk4_step(rho: np.ndarray, h: float, bath: BathSpec) -> np.ndarray:
    k1 = lindblad_rhs(rho, bath)
    k2 = lindblad_rhs(rho + 0.5 * h * k1, bath)
    k3 = lindblad_rhs(rho + 0.5 * h * k2, bath)
    k4 = lindblad_rhs(rho + h * k3, bath)
    return rho + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def step_plan(duration: float, bath: BathSpec, integ: IntegratorSpec) -> tuple[int, float]:
    """Number of RK4 steps and the step length (time units) for one evolution."""
    if duration == 0 or bath.kappa == 0:
        return 0, 0.0
    span = bath.kappa * duration
    nsteps = max(1, math.ceil(span / integ.max_step - 1e-9))
    return nsteps, duration / nsteps


def evolve(rho, duration: float, bath: BathSpec, integ: IntegratorSpec | None = None,
           renormalize: bool = True, check: bool = True) -> DensityMatrix:
    """Propagate ``rho`` for ``duration`` (time units, i.e. kappa*t / kappa).

    Args:
        rho: initial state.
        duration: evolution time >= 0.
        bath: dissipation rate and bath occupation.
        integ: integrator settings; default RK4 with kappa*dt = 1e-3.
        renormalize: rescale the output to unit trace.
        check: run the eigenvalue positivity and Fock-edge diagnostics.

    Raises:
        PositivityError: smallest eigenvalue of the result below -1e-6.
    """
    if not math.isfinite(duration) or duration < 0:
        raise ValueError(f"duration must be finite and >= 0, got {duration!r}")
    integ = integ or IntegratorSpec()
    deficit = getattr(rho, "trace_deficit", 0.0)
    state = np.array(rho, dtype=complex)
    nsteps, h = step_plan(duration, bath, integ)
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(nsteps):
            state = hermitize(rk4_step(state, h, bath))
    if not np.all(np.isfinite(state)):
        raise PositivityError("integration diverged; reduce max_step")
    if renormalize:
        state = state / np.trace(state).real
    out = DensityMatrix(state, deficit)
    if check:
        check_state(out)
    return out


def check_state(rho: DensityMatrix) -> None:
    lam = rho.min_eigenvalue()
    if lam < -POSITIVITY_FAIL:
        raise PositivityError(
            f"smallest eigenvalue {lam:.3e} after evolution; reduce max_step or increase dim")
    edge = float(np.sum(rho.populations()[-2:]))
    if edge > EDGE_WARN:
        warnings.warn(f"top two Fock levels hold {edge:.2e} of the population; increase dim",
                      TruncationWarning, stacklevel=3)


class DriftPropagator:
    """Precomputed RK4 map for repeated evolutions of one fixed duration.

    The generator never mixes matrix elements with different offsets m - n, so
    each upper diagonal evolves under its own tridiagonal block. One RK4 step on
    a block is the Taylor polynomial of degree four in (h * block); the whole
    evolution is that polynomial raised to the step count. Applying the cached
    blocks reproduces :func:`evolve` (without per-step re-Hermitization, which is
    a no-op in exact arithmetic) at a cost independent of the duration.
    """

    def __init__(self, dim: int, duration: float, bath: BathSpec,
                 integ: IntegratorSpec | None = None):
        integ = integ or IntegratorSpec()
        self.dim = dim
        self.duration = duration
        self.bath = bath
        self.nsteps, h = step_plan(duration, bath, integ)
        self.blocks = []
        if self.nsteps == 0:
            return
        decay, down, up = _coefficients(dim, bath.kappa, bath.nbar_bath)
        decay = decay.reshape(dim, dim)
        hop_down = np.zeros(dim * dim)
        hop_down[: down.size] = down
        hop_down = hop_down.reshape(dim, dim)
        hop_up = np.zeros(dim * dim)
        hop_up[: up.size] = up
        hop_up = hop_up.reshape(dim, dim)
        for k in range(dim):
            size = dim - k
            i = np.arange(size)
            block = np.zeros((size, size))
            block[i, i] = decay[i, i + k]
            # rho_{i,i+k} <- rho_{i+1,i+1+k}
            block[i[:-1], i[:-1] + 1] = hop_down[i[:-1], i[:-1] + k]
            # rho_{i,i+k} <- rho_{i-1,i-1+k}; coefficient stored at (i-1, i-1+k)
            block[i[1:], i[1:] - 1] = hop_up[i[1:] - 1, i[1:] - 1 + k]
            x = h * block
            x2 = x @ x
            x3 = x2 @ x
            step = np.eye(size) + x + x2 / 2 + x3 / 6 + (x3 @ x) / 24
            self.blocks.append(np.linalg.matrix_power(step, self.nsteps))

    def apply(self, rho, renormalize: bool = True, check: bool = False) -> DensityMatrix:
        deficit = getattr(rho, "trace_deficit", 0.0)
        src = np.asarray(rho)
        if src.shape != (self.dim, self.dim):
            raise ValueError(f"state of shape {src.shape} does not match propagator dim {self.dim}")
        if not self.blocks:
            out = DensityMatrix(hermitize(src), deficit)
        else:
            src = hermitize(src)
            state = np.empty_like(src)
            for k, prop in enumerate(self.blocks):
                i = np.arange(self.dim - k)
                vals = prop @ src[i, i + k]
                state[i, i + k] = vals
                state[i + k, i] = vals.conj()
            state[np.diag_indices(self.dim)] = state.diagonal().real
            if renormalize:
                state /= np.trace(state).real
            out = DensityMatrix(state, deficit)
        if check:
            check_state(out)
        return out
