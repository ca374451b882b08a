"""Truncated single-mode Fock space: ladder operators and displacements."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import TruncationWarning

UNITARITY_TOL = 1e-8


@dataclass(frozen=True)
class FockSpace:
    """One bosonic mode truncated to the basis |0>, ..., |dim-1>."""

    dim: int

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 2:
            raise ValueError(f"Fock dimension must be an integer >= 2, got {self.dim!r}")

    def identity(self) -> np.ndarray:
        return np.eye(self.dim, dtype=complex)

    def basis(self, n: int) -> np.ndarray:
        """Projector |n><n|."""
        if not 0 <= n < self.dim:
            raise ValueError(f"Fock level {n} outside [0, {self.dim})")
        out = np.zeros((self.dim, self.dim), dtype=complex)
        out[n, n] = 1.0
        return out


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@lru_cache(maxsize=64)
def _annihilation(dim: int) -> np.ndarray:
    return _frozen(np.diag(np.sqrt(np.arange(1, dim, dtype=float)), k=1).astype(complex))


def annihilation(space: FockSpace) -> np.ndarray:
    """Lowering operator a with <n-1|a|n> = sqrt(n)."""
    return _annihilation(space.dim)


@lru_cache(maxsize=64)
def _creation(dim: int) -> np.ndarray:
    return _frozen(_annihilation(dim).conj().T.copy())


def creation(space: FockSpace) -> np.ndarray:
    """Raising operator a^dagger."""
    return _creation(space.dim)


def number(space: FockSpace) -> np.ndarray:
    return np.diag(np.arange(space.dim, dtype=float)).astype(complex)


@lru_cache(maxsize=64)
def _real_generator_eig(dim: int):
    # D(r) = exp(r (a^dag - a)) = exp(-i r H) with H = i (a^dag - a) Hermitian
    a = _annihilation(dim)
    herm = 1j * (a.conj().T - a)
    w, v = np.linalg.eigh(herm)
    return _frozen(w), _frozen(v)


def displacement(space: FockSpace, g: complex, tol: float = UNITARITY_TOL,
                 check: bool = True) -> np.ndarray:
    """Displacement operator D(g) = exp(g a^dag - g* a) on the truncated space.

    The anti-Hermitian generator is exponentiated through the eigendecomposition
    of the real-axis quadrature generator, then rotated to the phase of ``g``
    with exp(i arg(g) a^dag a). The result is unitary to machine precision.

    Args:
        space: Fock space to build the operator on.
        g: complex displacement amplitude.
        tol: tolerance for the truncation diagnostics on the lower half-basis.
        check: emit :class:`TruncationWarning` when diagnostics fail.

    Returns:
        (dim, dim) complex array.
    """
    g = complex(g)
    if not (math.isfinite(g.real) and math.isfinite(g.imag)):
        raise ValueError(f"displacement amplitude must be finite, got {g!r}")
    dim = space.dim
    if g == 0:
        return np.eye(dim, dtype=complex)
    r, phi = abs(g), math.atan2(g.imag, g.real)
    w, v = _real_generator_eig(dim)
    d_real = (v * np.exp(-1j * r * w)) @ v.conj().T
    rot = np.exp(1j * phi * np.arange(dim))
    out = rot[:, None] * d_real * rot.conj()[None, :]
    if check:
        _check_truncation(out, tol)
    return out


def _check_truncation(d: np.ndarray, tol: float) -> None:
    half = d.shape[0] // 2
    cols = d[:, :half]
    unitarity = np.max(np.abs(cols.conj().T @ cols - np.eye(half)))
    # weight that the lower half-basis pushes into the two highest levels
    edge = np.max(np.sum(np.abs(cols[-2:, :]) ** 2, axis=0))
    if unitarity > tol or edge > tol:
        warnings.warn(
            f"displacement touches the Fock cutoff (unitarity defect {unitarity:.2e}, "
            f"edge weight {edge:.2e}); increase dim",
            TruncationWarning, stacklevel=3)


def expectation(op, rho) -> complex:
    """Tr(op rho)."""
    op = np.asarray(op)
    rho = np.asarray(rho)
    if op.shape != rho.shape:
        raise ValueError(f"dimension mismatch: operator {op.shape} vs state {rho.shape}")
    # Tr(AB) without forming the product
    return complex(np.sum(op * rho.T))


def recommended_dim(nbar: float, g: complex = 0.0, tail_tol: float = 1e-6) -> int:
    """Suggested truncation for a thermal state of occupation ``nbar`` kicked by ``g``."""
    base = math.ceil(8 * (nbar + 1))
    if nbar > 0:
        # smallest dim with thermal tail (nbar/(nbar+1))**dim below tail_tol
        base = max(base, math.ceil(math.log(tail_tol) / math.log(nbar / (nbar + 1))))
    return max(32, base + math.ceil(16 * abs(g) ** 2) + 16)
