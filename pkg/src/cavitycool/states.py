"""Density matrices, thermal states, Wigner functions and n-bar/temperature conversion."""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import constants

from .errors import PositivityError, TruncationError, TruncationWarning
from .fock import FockSpace, _real_generator_eig, expectation, number

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-10
POSITIVITY_TOL = 1e-10
THERMAL_TAIL_TOL = 1e-6

HBAR = constants.hbar
K_B = constants.k


class DensityMatrix:
    """Dense density matrix on a truncated Fock space.

    ``trace_deficit`` is the population discarded by the truncation when the
    state was constructed. Instances behave like ndarrays through ``__array__``.
    """

    __slots__ = ("data", "trace_deficit")

    def __init__(self, data, trace_deficit: float = 0.0):
        data = np.array(data, dtype=complex)
        if data.ndim != 2 or data.shape[0] != data.shape[1]:
            raise ValueError(f"density matrix must be square, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("density matrix has non-finite entries")
        data.setflags(write=False)
        self.data = data
        self.trace_deficit = float(trace_deficit)

    @classmethod
    def from_ket(cls, psi) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        return cls(np.outer(psi, psi.conj()))

    @classmethod
    def fock(cls, space: FockSpace, n: int) -> "DensityMatrix":
        return cls(space.basis(n))

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    @property
    def space(self) -> FockSpace:
        return FockSpace(self.dim)

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.data
        return self.data.astype(dtype)

    def __repr__(self):
        return f"DensityMatrix(dim={self.dim}, trace={self.trace().real:.12g})"

    def trace(self) -> complex:
        return complex(np.trace(self.data))

    def populations(self) -> np.ndarray:
        return np.real(np.diag(self.data)).copy()

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.data)[0])

    def validate(self, positivity_tol: float = POSITIVITY_TOL) -> "DensityMatrix":
        """Check Hermiticity, trace and positivity; raise on violation."""
        herm = np.max(np.abs(self.data - self.data.conj().T))
        if herm > HERMITIAN_TOL:
            raise ValueError(f"density matrix not Hermitian (max deviation {herm:.2e})")
        tr = self.trace()
        if abs(tr.imag) > TRACE_TOL or not (
                1 - self.trace_deficit - TRACE_TOL <= tr.real <= 1 + TRACE_TOL):
            raise ValueError(f"density matrix trace {tr} outside tolerance")
        lam = self.min_eigenvalue()
        if lam < -positivity_tol:
            raise PositivityError(f"density matrix has eigenvalue {lam:.3e} < -{positivity_tol:g}")
        return self


def hermitize(rho) -> np.ndarray:
    rho = np.asarray(rho)
    return 0.5 * (rho + rho.conj().T)


def normalized(rho, trace_deficit: float = 0.0) -> DensityMatrix:
    """Re-Hermitize and rescale to unit trace."""
    h = hermitize(rho)
    return DensityMatrix(h / np.trace(h).real, trace_deficit)


def thermal_populations(dim: int, nbar: float) -> tuple[np.ndarray, float]:
    """Geometric thermal weights truncated to ``dim`` levels and the discarded tail."""
    if not math.isfinite(nbar) or nbar < 0:
        raise ValueError(f"thermal occupation must be finite and >= 0, got {nbar!r}")
    if nbar == 0:
        p = np.zeros(dim)
        p[0] = 1.0
        return p, 0.0
    q = nbar / (nbar + 1)
    p = q ** np.arange(dim) / (nbar + 1)
    return p, q ** dim


def thermal_state(space: FockSpace, nbar: float) -> DensityMatrix:
    """Thermal state of mean occupation ``nbar``, renormalized over the truncated basis.

    Raises:
        TruncationError: if more than 1e-6 of the population lies above the cutoff.
    """
    p, tail = thermal_populations(space.dim, nbar)
    if tail > THERMAL_TAIL_TOL:
        raise TruncationError(
            f"thermal state n={nbar:g} loses {tail:.2e} of its population at dim={space.dim}")
    return DensityMatrix(np.diag(p / p.sum()).astype(complex), tail)


def mean_photons(rho) -> float:
    rho = np.asarray(rho)
    val = expectation(number(FockSpace(rho.shape[0])), rho)
    assert abs(val.imag) < 1e-10, f"photon number has imaginary part {val.imag:.2e}"
    return val.real


def trace_distance(rho, sigma) -> float:
    """Half the trace norm of rho - sigma."""
    diff = hermitize(np.asarray(rho) - np.asarray(sigma))
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(diff))))


def thermal_wigner_value(nbar: float, x, p):
    """Closed-form Wigner function of a thermal state."""
    s = 2 * nbar + 1
    return np.exp(-(np.square(x) + np.square(p)) / s) / (np.pi * s)


@dataclass
class WignerGrid:
    x_values: np.ndarray
    p_values: np.ndarray
    values: np.ndarray  # shape (len(p_values), len(x_values))

    def integral(self) -> float:
        dx = self.x_values[1] - self.x_values[0] if len(self.x_values) > 1 else 1.0
        dp = self.p_values[1] - self.p_values[0] if len(self.p_values) > 1 else 1.0
        return float(np.sum(self.values) * dx * dp)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x", "p", "w"])
            for i, p in enumerate(self.p_values):
                for j, x in enumerate(self.x_values):
                    writer.writerow([f"{x:.17g}", f"{p:.17g}", f"{self.values[i, j]:.17g}"])

    @classmethod
    def from_csv(cls, path) -> "WignerGrid":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        xs = np.unique(data[:, 0])
        ps = np.unique(data[:, 1])
        return cls(xs, ps, data[:, 2].reshape(len(ps), len(xs)))


def default_wigner_axis() -> np.ndarray:
    return np.linspace(-6.0, 6.0, 121)


def _check_axis(values, name):
    values = np.asarray(values, dtype=float)
    if values.ndim != 1 or values.size == 0 or not np.all(np.isfinite(values)):
        raise ValueError(f"{name} must be a non-empty finite 1-D array")
    if values.size > 1:
        step = np.diff(values)
        if np.any(step <= 0) or np.ptp(step) > 1e-9 * max(1.0, abs(step[0])):
            raise ValueError(f"{name} must be ascending and uniformly spaced")
    return values


def wigner(rho, x_values=None, p_values=None, edge_tol: float = 1e-6) -> WignerGrid:
    """Wigner function on a rectangular grid via the displaced-parity formula.

    W(x, p) = Tr[rho D(alpha) P D(alpha)^dagger] / pi with alpha = (x + i p)/sqrt(2)
    and P the photon-number parity. Writing D(alpha) = D(x/sqrt2) D(i p/sqrt2) up to a
    phase, the trace splits into products of per-column and per-row factors, so only
    len(x) + len(p) displacements are needed.
    """
    rho = np.asarray(rho)
    dim = rho.shape[0]
    xs = _check_axis(default_wigner_axis() if x_values is None else x_values, "x_values")
    ps = _check_axis(default_wigner_axis() if p_values is None else p_values, "p_values")

    w, v = _real_generator_eig(dim)
    levels = np.arange(dim)
    parity = (-1.0) ** levels
    quarter = np.exp(0.5j * np.pi * levels)  # rotation taking real displacements to imaginary

    def d_real(r):
        return (v * np.exp(-1j * r * w)) @ v.conj().T

    # A_x = D(x/sqrt2)^dag rho D(x/sqrt2)
    shifted = []
    edge = 0.0
    for x in xs:
        d = d_real(x / np.sqrt(2))
        a_x = d.conj().T @ rho @ d
        edge = max(edge, float(np.sum(np.real(np.diag(a_x))[-2:])))
        shifted.append(a_x)
    # B_p = D(i p/sqrt2) P D(i p/sqrt2)^dag
    kernels = []
    for p in ps:
        d = quarter[:, None] * d_real(p / np.sqrt(2)) * quarter.conj()[None, :]
        kernels.append((d * parity) @ d.conj().T)
    a_stack = np.array(shifted).reshape(len(xs), -1)
    b_stack = np.array([k.T for k in kernels]).reshape(len(ps), -1)
    values = np.real(b_stack @ a_stack.T) / np.pi
    if edge > edge_tol:
        warnings.warn(
            f"Wigner grid displaces {edge:.2e} of the population to the Fock cutoff; "
            "shrink the grid or increase dim", TruncationWarning, stacklevel=2)
    return WignerGrid(xs, ps, values)


def nbar_from_temperature(frequency_hz: float, temperature_k: float) -> float:
    """Bose-Einstein occupation of a mode at ``frequency_hz`` and ``temperature_k``."""
    if not frequency_hz > 0 or not temperature_k > 0:
        raise ValueError("frequency and temperature must be positive")
    x = HBAR * 2 * np.pi * frequency_hz / (K_B * temperature_k)
    # e^-x / (1 - e^-x) stays finite for very cold modes
    return float(math.exp(-x) / -math.expm1(-x))


def temperature_from_nbar(frequency_hz: float, nbar: float) -> float:
    """Temperature in kelvin at which the mode has mean occupation ``nbar``."""
    if not frequency_hz > 0 or not nbar > 0:
        raise ValueError("frequency and occupation must be positive")
    return float(HBAR * 2 * np.pi * frequency_hz / (K_B * np.log1p(1.0 / nbar)))


def save_state(rho, path) -> None:
    """Text serialization: ``dim=N`` then N*N lines ``row col re im``."""
    data = np.asarray(rho)
    dim = data.shape[0]
    with open(path, "w") as fh:
        fh.write(f"dim={dim}\n")
        for i in range(dim):
            for j in range(dim):
                z = data[i, j]
                fh.write(f"{i} {j} {z.real:.17g} {z.imag:.17g}\n")


def load_state(path) -> DensityMatrix:
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("dim="):
            raise ValueError(f"state file must start with 'dim=N', got {header!r}")
        dim = int(header[4:])
        rows = np.loadtxt(fh, ndmin=2)
    if rows.shape != (dim * dim, 4):
        raise ValueError(f"state file declares dim={dim} but holds {rows.shape[0]} entries")
    out = np.zeros((dim, dim), dtype=complex)
    out[rows[:, 0].astype(int), rows[:, 1].astype(int)] = rows[:, 2] + 1j * rows[:, 3]
    return DensityMatrix(out)
