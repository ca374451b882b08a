"""Post-selected conditional-displacement cooling of a thermal cavity mode.

One Oscillator Cooling Block (OCB) is four electrons with couplings g, ig, -g, -ig.
Each electron applies the Kraus operator (1 + D(g))/2 to the cavity (the |+>
outcome of a conditional displacement measured in the |+-> basis), the state is
renormalized, and the cavity then relaxes toward its bath for kappa*dt before
the next electron arrives.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DegenerateSelection, TruncationWarning
from .fock import FockSpace, displacement
from .lindblad import BathSpec, DriftPropagator, IntegratorSpec, check_state
from .states import DensityMatrix, hermitize, mean_photons, thermal_state

DEGENERATE_PROB = 1e-12


def kraus_plus(space: FockSpace, g: complex) -> np.ndarray:
    return 0.5 * (space.identity() + displacement(space, g))


def kraus_minus(space: FockSpace, g: complex) -> np.ndarray:
    return 0.5 * (space.identity() - displacement(space, g))


def ocb_phases(g: complex) -> list[complex]:
    """Couplings of the four electrons of one OCB, in the order they are applied."""
    g = complex(g)
    return [g, 1j * g, -g, -1j * g]


def ocb_kraus(space: FockSpace, g: complex) -> np.ndarray:
    """Product D+(-ig) D+(-g) D+(ig) D+(g) acting on the cavity."""
    out = space.identity()
    for phase in ocb_phases(g):
        out = kraus_plus(space, phase) @ out
    return out


def joint_cd_matrix(space: FockSpace, g: complex) -> np.ndarray:
    """Conditional displacement |0><0| x 1 + |1><1| x D(g) on electron x cavity.

    Electron index is the slow (block) index.
    """
    dim = space.dim
    out = np.zeros((2 * dim, 2 * dim), dtype=complex)
    out[:dim, :dim] = space.identity()
    out[dim:, dim:] = displacement(space, g)
    return out


def electron_projection(joint: np.ndarray, bra, ket) -> np.ndarray:
    """Cavity operator <bra| joint |ket> for electron states ``bra`` and ``ket``."""
    dim = joint.shape[0] // 2
    blocks = joint.reshape(2, dim, 2, dim)
    return np.einsum("i,iajb,j->ab", np.conj(bra), blocks, ket)


def _select(rho: np.ndarray, kraus: np.ndarray) -> tuple[np.ndarray, float]:
    out = kraus @ rho @ kraus.conj().T
    # relative to the input trace, so an identity Kraus operator gives exactly 1
    prob = float(np.trace(out).real / np.trace(rho).real)
    if not prob >= DEGENERATE_PROB:
        raise DegenerateSelection(f"post-selection probability {prob:.3e} below {DEGENERATE_PROB:g}")
    return hermitize(out / prob), prob


def apply_postselected(rho, g: complex) -> tuple[DensityMatrix, float]:
    """Apply one electron and keep the |+> outcome.

    Returns the renormalized state and the probability Tr(D+ rho D+^dagger).
    """
    deficit = getattr(rho, "trace_deficit", 0.0)
    rho = np.asarray(rho)
    out, prob = _select(rho, kraus_plus(FockSpace(rho.shape[0]), g))
    return DensityMatrix(out, deficit), prob


def apply_ocb(rho, g: complex) -> tuple[DensityMatrix, float]:
    """Four post-selected electrons with no dissipation in between."""
    prob = 1.0
    for phase in ocb_phases(g):
        rho, p = apply_postselected(rho, phase)
        prob *= p
    return rho, prob


@dataclass(frozen=True)
class ProtocolConfig:
    """Physical and numerical settings of one cooling run.

    ``g_schedule`` optionally gives one coupling per OCB (the last entry is reused
    once the schedule runs out). ``confirm_ocb`` extra blocks are simulated after
    stability is first detected; ``stop_at_stability=False`` always runs
    ``max_ocb`` blocks. ``drift_first`` inserts a drift before the first electron.
    """

    g: complex = 0.1
    delta_t_kappa: float = 0.05
    bath: BathSpec = field(default_factory=BathSpec)
    nbar_initial: float = 1.0
    max_ocb: int = 200
    stability_rel_tol: float = 0.01
    dim: int = 128
    integrator: IntegratorSpec = field(default_factory=IntegratorSpec)
    confirm_ocb: int = 0
    stop_at_stability: bool = True
    drift_first: bool = False
    g_schedule: tuple[complex, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "g", complex(self.g))
        if not (math.isfinite(self.g.real) and math.isfinite(self.g.imag)):
            raise ValueError("g must be finite")
        if not math.isfinite(self.delta_t_kappa) or self.delta_t_kappa < 0:
            raise ValueError(f"delta_t_kappa must be finite and >= 0, got {self.delta_t_kappa!r}")
        if not math.isfinite(self.nbar_initial) or self.nbar_initial < 0:
            raise ValueError(f"nbar_initial must be finite and >= 0, got {self.nbar_initial!r}")
        if int(self.max_ocb) != self.max_ocb or self.max_ocb < 1:
            raise ValueError(f"max_ocb must be a positive integer, got {self.max_ocb!r}")
        if not 0 < self.stability_rel_tol < 1:
            raise ValueError(f"stability_rel_tol must lie in (0, 1), got {self.stability_rel_tol!r}")
        if self.confirm_ocb < 0:
            raise ValueError("confirm_ocb must be >= 0")
        FockSpace(self.dim)
        if self.g_schedule is not None:
            sched = tuple(complex(x) for x in self.g_schedule)
            if not sched:
                raise ValueError("g_schedule must not be empty")
            object.__setattr__(self, "g_schedule", sched)

    def coupling(self, ocb: int) -> complex:
        """Coupling used in OCB number ``ocb`` (1-based)."""
        if self.g_schedule is None:
            return self.g
        return self.g_schedule[min(ocb, len(self.g_schedule)) - 1]

    def to_dict(self) -> dict:
        out = asdict(self)
        out["g"] = [self.g.real, self.g.imag]
        if self.g_schedule is not None:
            out["g_schedule"] = [[x.real, x.imag] for x in self.g_schedule]
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ProtocolConfig":
        data = dict(data)
        g = data.pop("g", 0.1)
        data["g"] = complex(*g) if isinstance(g, (list, tuple)) else complex(g)
        if data.get("g_schedule") is not None:
            data["g_schedule"] = tuple(complex(*x) if isinstance(x, (list, tuple)) else complex(x)
                                       for x in data["g_schedule"])
        if isinstance(data.get("bath"), dict):
            data["bath"] = BathSpec(**data["bath"])
        if isinstance(data.get("integrator"), dict):
            data["integrator"] = IntegratorSpec(**data["integrator"])
        return cls(**data)


@dataclass(frozen=True)
class TraceEvent:
    time_kappa: float
    nbar: float
    cumulative_prob: float
    tag: str  # "initial" | "post_kick" | "post_drift"
    kick_phase: int | None = None


@dataclass(frozen=True)
class StableMetrics:
    nbar_final: float
    prob_final: float
    ocb_at_stability: int
    reached: bool


@dataclass
class CoolingTrace:
    events: list[TraceEvent]
    config: ProtocolConfig | None = None
    final_state: DensityMatrix | None = None
    warnings: list[str] = field(default_factory=list)

    CSV_HEADER = "t_kappa,nbar,p_succ,tag,phase"

    def ocb_count(self) -> int:
        return sum(e.tag == "post_kick" for e in self.events) // 4

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.CSV_HEADER + "\n")
            for e in self.events:
                phase = "" if e.kick_phase is None else str(e.kick_phase)
                fh.write(f"{e.time_kappa:.17g},{e.nbar:.17g},{e.cumulative_prob:.17g},{e.tag},{phase}\n")

    @classmethod
    def from_csv(cls, path) -> "CoolingTrace":
        events = []
        with open(path) as fh:
            header = fh.readline().strip()
            if header != cls.CSV_HEADER:
                raise ValueError(f"unexpected trace header {header!r}")
            for line in fh:
                t, n, p, tag, phase = line.rstrip("\n").split(",")
                events.append(TraceEvent(float(t), float(n), float(p), tag,
                                         int(phase) if phase else None))
        return cls(events)

    def to_json(self, path) -> None:
        doc = {
            "config": None if self.config is None else self.config.to_dict(),
            "warnings": self.warnings,
            "events": [asdict(e) for e in self.events],
        }
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=1)

    @classmethod
    def from_json(cls, path) -> "CoolingTrace":
        with open(path) as fh:
            doc = json.load(fh)
        config = None if doc.get("config") is None else ProtocolConfig.from_dict(doc["config"])
        return cls([TraceEvent(**e) for e in doc["events"]], config, None, doc.get("warnings", []))


def ocb_maxima(events) -> list[tuple[float, float]]:
    """(max nbar, cumulative probability at that maximum) for every completed OCB.

    Kick events are grouped four at a time; each drift belongs to the OCB of the
    kick preceding it. Events before the first kick are not part of any OCB.
    """
    out = []
    kicks = 0
    best = None
    for e in events:
        if e.tag == "post_kick":
            kicks += 1
            if kicks % 4 == 1:
                if best is not None:
                    out.append(best)
                best = None
        elif e.tag != "post_drift" or kicks == 0:
            continue
        if best is None or e.nbar > best[0]:
            best = (e.nbar, e.cumulative_prob)
    if best is not None and kicks and kicks % 4 == 0:
        out.append(best)
    return out


def _first_stable(maxima, rel_tol: float) -> int | None:
    for j in range(1, len(maxima)):
        prev = maxima[j - 1][0]
        if abs(maxima[j][0] - prev) < rel_tol * abs(prev) or maxima[j][0] == prev:
            return j
    return None


def stable_metrics(trace: CoolingTrace, rel_tol: float = 0.01) -> StableMetrics:
    """Locate the first OCB whose maximum n-bar is within ``rel_tol`` of the previous one.

    OCBs are numbered from 1. When the criterion is never met, the last OCB's
    maximum and the final cumulative probability are returned with ``reached=False``.
    """
    maxima = ocb_maxima(trace.events)
    j = _first_stable(maxima, rel_tol)
    if j is not None:
        nbar, prob = maxima[j]
        return StableMetrics(nbar, prob, j + 1, True)
    if maxima:
        return StableMetrics(maxima[-1][0], trace.events[-1].cumulative_prob, len(maxima), False)
    last = trace.events[-1]
    return StableMetrics(last.nbar, last.cumulative_prob, 0, False)


def run_cooling(config: ProtocolConfig) -> CoolingTrace:
    """Simulate alternating electron kicks and bath drifts starting from a thermal state.

    Raises:
        DegenerateSelection, PositivityError, TruncationError: fatal simulation failures.
    """
    space = FockSpace(config.dim)
    bath = config.bath
    rho = thermal_state(space, config.nbar_initial)
    deficit = rho.trace_deficit
    state = np.array(rho)
    duration = config.delta_t_kappa / bath.kappa if bath.kappa > 0 else 0.0
    drift = DriftPropagator(config.dim, duration, bath, config.integrator)

    caught: list[str] = []
    t = 0.0
    prob = 1.0
    events = [TraceEvent(t, mean_photons(state), prob, "initial")]

    def do_drift(s):
        return np.array(drift.apply(s, renormalize=True))

    if config.drift_first:
        state = do_drift(state)
        t += config.delta_t_kappa
        events.append(TraceEvent(t, mean_photons(state), prob, "post_drift"))

    kraus_cache: dict[complex, list[np.ndarray]] = {}
    maxima = []
    stop_after = None
    with warnings.catch_warnings(record=True) as log:
        warnings.simplefilter("always", TruncationWarning)
        for ocb in range(1, config.max_ocb + 1):
            g = config.coupling(ocb)
            if g not in kraus_cache:
                kraus_cache[g] = [kraus_plus(space, phase) for phase in ocb_phases(g)]
            block = []
            for phase_idx, kraus in enumerate(kraus_cache[g]):
                state, p = _select(state, kraus)
                prob *= p
                block.append(TraceEvent(t, mean_photons(state), prob, "post_kick", phase_idx))
                state = do_drift(state)
                t += config.delta_t_kappa
                block.append(TraceEvent(t, mean_photons(state), prob, "post_drift", phase_idx))
            events.extend(block)
            check_state(DensityMatrix(state, deficit))
            top = max(block, key=lambda e: e.nbar)
            maxima.append((top.nbar, top.cumulative_prob))
            if stop_after is None and _first_stable(maxima[-2:], config.stability_rel_tol) is not None:
                stop_after = ocb + config.confirm_ocb
            if config.stop_at_stability and stop_after is not None and ocb >= stop_after:
                break
        caught = sorted({str(w.message) for w in log})
    for msg in caught:
        warnings.warn(msg, TruncationWarning, stacklevel=2)
    return CoolingTrace(events, config, DensityMatrix(state, deficit), caught)

