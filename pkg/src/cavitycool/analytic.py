"""Closed-form results for post-selected cooling of a thermal state.

These serve as independent checks of the numerical engine; they never call it.
The perturbative formulas are accurate to O(|g|^2) and assume |g|^2 (2n+1) < 1.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import RegimeWarning
from .fock import FockSpace, number


@dataclass(frozen=True)
class PerturbativePrediction:
    nbar_pred: float
    prob_pred: float
    order_tag: str  # "one_round" | "k_rounds"


def _regime(nbar0, g, check):
    if check and abs(g) ** 2 * (2 * nbar0 + 1) > 0.5:
        warnings.warn(f"|g|^2(2n+1) = {abs(g) ** 2 * (2 * nbar0 + 1):.3g} exceeds 0.5; "
                      "perturbative formulas are unreliable", RegimeWarning, stacklevel=3)


def p_plus_exact(nbar: float, g: complex) -> float:
    """Probability of the |+> outcome for one electron on a thermal state."""
    return 0.5 * (1.0 + math.exp(-abs(g) ** 2 * (nbar + 0.5)))


def displacement_diagonal(m: int, g: complex) -> float:
    """<m|D(g)|m> = exp(-|g|^2/2) L_m(|g|^2).

    The Laguerre polynomial sum_j C(m,j) (-x)^j / j! is evaluated by its three-term
    recurrence; the alternating sum itself cancels catastrophically for large m.
    """
    x = abs(g) ** 2
    prev, cur = 1.0, 1.0 - x
    if m == 0:
        cur = prev
    for k in range(1, m):
        prev, cur = cur, ((2 * k + 1 - x) * cur - k * prev) / (k + 1)
    return math.exp(-x / 2) * cur


def nbar_one_round(nbar0: float, g: complex, check: bool = False) -> float:
    _regime(nbar0, g, check)
    return nbar0 * (1 - 2 * abs(g) ** 2 * (nbar0 + 1))


def prob_one_round(nbar0: float, g: complex, check: bool = False) -> float:
    _regime(nbar0, g, check)
    return 1 - abs(g) ** 2 * (2 * nbar0 + 1)


def nbar_k_rounds(nbar0: float, g: complex, k: int, check: bool = False) -> float:
    """Photon number after k OCBs with the cooling factor frozen at its initial value.

    Valid for k much smaller than |g|^-2.
    """
    _regime(nbar0, g, check)
    return nbar0 * (1 - 2 * abs(g) ** 2 * (nbar0 + 1)) ** k


def prob_k_rounds(nbar0: float, g: complex, k: int, check: bool = False) -> float:
    _regime(nbar0, g, check)
    return (1 - abs(g) ** 2 * (2 * nbar0 + 1)) ** k


def nbar_k_rounds_linear(nbar0: float, g: complex, k: int) -> float:
    return nbar0 * (1 - 2 * k * abs(g) ** 2 * (nbar0 + 1))


def prob_k_rounds_linear(nbar0: float, g: complex, k: int) -> float:
    return 1 - k * abs(g) ** 2 * (2 * nbar0 + 1)


def nbar_recursive(nbar0: float, g: complex, k: int) -> tuple[float, float]:
    """Photon number and cumulative probability from k recursive one-round updates."""
    nbar, prob = nbar0, 1.0
    for _ in range(k):
        prob *= prob_one_round(nbar, g)
        nbar = nbar_one_round(nbar, g)
    return nbar, prob


def one_round(nbar0: float, g: complex) -> PerturbativePrediction:
    return PerturbativePrediction(nbar_one_round(nbar0, g), prob_one_round(nbar0, g), "one_round")


def k_rounds(nbar0: float, g: complex, k: int) -> PerturbativePrediction:
    return PerturbativePrediction(nbar_k_rounds(nbar0, g, k), prob_k_rounds(nbar0, g, k), "k_rounds")


def d_ocb_approx_matrix(space: FockSpace, g: complex) -> np.ndarray:
    """Second-order expansion 1 - |g|^2 (2 a^dag a + 1 - i) / 2 of the OCB Kraus product."""
    return space.identity() - 0.5 * abs(g) ** 2 * (2 * number(space) + (1 - 1j) * space.identity())
