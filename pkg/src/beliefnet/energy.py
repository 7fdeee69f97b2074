"""Belief-network energies.

The energy of belief i is H_i = -sum_{j != i} omega_ij * b_i * b_j and the
network energy is H = sum_i H_i, so every coupled pair contributes twice.
That double-count convention is kept on purpose (it matches how the
reported effect sizes are defined); the physics-style pairwise sum is
exactly H / 2. Consistent belief configurations have low energy.

The external field is deliberately absent from the energy: intercepts are
an estimation-side quantity only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DomainError
from .panel import PanelDataset, residualize


@dataclass(frozen=True)
class EnergyScore:
    """Whole-network and per-belief energies for one person at one time."""

    person: str
    time: str
    total: float
    per_belief: np.ndarray


def _omega_array(omega) -> np.ndarray:
    w = np.asarray(getattr(omega, "omega", omega), dtype=float)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise DimensionError(f"omega must be square, got {w.shape}")
    return w


def belief_energies(beliefs, omega) -> np.ndarray:
    """Per-belief energies H_i = -b_i * (omega @ b)_i for all i at once."""
    b = np.asarray(beliefs, dtype=float)
    w = _omega_array(omega)
    if b.shape != (w.shape[0],):
        raise DimensionError(f"beliefs shape {b.shape} does not match omega {w.shape}")
    return -b * (w @ b)


def belief_energy(beliefs, index: int, omega) -> float:
    """Energy of one belief, -sum_{j != i} omega_ij b_i b_j."""
    b = np.asarray(beliefs, dtype=float)
    w = _omega_array(omega)
    if not 0 <= index < w.shape[0]:
        raise DimensionError(f"belief index {index} out of range")
    return float(-b[index] * (w[index] @ b))


def network_energy(beliefs, omega) -> float:
    """Total energy H = sum_i H_i = -b' omega b (pairs counted twice)."""
    b = np.asarray(beliefs, dtype=float)
    w = _omega_array(omega)
    if b.shape != (w.shape[0],):
        raise DimensionError(f"beliefs shape {b.shape} does not match omega {w.shape}")
    return float(-b @ w @ b)


def delta_energy(beliefs, index: int, new_value: float, omega) -> float:
    """Energy change of belief i when it moves to `new_value`.

    Exact single-term update -sum_{j != i} omega_ij (b_i' - b_i) b_j; no
    other belief's terms are touched. The total network energy changes by
    twice this amount under the double-count convention.
    """
    if not -1.0 <= new_value <= 1.0:
        raise DomainError(f"proposed value {new_value} outside [-1, 1]")
    b = np.asarray(beliefs, dtype=float)
    w = _omega_array(omega)
    if not 0 <= index < w.shape[0]:
        raise DimensionError(f"belief index {index} out of range")
    return float(-(new_value - b[index]) * (w[index] @ b))


def energy_trajectory(
    person: str, panel: PanelDataset, omega, use_residuals: bool = False
) -> list[EnergyScore]:
    """Energies of one person at every time point.

    Energies are computed on the rescaled beliefs by default; pass
    ``use_residuals=True`` for the residual-based sensitivity variant.
    `omega` may be a single matrix (used at every wave), a CouplingMatrix,
    or a fitted model (whose per-wave couplings are used).
    """
    pi = panel.person_index(person)
    if use_residuals:
        grid = residualize(panel).residuals
    else:
        if panel.scale != "belief":
            raise DomainError("energies expect a rescaled panel")
        grid = panel.values
    per_time_omega = getattr(omega, "omega", omega)
    per_time_omega = np.asarray(per_time_omega, dtype=float)
    out = []
    for t, label in enumerate(panel.time_points):
        w = per_time_omega[t] if per_time_omega.ndim == 3 else per_time_omega
        b = grid[pi, t, :]
        per_belief = -b * (w @ b)
        out.append(
            EnergyScore(
                person=person,
                time=label,
                total=float(per_belief.sum()),
                per_belief=per_belief,
            )
        )
    return out


def energy_grid(panel: PanelDataset, omega, use_residuals: bool = False) -> np.ndarray:
    """Network energy for every person at every time, shape (n_persons, n_times)."""
    if use_residuals:
        grid = residualize(panel).residuals
    else:
        if panel.scale != "belief":
            raise DomainError("energies expect a rescaled panel")
        grid = panel.values
    per_time_omega = np.asarray(getattr(omega, "omega", omega), dtype=float)
    out = np.empty((panel.n_persons, panel.n_times))
    for t in range(panel.n_times):
        w = per_time_omega[t] if per_time_omega.ndim == 3 else per_time_omega
        x = grid[:, t, :]
        out[:, t] = -np.einsum("ij,jk,ik->i", x, w, x)
    return out
