"""Belief-change dynamics and the synthetic-study generator.

A belief proposes a move to a new value and accepts it with heat-bath
probability 1 / (1 + exp(beta * dH)), where dH is the energy change of
that belief and beta the inverse network temperature. The acceptance rule
is the model's transition law; the proposal mechanism (symmetric uniform
window, clipped to [-1, 1]) is this implementation's construction, chosen
so the heat-bath ratio stays a valid Metropolis-Hastings acceptance for
interior moves.

`generate_panel` draws longitudinal panels from the Gaussian equilibrium
implied by (omega, delta) per wave -- plus person effects, time effects,
and an optional intervention -- so that estimation code can be checked
against an exact distributional oracle. Chain-based generation is
available behind ``sampler="chain"`` for stress tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import expit

from .energy import energy_grid, network_energy
from .errors import DimensionError, DomainError, ModelDomainError
from .ggm import implied_covariance
from .panel import PanelDataset


def transition_probability(delta_h, beta):
    """Probability 1 / (1 + exp(beta * dH)) of accepting an energy change.

    Overflow-safe; strictly decreasing in dH for beta > 0 and identically
    0.5 at beta = 0 (infinite temperature). Scalar or array arguments.
    """
    beta = np.asarray(beta, dtype=float)
    if (beta < 0).any():
        raise DomainError("beta must be non-negative")
    out = expit(-beta * np.asarray(delta_h, dtype=float))
    return float(out) if out.ndim == 0 else out


@dataclass
class ChainState:
    """State of one sampling chain; `rng` advances as sweeps run."""

    beliefs: np.ndarray
    beta: float
    sweeps: int
    seed: int | None
    rng: np.random.Generator = field(repr=False)

    def __post_init__(self):
        b = np.asarray(self.beliefs, dtype=float)
        if (np.abs(b) > 1.0).any():
            raise DomainError("chain beliefs must lie in [-1, 1]")
        if self.beta < 0:
            raise DomainError("beta must be non-negative")
        self.beliefs = b


def initial_state(n_beliefs: int, beta: float, seed) -> ChainState:
    """Fresh chain with uniform random beliefs drawn from the given seed."""
    rng = np.random.default_rng(seed)
    beliefs = rng.uniform(-1.0, 1.0, n_beliefs)
    return ChainState(beliefs=beliefs, beta=beta, sweeps=0, seed=seed, rng=rng)


def sweep(state: ChainState, omega, proposal_width: float = 0.2) -> ChainState:
    """One sweep: propose one move per belief, in random order.

    Each proposal is uniform in [b_i - w, b_i + w] clipped to [-1, 1] and
    accepted with probability 1 / (1 + exp(beta * dH_i)). Returns a new
    state; the chain's random stream advances.
    """
    if not 0.0 < proposal_width <= 2.0:
        raise DomainError("proposal width must be in (0, 2]")
    w = np.asarray(getattr(omega, "omega", omega), dtype=float)
    b = state.beliefs.copy()
    p = b.size
    if w.shape != (p, p):
        raise DimensionError(f"omega shape {w.shape} does not match {p} beliefs")
    rng = state.rng
    coupled = w @ b
    for i in rng.permutation(p):
        lo = max(-1.0, b[i] - proposal_width)
        hi = min(1.0, b[i] + proposal_width)
        proposal = rng.uniform(lo, hi)
        delta_h = -(proposal - b[i]) * coupled[i]
        if rng.random() < expit(-state.beta * delta_h):
            coupled += w[:, i] * (proposal - b[i])
            b[i] = proposal
    return ChainState(
        beliefs=b, beta=state.beta, sweeps=state.sweeps + 1, seed=state.seed, rng=rng
    )


def run_chain(
    state: ChainState,
    omega,
    n_sweeps: int,
    proposal_width: float = 0.2,
    record_every: int | None = None,
):
    """Advance a chain `n_sweeps` sweeps, optionally recording a trajectory.

    Returns (final_state, trajectory) where trajectory rows are
    (sweep, energy, beliefs...) including the starting state; trajectory is
    None when `record_every` is None.
    """
    w = np.asarray(getattr(omega, "omega", omega), dtype=float)
    rows = None
    if record_every is not None:
        rows = [np.concatenate(([state.sweeps, network_energy(state.beliefs, w)], state.beliefs))]
    for k in range(1, n_sweeps + 1):
        state = sweep(state, w, proposal_width)
        if record_every is not None and (k % record_every == 0 or k == n_sweeps):
            rows.append(
                np.concatenate(([state.sweeps, network_energy(state.beliefs, w)], state.beliefs))
            )
    return state, (np.asarray(rows) if rows is not None else None)


def spawn_seeds(master_seed, n: int) -> list[np.random.SeedSequence]:
    """Per-chain seed sequences split from one master seed."""
    return np.random.SeedSequence(master_seed).spawn(n)


def sample_equilibrium(
    omega,
    delta,
    n_samples: int,
    burn_in: int = 0,
    thin: int = 1,
    seed=0,
    proposal_width: float = 0.2,
) -> np.ndarray:
    """States from repeated sweeps at beta = 1 / mean(delta).

    Records one state every `thin` sweeps after `burn_in` sweeps; with
    burn_in=0, thin=1, n_samples=1 the result is exactly the state after a
    single sweep. Fully reproducible from the seed.
    """
    if n_samples < 1:
        raise DomainError("n_samples must be >= 1")
    if burn_in < 0 or thin < 1:
        raise DomainError("burn_in must be >= 0 and thin >= 1")
    w = np.asarray(getattr(omega, "omega", omega), dtype=float)
    d = np.asarray(delta, dtype=float)
    beta = 1.0 / d.mean()
    state = initial_state(w.shape[0], beta, seed)
    for _ in range(burn_in):
        state = sweep(state, w, proposal_width)
    out = np.empty((n_samples, w.shape[0]))
    for k in range(n_samples):
        for _ in range(thin):
            state = sweep(state, w, proposal_width)
        out[k] = state.beliefs
    return out


# ---------------------------------------------------------------------------
# synthetic studies


@dataclass(frozen=True)
class InterventionEffect:
    """Belief shift applied to treated persons after a given wave.

    `mean_shift` moves every belief by a constant; persons whose energy at
    `after_wave` is at or above the `energy_quantile` additionally take
    `descent_steps` gradient steps toward lower energy (b += rate * omega b,
    clipped to [-1, 1]).
    """

    after_wave: str
    mean_shift: float = 0.0
    energy_quantile: float | None = None
    descent_rate: float = 0.2
    descent_steps: int = 1


@dataclass(frozen=True)
class DissonanceDesign:
    """Three synthetic felt-dissonance items tied to the network energy."""

    waves: tuple[str, ...]
    loading: float = 1.0
    noise_sd: float = 0.5


@dataclass(frozen=True)
class StudyDesign:
    """Ground truth and nuisance structure of a synthetic study.

    `wave_rho` sets the cross-wave persistence of the residual draws via a
    latent AR(1) process whose per-wave marginal is rescaled to exactly
    Delta_t (I - omega)^{-1} Delta_t, so the equilibrium oracle is
    untouched; 0 means independent waves. Ignored by the chain sampler.
    """

    beliefs: tuple[str, ...]
    roles: dict[str, str]
    omega: np.ndarray
    delta: np.ndarray  # (n_waves, p)
    mu: np.ndarray
    person_sd: float = 0.0
    time_sd: float = 0.0
    wave_rho: float = 0.0
    groups: tuple[str, ...] = ()
    control_group: str | None = None
    intervention: InterventionEffect | None = None
    dissonance: DissonanceDesign | None = None
    topic: str | None = None
    sampler: str = "gaussian"


@dataclass(frozen=True)
class SyntheticStudy:
    """A generated panel plus everything that generated it."""

    design: StudyDesign
    panel: PanelDataset
    person_effects: np.ndarray
    time_effects: np.ndarray
    seed: int


def _energy_descent(beliefs, omega, rate, steps):
    """Move belief row-vectors downhill in energy (omega is symmetric)."""
    b = np.clip(beliefs, -1.0, 1.0)
    for _ in range(steps):
        b = np.clip(b + rate * (b @ omega), -1.0, 1.0)
    return b


def generate_panel(design: StudyDesign, n_persons: int, waves, seed) -> SyntheticStudy:
    """Draw a synthetic longitudinal panel from the study design.

    Per person and wave the residual vector comes from the multivariate
    normal with covariance Delta_t (I - omega)^{-1} Delta_t; the observed
    value adds mu, the person effect, and the time effect. Values are not
    clipped (they can leave [-1, 1]); the CSV export path applies its own
    squashing. One master seed drives every draw: person effects, time
    effects, group labels, residuals, dissonance noise, in that order.
    """
    waves = tuple(waves)
    t_count = len(waves)
    delta = np.asarray(design.delta, dtype=float)
    if delta.shape[0] != t_count:
        raise DimensionError(f"delta has {delta.shape[0]} waves, expected {t_count}")
    omega = np.asarray(design.omega, dtype=float)
    p = omega.shape[0]
    mu = np.asarray(design.mu, dtype=float)
    rng = np.random.default_rng(seed)

    person_eff = (
        rng.normal(0.0, design.person_sd, (n_persons, p))
        if design.person_sd > 0
        else np.zeros((n_persons, p))
    )
    time_eff = (
        rng.normal(0.0, design.time_sd, (t_count, p))
        if design.time_sd > 0
        else np.zeros((t_count, p))
    )
    groups = None
    if design.groups:
        labels = rng.integers(0, len(design.groups), n_persons)
        groups = {f"p{i:04d}": design.groups[g] for i, g in enumerate(labels)}

    values = np.empty((n_persons, t_count, p))
    if design.sampler == "chain":
        for t in range(t_count):
            resid = sample_equilibrium(
                omega, delta[t], n_persons, burn_in=200, thin=5, seed=rng.integers(2**63)
            )
            values[:, t, :] = mu + person_eff + time_eff[t] + resid
    else:
        try:
            base_chol = np.linalg.cholesky(implied_covariance(omega, np.ones(p)))
        except ModelDomainError as exc:
            raise ModelDomainError(f"wave {waves[0]!r}: {exc}") from exc
        rho = float(design.wave_rho)
        if not 0.0 <= rho < 1.0:
            raise DomainError("wave_rho must lie in [0, 1)")
        z = None
        for t in range(t_count):
            if (delta[t] <= 0).any():
                raise ModelDomainError(f"wave {waves[t]!r}: scaling values must be positive")
            eta = rng.standard_normal((n_persons, p)) @ base_chol.T
            z = eta if (z is None or rho == 0.0) else rho * z + math.sqrt(1.0 - rho * rho) * eta
            values[:, t, :] = mu + person_eff + time_eff[t] + z * delta[t]

    if design.intervention is not None:
        iv = design.intervention
        pre = waves.index(iv.after_wave)
        treated = np.ones(n_persons, dtype=bool)
        if groups is not None and design.control_group is not None:
            treated = np.array(
                [groups[f"p{i:04d}"] != design.control_group for i in range(n_persons)]
            )
        movers = np.zeros(n_persons, dtype=bool)
        if iv.energy_quantile is not None:
            h_pre = -np.einsum("ij,jk,ik->i", values[:, pre, :], omega, values[:, pre, :])
            cut = np.quantile(h_pre, iv.energy_quantile)
            movers = treated & (h_pre >= cut)
        for t in range(pre + 1, t_count):
            values[treated, t, :] += iv.mean_shift
            if movers.any():
                values[movers, t, :] = _energy_descent(
                    values[movers, t, :], omega, iv.descent_rate, iv.descent_steps
                )

    dissonance = None
    if design.dissonance is not None:
        dd = design.dissonance
        dissonance = {}
        for wave in dd.waves:
            t = waves.index(wave)
            h = -np.einsum("ij,jk,ik->i", values[:, t, :], omega, values[:, t, :])
            z = (h - h.mean()) / (h.std() or 1.0)
            latent = 4.0 + dd.loading * z
            items = latent[:, None] + rng.normal(0.0, dd.noise_sd, (n_persons, 3))
            dissonance[wave] = np.clip(items, 1.0, 7.0)

    panel = PanelDataset(
        persons=tuple(f"p{i:04d}" for i in range(n_persons)),
        time_points=waves,
        beliefs=design.beliefs,
        roles=dict(design.roles),
        values=values,
        scale="belief",
        dissonance=dissonance,
        topic=design.topic,
        groups=groups,
    )
    return SyntheticStudy(
        design=design,
        panel=panel,
        person_effects=person_eff,
        time_effects=time_eff,
        seed=seed,
    )
