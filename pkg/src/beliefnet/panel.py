"""Longitudinal belief-panel ingestion and preprocessing.

Input files are long-format CSV (person_id, time, variable, value) plus a
schema mapping each variable to a role (moral, social, dissonance, safety,
group) and a response scale (likert7, percent). Loading enforces listwise
completeness: persons missing any required value are dropped and counted,
never silently.

Downstream steps: `rescale_beliefs` maps raw responses onto the [-1, 1]
agreement scale, `residualize` removes person and time means (two-way
within transformation), and `dissonance_index` builds the felt-dissonance
score with its Cronbach alpha.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd

from .errors import (
    ConflictError,
    DimensionError,
    DomainError,
    ParseError,
    SchemaError,
)

BELIEF_ROLES = ("moral", "social", "safety")
ROLES = BELIEF_ROLES + ("dissonance", "group")
SCALES = ("likert7", "percent")

RAW_RANGE = {"likert7": (1.0, 7.0), "percent": (0.0, 100.0)}


@dataclass(frozen=True)
class VariableSpec:
    """Schema entry for one input variable."""

    name: str
    role: str
    scale: str | None = None
    reverse: bool = False

    def __post_init__(self):
        if self.role not in ROLES:
            raise SchemaError(f"variable {self.name!r}: unknown role {self.role!r}")
        if self.role != "group" and self.scale not in SCALES:
            raise SchemaError(f"variable {self.name!r}: unknown scale {self.scale!r}")
        if self.reverse and self.scale != "likert7":
            raise SchemaError(f"variable {self.name!r}: reverse coding requires likert7")


@dataclass(frozen=True)
class PanelDataset:
    """Complete persons x time points x beliefs response grid.

    `values` hold either raw responses (``scale == "raw"``) or rescaled
    agreement scores in [-1, 1] (``scale == "belief"``). Dissonance items
    are kept on their 1-7 scale (already recoded so higher = more
    dissonance) in `dissonance`, one (n_persons, 3) block per wave where
    they were measured.
    """

    persons: tuple[str, ...]
    time_points: tuple[str, ...]
    beliefs: tuple[str, ...]
    roles: dict[str, str]
    values: np.ndarray
    scale: str = "raw"
    dissonance: dict[str, np.ndarray] | None = None
    safety_beliefs: tuple[str, ...] = ()
    safety_values: np.ndarray | None = None
    topic: str | None = None
    groups: dict[str, str] | None = None
    dropped_persons: tuple[str, ...] = ()

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        expect = (len(self.persons), len(self.time_points), len(self.beliefs))
        if v.shape != expect:
            raise DimensionError(f"values shape {v.shape} != {expect}")
        if np.isnan(v).any():
            raise DomainError("panel contains missing cells after listwise filter")
        if len(set(self.time_points)) != len(self.time_points):
            raise ConflictError("duplicate time point labels")
        for b in self.beliefs:
            if self.roles.get(b) not in BELIEF_ROLES:
                raise SchemaError(f"belief {b!r} lacks a moral/social tag")
        object.__setattr__(self, "values", v)

    @property
    def n_persons(self) -> int:
        return len(self.persons)

    @property
    def n_times(self) -> int:
        return len(self.time_points)

    @property
    def n_beliefs(self) -> int:
        return len(self.beliefs)

    def belief_names(self, role: str) -> tuple[str, ...]:
        return tuple(b for b in self.beliefs if self.roles[b] == role)

    def belief_index(self, names) -> np.ndarray:
        pos = {b: i for i, b in enumerate(self.beliefs)}
        return np.array([pos[n] for n in names], dtype=int)

    def time_index(self, label: str) -> int:
        try:
            return self.time_points.index(label)
        except ValueError:
            raise DomainError(f"unknown time point {label!r}") from None

    def person_index(self, person: str) -> int:
        try:
            return self.persons.index(person)
        except ValueError:
            raise DomainError(f"unknown person {person!r}") from None


@dataclass(frozen=True)
class ResidualDataset:
    """Person- and time-demeaned belief scores (same grid as the panel)."""

    persons: tuple[str, ...]
    time_points: tuple[str, ...]
    beliefs: tuple[str, ...]
    roles: dict[str, str]
    residuals: np.ndarray
    grand_means: np.ndarray

    @property
    def n_persons(self) -> int:
        return len(self.persons)

    @property
    def n_times(self) -> int:
        return len(self.time_points)

    @property
    def n_beliefs(self) -> int:
        return len(self.beliefs)

    def at_time(self, t: int) -> np.ndarray:
        return self.residuals[:, t, :]


@dataclass(frozen=True)
class DissonanceIndex:
    """Mean of the three felt-dissonance items plus their Cronbach alpha."""

    score: np.ndarray
    alpha: float
    alpha_error: str | None = None


def load_schema(source) -> dict[str, VariableSpec]:
    """Read a schema mapping (JSON file path or dict) into VariableSpec entries."""
    if isinstance(source, (str,)) or hasattr(source, "__fspath__"):
        with open(source, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    else:
        raw = source
    if not isinstance(raw, dict) or not raw:
        raise SchemaError("schema must be a non-empty mapping of variable -> spec")
    out = {}
    for name, entry in raw.items():
        if not isinstance(entry, dict):
            raise SchemaError(f"schema entry for {name!r} must be a mapping")
        out[name] = VariableSpec(
            name=name,
            role=entry.get("role", ""),
            scale=entry.get("scale"),
            reverse=bool(entry.get("reverse", False)),
        )
    if not any(s.role in ("moral", "social") for s in out.values()):
        raise SchemaError("schema declares no moral or social beliefs")
    return out


def _parse_value(raw, row_idx: int, variable: str) -> float:
    if raw is None:
        return math.nan
    text = str(raw).strip()
    if text == "" or text.lower() in ("na", "nan"):
        return math.nan
    try:
        return float(text)
    except ValueError:
        raise ParseError(
            f"row {row_idx}: non-numeric value {raw!r} for variable {variable!r}"
        ) from None


def load_panel(path, schema, topic=None, time_order=None) -> PanelDataset:
    """Load a long-format CSV into a listwise-complete PanelDataset.

    Parameters
    ----------
    path : str
        CSV with header person_id, time, variable, value.
    schema : str | dict
        Variable schema (see `load_schema`).
    topic : str, optional
        Topic tag stored in the dataset metadata.
    time_order : sequence of str, optional
        Explicit wave ordering; defaults to order of first appearance.

    Persons missing any belief at any wave, or any declared dissonance item
    at a wave where that item was measured, are dropped and recorded in
    ``dropped_persons``. Duplicate (person, time, variable) keys raise
    ConflictError; non-numeric values raise ParseError with the row index.
    """
    specs = load_schema(schema)
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except FileNotFoundError:
        raise
    except Exception as exc:  # malformed CSV structure
        raise ParseError(f"could not parse {path}: {exc}") from exc
    required_cols = ["person_id", "time", "variable", "value"]
    missing = [c for c in required_cols if c not in frame.columns]
    if missing:
        raise SchemaError(f"input file lacks columns: {missing}")

    belief_names = [n for n, s in specs.items() if s.role in ("moral", "social")]
    safety_names = [n for n, s in specs.items() if s.role == "safety"]
    diss_names = [n for n, s in specs.items() if s.role == "dissonance"]
    group_names = [n for n, s in specs.items() if s.role == "group"]
    if diss_names and len(diss_names) != 3:
        raise SchemaError(f"expected exactly 3 dissonance items, got {len(diss_names)}")

    persons: list[str] = []
    times: list[str] = []
    seen_keys = set()
    cells: dict[tuple[str, str, str], float] = {}
    groups: dict[str, str] = {}
    diss_waves: set[str] = set()

    for row_idx, row in enumerate(frame.itertuples(index=False), start=1):
        person, time, variable, value = (
            row.person_id.strip(),
            row.time.strip(),
            row.variable.strip(),
            row.value,
        )
        if variable not in specs:
            continue
        spec = specs[variable]
        if spec.role == "group":
            label = str(value).strip()
            if person in groups and groups[person] != label:
                raise ConflictError(
                    f"row {row_idx}: conflicting group labels for person {person!r}"
                )
            groups[person] = label
            if person not in persons:
                persons.append(person)
            continue
        key = (person, time, variable)
        if key in seen_keys:
            raise ConflictError(
                f"row {row_idx}: duplicate entry for person {person!r}, "
                f"time {time!r}, variable {variable!r}"
            )
        seen_keys.add(key)
        val = _parse_value(value, row_idx, variable)
        if spec.role == "dissonance" and not math.isnan(val):
            diss_waves.add(time)
        cells[key] = val
        if person not in persons:
            persons.append(person)
        if spec.role != "dissonance" and time not in times:
            times.append(time)

    if not cells:
        raise ParseError(f"{path}: no usable rows")
    if time_order is not None:
        extra = [t for t in times if t not in time_order]
        if extra:
            raise SchemaError(f"time points {extra} not in declared time_order")
        times = [t for t in time_order if t in times]

    def grid(names, time_labels):
        out = np.full((len(persons), len(time_labels), len(names)), np.nan)
        for i, person in enumerate(persons):
            for j, time in enumerate(time_labels):
                for k, name in enumerate(names):
                    out[i, j, k] = cells.get((person, time, name), math.nan)
        return out

    belief_grid = grid(belief_names, times)
    safety_grid = grid(safety_names, times) if safety_names else None
    diss_order = sorted(
        diss_waves, key=lambda w: (times.index(w) if w in times else len(times), w)
    )
    diss_grid = grid(diss_names, diss_order) if diss_names and diss_order else None

    complete = ~np.isnan(belief_grid).any(axis=(1, 2))
    if safety_grid is not None:
        complete &= ~np.isnan(safety_grid).any(axis=(1, 2))
    if diss_grid is not None:
        complete &= ~np.isnan(diss_grid).any(axis=(1, 2))

    kept = [p for p, ok in zip(persons, complete) if ok]
    dropped = tuple(p for p, ok in zip(persons, complete) if not ok)
    if not kept:
        raise DimensionError("no person has complete data")
    keep_mask = np.asarray(complete)

    # recode reversed dissonance items (8 - x) so higher = more dissonance
    dissonance = None
    if diss_grid is not None:
        diss_grid = diss_grid[keep_mask]
        for k, name in enumerate(diss_names):
            if specs[name].reverse:
                diss_grid[:, :, k] = 8.0 - diss_grid[:, :, k]
        dissonance = {w: diss_grid[:, j, :].copy() for j, w in enumerate(diss_order)}

    roles = {n: specs[n].role for n in belief_names}
    roles.update({n: specs[n].role for n in safety_names})
    return PanelDataset(
        persons=tuple(kept),
        time_points=tuple(times),
        beliefs=tuple(belief_names),
        roles=roles,
        values=belief_grid[keep_mask],
        scale="raw",
        dissonance=dissonance,
        safety_beliefs=tuple(safety_names),
        safety_values=safety_grid[keep_mask] if safety_grid is not None else None,
        topic=topic,
        groups={p: groups[p] for p in kept if p in groups} or None,
        dropped_persons=dropped,
    )


def _rescale_grid(values, names, specs_scale, persons, times):
    out = np.empty_like(values)
    for k, name in enumerate(names):
        scale = specs_scale[name]
        lo, hi = RAW_RANGE[scale]
        col = values[:, :, k]
        bad = (col < lo) | (col > hi)
        if bad.any():
            i, j = np.argwhere(bad)[0]
            raise DomainError(
                f"value {col[i, j]} for variable {name!r} out of {scale} range "
                f"(person {persons[i]!r}, time {times[j]!r})"
            )
        if scale == "likert7":
            out[:, :, k] = (col - 4.0) / 3.0
        else:
            out[:, :, k] = (col - 50.0) / 50.0
    return out


def rescale_beliefs(panel: PanelDataset, scales: dict[str, str] | None = None) -> PanelDataset:
    """Map raw responses onto the [-1, 1] agreement scale.

    Likert-7 items map via (x - 4) / 3, percent items via (x - 50) / 50.
    The per-variable scale defaults to likert7 for moral/safety beliefs and
    percent for social beliefs; pass `scales` to override.
    """
    if panel.scale == "belief":
        return panel
    if scales is None:
        scales = {
            b: ("likert7" if panel.roles[b] in ("moral", "safety") else "percent")
            for b in panel.beliefs + panel.safety_beliefs
        }
    values = _rescale_grid(panel.values, panel.beliefs, scales, panel.persons, panel.time_points)
    safety_values = panel.safety_values
    if safety_values is not None:
        safety_values = _rescale_grid(
            safety_values, panel.safety_beliefs, scales, panel.persons, panel.time_points
        )
    return replace(panel, values=values, safety_values=safety_values, scale="belief")


def include_safety(panel: PanelDataset) -> PanelDataset:
    """Append the safety beliefs to the main belief set (for centrality runs)."""
    if panel.safety_values is None:
        raise DomainError("panel has no safety beliefs")
    values = np.concatenate([panel.values, panel.safety_values], axis=2)
    return replace(
        panel,
        beliefs=panel.beliefs + panel.safety_beliefs,
        values=values,
        safety_beliefs=(),
        safety_values=None,
    )


def residualize(panel: PanelDataset) -> ResidualDataset:
    """Remove person and time means from each belief (two-way within transform).

    For balanced panels this equals the residual from regressing each belief
    on person and time dummies: value - person mean - time mean + grand mean.
    Requires a rescaled panel with at least 2 persons and 2 time points.
    """
    if panel.scale != "belief":
        raise DomainError("residualize expects a rescaled panel (scale='belief')")
    if panel.n_persons < 2 or panel.n_times < 2:
        raise DimensionError(
            f"residualize needs >= 2 persons and >= 2 time points, "
            f"got {panel.n_persons} x {panel.n_times}"
        )
    v = panel.values
    person_mean = v.mean(axis=1, keepdims=True)
    time_mean = v.mean(axis=0, keepdims=True)
    grand = v.mean(axis=(0, 1), keepdims=True)
    residuals = v - person_mean - time_mean + grand
    return ResidualDataset(
        persons=panel.persons,
        time_points=panel.time_points,
        beliefs=panel.beliefs,
        roles=dict(panel.roles),
        residuals=residuals,
        grand_means=grand.reshape(-1).copy(),
    )


def cronbach_alpha(items: np.ndarray) -> float:
    """Cronbach's alpha for an (n_obs, k_items) block, k/(k-1) * (1 - sum var_i / var_total)."""
    items = np.asarray(items, dtype=float)
    if items.ndim != 2 or items.shape[1] < 2:
        raise DimensionError("alpha needs a 2-d block with >= 2 items")
    k = items.shape[1]
    total_var = items.sum(axis=1).var(ddof=1)
    if total_var <= 0.0:
        raise DomainError("alpha undefined: zero total variance")
    item_var = items.var(axis=0, ddof=1).sum()
    return (k / (k - 1.0)) * (1.0 - item_var / total_var)


def dissonance_index(items: np.ndarray) -> DissonanceIndex:
    """Average three recoded dissonance items into one score per respondent.

    The items must already be coded so higher = more dissonance. Alpha is
    NaN (with `alpha_error` set) when the total variance is zero; the score
    is returned regardless.
    """
    items = np.asarray(items, dtype=float)
    if items.ndim != 2 or items.shape[1] != 3:
        raise DimensionError(f"expected (n, 3) item block, got {items.shape}")
    score = items.mean(axis=1)
    try:
        alpha = cronbach_alpha(items)
        err = None
    except DomainError as exc:
        alpha = math.nan
        err = str(exc)
    return DissonanceIndex(score=score, alpha=alpha, alpha_error=err)


def panel_dissonance(panel: PanelDataset) -> dict[str, DissonanceIndex]:
    """Per-wave dissonance index for every wave carrying the three items."""
    if not panel.dissonance:
        return {}
    return {wave: dissonance_index(block) for wave, block in panel.dissonance.items()}


def split_by_valence(panel: PanelDataset, wave: str | None = None):
    """Split persons by the sign of their belief sum at a reference wave.

    Returns (negative, non_negative) tuples of person ids; sums of exactly
    zero land in the non-negative group. Defaults to the first wave.
    """
    if panel.scale != "belief":
        raise DomainError("valence split expects rescaled beliefs")
    t = panel.time_index(wave) if wave is not None else 0
    sums = panel.values[:, t, :].sum(axis=1)
    negative = tuple(p for p, s in zip(panel.persons, sums) if s < 0)
    non_negative = tuple(p for p, s in zip(panel.persons, sums) if s >= 0)
    return negative, non_negative
