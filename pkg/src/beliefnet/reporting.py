"""Assemble the analysis report and plot tables from a panel and a model.

The report mirrors the study's result structure: temperature by wave, the
specification ranking, per-group correlations between pre-intervention
energies and absolute belief change with their random-effects pool,
per-group pre/post energy drops with their pool, direction tallies,
energy-dissonance correlations split by belief valence, and the
validation diagnostics. Everything is plain dicts/lists so the CLI can
serialize it without further processing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import stats as st
from .energy import energy_grid
from .errors import DimensionError, DomainError
from .ggm import FittedModel, temperature_of
from .panel import PanelDataset, dissonance_index, residualize, split_by_valence


@dataclass(frozen=True)
class AnalyzeOptions:
    """Knobs for the analysis layer; defaults follow the study design."""

    pre_wave: str | None = None
    post_wave: str | None = None
    valence_wave: str | None = None
    control_group: str | None = None
    temperature_mode: str = "scaling-mean"
    standardizer: str = "change"
    change_role: str = "moral"
    use_residual_energies: bool = False


@dataclass
class AnalysisReport:
    """Report payload plus the per-figure plot tables."""

    report: dict
    plot_tables: dict[str, list[dict]] = field(default_factory=dict)


def _default_change_waves(panel: PanelDataset, options: AnalyzeOptions):
    if options.pre_wave and options.post_wave:
        return options.pre_wave, options.post_wave
    if panel.n_times >= 3:
        return panel.time_points[1], panel.time_points[2]
    if panel.n_times == 2:
        return panel.time_points[0], panel.time_points[1]
    return None, None


def _group_membership(panel: PanelDataset, control_group):
    """Persons per analysis group, control excluded, sorted for determinism."""
    if not panel.groups:
        return {}
    out: dict[str, list[int]] = {}
    for i, person in enumerate(panel.persons):
        label = panel.groups.get(person)
        if label is None or label == control_group:
            continue
        out.setdefault(label, []).append(i)
    return {g: np.array(idx) for g, idx in sorted(out.items())}


def build_report(
    panel: PanelDataset,
    model: FittedModel,
    ranking_rows: list[dict] | None = None,
    options: AnalyzeOptions = AnalyzeOptions(),
) -> AnalysisReport:
    """Run the full analysis layer over a rescaled panel and fitted model."""
    if panel.scale != "belief":
        raise DomainError("analysis expects a rescaled panel")
    if tuple(model.beliefs) != tuple(panel.beliefs):
        raise DomainError("model beliefs do not match the panel")
    if tuple(model.time_points) != tuple(panel.time_points):
        raise DomainError("model time points do not match the panel")

    warnings: list[str] = []
    plot_tables: dict[str, list[dict]] = {}

    temps = temperature_of(model, mode=options.temperature_mode)
    temp_rows = [
        {"time": t, "temperature": float(v), "beta": float(1.0 / v)}
        for t, v in zip(temps.time_points, temps.values)
    ]
    plot_tables["temperature_by_wave"] = temp_rows

    energies = energy_grid(panel, model.omega, use_residuals=options.use_residual_energies)
    if options.use_residual_energies:
        grid = residualize(panel).residuals
    else:
        grid = panel.values
    energy_rows = []
    for t, label in enumerate(panel.time_points):
        w = model.omega[t]
        per_belief = -grid[:, t, :] * (grid[:, t, :] @ w)
        for i, person in enumerate(panel.persons):
            row = {"person_id": person, "time": label, "energy": float(energies[i, t])}
            row.update(
                {f"H_{b}": float(per_belief[i, k]) for k, b in enumerate(panel.beliefs)}
            )
            energy_rows.append(row)
    energy_rows.sort(key=lambda r: (r["person_id"], panel.time_points.index(r["time"])))
    plot_tables["energies"] = energy_rows

    # --- belief change and energy drop around the intervention ------------
    pre_wave, post_wave = _default_change_waves(panel, options)
    change_section = {"rows": [], "meta": None, "pre_wave": pre_wave, "post_wave": post_wave}
    drop_section = {"rows": [], "meta": None, "pre_wave": pre_wave, "post_wave": post_wave}
    direction = None
    if pre_wave is None:
        warnings.append("fewer than 2 waves: change analyses skipped")
    else:
        change = st.belief_change(panel, pre_wave, post_wave, role=options.change_role)
        direction = st.direction_tally(change.signed)
        pre_t = panel.time_index(pre_wave)
        post_t = panel.time_index(post_wave)
        groups = _group_membership(panel, options.control_group)
        if not groups:
            groups = {"all": np.arange(panel.n_persons)}
            warnings.append("no intervention groups: single pooled group used")
        corr_effects, drop_effects = [], []
        rows_change, rows_drop = [], []
        for label, idx in groups.items():
            h_pre = energies[idx, pre_t]
            h_post = energies[idx, post_t]
            abs_change = change.absolute[idx]
            try:
                ct = st.pearson(h_pre, abs_change)
                rows_change.append(
                    {"group": label, "r": ct.r, "t": ct.t, "df": ct.df, "p": ct.p, "n": ct.n}
                )
                if ct.n > 3 and abs(ct.r) < 1.0:
                    corr_effects.append(st.correlation_effect(ct.r, ct.n, label))
            except (DomainError, DimensionError) as exc:
                warnings.append(f"group {label!r}: correlation skipped ({exc})")
            try:
                mc = st.standardized_mean_change(h_pre, h_post, options.standardizer)
                rows_drop.append(
                    {
                        "group": label,
                        "md": mc.md,
                        "d": mc.d,
                        "se": mc.se,
                        "t": mc.t,
                        "df": mc.df,
                        "p": mc.p,
                        "n": mc.n,
                    }
                )
                drop_effects.append(st.mean_change_effect(mc, label))
            except (DomainError, DimensionError) as exc:
                warnings.append(f"group {label!r}: mean change skipped ({exc})")
        change_section["rows"] = rows_change
        drop_section["rows"] = rows_drop
        if len(corr_effects) >= 2:
            change_section["meta"] = _meta_dict(st.meta_random_effects(corr_effects))
        else:
            warnings.append("meta-analysis of correlations skipped: fewer than 2 groups")
        if len(drop_effects) >= 2:
            drop_section["meta"] = _meta_dict(st.meta_random_effects(drop_effects))
        else:
            warnings.append("meta-analysis of mean changes skipped: fewer than 2 groups")

        person_group = panel.groups or {}
        plot_tables["energy_vs_change"] = [
            {
                "person_id": person,
                "group": person_group.get(person, ""),
                "pre_energy": float(energies[i, pre_t]),
                "abs_change": float(change.absolute[i]),
                "signed_change": float(change.signed[i]),
            }
            for i, person in enumerate(panel.persons)
        ]
        plot_tables["energy_pre_post"] = [
            {
                "group": label,
                "n": int(idx.size),
                "pre_mean": float(energies[idx, pre_t].mean()),
                "pre_se": float(energies[idx, pre_t].std(ddof=1) / math.sqrt(idx.size)),
                "post_mean": float(energies[idx, post_t].mean()),
                "post_se": float(energies[idx, post_t].std(ddof=1) / math.sqrt(idx.size)),
            }
            for label, idx in groups.items()
            if idx.size >= 2
        ]

    # --- dissonance ---------------------------------------------------------
    dissonance_section = None
    if panel.dissonance:
        valence_wave = options.valence_wave or panel.time_points[0]

        def valence_mask(wave):
            # "per-wave" recomputes the split at each correlated wave
            ref = wave if valence_wave == "per-wave" else valence_wave
            negative, _ = split_by_valence(panel, ref)
            neg_set = set(negative)
            return np.array([p in neg_set for p in panel.persons])

        alpha_rows, corr_rows, scatter = {}, [], []
        for wave in sorted(panel.dissonance, key=_wave_key(panel)):
            block = panel.dissonance[wave]
            idx_t = panel.time_index(wave) if wave in panel.time_points else None
            di = dissonance_index(block)
            alpha_rows[wave] = float(di.alpha)
            if di.alpha_error:
                warnings.append(f"wave {wave!r}: {di.alpha_error}")
            if idx_t is None:
                warnings.append(f"dissonance wave {wave!r} has no matching time point")
                continue
            neg_mask = valence_mask(wave)
            h_t = energies[:, idx_t]
            for subset, mask in (
                ("all", np.ones(panel.n_persons, dtype=bool)),
                ("negative", neg_mask),
                ("non_negative", ~neg_mask),
            ):
                if mask.sum() < 3:
                    continue
                try:
                    ct = st.pearson(h_t[mask], di.score[mask])
                except DomainError:
                    continue
                corr_rows.append(
                    {
                        "time": wave,
                        "subset": subset,
                        "r": ct.r,
                        "t": ct.t,
                        "df": ct.df,
                        "p": ct.p,
                        "n": ct.n,
                    }
                )
            scatter.extend(
                {
                    "person_id": person,
                    "time": wave,
                    "valence": "negative" if neg_mask[i] else "non_negative",
                    "energy": float(h_t[i]),
                    "dissonance": float(di.score[i]),
                }
                for i, person in enumerate(panel.persons)
            )
        dissonance_section = {
            "valence_wave": valence_wave,
            "alpha": alpha_rows,
            "correlations": corr_rows,
        }
        plot_tables["energy_vs_dissonance"] = scatter
    else:
        warnings.append("no dissonance items: dissonance analyses skipped")

    # --- validation diagnostics ----------------------------------------------
    diagnostics = {}
    try:
        resid = residualize(panel)
        nd = st.normality_diagnostic(resid)
        diagnostics["normality"] = {
            "skewness": float(nd.skewness),
            "excess_kurtosis": float(nd.excess_kurtosis),
            "qq_max_abs_dev": float(nd.qq_max_abs_dev),
            "degenerate": bool(nd.degenerate),
        }
    except (DimensionError, DomainError) as exc:
        warnings.append(f"normality diagnostic skipped ({exc})")
    try:
        vd = st.variance_decomposition(panel)
        diagnostics["variance_decomposition"] = {
            "beliefs": list(vd.beliefs),
            "within_person": [float(v) for v in vd.within_person],
            "between_person": [float(v) for v in vd.between_person],
            "correlation": float(vd.correlation),
        }
        mv = st.multilevel_vs_pooled(panel)
        diagnostics["multilevel_vs_pooled"] = {
            "agreement_r": float(mv.agreement_r),
            "mean_abs_pooled": float(mv.mean_abs_pooled),
            "mean_abs_within": float(mv.mean_abs_within),
        }
    except (DimensionError, DomainError) as exc:
        warnings.append(f"panel diagnostics skipped ({exc})")

    report = {
        "topic": panel.topic,
        "n_persons": panel.n_persons,
        "time_points": list(panel.time_points),
        "dropped_persons": list(panel.dropped_persons),
        "model": {
            "spec": model.spec.label,
            "n_params": model.n_params,
            "log_likelihood": float(model.log_likelihood),
            "bic": float(model.bic),
        },
        "temperature": {"mode": options.temperature_mode, "rows": temp_rows},
        "ranking": ranking_rows or [],
        "energy_change_correlations": change_section,
        "energy_mean_change": drop_section,
        "direction_tally": direction,
        "dissonance": dissonance_section,
        "diagnostics": diagnostics,
        "warnings": warnings,
    }
    return AnalysisReport(report=report, plot_tables=plot_tables)


def _wave_key(panel: PanelDataset):
    def key(wave):
        try:
            return (panel.time_points.index(wave), wave)
        except ValueError:
            return (len(panel.time_points), wave)

    return key


def _meta_dict(meta: st.MetaResult) -> dict:
    return {
        "kind": meta.kind,
        "pooled": float(meta.pooled),
        "pooled_raw": float(meta.pooled_raw),
        "se": float(meta.se),
        "tau2": float(meta.tau2),
        "q": float(meta.q),
        "z": float(meta.z),
        "p": float(meta.p),
        "n_groups": meta.n_groups,
        "weights": {g: float(w) for g, w in meta.weights},
    }
