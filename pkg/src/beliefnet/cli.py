"""Command-line pipeline: fit, simulate, analyze, report.

Every run is driven by one JSON config plus flag overrides (flags win) and
a single master seed; outputs are byte-stable given identical config and
seed. Files are written to a temp name and atomically renamed, so error
paths never leave partial outputs. Exit codes: 0 ok, 1 analysis error,
2 I/O or config error. Failures print a machine-readable error JSON to
stderr. The worker count for the specification sweep is capped by the
BELIEFNET_THREADS environment variable.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import tempfile

import numpy as np

from .dynamics import (
    DissonanceDesign,
    InterventionEffect,
    StudyDesign,
    generate_panel,
    initial_state,
    run_chain,
    spawn_seeds,
)
from .errors import (
    BeliefNetError,
    ConflictError,
    ParseError,
    SchemaError,
)
from .ggm import FittedModel, select_model, temperature_of
from .panel import PanelDataset, load_panel, rescale_beliefs, residualize
from .reporting import AnalyzeOptions, build_report

EXIT_OK = 0
EXIT_ANALYSIS = 1
EXIT_CONFIG = 2

DEMO_BELIEFS = {
    "harm_benefit": "moral",
    "tradition": "moral",
    "naturalness": "moral",
    "fairness": "moral",
    "doctors": "social",
    "family": "social",
}
DEMO_EDGES = [
    ["harm_benefit", "tradition", 0.25],
    ["harm_benefit", "naturalness", 0.2],
    ["naturalness", "fairness", -0.22],
    ["doctors", "family", 0.3],
    ["harm_benefit", "doctors", 0.15],
]
DEMO_WAVES = ["w1", "w2a", "w2b", "w3"]


# ---------------------------------------------------------------------------
# deterministic file output


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return "" if value is None else str(value)


def _atomic_write(path: str, text: str):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path: str, payload):
    _atomic_write(path, json.dumps(payload, indent=2) + "\n")


def write_csv(path: str, fieldnames, rows):
    import io

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(fieldnames)
    for row in rows:
        if isinstance(row, dict):
            writer.writerow([_fmt(row.get(f)) for f in fieldnames])
        else:
            writer.writerow([_fmt(v) for v in row])
    _atomic_write(path, buf.getvalue())


# ---------------------------------------------------------------------------
# config handling


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        try:
            cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"config {path}: invalid JSON ({exc})") from exc
    if not isinstance(cfg, dict):
        raise SchemaError(f"config {path}: expected a JSON object")
    return cfg


def _apply_overrides(cfg: dict, args) -> dict:
    cfg = dict(cfg)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.out is not None:
        cfg["out"] = args.out
    fit_cfg = dict(cfg.get("fit", {}))
    if args.temperature_mode is not None:
        fit_cfg["temperature_mode"] = args.temperature_mode
    if args.prune_alpha is not None:
        fit_cfg["prune_alpha"] = args.prune_alpha
    cfg["fit"] = fit_cfg
    sim_cfg = dict(cfg.get("simulate", {}))
    if args.proposal_width is not None:
        chains = dict(sim_cfg.get("chains", {}))
        chains["proposal_width"] = args.proposal_width
        sim_cfg["chains"] = chains
        cfg["simulate"] = sim_cfg
    cfg.setdefault("seed", 20260401)
    cfg.setdefault("out", "out")
    return cfg


# ---------------------------------------------------------------------------
# simulate


def _design_from_config(cfg: dict) -> tuple[StudyDesign, int, list[str], dict]:
    sim = dict(cfg.get("simulate", {}))
    beliefs = dict(sim.get("beliefs", DEMO_BELIEFS))
    names = tuple(beliefs)
    p = len(names)
    waves = list(sim.get("waves", DEMO_WAVES))
    edges = sim.get("edges", DEMO_EDGES if "beliefs" not in sim else [])
    omega = np.zeros((p, p))
    index = {n: i for i, n in enumerate(names)}
    for src, tgt, w in edges:
        if src not in index or tgt not in index:
            raise SchemaError(f"edge ({src}, {tgt}) names unknown beliefs")
        omega[index[src], index[tgt]] = omega[index[tgt], index[src]] = float(w)
    if "delta" in sim:
        delta = np.asarray(sim["delta"], dtype=float)
    else:
        base = np.asarray(sim.get("delta_base", 0.55), dtype=float) * np.ones(p)
        scale = np.asarray(sim.get("delta_scale", [1.0, 0.85, 0.8, 0.78][: len(waves)]), dtype=float)
        if scale.shape != (len(waves),):
            raise SchemaError("delta_scale must list one factor per wave")
        delta = scale[:, None] * base[None, :]
    mu = np.asarray(sim.get("mu", 0.0), dtype=float) * np.ones(p)
    intervention = None
    if "intervention" in sim and sim["intervention"] is not None:
        iv = sim["intervention"]
        intervention = InterventionEffect(
            after_wave=iv.get("after_wave", waves[1] if len(waves) > 1 else waves[0]),
            mean_shift=float(iv.get("mean_shift", 0.0)),
            energy_quantile=iv.get("energy_quantile"),
            descent_rate=float(iv.get("descent_rate", 0.2)),
            descent_steps=int(iv.get("descent_steps", 1)),
        )
    dissonance = None
    if "dissonance" in sim and sim["dissonance"] is not None:
        dd = sim["dissonance"]
        dissonance = DissonanceDesign(
            waves=tuple(dd.get("waves", [waves[0], waves[-1]])),
            loading=float(dd.get("loading", 1.0)),
            noise_sd=float(dd.get("noise_sd", 0.5)),
        )
    design = StudyDesign(
        beliefs=names,
        roles=beliefs,
        omega=omega,
        delta=delta,
        mu=mu,
        person_sd=float(sim.get("person_sd", 0.25)),
        time_sd=float(sim.get("time_sd", 0.1)),
        wave_rho=float(sim.get("wave_rho", 0.0)),
        groups=tuple(sim.get("groups", [])),
        control_group=sim.get("control_group"),
        intervention=intervention,
        dissonance=dissonance,
        topic=cfg.get("topic"),
        sampler=sim.get("sampler", "gaussian"),
    )
    chains = dict(sim.get("chains", {}))
    return design, int(sim.get("n_persons", 300)), waves, chains


def _raw_scale(role: str) -> str:
    return "likert7" if role in ("moral", "safety") else "percent"


def panel_to_raw_rows(panel: PanelDataset):
    """Long-format rows with beliefs mapped back to their raw scales.

    Belief-scale values are clipped to [-1, 1] before the inverse mapping,
    so the file always round-trips through load_panel + rescale_beliefs.
    """
    rows = []
    for i, person in enumerate(panel.persons):
        for t, wave in enumerate(panel.time_points):
            for k, name in enumerate(panel.beliefs):
                v = float(np.clip(panel.values[i, t, k], -1.0, 1.0))
                if _raw_scale(panel.roles[name]) == "likert7":
                    raw = v * 3.0 + 4.0
                else:
                    raw = v * 50.0 + 50.0
                rows.append((person, wave, name, raw))
    if panel.dissonance:
        for wave, block in panel.dissonance.items():
            for i, person in enumerate(panel.persons):
                for k in range(block.shape[1]):
                    rows.append((person, wave, f"dissonance_{k + 1}", float(block[i, k])))
    if panel.groups:
        first = panel.time_points[0]
        for person in panel.persons:
            if person in panel.groups:
                rows.append((person, first, "group", panel.groups[person]))
    return rows


def schema_for_panel(panel: PanelDataset) -> dict:
    schema = {
        name: {"role": panel.roles[name], "scale": _raw_scale(panel.roles[name])}
        for name in panel.beliefs
    }
    if panel.dissonance:
        for k in range(3):
            schema[f"dissonance_{k + 1}"] = {"role": "dissonance", "scale": "likert7"}
    if panel.groups:
        schema["group"] = {"role": "group"}
    return schema


def cmd_simulate(cfg: dict) -> int:
    design, n_persons, waves, chains_cfg = _design_from_config(cfg)
    seed = int(cfg["seed"])
    out = cfg["out"]
    study = generate_panel(design, n_persons, waves, seed)
    write_csv(
        os.path.join(out, "panel.csv"),
        ["person_id", "time", "variable", "value"],
        panel_to_raw_rows(study.panel),
    )
    write_json(os.path.join(out, "schema.json"), schema_for_panel(study.panel))
    write_json(
        os.path.join(out, "truth.json"),
        {
            "seed": seed,
            "n_persons": n_persons,
            "waves": waves,
            "beliefs": list(design.beliefs),
            "roles": design.roles,
            "omega": [[float(v) for v in row] for row in design.omega],
            "delta": [[float(v) for v in row] for row in design.delta],
            "mu": [float(v) for v in design.mu],
            "person_sd": design.person_sd,
            "time_sd": design.time_sd,
            "groups": list(design.groups),
            "control_group": design.control_group,
            "sampler": design.sampler,
        },
    )
    n_chains = int(chains_cfg.get("n_chains", 3))
    n_sweeps = int(chains_cfg.get("n_sweeps", 300))
    record_every = int(chains_cfg.get("record_every", 10))
    width = float(chains_cfg.get("proposal_width", 0.2))
    beta = 1.0 / float(np.mean(design.delta[0]))
    rows = []
    for chain_id, ss in enumerate(spawn_seeds(seed, n_chains)):
        state = initial_state(len(design.beliefs), beta, ss)
        _, traj = run_chain(state, design.omega, n_sweeps, width, record_every=record_every)
        for row in traj:
            rows.append([chain_id, int(row[0]), float(row[1])] + [float(v) for v in row[2:]])
    write_csv(
        os.path.join(out, "trajectories.csv"),
        ["chain_id", "sweep", "energy"] + [f"b_{name}" for name in design.beliefs],
        rows,
    )
    print(f"simulate: wrote panel ({n_persons} persons x {len(waves)} waves) to {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# fit


def _load_rescaled(cfg: dict) -> PanelDataset:
    if "panel" not in cfg or "schema" not in cfg:
        raise SchemaError("config must name 'panel' and 'schema' input files")
    panel = load_panel(
        cfg["panel"], cfg["schema"], topic=cfg.get("topic"), time_order=cfg.get("time_order")
    )
    return rescale_beliefs(panel)


def _ranking_dicts(ranking) -> list[dict]:
    return [
        {
            "spec": row.label,
            "df": row.df,
            "n_params": row.n_params,
            "log_likelihood": row.log_likelihood,
            "bic": row.bic,
            "error": row.error,
        }
        for row in ranking
    ]


def cmd_fit(cfg: dict) -> int:
    panel = _load_rescaled(cfg)
    resid = residualize(panel)
    fit_cfg = cfg.get("fit", {})
    selection = select_model(resid, prune_alpha=float(fit_cfg.get("prune_alpha", 0.01)))
    best = selection.best
    mode = fit_cfg.get("temperature_mode", "scaling-mean")
    temps = temperature_of(best, mode=mode)
    out = cfg["out"]
    write_json(os.path.join(out, "model.json"), best.to_dict())
    write_csv(
        os.path.join(out, "edges.csv"),
        ["time", "source", "target", "weight"],
        best.edge_rows(),
    )
    write_csv(
        os.path.join(out, "temperature.csv"),
        ["time", "temperature", "beta"],
        [
            (t, float(v), float(1.0 / v))
            for t, v in zip(temps.time_points, temps.values)
        ],
    )
    write_csv(
        os.path.join(out, "ranking.csv"),
        ["spec", "df", "n_params", "log_likelihood", "bic", "error"],
        _ranking_dicts(selection.ranking),
    )
    if panel.dropped_persons:
        print(f"fit: dropped {len(panel.dropped_persons)} incomplete persons")
    print(f"fit: selected {best.spec.label!r} (BIC {best.bic:.2f}) -> {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# analyze


def cmd_analyze(cfg: dict) -> int:
    out = cfg["out"]
    model_dir = cfg.get("model_dir", out)
    model_path = os.path.join(model_dir, "model.json")
    if not os.path.exists(model_path):
        raise FileNotFoundError(
            f"{model_path} not found; run `beliefnet fit` first to produce the model"
        )
    with open(model_path, "r", encoding="utf-8") as fh:
        model = FittedModel.from_dict(json.load(fh))
    ranking_rows = []
    ranking_path = os.path.join(model_dir, "ranking.csv")
    if os.path.exists(ranking_path):
        with open(ranking_path, "r", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                ranking_rows.append(
                    {
                        "spec": row["spec"],
                        "df": int(row["df"]) if row["df"] else None,
                        "n_params": int(row["n_params"]) if row["n_params"] else None,
                        "log_likelihood": float(row["log_likelihood"])
                        if row["log_likelihood"]
                        else None,
                        "bic": float(row["bic"]) if row["bic"] else None,
                        "error": row["error"] or None,
                    }
                )
    panel = _load_rescaled(cfg)
    an_cfg = cfg.get("analyze", {})
    options = AnalyzeOptions(
        pre_wave=an_cfg.get("pre_wave"),
        post_wave=an_cfg.get("post_wave"),
        valence_wave=an_cfg.get("valence_wave"),
        control_group=an_cfg.get("control_group"),
        temperature_mode=cfg.get("fit", {}).get("temperature_mode", "scaling-mean"),
        standardizer=an_cfg.get("standardizer", "change"),
        change_role=an_cfg.get("change_role", "moral"),
        use_residual_energies=bool(an_cfg.get("use_residual_energies", False)),
    )
    result = build_report(panel, model, ranking_rows=ranking_rows, options=options)
    write_json(os.path.join(out, "report.json"), result.report)
    table_columns = {
        "temperature_by_wave": ["time", "temperature", "beta"],
        "energy_vs_change": ["person_id", "group", "pre_energy", "abs_change", "signed_change"],
        "energy_pre_post": ["group", "n", "pre_mean", "pre_se", "post_mean", "post_se"],
        "energy_vs_dissonance": ["person_id", "time", "valence", "energy", "dissonance"],
    }
    for name, rows in result.plot_tables.items():
        # the energies table carries one H_<belief> column per belief
        fields = table_columns.get(name) or (list(rows[0]) if rows else ["person_id"])
        write_csv(os.path.join(out, f"{name}.csv"), fields, rows)
    print(f"analyze: wrote report.json and plot tables to {out}")
    return EXIT_OK


def cmd_report(cfg: dict) -> int:
    if "panel" not in cfg:
        if "simulate" not in cfg:
            cfg = dict(cfg)
            cfg["simulate"] = {}
        cmd_simulate(cfg)
        cfg = dict(cfg)
        cfg["panel"] = os.path.join(cfg["out"], "panel.csv")
        cfg["schema"] = os.path.join(cfg["out"], "schema.json")
    cmd_fit(cfg)
    return cmd_analyze(cfg)


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="beliefnet",
        description="Belief-network estimation, energies, dynamics and analysis",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("fit", "estimate networks and select a specification by BIC"),
        ("simulate", "generate a synthetic study and chain trajectories"),
        ("analyze", "compute energies, change statistics, and the report"),
        ("report", "simulate (if needed) + fit + analyze in one run"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--seed", type=int, help="master seed override")
        p.add_argument("--out", help="output directory override")
        p.add_argument("--temperature-mode", choices=["scaling-mean", "precision-diag-mean"])
        p.add_argument("--prune-alpha", type=float, help="Wald pruning significance level")
        p.add_argument("--proposal-width", type=float, help="chain proposal window half-width")
    return parser


COMMANDS = {
    "fit": cmd_fit,
    "simulate": cmd_simulate,
    "analyze": cmd_analyze,
    "report": cmd_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _apply_overrides(load_config(args.config), args)
        return COMMANDS[args.command](cfg)
    except (SchemaError, ParseError, ConflictError, FileNotFoundError, OSError) as exc:
        _emit_error(exc)
        return EXIT_CONFIG
    except BeliefNetError as exc:
        _emit_error(exc)
        return EXIT_ANALYSIS
    except Exception as exc:  # keep the contract: machine-readable errors
        _emit_error(exc)
        return EXIT_ANALYSIS


def _emit_error(exc: Exception):
    sys.stderr.write(
        json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n"
    )


if __name__ == "__main__":
    sys.exit(main())
