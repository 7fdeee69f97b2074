import numpy as np
import pytest

import beliefnet as bn


@pytest.fixture(scope="module")
def study():
    beliefs = tuple(f"b{i}" for i in range(4))
    roles = {b: ("moral" if i < 2 else "social") for i, b in enumerate(beliefs)}
    omega = np.zeros((4, 4))
    for i, j, w in [(0, 1, 0.25), (2, 3, 0.3), (0, 2, 0.15)]:
        omega[i, j] = omega[j, i] = w
    design = bn.StudyDesign(
        beliefs=beliefs,
        roles=roles,
        omega=omega,
        delta=np.array([1.0, 0.85, 0.8, 0.78])[:, None] * np.full(4, 0.55)[None, :],
        mu=np.zeros(4),
        person_sd=0.25,
        wave_rho=0.8,
        groups=("control", "g1", "g2"),
        control_group="control",
        intervention=bn.InterventionEffect(
            after_wave="w2a", energy_quantile=0.67, descent_rate=0.5, descent_steps=2
        ),
        dissonance=bn.DissonanceDesign(waves=("w1", "w2b"), noise_sd=1.0),
    )
    generated = bn.generate_panel(design, 220, ("w1", "w2a", "w2b", "w3"), seed=55)
    model = bn.fit_spec(bn.residualize(generated.panel), bn.ModelSpec(True, True, False, False))
    return generated.panel, model


class TestBuildReport:
    def test_basic_sections_present(self, study):
        panel, model = study
        result = bn.build_report(panel, model, options=bn.AnalyzeOptions(control_group="control"))
        report = result.report
        assert len(report["temperature"]["rows"]) == 4
        assert report["energy_change_correlations"]["pre_wave"] == "w2a"
        assert report["energy_change_correlations"]["post_wave"] == "w2b"
        assert {"normality", "variance_decomposition", "multilevel_vs_pooled"} <= set(
            report["diagnostics"]
        )
        assert set(result.plot_tables) >= {
            "temperature_by_wave",
            "energies",
            "energy_vs_change",
            "energy_pre_post",
            "energy_vs_dissonance",
        }

    def test_per_wave_valence_option(self, study):
        panel, model = study
        fixed = bn.build_report(
            panel, model, options=bn.AnalyzeOptions(control_group="control", valence_wave="w1")
        ).report
        per_wave = bn.build_report(
            panel,
            model,
            options=bn.AnalyzeOptions(control_group="control", valence_wave="per-wave"),
        ).report
        assert per_wave["dissonance"]["valence_wave"] == "per-wave"
        # subgroup sizes may differ once the split is recomputed per wave
        def sizes(report, wave):
            return {
                r["subset"]: r["n"]
                for r in report["dissonance"]["correlations"]
                if r["time"] == wave
            }
        assert sizes(fixed, "w1") == sizes(per_wave, "w1")

    def test_residual_energy_flag_consistent(self, study):
        panel, model = study
        result = bn.build_report(
            panel,
            model,
            options=bn.AnalyzeOptions(control_group="control", use_residual_energies=True),
        )
        row = result.plot_tables["energies"][0]
        per_belief = sum(v for k, v in row.items() if k.startswith("H_"))
        assert row["energy"] == pytest.approx(per_belief, abs=1e-9)
        resid = bn.residualize(panel)
        grid = bn.energy_grid(panel, model.omega, use_residuals=True)
        i = panel.persons.index(row["person_id"])
        t = panel.time_points.index(row["time"])
        assert row["energy"] == pytest.approx(grid[i, t], abs=1e-12)

    def test_mismatched_model_rejected(self, study):
        panel, model = study
        from dataclasses import replace

        wrong = replace(model, beliefs=("x", "y", "z", "w"))
        with pytest.raises(bn.DomainError):
            bn.build_report(panel, wrong)

    def test_requires_rescaled_panel(self, study):
        panel, model = study
        from dataclasses import replace

        raw = replace(panel, scale="raw")
        with pytest.raises(bn.DomainError):
            bn.build_report(raw, model)
