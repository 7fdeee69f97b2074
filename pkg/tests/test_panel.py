import csv

import numpy as np
import pytest

import beliefnet as bn
from conftest import make_panel

SCHEMA = {
    "trad": {"role": "moral", "scale": "likert7"},
    "benefit": {"role": "moral", "scale": "likert7"},
    "doctors": {"role": "social", "scale": "percent"},
}

SCHEMA_FULL = dict(
    SCHEMA,
    ease={"role": "dissonance", "scale": "likert7", "reverse": True},
    unbothered={"role": "dissonance", "scale": "likert7", "reverse": True},
    comfortable={"role": "dissonance", "scale": "likert7", "reverse": True},
    group={"role": "group"},
)


def write_long_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["person_id", "time", "variable", "value"])
        w.writerows(rows)


def complete_rows(persons=("a", "b"), times=("w1", "w2a", "w2b", "w3"), variables=None):
    variables = variables or list(SCHEMA)
    rows = []
    for pi, person in enumerate(persons):
        for ti, time in enumerate(times):
            for vi, var in enumerate(variables):
                value = 4 + ((pi + ti + vi) % 3) if SCHEMA[var]["scale"] == "likert7" else 40 + 5 * ti
                rows.append([person, time, var, value])
    return rows


class TestLoadPanel:
    def test_complete_ingestion(self, tmp_path):
        path = tmp_path / "panel.csv"
        write_long_csv(path, complete_rows())
        panel = bn.load_panel(str(path), SCHEMA)
        assert panel.persons == ("a", "b")
        assert panel.time_points == ("w1", "w2a", "w2b", "w3")
        assert panel.beliefs == ("trad", "benefit", "doctors")
        assert panel.dropped_persons == ()
        assert panel.values.shape == (2, 4, 3)

    def test_listwise_drop_counted(self, tmp_path):
        rows = complete_rows(persons=("a", "b", "c"))
        rows = [r for r in rows if not (r[0] == "c" and r[1] == "w3")]
        path = tmp_path / "panel.csv"
        write_long_csv(path, rows)
        panel = bn.load_panel(str(path), SCHEMA)
        assert panel.persons == ("a", "b")
        assert panel.dropped_persons == ("c",)

    def test_duplicate_key_conflict(self, tmp_path):
        rows = complete_rows()
        rows.append(["a", "w1", "trad", 5])
        path = tmp_path / "panel.csv"
        write_long_csv(path, rows)
        with pytest.raises(bn.ConflictError, match="duplicate"):
            bn.load_panel(str(path), SCHEMA)

    def test_malformed_value_names_row(self, tmp_path):
        rows = complete_rows()
        rows[5][3] = "definitely"
        path = tmp_path / "panel.csv"
        write_long_csv(path, rows)
        with pytest.raises(bn.ParseError, match="row 6"):
            bn.load_panel(str(path), SCHEMA)

    def test_dissonance_reverse_coding_and_groups(self, tmp_path):
        rows = complete_rows()
        for person, grp in (("a", "control"), ("b", "simple")):
            rows.append([person, "w1", "group", grp])
            for wave in ("w1", "w2b", "w3"):
                for item in ("ease", "unbothered", "comfortable"):
                    rows.append([person, wave, item, 2])
        path = tmp_path / "panel.csv"
        write_long_csv(path, rows)
        panel = bn.load_panel(str(path), SCHEMA_FULL)
        # reversed 7-point items: 2 -> 6
        assert set(panel.dissonance) == {"w1", "w2b", "w3"}
        assert np.all(panel.dissonance["w1"] == 6.0)
        assert panel.groups == {"a": "control", "b": "simple"}

    def test_conflicting_group_labels(self, tmp_path):
        rows = complete_rows()
        rows.append(["a", "w1", "group", "control"])
        rows.append(["a", "w2a", "group", "simple"])
        path = tmp_path / "panel.csv"
        write_long_csv(path, rows)
        with pytest.raises(bn.ConflictError, match="group"):
            bn.load_panel(str(path), SCHEMA_FULL)

    def test_missing_file(self):
        with pytest.raises(FileNotFoundError):
            bn.load_panel("nope.csv", SCHEMA)


class TestRescale:
    def test_likert_endpoints_and_midpoint(self):
        panel = make_panel(
            np.array([[[7.0, 1.0, 4.0]]]),
            roles={"b0": "moral", "b1": "moral", "b2": "moral"},
            scale="raw",
        )
        out = bn.rescale_beliefs(panel)
        assert out.values[0, 0].tolist() == [1.0, -1.0, 0.0]
        assert out.scale == "belief"

    def test_percent_endpoints(self):
        panel = make_panel(
            np.array([[[50.0, 100.0, 0.0]]]),
            roles={"b0": "social", "b1": "social", "b2": "social"},
            scale="raw",
        )
        out = bn.rescale_beliefs(panel)
        assert out.values[0, 0].tolist() == [0.0, 1.0, -1.0]

    def test_out_of_range_names_cell(self):
        panel = make_panel(
            np.array([[[8.0]]]), roles={"b0": "moral"}, scale="raw"
        )
        with pytest.raises(bn.DomainError, match="b0"):
            bn.rescale_beliefs(panel)

    def test_order_preserving(self, rng):
        raw = rng.integers(1, 8, size=(6, 2, 1)).astype(float)
        panel = make_panel(raw, roles={"b0": "moral"}, scale="raw")
        out = bn.rescale_beliefs(panel)
        flat_raw = raw.ravel()
        flat_out = out.values.ravel()
        for i in range(flat_raw.size):
            for j in range(flat_raw.size):
                if flat_raw[i] < flat_raw[j]:
                    assert flat_out[i] < flat_out[j]


class TestResidualize:
    def test_saturating_input_gives_zero(self, rng):
        n, t, p = 7, 4, 3
        person = rng.normal(size=(n, 1, p))
        time = rng.normal(size=(1, t, p))
        panel = make_panel(np.broadcast_to(person + time, (n, t, p)).copy())
        resid = bn.residualize(panel)
        assert np.abs(resid.residuals).max() < 1e-12

    def test_constant_input_gives_zero(self):
        panel = make_panel(np.full((4, 3, 2), 0.37))
        resid = bn.residualize(panel)
        assert np.abs(resid.residuals).max() < 1e-12

    def test_matches_dummy_regression(self, rng):
        n, t, p = 9, 4, 2
        person = rng.normal(size=(n, 1, p))
        time = rng.normal(size=(1, t, p))
        noise = rng.normal(scale=0.3, size=(n, t, p))
        panel = make_panel(person + time + noise)
        resid = bn.residualize(panel)
        # dummy-variable least squares oracle per belief
        rowsP = np.repeat(np.arange(n), t)
        rowsT = np.tile(np.arange(t), n)
        X = np.zeros((n * t, 1 + (n - 1) + (t - 1)))
        X[:, 0] = 1.0
        for i in range(1, n):
            X[rowsP == i, i] = 1.0
        for j in range(1, t):
            X[rowsT == j, n - 1 + j] = 1.0
        for b in range(p):
            y = panel.values[:, :, b].ravel()
            beta, *_ = np.linalg.lstsq(X, y, rcond=None)
            oracle = y - X @ beta
            assert np.abs(resid.residuals[:, :, b].ravel() - oracle).max() < 1e-9

    def test_idempotent_and_centered(self, rng):
        panel = make_panel(rng.normal(size=(8, 4, 3)))
        r1 = bn.residualize(panel)
        again = make_panel(r1.residuals)
        r2 = bn.residualize(again)
        assert np.abs(r2.residuals - r1.residuals).max() < 1e-12
        assert np.abs(r1.residuals.mean(axis=0)).max() < 1e-9
        assert np.abs(r1.residuals.mean(axis=1)).max() < 1e-9

    def test_degenerate_dimensions(self):
        with pytest.raises(bn.DimensionError):
            bn.residualize(make_panel(np.zeros((1, 4, 2))))
        with pytest.raises(bn.DimensionError):
            bn.residualize(make_panel(np.zeros((4, 1, 2))))

    def test_requires_rescaled(self):
        panel = make_panel(np.full((3, 2, 1), 4.0), roles={"b0": "moral"}, scale="raw")
        with pytest.raises(bn.DomainError):
            bn.residualize(panel)


class TestDissonance:
    def test_duplicated_items_alpha_one(self):
        x = np.array([1.0, 3.0, 5.0, 7.0, 2.0])
        items = np.stack([x, x, x], axis=1)
        idx = bn.dissonance_index(items)
        assert idx.alpha == pytest.approx(1.0, abs=1e-12)
        assert np.allclose(idx.score, x)

    def test_alpha_shift_invariance(self, rng):
        items = rng.normal(size=(40, 3))
        a1 = bn.cronbach_alpha(items)
        shifted = items.copy()
        shifted[:, 1] += 11.0
        assert bn.cronbach_alpha(shifted) == pytest.approx(a1, abs=1e-12)

    def test_independent_items_alpha_near_zero(self, rng):
        items = rng.standard_normal((10000, 3))
        alpha = bn.cronbach_alpha(items)
        assert abs(alpha) < 0.05
        # direct variance-formula oracle
        k = 3
        oracle = (k / (k - 1)) * (
            1 - items.var(axis=0, ddof=1).sum() / items.sum(axis=1).var(ddof=1)
        )
        assert alpha == pytest.approx(oracle, abs=1e-12)

    def test_zero_variance_score_still_returned(self):
        items = np.full((5, 3), 4.0)
        idx = bn.dissonance_index(items)
        assert np.allclose(idx.score, 4.0)
        assert np.isnan(idx.alpha)
        assert "zero total variance" in idx.alpha_error
        with pytest.raises(bn.DomainError):
            bn.cronbach_alpha(items)


class TestValenceSplit:
    def test_all_zero_goes_non_negative(self):
        panel = make_panel(np.zeros((4, 2, 3)))
        negative, non_negative = bn.split_by_valence(panel)
        assert negative == ()
        assert len(non_negative) == 4

    def test_simple_split(self):
        values = np.zeros((2, 2, 2))
        values[0, 0] = (-0.2, 0.1)   # sum -0.1
        values[1, 0] = (0.2, -0.1)   # sum +0.1
        panel = make_panel(values)
        negative, non_negative = bn.split_by_valence(panel, wave="w0")
        assert negative == ("p000",)
        assert non_negative == ("p001",)

    def test_matches_brute_force(self, rng):
        values = rng.uniform(-1, 1, size=(25, 3, 4))
        panel = make_panel(values)
        negative, non_negative = bn.split_by_valence(panel, wave="w1")
        neg_oracle = {
            panel.persons[i]
            for i in range(25)
            if sum(values[i, 1, k] for k in range(4)) < 0
        }
        assert set(negative) == neg_oracle
        assert set(non_negative) == set(panel.persons) - neg_oracle


class TestSafety:
    def test_include_safety_appends(self):
        panel = make_panel(np.zeros((3, 2, 2)))
        panel = bn.PanelDataset(
            persons=panel.persons,
            time_points=panel.time_points,
            beliefs=panel.beliefs,
            roles=dict(panel.roles, safe="safety"),
            values=panel.values,
            scale="belief",
            safety_beliefs=("safe",),
            safety_values=np.ones((3, 2, 1)) * 0.5,
        )
        merged = bn.include_safety(panel)
        assert merged.beliefs == ("b0", "b1", "safe")
        assert merged.values.shape == (3, 2, 3)
        assert merged.roles["safe"] == "safety"
