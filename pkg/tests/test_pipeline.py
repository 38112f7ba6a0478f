import io
import json

import numpy as np
import pytest

from localbn.pipeline import (
    ExplainConfig,
    ExplanationReport,
    batch_explain,
    confusion_cell,
    derive_seed,
    epsilon_sweep,
    explain,
    explain_sample,
    read_dataset,
    render_report,
    sweep_to_json,
)
from localbn.predictor import (
    ConstantClassifier,
    FeatureVector,
    LinearClassifier,
    ThresholdClassifier,
    mlp_load,
    predict,
)
from localbn.sampler import LabeledSample, PermutationConfig, generate_permutations

XY = ("x1", "x2")
THRESH = ThresholdClassifier(XY, "x1", 0.5)


def fv(*values):
    return FeatureVector(XY, values)


class TestExplain:
    def test_deep_inside_is_r1(self):
        r = explain(fv(0.8, 0.4), THRESH, ExplainConfig(epsilon=0.05, seed=3))
        assert r.rule == "R1_high_confidence"
        assert r.verdict["surrogate_posterior"] == {"labels": ["neg", "pos"], "probabilities": [0.0, 1.0]}
        assert r.topology["pattern"] == "isolated"
        assert r.sample["counts"] == [300]

    def test_on_boundary_is_not_r1(self):
        r = explain(fv(0.5, 0.5), THRESH, ExplainConfig(epsilon=0.1, seed=7))
        counts = dict(zip(r.sample["labels"], r.sample["counts"]))
        assert 100 < counts["pos"] < 200
        assert r.rule in ("R3_contrast", "R4_uncertain")
        assert "class" in [n for e in r.network["edges"] for n in e]

    def test_thirty_features_gives_blanket_view(self):
        names = tuple(f"f{i:02d}" for i in range(30))
        rng = np.random.default_rng(0)
        model = LinearClassifier(names, tuple(rng.normal(size=30)), 0.0)
        x = FeatureVector(names, tuple(rng.uniform(0.3, 0.7, 30)))
        r = explain(x, model, ExplainConfig(epsilon=0.3))
        assert r.view == "markov_blanket"
        assert len(r.network["nodes"]) == 31

    def test_ten_nodes_is_full_view(self):
        names = tuple(f"f{i}" for i in range(9))
        model = ThresholdClassifier(names, "f0")
        r = explain(FeatureVector(names, (0.5,) * 9), model)
        assert r.view == "full"

    def test_degenerate_epsilon_zero(self):
        r = explain(fv(0.5, 0.5), THRESH, ExplainConfig(epsilon=0.0))
        assert r.rule == "R1_high_confidence"
        assert r.network["edges"] == []

    def test_config_echo(self):
        r = explain(fv(0.3, 0.3), THRESH)
        for key in ("epsilon", "n_samples", "seed", "quartiles", "tau", "max_parents", "alpha",
                    "quantile_method", "class_var", "node_threshold"):
            assert key in r.config
        assert r.config["epsilon"] == 0.1 and r.config["n_samples"] == 300 and r.config["quartiles"] == 4

    def test_determinism_ignoring_timing(self):
        a = explain(fv(0.52, 0.5), THRESH, ExplainConfig(seed=11)).to_dict()
        b = explain(fv(0.52, 0.5), THRESH, ExplainConfig(seed=11)).to_dict()
        a.pop("timing"), b.pop("timing")
        assert a == b

    def test_stage_purity_via_serialised_sample(self):
        cfg = ExplainConfig(seed=5)
        x = fv(0.51, 0.3)
        direct = explain(x, THRESH, cfg)
        sample = generate_permutations(x, THRESH, PermutationConfig(cfg.epsilon, cfg.n_samples, cfg.seed))
        restored = LabeledSample.from_csv(sample.to_csv(), THRESH.labels)
        again = explain_sample(x, predict(THRESH, x), restored, cfg)
        assert again.network == direct.network
        assert again.verdict == direct.verdict

    def test_mlp_end_to_end(self):
        doc = {"input_names": list(XY), "output_labels": ["a", "b"],
               "layers": [{"weights": [[8, -8], [-8, 8]], "bias": [0, 0], "activation": "softmax"}]}
        r = explain(fv(0.5, 0.49), mlp_load(doc))
        assert r.prediction["label"] == "a"
        assert r.rule in ("R1_high_confidence", "R2_unreliable", "R3_contrast", "R4_uncertain")


class TestRender:
    report = explain(fv(0.5, 0.5), THRESH, ExplainConfig(seed=1))

    def test_json_round_trip(self):
        text = render_report(self.report, "json")
        assert render_report(ExplanationReport.from_json(text), "json") == text

    def test_dot(self):
        dot = render_report(self.report, "dot")
        assert dot.startswith("digraph")
        assert '"class" [label="class\\nP(' in dot
        assert "peripheries=2" in dot
        for u, v in self.report.network["edges"]:
            assert f'"{u}" -> "{v}";' in dot

    def test_dot_isolated_class_has_no_edges_in(self):
        r = explain(fv(0.9, 0.5), THRESH, ExplainConfig(epsilon=0.05))
        assert '-> "class"' not in render_report(r, "dot")

    def test_dot_marginal_precision(self):
        dot = render_report(self.report, "dot")
        p = max(self.report.marginals["class"])
        assert f"={p:.4f}\"" in dot

    def test_text_names_rule_once(self):
        text = render_report(self.report, "text")
        assert sum(text.count(rule) for rule in
                   ("R1_high_confidence", "R2_unreliable", "R3_contrast", "R4_uncertain")) == 1

    def test_unknown_format(self):
        with pytest.raises(ValueError):
            render_report(self.report, "svg")

    def test_blanket_depth(self):
        names = tuple(f"f{i:02d}" for i in range(11))
        rng = np.random.default_rng(4)
        model = LinearClassifier(names, tuple(rng.normal(size=11)), 0.0)
        r = explain(FeatureVector(names, (0.5,) * 11), model, ExplainConfig(epsilon=0.3))
        assert r.view == "markov_blanket"
        d1 = render_report(r, "dot", depth=1)
        d2 = render_report(r, "dot", depth=2)
        assert d1.count("label=") <= d2.count("label=")
        members = {"class", *r.markov_blanket["parents"], *r.markov_blanket["children"],
                   *r.markov_blanket["spouses"]}
        assert d1.count("label=") == len(members)


class TestBatch:
    def test_constant_model_cells(self):
        data = [(fv(0.1 * i, 0.5), "pos" if i % 2 else "neg") for i in range(6)]
        results = batch_explain(data, ConstantClassifier(XY, "pos"), ExplainConfig(n_samples=40))
        assert [c for _, c in results] == ["FP", "TP"] * 3

    def test_empty(self):
        assert batch_explain([], THRESH) == []

    def test_cells_match_independent_recount(self):
        rng = np.random.default_rng(2)
        pts = rng.uniform(0, 1, (40, 2))
        truth = ["pos" if a + 0.1 * rng.normal() > 0.5 else "neg" for a, _ in pts]
        data = [(fv(*p), t) for p, t in zip(pts, truth)]
        results = batch_explain(data, THRESH, ExplainConfig(n_samples=30))
        want = []
        for (a, _), t in zip(pts, truth):
            pred = "pos" if a > 0.5 else "neg"
            want.append({("pos", "pos"): "TP", ("neg", "pos"): "FP",
                         ("pos", "neg"): "FN", ("neg", "neg"): "TN"}[(t, pred)])
        assert [c for _, c in results] == want

    def test_row_seeds_differ_and_are_stable(self):
        assert derive_seed(0, 1) != derive_seed(0, 2)
        assert derive_seed(7, 3) == derive_seed(7, 3)

    def test_confusion_cell(self):
        assert confusion_cell("pos", "pos", "pos") == "TP"
        assert confusion_cell("neg", "neg", "pos") == "TN"
        assert confusion_cell("neg", "pos", "pos") == "FP"
        assert confusion_cell("pos", "neg", "pos") == "FN"


class TestDataset:
    def test_read(self):
        rows = read_dataset(io.StringIO("x2,x1,y\n0.1,0.2,pos\n0.3,0.4,neg\n"), "y", XY)
        assert rows[0][0].values == (0.2, 0.1) and rows[1][1] == "neg"

    def test_schema_mismatch(self):
        with pytest.raises(ValueError):
            read_dataset(io.StringIO("a,y\n0.1,pos\n"), "y", XY)
        with pytest.raises(ValueError):
            read_dataset(io.StringIO("x1,x2\n0.1,0.2\n"), "y")

    def test_out_of_range_row(self):
        with pytest.raises(ValueError, match="row 0"):
            read_dataset(io.StringIO("x1,x2,y\n1.5,0.2,pos\n"), "y")


class TestSweep:
    data = [(fv(v, 0.5), "pos" if v > 0.5 else "neg") for v in np.linspace(0.05, 0.95, 12)]

    def test_frequencies_sum_to_one(self):
        s = epsilon_sweep(self.data, THRESH, [0.0, 0.1, 0.4], ExplainConfig(n_samples=60))
        for point in s["grid"]:
            for cell in point["cells"].values():
                total = sum(cell["frequencies"].values())
                assert cell["empty"] or abs(total - 1) <= 1e-9
        assert s["grid"][0]["cells"]["all"]["frequencies"]["R1_high_confidence"] == 1.0
        assert s["grid"][0]["cells"]["FP"]["empty"]

    def test_deterministic_document(self):
        cfg = ExplainConfig(n_samples=60, seed=4)
        a = sweep_to_json(epsilon_sweep(self.data, THRESH, [0.1, 0.3], cfg))
        b = sweep_to_json(epsilon_sweep(self.data, THRESH, [0.1, 0.3], cfg))
        assert a == b
        assert json.loads(a)["grid"][1]["seed"] == derive_seed(4, 1)

    def test_rejects_bad_grid(self):
        with pytest.raises(ValueError):
            epsilon_sweep(self.data, THRESH, [])
        with pytest.raises(ValueError):
            epsilon_sweep(self.data, THRESH, [1.5])
