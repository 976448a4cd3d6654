import csv
import json

import numpy as np
import pytest

from fairpost.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out.strip().splitlines()
    return code, json.loads(out[-1])


def write_clusters_csv(path, n=300, seed=0):
    rng = np.random.default_rng(seed)
    a = rng.integers(0, 2, n)
    x1 = rng.normal(2.0 * (2 * a - 1), 1.0)
    x2 = rng.normal(0, 1, n)
    y = (x1 + rng.normal(0, 0.5, n) > 0).astype(int)
    lines = ["y,a,x1,x2"]
    lines += [f"{y[i]},{a[i]},{x1[i]!r},{x2[i]!r}" for i in range(n)]
    path.write_text("\n".join(lines) + "\n")


@pytest.fixture
def tightness_files(tmp_path, capsys):
    out = str(tmp_path / "t")
    code, summary = run(capsys, "synth", "--kind", "tightness", "--p", "0.25",
                        "--epsilon", "0.0", "--out", out)
    assert code == 0
    return summary


class TestSynth:
    def test_tightness_metadata_table(self, tmp_path, capsys):
        out = str(tmp_path / "s")
        code, summary = run(capsys, "synth", "--kind", "tightness", "--p", "0.45",
                            "--epsilon", "0.2", "--out", out)
        assert code == 0
        meta = json.loads(open(summary["meta"]).read())
        by_alpha = {row["alpha"]: row for row in meta["table"]}
        assert by_alpha[0.1]["excess"] == pytest.approx(1 / 3, abs=1e-5)

    def test_random_is_deterministic(self, tmp_path, capsys):
        out_a, out_b = str(tmp_path / "a"), str(tmp_path / "b")
        assert run(capsys, "synth", "--kind", "random", "--seed", "3", "--out", out_a)[0] == 0
        assert run(capsys, "synth", "--kind", "random", "--seed", "3", "--out", out_b)[0] == 0
        assert open(out_a + "_scores.csv").read() == open(out_b + "_scores.csv").read()

    def test_epsilon_out_of_range_exits_2(self, tmp_path, capsys):
        code, summary = run(capsys, "synth", "--kind", "tightness", "--p", "0.45",
                            "--epsilon", "0.95", "--out", str(tmp_path / "x"))
        assert code == 2 and summary["status"] == "error"


class TestPostprocess:
    def test_example_construction_objective(self, tightness_files, capsys, tmp_path):
        params = str(tmp_path / "p.bin")
        code, summary = run(capsys, "postprocess", "--scores", tightness_files["scores"],
                            "--schema", tightness_files["schema"], "--criterion", "sp",
                            "--alpha", "0.1", "--sigma", "0", "--out", params)
        assert code == 0
        assert summary["objective"] == pytest.approx(0.4, abs=1e-9)

    def test_alpha_one_zero_weights(self, tightness_files, capsys, tmp_path):
        params = str(tmp_path / "p1.bin")
        code, summary = run(capsys, "postprocess", "--scores", tightness_files["scores"],
                            "--schema", tightness_files["schema"], "--criterion", "sp",
                            "--alpha", "1", "--sigma", "0", "--out", params)
        assert code == 0
        assert np.allclose(summary["weights_w"], 0.0)

    def test_eopp_multiclass_mismatch_exits_2(self, tmp_path, capsys):
        scores = tmp_path / "s3.csv"
        scores.write_text(
            "r_0,r_1,r_2,g_0,g_1,g_2,g_3,g_4,g_5\n"
            "0.1,0.5,0.9,0.4,0.1,0.1,0.1,0.2,0.1\n"
            "0.9,0.5,0.1,0.1,0.4,0.1,0.2,0.1,0.1\n"
        )
        schema = tmp_path / "s3.json"
        schema.write_text(json.dumps({
            "risks": ["r_0", "r_1", "r_2"],
            "groups": [f"g_{i}" for i in range(6)],
        }))
        code, summary = run(capsys, "postprocess", "--scores", str(scores),
                            "--schema", str(schema), "--criterion", "eopp",
                            "--alpha", "0.1", "--out", str(tmp_path / "p.bin"))
        assert code == 2
        assert "binary equal opportunity" in summary["error"]

    def test_missing_schema_exits_2_and_names_path(self, tmp_path, capsys):
        code, summary = run(capsys, "postprocess", "--scores", "x.csv",
                            "--schema", str(tmp_path / "nope.json"), "--criterion", "sp",
                            "--alpha", "0.5", "--out", str(tmp_path / "p.bin"))
        assert code == 2 and "nope.json" in summary["error"]

    def test_custom_criterion_json(self, tightness_files, tmp_path, capsys):
        crit = tmp_path / "crit.json"
        crit.write_text(json.dumps({
            "num_classes": 2, "num_groups": 2,
            "constraints": [{"class": 1, "groups": [0, 1]}],
        }))
        code, summary = run(capsys, "postprocess", "--scores", tightness_files["scores"],
                            "--schema", tightness_files["schema"], "--criterion", str(crit),
                            "--alpha", "0.1", "--sigma", "0",
                            "--out", str(tmp_path / "p.bin"))
        assert code == 0
        assert summary["objective"] == pytest.approx(0.4, abs=1e-9)


class TestEvaluateAndSweep:
    def test_evaluate_deterministic_fit_reports_zero_violation(self, tightness_files,
                                                                tmp_path, capsys):
        # the sigma=0 fit on the two-atom instance ties at the split atom and
        # the smallest-index break yields a constant classifier
        params = str(tmp_path / "p.bin")
        run(capsys, "postprocess", "--scores", tightness_files["scores"],
            "--schema", tightness_files["schema"], "--criterion", "sp",
            "--alpha", "0.1", "--sigma", "0", "--out", params)
        code, summary = run(capsys, "evaluate", "--params", params,
                            "--scores", tightness_files["scores"],
                            "--schema", tightness_files["schema"],
                            "--truth-groups", "--out", str(tmp_path / "rep"))
        assert code == 0
        assert summary["violation_max"] == pytest.approx(0.0, abs=1e-12)
        assert summary["violation_semantics"] == "true"

    def test_sweep_matches_analytic_curve_and_orders_rows(self, tightness_files,
                                                          tmp_path, capsys):
        out = str(tmp_path / "sw")
        code, summary = run(capsys, "sweep", "--scores", tightness_files["scores"],
                            "--schema", tightness_files["schema"], "--criterion", "sp",
                            "--alphas", "0.05,1,0.2,0.5,0.1", "--sigma", "0",
                            "--out", out, "--no-plot")
        assert code == 0
        with open(out + ".csv") as fh:
            rows = list(csv.DictReader(fh))
        alphas = [float(r["alpha"]) for r in rows]
        assert alphas == sorted(alphas, reverse=True)
        for row in rows:
            alpha, risk = float(row["alpha"]), float(row["risk"])
            expect = 0.5 * max(1 - alpha / 0.5, 0.0)
            assert risk == pytest.approx(expect, abs=1e-6)

    def test_sweep_renders_figure(self, tightness_files, tmp_path, capsys):
        out = str(tmp_path / "fig")
        code, summary = run(capsys, "sweep", "--scores", tightness_files["scores"],
                            "--schema", tightness_files["schema"], "--criterion", "sp",
                            "--alphas", "1,0.1", "--sigma", "0", "--out", out)
        assert code == 0
        png = summary["figure"]
        assert png.endswith(".png")
        with open(png, "rb") as fh:
            assert fh.read(8).startswith(b"\x89PNG")

    def test_summaries_bit_identical_for_fixed_seed(self, tightness_files, tmp_path,
                                                    capsys):
        args = ["sweep", "--scores", tightness_files["scores"],
                "--schema", tightness_files["schema"], "--criterion", "sp",
                "--alphas", "1,0.3", "--sigma", "0.001", "--seed", "11", "--no-plot"]
        code_a = main(args + ["--out", str(tmp_path / "a")])
        out_a = capsys.readouterr().out
        code_b = main(args + ["--out", str(tmp_path / "b")])
        out_b = capsys.readouterr().out
        assert code_a == code_b == 0
        norm = lambda s: s.replace(str(tmp_path / "a"), "@").replace(str(tmp_path / "b"), "@")
        doc_a, doc_b = json.loads(norm(out_a)), json.loads(norm(out_b))
        for ra, rb in zip(doc_a["rows"], doc_b["rows"]):
            assert ra["risk"] == rb["risk"]
            assert ra["violation_max"] == rb["violation_max"]


class TestFit:
    def test_joint_fit_and_model_postprocess(self, tmp_path, capsys):
        data = tmp_path / "train.csv"
        write_clusters_csv(data, n=400, seed=1)
        schema = tmp_path / "schema.json"
        schema.write_text(json.dumps({
            "label": "y", "attribute": "a", "features": ["x1", "x2"]}))
        model = str(tmp_path / "m.bin")
        code, summary = run(capsys, "fit", "--data", str(data), "--schema", str(schema),
                            "--target", "joint", "--out", model, "--epochs", "250")
        assert code == 0
        assert summary["train_accuracy"] >= 0.55  # 4-way joint on noisy data
        params = str(tmp_path / "p.bin")
        code, summary = run(capsys, "postprocess", "--model", model, "--data", str(data),
                            "--schema", str(schema), "--criterion", "sp", "--blind",
                            "--alpha", "0.05", "--sigma", "0", "--out", params)
        assert code == 0
        assert summary["status"] == "ok"

    def test_separable_joint_accuracy(self, tmp_path, capsys):
        rng = np.random.default_rng(5)
        n = 300
        a = rng.integers(0, 2, n)
        y = rng.integers(0, 2, n)
        x1 = 4.0 * (2 * a - 1) + rng.normal(0, 0.4, n)
        x2 = 4.0 * (2 * y - 1) + rng.normal(0, 0.4, n)
        data = tmp_path / "sep.csv"
        data.write_text("\n".join(
            ["y,a,x1,x2"] + [f"{y[i]},{a[i]},{x1[i]!r},{x2[i]!r}" for i in range(n)]
        ) + "\n")
        schema = tmp_path / "schema.json"
        schema.write_text(json.dumps({
            "label": "y", "attribute": "a", "features": ["x1", "x2"]}))
        code, summary = run(capsys, "fit", "--data", str(data), "--schema", str(schema),
                            "--target", "joint", "--out", str(tmp_path / "m.bin"),
                            "--epochs", "400")
        assert code == 0
        assert summary["train_accuracy"] >= 0.95

    def test_target_y_without_label_column_exits_2(self, tmp_path, capsys):
        data = tmp_path / "d.csv"
        data.write_text("a,x1\n0,1.0\n1,2.0\n")
        schema = tmp_path / "s.json"
        schema.write_text(json.dumps({"attribute": "a", "features": ["x1"]}))
        code, summary = run(capsys, "fit", "--data", str(data), "--schema", str(schema),
                            "--target", "y", "--out", str(tmp_path / "m.bin"))
        assert code == 2
        assert "label" in summary["error"]
