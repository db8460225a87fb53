import json

import pytest

from selcon import cli, oracle


def run(argv):
    return cli.main(argv)


@pytest.fixture
def data_csv(tmp_path):
    p = tmp_path / "data.csv"
    assert run(["gen", "--n", "120", "--d", "3", "--noise", "0.3", "--seed", "1",
                "--out", str(p)]) == 0
    return p


@pytest.fixture
def grouped_csv(tmp_path):
    p = tmp_path / "grouped.csv"
    assert run(["gen", "--n", "160", "--d", "3", "--groups", "4", "--noise", "0.3",
                "--seed", "2", "--out", str(p)]) == 0
    return p


class TestGen:
    def test_deterministic_bytes(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for out in (a, b):
            assert run(["gen", "--n", "30", "--d", "2", "--groups", "3", "--seed", "9",
                        "--out", str(out)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_invalid_n(self, tmp_path):
        assert run(["gen", "--n", "0", "--d", "2", "--out", str(tmp_path / "x.csv")]) == 2


class TestSelect:
    def test_report_fields(self, data_csv, tmp_path):
        out = tmp_path / "report.json"
        code = run([
            "select", "--data", str(data_csv), "--target", "y",
            "--lambda", "0.5", "--C", "2.0", "--delta", "auto", "--k", "8",
            "--seed", "3", "--out", str(out),
        ])
        assert code == 0
        report = json.loads(out.read_text())
        assert len(report["selected"]) == 8
        assert {"f_value", "trace", "bounds", "test_mse", "selected_ids", "delta"} <= set(report)
        assert "timing" not in report

    def test_trace_non_increasing(self, data_csv, tmp_path):
        out = tmp_path / "report.json"
        run([
            "select", "--data", str(data_csv), "--target", "y",
            "--lambda", "0.5", "--C", "2.0", "--delta", "0.5", "--k", "6",
            "--backend", "exact", "--alpha-mode", "fixed", "--alpha-value", "1.0",
            "--seed", "0", "--out", str(out),
        ])
        trace = json.loads(out.read_text())["trace"]
        values = [t["f_value"] for t in trace]
        assert all(b <= a + 1e-9 for a, b in zip(values, values[1:]))

    def test_invalid_k_exit_code(self, data_csv, tmp_path):
        code = run([
            "select", "--data", str(data_csv), "--target", "y", "--k", "5000",
            "--delta", "0.5", "--out", str(tmp_path / "x.json"),
        ])
        assert code == 2

    def test_missing_column_exit_code(self, data_csv, tmp_path):
        assert run(["select", "--data", str(data_csv), "--target", "nope",
                    "--delta", "0.5"]) == 2

    def test_missing_file_exit_code(self, tmp_path):
        assert run(["select", "--data", str(tmp_path / "nope.csv"), "--target", "y",
                    "--delta", "0.5"]) == 2

    def test_timing_flag_adds_field(self, data_csv, tmp_path):
        out = tmp_path / "t.json"
        run([
            "select", "--data", str(data_csv), "--target", "y", "--delta", "0.5",
            "--k", "4", "--timing", "--out", str(out),
        ])
        assert "timing" in json.loads(out.read_text())

    def test_thread_invariance(self, data_csv, tmp_path):
        outs = []
        for threads in ("1", "4"):
            out = tmp_path / f"r{threads}.json"
            run([
                "select", "--data", str(data_csv), "--target", "y",
                "--lambda", "0.5", "--C", "1.0", "--delta", "0.4", "--k", "6",
                "--threads", threads, "--seed", "5", "--out", str(out),
            ])
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_env_seed_override(self, data_csv, tmp_path, monkeypatch):
        out1, out2 = tmp_path / "s1.json", tmp_path / "s2.json"
        monkeypatch.setenv("SELCON_SEED", "11")
        run(["select", "--data", str(data_csv), "--target", "y", "--delta", "0.5",
             "--k", "4", "--seed", "3", "--out", str(out1)])
        monkeypatch.delenv("SELCON_SEED")
        run(["select", "--data", str(data_csv), "--target", "y", "--delta", "0.5",
             "--k", "4", "--seed", "11", "--out", str(out2)])
        assert out1.read_bytes() == out2.read_bytes()

    def test_sgd_two_layer_backend(self, tmp_path):
        data = tmp_path / "tiny.csv"
        run(["gen", "--n", "40", "--d", "2", "--noise", "0.2", "--seed", "4",
             "--out", str(data)])
        out = tmp_path / "sgd.json"
        code = run([
            "select", "--data", str(data), "--target", "y", "--backend", "sgd",
            "--model", "two_layer", "--epochs", "30", "--delta", "0.5", "--k", "4",
            "--iters", "2", "--alpha-mode", "fixed", "--alpha-value", "1.0",
            "--out", str(out),
        ])
        assert code == 0
        report = json.loads(out.read_text())
        assert report["model"]["kind"] == "two_layer"
        assert len(report["selected"]) == 4

    def test_config_file_and_flag_override(self, data_csv, tmp_path):
        cfg = tmp_path / "cfg.ini"
        cfg.write_text(
            "[problem]\nlambda = 0.5\nC = 1.0\ndelta = 0.4\nk = 4\n"
            "[trainer]\nseed = 7\n[selcon]\nL = 3\n"
        )
        out1, out2 = tmp_path / "c1.json", tmp_path / "c2.json"
        run(["select", "--data", str(data_csv), "--target", "y",
             "--config", str(cfg), "--out", str(out1)])
        report = json.loads(out1.read_text())
        assert len(report["selected"]) == 4
        # Flag overrides the file.
        run(["select", "--data", str(data_csv), "--target", "y",
             "--config", str(cfg), "--k", "6", "--out", str(out2)])
        assert len(json.loads(out2.read_text())["selected"]) == 6


class TestVerify:
    def test_default_suite_passes(self, tmp_path):
        out = tmp_path / "verify.json"
        code = run(["verify", "--n", "5", "--d", "2", "--trials", "40",
                    "--seed", "0", "--out", str(out)])
        assert code == 0
        reports = json.loads(out.read_text())
        names = {r["property"] for r in reports}
        assert {"monotone", "sandwich", "modular_bound",
                "alpha_certificate", "kappa_certificate"} == names
        assert all(r["passed"] for r in reports)

    def test_single_property(self, tmp_path):
        out = tmp_path / "one.json"
        code = run(["verify", "--property", "monotone", "--n", "5", "--trials", "20",
                    "--out", str(out)])
        assert code == 0
        reports = json.loads(out.read_text())
        assert len(reports) == 1 and reports[0]["property"] == "monotone"

    def test_nonzero_exit_on_failure(self, tmp_path, monkeypatch):
        failed = oracle.OracleReport(
            property_name="monotone", instances_checked=1, worst_slack=-1.0,
            tolerance=1e-8, passed=False,
        )
        monkeypatch.setattr(cli.oracle, "check_monotone", lambda *a, **k: failed)
        code = run(["verify", "--property", "monotone", "--n", "4",
                    "--out", str(tmp_path / "f.json")])
        assert code == 3


class TestBench:
    def test_csv_shape(self, data_csv, tmp_path):
        out = tmp_path / "bench.csv"
        code = run([
            "bench", "--data", str(data_csv), "--target", "y", "--ks", "4,8",
            "--lambda", "0.5", "--C", "1.0", "--delta", "0.4", "--seed", "1",
            "--alpha-mode", "fixed", "--alpha-value", "1.0", "--out", str(out),
        ])
        assert code == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "method,k,mse,f,seconds,speedup"
        methods = {line.split(",")[0] for line in lines[1:]}
        assert methods == {"full", "full-constrained", "selcon",
                           "selcon-unconstrained", "random", "random-constrained"}
        # 2 full rows + 4 methods x 2 ks
        assert len(lines) == 1 + 2 + 8
        full_row = [l for l in lines if l.startswith("full,")][0]
        assert float(full_row.split(",")[5]) == pytest.approx(1.0)


class TestFairnessCmd:
    def test_requires_group(self, data_csv):
        assert run(["fairness", "--data", str(data_csv), "--target", "y",
                    "--delta", "0.5"]) == 2

    def test_emits_rows(self, grouped_csv, tmp_path):
        out = tmp_path / "fair.json"
        code = run([
            "fairness", "--data", str(grouped_csv), "--target", "y", "--group", "group",
            "--partition", "by_group", "--lambda", "0.3", "--C", "5.0",
            "--delta", "auto", "--k", "8", "--seed", "0", "--out", str(out),
        ])
        assert code == 0
        payload = json.loads(out.read_text())
        assert payload["q"] == 4
        assert len(payload["rows"]) == 4
        for row in payload["rows"]:
            assert {"delta", "selcon", "random_constrained"} <= set(row)
