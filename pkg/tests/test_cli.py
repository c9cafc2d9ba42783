import csv
import io
import json
import subprocess
import sys

import jsonschema
import numpy as np
import pytest

from tgcn.cli import METRICS_SCHEMA, load_model, main
from tgcn.data import load_dataset, make_splits, row_normalize_features
from tgcn.training import ModelConfig, train


@pytest.fixture(scope="module")
def sbm_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("sbm")
    assert main(["gen-sbm", "--n", "60", "--blocks", "2", "--p-in", "0.5", "--p-out", "0.05",
                 "--seeds-per-block", "3", "--seed", "1", "--out", str(out)]) == 0
    return out


def run_train(tmp_path, sbm_dir, *extra, name="m.json"):
    out = tmp_path / name
    code = main(["train", "--dataset", str(sbm_dir), "--epochs", "15", "--hidden", "8",
                 "--out", str(out), *extra])
    return code, (json.loads(out.read_text()) if out.exists() else None)


class TestTrain:
    def test_metrics_schema(self, tmp_path, sbm_dir):
        code, doc = run_train(tmp_path, sbm_dir, "--seeds", "0,1")
        assert code == 0
        jsonschema.validate(doc, METRICS_SCHEMA)
        assert [r["seed"] for r in doc["runs"]] == [0, 1]
        assert len(doc["runs"][0]["epochs"]) == 15
        assert doc["config"]["model"] == "tgcn2"

    def test_zero_alpha_tgcn1_is_gcn(self, tmp_path, sbm_dir):
        _, a = run_train(tmp_path, sbm_dir, "--model", "tgcn1", "--alpha", "0", name="a.json")
        _, b = run_train(tmp_path, sbm_dir, "--model", "gcn", name="b.json")
        assert a["aggregate"] == b["aggregate"]
        assert [e["loss"] for e in a["runs"][0]["epochs"]] == [e["loss"] for e in b["runs"][0]["epochs"]]

    @pytest.mark.parametrize("extra", [
        ["--model", "tgcn3", "--layers", "2"],
        ["--model", "tgcn4", "--order", "3", "--prop", "rw"],
        ["--model", "tgcn1", "--auto-alpha", "--prop", "ppr"],
        ["--model", "gcn", "--prop", "adj", "--no-normalize", "--layers", "1"],
    ])
    def test_variants_run(self, tmp_path, sbm_dir, extra):
        code, doc = run_train(tmp_path, sbm_dir, *extra)
        assert code == 0 and doc["aggregate"]["mean"] is not None

    def test_missing_dataset_flag(self, tmp_path, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["train", "--out", str(tmp_path / "x.json")])
        assert exc.value.code == 2
        assert not (tmp_path / "x.json").exists()

    def test_missing_directory_is_data_error(self, tmp_path):
        assert main(["train", "--dataset", str(tmp_path / "nope")]) == 3

    @pytest.mark.parametrize("extra", [
        ["--model", "gcn", "--order", "3"],
        ["--model", "tgcn2", "--auto-alpha"],
        ["--dropout", "1.0"],
        ["--split", "1/2/3"],
    ])
    def test_config_errors(self, tmp_path, sbm_dir, extra):
        code, doc = run_train(tmp_path, sbm_dir, *extra)
        assert code == 2 and doc is None

    def test_corrupt_dataset(self, tmp_path, sbm_dir):
        bad = tmp_path / "bad"
        bad.mkdir()
        for f in sbm_dir.iterdir():
            (bad / f.name).write_bytes(f.read_bytes())
        (bad / "labels.txt").write_text("0\n")
        assert main(["train", "--dataset", str(bad), "--epochs", "1"]) == 3

    def test_point_cloud(self, tmp_path):
        rng = np.random.default_rng(0)
        lines = [f"{x} {y} {z} {int(x > 0)}" for x, y, z in rng.normal(size=(40, 3))]
        (tmp_path / "c.txt").write_text("\n".join(lines) + "\n")
        code = main(["train", "--points", str(tmp_path / "c.txt"), "--knn", "5", "--epochs", "5",
                     "--out", str(tmp_path / "p.json")])
        assert code == 0

        def no_nan(token):
            raise AssertionError(f"non-JSON constant {token}")

        doc = json.loads((tmp_path / "p.json").read_text(), parse_constant=no_nan)
        assert doc["config"]["points"].endswith("c.txt")
        assert doc["runs"][0]["epochs"][0]["val_acc"] is None
        jsonschema.validate(doc, METRICS_SCHEMA)


class TestEval:
    def test_train_accuracy_not_below_test(self, tmp_path, sbm_dir, capsys):
        prefix = tmp_path / "model"
        code, _ = run_train(tmp_path, sbm_dir, "--epochs", "100", "--save-params", str(prefix))
        assert code == 0
        capsys.readouterr()
        accs = {}
        for on in ("train", "test"):
            assert main(["eval", "--params", f"{prefix}.seed0.npz", "--dataset", str(sbm_dir), "--on", on]) == 0
            accs[on] = json.loads(capsys.readouterr().out)["accuracy"]
        assert accs["train"] >= accs["test"]

    def test_eval_matches_train_record(self, tmp_path, sbm_dir, capsys):
        prefix = tmp_path / "model"
        _, doc = run_train(tmp_path, sbm_dir, "--save-params", str(prefix))
        capsys.readouterr()
        main(["eval", "--params", f"{prefix}.seed0.npz", "--dataset", str(sbm_dir)])
        assert json.loads(capsys.readouterr().out)["accuracy"] == doc["runs"][0]["test_acc"]

    def test_model_file_round_trip(self, tmp_path, sbm_dir):
        prefix = tmp_path / "model"
        run_train(tmp_path, sbm_dir, "--model", "tgcn4", "--save-params", str(prefix))
        model, meta = load_model(f"{prefix}.seed0.npz")
        assert [s.model for s in model.specs] == ["tgcn4", "tgcn4"]
        assert len(model.params[0].theta) == 3
        assert meta["prop"] == "sym-normalized-selfloop"

    def test_bad_model_file(self, tmp_path, sbm_dir):
        (tmp_path / "junk.npz").write_bytes(b"not a zip")
        assert main(["eval", "--params", str(tmp_path / "junk.npz"), "--dataset", str(sbm_dir)]) == 3


class TestSweep:
    def test_single_point_equals_train(self, tmp_path, sbm_dir, capsys):
        common = ["--dataset", str(sbm_dir), "--epochs", "10", "--hidden", "8", "--seeds", "0,2"]
        assert main(["sweep-alpha", *common, "--grid", "0.3"]) == 0
        rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
        assert len(rows) == 1 and float(rows[0]["alpha"]) == 0.3

        ds = load_dataset(sbm_dir)
        ds.features = row_normalize_features(ds.features)
        vals = []
        for seed in (0, 2):
            cfg = ModelConfig.create("tgcn1", ds.num_features, ds.num_classes, hidden=8, epochs=10,
                                     seed=seed, alpha_init=0.3)
            vals.append(train(cfg, ds, make_splits(ds.n, "10/30/60", seed))[1].val_acc[-1])
        assert float(rows[0]["mean"]) == pytest.approx(np.mean(vals), abs=1e-15)

    def test_range_grid(self, tmp_path, sbm_dir):
        out = tmp_path / "s.csv"
        assert main(["sweep-alpha", "--dataset", str(sbm_dir), "--epochs", "2", "--hidden", "4",
                     "--grid", "0:0.2:0.1", "--out", str(out)]) == 0
        alphas = [float(r["alpha"]) for r in csv.DictReader(out.open())]
        assert alphas == [0.0, 0.1, 0.2]

    def test_auto_alpha_rejected(self, sbm_dir):
        assert main(["sweep-alpha", "--dataset", str(sbm_dir), "--auto-alpha", "--grid", "0.1"]) == 2


class TestGenSbm:
    def test_degenerate_blocks_are_components(self, tmp_path, capsys):
        out = tmp_path / "d"
        assert main(["gen-sbm", "--n", "30", "--blocks", "3", "--p-in", "1", "--p-out", "0",
                     "--seeds-per-block", "1", "--out", str(out)]) == 0
        ds = load_dataset(out)
        assert ds.graph.connected_components() == 3
        assert ds.graph.num_edges == 3 * 45
        assert "components=3" in capsys.readouterr().out

    def test_writes_splits(self, tmp_path):
        out = tmp_path / "d"
        main(["gen-sbm", "--n", "50", "--out", str(out), "--split", "60/20/20"])
        doc = json.loads((out / "splits.json").read_text())
        assert (len(doc["train"]), len(doc["val"]), len(doc["test"])) == (30, 10, 10)

    def test_invalid(self, tmp_path):
        assert main(["gen-sbm", "--p-in", "0.1", "--p-out", "0.5", "--out", str(tmp_path / "x")]) == 2


class TestSpectralTools:
    def test_spectral_check_passes(self, capsys):
        assert main(["spectral-check", "--n", "15", "--trials", "5", "--degree", "4"]) == 0
        assert "PASS" in capsys.readouterr().out

    def test_spectral_check_tolerance_fail(self):
        assert main(["spectral-check", "--n", "15", "--trials", "2", "--tol", "0"]) == 4

    def test_spectral_check_over_cap(self):
        assert main(["spectral-check", "--n", "30", "--cap", "20"]) == 2

    def test_approx_compare_heat(self, capsys):
        assert main(["approx-compare", "--orders", "1-5"]) == 0
        rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
        assert [int(r["order"]) for r in rows] == [1, 2, 3, 4, 5]
        assert float(rows[-1]["chebyshev_error"]) < float(rows[0]["chebyshev_error"])

    def test_approx_compare_identity_polynomial(self, capsys):
        assert main(["approx-compare", "--kernel", "polynomial", "--coeffs", "0,1", "--orders", "1,3"]) == 0
        for r in csv.DictReader(io.StringIO(capsys.readouterr().out)):
            assert float(r["taylor_error"]) <= 1e-10
            assert float(r["chebyshev_error"]) <= 1e-10

    def test_approx_compare_order_zero(self, capsys):
        assert main(["approx-compare", "--orders", "0"]) == 0
        assert capsys.readouterr().out.splitlines()[1].startswith("0,")

    def test_approx_compare_unknown_kernel(self):
        assert main(["approx-compare", "--kernel", "gabor"]) == 2


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "tgcn", "spectral-check", "--n", "5", "--trials", "2"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "PASS" in proc.stdout
    proc = subprocess.run([sys.executable, "-m", "tgcn", "bogus"], capture_output=True, text=True)
    assert proc.returncode == 2
