import json

import numpy as np
import pytest

from afcp.cli import (
    ColumnRoles,
    RunConfig,
    bundled_configs,
    ingest_csv,
    ingest_tables,
    main,
    resolve_config,
    write_csv,
)
from afcp.data import InputError
from afcp.synth import MedicalSynthConfig, OutlierSynthConfig, gen_medical, gen_outlier

ROLES = {"label_column": "y", "attribute_columns": ["Color"], "feature_columns": ["x"]}


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def test_first_appearance_coding(tmp_path):
    p = _write(tmp_path / "d.csv", "x,Color,y\n0.1,Blue,a\n0.2,Grey,b\n0.3,Blue,a\n")
    out = ingest_csv(p, ROLES)
    assert out.dictionaries["Color"] == ["Blue", "Grey"]
    np.testing.assert_array_equal(out.dataset.attributes[:, 0], [0, 1, 0])
    np.testing.assert_array_equal(out.dataset.labels, [0, 1, 0])
    assert out.dataset.spec.attributes[0].level_names == ("Blue", "Grey")


def test_ingest_errors(tmp_path):
    with pytest.raises(InputError, match="empty dataset"):
        ingest_csv(_write(tmp_path / "h.csv", "x,Color,y\n"), ROLES)
    rows = "".join(f"{i / 10},Blue,a\n" for i in range(5)) + "abc,Grey,b\n"
    with pytest.raises(InputError, match="row 7"):
        ingest_csv(_write(tmp_path / "bad.csv", "x,Color,y\n" + rows), ROLES)
    with pytest.raises(InputError, match="missing column 'Color'"):
        ingest_csv(_write(tmp_path / "m.csv", "x,y\n0.1,a\n"), ROLES)
    with pytest.raises(InputError, match="row 3: missing value"):
        ingest_csv(_write(tmp_path / "nan.csv", "x,Color,y\n0.1,Blue,a\n0.2,,a\n"), ROLES)
    with pytest.raises(InputError, match="file not found"):
        ingest_csv(tmp_path / "nope.csv", ROLES)
    with pytest.raises(InputError, match="empty dataset"):
        ingest_csv(_write(tmp_path / "z.csv", ""), ROLES)


def test_declared_levels_and_shared_dictionaries(tmp_path):
    roles = ColumnRoles.from_dict({**ROLES, "levels": {"Color": ["Grey", "Blue"]}})
    a = _write(tmp_path / "a.csv", "x,Color,y\n0.1,Blue,a\n")
    b = _write(tmp_path / "b.csv", "x,Color,y\n0.2,Grey,b\n0.3,Blue,a\n")
    da, db = ingest_tables([a, b], roles)
    np.testing.assert_array_equal(da.dataset.attributes[:, 0], [1])
    np.testing.assert_array_equal(db.dataset.attributes[:, 0], [0, 1])
    assert da.dataset.spec == db.dataset.spec
    assert db.dataset.ids.tolist() == [1, 2]
    with pytest.raises(InputError, match="declared levels"):
        ingest_csv(_write(tmp_path / "c.csv", "x,Color,y\n0.1,Red,a\n"), roles)


@pytest.mark.parametrize("make", [
    lambda: gen_medical(MedicalSynthConfig(120, seed=4)),
    lambda: gen_outlier(OutlierSynthConfig(80, seed=5)),
])
def test_gen_ingest_round_trip(tmp_path, make):
    data = make()
    roles = write_csv(data, tmp_path / "d.csv")
    back = ingest_csv(tmp_path / "d.csv", ColumnRoles.from_dict(json.loads(json.dumps(roles.to_dict()))))
    assert back.dataset.equals(data)


def test_gen_command_round_trip(tmp_path, capsys):
    assert main(["gen", "--n", "50", "--seed", "3", "--out", str(tmp_path), "--name", "s"]) == 0
    roles = json.loads((tmp_path / "s.roles.json").read_text())
    back = ingest_csv(tmp_path / "s.csv", roles)
    assert back.dataset.equals(gen_medical(MedicalSynthConfig(50, seed=3)))


def test_config_round_trip():
    for name in bundled_configs():
        cfg, _ = resolve_config(name)
        again = RunConfig.from_dict(json.loads(cfg.dumps()))
        assert again == cfg
        assert again.dumps() == cfg.dumps()


def test_config_validation():
    with pytest.raises(InputError, match="alpha"):
        RunConfig.from_dict({"kind": "classify", "data": {"source": "synthetic-medical"}, "methods": ["afcp"],
                             "alpha": 1.5})
    with pytest.raises(InputError):
        RunConfig.from_dict({"kind": "outlier", "data": {"source": "synthetic-outlier"}, "methods": ["afcp_plus"]})
    with pytest.raises(InputError):
        RunConfig.from_dict({"kind": "classify", "data": {"source": "synthetic-outlier"}, "methods": ["afcp"]})
    with pytest.raises(InputError):
        RunConfig.from_dict({"kind": "classify", "data": {"source": "csv"}, "methods": ["afcp"]})
    with pytest.raises(InputError):
        resolve_config("no-such-config")


def _tiny_config(tmp_path, **kw):
    cfg = {"name": "tiny", "kind": "classify", "data": {"source": "synthetic-medical"},
           "methods": ["marginal", "afcp"], "sample_sizes": [100], "n_test": 50, "n_reps": 2,
           "model": {"hidden_layers": [8], "epochs": 10}, "output_dir": str(tmp_path / "cfg_out")}
    cfg.update(kw)
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps(cfg))
    return path


def test_run_writes_outputs(tmp_path, capsys):
    path = _tiny_config(tmp_path)
    assert main(["run", "--config", str(path), "--out", str(tmp_path / "o")]) == 0
    csv_text = (tmp_path / "o" / "tiny.csv").read_text()
    assert csv_text.startswith("method,sample_size,attribute,level,metric,value,se\n")
    assert len(csv_text.splitlines()) > 1
    assert (tmp_path / "o" / "tiny.md").exists()


def test_env_overrides(tmp_path, monkeypatch, capsys):
    path = _tiny_config(tmp_path)
    monkeypatch.setenv("AFCP_OUT", str(tmp_path / "env"))
    monkeypatch.setenv("AFCP_SEED", "11")
    assert main(["run", "--config", str(path)]) == 0
    env_csv = (tmp_path / "env" / "tiny.csv").read_text()
    assert main(["run", "--config", str(path), "--seed", "11", "--out", str(tmp_path / "flag")]) == 0
    assert (tmp_path / "flag" / "tiny.csv").read_text() == env_csv
    monkeypatch.setenv("AFCP_SEED", "x")
    assert main(["run", "--config", str(path)]) != 0


def test_csv_source_config(tmp_path, capsys):
    data = gen_medical(MedicalSynthConfig(400, seed=1))
    roles = write_csv(data, tmp_path / "pool.csv")
    path = _tiny_config(tmp_path, data={"source": "csv", "path": "pool.csv", "roles": roles.to_dict()},
                        preprocessing=[{"op": "label_noise", "attribute": "Color", "level": "Blue"}])
    assert main(["run", "--config", str(path), "--out", str(tmp_path / "o")]) == 0


def _prob_files(tmp_path, n_calib):
    rng = np.random.default_rng(0)
    header = "Color,y,p0,p1,p2\n"
    def rows(n):
        out = ""
        for _ in range(n):
            p = [float(v) for v in rng.dirichlet(np.ones(3))]
            out += f"{'Blue' if rng.random() < 0.3 else 'Grey'},{rng.integers(0, 3)},{p[0]!r},{p[1]!r},{1 - p[0] - p[1]!r}\n"
        return out
    _write(tmp_path / "cal.csv", header + rows(n_calib))
    _write(tmp_path / "test.csv", header + rows(4))
    roles = {"label_column": "y", "attribute_columns": ["Color"], "feature_columns": [],
             "probability_columns": ["p0", "p1", "p2"], "levels": {"y": ["0", "1", "2"]}}
    _write(tmp_path / "roles.json", json.dumps(roles))


def test_predict_with_empty_calibration(tmp_path, capsys):
    _prob_files(tmp_path, 0)
    code = main(["predict", "--calib", str(tmp_path / "cal.csv"), "--test", str(tmp_path / "test.csv"),
                 "--roles", str(tmp_path / "roles.json"), "--alpha", "0.1"])
    assert code == 0
    lines = [json.loads(l) for l in capsys.readouterr().out.splitlines()]
    assert len(lines) == 4
    assert all(rec["set"] == ["0", "1", "2"] for rec in lines)


def test_predict_methods(tmp_path, capsys):
    _prob_files(tmp_path, 60)
    args = ["predict", "--calib", str(tmp_path / "cal.csv"), "--test", str(tmp_path / "test.csv"),
            "--roles", str(tmp_path / "roles.json")]
    for method in ("marginal", "partial", "afcp_plus", "afcp_lc"):
        assert main(args + ["--method", method]) == 0
    recs = [json.loads(l) for l in capsys.readouterr().out.splitlines()]
    assert len(recs) == 16
    assert "selected" in recs[-1]


def test_predict_outlier_with_training(tmp_path, capsys):
    data = gen_outlier(OutlierSynthConfig(400, seed=2))
    roles = write_csv(data.take(np.arange(200)), tmp_path / "train.csv")
    inliers = data.take(200 + np.flatnonzero(data.labels[200:380] == 0))
    write_csv(inliers, tmp_path / "cal.csv")
    write_csv(data.take(np.arange(380, 400)), tmp_path / "test.csv")
    (tmp_path / "roles.json").write_text(json.dumps(roles.to_dict()))
    code = main(["predict", "--kind", "outlier", "--calib", str(tmp_path / "cal.csv"),
                 "--test", str(tmp_path / "test.csv"), "--train", str(tmp_path / "train.csv"),
                 "--roles", str(tmp_path / "roles.json"), "--method", "afcp"])
    assert code == 0
    recs = [json.loads(l) for l in capsys.readouterr().out.splitlines()]
    assert len(recs) == 20 and all(0 < r["pvalue"] <= 1 for r in recs)


def test_unknown_subcommand_and_missing_file(tmp_path, capsys):
    assert main(["frobnicate"]) != 0
    assert main(["run", "--config", str(tmp_path / "missing.json")]) != 0
    err = capsys.readouterr().err
    assert "afcp: error" in err
