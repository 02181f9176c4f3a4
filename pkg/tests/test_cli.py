import json

from adml.cli import main
from adml.dataset import load_dataset


def test_synth_then_run_then_report(tmp_path, capsys):
    ds = tmp_path / "ds"
    code = main(["synth", "--out", str(ds), "--n-per-class", "8,8",
                 "--dims", "5,5,5", "--informative", "10", "--effect", "4.0",
                 "--seed", "3"])
    assert code == 0
    assert load_dataset(ds).participants   # generated tree validates

    manifest = tmp_path / "manifest.json"
    manifest.write_text(json.dumps({
        "dataset_root": str(ds),
        "task": {"name": "demo", "group_a": {"label": "CN"},
                 "group_b": {"label": "AD"}},
        "features": {"type": "voxel", "mask_path": str(ds / "mask.nii.gz")},
        "classifier": {"kind": "logreg", "grid": [1.0]},
        "validation": {"n_iterations": 3, "inner_k": 3},
        "output_dir": str(tmp_path / "out"),
    }), encoding="utf-8")
    assert main(["run", "--manifest", str(manifest)]) == 0
    exp = tmp_path / "out" / "experiment-demo"
    assert (exp / "summary.tsv").exists()

    capsys.readouterr()
    assert main(["report", "--results", str(exp), "--svg"]) == 0
    out = capsys.readouterr().out
    assert "balanced_accuracy" in out
    assert (exp / "metrics_boxplot.svg").exists()


def test_convert_generic_subcommand(tmp_path):
    ds = tmp_path / "src"
    main(["synth", "--out", str(ds), "--n-per-class", "1,1",
          "--dims", "3,3,3", "--informative", "2", "--effect", "1.0",
          "--seed", "0"])
    images = tmp_path / "images"
    images.mkdir()
    scan = (ds / "sub-0001" / "ses-M00" / "anat" /
            "sub-0001_ses-M00_T1w.nii.gz")
    (images / "a.nii.gz").write_bytes(scan.read_bytes())
    table = tmp_path / "table.tsv"
    table.write_text(
        "participant_id\tsex\tage_baseline\tdiagnosis_baseline\tamyloid_tracer"
        "\tamyloid_suvr\tsession_id\tmonths_from_baseline\tdiagnosis\tmmse"
        "\tcdr_global\timage_file_t1w\timage_file_pet\n"
        "sub-01\tM\t70.0\tCN\tn/a\tn/a\tses-M00\t0\tCN\tn/a\tn/a\ta.nii.gz\tn/a\n",
        encoding="utf-8")
    code = main(["convert-generic", "--tabular", str(table),
                 "--images", str(images), "--out", str(tmp_path / "bids")])
    assert code == 0
    assert load_dataset(tmp_path / "bids").participants


def test_validation_errors_exit_1(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"bogus": True}), encoding="utf-8")
    assert main(["run", "--manifest", str(bad)]) == 1
    assert "error:" in capsys.readouterr().err

    # valid manifest, missing dataset -> AdmlError inside the pipeline -> 1
    manifest = tmp_path / "m.json"
    manifest.write_text(json.dumps({
        "dataset_root": str(tmp_path / "missing"),
        "task": {"name": "t", "group_a": {"label": "CN"},
                 "group_b": {"label": "AD"}},
        "features": {"type": "voxel", "mask_path": str(tmp_path / "mask.nii.gz")},
        "classifier": {"kind": "svm"},
        "output_dir": str(tmp_path / "out"),
    }), encoding="utf-8")
    assert main(["run", "--manifest", str(manifest)]) == 1

    assert main(["synth", "--out", str(tmp_path / "x"), "--n-per-class", "0,5",
                 "--dims", "3,3,3", "--informative", "1", "--effect", "1.0",
                 "--seed", "1"]) == 1


def test_runtime_failures_exit_2(tmp_path, capsys):
    # report on a directory without result tables is an environment failure,
    # not a validation error
    assert main(["report", "--results", str(tmp_path)]) == 2
    assert "internal error:" in capsys.readouterr().err
